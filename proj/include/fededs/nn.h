#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <string_view>
#include <vector>

#include "fededs/rng.h"
#include "fededs/tensor.h"

namespace fededs {

// Constant added inside every log term of the losses.
inline constexpr double kLogEpsilon = 1e-12;

enum class Activation { kTanh, kRelu };

Activation ParseActivation(std::string_view name);
std::string_view ActivationName(Activation activation);

// Feed-forward stack of dense layers whose parameters live in one flat
// buffer. Layer l stores an out x in row-major weight block followed by its
// out biases.
class DenseStack {
 public:
  // Activations recorded by Forward for use in Backward.
  struct Trace {
    std::vector<std::vector<double>> inputs;
    std::vector<std::vector<double>> outputs;
  };

  DenseStack() = default;
  DenseStack(std::vector<size_t> widths, Activation activation,
             bool activate_last);

  size_t input_dim() const { return widths_.front(); }
  size_t output_dim() const { return widths_.back(); }
  size_t num_layers() const { return widths_.size() - 1; }
  size_t num_params() const { return params_.size(); }
  const std::vector<size_t>& widths() const { return widths_; }
  Activation activation() const { return activation_; }
  bool activate_last() const { return activate_last_; }

  std::vector<double>& values() { return params_; }
  const std::vector<double>& values() const { return params_; }

  // Uniform Glorot weights, zero biases.
  void InitGlorot(Rng& rng);
  // Normal(0, stddev) weights and biases.
  void InitNormal(Rng& rng, double stddev);

  void Forward(std::span<const double> x, std::span<double> out,
               Trace* trace) const;

  // Accumulates dL/dparams into grad_params (+=). Writes dL/dx into grad_in
  // when it is non-empty.
  void Backward(const Trace& trace, std::span<const double> grad_out,
                std::span<double> grad_params,
                std::span<double> grad_in) const;

  bool operator==(const DenseStack& other) const = default;

 private:
  size_t LayerOffset(size_t layer) const { return offsets_[layer]; }
  bool Activated(size_t layer) const {
    return layer + 1 < num_layers() || activate_last_;
  }

  std::vector<size_t> widths_{0};
  std::vector<size_t> offsets_;
  Activation activation_ = Activation::kTanh;
  bool activate_last_ = false;
  std::vector<double> params_;
};

struct ModelLayout {
  size_t input_dim = 0;
  std::vector<size_t> hidden_dims;
  size_t feature_dim = 0;
  size_t num_classes = 0;
  Activation activation = Activation::kTanh;

  void Validate() const;
  bool operator==(const ModelLayout& other) const = default;
};

// Frozen random affine map h -> W h + b on the feature vector, with
// W = I + scale * G and b = scale * z (G, z standard normal) drawn from the
// seed. Never touched by an optimizer.
struct StochasticLayer {
  size_t feature_dim = 0;
  uint64_t seed = 0;
  double scale = 0.0;
  std::vector<double> weight;  // feature_dim x feature_dim, row-major
  std::vector<double> offset;

  static StochasticLayer Generate(size_t feature_dim, uint64_t seed,
                                  double scale);
  static StochasticLayer Identity(size_t feature_dim);

  void Apply(std::span<const double> in, std::span<double> out) const;
  // grad_in = W^T grad_out.
  void Backward(std::span<const double> grad_out,
                std::span<double> grad_in) const;

  bool operator==(const StochasticLayer& other) const = default;
};

// Client model: trainable feature extractor and classifier plus the client's
// own frozen stochastic layer.
struct SegmentedParams {
  ModelLayout layout;
  DenseStack extractor;
  DenseStack classifier;
  StochasticLayer stochastic;

  static SegmentedParams Create(const ModelLayout& layout, uint64_t init_seed,
                                StochasticLayer stochastic);
  static SegmentedParams Zeros(const ModelLayout& layout,
                               StochasticLayer stochastic);

  size_t num_trainable() const {
    return extractor.num_params() + classifier.num_params();
  }
  bool operator==(const SegmentedParams& other) const = default;
};

// Gradient buffers for the two trainable segments. The stochastic segment
// has no entry.
struct ModelGrads {
  std::vector<double> extractor;
  std::vector<double> classifier;

  static ModelGrads ZerosLike(const SegmentedParams& params);
  void Scale(double factor);
  void AddScaled(const ModelGrads& other, double factor);
  double SquaredNorm() const;
};

struct ForwardTrace {
  DenseStack::Trace extractor;
  DenseStack::Trace classifier;
  std::vector<double> features;
  std::vector<double> perturbed;
  std::vector<double> logits;
  std::vector<double> probs;
};

// Runs extractor -> [stochastic] -> classifier -> softmax. A null
// `stochastic` selects the plain path that skips the layer.
void ForwardInto(const SegmentedParams& params,
                 const StochasticLayer* stochastic, std::span<const double> x,
                 ForwardTrace& trace);

// Back-propagates dL/dprobs through a recorded forward pass. Accumulates
// into `grads` when non-null and writes dL/dx when grad_input is non-empty.
void BackwardFrom(const SegmentedParams& params,
                  const StochasticLayer* stochastic, const ForwardTrace& trace,
                  std::span<const double> grad_probs, ModelGrads* grads,
                  std::span<double> grad_input);

Tensor ForwardPlain(const SegmentedParams& params, const Tensor& x);
Tensor ForwardStochastic(const SegmentedParams& params,
                         const StochasticLayer& stochastic, const Tensor& x);

void Softmax(std::span<const double> logits, std::span<double> out);
void SoftmaxBackward(std::span<const double> probs,
                     std::span<const double> grad_probs,
                     std::span<double> grad_logits);

double CrossEntropy(std::span<const double> pred, size_t label);
void CrossEntropyGrad(std::span<const double> pred, size_t label,
                      std::span<double> grad_pred);

double KlDivergence(std::span<const double> target,
                    std::span<const double> pred);
void KlDivergenceGrad(std::span<const double> target,
                      std::span<const double> pred,
                      std::span<double> grad_pred);

}  // namespace fededs
