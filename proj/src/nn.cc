#include "fededs/nn.h"

#include <algorithm>
#include <cmath>
#include <string>

#include "fededs/errors.h"

namespace fededs {

Activation ParseActivation(std::string_view name) {
  if (name == "tanh") return Activation::kTanh;
  if (name == "relu") return Activation::kRelu;
  throw ConfigError("unknown activation '" + std::string(name) + "'");
}

std::string_view ActivationName(Activation activation) {
  return activation == Activation::kTanh ? "tanh" : "relu";
}

namespace {

double Activate(Activation a, double v) {
  return a == Activation::kTanh ? std::tanh(v) : (v > 0.0 ? v : 0.0);
}

// Derivative expressed through the activation output.
double ActivationSlope(Activation a, double y) {
  return a == Activation::kTanh ? 1.0 - y * y : (y > 0.0 ? 1.0 : 0.0);
}

void RequireDim(size_t got, size_t want, const char* what) {
  if (got != want) {
    throw DimensionError(std::string(what) + ": expected " +
                         std::to_string(want) + " values, got " +
                         std::to_string(got));
  }
}

}  // namespace

DenseStack::DenseStack(std::vector<size_t> widths, Activation activation,
                       bool activate_last)
    : widths_(std::move(widths)),
      activation_(activation),
      activate_last_(activate_last) {
  if (widths_.size() < 2) throw ConfigError("dense stack needs >= 1 layer");
  size_t offset = 0;
  for (size_t l = 0; l + 1 < widths_.size(); ++l) {
    if (widths_[l] == 0 || widths_[l + 1] == 0) {
      throw ConfigError("dense stack widths must be positive");
    }
    offsets_.push_back(offset);
    offset += widths_[l] * widths_[l + 1] + widths_[l + 1];
  }
  params_.assign(offset, 0.0);
}

void DenseStack::InitGlorot(Rng& rng) {
  for (size_t l = 0; l < num_layers(); ++l) {
    const size_t in = widths_[l], out = widths_[l + 1];
    const double limit = std::sqrt(6.0 / static_cast<double>(in + out));
    std::uniform_real_distribution<double> dist(-limit, limit);
    double* w = params_.data() + LayerOffset(l);
    for (size_t i = 0; i < in * out; ++i) w[i] = dist(rng);
    std::fill(w + in * out, w + in * out + out, 0.0);
  }
}

void DenseStack::InitNormal(Rng& rng, double stddev) {
  std::normal_distribution<double> dist(0.0, 1.0);
  for (double& p : params_) p = stddev * dist(rng);
}

void DenseStack::Forward(std::span<const double> x, std::span<double> out,
                         Trace* trace) const {
  RequireDim(x.size(), input_dim(), "dense stack input");
  RequireDim(out.size(), output_dim(), "dense stack output");
  Trace local;
  Trace& t = trace ? *trace : local;
  t.inputs.resize(num_layers());
  t.outputs.resize(num_layers());
  std::span<const double> current = x;
  for (size_t l = 0; l < num_layers(); ++l) {
    const size_t in = widths_[l], outw = widths_[l + 1];
    t.inputs[l].assign(current.begin(), current.end());
    std::vector<double>& y = t.outputs[l];
    y.resize(outw);
    const double* w = params_.data() + LayerOffset(l);
    const double* b = w + in * outw;
    const bool act = Activated(l);
    for (size_t o = 0; o < outw; ++o) {
      const double* row = w + o * in;
      double acc = b[o];
      for (size_t i = 0; i < in; ++i) acc += row[i] * t.inputs[l][i];
      y[o] = act ? Activate(activation_, acc) : acc;
    }
    current = y;
  }
  std::copy(current.begin(), current.end(), out.begin());
}

void DenseStack::Backward(const Trace& trace, std::span<const double> grad_out,
                          std::span<double> grad_params,
                          std::span<double> grad_in) const {
  RequireDim(grad_out.size(), output_dim(), "dense stack output gradient");
  RequireDim(grad_params.size(), num_params(), "dense stack parameter gradient");
  if (!grad_in.empty()) RequireDim(grad_in.size(), input_dim(), "input gradient");

  std::vector<double> upstream(grad_out.begin(), grad_out.end());
  std::vector<double> pre;
  for (size_t l = num_layers(); l-- > 0;) {
    const size_t in = widths_[l], outw = widths_[l + 1];
    const std::vector<double>& x = trace.inputs[l];
    const std::vector<double>& y = trace.outputs[l];
    pre.resize(outw);
    for (size_t o = 0; o < outw; ++o) {
      pre[o] = Activated(l) ? upstream[o] * ActivationSlope(activation_, y[o])
                            : upstream[o];
    }
    const double* w = params_.data() + LayerOffset(l);
    double* gw = grad_params.data() + LayerOffset(l);
    double* gb = gw + in * outw;
    for (size_t o = 0; o < outw; ++o) {
      double* grow = gw + o * in;
      for (size_t i = 0; i < in; ++i) grow[i] += pre[o] * x[i];
      gb[o] += pre[o];
    }
    if (l == 0 && grad_in.empty()) break;
    std::vector<double> down(in, 0.0);
    for (size_t o = 0; o < outw; ++o) {
      const double* row = w + o * in;
      for (size_t i = 0; i < in; ++i) down[i] += row[i] * pre[o];
    }
    if (l == 0) {
      std::copy(down.begin(), down.end(), grad_in.begin());
    } else {
      upstream = std::move(down);
    }
  }
}

void ModelLayout::Validate() const {
  if (input_dim == 0 || feature_dim == 0 || num_classes < 2) {
    throw ConfigError(
        "model layout needs positive input/feature dims and >= 2 classes");
  }
  for (size_t h : hidden_dims) {
    if (h == 0) throw ConfigError("hidden dims must be positive");
  }
}

StochasticLayer StochasticLayer::Generate(size_t feature_dim, uint64_t seed,
                                          double scale) {
  if (feature_dim == 0) throw ConfigError("stochastic layer needs feature_dim > 0");
  StochasticLayer layer;
  layer.feature_dim = feature_dim;
  layer.seed = seed;
  layer.scale = scale;
  layer.weight.resize(feature_dim * feature_dim);
  layer.offset.resize(feature_dim);
  Rng rng(seed);
  std::normal_distribution<double> normal(0.0, 1.0);
  for (size_t i = 0; i < feature_dim; ++i) {
    for (size_t j = 0; j < feature_dim; ++j) {
      layer.weight[i * feature_dim + j] =
          (i == j ? 1.0 : 0.0) + scale * normal(rng);
    }
  }
  for (double& b : layer.offset) b = scale * normal(rng);
  return layer;
}

StochasticLayer StochasticLayer::Identity(size_t feature_dim) {
  StochasticLayer layer;
  layer.feature_dim = feature_dim;
  layer.weight.assign(feature_dim * feature_dim, 0.0);
  for (size_t i = 0; i < feature_dim; ++i) layer.weight[i * feature_dim + i] = 1.0;
  layer.offset.assign(feature_dim, 0.0);
  return layer;
}

void StochasticLayer::Apply(std::span<const double> in,
                            std::span<double> out) const {
  RequireDim(in.size(), feature_dim, "stochastic layer input");
  RequireDim(out.size(), feature_dim, "stochastic layer output");
  for (size_t i = 0; i < feature_dim; ++i) {
    const double* row = weight.data() + i * feature_dim;
    double acc = 0.0;
    for (size_t j = 0; j < feature_dim; ++j) acc += row[j] * in[j];
    out[i] = acc + offset[i];
  }
}

void StochasticLayer::Backward(std::span<const double> grad_out,
                               std::span<double> grad_in) const {
  RequireDim(grad_out.size(), feature_dim, "stochastic layer gradient");
  std::fill(grad_in.begin(), grad_in.end(), 0.0);
  for (size_t i = 0; i < feature_dim; ++i) {
    const double* row = weight.data() + i * feature_dim;
    for (size_t j = 0; j < feature_dim; ++j) grad_in[j] += row[j] * grad_out[i];
  }
}

namespace {

std::vector<size_t> ExtractorWidths(const ModelLayout& layout) {
  std::vector<size_t> widths{layout.input_dim};
  widths.insert(widths.end(), layout.hidden_dims.begin(), layout.hidden_dims.end());
  widths.push_back(layout.feature_dim);
  return widths;
}

}  // namespace

SegmentedParams SegmentedParams::Zeros(const ModelLayout& layout,
                                       StochasticLayer stochastic) {
  layout.Validate();
  if (stochastic.feature_dim != layout.feature_dim) {
    throw DimensionError("stochastic layer feature_dim " +
                         std::to_string(stochastic.feature_dim) +
                         " does not match model feature_dim " +
                         std::to_string(layout.feature_dim));
  }
  SegmentedParams p;
  p.layout = layout;
  p.extractor = DenseStack(ExtractorWidths(layout), layout.activation, true);
  p.classifier = DenseStack({layout.feature_dim, layout.num_classes},
                            layout.activation, false);
  p.stochastic = std::move(stochastic);
  return p;
}

SegmentedParams SegmentedParams::Create(const ModelLayout& layout,
                                        uint64_t init_seed,
                                        StochasticLayer stochastic) {
  SegmentedParams p = Zeros(layout, std::move(stochastic));
  Rng rng(init_seed);
  p.extractor.InitGlorot(rng);
  p.classifier.InitGlorot(rng);
  return p;
}

ModelGrads ModelGrads::ZerosLike(const SegmentedParams& params) {
  return {std::vector<double>(params.extractor.num_params(), 0.0),
          std::vector<double>(params.classifier.num_params(), 0.0)};
}

void ModelGrads::Scale(double factor) {
  for (double& g : extractor) g *= factor;
  for (double& g : classifier) g *= factor;
}

void ModelGrads::AddScaled(const ModelGrads& other, double factor) {
  if (other.extractor.size() != extractor.size() ||
      other.classifier.size() != classifier.size()) {
    throw DimensionError("gradient collections differ in shape");
  }
  for (size_t i = 0; i < extractor.size(); ++i) extractor[i] += factor * other.extractor[i];
  for (size_t i = 0; i < classifier.size(); ++i) classifier[i] += factor * other.classifier[i];
}

double ModelGrads::SquaredNorm() const {
  double s = 0.0;
  for (double g : extractor) s += g * g;
  for (double g : classifier) s += g * g;
  return s;
}

void ForwardInto(const SegmentedParams& params,
                 const StochasticLayer* stochastic, std::span<const double> x,
                 ForwardTrace& trace) {
  RequireDim(x.size(), params.layout.input_dim, "model input");
  const size_t f = params.layout.feature_dim;
  trace.features.resize(f);
  params.extractor.Forward(x, trace.features, &trace.extractor);
  std::span<const double> head_input = trace.features;
  if (stochastic != nullptr) {
    if (stochastic->feature_dim != f) {
      throw DimensionError("stochastic layer feature_dim " +
                           std::to_string(stochastic->feature_dim) +
                           " does not match model feature_dim " +
                           std::to_string(f));
    }
    trace.perturbed.resize(f);
    stochastic->Apply(trace.features, trace.perturbed);
    head_input = trace.perturbed;
  }
  trace.logits.resize(params.layout.num_classes);
  params.classifier.Forward(head_input, trace.logits, &trace.classifier);
  trace.probs.resize(params.layout.num_classes);
  Softmax(trace.logits, trace.probs);
}

void BackwardFrom(const SegmentedParams& params,
                  const StochasticLayer* stochastic, const ForwardTrace& trace,
                  std::span<const double> grad_probs, ModelGrads* grads,
                  std::span<double> grad_input) {
  const size_t c = params.layout.num_classes;
  const size_t f = params.layout.feature_dim;
  std::vector<double> grad_logits(c);
  SoftmaxBackward(trace.probs, grad_probs, grad_logits);

  std::vector<double> scratch_c;
  std::span<double> gclass;
  if (grads) {
    gclass = grads->classifier;
  } else {
    scratch_c.assign(params.classifier.num_params(), 0.0);
    gclass = scratch_c;
  }
  std::vector<double> grad_head(f);
  params.classifier.Backward(trace.classifier, grad_logits, gclass, grad_head);

  std::vector<double> grad_features(f);
  if (stochastic != nullptr) {
    stochastic->Backward(grad_head, grad_features);
  } else {
    grad_features = grad_head;
  }
  if (grads == nullptr && grad_input.empty()) return;
  std::vector<double> scratch_e;
  std::span<double> gext;
  if (grads) {
    gext = grads->extractor;
  } else {
    scratch_e.assign(params.extractor.num_params(), 0.0);
    gext = scratch_e;
  }
  params.extractor.Backward(trace.extractor, grad_features, gext, grad_input);
}

Tensor ForwardPlain(const SegmentedParams& params, const Tensor& x) {
  ForwardTrace trace;
  ForwardInto(params, nullptr, x.data(), trace);
  CheckFinite(trace.probs, "plain forward output");
  return Tensor::FromVector(std::move(trace.probs));
}

Tensor ForwardStochastic(const SegmentedParams& params,
                         const StochasticLayer& stochastic, const Tensor& x) {
  ForwardTrace trace;
  ForwardInto(params, &stochastic, x.data(), trace);
  CheckFinite(trace.probs, "stochastic forward output");
  return Tensor::FromVector(std::move(trace.probs));
}

void Softmax(std::span<const double> logits, std::span<double> out) {
  RequireDim(out.size(), logits.size(), "softmax output");
  const double peak = *std::max_element(logits.begin(), logits.end());
  double total = 0.0;
  for (size_t i = 0; i < logits.size(); ++i) {
    out[i] = std::exp(logits[i] - peak);
    total += out[i];
  }
  for (double& v : out) v /= total;
}

void SoftmaxBackward(std::span<const double> probs,
                     std::span<const double> grad_probs,
                     std::span<double> grad_logits) {
  double dot = 0.0;
  for (size_t i = 0; i < probs.size(); ++i) dot += probs[i] * grad_probs[i];
  for (size_t i = 0; i < probs.size(); ++i) {
    grad_logits[i] = probs[i] * (grad_probs[i] - dot);
  }
}

double CrossEntropy(std::span<const double> pred, size_t label) {
  if (label >= pred.size()) {
    throw IndexError("label " + std::to_string(label) + " out of range for " +
                     std::to_string(pred.size()) + " classes");
  }
  const double loss = -std::log(pred[label] + kLogEpsilon);
  CheckFinite(loss, "cross-entropy term");
  return loss;
}

void CrossEntropyGrad(std::span<const double> pred, size_t label,
                      std::span<double> grad_pred) {
  if (label >= pred.size()) throw IndexError("label out of range");
  std::fill(grad_pred.begin(), grad_pred.end(), 0.0);
  grad_pred[label] = -1.0 / (pred[label] + kLogEpsilon);
}

double KlDivergence(std::span<const double> target,
                    std::span<const double> pred) {
  RequireDim(pred.size(), target.size(), "KL prediction");
  double loss = 0.0;
  for (size_t c = 0; c < target.size(); ++c) {
    loss += target[c] * std::log((target[c] + kLogEpsilon) / (pred[c] + kLogEpsilon));
  }
  CheckFinite(loss, "KL divergence term");
  return loss;
}

void KlDivergenceGrad(std::span<const double> target,
                      std::span<const double> pred,
                      std::span<double> grad_pred) {
  RequireDim(pred.size(), target.size(), "KL prediction");
  for (size_t c = 0; c < target.size(); ++c) {
    grad_pred[c] = -target[c] / (pred[c] + kLogEpsilon);
  }
}

}  // namespace fededs
