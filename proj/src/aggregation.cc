#include "fededs/aggregation.h"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <string>

#include "fededs/codec.h"
#include "fededs/errors.h"

namespace fededs {

TrainableParams TrainableParams::From(const SegmentedParams& params) {
  return {params.extractor.values(), params.classifier.values()};
}

void TrainableParams::AssignTo(SegmentedParams& params) const {
  if (extractor.size() != params.extractor.num_params() ||
      classifier.size() != params.classifier.num_params()) {
    throw DimensionError("trainable parameters do not fit the model layout");
  }
  params.extractor.values() = extractor;
  params.classifier.values() = classifier;
}

bool TrainableParams::SameShape(const TrainableParams& other) const {
  return extractor.size() == other.extractor.size() &&
         classifier.size() == other.classifier.size();
}

std::vector<uint8_t> SerializeTrainable(const TrainableParams& params) {
  ByteWriter w(RecordType::kParams);
  w.Count(2);
  w.Count(params.extractor.size());
  w.F64s(params.extractor);
  w.Count(params.classifier.size());
  w.F64s(params.classifier);
  return w.Take();
}

TrainableParams DeserializeTrainable(std::span<const uint8_t> bytes) {
  ByteReader r(bytes, RecordType::kParams, "parameter record");
  if (r.U32() != 2) throw FormatError("parameter record must hold 2 segments");
  TrainableParams out;
  out.extractor = r.F64s(r.U32());
  out.classifier = r.F64s(r.U32());
  r.ExpectEnd();
  return out;
}

std::vector<double> WeightsPk(std::span<const size_t> sample_counts) {
  const size_t total =
      std::accumulate(sample_counts.begin(), sample_counts.end(), size_t{0});
  if (total == 0) throw ConfigError("sample counts sum to zero");
  std::vector<double> w;
  w.reserve(sample_counts.size());
  for (size_t n : sample_counts) {
    if (n == 0) throw ConfigError("every client needs a positive sample count");
    w.push_back(static_cast<double>(n) / static_cast<double>(total));
  }
  return w;
}

std::vector<double> UniformWeights(size_t num_clients) {
  if (num_clients == 0) throw ConfigError("no clients");
  return std::vector<double>(num_clients, 1.0 / static_cast<double>(num_clients));
}

namespace {

void RequireSameShapes(std::span<const TrainableParams> clients,
                       const TrainableParams& reference) {
  for (size_t k = 0; k < clients.size(); ++k) {
    if (!clients[k].SameShape(reference)) {
      throw DimensionError("client " + std::to_string(k) +
                           " parameters differ in shape");
    }
  }
}

}  // namespace

TrainableParams FedAvgAggregate(std::span<const TrainableParams> clients,
                                std::span<const double> weights) {
  if (clients.empty()) throw ConfigError("nothing to aggregate");
  if (weights.size() != clients.size()) {
    throw DimensionError("one weight per client required");
  }
  RequireSameShapes(clients, clients.front());
  TrainableParams out{std::vector<double>(clients.front().extractor.size(), 0.0),
                      std::vector<double>(clients.front().classifier.size(), 0.0)};
  for (size_t k = 0; k < clients.size(); ++k) {
    const double w = weights[k];
    for (size_t i = 0; i < out.extractor.size(); ++i) {
      out.extractor[i] += w * clients[k].extractor[i];
    }
    for (size_t i = 0; i < out.classifier.size(); ++i) {
      out.classifier[i] += w * clients[k].classifier[i];
    }
  }
  return out;
}

double FedNovaNorm(size_t steps, double rho) {
  if (steps < 1) throw ConfigError("fednova norm needs at least one local step");
  if (rho < 0.0 || rho >= 1.0) {
    throw ConfigError("fednova momentum must lie in [0, 1), got " + std::to_string(rho));
  }
  const double tau = static_cast<double>(steps);
  if (rho == 0.0) return tau;
  const double tail = rho * (1.0 - std::pow(rho, tau)) / (1.0 - rho);
  return (tau - tail) / (1.0 - rho);
}

TrainableParams FedNovaDelta(const TrainableParams& updated,
                             const TrainableParams& incoming, double eta,
                             double norm) {
  if (!updated.SameShape(incoming)) {
    throw DimensionError("fednova delta: parameter shapes differ");
  }
  if (!(eta > 0.0) || !(norm > 0.0)) {
    throw ConfigError("fednova delta needs positive eta and norm");
  }
  const double scale = 1.0 / (eta * norm);
  TrainableParams d = updated;
  for (size_t i = 0; i < d.extractor.size(); ++i) {
    d.extractor[i] = (updated.extractor[i] - incoming.extractor[i]) * scale;
  }
  for (size_t i = 0; i < d.classifier.size(); ++i) {
    d.classifier[i] = (updated.classifier[i] - incoming.classifier[i]) * scale;
  }
  return d;
}

TrainableParams FedNovaAggregate(const TrainableParams& global,
                                 std::span<const TrainableParams> deltas,
                                 std::span<const double> norms, double eta,
                                 bool omit_eta) {
  if (deltas.empty()) throw ConfigError("nothing to aggregate");
  if (norms.size() != deltas.size()) {
    throw DimensionError("one fednova norm per client required");
  }
  RequireSameShapes(deltas, global);
  const double k = static_cast<double>(deltas.size());
  const double tau_eff = std::accumulate(norms.begin(), norms.end(), 0.0) / k;
  const double scale = tau_eff * (omit_eta ? 1.0 : eta) / k;
  TrainableParams out = global;
  std::vector<double> sum_e(global.extractor.size(), 0.0);
  std::vector<double> sum_c(global.classifier.size(), 0.0);
  for (const TrainableParams& d : deltas) {
    for (size_t i = 0; i < sum_e.size(); ++i) sum_e[i] += d.extractor[i];
    for (size_t i = 0; i < sum_c.size(); ++i) sum_c[i] += d.classifier[i];
  }
  for (size_t i = 0; i < sum_e.size(); ++i) out.extractor[i] += scale * sum_e[i];
  for (size_t i = 0; i < sum_c.size(); ++i) out.classifier[i] += scale * sum_c[i];
  return out;
}

double ConvergenceBound(const ConvergenceBoundInputs& in) {
  if (!(in.smoothness > 0.0)) throw ConfigError("smoothness L must be positive");
  if (!(in.eta > 0.0)) throw ConfigError("eta must be positive");
  if (in.e_min < 1) throw ConfigError("e_min must be at least 1");
  if (in.rounds < 1) throw ConfigError("T must be at least 1");
  if (!(in.loss_gap > 0.0)) throw ConfigError("loss gap must be positive");
  if (in.beta2 < 1.0) throw ConfigError("beta^2 must be >= 1");
  if (in.kappa2 < 0.0) throw ConfigError("kappa^2 must be >= 0");
  if (in.sigma2 < 0.0) throw ConfigError("sigma^2 must be >= 0");
  if (in.weights.empty()) throw ConfigError("client weights p_k are required");
  double weight_sum = 0.0, weight_sq = 0.0;
  for (double p : in.weights) {
    if (p < 0.0) throw ConfigError("client weights must be non-negative");
    weight_sum += p;
    weight_sq += p * p;
  }
  if (std::abs(weight_sum - 1.0) > 1e-9) {
    throw ConfigError("client weights must sum to one");
  }

  const double e = static_cast<double>(in.e_min);
  const double eta_l = in.eta * in.smoothness;
  if (eta_l > 1.0 / (2.0 * e)) {
    throw ConfigError("learning-rate condition violated: eta*L = " +
                      std::to_string(eta_l) + " > 1/(2 E_min) = " +
                      std::to_string(1.0 / (2.0 * e)));
  }
  if (in.e_min > 1) {
    const double limit = 1.0 / std::sqrt(2.0 * e * (e - 1.0) * (2.0 * in.beta2 + 1.0));
    if (eta_l > limit) {
      throw ConfigError("learning-rate condition violated: eta*L = " +
                        std::to_string(eta_l) +
                        " > 1/sqrt(2 E_min (E_min-1)(2 beta^2+1)) = " +
                        std::to_string(limit));
    }
  }
  const double l = in.smoothness;
  const double eta = in.eta;
  const double t = static_cast<double>(in.rounds);
  return 4.0 * in.loss_gap / (e * eta * t) + 4.0 * eta * l * in.sigma2 * weight_sq +
         3.0 * (e - 1.0) * eta * eta * in.sigma2 * l * l +
         6.0 * e * (e - 1.0) * eta * eta * l * l * in.kappa2;
}

}  // namespace fededs
