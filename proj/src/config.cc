#include "fededs/config.h"

#include <charconv>
#include <fstream>
#include <functional>
#include <map>
#include <sstream>

#include "fededs/errors.h"
#include "fededs/rng.h"

namespace fededs {

Method ParseMethod(std::string_view name) {
  if (name == "fedavg") return Method::kFedAvg;
  if (name == "fedprox") return Method::kFedProx;
  if (name == "fednova") return Method::kFedNova;
  throw ConfigError("unknown method '" + std::string(name) + "'");
}

std::string_view MethodName(Method method) {
  switch (method) {
    case Method::kFedAvg: return "fedavg";
    case Method::kFedProx: return "fedprox";
    case Method::kFedNova: return "fednova";
  }
  return "fedavg";
}

void SimConfig::Validate() const {
  if (num_clients < 2) throw ConfigError("num_clients must be at least 2");
  if (rounds < 1) throw ConfigError("rounds must be at least 1");
  if (local_epochs < 1) throw ConfigError("local_epochs must be at least 1");
  if (batch_size == 0) throw ConfigError("batch_size must be positive");
  if (!(learning_rate > 0.0)) throw ConfigError("learning_rate must be positive");
  if (rho < 0.0 || rho >= 1.0) throw ConfigError("rho must lie in [0, 1)");
  if (mu < 0.0) throw ConfigError("mu must be non-negative");
  if (!(alpha > 0.0)) throw ConfigError("alpha must be positive");
  if (holdout_fraction <= 0.0 || holdout_fraction >= 1.0) {
    throw ConfigError("holdout_fraction must lie in (0, 1)");
  }
  if (images_path.empty() != labels_path.empty()) {
    throw ConfigError("images_path and labels_path must be given together");
  }
  if (stochastic_scale < 0.0) throw ConfigError("stochastic_scale must be non-negative");
  network.Validate();
  if (with_eds) {
    epoch_schedule.Validate();
    lambda_schedule.Validate();
    Encryption(0).Validate();
  }
  Layout(input_dim).Validate();
}

ModelLayout SimConfig::Layout(size_t input_width) const {
  return ModelLayout{input_width, hidden_dims, feature_dim, num_classes, activation};
}

EncryptionConfig SimConfig::Encryption(size_t client_id) const {
  EncryptionConfig c;
  c.pretrain_epochs = e_c;
  c.encryptor_epochs = e_g;
  c.pretrain_optimizer = LocalOptimizer();
  c.encryptor_optimizer = {OptimizerKind::kAdaptiveDecoupledDecay,
                           encryptor_learning_rate, 0.0, encryptor_weight_decay};
  c.encryptor_hidden = encryptor_hidden;
  c.residual_scale = encryptor_residual_scale;
  c.batching.batch_size = batch_size;
  c.encryptor_seed = DeriveSeed(base_seed, "encryptor", client_id);
  return c;
}

OptimizerConfig SimConfig::LocalOptimizer() const {
  return {OptimizerKind::kMomentumSgd, learning_rate, rho, weight_decay};
}

SyntheticSpec SimConfig::Synthetic() const {
  return {num_classes, samples_per_class, input_dim, spread, data_seed};
}

namespace {

std::string Trim(std::string_view s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string_view::npos) return {};
  const auto e = s.find_last_not_of(" \t\r");
  return std::string(s.substr(b, e - b + 1));
}

template <typename T>
T ParseNumber(const std::string& key, const std::string& value) {
  T out{};
  const char* end = value.data() + value.size();
  auto [ptr, ec] = std::from_chars(value.data(), end, out);
  if (ec != std::errc() || ptr != end) {
    throw ConfigError("key '" + key + "': cannot parse '" + value + "'");
  }
  return out;
}

double ParseDouble(const std::string& key, const std::string& value) {
  try {
    size_t used = 0;
    const double v = std::stod(value, &used);
    if (used != value.size()) throw std::invalid_argument(value);
    return v;
  } catch (const std::exception&) {
    throw ConfigError("key '" + key + "': cannot parse '" + value + "'");
  }
}

bool ParseBool(const std::string& key, const std::string& value) {
  if (value == "true" || value == "1") return true;
  if (value == "false" || value == "0") return false;
  throw ConfigError("key '" + key + "': expected true or false, got '" + value + "'");
}

std::vector<size_t> ParseSizeList(const std::string& key, const std::string& value) {
  std::vector<size_t> out;
  if (value.empty()) return out;
  std::stringstream ss(value);
  std::string item;
  while (std::getline(ss, item, ',')) out.push_back(ParseNumber<size_t>(key, Trim(item)));
  return out;
}

using Setter = std::function<void(SimConfig&, const std::string&, const std::string&)>;

const std::map<std::string, Setter>& Setters() {
  static const std::map<std::string, Setter> setters = [] {
    std::map<std::string, Setter> s;
    auto sz = [](size_t SimConfig::*f) {
      return [f](SimConfig& c, const std::string& k, const std::string& v) {
        c.*f = ParseNumber<size_t>(k, v);
      };
    };
    auto i64 = [](auto field) {
      return [field](SimConfig& c, const std::string& k, const std::string& v) {
        field(c) = ParseNumber<int64_t>(k, v);
      };
    };
    auto u64 = [](uint64_t SimConfig::*f) {
      return [f](SimConfig& c, const std::string& k, const std::string& v) {
        c.*f = ParseNumber<uint64_t>(k, v);
      };
    };
    auto dbl = [](auto field) {
      return [field](SimConfig& c, const std::string& k, const std::string& v) {
        field(c) = ParseDouble(k, v);
      };
    };
    auto flag = [](bool SimConfig::*f) {
      return [f](SimConfig& c, const std::string& k, const std::string& v) {
        c.*f = ParseBool(k, v);
      };
    };
    auto integer = [](int SimConfig::*f) {
      return [f](SimConfig& c, const std::string& k, const std::string& v) {
        c.*f = ParseNumber<int>(k, v);
      };
    };
    auto member = [](auto ptr) {
      return [ptr](SimConfig& c) -> auto& { return c.*ptr; };
    };

    s["num_clients"] = sz(&SimConfig::num_clients);
    s["rounds"] = i64(member(&SimConfig::rounds));
    s["method"] = [](SimConfig& c, const std::string&, const std::string& v) {
      c.method = ParseMethod(v);
    };
    s["with_eds"] = flag(&SimConfig::with_eds);
    s["e_max"] = i64([](SimConfig& c) -> int64_t& { return c.epoch_schedule.e_max; });
    s["e_min"] = i64([](SimConfig& c) -> int64_t& { return c.epoch_schedule.e_min; });
    s["t_alpha"] = i64([](SimConfig& c) -> int64_t& { return c.epoch_schedule.t_alpha; });
    s["t_beta"] = i64([](SimConfig& c) -> int64_t& { return c.epoch_schedule.t_beta; });
    s["lambda_m"] = dbl([](SimConfig& c) -> double& { return c.lambda_schedule.m; });
    s["lambda_epsilon"] =
        dbl([](SimConfig& c) -> double& { return c.lambda_schedule.epsilon; });
    s["force_lambda_dis_zero"] = flag(&SimConfig::force_lambda_dis_zero);
    s["e_c"] = integer(&SimConfig::e_c);
    s["e_g"] = integer(&SimConfig::e_g);
    s["encryptor_hidden"] = sz(&SimConfig::encryptor_hidden);
    s["encryptor_learning_rate"] = dbl(member(&SimConfig::encryptor_learning_rate));
    s["encryptor_weight_decay"] = dbl(member(&SimConfig::encryptor_weight_decay));
    s["encryptor_residual_scale"] = dbl(member(&SimConfig::encryptor_residual_scale));
    s["stochastic_scale"] = dbl(member(&SimConfig::stochastic_scale));
    s["local_epochs"] = i64(member(&SimConfig::local_epochs));
    s["mu"] = dbl(member(&SimConfig::mu));
    s["rho"] = dbl(member(&SimConfig::rho));
    s["learning_rate"] = dbl(member(&SimConfig::learning_rate));
    s["weight_decay"] = dbl(member(&SimConfig::weight_decay));
    s["batch_size"] = sz(&SimConfig::batch_size);
    s["aggregate_weighting"] = [](SimConfig& c, const std::string& k,
                                  const std::string& v) {
      if (v == "pk") {
        c.aggregate_weighting = AggregateWeighting::kPk;
      } else if (v == "uniform") {
        c.aggregate_weighting = AggregateWeighting::kUniform;
      } else {
        throw ConfigError("key '" + k + "': expected pk or uniform");
      }
    };
    s["fednova_omit_eta"] = flag(&SimConfig::fednova_omit_eta);
    s["num_classes"] = sz(&SimConfig::num_classes);
    s["samples_per_class"] = sz(&SimConfig::samples_per_class);
    s["input_dim"] = sz(&SimConfig::input_dim);
    s["spread"] = dbl(member(&SimConfig::spread));
    s["data_seed"] = u64(&SimConfig::data_seed);
    s["holdout_fraction"] = dbl(member(&SimConfig::holdout_fraction));
    s["images_path"] = [](SimConfig& c, const std::string&, const std::string& v) {
      c.images_path = v;
    };
    s["labels_path"] = [](SimConfig& c, const std::string&, const std::string& v) {
      c.labels_path = v;
    };
    s["alpha"] = dbl(member(&SimConfig::alpha));
    s["partition_seed"] = u64(&SimConfig::partition_seed);
    s["hidden_dims"] = [](SimConfig& c, const std::string& k, const std::string& v) {
      c.hidden_dims = ParseSizeList(k, v);
    };
    s["feature_dim"] = sz(&SimConfig::feature_dim);
    s["activation"] = [](SimConfig& c, const std::string&, const std::string& v) {
      c.activation = ParseActivation(v);
    };
    s["server_rtt"] = dbl([](SimConfig& c) -> double& { return c.network.server_rtt; });
    s["peer_rtt"] = dbl([](SimConfig& c) -> double& { return c.network.peer_rtt; });
    s["base_seed"] = u64(&SimConfig::base_seed);
    s["threads"] = sz(&SimConfig::threads);
    return s;
  }();
  return setters;
}

}  // namespace

SimConfig ParseConfig(std::string_view text) {
  SimConfig config;
  std::istringstream in{std::string(text)};
  std::string line;
  size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    const std::string trimmed = Trim(line);
    if (trimmed.empty() || trimmed.front() == '#') continue;
    const auto eq = trimmed.find('=');
    if (eq == std::string::npos) {
      throw ConfigError("line " + std::to_string(line_no) + ": expected key=value");
    }
    const std::string key = Trim(trimmed.substr(0, eq));
    const std::string value = Trim(trimmed.substr(eq + 1));
    const auto it = Setters().find(key);
    if (it == Setters().end()) {
      throw ConfigError("line " + std::to_string(line_no) + ": unknown key '" + key + "'");
    }
    it->second(config, key, value);
  }
  config.Validate();
  return config;
}

SimConfig LoadConfig(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open config " + path.string());
  std::stringstream buffer;
  buffer << in.rdbuf();
  return ParseConfig(buffer.str());
}

std::string ConfigToText(const SimConfig& c) {
  std::ostringstream os;
  os.precision(17);
  auto list = [](const std::vector<size_t>& v) {
    std::string s;
    for (size_t i = 0; i < v.size(); ++i) s += (i ? "," : "") + std::to_string(v[i]);
    return s;
  };
  os << "num_clients=" << c.num_clients << "\n"
     << "rounds=" << c.rounds << "\n"
     << "method=" << MethodName(c.method) << "\n"
     << "with_eds=" << (c.with_eds ? "true" : "false") << "\n"
     << "e_max=" << c.epoch_schedule.e_max << "\n"
     << "e_min=" << c.epoch_schedule.e_min << "\n"
     << "t_alpha=" << c.epoch_schedule.t_alpha << "\n"
     << "t_beta=" << c.epoch_schedule.t_beta << "\n"
     << "lambda_m=" << c.lambda_schedule.m << "\n"
     << "lambda_epsilon=" << c.lambda_schedule.epsilon << "\n"
     << "force_lambda_dis_zero=" << (c.force_lambda_dis_zero ? "true" : "false") << "\n"
     << "e_c=" << c.e_c << "\n"
     << "e_g=" << c.e_g << "\n"
     << "encryptor_hidden=" << c.encryptor_hidden << "\n"
     << "encryptor_learning_rate=" << c.encryptor_learning_rate << "\n"
     << "encryptor_weight_decay=" << c.encryptor_weight_decay << "\n"
     << "encryptor_residual_scale=" << c.encryptor_residual_scale << "\n"
     << "stochastic_scale=" << c.stochastic_scale << "\n"
     << "local_epochs=" << c.local_epochs << "\n"
     << "mu=" << c.mu << "\n"
     << "rho=" << c.rho << "\n"
     << "learning_rate=" << c.learning_rate << "\n"
     << "weight_decay=" << c.weight_decay << "\n"
     << "batch_size=" << c.batch_size << "\n"
     << "aggregate_weighting="
     << (c.aggregate_weighting == AggregateWeighting::kPk ? "pk" : "uniform") << "\n"
     << "fednova_omit_eta=" << (c.fednova_omit_eta ? "true" : "false") << "\n"
     << "num_classes=" << c.num_classes << "\n"
     << "samples_per_class=" << c.samples_per_class << "\n"
     << "input_dim=" << c.input_dim << "\n"
     << "spread=" << c.spread << "\n"
     << "data_seed=" << c.data_seed << "\n"
     << "holdout_fraction=" << c.holdout_fraction << "\n"
     << "images_path=" << c.images_path << "\n"
     << "labels_path=" << c.labels_path << "\n"
     << "alpha=" << c.alpha << "\n"
     << "partition_seed=" << c.partition_seed << "\n"
     << "hidden_dims=" << list(c.hidden_dims) << "\n"
     << "feature_dim=" << c.feature_dim << "\n"
     << "activation=" << ActivationName(c.activation) << "\n"
     << "server_rtt=" << c.network.server_rtt << "\n"
     << "peer_rtt=" << c.network.peer_rtt << "\n"
     << "base_seed=" << c.base_seed << "\n"
     << "threads=" << c.threads << "\n";
  return os.str();
}

}  // namespace fededs
