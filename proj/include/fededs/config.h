#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <string>
#include <string_view>
#include <vector>

#include "fededs/data.h"
#include "fededs/encryption.h"
#include "fededs/network_cost.h"
#include "fededs/nn.h"
#include "fededs/schedules.h"

namespace fededs {

enum class Method { kFedAvg, kFedProx, kFedNova };
enum class AggregateWeighting { kPk, kUniform };

Method ParseMethod(std::string_view name);
std::string_view MethodName(Method method);

// Every knob of one simulated federation. The text form is flat
// key=value lines whose keys are the field names below.
struct SimConfig {
  size_t num_clients = 5;
  int64_t rounds = 60;
  Method method = Method::kFedAvg;
  bool with_eds = true;

  // Encrypted data sharing (ignored when with_eds is false).
  EpochScheduleConfig epoch_schedule;
  LambdaScheduleConfig lambda_schedule;
  bool force_lambda_dis_zero = false;
  int e_c = 5;
  int e_g = 20;
  size_t encryptor_hidden = 32;
  double encryptor_learning_rate = 0.001;
  double encryptor_weight_decay = 0.01;
  double encryptor_residual_scale = 0.01;
  double stochastic_scale = 0.5;

  // Local epochs per round without encrypted data sharing.
  int64_t local_epochs = 1;

  double mu = 0.1;  // proximal weight, used by fedprox
  double rho = 0.9;
  double learning_rate = 0.01;
  double weight_decay = 1e-4;
  size_t batch_size = 32;
  AggregateWeighting aggregate_weighting = AggregateWeighting::kPk;
  bool fednova_omit_eta = false;

  // Data. IDX files replace the synthetic blobs when both paths are set.
  size_t num_classes = 5;
  size_t samples_per_class = 250;
  size_t input_dim = 16;
  double spread = 0.5;
  uint64_t data_seed = 1;
  double holdout_fraction = 0.2;
  std::string images_path;
  std::string labels_path;
  double alpha = 0.1;
  uint64_t partition_seed = 1;

  // Model.
  std::vector<size_t> hidden_dims{32};
  size_t feature_dim = 16;
  Activation activation = Activation::kTanh;

  NetworkCostModel network;
  uint64_t base_seed = 1;
  size_t threads = 1;  // client workers per round; results do not depend on it

  void Validate() const;
  ModelLayout Layout(size_t input_width) const;
  EncryptionConfig Encryption(size_t client_id) const;
  OptimizerConfig LocalOptimizer() const;
  SyntheticSpec Synthetic() const;
};

SimConfig ParseConfig(std::string_view text);
SimConfig LoadConfig(const std::filesystem::path& path);
std::string ConfigToText(const SimConfig& config);

}  // namespace fededs
