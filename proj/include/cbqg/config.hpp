#pragma once

#include <cstdint>
#include <string>
#include <string_view>

#include <nlohmann/json.hpp>

namespace cbqg {

struct ModelConfig {
  int num_layers = 2;
  int d_model = 64;
  int num_heads = 4;
  int ffn_dim = 128;
  int vocab_size = 0;
  int max_src_len = 256;
  int max_tgt_len = 128;
  double dropout_rate = 0.1;

  /// Throws ConfigError naming the offending field.
  void validate() const;
  bool operator==(const ModelConfig&) const = default;

  /// Answer -> question lengths (256 / 128).
  static ModelConfig question_generator(int vocab_size);
  /// Question -> answer lengths (128 / 256).
  static ModelConfig question_answerer(int vocab_size);
};

/// Generator direction: answer -> question (qg) or question -> answer (qa).
enum class Task { question_generation, question_answering };

std::string_view to_string(Task t);
Task task_from_string(std::string_view s);

enum class ClStrategy { off, ground_truth, dropout };  // off / CL_t / CL_s

std::string_view to_string(ClStrategy s);
ClStrategy cl_strategy_from_string(std::string_view s);

struct TrainConfig {
  double lambda_qg = 1.0;
  double lambda_cl = 0.1;
  double lambda_ar = 0.1;
  double learning_rate = 5e-5;
  int epochs = 5;
  int batch_size = 16;
  double tau_cl = 0.3;
  double tau_gs = 1.0;
  ClStrategy cl_strategy = ClStrategy::ground_truth;
  bool ar_enabled = true;
  std::uint64_t seed = 0;

  void validate() const;
  bool operator==(const TrainConfig&) const = default;

  /// Branches whose weight is zero are switched off, so a run with
  /// lambda_cl = lambda_ar = 0 is exactly the NLL-only baseline.
  TrainConfig effective() const;
  /// NLL-only generator: lambda_cl = lambda_ar = 0, both branches off.
  TrainConfig baseline() const;
};

nlohmann::ordered_json to_json(const ModelConfig& c);
nlohmann::ordered_json to_json(const TrainConfig& c);
/// Every field is required; a missing or mistyped field throws ConfigError
/// naming "<prefix>.<field>".
ModelConfig model_config_from_json(const nlohmann::json& j, const std::string& prefix = "model");
TrainConfig train_config_from_json(const nlohmann::json& j, const std::string& prefix = "train");

}  // namespace cbqg
