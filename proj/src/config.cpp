#include "cbqg/config.hpp"

#include "cbqg/errors.hpp"

namespace cbqg {

namespace {

void check(bool ok, const std::string& field, const std::string& what) {
  if (!ok) throw ConfigError(field + ": " + what, field);
}

template <typename T>
T field(const nlohmann::json& j, const std::string& prefix, const char* name) {
  const std::string full = prefix + "." + name;
  if (!j.is_object()) throw ConfigError(prefix + ": expected a JSON object", prefix);
  auto it = j.find(name);
  if (it == j.end()) throw ConfigError(full + ": missing field", full);
  try {
    if constexpr (std::is_same_v<T, bool>) {
      if (!it->is_boolean()) throw ConfigError(full + ": expected a boolean", full);
    } else if constexpr (std::is_integral_v<T>) {
      if (!it->is_number_integer()) throw ConfigError(full + ": expected an integer", full);
    } else if constexpr (std::is_floating_point_v<T>) {
      if (!it->is_number()) throw ConfigError(full + ": expected a number", full);
    } else {
      if (!it->is_string()) throw ConfigError(full + ": expected a string", full);
    }
    return it->get<T>();
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError(full + ": " + e.what(), full);
  }
}

}  // namespace

void ModelConfig::validate() const {
  check(num_layers > 0, "model.num_layers", "must be positive");
  check(d_model > 0, "model.d_model", "must be positive");
  check(num_heads > 0, "model.num_heads", "must be positive");
  check(d_model % num_heads == 0, "model.num_heads", "must divide model.d_model");
  check(ffn_dim > 0, "model.ffn_dim", "must be positive");
  check(vocab_size > 5, "model.vocab_size", "must exceed the 5 special tokens");
  check(max_src_len > 2, "model.max_src_len", "must be at least 3");
  check(max_tgt_len > 1, "model.max_tgt_len", "must be at least 2");
  check(dropout_rate >= 0.0 && dropout_rate < 1.0, "model.dropout_rate", "must lie in [0, 1)");
}

ModelConfig ModelConfig::question_generator(int vocab_size) {
  ModelConfig c;
  c.vocab_size = vocab_size;
  return c;
}

ModelConfig ModelConfig::question_answerer(int vocab_size) {
  ModelConfig c;
  c.vocab_size = vocab_size;
  c.max_src_len = 128;
  c.max_tgt_len = 256;
  return c;
}

std::string_view to_string(Task t) { return t == Task::question_generation ? "qg" : "qa"; }

Task task_from_string(std::string_view s) {
  if (s == "qg") return Task::question_generation;
  if (s == "qa") return Task::question_answering;
  throw ConfigError("unknown task '" + std::string(s) + "'", "task");
}

std::string_view to_string(ClStrategy s) {
  switch (s) {
    case ClStrategy::off: return "off";
    case ClStrategy::ground_truth: return "cl_t";
    case ClStrategy::dropout: return "cl_s";
  }
  return "off";
}

ClStrategy cl_strategy_from_string(std::string_view s) {
  if (s == "off") return ClStrategy::off;
  if (s == "cl_t") return ClStrategy::ground_truth;
  if (s == "cl_s") return ClStrategy::dropout;
  throw ConfigError("train.cl_strategy: expected one of off, cl_t, cl_s", "train.cl_strategy");
}

void TrainConfig::validate() const {
  check(lambda_qg >= 0.0, "train.lambda_qg", "must be non-negative");
  check(lambda_cl >= 0.0, "train.lambda_cl", "must be non-negative");
  check(lambda_ar >= 0.0, "train.lambda_ar", "must be non-negative");
  check(learning_rate > 0.0, "train.learning_rate", "must be positive");
  check(epochs >= 1, "train.epochs", "must be at least 1");
  check(batch_size >= 1, "train.batch_size", "must be at least 1");
  check(tau_cl > 0.0, "train.tau_cl", "must be positive");
  check(tau_gs > 0.0, "train.tau_gs", "must be positive");
}

TrainConfig TrainConfig::effective() const {
  TrainConfig c = *this;
  if (c.lambda_cl == 0.0 || c.cl_strategy == ClStrategy::off) {
    c.cl_strategy = ClStrategy::off;
    c.lambda_cl = 0.0;
  }
  if (c.lambda_ar == 0.0 || !c.ar_enabled) {
    c.ar_enabled = false;
    c.lambda_ar = 0.0;
  }
  return c;
}

TrainConfig TrainConfig::baseline() const {
  TrainConfig c = *this;
  c.lambda_cl = 0.0;
  c.lambda_ar = 0.0;
  return c.effective();
}

nlohmann::ordered_json to_json(const ModelConfig& c) {
  nlohmann::ordered_json j;
  j["num_layers"] = c.num_layers;
  j["d_model"] = c.d_model;
  j["num_heads"] = c.num_heads;
  j["ffn_dim"] = c.ffn_dim;
  j["vocab_size"] = c.vocab_size;
  j["max_src_len"] = c.max_src_len;
  j["max_tgt_len"] = c.max_tgt_len;
  j["dropout_rate"] = c.dropout_rate;
  return j;
}

nlohmann::ordered_json to_json(const TrainConfig& c) {
  nlohmann::ordered_json j;
  j["lambda_qg"] = c.lambda_qg;
  j["lambda_cl"] = c.lambda_cl;
  j["lambda_ar"] = c.lambda_ar;
  j["learning_rate"] = c.learning_rate;
  j["epochs"] = c.epochs;
  j["batch_size"] = c.batch_size;
  j["tau_cl"] = c.tau_cl;
  j["tau_gs"] = c.tau_gs;
  j["cl_strategy"] = std::string(to_string(c.cl_strategy));
  j["ar_enabled"] = c.ar_enabled;
  j["seed"] = c.seed;
  return j;
}

ModelConfig model_config_from_json(const nlohmann::json& j, const std::string& prefix) {
  ModelConfig c;
  c.num_layers = field<int>(j, prefix, "num_layers");
  c.d_model = field<int>(j, prefix, "d_model");
  c.num_heads = field<int>(j, prefix, "num_heads");
  c.ffn_dim = field<int>(j, prefix, "ffn_dim");
  c.vocab_size = field<int>(j, prefix, "vocab_size");
  c.max_src_len = field<int>(j, prefix, "max_src_len");
  c.max_tgt_len = field<int>(j, prefix, "max_tgt_len");
  c.dropout_rate = field<double>(j, prefix, "dropout_rate");
  return c;
}

TrainConfig train_config_from_json(const nlohmann::json& j, const std::string& prefix) {
  TrainConfig c;
  c.lambda_qg = field<double>(j, prefix, "lambda_qg");
  c.lambda_cl = field<double>(j, prefix, "lambda_cl");
  c.lambda_ar = field<double>(j, prefix, "lambda_ar");
  c.learning_rate = field<double>(j, prefix, "learning_rate");
  c.epochs = field<int>(j, prefix, "epochs");
  c.batch_size = field<int>(j, prefix, "batch_size");
  c.tau_cl = field<double>(j, prefix, "tau_cl");
  c.tau_gs = field<double>(j, prefix, "tau_gs");
  c.cl_strategy = cl_strategy_from_string(field<std::string>(j, prefix, "cl_strategy"));
  c.ar_enabled = field<bool>(j, prefix, "ar_enabled");
  c.seed = field<std::uint64_t>(j, prefix, "seed");
  return c;
}

}  // namespace cbqg
