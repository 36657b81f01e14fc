#pragma once

// Checkpoint file layout (all integers little-endian):
//
//   "CBQGCKPT"            8-byte magic
//   u32 format_version    currently 1
//   u64 header_bytes
//   header                UTF-8 JSON: task, model_config, train_config,
//                         epoch, val_rouge_l, vocab, params[{name, shape}]
//   buffers               for each params entry, in order: numel x f64 LE

#include <cstdint>
#include <filesystem>
#include <string>
#include <string_view>
#include <vector>

#include "cbqg/config.hpp"
#include "cbqg/model.hpp"
#include "cbqg/tensor.hpp"
#include "cbqg/vocab.hpp"

namespace cbqg {

inline constexpr std::uint32_t kCheckpointVersion = 1;

struct ParamBuffer {
  std::string name;
  Shape shape;
  std::vector<double> values;
  bool operator==(const ParamBuffer&) const = default;
};

struct Checkpoint {
  Task task = Task::question_generation;
  ModelConfig model;
  TrainConfig train;
  Vocab vocab;
  int epoch = 0;
  double val_rouge_l = 0.0;
  std::vector<ParamBuffer> params;

  static Checkpoint capture(const Seq2Seq& model, Task task, const TrainConfig& train, const Vocab& vocab,
                            int epoch, double val_rouge_l);

  /// Copies the buffers into a model of identical architecture.
  void load_into(Seq2Seq& model) const;
  /// Fresh model built from the stored config and loaded with the buffers.
  Seq2Seq instantiate() const;
};

std::string serialize(const Checkpoint& ckpt);
/// Rejects bad magic/version, malformed headers, configs that do not match
/// the buffer list, and truncated or oversized payloads (ConfigError).
Checkpoint deserialize(std::string_view bytes);

void save_checkpoint(const std::filesystem::path& path, const Checkpoint& ckpt);
Checkpoint load_checkpoint(const std::filesystem::path& path);

}  // namespace cbqg
