#pragma once

#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "cbqg/config.hpp"
#include "cbqg/model.hpp"
#include "cbqg/vocab.hpp"

namespace cbqg {

/// Source side of a task: [CLS]-prefixed answers for qg, plain questions for qa.
TokenSequence encode_source(std::string_view text, const Vocab& vocab, const ModelConfig& cfg, Task task);
TokenSequence encode_target(std::string_view text, const Vocab& vocab, const ModelConfig& cfg);

/// Greedy generation in eval mode, processed in chunks of `chunk` inputs.
/// Output i depends only on source i.
std::vector<std::string> generate_texts(const Seq2Seq& model, const Vocab& vocab, Task task,
                                        std::span<const std::string> sources, std::size_t chunk = 32);

}  // namespace cbqg
