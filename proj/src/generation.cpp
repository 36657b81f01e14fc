#include "cbqg/generation.hpp"

#include "cbqg/errors.hpp"

namespace cbqg {

TokenSequence encode_source(std::string_view text, const Vocab& vocab, const ModelConfig& cfg, Task task) {
  const auto mode = task == Task::question_generation ? EncodeMode::cls_prefixed : EncodeMode::question;
  return encode(text, vocab, static_cast<std::size_t>(cfg.max_src_len), mode);
}

TokenSequence encode_target(std::string_view text, const Vocab& vocab, const ModelConfig& cfg) {
  return encode(text, vocab, static_cast<std::size_t>(cfg.max_tgt_len), EncodeMode::question);
}

std::vector<std::string> generate_texts(const Seq2Seq& model, const Vocab& vocab, Task task,
                                        std::span<const std::string> sources, std::size_t chunk) {
  if (chunk == 0) throw ArgumentError("generate_texts: chunk must be positive");
  NoGradGuard no_grad;
  std::vector<std::string> out;
  out.reserve(sources.size());
  for (std::size_t begin = 0; begin < sources.size(); begin += chunk) {
    const std::size_t end = std::min(sources.size(), begin + chunk);
    std::vector<TokenSequence> seqs;
    for (std::size_t i = begin; i < end; ++i) seqs.push_back(encode_source(sources[i], vocab, model.config(), task));
    ForwardContext ctx = ForwardContext::eval();
    const EncoderOutput enc = model.encode(TokenBatch::from(seqs), ctx);
    for (const auto& g : model.greedy_generate(enc, static_cast<std::size_t>(model.config().max_tgt_len)))
      out.push_back(decode(g.ids, vocab));
  }
  return out;
}

}  // namespace cbqg
