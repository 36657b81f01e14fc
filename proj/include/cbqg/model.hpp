#pragma once

// Transformer encoder-decoder (pre-LN, sinusoidal positions, tied output
// projection). The same class serves as question generator (answer ->
// question) and as question answerer (question -> answer).

#include <cstddef>
#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "cbqg/config.hpp"
#include "cbqg/rng.hpp"
#include "cbqg/tensor.hpp"
#include "cbqg/vocab.hpp"

namespace cbqg {

/// Token ids of B sequences, trimmed to the longest non-pad content.
struct TokenBatch {
  std::size_t batch = 0;
  std::size_t length = 0;
  std::vector<int> ids;  // row-major [batch, length]

  static TokenBatch from(std::span<const TokenSequence> seqs);
  int at(std::size_t b, std::size_t t) const { return ids[b * length + t]; }
  std::vector<bool> pad_mask() const;
};

/// Decoder input ([BOS] y1 .. y_{T-1}) and one-ahead targets (y1 .. y_T).
struct TeacherForcing {
  TokenBatch input;
  std::vector<int> targets;  // [batch * input.length], kPad where ignored

  static TeacherForcing from(std::span<const TokenSequence> targets);
};

struct ForwardContext {
  bool train = false;
  Rng* dropout_rng = nullptr;
  /// When set, every attention layer appends its probabilities [B*H, Lq, Lk].
  std::vector<Tensor>* attention_probes = nullptr;

  static ForwardContext eval() { return {}; }
  static ForwardContext training(Rng& rng) { return {true, &rng, nullptr}; }
};

struct EncoderOutput {
  Tensor z;                    // [B, L, d_model]
  std::vector<bool> src_pad;   // [B * L], true where the source is [PAD]
  std::size_t batch = 0;
  std::size_t length = 0;
};

struct NamedTensor {
  std::string name;
  Tensor tensor;
};

class Seq2Seq {
 public:
  Seq2Seq(const ModelConfig& config, std::uint64_t init_seed);
  Seq2Seq(const Seq2Seq&) = delete;
  Seq2Seq& operator=(const Seq2Seq&) = delete;
  Seq2Seq(Seq2Seq&&) = default;
  Seq2Seq& operator=(Seq2Seq&&) = default;

  const ModelConfig& config() const { return config_; }
  std::vector<NamedTensor>& parameters() { return params_; }
  const std::vector<NamedTensor>& parameters() const { return params_; }
  std::size_t parameter_count() const;
  const Tensor& token_embedding() const { return params_[0].tensor; }

  /// Frozen models keep requires_grad off on every parameter.
  void set_trainable(bool trainable);
  void zero_grad();

  EncoderOutput encode(const TokenBatch& src, ForwardContext& ctx) const;
  EncoderOutput encode(const TokenSequence& src, ForwardContext& ctx) const;

  /// Encoder over precomputed (unscaled) token-embedding rows [B, L, d], e.g.
  /// one-hot rows multiplied by token_embedding().
  EncoderOutput encode_embedded(const Tensor& token_rows, std::vector<bool> src_pad,
                                ForwardContext& ctx) const;

  /// Teacher-forced logits [B, T, V]; position t sees tgt_prefix[0..t] only.
  Tensor decode_logits(const EncoderOutput& enc, const TokenBatch& tgt_prefix, ForwardContext& ctx) const;
  Tensor decode_logits(const EncoderOutput& enc, const TokenSequence& tgt_prefix, ForwardContext& ctx) const;

  /// Argmax decoding from [BOS] (ties -> lowest id) until [EOS] or max_len
  /// ids in total. Results are padded to max_len.
  std::vector<TokenSequence> greedy_generate(const EncoderOutput& enc, std::size_t max_len) const;
  TokenSequence greedy_generate_one(const EncoderOutput& enc, std::size_t max_len) const;

 private:
  struct Attention {
    Tensor wq, bq, wk, bk, wv, bv, wo, bo;
  };
  struct Norm {
    Tensor gain, bias;
  };
  struct Ffn {
    Tensor w1, b1, w2, b2;
  };
  struct EncoderLayer {
    Norm ln1;
    Attention self;
    Norm ln2;
    Ffn ffn;
  };
  struct DecoderLayer {
    Norm ln1;
    Attention self;
    Norm ln2;
    Attention cross;
    Norm ln3;
    Ffn ffn;
  };

  Tensor add_param(const std::string& name, Shape shape, Rng& rng, double fill_or_nan);
  Attention make_attention(const std::string& prefix, Rng& rng);
  Norm make_norm(const std::string& prefix, Rng& rng);
  Ffn make_ffn(const std::string& prefix, Rng& rng);

  Tensor embed_rows(const Tensor& rows, ForwardContext& ctx) const;
  Tensor attend(const Attention& a, const Tensor& x, const Tensor& memory, const Tensor& mask,
                ForwardContext& ctx) const;
  Tensor feed_forward(const Ffn& f, const Tensor& x) const;
  Tensor dropout(const Tensor& x, ForwardContext& ctx) const;
  Tensor key_mask(std::size_t batch, std::size_t lq, std::size_t lk, const std::vector<bool>& key_pad) const;
  Tensor causal_mask(std::size_t batch, std::size_t len) const;

  ModelConfig config_;
  std::vector<NamedTensor> params_;
  std::vector<EncoderLayer> enc_;
  std::vector<DecoderLayer> dec_;
  Norm enc_final_;
  Norm dec_final_;
};

/// Mean over non-[PAD] targets of -log softmax(logits)[target], in nats.
Tensor nll_loss(const Tensor& logits, std::span<const int> targets);

/// Sinusoidal position table [len, d].
Tensor positional_encoding(std::size_t len, std::size_t d);

/// Lowest index of the maximum.
std::size_t argmax(std::span<const double> row);

}  // namespace cbqg
