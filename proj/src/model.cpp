#include "cbqg/model.hpp"

#include <cmath>
#include <limits>

#include "cbqg/errors.hpp"

namespace cbqg {

namespace {

constexpr double kMaskValue = -1e9;
constexpr double kInitRange = 0.08;

}  // namespace

// ---- batches ----------------------------------------------------------------

TokenBatch TokenBatch::from(std::span<const TokenSequence> seqs) {
  if (seqs.empty()) throw ArgumentError("TokenBatch: empty batch");
  TokenBatch b;
  b.batch = seqs.size();
  for (const auto& s : seqs) b.length = std::max(b.length, s.content_length());
  if (b.length == 0) throw ArgumentError("TokenBatch: all sequences are empty");
  b.ids.assign(b.batch * b.length, kPad);
  for (std::size_t i = 0; i < seqs.size(); ++i) {
    const std::size_t n = std::min(b.length, seqs[i].ids.size());
    std::copy_n(seqs[i].ids.begin(), n, b.ids.begin() + static_cast<std::ptrdiff_t>(i * b.length));
  }
  return b;
}

std::vector<bool> TokenBatch::pad_mask() const {
  std::vector<bool> mask(ids.size());
  for (std::size_t i = 0; i < ids.size(); ++i) mask[i] = ids[i] == kPad;
  return mask;
}

TeacherForcing TeacherForcing::from(std::span<const TokenSequence> targets) {
  const TokenBatch full = TokenBatch::from(targets);
  if (full.length < 2) throw ArgumentError("TeacherForcing: targets need at least two ids");
  TeacherForcing tf;
  tf.input.batch = full.batch;
  tf.input.length = full.length - 1;
  tf.input.ids.reserve(full.batch * tf.input.length);
  tf.targets.reserve(full.batch * tf.input.length);
  for (std::size_t b = 0; b < full.batch; ++b) {
    for (std::size_t t = 0; t + 1 < full.length; ++t) {
      tf.input.ids.push_back(full.at(b, t));
      tf.targets.push_back(full.at(b, t + 1));
    }
  }
  return tf;
}

// ---- helpers ------------------------------------------------------------------

Tensor positional_encoding(std::size_t len, std::size_t d) {
  std::vector<double> v(len * d);
  for (std::size_t pos = 0; pos < len; ++pos) {
    for (std::size_t i = 0; i < d; i += 2) {
      const double freq = std::pow(10000.0, -static_cast<double>(i) / static_cast<double>(d));
      v[pos * d + i] = std::sin(static_cast<double>(pos) * freq);
      if (i + 1 < d) v[pos * d + i + 1] = std::cos(static_cast<double>(pos) * freq);
    }
  }
  return Tensor::from({len, d}, std::move(v));
}

std::size_t argmax(std::span<const double> row) {
  if (row.empty()) throw ArgumentError("argmax: empty row");
  std::size_t best = 0;
  for (std::size_t i = 1; i < row.size(); ++i)
    if (row[i] > row[best]) best = i;
  return best;
}

Tensor nll_loss(const Tensor& logits, std::span<const int> targets) {
  return gather_nll(log_softmax(logits, logits.rank() - 1), targets, kPad);
}

// ---- construction ----------------------------------------------------------------

Tensor Seq2Seq::add_param(const std::string& name, Shape shape, Rng& rng, double fill_or_nan) {
  Tensor t = Tensor::zeros(std::move(shape), true);
  auto v = t.mutable_values();
  if (std::isnan(fill_or_nan)) {
    for (auto& x : v) x = rng.uniform(-kInitRange, kInitRange);
  } else {
    std::fill(v.begin(), v.end(), fill_or_nan);
  }
  params_.push_back({name, t});
  return t;
}

Seq2Seq::Attention Seq2Seq::make_attention(const std::string& prefix, Rng& rng) {
  const auto d = static_cast<std::size_t>(config_.d_model);
  const double init = std::numeric_limits<double>::quiet_NaN();
  Attention a;
  a.wq = add_param(prefix + ".wq", {d, d}, rng, init);
  a.bq = add_param(prefix + ".bq", {d}, rng, 0.0);
  a.wk = add_param(prefix + ".wk", {d, d}, rng, init);
  a.bk = add_param(prefix + ".bk", {d}, rng, 0.0);
  a.wv = add_param(prefix + ".wv", {d, d}, rng, init);
  a.bv = add_param(prefix + ".bv", {d}, rng, 0.0);
  a.wo = add_param(prefix + ".wo", {d, d}, rng, init);
  a.bo = add_param(prefix + ".bo", {d}, rng, 0.0);
  return a;
}

Seq2Seq::Norm Seq2Seq::make_norm(const std::string& prefix, Rng& rng) {
  const auto d = static_cast<std::size_t>(config_.d_model);
  return Norm{add_param(prefix + ".gain", {d}, rng, 1.0), add_param(prefix + ".bias", {d}, rng, 0.0)};
}

Seq2Seq::Ffn Seq2Seq::make_ffn(const std::string& prefix, Rng& rng) {
  const auto d = static_cast<std::size_t>(config_.d_model);
  const auto f = static_cast<std::size_t>(config_.ffn_dim);
  const double init = std::numeric_limits<double>::quiet_NaN();
  return Ffn{add_param(prefix + ".w1", {d, f}, rng, init), add_param(prefix + ".b1", {f}, rng, 0.0),
             add_param(prefix + ".w2", {f, d}, rng, init), add_param(prefix + ".b2", {d}, rng, 0.0)};
}

Seq2Seq::Seq2Seq(const ModelConfig& config, std::uint64_t init_seed) : config_(config) {
  config_.validate();
  Rng rng = Rng::stream(init_seed, "init");
  const double init = std::numeric_limits<double>::quiet_NaN();
  add_param("embed.weight",
            {static_cast<std::size_t>(config_.vocab_size), static_cast<std::size_t>(config_.d_model)}, rng,
            init);
  for (int l = 0; l < config_.num_layers; ++l) {
    const std::string p = "enc." + std::to_string(l);
    EncoderLayer layer;
    layer.ln1 = make_norm(p + ".ln1", rng);
    layer.self = make_attention(p + ".self", rng);
    layer.ln2 = make_norm(p + ".ln2", rng);
    layer.ffn = make_ffn(p + ".ffn", rng);
    enc_.push_back(std::move(layer));
  }
  enc_final_ = make_norm("enc.ln_f", rng);
  for (int l = 0; l < config_.num_layers; ++l) {
    const std::string p = "dec." + std::to_string(l);
    DecoderLayer layer;
    layer.ln1 = make_norm(p + ".ln1", rng);
    layer.self = make_attention(p + ".self", rng);
    layer.ln2 = make_norm(p + ".ln2", rng);
    layer.cross = make_attention(p + ".cross", rng);
    layer.ln3 = make_norm(p + ".ln3", rng);
    layer.ffn = make_ffn(p + ".ffn", rng);
    dec_.push_back(std::move(layer));
  }
  dec_final_ = make_norm("dec.ln_f", rng);
}

std::size_t Seq2Seq::parameter_count() const {
  std::size_t n = 0;
  for (const auto& p : params_) n += p.tensor.numel();
  return n;
}

void Seq2Seq::set_trainable(bool trainable) {
  for (auto& p : params_) p.tensor.impl()->requires_grad = trainable;
}

void Seq2Seq::zero_grad() {
  for (auto& p : params_) p.tensor.zero_grad();
}

// ---- building blocks ---------------------------------------------------------------

Tensor Seq2Seq::dropout(const Tensor& x, ForwardContext& ctx) const {
  if (!ctx.train || config_.dropout_rate == 0.0) return x;
  if (ctx.dropout_rng == nullptr) throw StateError("dropout: training context without a dropout stream");
  const double keep = 1.0 - config_.dropout_rate;
  std::vector<double> mask(x.numel());
  for (auto& m : mask) m = ctx.dropout_rng->bernoulli(keep) ? 1.0 / keep : 0.0;
  return mul(x, Tensor::from(x.shape(), std::move(mask)));
}

Tensor Seq2Seq::embed_rows(const Tensor& rows, ForwardContext& ctx) const {
  const std::size_t len = rows.dim(1);
  const auto d = static_cast<std::size_t>(config_.d_model);
  Tensor x = scale(rows, std::sqrt(static_cast<double>(d)));
  x = add(x, positional_encoding(len, d));
  return dropout(x, ctx);
}

Tensor Seq2Seq::key_mask(std::size_t batch, std::size_t lq, std::size_t lk,
                         const std::vector<bool>& key_pad) const {
  const auto heads = static_cast<std::size_t>(config_.num_heads);
  std::vector<double> m(batch * heads * lq * lk, 0.0);
  for (std::size_t b = 0; b < batch; ++b)
    for (std::size_t h = 0; h < heads; ++h)
      for (std::size_t i = 0; i < lq; ++i)
        for (std::size_t j = 0; j < lk; ++j)
          if (key_pad[b * lk + j]) m[((b * heads + h) * lq + i) * lk + j] = kMaskValue;
  return Tensor::from({batch * heads, lq, lk}, std::move(m));
}

Tensor Seq2Seq::causal_mask(std::size_t batch, std::size_t len) const {
  const auto heads = static_cast<std::size_t>(config_.num_heads);
  std::vector<double> m(batch * heads * len * len, 0.0);
  for (std::size_t g = 0; g < batch * heads; ++g)
    for (std::size_t i = 0; i < len; ++i)
      for (std::size_t j = i + 1; j < len; ++j) m[(g * len + i) * len + j] = kMaskValue;
  return Tensor::from({batch * heads, len, len}, std::move(m));
}

Tensor Seq2Seq::attend(const Attention& a, const Tensor& x, const Tensor& memory, const Tensor& mask,
                       ForwardContext& ctx) const {
  const std::size_t batch = x.dim(0);
  const std::size_t lq = x.dim(1);
  const std::size_t lk = memory.dim(1);
  const auto d = static_cast<std::size_t>(config_.d_model);
  const auto heads = static_cast<std::size_t>(config_.num_heads);
  const std::size_t dk = d / heads;
  auto split = [&](const Tensor& t, std::size_t len) {
    return reshape(permute(reshape(t, {batch, len, heads, dk}), {0, 2, 1, 3}), {batch * heads, len, dk});
  };
  const Tensor q = split(add(matmul(x, a.wq), a.bq), lq);
  const Tensor k = split(add(matmul(memory, a.wk), a.bk), lk);
  const Tensor v = split(add(matmul(memory, a.wv), a.bv), lk);
  Tensor scores = scale(matmul(q, k, true), 1.0 / std::sqrt(static_cast<double>(dk)));
  if (mask.defined()) scores = add(scores, mask);
  const Tensor p = softmax(scores, 2);
  if (ctx.attention_probes) ctx.attention_probes->push_back(p);
  const Tensor o = matmul(p, v);
  const Tensor merged = reshape(permute(reshape(o, {batch, heads, lq, dk}), {0, 2, 1, 3}), {batch, lq, d});
  return add(matmul(merged, a.wo), a.bo);
}

Tensor Seq2Seq::feed_forward(const Ffn& f, const Tensor& x) const {
  return add(matmul(relu(add(matmul(x, f.w1), f.b1)), f.w2), f.b2);
}

// ---- forward passes -------------------------------------------------------------------

EncoderOutput Seq2Seq::encode(const TokenSequence& src, ForwardContext& ctx) const {
  if (src.size() > static_cast<std::size_t>(config_.max_src_len))
    throw ArgumentError("encode: source length " + std::to_string(src.size()) + " exceeds max_src_len " +
                        std::to_string(config_.max_src_len));
  return encode(TokenBatch::from(std::span(&src, 1)), ctx);
}

EncoderOutput Seq2Seq::encode(const TokenBatch& src, ForwardContext& ctx) const {
  if (src.length > static_cast<std::size_t>(config_.max_src_len))
    throw ArgumentError("encode: source length " + std::to_string(src.length) + " exceeds max_src_len " +
                        std::to_string(config_.max_src_len));
  return encode_embedded(embedding(token_embedding(), src.ids, {src.batch, src.length}), src.pad_mask(), ctx);
}

EncoderOutput Seq2Seq::encode_embedded(const Tensor& token_rows, std::vector<bool> src_pad,
                                       ForwardContext& ctx) const {
  if (token_rows.rank() != 3 || token_rows.dim(2) != static_cast<std::size_t>(config_.d_model))
    throw ArgumentError("encode_embedded: expected [B, L, d_model] rows, got " + shape_str(token_rows.shape()));
  const std::size_t batch = token_rows.dim(0);
  const std::size_t len = token_rows.dim(1);
  if (len > static_cast<std::size_t>(config_.max_src_len))
    throw ArgumentError("encode: source length " + std::to_string(len) + " exceeds max_src_len");
  if (src_pad.size() != batch * len) throw ArgumentError("encode_embedded: pad mask size mismatch");
  const Tensor mask = key_mask(batch, len, len, src_pad);
  Tensor x = embed_rows(token_rows, ctx);
  for (const auto& layer : enc_) {
    Tensor h = layer_norm(x, layer.ln1.gain, layer.ln1.bias);
    x = add(x, dropout(attend(layer.self, h, h, mask, ctx), ctx));
    h = layer_norm(x, layer.ln2.gain, layer.ln2.bias);
    x = add(x, dropout(feed_forward(layer.ffn, h), ctx));
  }
  return EncoderOutput{layer_norm(x, enc_final_.gain, enc_final_.bias), std::move(src_pad), batch, len};
}

Tensor Seq2Seq::decode_logits(const EncoderOutput& enc, const TokenSequence& tgt_prefix, ForwardContext& ctx) const {
  if (tgt_prefix.size() > static_cast<std::size_t>(config_.max_tgt_len))
    throw ArgumentError("decode: target length exceeds max_tgt_len");
  TokenBatch b;
  b.batch = 1;
  b.length = tgt_prefix.size();
  b.ids = tgt_prefix.ids;
  return reshape(decode_logits(enc, b, ctx), {b.length, static_cast<std::size_t>(config_.vocab_size)});
}

Tensor Seq2Seq::decode_logits(const EncoderOutput& enc, const TokenBatch& tgt, ForwardContext& ctx) const {
  if (tgt.length == 0 || tgt.length > static_cast<std::size_t>(config_.max_tgt_len))
    throw ArgumentError("decode: target length " + std::to_string(tgt.length) + " outside [1, max_tgt_len=" +
                        std::to_string(config_.max_tgt_len) + "]");
  if (tgt.batch != enc.batch) throw ArgumentError("decode: batch size differs from encoder output");
  const Tensor self_mask = causal_mask(tgt.batch, tgt.length);
  const Tensor cross_mask = key_mask(tgt.batch, tgt.length, enc.length, enc.src_pad);
  Tensor y = embed_rows(embedding(token_embedding(), tgt.ids, {tgt.batch, tgt.length}), ctx);
  for (const auto& layer : dec_) {
    Tensor h = layer_norm(y, layer.ln1.gain, layer.ln1.bias);
    y = add(y, dropout(attend(layer.self, h, h, self_mask, ctx), ctx));
    h = layer_norm(y, layer.ln2.gain, layer.ln2.bias);
    y = add(y, dropout(attend(layer.cross, h, enc.z, cross_mask, ctx), ctx));
    h = layer_norm(y, layer.ln3.gain, layer.ln3.bias);
    y = add(y, dropout(feed_forward(layer.ffn, h), ctx));
  }
  const Tensor h = layer_norm(y, dec_final_.gain, dec_final_.bias);
  return matmul(h, token_embedding(), true);
}

std::vector<TokenSequence> Seq2Seq::greedy_generate(const EncoderOutput& enc, std::size_t max_len) const {
  if (max_len == 0 || max_len > static_cast<std::size_t>(config_.max_tgt_len))
    throw ArgumentError("greedy_generate: max_len must lie in [1, max_tgt_len]");
  NoGradGuard no_grad;
  ForwardContext ctx = ForwardContext::eval();
  const std::size_t batch = enc.batch;
  const auto vocab = static_cast<std::size_t>(config_.vocab_size);
  std::vector<std::vector<int>> out(batch, std::vector<int>{kBos});
  std::vector<bool> done(batch, false);
  std::size_t remaining = batch;
  for (std::size_t len = 1; len < max_len && remaining > 0; ++len) {
    TokenBatch prefix;
    prefix.batch = batch;
    prefix.length = len;
    prefix.ids.reserve(batch * len);
    for (const auto& row : out) prefix.ids.insert(prefix.ids.end(), row.begin(), row.end());
    const Tensor logits = decode_logits(enc, prefix, ctx);
    const auto lv = logits.values();
    for (std::size_t b = 0; b < batch; ++b) {
      if (done[b]) {
        out[b].push_back(kPad);
        continue;
      }
      const int next = static_cast<int>(argmax(lv.subspan((b * len + len - 1) * vocab, vocab)));
      out[b].push_back(next);
      if (next == kEos) {
        done[b] = true;
        --remaining;
      }
    }
  }
  std::vector<TokenSequence> result;
  result.reserve(batch);
  for (auto& row : out) {
    row.resize(max_len, kPad);
    result.push_back(TokenSequence{std::move(row)});
  }
  return result;
}

TokenSequence Seq2Seq::greedy_generate_one(const EncoderOutput& enc, std::size_t max_len) const {
  if (enc.batch != 1) throw ArgumentError("greedy_generate_one: expected a single-sequence encoding");
  return greedy_generate(enc, max_len).front();
}

}  // namespace cbqg
