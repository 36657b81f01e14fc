#include "cbqg/reconstruction.hpp"

#include <cmath>

#include "cbqg/errors.hpp"

namespace cbqg {

double gumbel_from_uniform(double u) { return -std::log(-std::log(u)); }

Tensor sample_gumbel(const Shape& shape, Rng& rng) {
  std::vector<double> g(numel_of(shape));
  for (auto& x : g) x = gumbel_from_uniform(kGumbelEps + (1.0 - 2.0 * kGumbelEps) * rng.uniform());
  return Tensor::from(shape, std::move(g));
}

Tensor gumbel_softmax(const Tensor& logits, double tau_gs, const Tensor& noise) {
  if (!(tau_gs > 0.0)) throw ArgumentError("gumbel_softmax: tau_gs must be positive");
  if (noise.shape() != logits.shape()) throw ArgumentError("gumbel_softmax: noise shape differs from logits");
  const std::size_t last = logits.rank() - 1;
  const Tensor perturbed = add(log_softmax(logits, last), noise);
  return softmax(scale(perturbed, 1.0 / tau_gs), last);
}

RelaxedQuestion st_gumbel_softmax(const Tensor& logits, double tau_gs, const Tensor& noise) {
  if (!(tau_gs > 0.0)) throw ArgumentError("st_gumbel_softmax: tau_gs must be positive");
  if (noise.shape() != logits.shape()) throw ArgumentError("st_gumbel_softmax: noise shape differs from logits");
  const std::size_t last = logits.rank() - 1;
  const Tensor perturbed = add(log_softmax(logits, last), noise);
  RelaxedQuestion q;
  q.soft = softmax(scale(perturbed, 1.0 / tau_gs), last);
  const std::size_t v = logits.dim(last);
  const std::size_t rows = logits.numel() / v;
  const auto pv = perturbed.values();
  std::vector<double> hard(logits.numel(), 0.0);
  q.ids.resize(rows);
  for (std::size_t r = 0; r < rows; ++r) {
    // (log p + g) / tau has the same winner for every tau > 0.
    const std::size_t best = argmax(pv.subspan(r * v, v));
    q.ids[r] = static_cast<int>(best);
    hard[r * v + best] = 1.0;
  }
  q.rows = straight_through(Tensor::from(logits.shape(), std::move(hard)), q.soft);
  return q;
}

RelaxedQuestion st_gumbel_softmax(const Tensor& logits, double tau_gs, Rng& rng) {
  return st_gumbel_softmax(logits, tau_gs, sample_gumbel(logits.shape(), rng));
}

void check_reconstruction_compatible(const Vocab& generator_vocab, const Vocab& qa_vocab, const Seq2Seq& qa_model) {
  if (!(generator_vocab == qa_vocab))
    throw ConfigError("reconstruction: QA model vocabulary differs from the generator's", "qa_checkpoint");
  if (static_cast<std::size_t>(qa_model.config().vocab_size) != qa_vocab.size())
    throw ConfigError("reconstruction: QA model vocab_size does not match its vocabulary", "qa_checkpoint");
  for (const auto& p : qa_model.parameters())
    if (p.tensor.requires_grad())
      throw ConfigError("reconstruction: QA model must be frozen (parameter " + p.name + " is trainable)",
                        "qa_checkpoint");
}

Tensor reconstruction_loss(const Tensor& question_rows, const std::vector<bool>& question_pad,
                           std::span<const TokenSequence> answers, const Seq2Seq& qa_model) {
  if (question_rows.rank() != 3) throw ArgumentError("reconstruction_loss: question rows must be [B, T, V]");
  const std::size_t batch = question_rows.dim(0);
  const std::size_t len = question_rows.dim(1);
  if (question_rows.dim(2) != static_cast<std::size_t>(qa_model.config().vocab_size))
    throw ConfigError("reconstruction_loss: question rows and QA model disagree on |V|", "qa_checkpoint");
  if (question_pad.size() != batch * len) throw ArgumentError("reconstruction_loss: pad mask size mismatch");
  if (answers.size() != batch) throw ArgumentError("reconstruction_loss: one answer per question required");

  const Tensor& table = qa_model.token_embedding();
  const std::vector<int> bos(batch, kBos);
  const Tensor bos_rows = embedding(table, bos, {batch, 1});
  const Tensor question_embedded = matmul(question_rows, table);
  const Tensor src = concat({bos_rows, question_embedded}, 1);
  std::vector<bool> pad(batch * (len + 1), false);
  for (std::size_t b = 0; b < batch; ++b)
    for (std::size_t t = 0; t < len; ++t) pad[b * (len + 1) + t + 1] = question_pad[b * len + t];

  ForwardContext ctx = ForwardContext::eval();
  const EncoderOutput enc = qa_model.encode_embedded(src, std::move(pad), ctx);
  const TeacherForcing tf = TeacherForcing::from(answers);
  const Tensor logits = qa_model.decode_logits(enc, tf.input, ctx);
  return nll_loss(logits, tf.targets);
}

}  // namespace cbqg
