#include "cbqg/contrastive.hpp"

#include "cbqg/errors.hpp"

namespace cbqg {

Tensor cls_embeddings(const TokenBatch& batch, const Seq2Seq& model, ForwardContext& ctx) {
  for (std::size_t b = 0; b < batch.batch; ++b)
    if (batch.at(b, 0) != kCls) throw ArgumentError("cls_embedding: sequence does not start with [CLS]");
  const EncoderOutput enc = model.encode(batch, ctx);
  const auto d = static_cast<std::size_t>(model.config().d_model);
  return reshape(slice(enc.z, 1, 0, 1), {batch.batch, d});
}

Tensor cls_embedding(const TokenSequence& seq, const Seq2Seq& model, ForwardContext& ctx) {
  if (seq.ids.empty() || seq.ids.front() != kCls)
    throw ArgumentError("cls_embedding: sequence does not start with [CLS]");
  const EncoderOutput enc = model.encode(seq, ctx);
  return reshape(slice(enc.z, 1, 0, 1), {static_cast<std::size_t>(model.config().d_model)});
}

Tensor nt_xent_loss(const EmbeddingBatch& batch) {
  if (!(batch.tau_cl > 0.0)) throw ArgumentError("nt_xent_loss: tau_cl must be positive");
  if (batch.anchors.rank() != 2 || batch.anchors.shape() != batch.positives.shape())
    throw ArgumentError("nt_xent_loss: anchors and positives must both be [N, d]");
  const std::size_t n = batch.anchors.dim(0);
  const std::size_t views = 2 * n;
  std::vector<Tensor> rows_of_views;
  rows_of_views.reserve(views);
  for (std::size_t i = 0; i < n; ++i) rows_of_views.push_back(slice(batch.anchors, 0, i, i + 1));
  for (std::size_t i = 0; i < n; ++i) rows_of_views.push_back(slice(batch.positives, 0, i, i + 1));

  std::vector<Tensor> sims(views * views);
  for (std::size_t i = 0; i < views; ++i)
    for (std::size_t j = i + 1; j < views; ++j)
      sims[i * views + j] = sims[j * views + i] =
          reshape(cosine_similarity(rows_of_views[i], rows_of_views[j]), {1});

  std::vector<Tensor> logit_rows;
  std::vector<int> targets;
  logit_rows.reserve(views);
  for (std::size_t v = 0; v < views; ++v) {
    const std::size_t pos = (v + n) % views;
    std::vector<Tensor> row;
    row.reserve(views - 1);
    int target = 0;
    for (std::size_t u = 0; u < views; ++u) {
      if (u == v) continue;
      if (u == pos) target = static_cast<int>(row.size());
      row.push_back(sims[v * views + u]);
    }
    logit_rows.push_back(reshape(concat(row, 0), {1, views - 1}));
    targets.push_back(target);
  }
  const Tensor logits = scale(concat(logit_rows, 0), 1.0 / batch.tau_cl);
  return gather_nll(log_softmax(logits, 1), targets);
}

EmbeddingBatch make_positives(std::span<const TokenSequence> answers, std::span<const TokenSequence> questions,
                              ClStrategy strategy, const Seq2Seq& model, ForwardContext& ctx, double tau_cl) {
  EmbeddingBatch out;
  out.tau_cl = tau_cl;
  const TokenBatch answer_batch = TokenBatch::from(answers);
  switch (strategy) {
    case ClStrategy::off:
      throw ConfigError("make_positives: contrastive strategy is off", "train.cl_strategy");
    case ClStrategy::ground_truth:
      if (questions.size() != answers.size())
        throw ArgumentError("make_positives: answers and questions differ in count");
      out.anchors = cls_embeddings(answer_batch, model, ctx);
      out.positives = cls_embeddings(TokenBatch::from(questions), model, ctx);
      break;
    case ClStrategy::dropout:
      if (!ctx.train || model.config().dropout_rate == 0.0)
        throw ConfigError("make_positives: CL_s needs active dropout, otherwise both views are identical",
                          "model.dropout_rate");
      out.anchors = cls_embeddings(answer_batch, model, ctx);
      out.positives = cls_embeddings(answer_batch, model, ctx);
      break;
  }
  return out;
}

EmbeddingBatch make_positives(std::span<const QAPair> pairs, const Vocab& vocab, ClStrategy strategy,
                              const Seq2Seq& model, ForwardContext& ctx, double tau_cl) {
  const auto max_len = static_cast<std::size_t>(model.config().max_src_len);
  std::vector<TokenSequence> answers, questions;
  for (const auto& p : pairs) {
    answers.push_back(encode(p.answer, vocab, max_len, EncodeMode::cls_prefixed));
    questions.push_back(encode(p.question, vocab, max_len, EncodeMode::cls_prefixed));
  }
  return make_positives(answers, questions, strategy, model, ctx, tau_cl);
}

}  // namespace cbqg
