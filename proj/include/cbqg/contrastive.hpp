#pragma once

#include <span>

#include "cbqg/config.hpp"
#include "cbqg/dataset.hpp"
#include "cbqg/model.hpp"

namespace cbqg {

/// anchors[i] pairs with positives[i]; both [N, d].
struct EmbeddingBatch {
  Tensor anchors;
  Tensor positives;
  double tau_cl = 0.3;
};

/// Encoder output at position 0 of [CLS]-prefixed sequences: [B, d_model].
Tensor cls_embeddings(const TokenBatch& cls_prefixed, const Seq2Seq& model, ForwardContext& ctx);
/// Single sequence: [d_model].
Tensor cls_embedding(const TokenSequence& cls_prefixed, const Seq2Seq& model, ForwardContext& ctx);

/// NT-Xent over the 2N views (anchors then positives). For each view the
/// positive competes against the other 2N-1 views (self excluded); the
/// result is the mean over all 2N views, i.e. both directions.
Tensor nt_xent_loss(const EmbeddingBatch& batch);

/// CL_t (ClStrategy::ground_truth): answer [CLS] vs question [CLS].
/// CL_s (ClStrategy::dropout): two dropout views of the same answers.
/// Sequences must already be [CLS]-prefixed.
EmbeddingBatch make_positives(std::span<const TokenSequence> answers, std::span<const TokenSequence> questions,
                              ClStrategy strategy, const Seq2Seq& model, ForwardContext& ctx, double tau_cl);

EmbeddingBatch make_positives(std::span<const QAPair> pairs, const Vocab& vocab, ClStrategy strategy,
                              const Seq2Seq& model, ForwardContext& ctx, double tau_cl);

}  // namespace cbqg
