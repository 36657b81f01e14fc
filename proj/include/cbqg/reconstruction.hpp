#pragma once

// Answer reconstruction through a straight-through Gumbel-Softmax.

#include <span>
#include <vector>

#include "cbqg/model.hpp"
#include "cbqg/rng.hpp"
#include "cbqg/tensor.hpp"
#include "cbqg/vocab.hpp"

namespace cbqg {

inline constexpr double kGumbelEps = 1e-12;

/// -log(-log(u)).
double gumbel_from_uniform(double u);

/// Standard Gumbel noise; u is drawn uniformly on (eps, 1 - eps).
Tensor sample_gumbel(const Shape& shape, Rng& rng);

/// softmax((log_softmax(logits) + noise) / tau) over the last axis.
Tensor gumbel_softmax(const Tensor& logits, double tau_gs, const Tensor& noise);

struct RelaxedQuestion {
  Tensor rows;           // [..., V]: exact one-hots forward, soft gradients backward
  Tensor soft;           // the Gumbel-Softmax rows the gradient flows through
  std::vector<int> ids;  // argmax per row
};

RelaxedQuestion st_gumbel_softmax(const Tensor& logits, double tau_gs, const Tensor& noise);
RelaxedQuestion st_gumbel_softmax(const Tensor& logits, double tau_gs, Rng& rng);

/// Feeds [BOS] + relaxed question rows (times the QA model's token
/// embedding) into the frozen QA model's encoder and returns the mean NLL
/// of the true answers.
///
/// question_rows: [B, T, V]; question_pad: [B * T], true where the
/// ground-truth question is padding; answers: one per batch row.
Tensor reconstruction_loss(const Tensor& question_rows, const std::vector<bool>& question_pad,
                           std::span<const TokenSequence> answers, const Seq2Seq& qa_model);

/// Throws ConfigError unless the generator and QA model share one vocabulary
/// and the QA model is frozen.
void check_reconstruction_compatible(const Vocab& generator_vocab, const Vocab& qa_vocab, const Seq2Seq& qa_model);

}  // namespace cbqg
