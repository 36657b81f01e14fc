#pragma once

// Joint question-generation training (NLL + contrastive + answer
// reconstruction) and plain question-answering training, both with
// per-epoch validation ROUGE-L and best-epoch checkpoint selection.

#include <functional>
#include <span>
#include <vector>

#include "cbqg/checkpoint.hpp"
#include "cbqg/config.hpp"
#include "cbqg/dataset.hpp"
#include "cbqg/model.hpp"
#include "cbqg/tensor.hpp"
#include "cbqg/vocab.hpp"

namespace cbqg {

/// lambda_qg * l_qg + lambda_cl * l_cl + lambda_ar * l_ar; branches that
/// are switched off in `cfg` contribute nothing.
double total_loss(double l_qg, double l_cl, double l_ar, const TrainConfig& cfg);

struct EpochMetrics {
  int epoch = 0;
  double l_qg = 0.0;
  double l_cl = 0.0;
  double l_ar = 0.0;
  double total = 0.0;
  double val_rouge_l = 0.0;
};

struct TrainResult {
  Checkpoint best;
  std::vector<EpochMetrics> history;
};

using EpochCallback = std::function<void(const EpochMetrics&, const Checkpoint&)>;

/// Frozen question -> answer model used by the reconstruction branch.
struct QaReference {
  Seq2Seq* model = nullptr;
  const Vocab* vocab = nullptr;
};

/// Per-step loss components of one QG batch; `total` is what gets
/// differentiated.
struct QgStepLosses {
  Tensor l_qg, l_cl, l_ar, total;
};

/// Forward pass of one joint QG step (no backward, no update).
QgStepLosses qg_step_losses(const Seq2Seq& model, std::span<const TokenSequence> answers_cls,
                            std::span<const TokenSequence> questions, std::span<const TokenSequence> questions_cls,
                            std::span<const TokenSequence> answers_for_qa, const TrainConfig& cfg,
                            const Seq2Seq* qa_model, Rng& dropout_rng, Rng& gumbel_rng);

/// Mean ROUGE-L F1 of greedy outputs against references.
double validation_rouge_l(const Seq2Seq& model, const Vocab& vocab, Task task, std::span<const QAPair> pairs);

/// Algorithm: for each epoch and batch, one Adam step on the weighted
/// three-loss objective; after each epoch, validation ROUGE-L; returns the
/// best epoch (earliest on ties). The QA model, if used, is frozen here.
TrainResult train_qg(const Vocab& vocab, const DatasetSplit& data, const ModelConfig& model_cfg,
                     const TrainConfig& cfg, QaReference qa = {}, const EpochCallback& on_epoch = {});

/// Teacher-forced question -> answer training with the same selection rule.
TrainResult train_qa(const Vocab& vocab, const DatasetSplit& data, const ModelConfig& model_cfg,
                     const TrainConfig& cfg, const EpochCallback& on_epoch = {});
/// Trains and validates on the same pairs.
TrainResult train_qa(const Vocab& vocab, std::span<const QAPair> pairs, const ModelConfig& model_cfg,
                     const TrainConfig& cfg, const EpochCallback& on_epoch = {});

}  // namespace cbqg
