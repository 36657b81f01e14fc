#include "cbqg/trainer.hpp"

#include <numeric>

#include "cbqg/adam.hpp"
#include "cbqg/contrastive.hpp"
#include "cbqg/errors.hpp"
#include "cbqg/generation.hpp"
#include "cbqg/reconstruction.hpp"
#include "cbqg/rouge.hpp"

namespace cbqg {

namespace {

template <typename T>
std::vector<T> gather(const std::vector<T>& all, std::span<const std::size_t> idx) {
  std::vector<T> out;
  out.reserve(idx.size());
  for (std::size_t i : idx) out.push_back(all[i]);
  return out;
}

std::vector<std::vector<std::size_t>> make_batches(std::size_t n, std::size_t batch_size, Rng& rng,
                                                   bool drop_singleton_tail) {
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), 0);
  for (std::size_t i = n; i-- > 1;) std::swap(order[i], order[rng.below(i + 1)]);
  std::vector<std::vector<std::size_t>> batches;
  for (std::size_t b = 0; b < n; b += batch_size)
    batches.emplace_back(order.begin() + static_cast<std::ptrdiff_t>(b),
                         order.begin() + static_cast<std::ptrdiff_t>(std::min(n, b + batch_size)));
  if (drop_singleton_tail && batches.size() > 1 && batches.back().size() < 2) batches.pop_back();
  return batches;
}

void check_common(const Vocab& vocab, const DatasetSplit& data, const ModelConfig& model_cfg) {
  model_cfg.validate();
  if (static_cast<std::size_t>(model_cfg.vocab_size) != vocab.size())
    throw ConfigError("model.vocab_size (" + std::to_string(model_cfg.vocab_size) +
                          ") does not match the vocabulary size (" + std::to_string(vocab.size()) + ")",
                      "model.vocab_size");
  if (data.train.empty()) throw ArgumentError("train: empty training set");
  if (data.val.empty()) throw ArgumentError("train: empty validation set");
}

struct EpochAccumulator {
  double l_qg = 0, l_cl = 0, l_ar = 0, total = 0;
  std::size_t steps = 0;

  EpochMetrics finish(int epoch, double val) const {
    const double n = static_cast<double>(std::max<std::size_t>(steps, 1));
    return {epoch, l_qg / n, l_cl / n, l_ar / n, total / n, val};
  }
};

// Shared epoch loop: `step` runs one batch (forward + backward) and returns
// its loss components; the loop owns shuffling, the optimizer and selection.
template <typename StepFn>
TrainResult run_epochs(Seq2Seq& model, const Vocab& vocab, Task task, const DatasetSplit& data,
                       const TrainConfig& cfg, bool drop_singleton_tail, const EpochCallback& on_epoch,
                       StepFn&& step) {
  Adam adam(model.parameters(), cfg.learning_rate);
  Rng shuffle = Rng::stream(cfg.seed, "shuffle");
  TrainResult result;
  bool have_best = false;
  for (int epoch = 1; epoch <= cfg.epochs; ++epoch) {
    EpochAccumulator acc;
    for (const auto& batch : make_batches(data.train.size(), static_cast<std::size_t>(cfg.batch_size), shuffle,
                                          drop_singleton_tail)) {
      Tape::active().clear();
      model.zero_grad();
      const QgStepLosses losses = step(batch);
      backward(losses.total);
      adam.step();
      acc.l_qg += losses.l_qg.item();
      acc.l_cl += losses.l_cl.defined() ? losses.l_cl.item() : 0.0;
      acc.l_ar += losses.l_ar.defined() ? losses.l_ar.item() : 0.0;
      acc.total += losses.total.item();
      ++acc.steps;
    }
    const double val = validation_rouge_l(model, vocab, task, data.val);
    const EpochMetrics m = acc.finish(epoch, val);
    result.history.push_back(m);
    Checkpoint ckpt = Checkpoint::capture(model, task, cfg, vocab, epoch, val);
    if (on_epoch) on_epoch(m, ckpt);
    if (!have_best || val > result.best.val_rouge_l) {
      result.best = std::move(ckpt);
      have_best = true;
    }
  }
  return result;
}

}  // namespace

double total_loss(double l_qg, double l_cl, double l_ar, const TrainConfig& cfg) {
  const TrainConfig eff = cfg.effective();
  double total = eff.lambda_qg * l_qg;
  if (eff.cl_strategy != ClStrategy::off) total += eff.lambda_cl * l_cl;
  if (eff.ar_enabled) total += eff.lambda_ar * l_ar;
  return total;
}

QgStepLosses qg_step_losses(const Seq2Seq& model, std::span<const TokenSequence> answers_cls,
                            std::span<const TokenSequence> questions, std::span<const TokenSequence> questions_cls,
                            std::span<const TokenSequence> answers_for_qa, const TrainConfig& cfg,
                            const Seq2Seq* qa_model, Rng& dropout_rng, Rng& gumbel_rng) {
  ForwardContext ctx = ForwardContext::training(dropout_rng);
  QgStepLosses out;
  const EncoderOutput enc = model.encode(TokenBatch::from(answers_cls), ctx);
  const TeacherForcing tf = TeacherForcing::from(questions);
  const Tensor logits = model.decode_logits(enc, tf.input, ctx);
  out.l_qg = nll_loss(logits, tf.targets);
  out.total = scale(out.l_qg, cfg.lambda_qg);

  if (cfg.cl_strategy != ClStrategy::off) {
    const EmbeddingBatch views = make_positives(answers_cls, questions_cls, cfg.cl_strategy, model, ctx, cfg.tau_cl);
    out.l_cl = nt_xent_loss(views);
    out.total = add(out.total, scale(out.l_cl, cfg.lambda_cl));
  }

  if (cfg.ar_enabled) {
    if (qa_model == nullptr) throw ConfigError("ar_enabled requires a QA model", "qa_checkpoint");
    const RelaxedQuestion q = st_gumbel_softmax(logits, cfg.tau_gs, gumbel_rng);
    std::vector<bool> pad(tf.targets.size());
    for (std::size_t i = 0; i < pad.size(); ++i) pad[i] = tf.targets[i] == kPad;
    out.l_ar = reconstruction_loss(q.rows, pad, answers_for_qa, *qa_model);
    out.total = add(out.total, scale(out.l_ar, cfg.lambda_ar));
  }
  return out;
}

double validation_rouge_l(const Seq2Seq& model, const Vocab& vocab, Task task, std::span<const QAPair> pairs) {
  if (pairs.empty()) throw ArgumentError("validation_rouge_l: no pairs");
  std::vector<std::string> sources;
  for (const auto& p : pairs) sources.push_back(task == Task::question_generation ? p.answer : p.question);
  const auto outputs = generate_texts(model, vocab, task, sources);
  double total = 0.0;
  for (std::size_t i = 0; i < pairs.size(); ++i) {
    const std::string& ref = task == Task::question_generation ? pairs[i].question : pairs[i].answer;
    total += rouge_l(outputs[i], ref).f1;
  }
  return total / static_cast<double>(pairs.size());
}

TrainResult train_qg(const Vocab& vocab, const DatasetSplit& data, const ModelConfig& model_cfg,
                     const TrainConfig& cfg, QaReference qa, const EpochCallback& on_epoch) {
  const TrainConfig eff = cfg.effective();
  eff.validate();
  check_common(vocab, data, model_cfg);
  if (eff.cl_strategy == ClStrategy::dropout && model_cfg.dropout_rate == 0.0)
    throw ConfigError("cl_s needs dropout_rate > 0", "model.dropout_rate");
  if (eff.ar_enabled) {
    if (qa.model == nullptr) throw ConfigError("ar_enabled requires a QA checkpoint", "qa_checkpoint");
    qa.model->set_trainable(false);
    check_reconstruction_compatible(vocab, qa.vocab ? *qa.vocab : vocab, *qa.model);
  }

  Seq2Seq model(model_cfg, eff.seed);
  std::vector<TokenSequence> answers_cls, questions, questions_cls, answers_for_qa;
  for (const auto& p : data.train) {
    answers_cls.push_back(encode_source(p.answer, vocab, model_cfg, Task::question_generation));
    questions.push_back(encode_target(p.question, vocab, model_cfg));
    if (eff.cl_strategy == ClStrategy::ground_truth)
      questions_cls.push_back(
          encode(p.question, vocab, static_cast<std::size_t>(model_cfg.max_src_len), EncodeMode::cls_prefixed));
    if (eff.ar_enabled) answers_for_qa.push_back(encode_target(p.answer, vocab, qa.model->config()));
  }

  Rng dropout_rng = Rng::stream(eff.seed, "dropout");
  Rng gumbel_rng = Rng::stream(eff.seed, "gumbel");
  const bool cl_active = eff.cl_strategy != ClStrategy::off;
  return run_epochs(model, vocab, Task::question_generation, data, eff, cl_active, on_epoch,
                    [&](std::span<const std::size_t> batch) {
                      const auto a = gather(answers_cls, batch);
                      const auto q = gather(questions, batch);
                      const auto qc = cl_active && eff.cl_strategy == ClStrategy::ground_truth
                                          ? gather(questions_cls, batch)
                                          : std::vector<TokenSequence>{};
                      const auto aq = eff.ar_enabled ? gather(answers_for_qa, batch) : std::vector<TokenSequence>{};
                      return qg_step_losses(model, a, q, qc, aq, eff, qa.model, dropout_rng, gumbel_rng);
                    });
}

TrainResult train_qa(const Vocab& vocab, const DatasetSplit& data, const ModelConfig& model_cfg,
                     const TrainConfig& cfg, const EpochCallback& on_epoch) {
  const TrainConfig eff = cfg.baseline();
  eff.validate();
  check_common(vocab, data, model_cfg);
  Seq2Seq model(model_cfg, eff.seed);
  std::vector<TokenSequence> questions, answers;
  for (const auto& p : data.train) {
    questions.push_back(encode_source(p.question, vocab, model_cfg, Task::question_answering));
    answers.push_back(encode_target(p.answer, vocab, model_cfg));
  }
  Rng dropout_rng = Rng::stream(eff.seed, "dropout");
  return run_epochs(model, vocab, Task::question_answering, data, eff, false, on_epoch,
                    [&](std::span<const std::size_t> batch) {
                      ForwardContext ctx = ForwardContext::training(dropout_rng);
                      const auto src = gather(questions, batch);
                      const auto tgt = gather(answers, batch);
                      const EncoderOutput enc = model.encode(TokenBatch::from(src), ctx);
                      const TeacherForcing tf = TeacherForcing::from(tgt);
                      QgStepLosses out;
                      out.l_qg = nll_loss(model.decode_logits(enc, tf.input, ctx), tf.targets);
                      out.total = out.l_qg;
                      return out;
                    });
}

TrainResult train_qa(const Vocab& vocab, std::span<const QAPair> pairs, const ModelConfig& model_cfg,
                     const TrainConfig& cfg, const EpochCallback& on_epoch) {
  if (pairs.empty()) throw ArgumentError("train_qa: empty pair list");
  DatasetSplit data;
  data.train.assign(pairs.begin(), pairs.end());
  data.val = data.train;
  return train_qa(vocab, data, model_cfg, cfg, on_epoch);
}

}  // namespace cbqg
