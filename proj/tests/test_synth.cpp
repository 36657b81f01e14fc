#include <gtest/gtest.h>

#include "cbqg/errors.hpp"
#include "cbqg/synth.hpp"
#include "cbqg/trainer.hpp"
#include "support/toy.hpp"

using namespace cbqg;

namespace {

const std::filesystem::path kData = CBQG_TEST_DATA_DIR;

std::vector<std::string> strings(std::initializer_list<const char*> xs) { return {xs.begin(), xs.end()}; }

// A generator that emits `word` at every step (never [EOS]): the final
// decoder norm is collapsed onto a direction only that word's embedding has.
Checkpoint constant_generator(const Vocab& vocab, ModelConfig mc, const std::string& word) {
  Seq2Seq m(mc, 1);
  const auto d = static_cast<std::size_t>(mc.d_model);
  for (auto& p : m.parameters()) {
    auto v = p.tensor.mutable_values();
    if (p.name == "dec.ln_f.gain") std::fill(v.begin(), v.end(), 0.0);
    if (p.name == "dec.ln_f.bias") {
      std::fill(v.begin(), v.end(), 0.0);
      v[0] = 1.0;
    }
    if (p.name == "embed.weight") {
      for (std::size_t r = 0; r < vocab.size(); ++r) v[r * d] = 0.0;
      v[static_cast<std::size_t>(vocab.id(word)) * d] = 1.0;
    }
  }
  return Checkpoint::capture(m, Task::question_generation, TrainConfig{}, vocab, 1, 0.0);
}

Vocab prose_vocab() {
  const auto summaries = read_summary_jsonl(kData / "summaries_fixture.jsonl");
  std::vector<std::string> corpus{"what"};
  for (const auto& s : summaries) corpus.push_back(s.summary);
  return Vocab::build(corpus, 200);
}

}  // namespace

TEST(SplitSentences, Examples) {
  EXPECT_EQ(split_sentences("A b. C d."), strings({"A b.", "C d."}));
  EXPECT_EQ(split_sentences("No terminator"), strings({"No terminator"}));
  EXPECT_EQ(split_sentences("Dr. Smith left. He returned."), strings({"Dr.", "Smith left.", "He returned."}));
  EXPECT_EQ(split_sentences("Really?!  Yes!\nOk... fine"), strings({"Really?!", "Yes!", "Ok...", "fine"}));
  EXPECT_EQ(split_sentences("version 2.5 is out. Great"), strings({"version 2.5 is out.", "Great"}));
  EXPECT_TRUE(split_sentences("   ").empty());
}

TEST(Synth, TwoByThreeFixtureGivesSixVerbatimPairs) {
  const Vocab vocab = prose_vocab();
  const auto summaries = read_summary_jsonl(kData / "summaries_fixture.jsonl");
  ASSERT_EQ(summaries.size(), 2u);
  const QuestionGenerator qg(constant_generator(vocab, cbqg::testing::tiny_config(static_cast<int>(vocab.size())), "what"));
  SynthReport report;
  const auto pairs = build_synthetic_corpus(summaries, qg, &report);
  ASSERT_EQ(pairs.size(), 6u);
  std::vector<std::string> expected;
  for (const auto& s : summaries)
    for (const auto& sentence : split_sentences(s.summary)) expected.push_back(sentence);
  for (std::size_t i = 0; i < 6; ++i) {
    EXPECT_EQ(pairs[i].answer, expected[i]);
    EXPECT_FALSE(pairs[i].question.empty());
    EXPECT_NE(summaries[i / 3].summary.find(pairs[i].answer), std::string::npos);
  }
  EXPECT_EQ(report.input_summaries, 2u);
  EXPECT_EQ(report.sentences_extracted, 6u);
  EXPECT_EQ(report.sentences_skipped, 0u);
  EXPECT_EQ(report.pairs_emitted, 6u);
  EXPECT_EQ(report.to_json().dump(),
            R"({"input_summaries":2,"sentences_extracted":6,"sentences_skipped":0,"empty_questions":0,"pairs_emitted":6})");
}

TEST(Synth, ShortSentencesSkipped) {
  const Vocab vocab = prose_vocab();
  const QuestionGenerator qg(constant_generator(vocab, cbqg::testing::tiny_config(static_cast<int>(vocab.size())), "what"));
  // Hand count: "Yes." (1 token) and "No way!" (2) and "Bees fly far." (3) are skipped.
  const std::vector<SummaryRecord> s{{"t", "Yes. Honey bees live in large colonies. No way!"},
                                     {"u", "Bees fly far. Worker bees collect nectar and pollen."}};
  SynthReport report;
  const auto pairs = build_synthetic_corpus(s, qg, &report);
  EXPECT_EQ(report.sentences_extracted, 5u);
  EXPECT_EQ(report.sentences_skipped, 3u);
  ASSERT_EQ(pairs.size(), 2u);
  EXPECT_EQ(pairs[0].answer, "Honey bees live in large colonies.");
  EXPECT_EQ(pairs[1].answer, "Worker bees collect nectar and pollen.");
}

TEST(Synth, DeterministicAndBounded) {
  const Vocab vocab = prose_vocab();
  ModelConfig mc = ModelConfig::question_generator(static_cast<int>(vocab.size()));
  mc.d_model = 8;
  mc.num_heads = 2;
  mc.ffn_dim = 8;
  mc.num_layers = 1;
  const QuestionGenerator qg(constant_generator(vocab, mc, "what"));
  const std::string q = generate_question("Honey bees live in large colonies.", qg);
  EXPECT_EQ(q, generate_question("Honey bees live in large colonies.", qg));
  EXPECT_EQ(whitespace_token_count(q), 127u);  // 128 ids including [BOS]
  EXPECT_THROW(generate_question("   ", qg), ArgumentError);

  const auto summaries = read_summary_jsonl(kData / "summaries_fixture.jsonl");
  const QuestionGenerator random(Checkpoint::capture(Seq2Seq(cbqg::testing::tiny_config(static_cast<int>(vocab.size())), 5),
                                                     Task::question_generation, TrainConfig{}, vocab, 1, 0.0));
  SynthReport r1, r2;
  const auto a = build_synthetic_corpus(summaries, random, &r1), b = build_synthetic_corpus(summaries, random, &r2);
  EXPECT_EQ(a, b);
  EXPECT_EQ(r1.to_json(), r2.to_json());
  EXPECT_EQ(r1.pairs_emitted + r1.empty_questions + r1.sentences_skipped, r1.sentences_extracted);
}

TEST(Synth, RejectsQaCheckpoint) {
  const Vocab vocab = prose_vocab();
  const Seq2Seq m(cbqg::testing::tiny_config(static_cast<int>(vocab.size())), 1);
  EXPECT_THROW(QuestionGenerator(Checkpoint::capture(m, Task::question_answering, TrainConfig{}, vocab, 1, 0.0)),
               ConfigError);
}

TEST(Synth, OverfitGeneratorEmitsMemorizedQuestions) {
  const Vocab vocab = cbqg::testing::toy_vocab();
  ModelConfig mc = cbqg::testing::tiny_config(static_cast<int>(vocab.size()));
  mc.d_model = 32;
  mc.ffn_dim = 64;
  const auto pairs = cbqg::testing::toy_pairs(8, 9);
  DatasetSplit data;
  data.train = pairs;
  data.val = pairs;
  TrainConfig cfg;
  cfg.learning_rate = 3e-3;
  cfg.epochs = 80;
  cfg.batch_size = 4;
  const TrainResult r = train_qg(vocab, data, mc, cfg.baseline());
  ASSERT_EQ(r.best.val_rouge_l, 1.0);
  const QuestionGenerator qg(r.best);
  for (const auto& p : pairs) EXPECT_EQ(generate_question(p.answer, qg), normalize_text(p.question));
}
