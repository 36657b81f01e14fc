#include <gtest/gtest.h>

#include <cmath>

#include "cbqg/contrastive.hpp"
#include "cbqg/errors.hpp"
#include "support/gradcheck.hpp"
#include "support/oracles.hpp"
#include "support/toy.hpp"

using namespace cbqg;
using cbqg::testing::random_tensor;

namespace {

class ContrastiveTest : public ::testing::Test {
 protected:
  void SetUp() override { Tape::active().clear(); }
  void TearDown() override { Tape::active().clear(); }
};

std::vector<std::vector<double>> rows_of(const Tensor& t) {
  std::vector<std::vector<double>> out(t.dim(0));
  const std::size_t d = t.dim(1);
  for (std::size_t i = 0; i < out.size(); ++i) out[i].assign(t.values().begin() + i * d, t.values().begin() + (i + 1) * d);
  return out;
}

double loss_of(const Tensor& a, const Tensor& p, double tau = 0.3) { return nt_xent_loss({a, p, tau}).item(); }

}  // namespace

TEST_F(ContrastiveTest, SinglePairIsZero) {
  Rng rng(1);
  EXPECT_NEAR(loss_of(random_tensor({1, 5}, rng), random_tensor({1, 5}, rng)), 0.0, 1e-15);
}

TEST_F(ContrastiveTest, EqualSimilaritiesGiveLogTwoNMinusOne) {
  for (std::size_t n : {2u, 4u, 8u}) {
    const Tensor same = Tensor::full({n, 3}, 0.7);
    EXPECT_NEAR(loss_of(same, same), std::log(2.0 * n - 1.0), 1e-9) << n;
  }
  EXPECT_NEAR(loss_of(Tensor::full({4, 6}, -1.3), Tensor::full({4, 6}, -1.3), 0.5), std::log(7.0), 1e-9);
}

TEST_F(ContrastiveTest, MatchesBruteForceOracle) {
  Rng rng(2);
  for (int trial = 0; trial < 50; ++trial) {
    const std::size_t n = 1 + rng.below(4), d = 2 + rng.below(7);
    const double tau = rng.uniform(0.1, 2.0);
    const Tensor a = random_tensor({n, d}, rng, -2, 2, false), p = random_tensor({n, d}, rng, -2, 2, false);
    EXPECT_NEAR(loss_of(a, p, tau), cbqg::testing::oracle_nt_xent(rows_of(a), rows_of(p), tau), 1e-9);
  }
}

TEST_F(ContrastiveTest, NonNegative) {
  Rng rng(3);
  for (int trial = 0; trial < 30; ++trial) {
    const std::size_t n = 1 + rng.below(6);
    EXPECT_GE(loss_of(random_tensor({n, 4}, rng), random_tensor({n, 4}, rng)), 0.0);
  }
}

TEST_F(ContrastiveTest, PermutationInvariant) {
  Rng rng(4);
  const Tensor a = random_tensor({4, 5}, rng, -2, 2, false), p = random_tensor({4, 5}, rng, -2, 2, false);
  const std::vector<std::size_t> perm{2, 0, 3, 1};
  auto permuted = [&](const Tensor& t) {
    std::vector<Tensor> rows;
    for (std::size_t i : perm) rows.push_back(slice(t, 0, i, i + 1));
    return concat(rows, 0);
  };
  EXPECT_NEAR(loss_of(a, p), loss_of(permuted(a), permuted(p)), 1e-12);
}

TEST_F(ContrastiveTest, ScaleInvariant) {
  Rng rng(5);
  const Tensor a = random_tensor({3, 4}, rng, -2, 2, false), p = random_tensor({3, 4}, rng, -2, 2, false);
  EXPECT_NEAR(loss_of(a, p), loss_of(scale(a, 3.5), scale(p, 3.5)), 1e-12);
  EXPECT_NEAR(loss_of(a, p), loss_of(scale(a, 0.01), p), 1e-12);
}

TEST_F(ContrastiveTest, DecreasesAsPositiveRotatesTowardAnchor) {
  // anchor 0 = e0, positive 0 = cos(t) e0 + sin(t) e1; every other view lies
  // in span(e2..e5), so only sim(anchor 0, positive 0) moves with t.
  const std::size_t n = 3, d = 6;
  double previous = -1;
  for (int step = 0; step <= 20; ++step) {
    const double t = M_PI / 2 * (1.0 - step / 20.0);
    std::vector<double> a(n * d, 0.0), p(n * d, 0.0);
    a[0] = 1;
    p[0] = std::cos(t);
    p[1] = std::sin(t);
    a[1 * d + 2] = 1;
    p[1 * d + 3] = 1;
    a[2 * d + 4] = 1;
    p[2 * d + 5] = 1;
    const double l = loss_of(Tensor::from({n, d}, a), Tensor::from({n, d}, p));
    if (step > 0) EXPECT_LT(l, previous) << step;
    previous = l;
  }
}

TEST_F(ContrastiveTest, SelfPositivesBoundedByEqualSimilarityCase) {
  Rng rng(6);
  for (std::size_t n : {2u, 3u, 5u}) {
    const Tensor a = random_tensor({n, 4}, rng, -2, 2, false);
    const double l = loss_of(a, a);
    EXPECT_GE(l, 0.0);
    EXPECT_LE(l, std::log(2.0 * n - 1.0) + 1e-12);
  }
}

TEST_F(ContrastiveTest, ZeroNormIsDomainError) {
  Rng rng(7);
  Tensor a = random_tensor({2, 3}, rng, -2, 2, false);
  EXPECT_THROW(loss_of(a, Tensor::zeros({2, 3})), DomainError);
  EXPECT_THROW(loss_of(a, random_tensor({3, 3}, rng)), ArgumentError);
  EXPECT_THROW(nt_xent_loss({a, a, 0.0}), ArgumentError);
}

TEST_F(ContrastiveTest, GradientMatchesFiniteDifferences) {
  Rng rng(8);
  for (int trial = 0; trial < 10; ++trial) {
    const std::size_t n = 1 + rng.below(4), d = 2 + rng.below(7);
    Tensor a = random_tensor({n, d}, rng), p = random_tensor({n, d}, rng);
    const auto r = cbqg::testing::check_gradients([&] { return nt_xent_loss({a, p, 0.3}); }, {a, p});
    EXPECT_LT(r.max_rel_error, 1e-4);
  }
}

TEST_F(ContrastiveTest, ClsEmbedding) {
  const Vocab vocab = cbqg::testing::toy_vocab();
  const Seq2Seq m(cbqg::testing::tiny_config(static_cast<int>(vocab.size()), 0.2), 1);
  const TokenSequence s = encode("a1 a2 a3", vocab, 12, EncodeMode::cls_prefixed);
  ForwardContext ev;
  const Tensor e1 = cls_embedding(s, m, ev), e2 = cls_embedding(s, m, ev);
  EXPECT_EQ(e1.shape(), (Shape{16}));
  EXPECT_EQ(std::vector<double>(e1.values().begin(), e1.values().end()),
            std::vector<double>(e2.values().begin(), e2.values().end()));
  const Tensor z = m.encode(s, ev).z;
  for (std::size_t k = 0; k < 16; ++k) EXPECT_EQ(e1.at(k), z.at(k));

  Rng rng(3);
  ForwardContext tr = ForwardContext::training(rng);
  const Tensor d1 = cls_embedding(s, m, tr), d2 = cls_embedding(s, m, tr);
  EXPECT_NE(std::vector<double>(d1.values().begin(), d1.values().end()),
            std::vector<double>(d2.values().begin(), d2.values().end()));

  EXPECT_THROW(cls_embedding(encode("a1", vocab, 12, EncodeMode::answer), m, ev), ArgumentError);
}

TEST_F(ContrastiveTest, MakePositivesStrategies) {
  const Vocab vocab = cbqg::testing::toy_vocab();
  const Seq2Seq m(cbqg::testing::tiny_config(static_cast<int>(vocab.size()), 0.2), 1);
  const std::vector<QAPair> pairs{{"b1 b2 ?", "a2 a1"}, {"b3 ?", "a3"}};
  ForwardContext ev;
  const EmbeddingBatch t = make_positives(pairs, vocab, ClStrategy::ground_truth, m, ev, 0.3);
  EXPECT_EQ(t.anchors.shape(), (Shape{2, 16}));
  EXPECT_EQ(t.positives.shape(), (Shape{2, 16}));
  for (std::size_t i = 0; i < 2; ++i) {
    const auto a = rows_of(t.anchors)[i], p = rows_of(t.positives)[i];
    EXPECT_NE(a, p);
    EXPECT_EQ(a, rows_of(cls_embeddings(TokenBatch::from(std::vector<TokenSequence>{
                                            encode(pairs[i].answer, vocab, 24, EncodeMode::cls_prefixed)}),
                                        m, ev))[0]);
  }
  EXPECT_THROW(make_positives(pairs, vocab, ClStrategy::dropout, m, ev, 0.3), ConfigError);
  EXPECT_THROW(make_positives(pairs, vocab, ClStrategy::off, m, ev, 0.3), ConfigError);

  Rng rng(1);
  ForwardContext tr = ForwardContext::training(rng);
  const EmbeddingBatch s = make_positives(pairs, vocab, ClStrategy::dropout, m, tr, 0.3);
  EXPECT_NE(rows_of(s.anchors), rows_of(s.positives));

  const Seq2Seq no_dropout(cbqg::testing::tiny_config(static_cast<int>(vocab.size()), 0.0), 1);
  EXPECT_THROW(make_positives(pairs, vocab, ClStrategy::dropout, no_dropout, tr, 0.3), ConfigError);
}
