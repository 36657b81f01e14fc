#include <gtest/gtest.h>

#include <nlohmann/json.hpp>

#include <cstring>
#include <fstream>

#include "cbqg/checkpoint.hpp"
#include "cbqg/errors.hpp"
#include "cbqg/generation.hpp"
#include "support/toy.hpp"

using namespace cbqg;

namespace {

struct Fixture {
  Vocab vocab = cbqg::testing::toy_vocab();
  ModelConfig mc = cbqg::testing::tiny_config(static_cast<int>(vocab.size()), 0.1);
  Seq2Seq model{mc, 13};
  Checkpoint ckpt = Checkpoint::capture(model, Task::question_generation, TrainConfig{}, vocab, 3, 0.25);
};

std::string with_header(const std::string& bytes, const std::function<void(nlohmann::json&)>& edit) {
  std::uint64_t len = 0;
  std::memcpy(&len, bytes.data() + 12, 8);
  auto header = nlohmann::json::parse(bytes.substr(20, len));
  edit(header);
  const std::string h = header.dump();
  std::string out = bytes.substr(0, 12);
  const std::uint64_t new_len = h.size();
  out.append(reinterpret_cast<const char*>(&new_len), 8);
  return out + h + bytes.substr(20 + len);
}

}  // namespace

TEST(Checkpoint, RoundTripReproducesGenerationsBitwise) {
  Fixture f;
  const std::string bytes = serialize(f.ckpt);
  const Checkpoint back = deserialize(bytes);
  EXPECT_EQ(serialize(back), bytes);
  EXPECT_EQ(back.epoch, 3);
  EXPECT_EQ(back.val_rouge_l, 0.25);
  EXPECT_EQ(back.vocab, f.vocab);
  EXPECT_EQ(back.model, f.mc);
  EXPECT_EQ(back.train, TrainConfig{});
  const Seq2Seq restored = back.instantiate();
  std::vector<std::string> answers{"a1 a2 a3", "a4", "a5 a6 a7 a8 a9 a10"};
  EXPECT_EQ(generate_texts(restored, f.vocab, Task::question_generation, answers),
            generate_texts(f.model, f.vocab, Task::question_generation, answers));
  for (std::size_t i = 0; i < restored.parameters().size(); ++i) {
    const auto a = restored.parameters()[i].tensor.values(), b = f.model.parameters()[i].tensor.values();
    EXPECT_TRUE(std::equal(a.begin(), a.end(), b.begin(), b.end()));
  }
}

TEST(Checkpoint, FileRoundTrip) {
  Fixture f;
  const auto path = std::filesystem::temp_directory_path() / "cbqg_test_roundtrip.ckpt";
  save_checkpoint(path, f.ckpt);
  EXPECT_EQ(serialize(load_checkpoint(path)), serialize(f.ckpt));
  std::filesystem::remove(path);
  EXPECT_THROW(load_checkpoint(path), IoError);
}

TEST(Checkpoint, RejectsTruncationAndTrailingBytes) {
  Fixture f;
  const std::string bytes = serialize(f.ckpt);
  for (std::size_t cut : {std::size_t{0}, std::size_t{7}, std::size_t{15}, std::size_t{40}, bytes.size() - 1})
    EXPECT_THROW(deserialize(bytes.substr(0, cut)), ConfigError) << cut;
  EXPECT_THROW(deserialize(bytes + "x"), ConfigError);
}

TEST(Checkpoint, RejectsBadMagicAndVersion) {
  Fixture f;
  std::string bytes = serialize(f.ckpt);
  std::string magic = bytes;
  magic[0] = 'X';
  EXPECT_THROW(deserialize(magic), ConfigError);
  std::string version = bytes;
  version[8] = 2;
  EXPECT_THROW(deserialize(version), ConfigError);
}

TEST(Checkpoint, RejectsConfigThatDisagreesWithBuffers) {
  Fixture f;
  const std::string bytes = serialize(f.ckpt);
  EXPECT_THROW(deserialize(with_header(bytes, [](auto& h) { h["model_config"]["d_model"] = 32; })), ConfigError);
  EXPECT_THROW(deserialize(with_header(bytes, [](auto& h) { h["model_config"]["num_layers"] = 2; })), ConfigError);
  EXPECT_THROW(deserialize(with_header(bytes, [](auto& h) { h["params"][0]["name"] = "other"; })), ConfigError);
  EXPECT_THROW(deserialize(with_header(bytes, [](auto& h) { h["vocab"].erase(h["vocab"].size() - 1); })),
               ConfigError);
  EXPECT_THROW(deserialize(with_header(bytes, [](auto& h) { h["model_config"].erase("ffn_dim"); })), ConfigError);
}

TEST(Checkpoint, LoadIntoRejectsDifferentArchitecture) {
  Fixture f;
  ModelConfig other = f.mc;
  other.ffn_dim = 8;
  Seq2Seq m(other, 1);
  EXPECT_THROW(f.ckpt.load_into(m), ConfigError);
}
