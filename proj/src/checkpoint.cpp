#include "cbqg/checkpoint.hpp"

#include <bit>
#include <cstring>
#include <fstream>
#include <sstream>

#include <nlohmann/json.hpp>

#include "cbqg/errors.hpp"

namespace cbqg {

namespace {

constexpr std::string_view kMagic = "CBQGCKPT";

template <typename T>
void put_le(std::string& out, T v) {
  static_assert(std::is_trivially_copyable_v<T>);
  unsigned char bytes[sizeof(T)];
  std::memcpy(bytes, &v, sizeof(T));
  if constexpr (std::endian::native == std::endian::big) std::reverse(std::begin(bytes), std::end(bytes));
  out.append(reinterpret_cast<const char*>(bytes), sizeof(T));
}

template <typename T>
T get_le(std::string_view bytes, std::size_t& pos) {
  if (bytes.size() - pos < sizeof(T)) throw ConfigError("checkpoint: truncated file", "checkpoint");
  unsigned char raw[sizeof(T)];
  std::memcpy(raw, bytes.data() + pos, sizeof(T));
  if constexpr (std::endian::native == std::endian::big) std::reverse(std::begin(raw), std::end(raw));
  pos += sizeof(T);
  T v;
  std::memcpy(&v, raw, sizeof(T));
  return v;
}

}  // namespace

Checkpoint Checkpoint::capture(const Seq2Seq& model, Task task, const TrainConfig& train, const Vocab& vocab,
                               int epoch, double val_rouge_l) {
  Checkpoint c;
  c.task = task;
  c.model = model.config();
  c.train = train;
  c.vocab = vocab;
  c.epoch = epoch;
  c.val_rouge_l = val_rouge_l;
  for (const auto& p : model.parameters()) {
    const auto v = p.tensor.values();
    c.params.push_back({p.name, p.tensor.shape(), std::vector<double>(v.begin(), v.end())});
  }
  return c;
}

void Checkpoint::load_into(Seq2Seq& model) const {
  if (!(model.config() == this->model))
    throw ConfigError("checkpoint: model config does not match the target model", "checkpoint");
  auto& dst = model.parameters();
  if (dst.size() != params.size())
    throw ConfigError("checkpoint: parameter count does not match the model config", "checkpoint");
  for (std::size_t i = 0; i < dst.size(); ++i) {
    if (dst[i].name != params[i].name || dst[i].tensor.shape() != params[i].shape)
      throw ConfigError("checkpoint: parameter '" + params[i].name + "' " + shape_str(params[i].shape) +
                            " does not match model parameter '" + dst[i].name + "' " +
                            shape_str(dst[i].tensor.shape()),
                        "checkpoint");
  }
  for (std::size_t i = 0; i < dst.size(); ++i) {
    auto v = dst[i].tensor.mutable_values();
    std::copy(params[i].values.begin(), params[i].values.end(), v.begin());
  }
}

Seq2Seq Checkpoint::instantiate() const {
  Seq2Seq m(model, 0);
  load_into(m);
  return m;
}

std::string serialize(const Checkpoint& ckpt) {
  nlohmann::ordered_json header;
  header["format_version"] = kCheckpointVersion;
  header["task"] = std::string(to_string(ckpt.task));
  header["model_config"] = to_json(ckpt.model);
  header["train_config"] = to_json(ckpt.train);
  header["epoch"] = ckpt.epoch;
  header["val_rouge_l"] = ckpt.val_rouge_l;
  header["vocab"] = ckpt.vocab.tokens();
  auto params = nlohmann::ordered_json::array();
  for (const auto& p : ckpt.params) {
    nlohmann::ordered_json e;
    e["name"] = p.name;
    e["shape"] = p.shape;
    params.push_back(std::move(e));
  }
  header["params"] = std::move(params);
  const std::string text = header.dump();

  std::string out(kMagic);
  put_le<std::uint32_t>(out, kCheckpointVersion);
  put_le<std::uint64_t>(out, text.size());
  out += text;
  for (const auto& p : ckpt.params)
    for (double v : p.values) put_le<double>(out, v);
  return out;
}

Checkpoint deserialize(std::string_view bytes) {
  if (bytes.size() < kMagic.size() || bytes.substr(0, kMagic.size()) != kMagic)
    throw ConfigError("checkpoint: bad magic", "checkpoint");
  std::size_t pos = kMagic.size();
  const auto version = get_le<std::uint32_t>(bytes, pos);
  if (version != kCheckpointVersion)
    throw ConfigError("checkpoint: unsupported format version " + std::to_string(version), "checkpoint");
  const auto header_len = get_le<std::uint64_t>(bytes, pos);
  if (bytes.size() - pos < header_len) throw ConfigError("checkpoint: truncated header", "checkpoint");

  Checkpoint c;
  std::vector<std::pair<std::string, Shape>> layout;
  try {
    const auto header = nlohmann::json::parse(bytes.substr(pos, header_len));
    c.task = task_from_string(header.at("task").get<std::string>());
    c.model = model_config_from_json(header.at("model_config"), "model_config");
    c.train = train_config_from_json(header.at("train_config"), "train_config");
    c.epoch = header.at("epoch").get<int>();
    c.val_rouge_l = header.at("val_rouge_l").get<double>();
    c.vocab = Vocab::from_tokens(header.at("vocab").get<std::vector<std::string>>());
    for (const auto& e : header.at("params")) layout.emplace_back(e.at("name").get<std::string>(), e.at("shape").get<Shape>());
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError(std::string("checkpoint: malformed header: ") + e.what(), "checkpoint");
  }
  pos += header_len;
  c.model.validate();
  if (static_cast<std::size_t>(c.model.vocab_size) != c.vocab.size())
    throw ConfigError("checkpoint: model vocab_size differs from the stored vocabulary", "checkpoint");

  // The buffer list must be exactly what the stored config produces.
  const Seq2Seq reference(c.model, 0);
  const auto& expected = reference.parameters();
  if (expected.size() != layout.size())
    throw ConfigError("checkpoint: parameter list does not match model config", "checkpoint");
  for (std::size_t i = 0; i < layout.size(); ++i) {
    if (expected[i].name != layout[i].first || expected[i].tensor.shape() != layout[i].second)
      throw ConfigError("checkpoint: parameter '" + layout[i].first + "' does not match model config", "checkpoint");
  }
  for (auto& [name, shape] : layout) {
    ParamBuffer p{name, shape, {}};
    const std::size_t n = numel_of(shape);
    if ((bytes.size() - pos) / sizeof(double) < n)
      throw ConfigError("checkpoint: truncated buffer for '" + name + "'", "checkpoint");
    p.values.resize(n);
    for (auto& v : p.values) v = get_le<double>(bytes, pos);
    c.params.push_back(std::move(p));
  }
  if (pos != bytes.size()) throw ConfigError("checkpoint: trailing bytes after last buffer", "checkpoint");
  return c;
}

void save_checkpoint(const std::filesystem::path& path, const Checkpoint& ckpt) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot write " + path.string());
  const std::string bytes = serialize(ckpt);
  out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
  if (!out) throw IoError("failed writing " + path.string());
}

Checkpoint load_checkpoint(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open " + path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return deserialize(ss.str());
}

}  // namespace cbqg
