#include "cli.hpp"

#include <CLI11.hpp>
#include <openssl/evp.h>

#include <nlohmann/json.hpp>

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <optional>
#include <sstream>

#include "cbqg/checkpoint.hpp"
#include "cbqg/dataset.hpp"
#include "cbqg/errors.hpp"
#include "cbqg/generation.hpp"
#include "cbqg/rouge.hpp"
#include "cbqg/synth.hpp"
#include "cbqg/trainer.hpp"

namespace fs = std::filesystem;
using nlohmann::ordered_json;

namespace cbqg::cli {

namespace {

struct CommonArgs {
  std::optional<std::uint64_t> seed;
  std::string out;
};

struct PreprocessArgs : CommonArgs {
  std::string input;
};

struct TrainArgs : CommonArgs {
  std::string mode;
  std::string data;
  std::string config;
  std::string qa_checkpoint;
  std::optional<int> epochs;
  std::optional<int> batch_size;
  std::optional<double> learning_rate;
};

struct GenerateArgs : CommonArgs {
  std::string checkpoint;
  std::string input;
};

struct SynthArgs : CommonArgs {
  std::string checkpoint;
  std::string input;
};

struct EvaluateArgs : CommonArgs {
  std::string candidates;
  std::string references;
  std::string field = "question";
};

void write_text(const fs::path& path, const std::string& text) {
  std::ofstream f(path, std::ios::binary);
  if (!f) throw IoError("cannot write " + path.string());
  f << text;
}

void make_dir(const std::string& dir) {
  if (dir.empty()) throw ArgumentError("--out: directory required");
  std::error_code ec;
  fs::create_directories(dir, ec);
  if (ec) throw IoError("cannot create " + dir + ": " + ec.message());
}

ordered_json score_json(const RougeScore& s) {
  ordered_json j;
  j["precision"] = s.precision;
  j["recall"] = s.recall;
  j["f1"] = s.f1;
  return j;
}

nlohmann::json read_json_file(const std::string& path) {
  std::ifstream f(path, std::ios::binary);
  if (!f) throw IoError("cannot read config " + path);
  try {
    return nlohmann::json::parse(f);
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError("config " + path + ": " + e.what(), "config");
  }
}

// Reads "<field>" from every JSONL record; malformed lines are data errors.
std::vector<std::string> read_field_jsonl(const std::string& path, const std::string& field) {
  std::ifstream f(path, std::ios::binary);
  if (!f) throw IoError("cannot read " + path);
  std::vector<std::string> out;
  std::size_t line_no = 0;
  for (std::string line; std::getline(f, line);) {
    ++line_no;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    nlohmann::json j;
    try {
      j = nlohmann::json::parse(line);
    } catch (const nlohmann::json::exception& e) {
      throw DataError(path + ": line " + std::to_string(line_no) + ": " + e.what());
    }
    if (!j.is_object() || !j.contains(field) || !j[field].is_string())
      throw DataError(path + ": line " + std::to_string(line_no) + ": missing string field \"" + field + "\"");
    out.push_back(j[field].get<std::string>());
  }
  return out;
}

ordered_json input_digest(const std::string& path) {
  ordered_json j;
  j["path"] = path;
  j["sha256"] = sha256_file(path);
  return j;
}

// ---- preprocess ----------------------------------------------------------------

int cmd_preprocess(const PreprocessArgs& a, std::ostream& out, std::ostream& err) {
  const auto pairs = read_qa_jsonl(fs::path(a.input));
  FilterStats stats;
  const auto kept = filter_pairs(pairs, &stats);
  if (kept.empty()) throw DataError("no data after filtering");
  const std::uint64_t seed = a.seed.value_or(0);
  make_dir(a.out);
  write_qa_jsonl(fs::path(a.out) / "filtered.jsonl", kept);

  ordered_json j;
  j["input"] = stats.input;
  j["kept"] = stats.kept;
  j["dropped"] = {{"question_word", stats.dropped_question_word},
                  {"question_mark", stats.dropped_question_mark},
                  {"answer_length", stats.dropped_answer_length},
                  {"meaningless", stats.dropped_meaningless},
                  {"duplicate", stats.dropped_duplicate}};
  j["seed"] = seed;
  if (kept.size() < 10) {
    j["split"] = nullptr;
    write_text(fs::path(a.out) / "stats.json", j.dump(2) + "\n");
    err << "warning: " << kept.size() << " pairs after filtering; splitting needs at least 10, wrote "
        << "filtered.jsonl only\n";
    out << "kept " << stats.kept << " of " << stats.input << " pairs; not split\n";
    return kOk;
  }
  const DatasetSplit split = split_dataset(kept, seed);
  write_qa_jsonl(fs::path(a.out) / "train.jsonl", split.train);
  write_qa_jsonl(fs::path(a.out) / "val.jsonl", split.val);
  write_qa_jsonl(fs::path(a.out) / "test.jsonl", split.test);
  j["split"] = {{"train", split.train.size()}, {"val", split.val.size()}, {"test", split.test.size()}};
  write_text(fs::path(a.out) / "stats.json", j.dump(2) + "\n");
  out << "kept " << stats.kept << " of " << stats.input << " pairs; train/val/test = " << split.train.size()
      << "/" << split.val.size() << "/" << split.test.size() << "\n";
  return kOk;
}

// ---- train ----------------------------------------------------------------------

struct LoadedData {
  DatasetSplit split;
  ordered_json digests;
};

// A directory holds train.jsonl and val.jsonl; a single file is used for
// both training and validation.
LoadedData load_training_data(const std::string& data) {
  LoadedData d;
  if (fs::is_directory(data)) {
    const std::string train = (fs::path(data) / "train.jsonl").string(), val = (fs::path(data) / "val.jsonl").string();
    d.split.train = read_qa_jsonl(fs::path(train));
    d.split.val = read_qa_jsonl(fs::path(val));
    d.digests["train"] = input_digest(train);
    d.digests["val"] = input_digest(val);
  } else {
    d.split.train = read_qa_jsonl(fs::path(data));
    d.split.val = d.split.train;
    d.digests["train"] = input_digest(data);
  }
  if (d.split.train.empty()) throw DataError("no training pairs in " + data);
  if (d.split.val.empty()) throw DataError("no validation pairs in " + data);
  return d;
}

int cmd_train(const TrainArgs& a, std::ostream& out) {
  const nlohmann::json cfg_file = read_json_file(a.config);
  if (!cfg_file.is_object()) throw ConfigError("config: expected a JSON object", "config");
  ModelConfig mc = model_config_from_json(cfg_file.contains("model") ? cfg_file["model"] : nlohmann::json(), "model");
  TrainConfig tc = train_config_from_json(cfg_file.contains("train") ? cfg_file["train"] : nlohmann::json(), "train");
  if (a.seed) tc.seed = *a.seed;
  if (a.epochs) tc.epochs = *a.epochs;
  if (a.batch_size) tc.batch_size = *a.batch_size;
  if (a.learning_rate) tc.learning_rate = *a.learning_rate;

  const bool qa_mode = a.mode == "qa";
  if (a.mode == "qg-baseline" || qa_mode)
    tc = tc.baseline();
  else
    tc = tc.effective();
  tc.validate();
  if (mc.vocab_size < 6) throw ConfigError("model.vocab_size: must be at least 6", "model.vocab_size");

  LoadedData data = load_training_data(a.data);

  std::optional<Checkpoint> qa_ckpt;
  std::optional<Seq2Seq> qa_model;
  Vocab vocab;
  if (!qa_mode && tc.ar_enabled) {
    if (a.qa_checkpoint.empty())
      throw ConfigError("train.ar_enabled: answer reconstruction needs --qa-checkpoint", "qa_checkpoint");
    qa_ckpt = load_checkpoint(a.qa_checkpoint);
    if (qa_ckpt->task != Task::question_answering)
      throw ConfigError("--qa-checkpoint: checkpoint was trained for task '" + std::string(to_string(qa_ckpt->task)) +
                            "'",
                        "qa_checkpoint");
    qa_model.emplace(qa_ckpt->instantiate());
    vocab = qa_ckpt->vocab;
    data.digests["qa_checkpoint"] = input_digest(a.qa_checkpoint);
  } else {
    std::vector<std::string> corpus;
    for (const auto& p : data.split.train) {
      corpus.push_back(p.question);
      corpus.push_back(p.answer);
    }
    vocab = Vocab::build(corpus, static_cast<std::size_t>(mc.vocab_size));
  }
  mc.vocab_size = static_cast<int>(vocab.size());
  if (qa_mode) std::swap(mc.max_src_len, mc.max_tgt_len);
  mc.validate();

  make_dir(a.out);
  const fs::path run(a.out);
  ordered_json manifest;
  manifest["tool"] = "cbqg";
  manifest["tool_version"] = kToolVersion;
  manifest["command"] = "train";
  manifest["mode"] = a.mode;
  manifest["seed"] = tc.seed;
  manifest["config"] = {{"model", to_json(mc)}, {"train", to_json(tc)}};
  data.digests["config"] = input_digest(a.config);
  manifest["inputs"] = data.digests;
  write_text(run / "manifest.json", manifest.dump(2) + "\n");

  std::ofstream metrics(run / "metrics.jsonl", std::ios::binary);
  if (!metrics) throw IoError("cannot write " + (run / "metrics.jsonl").string());
  out << "epoch        l_qg        l_cl        l_ar       total  val_rouge_l\n";
  auto on_epoch = [&](const EpochMetrics& m, const Checkpoint& c) {
    ordered_json j;
    j["epoch"] = m.epoch;
    j["l_qg"] = m.l_qg;
    j["l_cl"] = m.l_cl;
    j["l_ar"] = m.l_ar;
    j["total"] = m.total;
    j["val_rouge_l"] = m.val_rouge_l;
    metrics << j.dump() << '\n';
    metrics.flush();
    save_checkpoint(run / ("epoch-" + std::to_string(m.epoch) + ".ckpt"), c);
    char line[128];
    std::snprintf(line, sizeof line, "%5d %11.5f %11.5f %11.5f %11.5f %12.5f\n", m.epoch, m.l_qg, m.l_cl, m.l_ar,
                  m.total, m.val_rouge_l);
    out << line << std::flush;
  };

  const TrainResult result = qa_mode ? train_qa(vocab, data.split, mc, tc, on_epoch)
                                     : train_qg(vocab, data.split, mc, tc,
                                                {qa_model ? &*qa_model : nullptr, qa_ckpt ? &qa_ckpt->vocab : nullptr},
                                                on_epoch);
  save_checkpoint(run / "best.ckpt", result.best);
  out << "best epoch " << result.best.epoch << " (val ROUGE-L " << result.best.val_rouge_l << ")\n";
  return kOk;
}

// ---- generate / synth / evaluate --------------------------------------------------------

int cmd_generate(const GenerateArgs& a, std::ostream& out, std::ostream& err) {
  const Checkpoint ckpt = load_checkpoint(a.checkpoint);
  const bool qg = ckpt.task == Task::question_generation;
  const std::string in_field = qg ? "answer" : "question", out_field = qg ? "question" : "answer";
  const auto all = read_field_jsonl(a.input, in_field);
  std::vector<std::string> sources;
  for (std::size_t i = 0; i < all.size(); ++i) {
    if (all[i].find_first_not_of(" \t\r\n") == std::string::npos) {
      err << "warning: record " << i + 1 << ": empty " << in_field << ", skipped\n";
      continue;
    }
    sources.push_back(all[i]);
  }
  const Seq2Seq model = ckpt.instantiate();
  const auto outputs = generate_texts(model, ckpt.vocab, ckpt.task, sources);
  make_dir(a.out);
  std::ostringstream lines;
  for (std::size_t i = 0; i < sources.size(); ++i) {
    ordered_json j;
    j[in_field] = sources[i];
    j[out_field] = outputs[i];
    lines << j.dump() << '\n';
  }
  write_text(fs::path(a.out) / "generated.jsonl", lines.str());
  out << "generated " << outputs.size() << " " << out_field << "s\n";
  return kOk;
}

int cmd_synth(const SynthArgs& a, std::ostream& out) {
  const QuestionGenerator qg(load_checkpoint(a.checkpoint));
  const auto summaries = read_summary_jsonl(fs::path(a.input));
  if (summaries.empty()) throw DataError("no summaries in " + a.input);
  SynthReport report;
  const auto pairs = build_synthetic_corpus(summaries, qg, &report);
  make_dir(a.out);
  write_qa_jsonl(fs::path(a.out) / "synthetic.jsonl", pairs);
  write_text(fs::path(a.out) / "synth_report.json", report.to_json().dump(2) + "\n");
  out << report.to_json().dump() << "\n";
  return kOk;
}

int cmd_evaluate(const EvaluateArgs& a, std::ostream& out) {
  const auto cands = read_field_jsonl(a.candidates, a.field);
  const auto refs = read_field_jsonl(a.references, a.field);
  if (cands.size() != refs.size())
    throw DataError("candidates have " + std::to_string(cands.size()) + " records, references " +
                    std::to_string(refs.size()));
  if (cands.empty()) throw DataError("nothing to evaluate");
  std::vector<std::pair<std::string, std::string>> pairs;
  ordered_json examples = ordered_json::array();
  for (std::size_t i = 0; i < cands.size(); ++i) {
    pairs.emplace_back(cands[i], refs[i]);
    const ExampleRouge e = score_example(cands[i], refs[i]);
    ordered_json row;
    row["index"] = i;
    row["rouge1"] = e.rouge1.f1;
    row["rouge2"] = e.rouge2.f1;
    row["rougeL"] = e.rouge_l.f1;
    row["rougeLsum"] = e.rouge_lsum.f1;
    examples.push_back(row);
  }
  const CorpusRouge c = corpus_rouge(pairs);
  ordered_json report;
  report["count"] = cands.size();
  report["field"] = a.field;
  report["metrics"] = {{"rouge1", score_json(c.rouge1)},
                       {"rouge2", score_json(c.rouge2)},
                       {"rougeL", score_json(c.rouge_l)},
                       {"rougeLsum", score_json(c.rouge_lsum)}};
  report["examples"] = examples;
  make_dir(a.out);
  write_text(fs::path(a.out) / "rouge.json", report.dump(2) + "\n");
  char line[160];
  std::snprintf(line, sizeof line, "ROUGE-1 %.4f  ROUGE-2 %.4f  ROUGE-L %.4f  ROUGE-Lsum %.4f  (n=%zu)\n",
                c.rouge1.f1, c.rouge2.f1, c.rouge_l.f1, c.rouge_lsum.f1, cands.size());
  out << line;
  return kOk;
}

void add_common(CLI::App* cmd, CommonArgs& c, bool out_required = true) {
  cmd->add_option("--seed", c.seed, "Seed for every random stream");
  cmd->add_option("--out", c.out, "Output directory")->required(out_required);
}

}  // namespace

std::string sha256_file(const std::string& path) {
  std::ifstream f(path, std::ios::binary);
  if (!f) throw IoError("cannot read " + path);
  EVP_MD_CTX* ctx = EVP_MD_CTX_new();
  EVP_DigestInit_ex(ctx, EVP_sha256(), nullptr);
  char buf[1 << 16];
  while (f.read(buf, sizeof buf) || f.gcount() > 0) EVP_DigestUpdate(ctx, buf, static_cast<std::size_t>(f.gcount()));
  unsigned char md[EVP_MAX_MD_SIZE];
  unsigned int len = 0;
  EVP_DigestFinal_ex(ctx, md, &len);
  EVP_MD_CTX_free(ctx);
  std::ostringstream hex;
  for (unsigned int i = 0; i < len; ++i) hex << std::hex << std::setw(2) << std::setfill('0') << static_cast<int>(md[i]);
  return hex.str();
}

int run_cli(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  CLI::App app{"Closed-book question generation toolkit", "cbqg"};
  app.require_subcommand(1);
  app.set_version_flag("--version", kToolVersion);

  PreprocessArgs pre;
  auto* c_pre = app.add_subcommand("preprocess", "Filter QA pairs and split them 80/10/10");
  c_pre->add_option("--input", pre.input, "QA pairs (JSONL)")->required();
  add_common(c_pre, pre);

  TrainArgs tr;
  auto* c_tr = app.add_subcommand("train", "Train a question generator or answerer");
  c_tr->add_option("mode", tr.mode, "qg | qg-baseline | qa")
      ->required()
      ->check(CLI::IsMember({"qg", "qg-baseline", "qa"}));
  c_tr->add_option("--data", tr.data, "Directory with train.jsonl/val.jsonl, or one JSONL file")->required();
  c_tr->add_option("--config", tr.config, "JSON config with \"model\" and \"train\" sections")->required();
  c_tr->add_option("--qa-checkpoint", tr.qa_checkpoint, "Frozen QA model for answer reconstruction");
  c_tr->add_option("--epochs", tr.epochs, "Override train.epochs");
  c_tr->add_option("--batch-size", tr.batch_size, "Override train.batch_size");
  c_tr->add_option("--learning-rate", tr.learning_rate, "Override train.learning_rate");
  add_common(c_tr, tr);

  GenerateArgs gen;
  auto* c_gen = app.add_subcommand("generate", "Greedy-decode questions (or answers) from a checkpoint");
  c_gen->add_option("--checkpoint", gen.checkpoint)->required();
  c_gen->add_option("--input", gen.input, "JSONL with \"answer\" (qg) or \"question\" (qa) fields")->required();
  add_common(c_gen, gen);

  SynthArgs syn;
  auto* c_syn = app.add_subcommand("synth", "Build a synthetic QA corpus from summaries");
  c_syn->add_option("--checkpoint", syn.checkpoint, "Question generator checkpoint")->required();
  c_syn->add_option("--input", syn.input, "Summaries (JSONL with \"summary\")")->required();
  add_common(c_syn, syn);

  EvaluateArgs ev;
  auto* c_ev = app.add_subcommand("evaluate", "ROUGE-1/2/L/Lsum of candidates against references");
  c_ev->add_option("--candidates", ev.candidates, "JSONL")->required();
  c_ev->add_option("--references", ev.references, "JSONL")->required();
  c_ev->add_option("--field", ev.field, "Record field to compare (default: question)");
  add_common(c_ev, ev);

  try {
    std::vector<std::string> reversed(args.rbegin(), args.rend());
    app.parse(reversed);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e, out, err);
  } catch (const CLI::CallForVersion& e) {
    return app.exit(e, out, err);
  } catch (const CLI::ParseError& e) {
    app.exit(e, out, err);
    return kUsage;
  }

  try {
    if (*c_pre) return cmd_preprocess(pre, out, err);
    if (*c_tr) return cmd_train(tr, out);
    if (*c_gen) return cmd_generate(gen, out, err);
    if (*c_syn) return cmd_synth(syn, out);
    if (*c_ev) return cmd_evaluate(ev, out);
  } catch (const ConfigError& e) {
    err << "error: invalid configuration (" << e.field() << "): " << e.what() << "\n";
    return kUsage;
  } catch (const IoError& e) {
    err << "error: " << e.what() << "\n";
    return kUsage;
  } catch (const DataError& e) {
    err << "error: " << e.what() << "\n";
    return kData;
  } catch (const ArgumentError& e) {
    err << "error: " << e.what() << "\n";
    return kUsage;
  } catch (const std::logic_error& e) {
    err << "internal error: " << e.what() << "\n";
    return kInternal;
  } catch (const std::exception& e) {
    err << "internal error: " << e.what() << "\n";
    return kInternal;
  }
  return kUsage;
}

}  // namespace cbqg::cli
