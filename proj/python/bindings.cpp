#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include <sstream>

#include "cbqg/checkpoint.hpp"
#include "cbqg/contrastive.hpp"
#include "cbqg/dataset.hpp"
#include "cbqg/errors.hpp"
#include "cbqg/generation.hpp"
#include "cbqg/reconstruction.hpp"
#include "cbqg/rouge.hpp"
#include "cbqg/synth.hpp"
#include "cli.hpp"

namespace py = pybind11;
using namespace cbqg;

namespace {

using Pair = std::pair<std::string, std::string>;  // (question, answer)
using Matrix = std::vector<std::vector<double>>;

std::vector<QAPair> to_pairs(const std::vector<Pair>& in) {
  std::vector<QAPair> out;
  for (const auto& [q, a] : in) out.push_back({q, a});
  return out;
}

std::vector<Pair> from_pairs(const std::vector<QAPair>& in) {
  std::vector<Pair> out;
  for (const auto& p : in) out.emplace_back(p.question, p.answer);
  return out;
}

Tensor to_tensor(const Matrix& rows) {
  if (rows.empty() || rows[0].empty()) throw ArgumentError("expected a non-empty matrix");
  std::vector<double> flat;
  for (const auto& r : rows) {
    if (r.size() != rows[0].size()) throw ArgumentError("ragged matrix");
    flat.insert(flat.end(), r.begin(), r.end());
  }
  return Tensor::from({rows.size(), rows[0].size()}, std::move(flat));
}

Matrix to_matrix(const Tensor& t) {
  const std::size_t cols = t.dim(t.rank() - 1);
  Matrix out(t.numel() / cols);
  for (std::size_t i = 0; i < t.numel(); ++i) out[i / cols].push_back(t.at(i));
  return out;
}

/// A loaded checkpoint together with its model, ready to decode.
class LoadedModel {
 public:
  explicit LoadedModel(const std::string& path) : ckpt_(load_checkpoint(path)), model_(ckpt_.instantiate()) {}

  std::string task() const { return std::string(to_string(ckpt_.task)); }
  int epoch() const { return ckpt_.epoch; }
  double val_rouge_l() const { return ckpt_.val_rouge_l; }
  std::size_t vocab_size() const { return ckpt_.vocab.size(); }
  std::size_t parameter_count() const { return model_.parameter_count(); }

  std::vector<std::string> generate(const std::vector<std::string>& sources) const {
    NoGradGuard no_grad;
    return generate_texts(model_, ckpt_.vocab, ckpt_.task, sources);
  }

 private:
  Checkpoint ckpt_;
  Seq2Seq model_;
};

}  // namespace

PYBIND11_MODULE(_cbqg, m) {
  m.doc() = "Closed-book question generation core";

  static py::exception<ConfigError> config_error(m, "ConfigError", PyExc_ValueError);
  static py::exception<DataError> data_error(m, "DataError", PyExc_ValueError);
  static py::exception<IoError> io_error(m, "IoError", PyExc_OSError);
  py::register_exception_translator([](std::exception_ptr p) {
    try {
      if (p) std::rethrow_exception(p);
    } catch (const ConfigError& e) {
      config_error(e.what());
    } catch (const DataError& e) {
      data_error(e.what());
    } catch (const IoError& e) {
      io_error(e.what());
    } catch (const ArgumentError& e) {
      PyErr_SetString(PyExc_ValueError, e.what());
    } catch (const DomainError& e) {
      PyErr_SetString(PyExc_ValueError, e.what());
    }
  });

  py::class_<RougeScore>(m, "RougeScore")
      .def_readonly("precision", &RougeScore::precision)
      .def_readonly("recall", &RougeScore::recall)
      .def_readonly("f1", &RougeScore::f1)
      .def("__repr__", [](const RougeScore& s) {
        std::ostringstream o;
        o << "RougeScore(precision=" << s.precision << ", recall=" << s.recall << ", f1=" << s.f1 << ")";
        return o.str();
      });

  m.def("rouge_n", [](const std::string& c, const std::string& r, int n) { return rouge_n(c, r, n); },
        py::arg("candidate"), py::arg("reference"), py::arg("n"));
  m.def("rouge_l", [](const std::string& c, const std::string& r) { return rouge_l(c, r); }, py::arg("candidate"),
        py::arg("reference"));
  m.def("rouge_lsum", [](const std::string& c, const std::string& r) { return rouge_lsum(c, r); },
        py::arg("candidate"), py::arg("reference"));
  m.def("rouge_tokenize", [](const std::string& t) { return rouge_tokenize(t); }, py::arg("text"));

  m.def("word_tokenize", [](const std::string& t) { return word_tokenize(t); }, py::arg("text"));
  m.def("normalize_text", [](const std::string& t) { return normalize_text(t); }, py::arg("text"));
  m.def("split_sentences", [](const std::string& t) { return split_sentences(t); }, py::arg("text"));

  m.def(
      "filter_pairs",
      [](const std::vector<Pair>& pairs) {
        FilterStats s;
        const auto kept = filter_pairs(to_pairs(pairs), &s);
        py::dict stats;
        stats["input"] = s.input;
        stats["kept"] = s.kept;
        stats["question_word"] = s.dropped_question_word;
        stats["question_mark"] = s.dropped_question_mark;
        stats["answer_length"] = s.dropped_answer_length;
        stats["meaningless"] = s.dropped_meaningless;
        stats["duplicate"] = s.dropped_duplicate;
        return py::make_tuple(from_pairs(kept), stats);
      },
      py::arg("pairs"), "(question, answer) tuples -> (kept pairs, per-rule stats)");
  m.def(
      "split_dataset",
      [](const std::vector<Pair>& pairs, std::uint64_t seed) {
        const DatasetSplit s = split_dataset(to_pairs(pairs), seed);
        return py::make_tuple(from_pairs(s.train), from_pairs(s.val), from_pairs(s.test));
      },
      py::arg("pairs"), py::arg("seed"));

  m.def(
      "nt_xent",
      [](const Matrix& anchors, const Matrix& positives, double tau) {
        NoGradGuard no_grad;
        return nt_xent_loss({to_tensor(anchors), to_tensor(positives), tau}).item();
      },
      py::arg("anchors"), py::arg("positives"), py::arg("tau") = 0.3);
  m.def(
      "gumbel_softmax",
      [](const Matrix& logits, double tau, const Matrix& noise) {
        NoGradGuard no_grad;
        return to_matrix(gumbel_softmax(to_tensor(logits), tau, to_tensor(noise)));
      },
      py::arg("logits"), py::arg("tau"), py::arg("noise"));
  m.def("gumbel_from_uniform", &gumbel_from_uniform, py::arg("u"));

  py::class_<LoadedModel>(m, "Model")
      .def(py::init<const std::string&>(), py::arg("checkpoint"))
      .def_property_readonly("task", &LoadedModel::task)
      .def_property_readonly("epoch", &LoadedModel::epoch)
      .def_property_readonly("val_rouge_l", &LoadedModel::val_rouge_l)
      .def_property_readonly("vocab_size", &LoadedModel::vocab_size)
      .def_property_readonly("parameter_count", &LoadedModel::parameter_count)
      .def("generate", &LoadedModel::generate, py::arg("sources"));

  m.def(
      "run_cli",
      [](const std::vector<std::string>& args) {
        std::ostringstream out, err;
        int code;
        {
          py::gil_scoped_release release;
          code = cli::run_cli(args, out, err);
        }
        return py::make_tuple(code, out.str(), err.str());
      },
      py::arg("args"), "Runs a cbqg subcommand in-process; returns (exit_code, stdout, stderr).");
  m.attr("__version__") = cli::kToolVersion;
}
