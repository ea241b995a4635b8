#include <pybind11/eigen.h>
#include <pybind11/functional.h>
#include <pybind11/iostream.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>
#include <pybind11/stl/filesystem.h>

#include <sstream>

#include "persuade/checkpoint.hpp"
#include "persuade/classifier.hpp"
#include "persuade/cli.hpp"
#include "persuade/config.hpp"
#include "persuade/corpus.hpp"
#include "persuade/errors.hpp"
#include "persuade/loss.hpp"
#include "persuade/metrics.hpp"
#include "persuade/schedule.hpp"
#include "persuade/trainer.hpp"

namespace py = pybind11;
using namespace persuade;

namespace {

Label label_arg(const py::object& value) {
  if (py::isinstance<py::bool_>(value)) return value.cast<bool>() ? Label::True : Label::False;
  const auto text = value.cast<std::string>();
  if (const auto label = parse_label(text)) return *label;
  throw ValidationError("label must be \"true\" or \"false\", got \"" + text + "\"");
}

std::vector<Label> labels_arg(const py::iterable& values) {
  std::vector<Label> out;
  for (const auto& v : values) out.push_back(label_arg(py::reinterpret_borrow<py::object>(v)));
  return out;
}

py::dict snippet_dict(const Snippet& s) {
  py::dict d;
  d["id"] = s.id;
  d["text"] = s.text;
  d["label"] = s.label ? py::object(py::str(std::string(to_string(*s.label)))) : py::object(py::none());
  d["type"] = s.genre ? py::object(py::str(*s.genre)) : py::object(py::none());
  return d;
}

LabeledCorpus corpus_from_dicts(const py::iterable& records) {
  std::vector<Snippet> snippets;
  for (const auto& item : records) {
    const auto d = item.cast<py::dict>();
    Snippet s;
    s.id = d["id"].cast<std::string>();
    s.text = d["text"].cast<std::string>();
    if (d.contains("label") && !d["label"].is_none()) s.label = label_arg(d["label"]);
    if (d.contains("type") && !d["type"].is_none()) s.genre = d["type"].cast<std::string>();
    snippets.push_back(std::move(s));
  }
  return LabeledCorpus(std::move(snippets));
}

TrainConfig config_from_kwargs(const py::kwargs& kwargs) {
  TrainConfig config;
  for (const auto& [key, value] : kwargs) {
    const auto name = key.cast<std::string>();
    std::string text;
    if (py::isinstance<py::bool_>(value)) text = value.cast<bool>() ? "true" : "false";
    else text = py::str(value).cast<std::string>();
    set_config_value(config, name, text);
  }
  config.validate();
  return config;
}

py::dict report_dict(const TrainReport& report) {
  return py::module_::import("json").attr("loads")(report.to_json().dump());
}

}  // namespace

PYBIND11_MODULE(_core, m) {
  m.doc() = "Binary persuasion-technique classifier: corpus tools, training and scoring";

  // Module-local so translators registered by other extensions (torch, for
  // one) never see these types.
  py::register_local_exception<ValidationError>(m, "ValidationError", PyExc_ValueError);
  py::register_local_exception<RuntimeFailure>(m, "RuntimeFailure", PyExc_RuntimeError);

  py::class_<LabeledCorpus>(m, "Corpus")
      .def(py::init(&corpus_from_dicts), py::arg("records"))
      .def("__len__", &LabeledCorpus::size)
      .def("__getitem__",
           [](const LabeledCorpus& c, std::ptrdiff_t i) {
             const auto n = static_cast<std::ptrdiff_t>(c.size());
             if (i < 0) i += n;
             if (i < 0 || i >= n) throw py::index_error();
             return snippet_dict(c[static_cast<std::size_t>(i)]);
           })
      .def("records",
           [](const LabeledCorpus& c) {
             py::list out;
             for (const auto& s : c) out.append(snippet_dict(s));
             return out;
           })
      .def_property_readonly("counts",
                             [](const LabeledCorpus& c) {
                               return py::dict(py::arg("true") = c.counts().n_true, py::arg("false") = c.counts().n_false);
                             })
      .def("__eq__", [](const LabeledCorpus& a, const LabeledCorpus& b) { return a == b; });

  m.def("load_corpus", &load_corpus, py::arg("path"), py::arg("require_labels") = false);
  m.def("write_corpus", py::overload_cast<const std::filesystem::path&, const LabeledCorpus&>(&write_corpus),
        py::arg("path"), py::arg("corpus"));
  m.def(
      "stratified_split",
      [](const LabeledCorpus& c, double fraction, std::uint64_t seed) {
        auto split = stratified_split(c, fraction, seed);
        return py::make_tuple(std::move(split.train), std::move(split.dev));
      },
      py::arg("corpus"), py::arg("dev_fraction"), py::arg("seed"));
  m.def(
      "class_weights",
      [](const LabeledCorpus& c) {
        const auto w = class_weights(c);
        return py::make_tuple(w.weight_true, w.weight_false);
      },
      py::arg("corpus"), "(weight_true, weight_false)");
  m.def(
      "label_distribution",
      [](const LabeledCorpus& c) {
        const auto d = label_distribution(c);
        py::dict out;
        out["true"] = d.counts.n_true;
        out["false"] = d.counts.n_false;
        out["fraction_true"] = d.defined ? py::object(py::float_(d.fraction_true)) : py::object(py::none());
        out["fraction_false"] = d.defined ? py::object(py::float_(d.fraction_false)) : py::object(py::none());
        return out;
      },
      py::arg("corpus"));

  m.def("lr_at_epoch", &lr_at_epoch, py::arg("base_lr"), py::arg("factor"), py::arg("step"), py::arg("epoch"));
  m.def(
      "early_stop_check",
      [](const std::vector<double>& history, std::size_t patience) { return early_stop_check(history, patience); },
      py::arg("dev_loss_history"), py::arg("patience"));
  m.def(
      "weighted_cross_entropy",
      [](const Matrix& logits, const std::vector<int>& labels, double weight_true, double weight_false) {
        return weighted_cross_entropy(logits, labels, ClassWeights{weight_true, weight_false});
      },
      py::arg("logits"), py::arg("labels"), py::arg("weight_true") = 1.0, py::arg("weight_false") = 1.0);

  m.def(
      "micro_f1", [](const py::iterable& pred, const py::iterable& gold) { return micro_f1(confusion(labels_arg(pred), labels_arg(gold))); },
      py::arg("predictions"), py::arg("gold"));
  m.def(
      "per_class_f1",
      [](const py::iterable& pred, const py::iterable& gold) {
        const auto report = per_class_f1(confusion(labels_arg(pred), labels_arg(gold)));
        py::dict out;
        for (const Label l : kAllLabels) {
          const auto& s = report.of(l);
          out[py::str(std::string(to_string(l)))] = py::dict(py::arg("precision") = s.precision, py::arg("recall") = s.recall,
                                                py::arg("f1") = s.f1);
        }
        out["macro_f1"] = report.macro_f1;
        return out;
      },
      py::arg("predictions"), py::arg("gold"));

  py::class_<ClassifierModel>(m, "Classifier")
      .def(py::init([](const std::string& checkpoint, double dropout_rate, std::uint64_t seed) {
             return build_model(checkpoint, dropout_rate, seed);
           }),
           py::arg("checkpoint") = kTinyRandomCheckpoint, py::arg("dropout_rate") = 0.1, py::arg("seed") = 42)
      .def_static(
          "load", [](const std::filesystem::path& dir) { return std::move(load_checkpoint(dir).model); }, py::arg("path"))
      .def(
          "save", [](const ClassifierModel& model, const std::filesystem::path& dir, std::size_t max_length) { save_checkpoint(model, max_length, dir); },
          py::arg("path"), py::arg("max_length") = 128)
      .def(
          "encode",
          [](const ClassifierModel& model, const std::vector<std::string>& texts, std::size_t max_length) {
            const auto batch = encode_batch(model.tokenizer(), texts, max_length);
            return py::make_tuple(batch.token_ids, batch.attention_mask);
          },
          py::arg("texts"), py::arg("max_length") = 128, "(token_ids, attention_mask) as int32 arrays")
      .def(
          "logits",
          [](const ClassifierModel& model, const std::vector<std::string>& texts, std::size_t max_length) {
            return model.logits(encode_batch(model.tokenizer(), texts, max_length));
          },
          py::arg("texts"), py::arg("max_length") = 128)
      .def(
          "pooled",
          [](const ClassifierModel& model, const std::vector<std::string>& texts, std::size_t max_length) {
            return model.pooled(encode_batch(model.tokenizer(), texts, max_length));
          },
          py::arg("texts"), py::arg("max_length") = 128, "First-token hidden states in evaluation mode")
      .def(
          "predict",
          [](const ClassifierModel& model, const std::vector<std::string>& texts, std::size_t max_length) {
            std::vector<std::string> out;
            for (const Label l : predict_labels(model, encode_batch(model.tokenizer(), texts, max_length))) out.emplace_back(to_string(l));
            return out;
          },
          py::arg("texts"), py::arg("max_length") = 128)
      .def_property_readonly("dropout_rate", &ClassifierModel::dropout_rate)
      .def_property_readonly("hidden_size", [](const ClassifierModel& model) { return model.encoder_config().hidden_size; })
      .def("parameters", [](const ClassifierModel& model) {
        py::dict out;
        for (const Parameter* p : model.parameters()) out[py::str(p->name)] = p->value;
        return out;
      });

  m.def(
      "train",
      [](ClassifierModel& model, const LabeledCorpus& train_corpus, const LabeledCorpus& dev_corpus,
         std::optional<std::filesystem::path> run_dir, const py::kwargs& kwargs) {
        const TrainConfig config = config_from_kwargs(kwargs);
        TrainOptions options;
        options.run_dir = std::move(run_dir);
        TrainReport report;
        {
          py::gil_scoped_release release;
          report = train(model, train_corpus, dev_corpus, config, options);
        }
        return report_dict(report);
      },
      py::arg("model"), py::arg("train"), py::arg("dev"), py::arg("run_dir") = py::none(),
      "Fine-tunes model in place; keyword arguments override config fields. Returns the report as a dict.");

  m.def(
      "run_cli",
      [](const std::vector<std::string>& args) {
        std::ostringstream out, err;
        int code = 0;
        {
          py::gil_scoped_release release;
          code = cli::run(args, out, err);
        }
        return py::make_tuple(code, out.str(), err.str());
      },
      py::arg("args"), "Runs a command-line invocation; returns (exit_code, stdout, stderr).");
}
