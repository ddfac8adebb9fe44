#include <pybind11/pybind11.h>
#include <pybind11/stl.h>
#include <pybind11/stl/filesystem.h>

#include <random>

#include "cqa/checkpoint.hpp"
#include "cqa/dataset.hpp"
#include "cqa/error.hpp"
#include "cqa/evaluation.hpp"
#include "cqa/synthetic.hpp"
#include "cqa/training.hpp"
#include "cqa/verify.hpp"

namespace py = pybind11;
using namespace cqa;

namespace {

// A trained network together with the vocabulary it was built on.
struct Model {
  Vocabulary vocab;
  std::unique_ptr<Scorer<float>> scorer;
  std::size_t max_len = kDefaultMaxLen;

  static Model from_checkpoint(const Checkpoint& ck) {
    return {ck.vocab(), restore<float>(ck), ck.spec.config.max_len};
  }

  std::vector<Example> features(const std::vector<Triple>& triples) const {
    return compute_features(triples, vocab, max_len);
  }

  Task task_or_default(const std::optional<std::string>& task) const {
    if (task) return parse_task(*task);
    return scorer->spec().task.value_or(Task::C);
  }
};

struct Trained {
  Model model;
  std::vector<EpochRecord> epochs;
  std::size_t stop_epoch = 0;
  bool early_stopped = false;
  std::string report_csv;
  std::vector<Snapshot> snapshots;
};

py::dict epoch_dict(const EpochRecord& r) {
  py::dict d;
  d["epoch"] = r.epoch;
  d["loss_train"] = r.loss_train;
  d["loss_dev"] = r.loss_dev;
  d["task_loss_dev"] = r.task_loss_dev;
  d["map_dev"] = r.map_dev;
  return d;
}

Trained train_model(const std::vector<Triple>& train_triples, const std::vector<Triple>& dev_triples,
                    const std::string& model_kind, const std::string& tasks, const std::string& stopping,
                    std::size_t feature_maps, std::size_t word_dim, std::size_t feat_dim,
                    std::size_t max_len, std::size_t batch_size, std::size_t patience,
                    std::size_t max_epochs, double dropout_input, double dropout_hidden,
                    double learning_rate, std::uint64_t seed, std::size_t min_count) {
  TrainConfig tc;
  tc.active_tasks = TaskSet::parse(tasks);
  tc.stopping = parse_stopping_mode(stopping);
  tc.batch_size = batch_size;
  tc.patience = patience;
  tc.max_epochs = max_epochs;
  tc.dropout_input = dropout_input;
  tc.dropout_hidden = dropout_hidden;
  tc.rmsprop.learning_rate = learning_rate;
  tc.seed = seed;
  tc.validate();

  ModelSpec spec;
  if (model_kind == "pair") {
    if (tc.active_tasks.count() != 1) throw ConfigError("a pair model is trained on exactly one task");
    spec.kind = ModelKind::pair;
    spec.task = tc.active_tasks.tasks().front();
  } else if (model_kind != "mtl") {
    throw ConfigError("model must be mtl or pair");
  }
  if (dev_triples.empty()) throw DataError("dev corpus is empty");

  Trained out;
  out.model.vocab = corpus_vocabulary(train_triples, min_count, max_len);
  out.model.max_len = max_len;
  spec.config.vocab_size = out.model.vocab.size();
  spec.config.feature_maps = feature_maps;
  spec.config.word_dim = word_dim;
  spec.config.feat_dim = feat_dim;
  spec.config.max_len = max_len;
  const auto train_data = compute_features(train_triples, out.model.vocab, max_len);
  const auto dev_data = compute_features(dev_triples, out.model.vocab, max_len);

  out.model.scorer = make_model<float>(spec);
  std::mt19937_64 rng(seed);
  out.model.scorer->initialize(rng);
  TrainResult r;
  {
    py::gil_scoped_release release;
    r = train(*out.model.scorer, out.model.vocab, train_data, dev_data, tc);
  }
  out.epochs = r.report.epochs;
  out.stop_epoch = r.report.stop_epoch;
  out.early_stopped = r.report.early_stopped;
  out.report_csv = r.report.to_csv();
  out.snapshots = std::move(r.snapshots);
  return out;
}

// Translators are tried newest first, so subclasses are registered after
// their bases.
void register_errors(py::module_& m) {
  auto& base = py::register_exception<Error>(m, "Error", PyExc_RuntimeError);
  py::register_exception<ConfigError>(m, "ConfigError", base.ptr());
  auto& data = py::register_exception<DataError>(m, "DataError", base.ptr());
  py::register_exception<DimensionError>(m, "DimensionError", data.ptr());
  py::register_exception<NumericError>(m, "NumericError", base.ptr());
}

}  // namespace

PYBIND11_MODULE(_core, m) {
  m.doc() = "Multitask CNN reranker for community question answering";
  register_errors(m);

  py::enum_<Task>(m, "Task").value("A", Task::A).value("B", Task::B).value("C", Task::C);
  py::enum_<CommentLabel>(m, "CommentLabel")
      .value("good", CommentLabel::good)
      .value("potentially_useful", CommentLabel::potentially_useful)
      .value("bad", CommentLabel::bad);
  py::enum_<QuestionLabel>(m, "QuestionLabel")
      .value("perfect_match", QuestionLabel::perfect_match)
      .value("relevant", QuestionLabel::relevant)
      .value("irrelevant", QuestionLabel::irrelevant);

  // text
  py::class_<TokenizedText>(m, "TokenizedText")
      .def_readonly("tokens", &TokenizedText::tokens)
      .def_readonly("ids", &TokenizedText::ids)
      .def_readonly("overlaps", &TokenizedText::overlaps)
      .def("__len__", &TokenizedText::size);
  m.def(
      "preprocess",
      [](std::optional<std::string> subject, const std::string& body, std::size_t max_len) {
        return preprocess(subject ? std::optional<std::string_view>(*subject) : std::nullopt, body, max_len)
            .tokens;
      },
      py::arg("subject"), py::arg("body"), py::arg("max_len") = kDefaultMaxLen,
      "Token list of subject + body, lowercased and truncated.");
  py::class_<Vocabulary>(m, "Vocabulary")
      .def_static("from_corpus", [](const std::vector<Triple>& t, std::size_t min_count) {
        return corpus_vocabulary(t, min_count);
      }, py::arg("triples"), py::arg("min_count") = 1)
      .def("lookup", &Vocabulary::lookup)
      .def("token", &Vocabulary::token)
      .def("tokens", &Vocabulary::tokens)
      .def("__len__", &Vocabulary::size);

  // dataset
  py::class_<Triple>(m, "Triple")
      .def(py::init<>())
      .def_readwrite("id", &Triple::id)
      .def_readwrite("group", &Triple::group)
      .def_readwrite("q_new_subject", &Triple::q_new_subject)
      .def_readwrite("q_new_body", &Triple::q_new_body)
      .def_readwrite("q_rel_subject", &Triple::q_rel_subject)
      .def_readwrite("q_rel_body", &Triple::q_rel_body)
      .def_readwrite("q_rel_id", &Triple::q_rel_id)
      .def_readwrite("c_rel", &Triple::c_rel)
      .def_readwrite("google_rank", &Triple::google_rank)
      .def_readwrite("label_A", &Triple::label_A)
      .def_readwrite("label_B", &Triple::label_B)
      .def_readwrite("label_C", &Triple::label_C)
      .def("labels", [](const Triple& t) {
        const auto y = binarize(t);
        return std::array<int, 3>{y.yA, y.yB, y.yC};
      }, "Binarized (yA, yB, yC).")
      .def("to_json", &serialize_triple);
  m.def("load_corpus", [](const std::filesystem::path& p, bool labels) {
    return load_corpus(p, labels ? Labels::required : Labels::optional);
  }, py::arg("path"), py::arg("labels") = true);
  m.def("parse_corpus", [](const std::string& s, bool labels) {
    return parse_corpus(s, labels ? Labels::required : Labels::optional);
  }, py::arg("jsonl"), py::arg("labels") = true);
  m.def("save_corpus", [](const std::filesystem::path& p, const std::vector<Triple>& t) { save_corpus(p, t); });
  m.def("extend_dataset", [](const std::vector<Triple>& corpus) {
    return extend_dataset(threads_from_corpus(corpus));
  }, py::arg("corpus"), "One (q_rel, q_rel, c_rel) triple per comment of the corpus's related questions.");
  m.def("positive_rates", [](const std::vector<Triple>& t) {
    const auto r = positive_rates(t);
    return std::array<double, 3>{r.A, r.B, r.C};
  });
  m.def("synthetic_corpus", [](std::size_t queries, std::size_t related, std::size_t comments, std::uint64_t seed) {
    SyntheticConfig c;
    c.queries = queries;
    c.related_per_query = related;
    c.comments_per_related = comments;
    c.seed = seed;
    return synthetic_corpus(c);
  }, py::arg("queries") = 5, py::arg("related_per_query") = 2, py::arg("comments_per_related") = 5,
     py::arg("seed") = 1);

  // ranking
  m.def("rank_bin", &rank_bin);
  m.def("average_precision", [](const std::vector<std::uint8_t>& r) { return average_precision(r); });
  m.def("reciprocal_rank", [](const std::vector<std::uint8_t>& r) { return reciprocal_rank(r); });
  m.def("weighted_combine", &weighted_combine, py::arg("score"), py::arg("google_rank"), py::arg("alpha"));

  // models
  py::class_<Model>(m, "Model")
      .def_static("load", [](const std::filesystem::path& p) { return Model::from_checkpoint(read_checkpoint(p)); })
      .def_static("from_bytes", [](const py::bytes& b) {
        return Model::from_checkpoint(parse_checkpoint(std::string(b)));
      })
      .def("to_bytes", [](const Model& self) { return py::bytes(snapshot(*self.scorer, self.vocab)); })
      .def("save", [](const Model& self, const std::filesystem::path& p) {
        write_checkpoint(p, snapshot(*self.scorer, self.vocab));
      })
      .def_property_readonly("tasks", [](const Model& self) {
        std::string s;
        for (auto t : self.scorer->tasks().tasks()) s += task_letter(t);
        return s;
      })
      .def_property_readonly("vocabulary", [](const Model& self) { return self.vocab.tokens(); })
      .def("score", [](const Model& self, const std::vector<Triple>& t) {
        return score_examples(*self.scorer, self.features(t));
      }, "Per-triple (A, B, C) probabilities; NaN for tasks the model does not score.")
      .def("evaluate", [](const Model& self, const std::vector<Triple>& t, std::optional<std::string> task,
                          std::optional<double> alpha) {
        const auto r = evaluate(*self.scorer, self.features(t), self.task_or_default(task), alpha);
        py::dict d;
        d["map"] = r.map;
        d["mrr"] = r.mrr;
        d["queries"] = r.queries;
        d["skipped"] = r.skipped;
        return d;
      }, py::arg("triples"), py::arg("task") = py::none(), py::arg("alpha") = py::none())
      .def("predict", [](const Model& self, const std::vector<Triple>& t, std::optional<std::string> task,
                         std::optional<double> alpha, bool with_labels) {
        const auto data = self.features(t);
        return format_predictions(rank_candidates(score_candidates(*self.scorer, data, self.task_or_default(task)),
                                                  alpha),
                                  with_labels);
      }, py::arg("triples"), py::arg("task") = py::none(), py::arg("alpha") = py::none(),
         py::arg("with_labels") = false, "Prediction TSV: group, doc id, rank, score[, label].")
      .def("tune_alpha", [](const Model& self, const std::vector<Triple>& t, std::optional<std::string> task) {
        const auto c = tune_alpha(*self.scorer, self.features(t), self.task_or_default(task));
        return std::pair<double, double>{c.alpha, c.map};
      }, py::arg("triples"), py::arg("task") = py::none());

  py::class_<Trained>(m, "TrainResult")
      .def_property_readonly("model", [](const Trained& t) {
        return Model::from_checkpoint(parse_checkpoint(snapshot(*t.model.scorer, t.model.vocab)));
      }, "Final model; in global mode these are the best epoch's weights.")
      .def_readonly("stop_epoch", &Trained::stop_epoch)
      .def_readonly("early_stopped", &Trained::early_stopped)
      .def_readonly("report_csv", &Trained::report_csv)
      .def_property_readonly("epochs", [](const Trained& t) {
        py::list l;
        for (const auto& r : t.epochs) l.append(epoch_dict(r));
        return l;
      })
      .def_property_readonly("snapshots", [](const Trained& t) {
        py::list l;
        for (const auto& s : t.snapshots) {
          py::dict d;
          d["task"] = s.task ? py::object(py::str(std::string(1, task_letter(*s.task)))) : py::object(py::none());
          d["epoch"] = s.epoch;
          d["model"] = Model::from_checkpoint(parse_checkpoint(s.checkpoint));
          l.append(d);
        }
        return l;
      });

  const ModelConfig mc;
  const TrainConfig tc;
  m.def("train", &train_model, py::arg("train"), py::arg("dev"), py::arg("model") = "mtl",
        py::arg("tasks") = "ABC", py::arg("stopping") = "global", py::arg("feature_maps") = mc.feature_maps,
        py::arg("word_dim") = mc.word_dim, py::arg("feat_dim") = mc.feat_dim, py::arg("max_len") = mc.max_len,
        py::arg("batch_size") = tc.batch_size, py::arg("patience") = tc.patience,
        py::arg("max_epochs") = tc.max_epochs, py::arg("dropout_input") = tc.dropout_input,
        py::arg("dropout_hidden") = tc.dropout_hidden, py::arg("learning_rate") = tc.rmsprop.learning_rate,
        py::arg("seed") = tc.seed, py::arg("min_count") = 1);

  m.def("gradcheck", [](std::size_t probes, std::uint64_t seed, std::size_t feature_maps,
                        std::optional<std::string> pair_task, double corrupt_conv_grad) {
    GradientCheckOptions o;
    o.probes = probes;
    o.seed = seed;
    o.model.feature_maps = feature_maps;
    if (pair_task) o.pair_task = parse_task(*pair_task);
    o.corrupt_conv_grad = corrupt_conv_grad;
    nn::GradCheckResult r;
    {
      py::gil_scoped_release release;
      r = check_model_gradients(o);
    }
    py::dict d;
    d["max_relative_error"] = r.max_relative_error;
    d["probes"] = r.probes;
    d["kink_rejections"] = r.kink_rejections;
    d["worst_parameter"] = r.worst_parameter;
    return d;
  }, py::arg("probes") = 200, py::arg("seed") = 1, py::arg("feature_maps") = ModelConfig{}.feature_maps,
     py::arg("pair_task") = py::none(), py::arg("corrupt_conv_grad") = 1.0);
}
