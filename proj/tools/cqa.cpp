// cqa: dataset extension, training, evaluation, prediction and gradient
// verification for the multitask question/comment reranker.

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>
#include <optional>
#include <random>
#include <string>

#include "CLI11.hpp"
#include "cqa/checkpoint.hpp"
#include "cqa/dataset.hpp"
#include "cqa/error.hpp"
#include "cqa/evaluation.hpp"
#include "cqa/io.hpp"
#include "cqa/model.hpp"
#include "cqa/training.hpp"
#include "cqa/verify.hpp"

namespace fs = std::filesystem;
using namespace cqa;

namespace {

enum ExitCode { kOk = 0, kUsage = 1, kData = 2, kNumeric = 3 };

// Flat `key = value` file; '#' starts a comment line.
std::map<std::string, std::string> read_config_file(const fs::path& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open config file " + path.string());
  std::map<std::string, std::string> out;
  std::string line;
  std::size_t line_no = 0;
  auto trim = [](std::string s) {
    const auto b = s.find_first_not_of(" \t\r");
    if (b == std::string::npos) return std::string();
    const auto e = s.find_last_not_of(" \t\r");
    return s.substr(b, e - b + 1);
  };
  while (std::getline(in, line)) {
    ++line_no;
    line = trim(line);
    if (line.empty() || line[0] == '#') continue;
    const auto eq = line.find('=');
    if (eq == std::string::npos)
      throw ConfigError(path.string() + ":" + std::to_string(line_no) + ": expected key=value");
    out[trim(line.substr(0, eq))] = trim(line.substr(eq + 1));
  }
  return out;
}

// Values from the config file fill options not given on the command line.
void apply_config(CLI::App& sub, const std::string& config_path) {
  if (config_path.empty()) return;
  for (const auto& [key, value] : read_config_file(config_path)) {
    if (key == "config") throw ConfigError("config files cannot include other config files");
    CLI::Option* opt = nullptr;
    try {
      opt = sub.get_option("--" + key);
    } catch (const CLI::Error&) {
      throw ConfigError("unknown config key '" + key + "' for command " + sub.get_name());
    }
    if (opt->count() > 0) continue;
    try {
      opt->add_result(value);
      opt->run_callback();
    } catch (const CLI::Error& e) {
      throw ConfigError("bad value for config key '" + key + "': " + e.what());
    }
  }
}

void require_file(const std::string& path, const char* what) {
  if (path.empty()) throw ConfigError(std::string("missing --") + what);
  if (!fs::exists(path)) throw ConfigError(std::string(what) + " path does not exist: " + path);
}

void print_rates(const char* label, const PositiveRates& r) {
  std::printf("%-12s %8.2f %8.2f %8.2f\n", label, r.A, r.B, r.C);
}

// ---------------------------------------------------------------------------

struct ExtendArgs {
  std::string input, output, threads;
};

int cmd_extend(const ExtendArgs& a) {
  require_file(a.input, "input");
  if (a.output.empty()) throw ConfigError("missing --output");
  const auto original = load_corpus(a.input);
  const auto source = a.threads.empty() ? original : load_corpus(a.threads);
  const auto threads = threads_from_corpus(source);
  const auto extended = extend_dataset(threads);

  std::vector<Triple> all = original;
  all.insert(all.end(), extended.begin(), extended.end());
  save_corpus(a.output, all);

  std::printf("original triples: %zu\n", original.size());
  std::printf("+%zu extended\n", extended.size());
  std::printf("total triples: %zu\n", all.size());
  std::printf("Percentage of positive examples\n");
  std::printf("%-12s %8s %8s %8s\n", "", "Task A", "Task B", "Task C");
  if (!original.empty()) print_rates("Train", positive_rates(original));
  if (!all.empty()) print_rates("Train + ED", positive_rates(all));
  return kOk;
}

// ---------------------------------------------------------------------------

struct TrainArgs {
  std::string train, dev, out_dir, vectors, config;
  std::string model = "mtl";
  std::string tasks = "ABC";
  std::string stopping = "global";
  std::size_t min_count = 1;
  ModelConfig dims;
  TrainConfig train_config;
};

int cmd_train(TrainArgs& a) {
  require_file(a.train, "train");
  require_file(a.dev, "dev");
  if (a.out_dir.empty()) throw ConfigError("missing --out_dir");
  if (!a.vectors.empty()) require_file(a.vectors, "vectors");

  TrainConfig& tc = a.train_config;
  tc.active_tasks = TaskSet::parse(a.tasks);
  tc.stopping = parse_stopping_mode(a.stopping);
  tc.validate();

  ModelSpec spec;
  if (a.model == "pair") {
    if (tc.active_tasks.count() != 1) throw ConfigError("a pair model is trained on exactly one task");
    spec.kind = ModelKind::pair;
    spec.task = tc.active_tasks.tasks().front();
  } else if (a.model != "mtl") {
    throw ConfigError("--model must be mtl or pair");
  }

  const auto train_triples = load_corpus(a.train);
  const auto dev_triples = load_corpus(a.dev);
  if (dev_triples.empty()) throw DataError("dev corpus is empty");
  const auto vocab = corpus_vocabulary(train_triples, a.min_count, a.dims.max_len);
  spec.config = a.dims;
  spec.config.vocab_size = vocab.size();
  const auto train_data = compute_features(train_triples, vocab, spec.config.max_len);
  const auto dev_data = compute_features(dev_triples, vocab, spec.config.max_len);

  auto model = make_model<float>(spec);
  std::mt19937_64 init_rng(tc.seed);
  model->initialize(init_rng);
  if (!a.vectors.empty()) {
    const auto n = load_word_vectors(a.vectors, vocab, *model);
    std::printf("loaded %zu pretrained word vectors\n", n);
  }

  TrainHooks<float> hooks;
  hooks.on_epoch = [](const EpochRecord& r, const Scorer<float>&) {
    std::fprintf(stderr, "epoch %zu loss_train=%.5f loss_dev=%.5f\n", r.epoch, r.loss_train, r.loss_dev);
  };
  const auto result = train(*model, vocab, train_data, dev_data, tc, hooks);

  fs::create_directories(a.out_dir);
  for (const auto& snap : result.snapshots) {
    const std::string name =
        snap.task ? std::string("model_") + task_letter(*snap.task) + ".ckpt" : "model.ckpt";
    write_checkpoint(fs::path(a.out_dir) / name, snap.checkpoint);
    std::printf("%s: best epoch %zu\n", name.c_str(), snap.epoch);
  }
  write_file_atomic(fs::path(a.out_dir) / "report.csv", result.report.to_csv());
  std::printf("stopped after epoch %zu%s\n", result.report.stop_epoch,
              result.report.early_stopped ? " (early stopping)" : "");
  return kOk;
}

// ---------------------------------------------------------------------------

struct EvalArgs {
  std::string checkpoint, data, task, predictions, tune_alpha_on;
  std::optional<double> alpha;
};

Task default_task(const Checkpoint& ck, const std::string& requested) {
  if (!requested.empty()) return parse_task(requested);
  return ck.spec.task.value_or(Task::C);
}

int cmd_score(const EvalArgs& a, bool with_labels) {
  require_file(a.checkpoint, "checkpoint");
  require_file(a.data, "data");
  if (a.alpha && !a.tune_alpha_on.empty()) throw ConfigError("use either --alpha or --tune_alpha_on");
  if (a.alpha && !(*a.alpha >= 0.0 && *a.alpha <= 1.0)) throw ConfigError("--alpha must be in [0, 1]");

  const auto ck = read_checkpoint(a.checkpoint);
  const auto vocab = ck.vocab();
  auto model = restore<float>(ck);
  const Task task = default_task(ck, a.task);
  if (!model->tasks().contains(task))
    throw ConfigError(std::string("checkpoint does not score task ") + task_letter(task));

  std::optional<double> alpha = a.alpha;
  if (!a.tune_alpha_on.empty()) {
    require_file(a.tune_alpha_on, "tune_alpha_on");
    const auto dev = compute_features(load_corpus(a.tune_alpha_on), vocab, ck.spec.config.max_len);
    const auto choice = tune_alpha(*model, dev, task);
    alpha = choice.alpha;
    std::printf("alpha=%.2f dev_MAP=%.2f\n", choice.alpha, choice.map);
  }

  const auto triples = load_corpus(a.data, with_labels ? Labels::required : Labels::optional);
  if (triples.empty()) throw DataError("evaluate: empty data");
  const auto data = compute_features(triples, vocab, ck.spec.config.max_len);
  const auto lists = rank_candidates(score_candidates(*model, data, task), alpha);
  if (with_labels) {
    const auto r = evaluate_ranked(lists);
    std::printf("MAP=%.2f MRR=%.2f queries=%zu skipped=%zu\n", r.map, r.mrr, r.queries, r.skipped);
  } else {
    std::printf("scored %zu queries\n", lists.size());
  }
  if (!a.predictions.empty()) write_file_atomic(a.predictions, format_predictions(lists, with_labels));
  return kOk;
}

// ---------------------------------------------------------------------------

struct GradArgs {
  GradientCheckOptions options;
  std::string pair_task;
  double threshold = 1e-4;
};

int cmd_gradcheck(GradArgs& a) {
  if (!a.pair_task.empty()) a.options.pair_task = parse_task(a.pair_task);
  const auto r = check_model_gradients(a.options);
  const bool pass = r.max_relative_error < a.threshold;
  std::printf("max_relative_error=%.3e probes=%zu kink_rejections=%zu worst=%s[%zu] analytic=%.9g numeric=%.9g threshold=%.1e %s\n",
              r.max_relative_error, r.probes, r.kink_rejections, r.worst_parameter.c_str(),
              r.worst_index, r.worst_analytic, r.worst_numeric, a.threshold, pass ? "PASS" : "FAIL");
  return pass ? kOk : kNumeric;
}

void add_model_dims(CLI::App* sub, ModelConfig& dims) {
  sub->add_option("--feature_maps", dims.feature_maps, "Convolution feature maps (sentence vector size)")
      ->capture_default_str();
  sub->add_option("--word_dim", dims.word_dim, "Word embedding size")->capture_default_str();
  sub->add_option("--feat_dim", dims.feat_dim, "Overlap and rank embedding size")->capture_default_str();
  sub->add_option("--conv_width", dims.conv_width, "Convolution width")->capture_default_str();
  sub->add_option("--max_len", dims.max_len, "Tokens kept per text")->capture_default_str();
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Multitask CNN reranker for community question answering"};
  app.require_subcommand(1);

  ExtendArgs ext;
  std::string ext_config;
  auto* extend = app.add_subcommand("extend", "Append (q_rel, q_rel, c_rel) triples built from task A threads");
  extend->add_option("--input", ext.input, "Corpus (JSONL)");
  extend->add_option("--output", ext.output, "Output corpus (JSONL)");
  extend->add_option("--threads", ext.threads, "Corpus supplying the task A threads (default: --input)");
  extend->add_option("--config", ext_config, "key=value config file");

  TrainArgs tr;
  auto* train_cmd = app.add_subcommand("train", "Train a joint or single-task model with early stopping");
  train_cmd->add_option("--train", tr.train, "Training corpus (JSONL)");
  train_cmd->add_option("--dev", tr.dev, "Dev corpus (JSONL) used for early stopping");
  train_cmd->add_option("--out_dir", tr.out_dir, "Directory for checkpoints and report.csv");
  train_cmd->add_option("--vectors", tr.vectors, "Pretrained word vectors: token v1 ... v_d per line");
  train_cmd->add_option("--config", tr.config, "key=value config file; command-line flags win");
  train_cmd->add_option("--model", tr.model, "mtl or pair")->capture_default_str();
  train_cmd->add_option("--tasks", tr.tasks, "Active tasks, e.g. ABC, BC, C")->capture_default_str();
  train_cmd->add_option("--stopping", tr.stopping, "global or per_task")->capture_default_str();
  train_cmd->add_option("--min_count", tr.min_count, "Minimum token count for the vocabulary")->capture_default_str();
  auto& tc = tr.train_config;
  train_cmd->add_option("--batch_size", tc.batch_size)->capture_default_str();
  train_cmd->add_option("--patience", tc.patience)->capture_default_str();
  train_cmd->add_option("--max_epochs", tc.max_epochs)->capture_default_str();
  train_cmd->add_option("--dropout_input", tc.dropout_input)->capture_default_str();
  train_cmd->add_option("--dropout_hidden", tc.dropout_hidden)->capture_default_str();
  train_cmd->add_option("--learning_rate", tc.rmsprop.learning_rate)->capture_default_str();
  train_cmd->add_option("--rho", tc.rmsprop.decay, "rmsprop decay")->capture_default_str();
  train_cmd->add_option("--epsilon", tc.rmsprop.epsilon, "rmsprop stabilizer")->capture_default_str();
  train_cmd->add_option("--seed", tc.seed)->capture_default_str();
  add_model_dims(train_cmd, tr.dims);

  EvalArgs ev;
  std::string ev_config;
  auto* evaluate_cmd = app.add_subcommand("evaluate", "Rerank a labeled corpus and report MAP/MRR");
  auto* predict_cmd = app.add_subcommand("predict", "Rerank an unlabeled corpus");
  for (auto* sub : {evaluate_cmd, predict_cmd}) {
    sub->add_option("--checkpoint", ev.checkpoint, "Model checkpoint");
    sub->add_option("--data", ev.data, "Corpus (JSONL)");
    sub->add_option("--task", ev.task, "A, B or C (default: the checkpoint's task, else C)");
    sub->add_option("--alpha", ev.alpha, "Combine as alpha * score + (1 - alpha) / google_rank");
    sub->add_option("--tune_alpha_on", ev.tune_alpha_on, "Dev corpus for choosing alpha");
    sub->add_option("--predictions", ev.predictions, "Output TSV: group doc_id rank score [label]");
    sub->add_option("--config", ev_config, "key=value config file");
  }

  GradArgs ga;
  ga.options.model.feature_maps = 100;
  std::string gc_config;
  auto* grad_cmd = app.add_subcommand("gradcheck", "Finite-difference check of the network gradients (64-bit)");
  grad_cmd->add_option("--probes", ga.options.probes, "Number of random scalar probes")->capture_default_str();
  grad_cmd->add_option("--seed", ga.options.seed)->capture_default_str();
  grad_cmd->add_option("--threshold", ga.threshold, "Maximum allowed relative error")->capture_default_str();
  grad_cmd->add_option("--delta", ga.options.delta, "Finite-difference step")->capture_default_str();
  grad_cmd->add_option("--pair_task", ga.pair_task, "Check the single-task network for A, B or C");
  grad_cmd->add_flag("--frozen_dropout", ga.options.frozen_dropout, "Check in training mode with frozen dropout masks");
  grad_cmd->add_option("--corrupt_conv_grad", ga.options.corrupt_conv_grad,
                       "Scale analytic convolution gradients (negative control)")
      ->group("Testing");
  grad_cmd->add_option("--config", gc_config, "key=value config file");
  add_model_dims(grad_cmd, ga.options.model);

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? kOk : kUsage;
  }

  try {
    if (*extend) {
      apply_config(*extend, ext_config);
      return cmd_extend(ext);
    }
    if (*train_cmd) {
      apply_config(*train_cmd, tr.config);
      return cmd_train(tr);
    }
    if (*evaluate_cmd) {
      apply_config(*evaluate_cmd, ev_config);
      return cmd_score(ev, true);
    }
    if (*predict_cmd) {
      apply_config(*predict_cmd, ev_config);
      return cmd_score(ev, false);
    }
    if (*grad_cmd) {
      apply_config(*grad_cmd, gc_config);
      return cmd_gradcheck(ga);
    }
  } catch (const ConfigError& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return kUsage;
  } catch (const NumericError& e) {
    std::fprintf(stderr, "numeric error: %s\n", e.what());
    return kNumeric;
  } catch (const DataError& e) {
    std::fprintf(stderr, "data error: %s\n", e.what());
    return kData;
  } catch (const std::exception& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return kData;
  }
  return kUsage;
}
