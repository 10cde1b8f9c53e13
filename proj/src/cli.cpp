#include "msnt/cli.hpp"

#include <algorithm>
#include <cstdlib>
#include <fstream>
#include <iostream>
#include <sstream>

#include <CLI11.hpp>
#include <json.hpp>

#include "msnt/augment.hpp"
#include "msnt/checkpoint.hpp"
#include "msnt/config.hpp"
#include "msnt/dataset.hpp"
#include "msnt/distill.hpp"
#include "msnt/ensemble.hpp"
#include "msnt/errors.hpp"
#include "msnt/finetune.hpp"
#include "msnt/metrics.hpp"
#include "msnt/pretrain.hpp"
#include "msnt/report.hpp"
#include "msnt/synthetic.hpp"
#include "msnt/tokenizer.hpp"

#ifndef MSNT_VERSION
#define MSNT_VERSION "0.0.0"
#endif
#ifndef MSNT_GIT_DESCRIBE
#define MSNT_GIT_DESCRIBE "unknown"
#endif

namespace fs = std::filesystem;

namespace msnt {

std::string version_string() { return std::string(MSNT_VERSION) + " (" + MSNT_GIT_DESCRIBE + ")"; }

namespace {

// ---- helpers ---------------------------------------------------------------

void write_file(const fs::path& path, const std::string& contents) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot write " + path.string());
  out << contents;
  if (!out) throw std::runtime_error("write failed: " + path.string());
}

std::string dump(const nlohmann::ordered_json& j) { return j.dump(2) + "\n"; }

fs::path prepare_out(const std::string& dir) {
  fs::path out(dir);
  fs::create_directories(out);
  return out;
}

std::string stem_of(const std::string& path) { return fs::path(path).stem().string(); }

// Records the options a subcommand ran with. No timestamps, so reruns with
// the same inputs produce the same log.
void write_run_log(const fs::path& out, const CLI::App& sub, std::uint64_t seed,
                   const std::string& suffix) {
  std::ostringstream log;
  log << "command=" << sub.get_name() << '\n';
  log << "version=" << version_string() << '\n';
  log << "seed=" << seed << '\n';
  for (const CLI::Option* opt : sub.get_options()) {
    const std::string name = opt->get_single_name();
    if (name.empty() || name == "help" || name == "seed") continue;
    std::string value;
    if (opt->count() > 0) {
      const auto& results = opt->results();
      for (std::size_t i = 0; i < results.size(); ++i) value += (i ? "," : "") + results[i];
      if (results.empty() || opt->get_type_size() == 0) value = "true";
    } else {
      value = opt->get_default_str();
    }
    log << name << '=' << value << '\n';
  }
  const std::string file = sub.get_name() + (suffix.empty() ? "" : "." + suffix) + ".log";
  write_file(out / file, log.str());
}

std::uint64_t effective_seed(std::uint64_t flag) {
  Config c;
  c.set("seed", std::to_string(flag));
  return resolve_seed(c);
}

Vocab load_vocab(const std::string& path) { return Vocab::load(path); }

SentimentModel load_model(const std::string& path, const Vocab& vocab) {
  return load_checkpoint(path, vocab.hash());
}

void print_warnings(const EvalReport& r) {
  if (r.zero_division) {
    std::cerr << "warning: " << (r.model.empty() ? "model" : r.model)
              << ": a precision or recall denominator was zero; that metric is reported as 0\n";
  }
}

void save_eval(const fs::path& out, const EvalReport& r) {
  print_warnings(r);
  write_file(out / (r.model + ".eval.json"), dump(to_json(r)));
}

EncoderConfig encoder_from(std::size_t layers, std::size_t hidden, std::size_t heads,
                           std::size_t ff, std::size_t max_len, double dropout,
                           std::size_t embedding, bool share, std::size_t vocab_size) {
  EncoderConfig c;
  c.num_layers = layers;
  c.hidden_size = hidden;
  c.num_heads = heads;
  c.ff_size = ff;
  c.max_seq_len = max_len;
  c.dropout_rate = dropout;
  c.embedding_size = embedding;
  c.share_parameters = share;
  c.vocab_size = vocab_size;
  return c;
}

// ---- subcommands -----------------------------------------------------------

struct CommonArgs {
  std::string out;
  std::uint64_t seed = 0;
};

void add_common(CLI::App* sub, CommonArgs& a) {
  sub->add_option("--out", a.out, "Output directory")->required();
  sub->add_option("--seed", a.seed, "Random seed (MSNT_SEED overrides)");
}

struct SyntheticArgs {
  CommonArgs common;
  std::size_t train = 3000, test = 600, validation = 0, documents = 600;
  double noise = 0.05;
};

int run_synthetic(const CLI::App& sub, const SyntheticArgs& a) {
  const fs::path out = prepare_out(a.common.out);
  const std::uint64_t seed = effective_seed(a.common.seed);
  const DatasetSplit split = generate_synthetic(SyntheticOptions{.num_train = a.train,
                                                                 .num_test = a.test,
                                                                 .num_validation = a.validation,
                                                                 .noise = a.noise,
                                                                 .seed = seed});
  save_jsonl(out / "train.jsonl", split.train);
  save_jsonl(out / "valid.jsonl", split.validation);
  save_jsonl(out / "test.jsonl", split.test);
  std::string corpus;
  for (const Document& d : generate_synthetic_corpus(a.documents, seed)) {
    if (!corpus.empty()) corpus += '\n';
    for (const std::string& s : d.sentences) corpus += s + '\n';
  }
  write_file(out / "corpus.txt", corpus);
  write_run_log(out, sub, seed, "");
  std::cout << "train " << split.train.size() << ", validation " << split.validation.size()
            << ", test " << split.test.size() << '\n';
  return kExitOk;
}

struct VocabArgs {
  CommonArgs common;
  std::vector<std::string> inputs;
  std::size_t max_size = 1000, min_frequency = 1;
};

int run_build_vocab(const CLI::App& sub, const VocabArgs& a) {
  const fs::path out = prepare_out(a.common.out);
  std::vector<std::string> lines;
  for (const std::string& input : a.inputs) {
    const std::string ext = fs::path(input).extension().string();
    if (ext == ".jsonl" || ext == ".csv") {
      for (LabeledExample& ex : load_dataset(input)) lines.push_back(std::move(ex.text));
    } else {
      for (std::string& s : corpus_sentences(load_corpus(input))) lines.push_back(std::move(s));
    }
  }
  const Vocab vocab = build_vocab(lines, a.max_size, a.min_frequency);
  vocab.save(out / "vocab.txt");
  write_run_log(out, sub, effective_seed(a.common.seed), "");
  std::cout << "vocabulary size " << vocab.size() << '\n';
  return kExitOk;
}

struct PretrainArgs {
  CommonArgs common;
  std::string variant, vocab, corpus, name;
  std::size_t steps = 300, batch_size = 16, layers = 2, hidden = 64, heads = 4, ff_size = 256,
              max_len = 64, embedding_size = 0;
  double learning_rate = 1e-3, clip_norm = 1.0, dropout = 0.1, mask_rate = 0.15;
};

int run_pretrain(const CLI::App& sub, const PretrainArgs& a) {
  const auto variant_name = parse_variant(a.variant);
  if (!variant_name) throw ConfigError("unknown variant '" + a.variant + "'");
  const fs::path out = prepare_out(a.common.out);
  const std::uint64_t seed = effective_seed(a.common.seed);
  const Vocab vocab = load_vocab(a.vocab);
  const Corpus corpus = load_corpus(a.corpus);
  const VariantSpec variant = VariantSpec::of(*variant_name);
  const EncoderConfig config =
      encoder_from(a.layers, a.hidden, a.heads, a.ff_size, a.max_len, a.dropout, a.embedding_size,
                   variant.share_parameters, vocab.size());
  const auto tag = static_cast<std::uint64_t>(*variant_name);
  SentimentModel model = init_model(config, variant, derive_seed(seed, 0x696e6974, tag));
  model.vocab_hash = vocab.hash();
  MaskingConfig masking;
  masking.mask_rate = a.mask_rate;
  masking.mode = variant.masking_mode;
  masking.seed = derive_seed(seed, 0x6d61736b, tag);
  const PretrainResult r =
      pretrain(model, vocab, corpus, masking,
               PretrainOptions{.steps = a.steps,
                               .batch_size = a.batch_size,
                               .max_len = a.max_len,
                               .optimizer = {.learning_rate = a.learning_rate,
                                             .clip_norm = a.clip_norm}});
  const std::string name = a.name.empty() ? std::string(to_string(*variant_name)) : a.name;
  save_checkpoint(model, out / (name + ".pretrained.msnt"));
  std::ostringstream trace;
  for (std::size_t i = 0; i < r.loss_trace.size(); ++i) {
    nlohmann::ordered_json j;
    j["step"] = i + 1;
    j["loss"] = r.loss_trace[i];
    j["mlm_loss"] = r.mlm_loss_trace[i];
    j["pair_loss"] = r.pair_loss_trace[i];
    trace << j.dump() << '\n';
  }
  write_file(out / (name + ".pretrain.jsonl"), trace.str());
  write_run_log(out, sub, seed, name);
  if (!r.loss_trace.empty()) {
    std::cout << name << ": " << r.loss_trace.size() << " steps, final loss "
              << r.loss_trace.back() << '\n';
  }
  return kExitOk;
}

struct FinetuneArgs {
  CommonArgs common;
  std::string model, vocab, train, valid, test, name;
  std::size_t epochs = 4, batch_size = 16, patience = 3, max_len = 64;
  double learning_rate = 5e-4, clip_norm = 1.0, min_delta = 1e-4;
};

int run_finetune(const CLI::App& sub, const FinetuneArgs& a) {
  const fs::path out = prepare_out(a.common.out);
  const std::uint64_t seed = effective_seed(a.common.seed);
  const Vocab vocab = load_vocab(a.vocab);
  const SentimentModel pretrained = load_model(a.model, vocab);
  const auto train = load_dataset(a.train);
  const auto valid = load_dataset(a.valid);
  std::string name = a.name;
  if (name.empty()) {
    name = stem_of(a.model);
    if (auto dot = name.find('.'); dot != std::string::npos) name.resize(dot);
  }
  FinetuneConfig cfg;
  cfg.epochs = a.epochs;
  cfg.batch_size = a.batch_size;
  cfg.learning_rate = a.learning_rate;
  cfg.clip_norm = a.clip_norm;
  cfg.max_len = a.max_len;
  cfg.early_stopping = {a.patience, a.min_delta};
  cfg.seed = derive_seed(seed, 0x66696e65, static_cast<std::uint64_t>(pretrained.variant.name));
  const FinetuneResult r = finetune(pretrained, vocab, train, valid, cfg);
  save_checkpoint(r.model, out / (name + ".msnt"));
  std::ostringstream history;
  write_history_jsonl(history, r.history);
  write_file(out / (name + ".history.jsonl"), history.str());
  std::cout << name << ": best epoch " << r.best_epoch << " of " << r.history.size()
            << ", validation macro-F1 " << format2(r.history[r.best_epoch - 1].valid_macro_f1)
            << '\n';
  if (!a.test.empty()) {
    const auto test = load_dataset(a.test);
    const EvalReport report = evaluate_model(r.model, vocab, test, a.max_len, name);
    save_eval(out, report);
    std::cout << name << ": test macro-F1 " << format2(report.macro.f1) << '\n';
  }
  write_run_log(out, sub, seed, name);
  return kExitOk;
}

struct EvaluateArgs {
  CommonArgs common;
  std::string data, model, vocab, predictions, name;
  std::size_t max_len = 64;
};

int run_evaluate(const CLI::App& sub, const EvaluateArgs& a) {
  const fs::path out = prepare_out(a.common.out);
  const auto truth = load_dataset(a.data);
  EvalReport report;
  if (!a.predictions.empty()) {
    const auto predicted = load_dataset(a.predictions);
    if (predicted.size() != truth.size()) {
      throw DataError("predictions file has " + std::to_string(predicted.size()) +
                      " records but the truth file has " + std::to_string(truth.size()));
    }
    report = compute_metrics(labels_of(truth), labels_of(predicted),
                             a.name.empty() ? stem_of(a.predictions) : a.name);
  } else {
    if (a.model.empty() || a.vocab.empty()) {
      throw ConfigError("evaluate needs --predictions or both --model and --vocab");
    }
    const Vocab vocab = load_vocab(a.vocab);
    const SentimentModel model = load_model(a.model, vocab);
    std::string name = a.name.empty() ? stem_of(a.model) : a.name;
    report = evaluate_model(model, vocab, truth, a.max_len, name);
  }
  save_eval(out, report);
  std::cout << render_table(stem_of(a.data), std::span<const EvalReport>(&report, 1));
  write_run_log(out, sub, effective_seed(a.common.seed), report.model);
  return kExitOk;
}

std::vector<std::string> member_names(const std::vector<std::string>& models,
                                      const std::vector<std::string>& names) {
  if (!names.empty() && names.size() != models.size()) {
    throw ConfigError("give one --name per --model");
  }
  if (!names.empty()) return names;
  std::vector<std::string> out;
  for (const std::string& m : models) out.push_back(stem_of(m));
  return out;
}

struct EnsembleArgs {
  CommonArgs common;
  std::vector<std::string> models, names;
  std::vector<double> weights;
  std::string weighting = "equal", vocab, data, valid, name = "ensemble";
  std::size_t max_len = 64;
};

int run_ensemble(const CLI::App& sub, const EnsembleArgs& a) {
  const fs::path out = prepare_out(a.common.out);
  const Vocab vocab = load_vocab(a.vocab);
  const auto names = member_names(a.models, a.names);
  std::vector<SentimentModel> models;
  for (const std::string& m : a.models) models.push_back(load_model(m, vocab));

  std::vector<double> weights(models.size(), 1.0);
  if (!a.weights.empty()) {
    if (a.weights.size() != models.size()) throw ConfigError("give one --weight per --model");
    weights = a.weights;
  } else if (a.weighting == "f1") {
    if (a.valid.empty()) throw ConfigError("--weighting f1 needs --valid");
    const auto valid = load_dataset(a.valid);
    std::vector<double> f1;
    for (const SentimentModel& m : models) {
      f1.push_back(evaluate_model(m, vocab, valid, a.max_len).macro.f1);
    }
    weights = f1_proportional_weights(f1);
  } else if (a.weighting != "equal") {
    throw ConfigError("--weighting must be 'equal' or 'f1'");
  }

  std::vector<EnsembleMember> members;
  for (std::size_t i = 0; i < models.size(); ++i) members.push_back({names[i], &models[i], weights[i]});
  const EnsembleSpec spec(members);
  const auto data = load_dataset(a.data);
  const auto encoded = encode_examples(vocab, data, a.max_len);
  const std::vector<Vote> votes = ensemble_predict(spec, encoded);
  std::vector<Sentiment> predicted;
  for (const Vote& v : votes) predicted.push_back(v.label);
  const EvalReport report = compute_metrics(labels_of(data), predicted, a.name);
  save_eval(out, report);

  std::ostringstream preds;
  write_predictions_jsonl(preds, data, votes);
  write_file(out / (a.name + ".predictions.jsonl"), preds.str());
  nlohmann::ordered_json w;
  for (const EnsembleMember& m : spec.members()) w[m.name] = m.weight;
  write_file(out / (a.name + ".weights.json"), dump(w));
  write_run_log(out, sub, effective_seed(a.common.seed), a.name);
  std::cout << a.name << ": test macro-F1 " << format2(report.macro.f1) << '\n';
  return kExitOk;
}

struct AgreementArgs {
  CommonArgs common;
  std::vector<std::string> models, names;
  std::string vocab, data;
  std::size_t max_len = 64;
};

int run_agreement(const CLI::App& sub, const AgreementArgs& a) {
  const fs::path out = prepare_out(a.common.out);
  const Vocab vocab = load_vocab(a.vocab);
  const auto names = member_names(a.models, a.names);
  std::vector<SentimentModel> models;
  for (const std::string& m : a.models) models.push_back(load_model(m, vocab));
  std::vector<EnsembleMember> members;
  for (std::size_t i = 0; i < models.size(); ++i) members.push_back({names[i], &models[i], 1.0});
  const auto data = load_dataset(a.data);
  const AgreementMatrix m = agreement_analysis(members, encode_examples(vocab, data, a.max_len));

  std::ostringstream agreement, correlation;
  write_agreement_csv(agreement, m);
  write_correlation_csv(correlation, m);
  write_file(out / "agreement.csv", agreement.str());
  write_file(out / "correlation.csv", correlation.str());
  nlohmann::ordered_json j;
  j["models"] = m.names;
  j["agreement"] = m.agreement;
  nlohmann::ordered_json corr = nlohmann::ordered_json::array();
  for (const auto& row : m.correlation) {
    nlohmann::ordered_json r = nlohmann::ordered_json::array();
    for (const auto& v : row) r.push_back(v ? nlohmann::ordered_json(*v) : nlohmann::ordered_json());
    corr.push_back(r);
  }
  j["correlation"] = corr;
  write_file(out / "agreement.json", dump(j));
  write_run_log(out, sub, effective_seed(a.common.seed), "");
  std::cout << agreement.str();
  return kExitOk;
}

struct DistillArgs {
  CommonArgs common;
  std::string teacher, vocab, train, valid, test, name = "student";
  std::size_t layers = 0, epochs = 4, batch_size = 16, patience = 3, max_len = 64;
  double temperature = 2.0, alpha = 0.5, learning_rate = 5e-4, clip_norm = 1.0, min_delta = 1e-4;
  bool random_init = false;
};

int run_distill(const CLI::App& sub, const DistillArgs& a) {
  const fs::path out = prepare_out(a.common.out);
  const std::uint64_t seed = effective_seed(a.common.seed);
  const Vocab vocab = load_vocab(a.vocab);
  SentimentModel teacher = load_model(a.teacher, vocab);
  teacher.set_trainable(false);
  const auto train = load_dataset(a.train);
  const auto valid = load_dataset(a.valid);
  const auto test = load_dataset(a.test);
  DistillConfig cfg;
  cfg.temperature = a.temperature;
  cfg.alpha = a.alpha;
  if (a.layers != 0) {
    EncoderConfig student = teacher.config;
    student.num_layers = a.layers;
    cfg.student = student;
  }
  cfg.epochs = a.epochs;
  cfg.batch_size = a.batch_size;
  cfg.learning_rate = a.learning_rate;
  cfg.clip_norm = a.clip_norm;
  cfg.max_len = a.max_len;
  cfg.early_stopping = {a.patience, a.min_delta};
  cfg.init_from_teacher = !a.random_init;
  cfg.seed = derive_seed(seed, 0x64697374);
  const DistillResult r = distill(teacher, vocab, train, valid, test, cfg);
  save_checkpoint(r.student, out / (a.name + ".msnt"));
  std::ostringstream history;
  write_history_jsonl(history, r.history);
  write_file(out / (a.name + ".history.jsonl"), history.str());
  write_file(out / "compression.json", dump(to_json(r.report)));
  save_eval(out, evaluate_model(r.student, vocab, test, a.max_len, a.name));
  write_run_log(out, sub, seed, a.name);
  std::cout << a.name << ": size reduction " << format2(r.report.size_reduction)
            << ", retention " << format2(r.report.retention) << '\n';
  return kExitOk;
}

struct AugmentArgs {
  CommonArgs common;
  std::string data, strategy = "thesaurus", thesaurus, model, vocab, dictionary, pivot = "es",
                    source_language = "en";
  std::size_t multiplier = 1, max_substitutions = 3;
  double probability = 0.1;
};

int run_augment(const CLI::App& sub, const AugmentArgs& a) {
  const auto strategy = parse_strategy(a.strategy);
  if (!strategy) throw ConfigError("unknown strategy '" + a.strategy + "'");
  const fs::path out = prepare_out(a.common.out);
  const std::uint64_t seed = effective_seed(a.common.seed);
  AugmentPolicy policy{.strategy = *strategy,
                       .probability = a.probability,
                       .max_substitutions = a.max_substitutions,
                       .seed = seed};
  std::optional<Thesaurus> thesaurus;
  std::optional<Vocab> vocab;
  std::optional<SentimentModel> model;
  std::optional<StubTranslator> translator;
  AugmentResources res;
  res.pivot_language = a.pivot;
  res.source_language = a.source_language;
  if (!a.thesaurus.empty()) {
    thesaurus = Thesaurus::load(a.thesaurus);
    res.thesaurus = &*thesaurus;
  }
  if (!a.vocab.empty()) {
    vocab = load_vocab(a.vocab);
    res.vocab = &*vocab;
    if (!a.model.empty()) {
      model = load_model(a.model, *vocab);
      res.model = &*model;
    }
  }
  if (!a.dictionary.empty()) {
    translator = StubTranslator::load(a.dictionary);
    res.translator = &*translator;
  }
  const auto data = load_dataset(a.data);
  const AugmentSummary s = augment_dataset(data, policy, res, a.multiplier);
  for (const std::string& e : s.error_messages) std::cerr << "skipped: " << e << '\n';
  save_jsonl(out / "augmented.jsonl", s.data);
  nlohmann::ordered_json j;
  j["input"] = data.size();
  j["output"] = s.data.size();
  j["added"] = s.added;
  j["noops"] = s.noops;
  j["duplicates"] = s.duplicates;
  j["errors"] = s.errors;
  write_file(out / "augment.summary.json", dump(j));
  write_run_log(out, sub, seed, "");
  std::cout << "augmented " << data.size() << " -> " << s.data.size() << " examples\n";
  return kExitOk;
}

struct ReportArgs {
  CommonArgs common;
  std::vector<std::string> evals;
  std::string dataset = "synthetic";
};

int run_report(const CLI::App& sub, const ReportArgs& a) {
  const fs::path out = prepare_out(a.common.out);
  std::vector<EvalReport> reports;
  nlohmann::ordered_json all = nlohmann::ordered_json::array();
  for (const std::string& path : a.evals) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw DataError("cannot open " + path);
    nlohmann::json j;
    try {
      j = nlohmann::json::parse(in);
      reports.push_back(eval_report_from_json(j));
    } catch (const nlohmann::json::exception& e) {
      throw DataError(path + ": " + e.what());
    }
    all.push_back(to_json(reports.back()));
  }
  const std::string table = render_table(a.dataset, reports);
  write_file(out / "report.txt", table);
  nlohmann::ordered_json doc;
  doc["dataset"] = a.dataset;
  doc["models"] = all;
  write_file(out / "report.json", dump(doc));
  write_run_log(out, sub, effective_seed(a.common.seed), "");
  std::cout << table;
  return kExitOk;
}

// ---- config-file merging ---------------------------------------------------

bool given_on_command_line(const std::vector<std::string>& args, const std::string& flag) {
  return std::any_of(args.begin(), args.end(), [&](const std::string& s) {
    return s == flag || s.rfind(flag + "=", 0) == 0;
  });
}

// Appends `--key value` for config keys the subcommand knows and the command
// line did not set.
std::vector<std::string> merge_config(std::vector<std::string> args, CLI::App& app) {
  std::string config_path;
  for (std::size_t i = 1; i < args.size(); ++i) {
    if (args[i] == "--config" && i + 1 < args.size()) {
      config_path = args[i + 1];
      args.erase(args.begin() + static_cast<std::ptrdiff_t>(i),
                 args.begin() + static_cast<std::ptrdiff_t>(i) + 2);
      break;
    }
    if (args[i].rfind("--config=", 0) == 0) {
      config_path = args[i].substr(9);
      args.erase(args.begin() + static_cast<std::ptrdiff_t>(i));
      break;
    }
  }
  if (config_path.empty() || args.size() < 2) return args;
  CLI::App* sub = nullptr;
  try {
    sub = app.get_subcommand(args[1]);
  } catch (const CLI::OptionNotFound&) {
    return args;
  }
  const Config config = Config::load(config_path);
  for (const auto& [key, value] : config.values()) {
    const std::string flag = "--" + key;
    const CLI::Option* opt = sub->get_option_no_throw(flag);
    if (opt == nullptr || given_on_command_line(args, flag)) continue;
    if (opt->get_type_size() == 0) {
      if (config.get_bool(key, false)) args.push_back(flag);
    } else {
      args.push_back(flag);
      args.push_back(value);
    }
  }
  return args;
}

}  // namespace

int run_cli(int argc, char** argv) {
  CLI::App app{"Mini transformer sentiment pipeline: pretrain, fine-tune, ensemble, distill"};
  app.name("msnt");
  app.option_defaults()->always_capture_default();
  app.set_version_flag("--version", version_string());
  app.require_subcommand(1);
  app.footer("Options may also come from --config FILE (key=value lines named after the long "
             "options). MSNT_SEED overrides every --seed.");

  SyntheticArgs synth;
  auto* s_synth = app.add_subcommand("generate-synthetic", "Write a templated labeled dataset and pretraining corpus");
  add_common(s_synth, synth.common);
  s_synth->add_option("--train", synth.train, "Training examples");
  s_synth->add_option("--test", synth.test, "Test examples");
  s_synth->add_option("--validation", synth.validation, "Validation examples (0: train * 0.07 / 0.63)");
  s_synth->add_option("--noise", synth.noise, "Share of sentences with another class's phrase");
  s_synth->add_option("--documents", synth.documents, "Pretraining corpus documents");

  VocabArgs voc;
  auto* s_vocab = app.add_subcommand("build-vocab", "Build a subword vocabulary");
  add_common(s_vocab, voc.common);
  s_vocab->add_option("--input", voc.inputs, "Corpus (.txt) or dataset (.jsonl/.csv) files")
      ->required()
      ->delimiter(',');
  s_vocab->add_option("--max-size", voc.max_size, "Maximum vocabulary size");
  s_vocab->add_option("--min-frequency", voc.min_frequency, "Minimum count for whole words");

  PretrainArgs pre;
  auto* s_pre = app.add_subcommand("pretrain", "Pretrain one variant from scratch");
  add_common(s_pre, pre.common);
  s_pre->add_option("--variant", pre.variant, "bertlike, albertlike or robertalike")->required();
  s_pre->add_option("--vocab", pre.vocab, "Vocabulary file")->required();
  s_pre->add_option("--corpus", pre.corpus, "Corpus: one sentence per line, blank line between documents")->required();
  s_pre->add_option("--name", pre.name, "Output name (default: the variant)");
  s_pre->add_option("--steps", pre.steps, "Optimizer steps");
  s_pre->add_option("--batch-size", pre.batch_size, "Sequences per step");
  s_pre->add_option("--learning-rate", pre.learning_rate, "Adam learning rate");
  s_pre->add_option("--clip-norm", pre.clip_norm, "Global gradient-norm clip (0: off)");
  s_pre->add_option("--layers", pre.layers, "Encoder layers");
  s_pre->add_option("--hidden", pre.hidden, "Hidden size");
  s_pre->add_option("--heads", pre.heads, "Attention heads");
  s_pre->add_option("--ff-size", pre.ff_size, "Feed-forward width");
  s_pre->add_option("--max-len", pre.max_len, "Maximum sequence length");
  s_pre->add_option("--dropout", pre.dropout, "Dropout rate");
  s_pre->add_option("--embedding-size", pre.embedding_size, "Token embedding width (0: hidden size)");
  s_pre->add_option("--mask-rate", pre.mask_rate, "Share of tokens masked");

  FinetuneArgs ft;
  auto* s_ft = app.add_subcommand("finetune", "Fine-tune a pretrained checkpoint for 3-class sentiment");
  add_common(s_ft, ft.common);
  s_ft->add_option("--model", ft.model, "Pretrained checkpoint")->required();
  s_ft->add_option("--vocab", ft.vocab, "Vocabulary file")->required();
  s_ft->add_option("--train", ft.train, "Training data")->required();
  s_ft->add_option("--valid", ft.valid, "Validation data")->required();
  s_ft->add_option("--test", ft.test, "Optional test data to evaluate afterwards");
  s_ft->add_option("--name", ft.name, "Output name (default: checkpoint stem)");
  s_ft->add_option("--epochs", ft.epochs, "Maximum epochs");
  s_ft->add_option("--batch-size", ft.batch_size, "Examples per step");
  s_ft->add_option("--learning-rate", ft.learning_rate, "Adam learning rate");
  s_ft->add_option("--clip-norm", ft.clip_norm, "Global gradient-norm clip (0: off)");
  s_ft->add_option("--patience", ft.patience, "Evaluations without improvement before stopping");
  s_ft->add_option("--min-delta", ft.min_delta, "Smallest macro-F1 gain that counts");
  s_ft->add_option("--max-len", ft.max_len, "Maximum sequence length");

  EvaluateArgs ev;
  auto* s_ev = app.add_subcommand("evaluate", "Per-class precision, recall and F1");
  add_common(s_ev, ev.common);
  s_ev->add_option("--data", ev.data, "Labeled data (truth)")->required();
  s_ev->add_option("--model", ev.model, "Checkpoint to evaluate");
  s_ev->add_option("--vocab", ev.vocab, "Vocabulary file");
  s_ev->add_option("--predictions", ev.predictions, "Predicted labels in dataset format, instead of a model");
  s_ev->add_option("--name", ev.name, "Report name");
  s_ev->add_option("--max-len", ev.max_len, "Maximum sequence length");

  EnsembleArgs en;
  auto* s_en = app.add_subcommand("ensemble", "Soft-voting ensemble over fine-tuned checkpoints");
  add_common(s_en, en.common);
  s_en->add_option("--model", en.models, "Member checkpoints")->required()->delimiter(',');
  s_en->add_option("--name", en.names, "Member names")->delimiter(',');
  s_en->add_option("--weight", en.weights, "Member weights (normalized)")->delimiter(',');
  s_en->add_option("--weighting", en.weighting, "equal or f1 (validation macro-F1)");
  s_en->add_option("--vocab", en.vocab, "Vocabulary file")->required();
  s_en->add_option("--data", en.data, "Data to predict and score")->required();
  s_en->add_option("--valid", en.valid, "Validation data for f1 weighting");
  s_en->add_option("--output-name", en.name, "Report name");
  s_en->add_option("--max-len", en.max_len, "Maximum sequence length");

  AgreementArgs ag;
  auto* s_ag = app.add_subcommand("agreement", "Pairwise agreement and one-hot correlation between models");
  add_common(s_ag, ag.common);
  s_ag->add_option("--model", ag.models, "Checkpoints")->required()->delimiter(',');
  s_ag->add_option("--name", ag.names, "Model names")->delimiter(',');
  s_ag->add_option("--vocab", ag.vocab, "Vocabulary file")->required();
  s_ag->add_option("--data", ag.data, "Shared data set")->required();
  s_ag->add_option("--max-len", ag.max_len, "Maximum sequence length");

  DistillArgs di;
  auto* s_di = app.add_subcommand("distill", "Distill a smaller student from a fine-tuned teacher");
  add_common(s_di, di.common);
  s_di->add_option("--teacher", di.teacher, "Fine-tuned teacher checkpoint")->required();
  s_di->add_option("--vocab", di.vocab, "Vocabulary file")->required();
  s_di->add_option("--train", di.train, "Training data")->required();
  s_di->add_option("--valid", di.valid, "Validation data")->required();
  s_di->add_option("--test", di.test, "Test data for the compression report")->required();
  s_di->add_option("--name", di.name, "Student name");
  s_di->add_option("--layers", di.layers, "Student layers (0: half the teacher's)");
  s_di->add_option("--temperature", di.temperature, "Softmax temperature");
  s_di->add_option("--alpha", di.alpha, "Weight of the soft-target loss");
  s_di->add_option("--epochs", di.epochs, "Maximum epochs");
  s_di->add_option("--batch-size", di.batch_size, "Examples per step");
  s_di->add_option("--learning-rate", di.learning_rate, "Adam learning rate");
  s_di->add_option("--clip-norm", di.clip_norm, "Global gradient-norm clip (0: off)");
  s_di->add_option("--patience", di.patience, "Evaluations without improvement before stopping");
  s_di->add_option("--min-delta", di.min_delta, "Smallest macro-F1 gain that counts");
  s_di->add_option("--max-len", di.max_len, "Maximum sequence length");
  s_di->add_flag("--random-init", di.random_init, "Initialize the student randomly");

  AugmentArgs au;
  auto* s_au = app.add_subcommand("augment", "Expand a dataset by word substitution or back translation");
  add_common(s_au, au.common);
  s_au->add_option("--data", au.data, "Labeled data")->required();
  s_au->add_option("--strategy", au.strategy, "thesaurus, embedding or backtranslate");
  s_au->add_option("--multiplier", au.multiplier, "Variants attempted per example");
  s_au->add_option("--probability", au.probability, "Per-word substitution probability");
  s_au->add_option("--max-substitutions", au.max_substitutions, "Cap per sentence");
  s_au->add_option("--thesaurus", au.thesaurus, "JSON map word -> [synonyms]");
  s_au->add_option("--model", au.model, "Checkpoint whose token embeddings pick neighbors");
  s_au->add_option("--vocab", au.vocab, "Vocabulary file");
  s_au->add_option("--dictionary", au.dictionary, "Stub translator JSON: {lang: {word: word}}");
  s_au->add_option("--pivot", au.pivot, "Pivot language");
  s_au->add_option("--source-language", au.source_language, "Language translated back into");

  ReportArgs rep;
  auto* s_rep = app.add_subcommand("report", "Render evaluation reports as a table");
  add_common(s_rep, rep.common);
  s_rep->add_option("--eval", rep.evals, "Evaluation JSON files")->required()->delimiter(',');
  s_rep->add_option("--dataset", rep.dataset, "Dataset name for the table heading");

  if (argc < 2) {
    std::cerr << app.help();
    return kExitUsage;
  }

  try {
    std::vector<std::string> args(argv, argv + argc);
    args = merge_config(std::move(args), app);
    std::vector<char*> cargs;
    for (std::string& s : args) cargs.push_back(s.data());
    app.parse(static_cast<int>(cargs.size()), cargs.data());
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForVersion& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return kExitUsage;
  } catch (const ConfigError& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kExitUsage;
  }

  try {
    if (s_synth->parsed()) return run_synthetic(*s_synth, synth);
    if (s_vocab->parsed()) return run_build_vocab(*s_vocab, voc);
    if (s_pre->parsed()) return run_pretrain(*s_pre, pre);
    if (s_ft->parsed()) return run_finetune(*s_ft, ft);
    if (s_ev->parsed()) return run_evaluate(*s_ev, ev);
    if (s_en->parsed()) return run_ensemble(*s_en, en);
    if (s_ag->parsed()) return run_agreement(*s_ag, ag);
    if (s_di->parsed()) return run_distill(*s_di, di);
    if (s_au->parsed()) return run_augment(*s_au, au);
    if (s_rep->parsed()) return run_report(*s_rep, rep);
  } catch (const ConfigError& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kExitUsage;
  } catch (const DataError& e) {
    std::cerr << "data error: " << e.what() << '\n';
    return kExitData;
  } catch (const CheckpointError& e) {
    std::cerr << "checkpoint error: " << e.what() << '\n';
    return kExitData;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kExitRuntime;
  }
  std::cerr << app.help();
  return kExitUsage;
}

}  // namespace msnt
