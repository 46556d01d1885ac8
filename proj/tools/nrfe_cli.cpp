// SPDX-License-Identifier: Apache-2.0
//
// nrfe command-line interface.
#include "nrfe/checkpoint.hpp"
#include "nrfe/error.hpp"
#include "nrfe/harness.hpp"
#include "nrfe/llm_gateway.hpp"
#include "nrfe/sr3.hpp"
#include "nrfe/synthetic.hpp"

#include <CLI11.hpp>

#include <filesystem>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

namespace fs = std::filesystem;
using namespace nrfe;

namespace {

/// Config-file path plus `--set key=value` overrides shared by the training
/// subcommands. Dedicated flags are applied afterwards and win.
struct ConfigArgs {
  std::string path;
  std::vector<std::string> overrides;

  void attach(CLI::App* app) {
    app->add_option("--config", path, "Config file (key = value)")->check(CLI::ExistingFile);
    app->add_option("--set", overrides, "Override a config key: --set key=value");
  }

  RunConfig load() const {
    RunConfig cfg = path.empty() ? RunConfig{} : load_config(path);
    for (const auto& kv : overrides) {
      const auto eq = kv.find('=');
      if (eq == std::string::npos) throw InvalidArgument("--set expects key=value, got " + kv);
      apply_setting(cfg, kv.substr(0, eq), kv.substr(eq + 1));
    }
    return cfg;
  }
};

struct CorpusArgs {
  std::string corpus;
  std::string dataset;
  std::string label_scheme;

  void attach(CLI::App* app, bool required) {
    auto* opt = app->add_option("--corpus", corpus, "Corpus JSONL");
    if (required) opt->required();
    app->add_option("--dataset", dataset, "politifact | twitter15 | twitter16 | synthetic");
    app->add_option("--label-scheme", label_scheme, "verbatim | corrected | politifact_binary");
  }

  void apply(RunConfig& cfg) const {
    if (!corpus.empty()) cfg.corpus = corpus;
    if (!dataset.empty()) cfg.dataset = parse_dataset(dataset);
    if (!label_scheme.empty()) apply_setting(cfg, "label_scheme", label_scheme);
  }

  std::vector<NewsItem> load(const RunConfig& cfg) const {
    return load_corpus(cfg.corpus, cfg.dataset, cfg.label_scheme);
  }
};

void print_metrics(const MetricsReport& m) { std::cout << metrics_json(m); }

int run_app(int argc, char** argv) {
  CLI::App app{"nrfe: reasoning-guided fake news detection with a distilled news-only student"};
  app.require_subcommand(1);

  // synth ------------------------------------------------------------------
  auto* synth = app.add_subcommand("synth", "Write a synthetic corpus and reasoning store");
  int synth_n = 200;
  std::uint64_t synth_seed = 1;
  std::string synth_dir = ".";
  synth->add_option("--n", synth_n, "Number of news items")->required();
  synth->add_option("--seed", synth_seed, "Generator seed")->required();
  synth->add_option("--out-dir", synth_dir, "Directory for corpus.jsonl and store.jsonl");

  // generate-reasoning -----------------------------------------------------
  auto* gen = app.add_subcommand("generate-reasoning",
                                 "Generate positive/negative reasoning with rectification");
  CorpusArgs gen_corpus;
  gen_corpus.attach(gen, true);
  std::string gen_store, gen_endpoint, gen_model;
  sr3::Sr3Config gen_cfg;
  gen->add_option("--store", gen_store, "Reasoning store JSONL (appended, resumable)")->required();
  gen->add_option("--endpoint", gen_endpoint, "Chat-completion URL (or NRFE_LLM_ENDPOINT)");
  gen->add_option("--model", gen_model, "Model name (or NRFE_LLM_MODEL)");
  gen->add_option("--m", gen_cfg.polarity_threshold, "Polarity threshold M");
  gen->add_option("--i", gen_cfg.confidence_increment, "Confidence increment I");
  gen->add_option("--max-iter", gen_cfg.max_iter, "Rectification budget per item");
  gen->add_option("--workers", gen_cfg.workers, "Concurrent items");
  gen->add_option("--parse-retries", gen_cfg.parse_retries, "Re-asks on unparseable replies");
  gen->add_flag("--strict-conjunction", gen_cfg.strict_conjunction,
                "Require both positive-reasoning constraints");

  // train-teacher ----------------------------------------------------------
  auto* tt = app.add_subcommand("train-teacher", "Train the teacher on the training split");
  CorpusArgs tt_corpus;
  ConfigArgs tt_config;
  std::string tt_store, tt_out;
  tt_corpus.attach(tt, true);
  tt_config.attach(tt);
  tt->add_option("--store", tt_store, "Reasoning store JSONL")->required();
  tt->add_option("--out", tt_out, "Output directory")->required();

  // distill-student --------------------------------------------------------
  auto* ds = app.add_subcommand("distill-student", "Distil a news-only student from a teacher");
  CorpusArgs ds_corpus;
  ConfigArgs ds_config;
  std::string ds_teacher, ds_store, ds_out, ds_cache;
  ds_corpus.attach(ds, true);
  ds_config.attach(ds);
  ds->add_option("--teacher", ds_teacher, "Teacher checkpoint")->required()->check(CLI::ExistingFile);
  ds->add_option("--store", ds_store, "Reasoning store JSONL (for the distillation targets)")
      ->required();
  ds->add_option("--out", ds_out, "Output directory")->required();
  ds->add_option("--target-cache", ds_cache, "Distillation-target cache file");

  // evaluate ---------------------------------------------------------------
  auto* ev = app.add_subcommand("evaluate", "Evaluate a student checkpoint (news only)");
  CorpusArgs ev_corpus;
  ConfigArgs ev_config;
  std::string ev_student, ev_split = "test", ev_out;
  std::optional<std::uint64_t> ev_split_seed;
  bool ev_synthetic = false;
  ev_corpus.attach(ev, false);
  ev->add_flag("--synthetic", ev_synthetic, "Use the synthetic corpus");
  ev_config.attach(ev);
  ev->add_option("--student", ev_student, "Student checkpoint")->required()->check(CLI::ExistingFile);
  ev->add_option("--split-seed", ev_split_seed, "Split seed");
  ev->add_option("--split", ev_split, "train | test | all");
  ev->add_option("--out", ev_out, "Also write the metrics JSON here");

  // ablate -----------------------------------------------------------------
  auto* ab = app.add_subcommand("ablate", "Run ablation variants on a shared split");
  ConfigArgs ab_config;
  std::vector<std::string> ab_variants;
  bool ab_synthetic = false;
  std::string ab_out = "ablation";
  ab_config.attach(ab);
  ab->add_option("--variants", ab_variants, "full, wo_rc, wo_rxc, wo_xrc, only_rc")
      ->required()
      ->delimiter(',');
  ab->add_flag("--synthetic", ab_synthetic, "Use the synthetic corpus");
  ab->add_option("--out", ab_out, "Output directory");

  // export-features --------------------------------------------------------
  auto* ex = app.add_subcommand("export-features", "Dump last-hidden features as CSV");
  CorpusArgs ex_corpus;
  ConfigArgs ex_config;
  std::string ex_ckpt, ex_which, ex_out, ex_store, ex_split = "test";
  bool ex_synthetic = false;
  ex_corpus.attach(ex, false);
  ex_config.attach(ex);
  ex->add_option("--ckpt", ex_ckpt, "Teacher or student checkpoint")->required()->check(CLI::ExistingFile);
  ex->add_option("--which", ex_which, "teacher_last_hidden | student_f_prime_final")->required();
  ex->add_option("--out", ex_out, "CSV output")->required();
  ex->add_option("--store", ex_store, "Reasoning store (teacher export)");
  ex->add_option("--split", ex_split, "train | test | all");
  ex->add_flag("--synthetic", ex_synthetic, "Use the synthetic corpus");

  // run --------------------------------------------------------------------
  auto* run = app.add_subcommand("run", "Full pipeline: split, teacher, student, evaluation");
  ConfigArgs run_config;
  bool run_synthetic = false;
  bool run_full_scale = false;
  std::string run_out = "run";
  run_config.attach(run);
  run->add_flag("--synthetic", run_synthetic, "Use the synthetic corpus");
  run->add_option("--out", run_out, "Run directory");
  run->add_flag("--full-scale", run_full_scale,
                "Published hyperparameters on a real corpus (see docs/full_scale.md)");

  CLI11_PARSE(app, argc, argv);

  if (synth->parsed()) {
    const SyntheticData data = make_synthetic_corpus(synth_n, synth_seed);
    fs::create_directories(synth_dir);
    write_corpus(fs::path(synth_dir) / "corpus.jsonl", data.items);
    write_store(fs::path(synth_dir) / "store.jsonl", data.store);
    std::cout << "wrote " << data.items.size() << " items and " << data.store.size()
              << " reasoning entries to " << synth_dir << "\n";
    return 0;
  }

  if (gen->parsed()) {
    RunConfig cfg;
    gen_corpus.apply(cfg);
    const auto items = gen_corpus.load(cfg);
    llm::HttpOptions http;
    llm::apply_env_overrides(http);
    if (!gen_endpoint.empty()) http.url = gen_endpoint;
    if (!gen_model.empty()) http.model = gen_model;
    http.max_in_flight = static_cast<std::size_t>(std::max(1, gen_cfg.workers));
    llm::HttpBackend backend(http);
    llm::GatewayOptions gopts;
    gopts.parse_retries = gen_cfg.parse_retries;
    llm::Gateway gateway(backend, gopts);
    const auto summary = sr3::rectify_corpus(items, gateway, gen_cfg, gen_store);
    std::cout << "qualified " << summary.qualified << ", exhausted " << summary.exhausted
              << ", errored " << summary.errored << ", skipped " << summary.skipped << "\n";
    return summary.errored == 0 ? 0 : 2;
  }

  if (tt->parsed()) {
    RunConfig cfg = tt_config.load();
    tt_corpus.apply(cfg);
    cfg.store = tt_store;
    const auto items = tt_corpus.load(cfg);
    const auto train = select_split(items, cfg, SplitPart::Train);
    const auto store = read_store(tt_store);
    const fs::path out(tt_out);
    fs::create_directories(out);
    write_manifest(out / "manifest.cfg", cfg,
                   {hex64(file_hash(cfg.corpus)), hex64(file_hash(tt_store))});
    const Teacher teacher = fit_teacher(cfg, train, store);
    save_teacher(out / "teacher.ckpt", teacher);
    write_curve_csv(out / "teacher_stage1.csv", teacher.curves().stage1);
    write_curve_csv(out / "teacher_stage2.csv", teacher.curves().stage2);
    std::cout << "teacher written to " << (out / "teacher.ckpt").string() << "\n";
    return 0;
  }

  if (ds->parsed()) {
    RunConfig cfg = ds_config.load();
    ds_corpus.apply(cfg);
    cfg.store = ds_store;
    const auto items = ds_corpus.load(cfg);
    const auto train = select_split(items, cfg, SplitPart::Train);
    const Teacher teacher = load_teacher(ds_teacher);
    std::optional<DistillTargets> targets;
    const std::string key = target_cache_key(ds_teacher, cfg.corpus, cfg.temperature);
    if (!ds_cache.empty()) targets = load_targets(ds_cache, key);
    if (!targets) {
      targets = compute_targets(teacher, train, positive_reasoning(read_store(ds_store)),
                                cfg.temperature);
      if (!ds_cache.empty()) save_targets(ds_cache, *targets, key);
    }
    if (!targets->missing.empty()) {
      std::cerr << targets->missing.size()
                << " training items have no positive reasoning; hard-label loss only\n";
    }
    const fs::path out(ds_out);
    fs::create_directories(out);
    write_manifest(out / "manifest.cfg", cfg,
                   {hex64(file_hash(cfg.corpus)), hex64(file_hash(ds_store))});
    std::vector<StudentCurveRow> curve;
    const Student student = fit_student(cfg, teacher, train, *targets, &curve);
    save_student(out / "student.ckpt", student);
    write_student_curve_csv(out / "student.csv", curve);
    std::cout << "student written to " << (out / "student.ckpt").string() << "\n";
    return 0;
  }

  if (ev->parsed()) {
    RunConfig cfg = ev_config.load();
    ev_corpus.apply(cfg);
    if (ev_synthetic) cfg.synthetic = true;
    if (ev_split_seed) cfg.split_seed = *ev_split_seed;
    if (!cfg.synthetic && cfg.corpus.empty()) throw InvalidArgument("evaluate needs --corpus or --synthetic");
    const auto items = cfg.synthetic ? resolve_inputs(cfg).corpus : ev_corpus.load(cfg);
    const auto part = select_split(items, cfg, parse_split_part(ev_split));
    const Student student = load_student(ev_student);
    const MetricsReport m = evaluate_student(student, part);
    if (!ev_out.empty()) write_metrics(ev_out, m);
    print_metrics(m);
    return 0;
  }

  if (ab->parsed()) {
    RunConfig cfg = ab_config.load();
    if (ab_synthetic) cfg.synthetic = true;
    std::vector<Ablation> variants;
    for (const auto& v : ab_variants) variants.push_back(parse_ablation(v));
    const auto rows = run_ablation_suite(cfg, resolve_inputs(cfg), variants, ab_out);
    std::cout << "variant,acc,mac_f1\n";
    for (const auto& r : rows) std::cout << to_string(r.variant) << "," << r.acc << "," << r.mac_f1 << "\n";
    return 0;
  }

  if (ex->parsed()) {
    RunConfig cfg = ex_config.load();
    ex_corpus.apply(cfg);
    if (ex_synthetic) cfg.synthetic = true;
    if (!ex_store.empty()) cfg.store = ex_store;
    std::vector<NewsItem> items;
    std::vector<ReasoningStoreEntry> store;
    if (cfg.synthetic) {
      SyntheticData data = make_synthetic_corpus(cfg.synthetic_n, cfg.synthetic_seed);
      items = std::move(data.items);
      store = std::move(data.store);
    } else {
      if (cfg.corpus.empty()) throw InvalidArgument("export-features needs --corpus or --synthetic");
      items = load_corpus(cfg.corpus, cfg.dataset, cfg.label_scheme);
      if (!cfg.store.empty()) store = read_store(cfg.store);
    }
    const auto part = select_split(items, cfg, parse_split_part(ex_split));
    export_features(ex_ckpt, part, store, parse_feature_source(ex_which), ex_out);
    std::cout << "wrote " << part.size() << " rows to " << ex_out << "\n";
    return 0;
  }

  if (run->parsed()) {
    RunConfig cfg = run_config.load();
    if (run_synthetic) cfg.synthetic = true;
    if (run_full_scale) {
      if (cfg.synthetic) throw InvalidArgument("--full-scale needs a real corpus and store");
      const RunConfig published;
      cfg.learning_rate = published.learning_rate;
      cfg.dropout = published.dropout;
      cfg.stage1_epochs = published.stage1_epochs;
      cfg.stage2_epochs = published.stage2_epochs;
      cfg.student_epochs = published.student_epochs;
      cfg.train_fraction = published.train_fraction;
      std::cerr << "full-scale run: published hyperparameters; see docs/full_scale.md\n";
    }
    const RunSummary s = run_training(cfg, resolve_inputs(cfg), run_out);
    std::cout << "teacher positive-pair acc " << s.teacher_positive_acc << "\n";
    print_metrics(s.student);
    return 0;
  }
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  try {
    return run_app(argc, argv);
  } catch (const nrfe::Error& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
}
