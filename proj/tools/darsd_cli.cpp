// darsd: synthetic data, training, evaluation, ablation and self-checks.

#include <chrono>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <string>

#include <CLI11.hpp>
#include <nlohmann/json.hpp>

#include "darsd/darsd.hpp"

namespace fs = std::filesystem;
using namespace darsd;

namespace {

struct CommonFlags {
  std::string config;
  std::optional<std::uint64_t> seed;
  std::string out = "out";
  std::string mode;
  std::string schedule;
};

void add_common(CLI::App* cmd, CommonFlags& f, bool with_out = true) {
  cmd->add_option("--config", f.config, "key = value config file")->check(CLI::ExistingFile);
  cmd->add_option("--seed", f.seed, "random seed");
  if (with_out) cmd->add_option("--out", f.out, "output directory");
  cmd->add_option("--mode", f.mode, "confidence partition")
      ->check(CLI::IsMember({"quantile", "threshold"}));
  cmd->add_option("--schedule", f.schedule, "confidence-ratio schedule")
      ->check(CLI::IsMember({"linear", "stepwise"}));
}

struct Settings {
  RunConfig run;
  SyntheticShiftConfig synth;
};

// Keys prefixed "synth." configure the generator; the rest the run.
Settings load_settings(const CommonFlags& f) {
  Settings s;
  if (!f.config.empty()) {
    const auto kv = KeyValueFile::load(f.config);
    s.run.apply(kv.excluding("synth."));
    s.synth.apply(kv.section("synth."));
  }
  if (f.seed) s.run.seed = *f.seed;
  if (!f.mode.empty()) s.run.partition = RunConfig::parse_partition(f.mode);
  if (!f.schedule.empty()) s.run.schedule = RunConfig::parse_schedule(f.schedule);
  s.run.validate();
  return s;
}

nlohmann::ordered_json eval_json(const EvalResult& e) {
  return {{"macro_f1", e.macro_f1}, {"accuracy", e.accuracy}, {"per_class_f1", e.per_class_f1}};
}

void write_json(const fs::path& path, const nlohmann::ordered_json& j) {
  std::ofstream out(path);
  out << j.dump(2) << '\n';
}

int cmd_synth(const CommonFlags& f) {
  Settings s = load_settings(f);
  if (f.seed) s.synth.seed = *f.seed;
  const auto [src, tgt] = generate_synthetic_pair(s.synth);
  write_dataset(src, fs::path(f.out) / "source");
  write_dataset(tgt, fs::path(f.out) / "target");
  std::printf("wrote %zu source and %zu target series (T=%zu, D=%zu, classes=%zu) to %s\n",
              src.meta.samples, tgt.meta.samples, src.meta.length, src.meta.channels,
              src.meta.classes, f.out.c_str());
  return 0;
}

struct TrainFlags {
  std::string source, target;
  bool dump_pseudo = false;
  bool source_only = false;
};

int cmd_train(const CommonFlags& f, const TrainFlags& t) {
  const Settings s = load_settings(f);
  Dataset source, target;
  if (t.source.empty() != t.target.empty()) {
    throw ContractError("--source and --target go together");
  }
  if (t.source.empty()) {
    std::tie(source, target) = generate_synthetic_pair(s.synth);
  } else {
    source = load_dataset(t.source);
    target = load_dataset(t.target);
  }
  // The target is unlabeled for training; its labels, if any, only feed metrics.
  const bool scored = target.labels.size() == target.meta.samples;
  const std::vector<std::size_t> truth = target.labels;

  const fs::path out(f.out);
  fs::create_directories(out);
  const auto t0 = std::chrono::steady_clock::now();

  if (t.source_only) {
    const Model model = train_source_only(s.run, source);
    save_checkpoint((out / "checkpoint.bin").string(), model.to_checkpoint());
    nlohmann::ordered_json summary{{"method", "source_only"}, {"seed", s.run.seed}};
    summary["source"] = eval_json(evaluate(model, source));
    if (scored) summary["target"] = eval_json(evaluate(model, target));
    write_json(out / "summary.json", summary);
    std::cout << summary.dump(2) << '\n';
    return 0;
  }

  std::ofstream metrics(out / "metrics.jsonl");
  std::ofstream pseudo;
  if (t.dump_pseudo) {
    pseudo.open(out / "pseudo_labels.csv");
    pseudo << "step,index,pseudo_label,sigma,confident\n";
    pseudo.precision(17);
  }
  TrainOptions opts;
  if (scored) opts.target_truth = &truth;
  opts.on_epoch = [&](const EpochMetrics& m) {
    write_metrics_line(metrics, m);
    metrics.flush();
    std::fprintf(stderr, "epoch %3zu  l_total %9.4f  confident %.2f  target_f1 %.4f\n", m.epoch,
                 m.l_total, m.confident_fraction, m.target_macro_f1);
  };
  if (t.dump_pseudo) {
    opts.on_pseudo_label = [&](const PseudoLabelRow& r) {
      pseudo << r.step << ',' << r.index << ',' << r.pseudo_label << ',' << r.sigma << ','
             << (r.confident ? 1 : 0) << '\n';
    };
  }
  opts.log = [](const std::string& msg) { std::fprintf(stderr, "%s\n", msg.c_str()); };

  Dataset unlabeled = target;
  unlabeled.labels.clear();
  unlabeled.meta.labeled = false;
  // train() insists only on a labeled source; the target copy carries no labels.
  const TrainResult r = train(s.run, source, unlabeled, opts);
  save_checkpoint((out / "checkpoint.bin").string(), r.model.to_checkpoint());

  const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  nlohmann::ordered_json summary{{"method", "darsd"},
                                 {"seed", s.run.seed},
                                 {"components", s.run.components.label()},
                                 {"epochs_completed", r.epochs.size()},
                                 {"aborted", r.aborted},
                                 {"max_basis_defect", r.max_basis_defect},
                                 {"seconds", secs}};
  if (r.aborted) summary["abort_reason"] = r.abort_reason;
  summary["source"] = eval_json(evaluate(r.model, source));
  if (scored) summary["target"] = eval_json(evaluate(r.model, target));
  write_json(out / "summary.json", summary);
  std::cout << summary.dump(2) << '\n';
  return r.aborted ? 3 : 0;
}

int cmd_eval(const std::string& checkpoint, const std::string& data, const std::string& out) {
  const Model model = Model::from_checkpoint(load_checkpoint(checkpoint));
  const EvalResult e = evaluate(model, load_dataset(data));
  const auto j = eval_json(e);
  if (!out.empty()) {
    fs::create_directories(out);
    write_json(fs::path(out) / "eval.json", j);
  }
  std::cout << j.dump(2) << '\n';
  return 0;
}

int cmd_ablate(const CommonFlags& f, std::size_t seeds) {
  const Settings s = load_settings(f);
  const auto [source, target] = generate_synthetic_pair(s.synth);
  const auto masks = ablation_masks();
  std::vector<double> mean(masks.size(), 0.0);
  nlohmann::ordered_json runs = nlohmann::ordered_json::array();
  for (std::size_t k = 0; k < seeds; ++k) {
    RunConfig cfg = s.run;
    cfg.seed = s.run.seed + k;
    cfg.track_epoch_metrics = false;
    const auto rows = run_ablation(cfg, source, target, masks);
    std::cout << "seed " << cfg.seed << '\n';
    print_ablation_table(std::cout, rows);
    for (const auto& row : rows) {
      mean[row.id - 1] += row.macro_f1 / static_cast<double>(seeds);
      runs.push_back({{"seed", cfg.seed},
                      {"id", row.id},
                      {"components", row.mask.label()},
                      {"macro_f1", row.macro_f1},
                      {"accuracy", row.accuracy}});
    }
  }
  std::cout << "mean macro-F1 over " << seeds << " seed(s)\n";
  nlohmann::ordered_json means = nlohmann::ordered_json::array();
  for (std::size_t i = 0; i < masks.size(); ++i) {
    std::printf("%zu  %-30s %.4f\n", i + 1, masks[i].label().c_str(), mean[i]);
    means.push_back({{"id", i + 1}, {"components", masks[i].label()}, {"macro_f1", mean[i]}});
  }
  fs::create_directories(f.out);
  write_json(fs::path(f.out) / "ablation.json", {{"runs", runs}, {"mean", means}});
  return 0;
}

int cmd_gradcheck(std::uint64_t seed, std::size_t instances, double eps, double tol) {
  bool ok = true;
  auto report = [&](const char* group, const std::vector<GradCheckCase>& cases) {
    for (const auto& o : run_gradcheck_suite(cases, instances, seed, eps)) {
      const bool pass = o.max_error < tol;
      ok = ok && pass;
      std::printf("%-4s %-10s %-28s max_rel_err %.3e\n", pass ? "ok" : "FAIL", group,
                  o.name.c_str(), o.max_error);
    }
  };
  report("primitive", primitive_gradcheck_cases());
  report("loss", loss_gradcheck_cases());
  return ok ? 0 : 1;
}

int cmd_oracle(std::uint64_t seed, std::size_t trials, double tol) {
  bool ok = true;
  for (auto [d, m] : {std::pair<std::size_t, std::size_t>{16, 4}, {32, 8}, {128, 24}}) {
    const auto r = oracle_subspace_extraction(d, m, trials, seed);
    const double err = std::max(r.max_coordinate_error, r.max_reconstruction_error);
    ok = ok && err < tol;
    std::printf("%-4s d=%-4zu m=%-3zu trials=%zu coord_err %.3e recon_err %.3e\n",
                err < tol ? "ok" : "FAIL", d, m, trials, r.max_coordinate_error,
                r.max_reconstruction_error);
  }
  return ok ? 0 : 1;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"DARSD domain adaptation for time series"};
  app.require_subcommand(1);

  CommonFlags synth_f, train_f, ablate_f;
  TrainFlags train_t;

  auto* synth = app.add_subcommand("synth", "generate a seeded source/target pair");
  add_common(synth, synth_f);

  auto* train = app.add_subcommand("train", "two-stage training; writes checkpoint and metrics");
  add_common(train, train_f);
  train->add_option("--source", train_t.source, "labeled source dataset directory");
  train->add_option("--target", train_t.target, "target dataset directory");
  train->add_flag("--dump-pseudo-labels", train_t.dump_pseudo,
                  "write per-step pseudo-labels to pseudo_labels.csv");
  train->add_flag("--source-only", train_t.source_only, "train the unadapted baseline");

  std::string ckpt, data, eval_out;
  auto* eval = app.add_subcommand("eval", "score a checkpoint on a labeled dataset");
  eval->add_option("--checkpoint", ckpt)->required()->check(CLI::ExistingFile);
  eval->add_option("--data", data)->required()->check(CLI::ExistingDirectory);
  eval->add_option("--out", eval_out, "directory for eval.json");

  std::size_t seeds = 3;
  auto* ablate = app.add_subcommand("ablate", "train every ablation row on the synthetic pair");
  add_common(ablate, ablate_f);
  ablate->add_option("--seeds", seeds, "number of consecutive seeds")->check(CLI::Range(1, 100));

  std::uint64_t gc_seed = 1;
  std::size_t gc_instances = 3;
  double gc_eps = 1e-5, gc_tol = 1e-4;
  auto* gradcheck = app.add_subcommand("gradcheck", "finite-difference check of every op and loss");
  gradcheck->add_option("--seed", gc_seed);
  gradcheck->add_option("--instances", gc_instances, "random instances per case");
  gradcheck->add_option("--eps", gc_eps)->check(CLI::Range(1e-7, 1e-3));
  gradcheck->add_option("--tol", gc_tol);

  std::uint64_t or_seed = 1;
  std::size_t or_trials = 100;
  double or_tol = 1e-10;
  auto* oracle = app.add_subcommand("oracle", "subspace extraction identity on random bases");
  oracle->add_option("--seed", or_seed);
  oracle->add_option("--trials", or_trials);
  oracle->add_option("--tol", or_tol);

  CLI11_PARSE(app, argc, argv);
  try {
    if (*synth) return cmd_synth(synth_f);
    if (*train) return cmd_train(train_f, train_t);
    if (*eval) return cmd_eval(ckpt, data, eval_out);
    if (*ablate) return cmd_ablate(ablate_f, seeds);
    if (*gradcheck) return cmd_gradcheck(gc_seed, gc_instances, gc_eps, gc_tol);
    if (*oracle) return cmd_oracle(or_seed, or_trials, or_tol);
  } catch (const std::exception& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return 2;
  }
  return 0;
}
