#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "darsd/keyvalue.hpp"
#include "darsd/ppgce.hpp"

namespace darsd {

enum class AdversarialMode { reversal, alternating };

// Which parts of the method are active; mirrors the ablation table columns.
struct ComponentMask {
  bool lcib = true;
  bool adv = true;
  bool sup = true;
  bool self = true;
  bool anti = true;

  std::string label() const {
    std::string s;
    auto put = [&](bool on, const char* name) {
      if (!on) return;
      if (!s.empty()) s += '+';
      s += name;
    };
    put(lcib, "LCIB");
    put(adv, "L_adv");
    put(sup, "L_sup");
    put(self, "L_self");
    put(anti, "L_anti");
    return s;
  }
};

struct RunConfig {
  std::uint64_t seed = 1;

  // networks
  std::size_t feature_dim = 32;  // d
  std::size_t encoder_hidden = 32;
  std::size_t kernel_size = 5;
  std::vector<std::size_t> dilations{1, 2};
  double encoder_dropout = 0.0;
  std::size_t disc_hidden = 32;
  std::size_t clf_hidden = 32;
  double clf_dropout = 0.1;

  // lcib
  std::size_t basis_dim = 6;  // m, about 0.2 d
  AdversarialMode adversarial_mode = AdversarialMode::reversal;

  // ppgce
  double momentum = 0.9;
  double eta0 = 0.1;
  double eta_max = 0.95;
  ScheduleMode schedule = ScheduleMode::linear;
  double eta_step = 0.05;
  std::size_t eta_every = 15;
  PartitionMode partition = PartitionMode::quantile;

  // contrastive
  double tau = 0.1;
  double lambda1 = 0.5;
  double lambda2 = 0.5;
  double jitter_sigma = 0.1;
  double scale_low = 0.8;
  double scale_high = 1.2;

  // optimization
  double lr = 1e-3;
  double beta1 = 0.9;
  double beta2 = 0.999;
  std::size_t epochs = 20;
  std::size_t finetune_epochs = 20;
  std::size_t warmup_epochs = 10;  // epochs before any pseudo-label is trusted
  std::size_t batch_size = 32;

  ComponentMask components;
  bool debug_checks = true;         // assert basis orthonormality every step
  bool track_epoch_metrics = true;  // per-epoch prototype evaluation

  static const std::vector<std::string>& keys() {
    static const std::vector<std::string> k{
        "seed", "feature_dim", "encoder_hidden", "kernel_size", "dilations",
        "encoder_dropout", "disc_hidden", "clf_hidden", "clf_dropout", "basis_dim",
        "adversarial_mode", "momentum", "eta0", "eta_max", "schedule", "eta_step",
        "eta_every", "partition", "tau", "lambda1", "lambda2", "jitter_sigma",
        "scale_low", "scale_high", "lr", "beta1", "beta2", "epochs", "finetune_epochs",
        "warmup_epochs", "batch_size", "use_lcib", "use_adv", "use_sup", "use_self", "use_anti",
        "debug_checks", "track_epoch_metrics"};
    return k;
  }

  // The full-scale architecture: 4 dilated layers, 128 hidden, d = 128, m = 24.
  static RunConfig paper_scale() {
    RunConfig c;
    c.feature_dim = 128;
    c.encoder_hidden = 128;
    c.dilations = {1, 2, 4, 8};
    c.encoder_dropout = 0.2;
    c.clf_hidden = 128;
    c.basis_dim = 24;
    c.disc_hidden = 128;
    c.schedule = ScheduleMode::stepwise;
    return c;
  }

  void apply(const KeyValueFile& kv) {
    kv.require_known(keys());
    kv.get("seed", seed);
    kv.get("feature_dim", feature_dim);
    kv.get("encoder_hidden", encoder_hidden);
    kv.get("kernel_size", kernel_size);
    kv.get("dilations", dilations);
    kv.get("encoder_dropout", encoder_dropout);
    kv.get("disc_hidden", disc_hidden);
    kv.get("clf_hidden", clf_hidden);
    kv.get("clf_dropout", clf_dropout);
    kv.get("basis_dim", basis_dim);
    std::string text;
    if (kv.get("adversarial_mode", text)) adversarial_mode = parse_adversarial_mode(text);
    kv.get("momentum", momentum);
    kv.get("eta0", eta0);
    kv.get("eta_max", eta_max);
    if (kv.get("schedule", text)) schedule = parse_schedule(text);
    kv.get("eta_step", eta_step);
    kv.get("eta_every", eta_every);
    if (kv.get("partition", text)) partition = parse_partition(text);
    kv.get("tau", tau);
    kv.get("lambda1", lambda1);
    kv.get("lambda2", lambda2);
    kv.get("jitter_sigma", jitter_sigma);
    kv.get("scale_low", scale_low);
    kv.get("scale_high", scale_high);
    kv.get("lr", lr);
    kv.get("beta1", beta1);
    kv.get("beta2", beta2);
    kv.get("epochs", epochs);
    kv.get("finetune_epochs", finetune_epochs);
    kv.get("warmup_epochs", warmup_epochs);
    kv.get("batch_size", batch_size);
    kv.get("use_lcib", components.lcib);
    kv.get("use_adv", components.adv);
    kv.get("use_sup", components.sup);
    kv.get("use_self", components.self);
    kv.get("use_anti", components.anti);
    kv.get("debug_checks", debug_checks);
    kv.get("track_epoch_metrics", track_epoch_metrics);
    validate();
  }

  static RunConfig load(const std::string& path) {
    RunConfig c;
    c.apply(KeyValueFile::load(path));
    return c;
  }

  static ScheduleMode parse_schedule(const std::string& s) {
    if (s == "linear") return ScheduleMode::linear;
    if (s == "stepwise") return ScheduleMode::stepwise;
    throw ContractError("schedule must be linear or stepwise, got '" + s + "'");
  }
  static PartitionMode parse_partition(const std::string& s) {
    if (s == "quantile") return PartitionMode::quantile;
    if (s == "threshold") return PartitionMode::threshold;
    throw ContractError("partition mode must be quantile or threshold, got '" + s + "'");
  }
  static AdversarialMode parse_adversarial_mode(const std::string& s) {
    if (s == "reversal") return AdversarialMode::reversal;
    if (s == "alternating") return AdversarialMode::alternating;
    throw ContractError("adversarial_mode must be reversal or alternating, got '" + s + "'");
  }

  void validate() const {
    auto check = [](bool ok, const std::string& what) {
      if (!ok) throw ContractError("invalid config: " + what);
    };
    check(feature_dim >= 2 && feature_dim <= 4096, "feature_dim in [2, 4096]");
    check(encoder_hidden >= 1 && encoder_hidden <= 4096, "encoder_hidden in [1, 4096]");
    check(kernel_size >= 1 && kernel_size <= 64, "kernel_size in [1, 64]");
    check(!dilations.empty() && dilations.size() <= 16, "1 to 16 dilations");
    for (auto dl : dilations) check(dl >= 1 && dl <= 1024, "dilation in [1, 1024]");
    check(encoder_dropout >= 0.0 && encoder_dropout < 1.0, "encoder_dropout in [0, 1)");
    check(disc_hidden >= 1 && disc_hidden <= 4096, "disc_hidden in [1, 4096]");
    check(clf_hidden >= 1 && clf_hidden <= 4096, "clf_hidden in [1, 4096]");
    check(clf_dropout >= 0.0 && clf_dropout < 1.0, "clf_dropout in [0, 1)");
    check(basis_dim >= 1 && basis_dim < feature_dim, "basis_dim in [1, feature_dim)");
    check(momentum >= 0.0 && momentum <= 1.0, "momentum in [0, 1]");
    check(0.0 <= eta0 && eta0 <= eta_max && eta_max <= 1.0, "0 <= eta0 <= eta_max <= 1");
    check(eta_step >= 0.0 && eta_step <= 1.0, "eta_step in [0, 1]");
    check(eta_every >= 1, "eta_every >= 1");
    check(tau >= 1e-3 && tau <= 100.0, "tau in [1e-3, 100]");
    check(lambda1 >= 0.0 && lambda1 <= 100.0, "lambda1 in [0, 100]");
    check(lambda2 >= 0.0 && lambda2 <= 100.0, "lambda2 in [0, 100]");
    check(jitter_sigma >= 0.0 && jitter_sigma <= 10.0, "jitter_sigma in [0, 10]");
    check(0.0 < scale_low && scale_low <= scale_high && scale_high <= 10.0,
          "0 < scale_low <= scale_high <= 10");
    check(lr > 0.0 && lr <= 1.0, "lr in (0, 1]");
    check(beta1 >= 0.0 && beta1 < 1.0 && beta2 >= 0.0 && beta2 < 1.0, "betas in [0, 1)");
    check(epochs >= 1 && epochs <= 100000, "epochs in [1, 100000]");
    check(finetune_epochs >= 1 && finetune_epochs <= 100000, "finetune_epochs in [1, 100000]");
    check(warmup_epochs < epochs, "warmup_epochs < epochs");
    check(batch_size >= 4 && batch_size <= 65536, "batch_size in [4, 65536]");
    check(components.sup, "use_sup must stay on");
  }
};

}  // namespace darsd
