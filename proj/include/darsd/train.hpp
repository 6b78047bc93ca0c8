#pragma once

// Two-stage training. Stage 1 learns the encoder, the invariant basis and the
// discriminator with the hybrid contrastive objective on labeled source and
// unlabeled target batches. Stage 2 freezes them and fits the classifier on
// reconstructed source features. Also: evaluation, the source-only baseline
// and the ablation runner.

#include <cmath>
#include <functional>
#include <limits>
#include <optional>
#include <ostream>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "darsd/checkpoint.hpp"
#include "darsd/config.hpp"
#include "darsd/contrastive.hpp"
#include "darsd/data.hpp"
#include "darsd/lcib.hpp"
#include "darsd/metrics.hpp"
#include "darsd/networks.hpp"
#include "darsd/optim.hpp"
#include "darsd/ppgce.hpp"
#include "darsd/rng.hpp"

namespace darsd {

struct Model {
  Encoder encoder;
  InvariantBasis basis;
  Discriminator disc;
  Classifier clf;
  bool use_lcib = true;

  static Model init(const RunConfig& cfg, std::size_t channels, std::size_t classes, Rng& rng) {
    EncoderConfig ec{channels, cfg.encoder_hidden, cfg.feature_dim,
                     cfg.kernel_size, cfg.dilations, cfg.encoder_dropout};
    Model m;
    m.encoder = Encoder::init(ec, rng);
    m.basis = InvariantBasis::random(cfg.feature_dim, cfg.basis_dim, rng);
    m.disc = Discriminator::init(cfg.feature_dim, cfg.disc_hidden, rng);
    m.clf = Classifier::init(cfg.feature_dim, cfg.clf_hidden, classes, cfg.clf_dropout, rng);
    m.use_lcib = cfg.components.lcib;
    return m;
  }

  // Features fed to prototypes and the classifier: f_hat, or f without LCIB.
  Tensor features(const Tensor& x, Rng* dropout_rng = nullptr) const {
    Tensor f = encode(encoder, x, dropout_rng);
    return use_lcib ? invariant_features(basis, f) : f;
  }

  ParamList params() const {
    ParamList out = encoder.params();
    for (auto& p : basis.params()) out.push_back(p);
    for (auto& p : disc.params()) out.push_back(p);
    for (auto& p : clf.params()) out.push_back(p);
    return out;
  }

  // Parameters plus a "meta.arch" blob describing the architecture.
  ParamList to_checkpoint() const {
    const auto& ec = encoder.config;
    std::vector<double> arch{static_cast<double>(ec.channels),
                             static_cast<double>(ec.hidden),
                             static_cast<double>(ec.out_dim),
                             static_cast<double>(ec.kernel_size),
                             ec.dropout,
                             static_cast<double>(basis.m()),
                             static_cast<double>(disc.hidden.weight.dim(1)),
                             static_cast<double>(clf.hidden.weight.dim(1)),
                             static_cast<double>(clf.classes()),
                             clf.dropout,
                             use_lcib ? 1.0 : 0.0,
                             static_cast<double>(ec.dilations.size())};
    for (auto dl : ec.dilations) arch.push_back(static_cast<double>(dl));
    ParamList out{{"meta.arch", Tensor::vector(arch)}};
    for (auto& p : params()) out.push_back(p);
    return out;
  }

  static Model from_checkpoint(const ParamList& blobs) {
    const Tensor& arch = find_param(blobs, "meta.arch");
    auto at = [&](std::size_t i) {
      if (i >= arch.size()) throw CheckpointError("meta.arch blob too short");
      return arch[i];
    };
    auto count = [&](std::size_t i) { return static_cast<std::size_t>(at(i)); };
    EncoderConfig ec{count(0), count(1), count(2), count(3), {}, at(4)};
    for (std::size_t i = 0; i < count(11); ++i) ec.dilations.push_back(count(12 + i));
    RunConfig cfg;
    cfg.encoder_hidden = ec.hidden;
    cfg.feature_dim = ec.out_dim;
    cfg.kernel_size = ec.kernel_size;
    cfg.dilations = ec.dilations;
    cfg.encoder_dropout = ec.dropout;
    cfg.basis_dim = count(5);
    cfg.disc_hidden = count(6);
    cfg.clf_hidden = count(7);
    cfg.clf_dropout = at(9);
    cfg.components.lcib = at(10) != 0.0;
    Rng scratch(0);
    Model m = init(cfg, ec.channels, count(8), scratch);
    for (auto& p : m.params()) {
      const Tensor& src = find_param(blobs, p.name);
      if (src.shape() != p.value.shape()) {
        throw CheckpointError("blob '" + p.name + "' has shape " + shape_str(src.shape()) +
                              ", expected " + shape_str(p.value.shape()));
      }
      auto dst = p.value.mutable_data();
      std::copy(src.data().begin(), src.data().end(), dst.begin());
    }
    return m;
  }

  void copy_values_from(const Model& other) {
    auto dst = params();
    auto src = other.params();
    for (std::size_t i = 0; i < dst.size(); ++i) {
      std::copy(src[i].value.data().begin(), src[i].value.data().end(),
                dst[i].value.mutable_data().begin());
    }
  }

  Model clone() const {
    Model m = *this;
    m.encoder.layers.clear();
    for (const auto& l : encoder.layers)
      m.encoder.layers.push_back({l.spec, l.weight.clone(true), l.bias.clone(true)});
    m.basis.B = basis.B.clone(true);
    m.disc = {{disc.hidden.weight.clone(true), disc.hidden.bias.clone(true)},
              {disc.out.weight.clone(true), disc.out.bias.clone(true)}};
    m.clf = {{clf.hidden.weight.clone(true), clf.hidden.bias.clone(true)},
             {clf.out.weight.clone(true), clf.out.bias.clone(true)},
             clf.dropout};
    return m;
  }
};

// Order-sensitive checksum of parameter values, for stage-separation checks.
inline double param_checksum(const ParamList& params) {
  double s = 0.0, k = 1.0;
  for (const auto& p : params)
    for (double v : p.value.data()) {
      s += v * k;
      k = k > 3.0 ? 1.0 : k + 0.001;
    }
  return s;
}

struct EpochMetrics {
  std::size_t epoch = 0;
  double l_sup = 0.0;
  double l_self = 0.0;
  double l_anti = 0.0;
  double l_adv = 0.0;
  double l_total = 0.0;
  double confident_fraction = 0.0;
  double target_macro_f1 = std::numeric_limits<double>::quiet_NaN();
  double target_accuracy = std::numeric_limits<double>::quiet_NaN();
  double source_macro_f1 = std::numeric_limits<double>::quiet_NaN();
};

inline nlohmann::ordered_json to_json(const EpochMetrics& m) {
  auto num = [](double v) -> nlohmann::ordered_json {
    if (std::isfinite(v)) return v;
    return nullptr;
  };
  nlohmann::ordered_json j;
  j["epoch"] = m.epoch;
  j["l_sup"] = num(m.l_sup);
  j["l_self"] = num(m.l_self);
  j["l_anti"] = num(m.l_anti);
  j["l_adv"] = num(m.l_adv);
  j["l_total"] = num(m.l_total);
  j["confident_fraction"] = num(m.confident_fraction);
  j["target_macro_f1"] = num(m.target_macro_f1);
  j["target_accuracy"] = num(m.target_accuracy);
  j["source_macro_f1"] = num(m.source_macro_f1);
  return j;
}

// One line per record.
inline void write_metrics_line(std::ostream& out, const EpochMetrics& m) {
  out << to_json(m).dump() << '\n';
}

struct StepRecord {
  std::size_t step = 0;
  double eta = 0.0;
  std::size_t target_batch = 0;
  std::size_t confident = 0;
  double basis_defect = 0.0;
  LossTerms terms;
};

struct PseudoLabelRow {
  std::size_t step;
  std::size_t index;  // row in the target dataset
  std::size_t pseudo_label;
  double sigma;
  bool confident;
};

struct EvalResult {
  double macro_f1 = 0.0;
  double accuracy = 0.0;
  std::vector<double> per_class_f1;
  std::vector<std::size_t> predictions;
};

struct TrainOptions {
  // Ground truth for the target domain, used only for reporting metrics.
  const std::vector<std::size_t>* target_truth = nullptr;
  std::function<void(const EpochMetrics&)> on_epoch;
  std::function<void(const PseudoLabelRow&)> on_pseudo_label;
  std::function<void(const StepRecord&, const Model&)> on_step;  // after the basis repair
  std::function<void(const std::string&)> log;
};

struct TrainResult {
  Model model;
  std::vector<EpochMetrics> epochs;
  std::vector<StepRecord> steps;
  double max_basis_defect = 0.0;
  double stage1_checksum = 0.0;  // encoder, basis and discriminator after stage 1
  bool aborted = false;
  std::string abort_reason;
};

inline constexpr double kOrthonormalityTolerance = 1e-6;
inline constexpr std::size_t kEvalChunk = 128;

// Eval-mode features for every sample, computed in chunks without a tape.
inline Tensor dataset_features(const Model& model, const Dataset& ds) {
  NoGradScope no_grad;
  std::vector<Tensor> parts;
  for (std::size_t start = 0; start < ds.meta.samples; start += kEvalChunk) {
    std::vector<std::size_t> rows;
    for (std::size_t i = start; i < std::min(ds.meta.samples, start + kEvalChunk); ++i)
      rows.push_back(i);
    parts.push_back(model.features(ds.batch(rows)));
  }
  return concat(parts, 0);
}

inline EvalResult score_predictions(std::vector<std::size_t> pred,
                                    const std::vector<std::size_t>& truth,
                                    std::size_t classes) {
  EvalResult r;
  r.per_class_f1 = per_class_f1(confusion_matrix(pred, truth, classes));
  r.macro_f1 = macro_f1(pred, truth, classes);
  r.accuracy = accuracy(pred, truth);
  r.predictions = std::move(pred);
  return r;
}

// Eval-mode encoder -> (LCIB reconstruction) -> classifier on a labeled set.
inline EvalResult evaluate(const Model& model, const Dataset& ds) {
  if (ds.meta.channels != model.encoder.config.channels) {
    throw ContractError("evaluate: dataset has " + std::to_string(ds.meta.channels) +
                        " channels, model expects " +
                        std::to_string(model.encoder.config.channels));
  }
  if (ds.meta.classes != model.clf.classes()) {
    throw ContractError("evaluate: dataset has " + std::to_string(ds.meta.classes) +
                        " classes, model predicts " + std::to_string(model.clf.classes()));
  }
  if (ds.labels.size() != ds.meta.samples) throw ContractError("evaluate: dataset is unlabeled");
  NoGradScope no_grad;
  Tensor logits = classify(model.clf, dataset_features(model, ds));
  return score_predictions(argmax_rows(logits), ds.labels, ds.meta.classes);
}

namespace detail {

inline std::vector<std::size_t> prototype_predictions(const Prototypes& protos,
                                                      const Tensor& feats) {
  return protos.assign(feats).labels;
}

inline ParamList join(std::initializer_list<ParamList> lists) {
  ParamList out;
  for (const auto& l : lists) out.insert(out.end(), l.begin(), l.end());
  return out;
}

inline void reorthonormalize_or_repair(InvariantBasis& basis, Rng& rng,
                                       const TrainOptions& opts) {
  for (int attempt = 0; attempt < 8; ++attempt) {
    try {
      reorthonormalize(basis);
      return;
    } catch (const DegenerateBasisError& e) {
      if (opts.log) opts.log(std::string("basis repair: ") + e.what());
      reinitialize_column(basis, e.column(), rng);
    }
  }
  throw ContractError("basis could not be repaired");
}

}  // namespace detail

// Stage 2: classifier on frozen reconstructed source features.
inline void finetune_classifier(const RunConfig& cfg, Model& model, const Dataset& source,
                                Rng& rng) {
  const Tensor feats = dataset_features(model, source);
  Adam opt(model.clf.params(), cfg.lr, cfg.beta1, cfg.beta2);
  const std::size_t n = source.meta.samples;
  std::vector<std::size_t> order(n);
  for (std::size_t i = 0; i < n; ++i) order[i] = i;
  const std::size_t steps = std::max<std::size_t>(1, n / cfg.batch_size);
  for (std::size_t epoch = 0; epoch < cfg.finetune_epochs; ++epoch) {
    rng.shuffle(order);
    for (std::size_t s = 0; s < steps; ++s) {
      std::vector<std::size_t> rows(order.begin() + static_cast<std::ptrdiff_t>(s * cfg.batch_size),
                                    order.begin() + static_cast<std::ptrdiff_t>(std::min(n, (s + 1) * cfg.batch_size)));
      Tape tape;
      TapeScope scope(tape);
      opt.zero_grad();
      Tensor loss = cross_entropy(classify(model.clf, gather_rows(feats, rows), &rng),
                                  source.labels_of(rows));
      tape.backward(loss);
      opt.step();
    }
  }
}

inline TrainResult train(const RunConfig& cfg, const Dataset& source, const Dataset& target,
                         const TrainOptions& opts = {}) {
  cfg.validate();
  if (source.meta.length != target.meta.length || source.meta.channels != target.meta.channels ||
      source.meta.classes != target.meta.classes) {
    throw ContractError("train: source and target must share T, D and n_c");
  }
  if (source.labels.size() != source.meta.samples) {
    throw ContractError("train: source domain must be labeled");
  }
  const std::size_t classes = source.meta.classes;
  const auto& mask = cfg.components;
  const bool adversarial = mask.lcib && mask.adv;

  Rng root(cfg.seed);
  Rng init_rng = root.fork(1);
  Rng order_rng = root.fork(2);
  Rng aug_rng = root.fork(3);
  Rng dropout_rng = root.fork(4);
  Rng repair_rng = root.fork(5);
  Rng* drop = cfg.encoder_dropout > 0.0 ? &dropout_rng : nullptr;

  TrainResult result{Model::init(cfg, source.meta.channels, classes, init_rng), {}, {}, 0.0,
                     0.0, false, {}};
  Model& model = result.model;
  Model last_good = model.clone();

  ParamList main_params = model.encoder.params();
  if (mask.lcib) main_params = detail::join({main_params, model.basis.params()});
  const bool alternating = cfg.adversarial_mode == AdversarialMode::alternating;
  if (adversarial && !alternating) main_params = detail::join({main_params, model.disc.params()});
  Adam opt(main_params, cfg.lr, cfg.beta1, cfg.beta2);
  Adam disc_opt(model.disc.params(), cfg.lr, cfg.beta1, cfg.beta2);

  const std::size_t ns = source.meta.samples, nt = target.meta.samples;
  const std::size_t bs = cfg.batch_size;
  const std::size_t steps_per_epoch = std::max<std::size_t>(1, ns / bs);
  const std::size_t warmup_steps = cfg.warmup_epochs * steps_per_epoch;
  ConfidenceSchedule schedule{cfg.eta0, cfg.eta_max,
                              (cfg.epochs - cfg.warmup_epochs) * steps_per_epoch,
                              cfg.schedule, cfg.eta_step, cfg.eta_every};
  schedule.validate();
  Prototypes protos(classes, cfg.feature_dim, cfg.momentum);
  AugmentationPolicy policy{cfg.jitter_sigma, cfg.scale_low, cfg.scale_high};

  std::vector<std::size_t> src_order(ns), tgt_order(nt);
  for (std::size_t i = 0; i < ns; ++i) src_order[i] = i;
  for (std::size_t i = 0; i < nt; ++i) tgt_order[i] = i;
  order_rng.shuffle(tgt_order);
  std::size_t tgt_cursor = 0;
  std::size_t global_step = 0;

  for (std::size_t epoch = 1; epoch <= cfg.epochs; ++epoch) {
    order_rng.shuffle(src_order);
    EpochMetrics em;
    em.epoch = epoch;
    try {
      for (std::size_t s = 0; s < steps_per_epoch; ++s, ++global_step) {
        std::vector<std::size_t> rows_s(
            src_order.begin() + static_cast<std::ptrdiff_t>(s * bs),
            src_order.begin() + static_cast<std::ptrdiff_t>(std::min(ns, (s + 1) * bs)));
        std::vector<std::size_t> rows_t;
        for (std::size_t k = 0; k < std::min(bs, nt); ++k) {
          if (tgt_cursor == nt) {
            order_rng.shuffle(tgt_order);
            tgt_cursor = 0;
          }
          rows_t.push_back(tgt_order[tgt_cursor++]);
        }
        const auto ys = source.labels_of(rows_s);
        const Tensor xs = source.batch(rows_s);
        const Tensor xt = target.batch(rows_t);

        Tape tape;
        TapeScope scope(tape);
        opt.zero_grad();
        disc_opt.zero_grad();

        const Tensor fs = encode(model.encoder, xs, drop);
        const Tensor ft = encode(model.encoder, xt, drop);
        const Tensor hs = mask.lcib ? invariant_features(model.basis, fs) : fs;
        const Tensor ht = mask.lcib ? invariant_features(model.basis, ft) : ft;

        Tensor adv = Tensor::scalar(0.0);
        Tensor adv_objective = adv;
        if (adversarial) {
          // Original features are the discriminator's fixed reference; reversal
          // reaches the encoder and basis through the reconstructed side only.
          adv_objective = adversarial_loss(model.disc, concat({fs.detach(), ft.detach()}, 0),
                                           concat({hs, ht}, 0), cfg.lambda2);
          adv = adv_objective;
        }

        // Prototypes track detached statistics; pseudo-labels use the
        // post-update centroids.
        protos.update(hs.detach(), ys);
        if (!protos.all_initialized()) {
          // A class absent from the first batch falls back to its full-source mean.
          const Tensor all = dataset_features(model, source);
          Prototypes warm(classes, cfg.feature_dim, 0.0);
          warm.update(all, source.labels);
          for (std::size_t c = 0; c < classes; ++c)
            if (!protos.initialized(c)) protos.set_centroid(c, warm.centroid(c));
        }
        const PseudoLabels pl = protos.assign(ht.detach());
        // During warm-up no target row counts as confident.
        const bool warm = global_step < warmup_steps;
        const double eta = warm ? 0.0 : schedule.ratio(global_step - warmup_steps);
        const PartitionedTarget part =
            partition(pl, eta, warm ? PartitionMode::quantile : cfg.partition);

        Tensor sup = Tensor::scalar(0.0);
        if (mask.sup) {
          std::vector<std::size_t> labels = ys;
          labels.insert(labels.end(), part.pseudo_labels.begin(), part.pseudo_labels.end());
          try {
            sup = supervised_contrastive_loss(concat({hs, gather_rows(ht, part.confident)}, 0),
                                              labels, cfg.tau);
          } catch (const ContractError& e) {
            if (opts.log) opts.log(std::string("l_sup skipped: ") + e.what());
          }
        }
        const Tensor dis = gather_rows(ht, part.distrusted);
        Tensor self = Tensor::scalar(0.0);
        if (mask.self && part.distrusted.size() >= 2) {
          std::vector<std::size_t> dis_rows;
          for (auto i : part.distrusted) dis_rows.push_back(rows_t[i]);
          const Tensor x_aug = augment(target.batch(dis_rows), policy, aug_rng);
          self = self_consistency_loss(dis, model.features(x_aug, drop), cfg.tau);
        } else if (mask.self && part.distrusted.size() == 1 && opts.log) {
          opts.log("l_self skipped: a single distrusted feature has no negatives");
        }
        Tensor anti = Tensor::scalar(0.0);
        if (mask.anti && !part.distrusted.empty()) {
          anti = anti_divergence_loss(dis, hs, cfg.tau);
        }

        const TotalLoss tl = total_loss({sup, self, anti, adv}, cfg.lambda1, cfg.lambda2);
        // The discriminator descends on l_adv at unit weight while gradient
        // reversal hands -lambda2 * d l_adv to the encoder and basis.
        const Tensor objective = add(add(sup, self), add(mul(anti, cfg.lambda1), adv_objective));
        if (objective.requires_grad()) tape.backward(objective);
        opt.step();

        if (adversarial && alternating) {
          // Discriminator turn on detached features, after the encoder moved.
          Tape disc_tape;
          TapeScope disc_scope(disc_tape);
          disc_opt.zero_grad();
          Tensor d_loss = adversarial_loss(model.disc, concat({fs.detach(), ft.detach()}, 0),
                                           concat({hs.detach(), ht.detach()}, 0));
          disc_tape.backward(d_loss);
          disc_opt.step();
        }

        StepRecord rec{global_step, eta, rows_t.size(), part.confident.size(), 0.0, tl.terms};
        if (mask.lcib) {
          detail::reorthonormalize_or_repair(model.basis, repair_rng, opts);
          rec.basis_defect = orthonormality_defect(model.basis);
          result.max_basis_defect = std::max(result.max_basis_defect, rec.basis_defect);
          if (cfg.debug_checks && rec.basis_defect >= kOrthonormalityTolerance) {
            throw ContractError("basis lost orthonormality: defect " +
                                std::to_string(rec.basis_defect));
          }
        }
        result.steps.push_back(rec);
        if (opts.on_step) opts.on_step(rec, model);

        if (opts.on_pseudo_label) {
          std::vector<bool> conf(rows_t.size(), false);
          for (auto i : part.confident) conf[i] = true;
          for (std::size_t i = 0; i < rows_t.size(); ++i)
            opts.on_pseudo_label({global_step, rows_t[i], pl.labels[i], pl.scores[i], conf[i]});
        }

        em.l_sup += tl.terms.l_sup;
        em.l_self += tl.terms.l_self;
        em.l_anti += tl.terms.l_anti;
        em.l_adv += tl.terms.l_adv;
        em.confident_fraction =
            static_cast<double>(part.confident.size()) / static_cast<double>(rows_t.size());
      }
    } catch (const NonFiniteLossError& e) {
      model.copy_values_from(last_good);
      result.aborted = true;
      result.abort_reason = e.what();
      if (opts.log) opts.log(std::string("training aborted: ") + e.what());
      return result;
    }

    const double inv = 1.0 / static_cast<double>(steps_per_epoch);
    em.l_sup *= inv;
    em.l_self *= inv;
    em.l_anti *= inv;
    em.l_adv *= inv;
    em.l_total = em.l_sup + em.l_self + cfg.lambda1 * em.l_anti + cfg.lambda2 * em.l_adv;
    if (cfg.track_epoch_metrics) {
      em.source_macro_f1 =
          macro_f1(detail::prototype_predictions(protos, dataset_features(model, source)),
                   source.labels, classes);
      if (opts.target_truth != nullptr) {
        const auto pred = detail::prototype_predictions(protos, dataset_features(model, target));
        em.target_macro_f1 = macro_f1(pred, *opts.target_truth, classes);
        em.target_accuracy = accuracy(pred, *opts.target_truth);
      }
    }
    result.epochs.push_back(em);
    if (opts.on_epoch) opts.on_epoch(em);
    last_good.copy_values_from(model);
  }

  result.stage1_checksum = param_checksum(
      detail::join({model.encoder.params(), model.basis.params(), model.disc.params()}));
  Rng clf_rng = root.fork(6);
  finetune_classifier(cfg, model, source, clf_rng);
  return result;
}

// Encoder + classifier trained end-to-end on the source domain only.
inline Model train_source_only(const RunConfig& cfg, const Dataset& source) {
  cfg.validate();
  Rng root(cfg.seed);
  Rng init_rng = root.fork(1);
  Rng order_rng = root.fork(2);
  Rng dropout_rng = root.fork(4);
  Model model = Model::init(cfg, source.meta.channels, source.meta.classes, init_rng);
  model.use_lcib = false;
  Adam opt(detail::join({model.encoder.params(), model.clf.params()}), cfg.lr, cfg.beta1,
           cfg.beta2);
  const std::size_t n = source.meta.samples;
  std::vector<std::size_t> order(n);
  for (std::size_t i = 0; i < n; ++i) order[i] = i;
  const std::size_t steps = std::max<std::size_t>(1, n / cfg.batch_size);
  Rng* drop = cfg.encoder_dropout > 0.0 ? &dropout_rng : nullptr;
  for (std::size_t epoch = 0; epoch < cfg.epochs; ++epoch) {
    order_rng.shuffle(order);
    for (std::size_t s = 0; s < steps; ++s) {
      std::vector<std::size_t> rows(order.begin() + static_cast<std::ptrdiff_t>(s * cfg.batch_size),
                                    order.begin() + static_cast<std::ptrdiff_t>(std::min(n, (s + 1) * cfg.batch_size)));
      Tape tape;
      TapeScope scope(tape);
      opt.zero_grad();
      Tensor logits = classify(model.clf, encode(model.encoder, source.batch(rows), drop),
                               &dropout_rng);
      tape.backward(cross_entropy(logits, source.labels_of(rows)));
      opt.step();
    }
  }
  return model;
}

struct AblationRow {
  std::size_t id = 0;
  ComponentMask mask;
  double macro_f1 = 0.0;
  double accuracy = 0.0;
  double l_self_sum = 0.0;  // wiring probes: disabled terms stay exactly zero
  double l_anti_sum = 0.0;
  double l_adv_sum = 0.0;
};

// Rows 1-5: {sup,self,anti}, {LCIB,sup,self,anti}, {LCIB,adv,sup},
// {LCIB,adv,sup,self}, and the full model.
inline std::vector<ComponentMask> ablation_masks() {
  return {{false, false, true, true, true},
          {true, false, true, true, true},
          {true, true, true, false, false},
          {true, true, true, true, false},
          {true, true, true, true, true}};
}

// One seeded run per mask, scored on the labeled target domain.
inline std::vector<AblationRow> run_ablation(const RunConfig& base, const Dataset& source,
                                             const Dataset& target,
                                             const std::vector<ComponentMask>& masks) {
  std::vector<AblationRow> rows;
  for (std::size_t i = 0; i < masks.size(); ++i) {
    RunConfig cfg = base;
    cfg.components = masks[i];
    TrainOptions opts;
    opts.target_truth = &target.labels;
    const TrainResult r = train(cfg, source, target, opts);
    const EvalResult ev = evaluate(r.model, target);
    AblationRow row{i + 1, masks[i], ev.macro_f1, ev.accuracy, 0.0, 0.0, 0.0};
    for (const auto& s : r.steps) {
      row.l_self_sum += std::abs(s.terms.l_self);
      row.l_anti_sum += std::abs(s.terms.l_anti);
      row.l_adv_sum += std::abs(s.terms.l_adv);
    }
    rows.push_back(row);
  }
  return rows;
}

inline void print_ablation_table(std::ostream& out, const std::vector<AblationRow>& rows) {
  out << "ID  LCIB  L_adv  L_sup  L_self  L_anti  macro_f1  accuracy\n";
  auto mark = [](bool on) { return on ? "  x   " : "      "; };
  for (const auto& r : rows) {
    char buf[64];
    std::snprintf(buf, sizeof buf, "  %.4f    %.4f", r.macro_f1, r.accuracy);
    out << r.id << "  " << mark(r.mask.lcib) << mark(r.mask.adv) << mark(r.mask.sup)
        << mark(r.mask.self) << mark(r.mask.anti) << buf << '\n';
  }
}

}  // namespace darsd
