// Acceptance run: one PASS/FAIL line per criterion, exit status 1 if any fails.

#include <Eigen/Dense>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <functional>
#include <random>
#include <sstream>
#include <string>

#include "darsd/darsd.hpp"
#include "oracles.hpp"

using namespace darsd;

namespace {

// Tolerances and budgets.
constexpr double kOracleTol = 1e-10;
constexpr double kOracleSeconds = 5.0;
constexpr double kGradTol = 1e-4;
constexpr double kGradEps = 1e-5;
constexpr double kGradSeconds = 60.0;
constexpr double kLossTol = 1e-9;
constexpr double kBasisTol = 1e-6;
constexpr double kGainMin = 0.10;
constexpr double kGainSeconds = 30.0 * 60.0;
constexpr double kAblationSlack = 0.02;
constexpr double kMetricTol = 1e-12;
constexpr std::uint64_t kSeeds = 3;

using Clock = std::chrono::steady_clock;
using RowMajor = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

double seconds_since(Clock::time_point t0) {
  return std::chrono::duration<double>(Clock::now() - t0).count();
}

int failures = 0;

void report(int id, const char* name, bool pass, const std::string& detail) {
  std::printf("%s criterion %d %s: %s\n", pass ? "PASS" : "FAIL", id, name, detail.c_str());
  std::fflush(stdout);
  if (!pass) ++failures;
}

std::string fmt(const char* f, auto... args) {
  char buf[512];
  std::snprintf(buf, sizeof buf, f, args...);
  return buf;
}

struct Desk {
  SyntheticShiftConfig synth;
  RunConfig run;
};

Desk load_desk() {
  const auto kv = KeyValueFile::load(DARSD_CONFIG_DIR "/desk.cfg");
  Desk d;
  d.run.apply(kv.excluding("synth."));
  d.synth.apply(kv.section("synth."));
  return d;
}

Tensor from_eigen(const RowMajor& m) {
  return Tensor({static_cast<std::size_t>(m.rows()), static_cast<std::size_t>(m.cols())},
                std::vector<double>(m.data(), m.data() + m.size()));
}

// Random orthonormal frame from Householder QR; the first m columns span the
// invariant subspace and the rest its complement.
void criterion_oracle() {
  const auto t0 = Clock::now();
  std::mt19937_64 gen(2024);
  std::normal_distribution<double> normal;
  double worst = 0.0;
  for (auto [d, m] : {std::pair<int, int>{16, 4}, {32, 8}, {128, 24}}) {
    for (int trial = 0; trial < 100; ++trial) {
      RowMajor g(d, d);
      for (int i = 0; i < g.size(); ++i) g.data()[i] = normal(gen);
      const RowMajor q = Eigen::HouseholderQR<RowMajor>(g).householderQ();
      const RowMajor b_inv = q.leftCols(m), b_spe = q.rightCols(d - m);
      Eigen::VectorXd w_inv(m), w_spe(d - m);
      for (auto& v : w_inv) v = normal(gen);
      for (auto& v : w_spe) v = normal(gen);
      const Eigen::VectorXd f_inv = b_inv * w_inv;
      const Eigen::VectorXd f = f_inv + b_spe * w_spe;

      InvariantBasis basis{from_eigen(b_inv)};
      const Tensor coords = project(basis, Tensor({1, static_cast<std::size_t>(d)},
                                                  std::vector<double>(f.data(), f.data() + d)));
      const Tensor rebuilt = reconstruct(basis, coords);
      for (int j = 0; j < m; ++j) worst = std::max(worst, std::abs(coords[j] - w_inv[j]));
      for (int r = 0; r < d; ++r) worst = std::max(worst, std::abs(rebuilt[r] - f_inv[r]));
    }
  }
  const double secs = seconds_since(t0);
  report(1, "subspace-extraction-oracle", worst < kOracleTol && secs < kOracleSeconds,
         fmt("max error %.3e (tol %.0e), %.2f s (budget %.0f s)", worst, kOracleTol, secs,
             kOracleSeconds));
}

void criterion_gradcheck() {
  const auto t0 = Clock::now();
  auto cases = primitive_gradcheck_cases();
  for (auto& c : loss_gradcheck_cases()) cases.push_back(std::move(c));
  double worst = 0.0;
  std::string worst_name;
  for (const auto& o : run_gradcheck_suite(cases, 3, 7, kGradEps)) {
    if (o.max_error >= worst) worst = o.max_error, worst_name = o.name;
  }
  const double secs = seconds_since(t0);
  report(2, "gradient-check", worst < kGradTol && secs < kGradSeconds,
         fmt("%zu cases, max relative error %.3e in %s (tol %.0e, eps %.0e), %.2f s", cases.size(),
             worst, worst_name.c_str(), kGradTol, kGradEps, secs));
}

void criterion_loss_oracles() {
  std::mt19937_64 gen(99);
  std::normal_distribution<double> normal;
  std::uniform_int_distribution<std::size_t> nd(4, 16), dd(2, 32), kd(1, 16), cls(0, 2);
  std::uniform_real_distribution<double> taud(0.05, 2.0);
  auto random = [&](std::size_t r, std::size_t c) {
    std::vector<double> v(r * c);
    for (double& x : v) x = normal(gen);
    return Tensor({r, c}, v);
  };
  double sup_err = 0.0, self_err = 0.0, anti_err = 0.0;
  for (int batch = 0; batch < 50; ++batch) {
    const std::size_t n = nd(gen), d = dd(gen), k = kd(gen);
    const double tau = taud(gen);
    std::vector<std::size_t> y(n);
    for (auto& v : y) v = cls(gen);
    y[0] = 0, y[1] = 0, y[2] = 1;
    const Tensor f = random(n, d), aug = random(n, d), dis = random(k, d), src = random(n, d);
    sup_err = std::max(sup_err, std::abs(supervised_contrastive_loss(f, y, tau).item() -
                                         oracle::sup_ref(oracle::rows_of(f), y, tau)));
    self_err = std::max(self_err, std::abs(self_consistency_loss(f, aug, tau).item() -
                                           oracle::self_ref(oracle::rows_of(f),
                                                            oracle::rows_of(aug), tau)));
    anti_err = std::max(anti_err, std::abs(anti_divergence_loss(dis, src, tau).item() -
                                           oracle::anti_ref(oracle::rows_of(dis),
                                                            oracle::rows_of(src), tau)));
  }
  const double worst = std::max({sup_err, self_err, anti_err});
  report(3, "contrastive-loss-oracles", worst < kLossTol,
         fmt("50 batches each, max |diff| sup %.2e self %.2e anti %.2e (tol %.0e)", sup_err,
             self_err, anti_err, kLossTol));
}

// Criteria 4 and 5 share one 10-epoch desk run in quantile mode.
void criteria_basis_and_schedule(const Desk& desk) {
  RunConfig cfg = desk.run;
  cfg.epochs = 10;
  cfg.warmup_epochs = desk.run.warmup_epochs * cfg.epochs / desk.run.epochs;  // same proportion
  cfg.partition = PartitionMode::quantile;
  cfg.track_epoch_metrics = false;
  auto [src, tgt] = generate_synthetic_pair(desk.synth);

  double worst_defect = 0.0;
  std::size_t steps = 0, count_mismatch = 0;
  TrainOptions opts;
  opts.on_step = [&](const StepRecord& rec, const Model& model) {
    const auto& B = model.basis.B;
    Eigen::Map<const RowMajor> b(B.data().data(), static_cast<Eigen::Index>(B.dim(0)),
                                 static_cast<Eigen::Index>(B.dim(1)));
    const RowMajor gram = b.transpose() * b;
    const double defect = (gram - RowMajor::Identity(gram.rows(), gram.cols())).norm();
    worst_defect = std::max(worst_defect, defect);
    const auto expected = static_cast<std::size_t>(
        std::ceil(rec.eta * static_cast<double>(rec.target_batch) - 1e-9));
    count_mismatch += rec.confident != expected;
    ++steps;
  };
  const TrainResult r = train(cfg, src, tgt, opts);
  report(4, "basis-orthonormality", !r.aborted && steps > 0 && worst_defect < kBasisTol,
         fmt("%zu steps, max ||B^T B - I||_F %.3e (tol %.0e)", steps, worst_defect, kBasisTol));

  const ConfidenceSchedule stepwise{0.1, 0.95, 1000000, ScheduleMode::stepwise, 0.05, 15};
  const double eta30 = stepwise.ratio(30);
  report(5, "confidence-schedule",
         !r.aborted && steps > 0 && count_mismatch == 0 && std::abs(eta30 - 0.2) < 1e-12,
         fmt("%zu/%zu steps with confident count != ceil(eta * n_t); stepwise eta(30) = %.12g",
             count_mismatch, steps, eta30));
}

struct SeedRuns {
  std::vector<double> baseline, full;
  std::vector<std::vector<double>> ablation;  // [row][seed], rows 1-4
};

void criteria_gain_and_ablation(const Desk& desk) {
  auto [src, tgt] = generate_synthetic_pair(desk.synth);
  Dataset unlabeled = tgt;
  unlabeled.labels.clear();
  unlabeled.meta.labeled = false;

  SeedRuns runs;
  const auto masks = ablation_masks();
  runs.ablation.assign(masks.size() - 1, {});
  const auto t0 = Clock::now();
  double gain_secs = 0.0;
  for (std::uint64_t k = 0; k < kSeeds; ++k) {
    RunConfig cfg = desk.run;
    cfg.seed = desk.run.seed + k;
    cfg.track_epoch_metrics = false;
    const auto g0 = Clock::now();
    runs.baseline.push_back(evaluate(train_source_only(cfg, src), tgt).macro_f1);
    runs.full.push_back(evaluate(train(cfg, src, unlabeled).model, tgt).macro_f1);
    gain_secs += seconds_since(g0);
    for (std::size_t row = 0; row + 1 < masks.size(); ++row) {
      RunConfig a = cfg;
      a.components = masks[row];
      runs.ablation[row].push_back(evaluate(train(a, src, unlabeled).model, tgt).macro_f1);
    }
    std::printf("  seed %llu: baseline %.4f full %.4f rows1-4",
                static_cast<unsigned long long>(cfg.seed), runs.baseline.back(),
                runs.full.back());
    for (const auto& row : runs.ablation) std::printf(" %.4f", row.back());
    std::printf("\n");
    std::fflush(stdout);
  }
  auto mean = [](const std::vector<double>& v) {
    double s = 0.0;
    for (double x : v) s += x;
    return s / static_cast<double>(v.size());
  };
  const double base = mean(runs.baseline), full = mean(runs.full);
  report(6, "target-macro-f1-gain", full - base >= kGainMin && gain_secs < kGainSeconds,
         fmt("mean over %llu seeds: baseline %.4f, full %.4f, gain %+.4f (min %+.2f), %.0f s",
             static_cast<unsigned long long>(kSeeds), base, full, full - base, kGainMin,
             gain_secs));

  std::vector<double> row_mean;
  for (const auto& r : runs.ablation) row_mean.push_back(mean(r));
  row_mean.push_back(full);
  // Rows: 1 no LCIB, 2 no adversarial, 3 sup only, 4 no anti-divergence, 5 full.
  const bool full_vs_no_anti = row_mean[4] >= row_mean[3] - kAblationSlack;
  const bool no_anti_vs_sup = row_mean[3] >= row_mean[2] - kAblationSlack;
  bool no_lcib_lowest = true;
  for (std::size_t i = 1; i < row_mean.size(); ++i)
    no_lcib_lowest = no_lcib_lowest && row_mean[0] <= row_mean[i] + kAblationSlack;
  report(7, "ablation-ordering", full_vs_no_anti && no_anti_vs_sup && no_lcib_lowest,
         fmt("row means %.4f %.4f %.4f %.4f %.4f (slack %.2f), %.0f s total", row_mean[0],
             row_mean[1], row_mean[2], row_mean[3], row_mean[4], kAblationSlack,
             seconds_since(t0)));
}

void criterion_determinism(const Desk& desk) {
  RunConfig cfg = desk.run;
  cfg.epochs = 3;
  cfg.warmup_epochs = std::min(cfg.warmup_epochs, std::size_t{1});
  auto [src, tgt] = generate_synthetic_pair(desk.synth);
  auto stream = [&] {
    std::ostringstream out;
    TrainOptions opts;
    opts.target_truth = &tgt.labels;
    opts.on_epoch = [&](const EpochMetrics& m) { write_metrics_line(out, m); };
    train(cfg, src, tgt, opts);
    return out.str();
  };
  const std::string a = stream(), b = stream();
  report(8, "deterministic-metrics", !a.empty() && a == b,
         fmt("two runs, seed %llu: %zu and %zu bytes, %s",
             static_cast<unsigned long long>(cfg.seed), a.size(), b.size(),
             a == b ? "identical" : "different"));
}

void criterion_macro_f1() {
  struct Case {
    std::vector<std::size_t> truth, pred;
    std::size_t classes;
    double expected;
  };
  // Expected values are exact fractions worked out per class.
  const std::vector<Case> cases{
      {{0, 0, 0, 1, 1, 2}, {0, 0, 1, 1, 2, 2}, 3, 59.0 / 90.0},
      {{0, 1, 2}, {0, 1, 2}, 3, 1.0},
      {{0, 1, 2}, {1, 2, 0}, 3, 0.0},
      {{0, 0, 0, 0}, {0, 0, 0, 0}, 2, 1.0 / 2.0},  // class 1: 0/0 := 0
      {{0, 0, 1, 1}, {0, 0, 0, 0}, 2, 1.0 / 3.0},
      {{0}, {0}, 1, 1.0},
      {{0}, {1}, 2, 0.0},
      {{1, 1, 1, 1}, {0, 1, 2, 3}, 4, 1.0 / 10.0},
      {{0, 1, 0, 1, 0, 1}, {0, 0, 1, 1, 0, 0}, 2, 17.0 / 35.0},
      {{2, 2, 2}, {2, 2, 2}, 5, 1.0 / 5.0},
      {{0, 3, 1, 0, 1, 0, 2, 3}, {1, 3, 0, 1, 0, 1, 3, 2}, 4, 1.0 / 8.0},
      {{0, 0, 0, 2, 2, 1, 0, 0, 0}, {0, 0, 0, 0, 0, 1, 1, 0, 2}, 3, 4.0 / 9.0},
      {{2, 0, 1, 1, 0}, {1, 1, 0, 0, 1}, 3, 0.0},
      {{1, 0, 1, 0, 1, 1, 1, 1}, {1, 0, 1, 1, 0, 0, 1, 0}, 2, 7.0 / 15.0},
      {{0, 3, 2, 3, 0, 3, 0, 1, 1}, {0, 1, 3, 2, 2, 2, 3, 0, 2}, 4, 1.0 / 10.0},
      {{3, 0, 1}, {2, 2, 1}, 4, 1.0 / 4.0},
      {{0, 2, 2, 2, 1, 0, 1}, {2, 3, 1, 0, 0, 3, 0}, 4, 0.0},
      {{1, 1, 1, 2, 1, 0, 0, 2, 0, 1, 1, 0}, {0, 2, 2, 0, 2, 1, 0, 0, 1, 1, 0, 0}, 3,
       28.0 / 135.0},
      {{1, 3, 4, 1, 4, 3, 3}, {2, 3, 2, 2, 3, 3, 1}, 5, 2.0 / 15.0},
      {{0, 1, 1, 0, 0, 1, 1, 1, 0}, {1, 0, 1, 1, 1, 1, 1, 1, 1}, 2, 4.0 / 13.0},
  };
  double worst = 0.0;
  for (const auto& c : cases)
    worst = std::max(worst, std::abs(macro_f1(c.pred, c.truth, c.classes) - c.expected));
  report(9, "macro-f1-hand-cases", worst < kMetricTol,
         fmt("%zu cases, max |diff| %.3e (tol %.0e)", cases.size(), worst, kMetricTol));
}

}  // namespace

int main() {
  try {
    const Desk desk = load_desk();
    criterion_oracle();
    criterion_gradcheck();
    criterion_loss_oracles();
    criteria_basis_and_schedule(desk);
    criterion_macro_f1();
    criterion_determinism(desk);
    criteria_gain_and_ablation(desk);
  } catch (const std::exception& e) {
    std::printf("FAIL acceptance aborted: %s\n", e.what());
    return 1;
  }
  std::printf("%s: %d criteria failed\n", failures == 0 ? "ALL PASS" : "SOME FAIL", failures);
  return failures == 0 ? 0 : 1;
}
