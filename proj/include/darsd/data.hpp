#pragma once

// Time-series datasets: in-memory layout, the on-disk pair meta.txt/data.csv,
// and a seeded generator of source/target pairs with a controlled domain shift.

#include <cmath>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <numbers>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "darsd/keyvalue.hpp"
#include "darsd/rng.hpp"
#include "darsd/tensor.hpp"

namespace darsd {

struct DatasetMeta {
  std::size_t length = 0;    // T
  std::size_t channels = 0;  // D
  std::size_t classes = 0;   // n_c
  std::size_t samples = 0;
  std::string domain = "source";
  bool labeled = true;
};

struct Dataset {
  DatasetMeta meta;
  std::vector<double> values;        // samples x T x D, row-major
  std::vector<std::size_t> labels;   // empty when unlabeled

  std::size_t stride() const { return meta.length * meta.channels; }

  // [rows.size() x T x D] batch.
  Tensor batch(const std::vector<std::size_t>& rows) const {
    const std::size_t s = stride();
    std::vector<double> out(rows.size() * s);
    for (std::size_t i = 0; i < rows.size(); ++i) {
      std::copy_n(values.begin() + static_cast<std::ptrdiff_t>(rows[i] * s), s,
                  out.begin() + static_cast<std::ptrdiff_t>(i * s));
    }
    return Tensor({rows.size(), meta.length, meta.channels}, std::move(out));
  }

  Tensor all() const {
    std::vector<std::size_t> rows(meta.samples);
    for (std::size_t i = 0; i < rows.size(); ++i) rows[i] = i;
    return batch(rows);
  }

  std::vector<std::size_t> labels_of(const std::vector<std::size_t>& rows) const {
    std::vector<std::size_t> out;
    out.reserve(rows.size());
    for (auto r : rows) out.push_back(labels.at(r));
    return out;
  }
};

// Environment artifacts of one domain.
struct DomainArtifacts {
  double noise_sigma = 0.1;
  std::vector<double> channel_bias;  // one per channel; empty means zero
  double amplitude_scale = 1.0;
  double time_warp = 0.0;  // relative sampling-rate change
};

// Class-conditional waveform shared by both domains. Channel ch of class c is
//   a_ch * sin(2 pi f_c t / T + phi_c + ch * spread_c) + trend_c * (t / T - 1/2)
struct ClassPattern {
  double frequency;  // cycles per window
  double phase;
  double trend;
  double channel_spread;
};

struct SyntheticShiftConfig {
  std::size_t classes = 4;
  std::size_t length = 64;
  std::size_t channels = 3;
  std::size_t source_samples = 400;
  std::size_t target_samples = 400;
  std::vector<ClassPattern> patterns;  // empty -> default_patterns(classes)
  double within_class_jitter = 0.1;    // relative frequency / amplitude variation
  DomainArtifacts source{0.1, {}, 1.0, 0.0};
  DomainArtifacts target{0.3, {0.8, -0.6, 0.5}, 1.6, 0.2};
  double target_imbalance = 1.0;  // class weight ratio between consecutive classes
  std::uint64_t seed = 7;

  static std::vector<ClassPattern> default_patterns(std::size_t classes) {
    std::vector<ClassPattern> out;
    for (std::size_t c = 0; c < classes; ++c) {
      const double k = static_cast<double>(c);
      out.push_back({2.0 + 2.0 * k, 0.7 * k, (c % 2 == 0 ? 1.0 : -1.0) * 0.5,
                     0.6 + 0.5 * k});
    }
    return out;
  }

  static const std::vector<std::string>& keys() {
    static const std::vector<std::string> k{
        "classes", "length", "channels", "source_samples", "target_samples",
        "within_class_jitter", "target_imbalance", "seed",
        "source_noise", "source_bias", "source_scale", "source_warp",
        "target_noise", "target_bias", "target_scale", "target_warp"};
    return k;
  }

  void apply(const KeyValueFile& kv) {
    kv.require_known(keys());
    kv.get("classes", classes);
    kv.get("length", length);
    kv.get("channels", channels);
    kv.get("source_samples", source_samples);
    kv.get("target_samples", target_samples);
    kv.get("within_class_jitter", within_class_jitter);
    kv.get("target_imbalance", target_imbalance);
    kv.get("seed", seed);
    for (auto [name, art] : {std::pair{"source_", &source}, std::pair{"target_", &target}}) {
      const std::string p = name;
      kv.get(p + "noise", art->noise_sigma);
      kv.get(p + "bias", art->channel_bias);
      kv.get(p + "scale", art->amplitude_scale);
      kv.get(p + "warp", art->time_warp);
    }
    validate();
  }

  void validate() const {
    if (classes < 2 || length < 2 || channels < 1) {
      throw ContractError("synthetic config needs >= 2 classes, length >= 2, >= 1 channel");
    }
    if (!patterns.empty() && patterns.size() != classes) {
      throw ContractError("synthetic config: one pattern per class required");
    }
    for (const auto* a : {&source, &target}) {
      if (!a->channel_bias.empty() && a->channel_bias.size() != channels) {
        throw ContractError("synthetic config: channel_bias needs one value per channel");
      }
      if (a->noise_sigma < 0.0 || a->amplitude_scale <= 0.0) {
        throw ContractError("synthetic config: invalid artifact parameters");
      }
    }
    if (target_imbalance <= 0.0) throw ContractError("target_imbalance must be > 0");
  }
};

namespace detail {

inline Dataset synthesize_domain(const SyntheticShiftConfig& cfg,
                                 const std::vector<ClassPattern>& patterns,
                                 const DomainArtifacts& art, std::size_t n,
                                 double imbalance, const std::string& domain, Rng& rng) {
  Dataset ds;
  ds.meta = {cfg.length, cfg.channels, cfg.classes, n, domain, true};
  ds.values.resize(n * cfg.length * cfg.channels);
  ds.labels.resize(n);

  // Deterministic class quotas proportional to imbalance^c.
  std::vector<double> weight(cfg.classes);
  double wsum = 0.0;
  for (std::size_t c = 0; c < cfg.classes; ++c) {
    weight[c] = std::pow(imbalance, static_cast<double>(c));
    wsum += weight[c];
  }
  std::vector<std::size_t> labels;
  for (std::size_t c = 0; c < cfg.classes; ++c) {
    const auto quota = c + 1 == cfg.classes
                           ? n - labels.size()
                           : static_cast<std::size_t>(std::floor(n * weight[c] / wsum));
    labels.insert(labels.end(), std::min(quota, n - labels.size()), c);
  }
  rng.shuffle(labels);

  const double T = static_cast<double>(cfg.length);
  for (std::size_t i = 0; i < n; ++i) {
    const std::size_t c = labels[i];
    const auto& p = patterns[c];
    ds.labels[i] = c;
    const double freq = p.frequency * (1.0 + cfg.within_class_jitter * rng.uniform(-1.0, 1.0));
    const double amp = 1.0 + cfg.within_class_jitter * rng.uniform(-1.0, 1.0);
    const double offset = rng.uniform(0.0, 2.0 * std::numbers::pi);
    for (std::size_t t = 0; t < cfg.length; ++t) {
      const double tt = static_cast<double>(t) * (1.0 + art.time_warp);
      for (std::size_t ch = 0; ch < cfg.channels; ++ch) {
        const double phase = 2.0 * std::numbers::pi * freq * tt / T + p.phase + offset +
                             static_cast<double>(ch) * p.channel_spread;
        double v = amp * std::sin(phase) + p.trend * (tt / T - 0.5);
        v *= art.amplitude_scale;
        if (!art.channel_bias.empty()) v += art.channel_bias[ch];
        v += art.noise_sigma * rng.normal();
        ds.values[(i * cfg.length + t) * cfg.channels + ch] = v;
      }
    }
  }
  return ds;
}

}  // namespace detail

// Both domains share the class patterns; only the artifacts differ.
inline std::pair<Dataset, Dataset> generate_synthetic_pair(const SyntheticShiftConfig& cfg) {
  cfg.validate();
  const auto patterns =
      cfg.patterns.empty() ? SyntheticShiftConfig::default_patterns(cfg.classes) : cfg.patterns;
  Rng root(cfg.seed);
  Rng src_rng = root.fork(1);
  Rng tgt_rng = root.fork(2);
  return {detail::synthesize_domain(cfg, patterns, cfg.source, cfg.source_samples, 1.0,
                                    "source", src_rng),
          detail::synthesize_domain(cfg, patterns, cfg.target, cfg.target_samples,
                                    cfg.target_imbalance, "target", tgt_rng)};
}

inline void write_dataset(const Dataset& ds, const std::filesystem::path& dir) {
  std::filesystem::create_directories(dir);
  {
    std::ofstream meta(dir / "meta.txt");
    meta << "T = " << ds.meta.length << "\n"
         << "D = " << ds.meta.channels << "\n"
         << "n_c = " << ds.meta.classes << "\n"
         << "n_samples = " << ds.meta.samples << "\n"
         << "domain = " << ds.meta.domain << "\n"
         << "labeled = " << (ds.meta.labeled ? 1 : 0) << "\n";
    if (!meta) throw std::runtime_error("failed to write " + (dir / "meta.txt").string());
  }
  std::ofstream data(dir / "data.csv");
  data << std::setprecision(17);
  const std::size_t s = ds.stride();
  for (std::size_t i = 0; i < ds.meta.samples; ++i) {
    bool first = true;
    if (ds.meta.labeled) {
      data << ds.labels[i];
      first = false;
    }
    for (std::size_t j = 0; j < s; ++j) {
      if (!first) data << ',';
      data << ds.values[i * s + j];
      first = false;
    }
    data << '\n';
  }
  if (!data) throw std::runtime_error("failed to write " + (dir / "data.csv").string());
}

// Reads meta.txt + data.csv. With drop_labels the label column is parsed
// (and validated) but discarded, the unlabeled view of a target domain.
inline Dataset load_dataset(const std::filesystem::path& dir, bool drop_labels = false) {
  const auto meta_path = (dir / "meta.txt").string();
  const auto kv = KeyValueFile::load(meta_path);
  kv.require_known({"T", "D", "n_c", "n_samples", "domain", "labeled"});
  Dataset ds;
  for (const char* key : {"T", "D", "n_c", "n_samples"}) {
    if (!kv.entries().count(key)) {
      throw ParseError(meta_path, 0, std::string("missing key '") + key + "'");
    }
  }
  kv.get("T", ds.meta.length);
  kv.get("D", ds.meta.channels);
  kv.get("n_c", ds.meta.classes);
  kv.get("n_samples", ds.meta.samples);
  kv.get("domain", ds.meta.domain);
  kv.get("labeled", ds.meta.labeled);
  if (ds.meta.length == 0 || ds.meta.channels == 0 || ds.meta.classes == 0) {
    throw ParseError(meta_path, 0, "T, D and n_c must be positive");
  }

  const auto data_path = (dir / "data.csv").string();
  std::ifstream in(data_path);
  if (!in) throw ParseError(data_path, 0, "cannot open file");
  const std::size_t s = ds.stride();
  const std::size_t expected = s + (ds.meta.labeled ? 1 : 0);
  ds.values.reserve(ds.meta.samples * s);
  std::string line;
  std::size_t row = 0;
  while (std::getline(in, line)) {
    if (trim(line).empty()) continue;
    ++row;
    if (row > ds.meta.samples) {
      throw ParseError(data_path, row, "more rows than n_samples = " +
                                           std::to_string(ds.meta.samples));
    }
    std::vector<std::string> fields;
    std::stringstream ss(line);
    std::string field;
    while (std::getline(ss, field, ',')) fields.push_back(trim(field));
    if (fields.size() != expected) {
      throw ParseError(data_path, row, "row " + std::to_string(row) + " has " +
                                           std::to_string(fields.size()) + " fields, expected " +
                                           std::to_string(expected));
    }
    std::size_t k = 0;
    if (ds.meta.labeled) {
      long long label = -1;
      const auto& f = fields[k++];
      auto [ptr, ec] = std::from_chars(f.data(), f.data() + f.size(), label);
      if (ec != std::errc() || ptr != f.data() + f.size()) {
        throw ParseError(data_path, row, "malformed label '" + f + "'");
      }
      if (label < 0 || static_cast<std::size_t>(label) >= ds.meta.classes) {
        throw ParseError(data_path, row, "label " + f + " out of range [0, " +
                                             std::to_string(ds.meta.classes) + ")");
      }
      ds.labels.push_back(static_cast<std::size_t>(label));
    }
    for (; k < fields.size(); ++k) {
      double v = 0.0;
      const auto& f = fields[k];
      auto [ptr, ec] = std::from_chars(f.data(), f.data() + f.size(), v);
      if (ec != std::errc() || ptr != f.data() + f.size()) {
        throw ParseError(data_path, row, "malformed value '" + f + "'");
      }
      ds.values.push_back(v);
    }
  }
  if (row != ds.meta.samples) {
    throw ParseError(data_path, row, "expected " + std::to_string(ds.meta.samples) +
                                         " rows, found " + std::to_string(row));
  }
  if (drop_labels) {
    ds.labels.clear();
    ds.meta.labeled = false;
  }
  return ds;
}

}  // namespace darsd
