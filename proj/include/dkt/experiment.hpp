#pragma once

// Config-driven runs and ablation grids on top of the training loop.

#include <cmath>
#include <fstream>
#include <functional>
#include <map>
#include <sstream>
#include <string>
#include <utility>
#include <vector>

#include "dkt/config.hpp"
#include "dkt/io.hpp"
#include "dkt/model.hpp"
#include "dkt/synth.hpp"
#include "dkt/training.hpp"

namespace dkt {

inline Dataset dataset_for(const RunConfig& cfg) { return make_dataset(cfg.synth_config()); }

template <class T>
struct RunResult {
  ModelParams<T> params;
  std::vector<MetricsRecord> history;
};

/// Fresh initialization from the config seed, then training.
template <class T>
RunResult<T> run_training(const RunConfig& cfg, const Dataset& data, const EpochCallback& on_epoch = {}) {
  RunResult<T> r{ModelParams<T>::init(cfg.model_config(), cfg.init_seed()), {}};
  r.history = train(r.params, data, cfg.train_config(), on_epoch);
  return r;
}

/// Attention scores formed by one single-clip branch, averaged per layer.
inline std::uint64_t scores_per_layer(const ModelConfig& m) {
  ScoreCounter c;
  auto p = ModelParams<double>::init(m, 1);
  VideoClip clip;
  clip.frames = m.clip.raw_frames();
  clip.height = m.clip.height;
  clip.width = m.clip.width;
  clip.channels = m.clip.channels;
  clip.pixels.assign(clip.frames * clip.frame_size(), 0.5f);
  NoGradGuard g;
  ForwardOptions opt;
  opt.counter = &c;
  forward_branch(clip, p, opt);
  return m.layers ? c.scores / m.layers : 0;
}

// ---------------------------------------------------------------------------
// Ablation grids

/// Ordered axes, each a config key with a list of values. Text form is one
/// "key = v1, v2, ..." line per axis.
struct AblationGrid {
  std::vector<std::pair<std::string, std::vector<std::string>>> axes;

  static AblationGrid parse(const std::string& text) {
    AblationGrid g;
    std::istringstream in(text);
    std::string line;
    while (std::getline(in, line)) {
      if (auto hash = line.find('#'); hash != std::string::npos) line.resize(hash);
      if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
      auto eq = line.find('=');
      if (eq == std::string::npos) throw ConfigError(trim(line), "grid line must be key = v1, v2, ...");
      std::string key = trim(line.substr(0, eq));
      if (!RunConfig::known(key)) throw ConfigError(key, "unknown configuration key in grid");
      for (const auto& [k, v] : g.axes)
        if (k == key) throw ConfigError(key, "axis given twice in grid");
      std::vector<std::string> values;
      std::istringstream vs(line.substr(eq + 1));
      std::string v;
      while (std::getline(vs, v, ',')) {
        v = trim(v);
        if (v.empty()) throw ConfigError(key, "empty value in grid");
        values.push_back(v);
      }
      if (values.empty()) throw ConfigError(key, "grid axis has no values");
      g.axes.emplace_back(key, std::move(values));
    }
    if (g.axes.empty()) throw ConfigError("grid", "grid has no axes");
    return g;
  }

  /// Cartesian product, first axis slowest.
  std::vector<std::vector<std::pair<std::string, std::string>>> cells() const {
    std::vector<std::vector<std::pair<std::string, std::string>>> out{{}};
    for (const auto& [key, values] : axes) {
      std::vector<std::vector<std::pair<std::string, std::string>>> next;
      for (const auto& prefix : out)
        for (const auto& v : values) {
          auto c = prefix;
          c.emplace_back(key, v);
          next.push_back(std::move(c));
        }
      out = std::move(next);
    }
    return out;
  }

 private:
  static std::string trim(const std::string& s) {
    const auto b = s.find_first_not_of(" \t\r\n");
    if (b == std::string::npos) return {};
    return s.substr(b, s.find_last_not_of(" \t\r\n") - b + 1);
  }
};

struct AblationRow {
  std::vector<std::pair<std::string, std::string>> cell;
  MetricsRecord final;
  std::uint64_t scores_per_layer = 0;
};

using CellCallback = std::function<void(std::size_t index, std::size_t total, const AblationRow&)>;

/// Trains every grid cell from `base` overridden by the cell's values. All
/// cells share the base seed; datasets are generated once per distinct data
/// configuration.
inline std::vector<AblationRow> ablate(const RunConfig& base, const AblationGrid& grid,
                                       const CellCallback& on_cell = {}) {
  const auto cells = grid.cells();
  std::vector<RunConfig> configs;
  for (const auto& cell : cells) {
    RunConfig c = base;
    for (const auto& [k, v] : cell) c.set(k, v);
    c.validate();
    configs.push_back(std::move(c));
  }
  std::map<std::string, Dataset> cache;
  std::vector<AblationRow> rows;
  for (std::size_t i = 0; i < cells.size(); ++i) {
    const auto& cfg = configs[i];
    auto s = cfg.synth_config();
    std::ostringstream key;
    key << s.num_classes << ' ' << s.train_per_class << ' ' << s.test_per_class << ' ' << s.frames << ' ' << s.height
        << ' ' << s.width << ' ' << s.channels << ' ' << format_real(s.shift.gamma) << ' '
        << format_real(s.shift.contrast) << ' ' << format_real(s.shift.noise) << ' ' << format_real(s.randomness)
        << ' ' << s.seed;
    auto it = cache.find(key.str());
    if (it == cache.end()) it = cache.emplace(key.str(), make_dataset(s)).first;

    AblationRow row;
    row.cell = cells[i];
    row.final = cfg.precision() == 32 ? run_training<float>(cfg, it->second).history.back()
                                      : run_training<double>(cfg, it->second).history.back();
    row.scores_per_layer = scores_per_layer(cfg.model_config());
    if (on_cell) on_cell(i, cells.size(), row);
    rows.push_back(std::move(row));
  }
  return rows;
}

inline std::string ablation_csv(const AblationGrid& grid, const std::vector<AblationRow>& rows) {
  std::string out;
  for (const auto& [k, v] : grid.axes) out += k + ",";
  out += "scores_per_layer,loss_total,top1_source,top1_target,top5_source,top5_target\n";
  for (const auto& r : rows) {
    for (const auto& [k, v] : r.cell) out += v + ",";
    out += std::to_string(r.scores_per_layer);
    for (double v : {r.final.loss_total, r.final.test_source.top1, r.final.test_target.top1, r.final.test_source.top5,
                     r.final.test_target.top5})
      out += "," + format_real(v);
    out += "\n";
  }
  return out;
}

// ---------------------------------------------------------------------------
// Attention and feature export

inline double cosine_similarity(std::span<const double> a, std::span<const double> b) {
  if (a.size() != b.size()) throw ShapeError("cosine_similarity: length mismatch");
  double ab = 0, aa = 0, bb = 0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    ab += a[i] * b[i];
    aa += a[i] * a[i];
    bb += b[i] * b[i];
  }
  if (aa == 0 || bb == 0) return 0;
  return ab / std::sqrt(aa * bb);
}

struct ExportedFile {
  std::string name;
  std::string contents;
};

/// Per-branch, per-layer, per-head maps of the last attention pass (header
/// "query,k0,k1,..."), the final class-token features and a summary with
/// their pairwise cosine similarities.
template <class T>
std::vector<ExportedFile> export_attention(const ModelParams<T>& params, const VideoClip& source,
                                           const VideoClip& target) {
  NoGradGuard guard;
  ForwardOptions opt;
  opt.record_maps = true;
  auto out = forward_triple(source, target, params, BranchSelection{}, opt);
  const std::pair<const char*, const BranchOutput<T>*> branches[] = {
      {"source", &*out.source}, {"target", &*out.target}, {"bridge", &*out.bridge}};

  std::vector<ExportedFile> files;
  std::vector<std::vector<double>> feats;
  for (const auto& [name, b] : branches) {
    for (std::size_t l = 0; l < b->maps.size(); ++l) {
      const auto& m = b->maps[l];
      for (std::size_t h = 0; h < m.heads; ++h) {
        std::string csv = "query";
        for (std::size_t k = 0; k < m.tokens; ++k) csv += ",k" + std::to_string(k);
        csv += "\n";
        for (std::size_t q = 0; q < m.tokens; ++q) {
          csv += std::to_string(q);
          for (std::size_t k = 0; k < m.tokens; ++k) csv += "," + format_real(static_cast<double>(m.at(h, q, k)));
          csv += "\n";
        }
        files.push_back({"attn_" + std::string(name) + "_l" + std::to_string(l) + "_h" + std::to_string(h) + ".csv",
                         std::move(csv)});
      }
    }
    std::vector<double> f;
    for (T v : b->cls_feature.data()) f.push_back(static_cast<double>(v));
    feats.push_back(std::move(f));
  }

  std::string fcsv = "branch";
  for (std::size_t i = 0; i < feats[0].size(); ++i) fcsv += ",f" + std::to_string(i);
  fcsv += "\n";
  for (std::size_t b = 0; b < 3; ++b) {
    fcsv += branches[b].first;
    for (double v : feats[b]) fcsv += "," + format_real(v);
    fcsv += "\n";
  }
  files.push_back({"features.csv", std::move(fcsv)});

  std::string s = "metric,value\n";
  s += "cosine_source_target," + format_real(cosine_similarity(feats[0], feats[1])) + "\n";
  s += "cosine_source_bridge," + format_real(cosine_similarity(feats[0], feats[2])) + "\n";
  s += "cosine_target_bridge," + format_real(cosine_similarity(feats[1], feats[2])) + "\n";
  s += "label," + std::to_string(source.label) + "\n";
  s += "predicted_source," + std::to_string(infer(source, params).label) + "\n";
  s += "predicted_target," + std::to_string(infer(target, params).label) + "\n";
  files.push_back({"summary.csv", std::move(s)});
  return files;
}

}  // namespace dkt
