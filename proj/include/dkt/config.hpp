#pragma once

// Flat "key = value" run configuration. Every key has a default; unknown keys
// are rejected. The effective configuration is always written in the fixed
// key order below so it can be diffed and replayed.

#include <algorithm>
#include <cerrno>
#include <cmath>
#include <cstdint>
#include <cstdlib>
#include <map>
#include <sstream>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include "dkt/model.hpp"
#include "dkt/synth.hpp"
#include "dkt/training.hpp"

namespace dkt {

class ConfigError : public std::invalid_argument {
 public:
  ConfigError(const std::string& key, const std::string& msg) : std::invalid_argument(key + ": " + msg), key_(key) {}
  const std::string& key() const { return key_; }

 private:
  std::string key_;
};

struct ConfigKey {
  const char* name;
  const char* default_value;
  const char* help;
};

inline const std::vector<ConfigKey>& config_keys() {
  static const std::vector<ConfigKey> keys = {
      {"seed", "1", "seed for data, initialization and shuffling"},
      {"precision", "64", "floating point width: 64 or 32"},
      // data
      {"num_classes", "8", "number of action classes (<= 8)"},
      {"train_per_class", "20", "training pairs per class"},
      {"test_per_class", "10", "test clips per class and domain"},
      {"frames", "8", "frames per clip fed to the model"},
      {"stride", "2", "temporal sampling stride"},
      {"height", "32", "frame height in pixels"},
      {"width", "32", "frame width in pixels"},
      {"channels", "1", "channels per pixel"},
      {"gamma", "2.2", "target-domain gamma (>= 1)"},
      {"contrast", "0.4", "target-domain contrast in (0,1]"},
      {"noise", "0.05", "target-domain noise std"},
      {"randomness", "1", "scale of all random rendering ranges, in [0,1]"},
      // model
      {"patch", "8", "patch side in pixels"},
      {"dim", "64", "embedding width"},
      {"heads", "4", "attention heads"},
      {"layers", "2", "encoder blocks"},
      {"mlp_ratio", "2", "MLP hidden width / dim"},
      {"attention_mode", "S+T", "S, T or S+T"},
      {"qkv_sharing", "shared", "shared or split query/key/value between time and space passes"},
      {"bridge_init", "source", "initial bridge stream: source, target or mean"},
      // objective
      {"w_src", "1", "source cross-entropy weight"},
      {"w_tgt_ce", "1", "target cross-entropy weight"},
      {"w_bridge", "1", "bridge cross-entropy weight"},
      {"w_dtl", "1", "distillation weight"},
      {"temperature", "1", "distillation temperature"},
      {"cross_attention", "on", "on or off"},
      {"distillation", "on", "on or off"},
      {"strict_uda", "off", "on drops the target cross-entropy"},
      // optimization
      {"optimizer", "adam", "adam or sgd"},
      {"lr", "3e-4", "base learning rate"},
      {"schedule", "cosine", "constant or cosine"},
      {"weight_decay", "0.01", "decoupled weight decay"},
      {"momentum", "0.9", "sgd momentum"},
      {"epochs", "30", "training epochs"},
      {"batch_size", "4", "pairs per optimizer step"},
      {"clip_norm", "1", "global gradient norm limit (0 disables)"},
  };
  return keys;
}

class RunConfig {
 public:
  RunConfig() {
    for (const auto& k : config_keys()) values_[k.name] = k.default_value;
  }

  static bool known(const std::string& key) {
    const auto& ks = config_keys();
    return std::any_of(ks.begin(), ks.end(), [&](const ConfigKey& k) { return key == k.name; });
  }

  void set(const std::string& key, const std::string& value) {
    if (!known(key)) throw ConfigError(key, "unknown configuration key");
    values_[key] = value;
  }

  /// "key = value" or "key=value".
  void set_assignment(const std::string& assignment) {
    auto eq = assignment.find('=');
    if (eq == std::string::npos) throw ConfigError(assignment, "expected key=value");
    set(trim(assignment.substr(0, eq)), trim(assignment.substr(eq + 1)));
  }

  /// Parses a config file body; '#' starts a comment.
  void merge_text(const std::string& text) {
    std::istringstream in(text);
    std::string line;
    while (std::getline(in, line)) {
      if (auto hash = line.find('#'); hash != std::string::npos) line.resize(hash);
      line = trim(line);
      if (line.empty()) continue;
      set_assignment(line);
    }
  }

  static RunConfig from_text(const std::string& text) {
    RunConfig c;
    c.merge_text(text);
    return c;
  }

  std::string to_text() const {
    std::string out;
    for (const auto& k : config_keys()) out += std::string(k.name) + " = " + values_.at(k.name) + "\n";
    return out;
  }

  const std::string& get(const std::string& key) const {
    auto it = values_.find(key);
    if (it == values_.end()) throw ConfigError(key, "unknown configuration key");
    return it->second;
  }

  std::uint64_t get_uint(const std::string& key, std::uint64_t min = 0) const {
    const auto& s = get(key);
    errno = 0;
    char* end = nullptr;
    unsigned long long v = std::strtoull(s.c_str(), &end, 10);
    if (s.empty() || s[0] == '-' || *end != '\0' || errno) throw ConfigError(key, "expected a non-negative integer, got '" + s + "'");
    if (v < min) throw ConfigError(key, "must be >= " + std::to_string(min) + ", got " + s);
    return v;
  }

  double get_real(const std::string& key) const {
    const auto& s = get(key);
    errno = 0;
    char* end = nullptr;
    double v = std::strtod(s.c_str(), &end);
    if (s.empty() || *end != '\0' || errno || !std::isfinite(v)) throw ConfigError(key, "expected a number, got '" + s + "'");
    return v;
  }

  bool get_switch(const std::string& key) const {
    const auto& s = get(key);
    if (s == "on") return true;
    if (s == "off") return false;
    throw ConfigError(key, "expected on or off, got '" + s + "'");
  }

  template <class E>
  E get_choice(const std::string& key, std::initializer_list<std::pair<const char*, E>> choices) const {
    const auto& s = get(key);
    std::string names;
    for (const auto& [name, value] : choices) {
      if (s == name) return value;
      names += (names.empty() ? "" : ", ") + std::string(name);
    }
    throw ConfigError(key, "expected one of " + names + ", got '" + s + "'");
  }

  std::size_t precision() const {
    auto p = get_uint("precision");
    if (p != 32 && p != 64) throw ConfigError("precision", "expected 32 or 64");
    return p;
  }

  AttentionMode attention_mode() const {
    return get_choice<AttentionMode>(
        "attention_mode", {{"S", AttentionMode::space}, {"T", AttentionMode::time}, {"S+T", AttentionMode::space_time}});
  }

  ModelConfig model_config() const {
    ModelConfig m;
    m.clip.frames = get_uint("frames", 1);
    m.clip.stride = get_uint("stride", 1);
    m.clip.height = get_uint("height", 1);
    m.clip.width = get_uint("width", 1);
    m.clip.channels = get_uint("channels", 1);
    m.clip.patch = get_uint("patch", 1);
    m.clip.dim = get_uint("dim", 1);
    m.heads = get_uint("heads", 1);
    m.layers = get_uint("layers");
    m.mlp_ratio = get_uint("mlp_ratio", 1);
    m.num_classes = get_uint("num_classes", 2);
    m.attention = attention_mode();
    m.qkv = get_choice<QkvSharing>("qkv_sharing", {{"shared", QkvSharing::shared}, {"split", QkvSharing::split}});
    m.bridge_init = get_choice<BridgeInit>(
        "bridge_init", {{"source", BridgeInit::source}, {"target", BridgeInit::target}, {"mean", BridgeInit::mean}});
    if (m.clip.height % m.clip.patch) throw ConfigError("patch", "must divide height");
    if (m.clip.width % m.clip.patch) throw ConfigError("patch", "must divide width");
    if (m.clip.dim % m.heads) throw ConfigError("heads", "must divide dim");
    return m;
  }

  SynthConfig synth_config() const {
    SynthConfig s;
    const auto m = model_config();
    s.num_classes = m.num_classes;
    if (s.num_classes > kMotionCount) throw ConfigError("num_classes", "at most 8 motion classes are available");
    s.train_per_class = get_uint("train_per_class", 1);
    s.test_per_class = get_uint("test_per_class", 1);
    s.frames = m.clip.raw_frames();
    s.height = m.clip.height;
    s.width = m.clip.width;
    s.channels = m.clip.channels;
    s.shift.gamma = get_real("gamma");
    s.shift.contrast = get_real("contrast");
    s.shift.noise = get_real("noise");
    s.randomness = get_real("randomness");
    s.seed = derive_seed(get_uint("seed"), 0x44415441ULL);
    if (!(s.shift.gamma >= 1)) throw ConfigError("gamma", "must be >= 1");
    if (!(s.shift.contrast > 0 && s.shift.contrast <= 1)) throw ConfigError("contrast", "must be in (0,1]");
    if (!(s.shift.noise >= 0)) throw ConfigError("noise", "must be >= 0");
    if (!(s.randomness >= 0 && s.randomness <= 1)) throw ConfigError("randomness", "must be in [0,1]");
    return s;
  }

  TrainConfig train_config() const {
    TrainConfig t;
    t.optimizer.kind = get_choice<OptimizerKind>("optimizer", {{"adam", OptimizerKind::adam}, {"sgd", OptimizerKind::sgd}});
    t.optimizer.lr = get_real("lr");
    t.optimizer.weight_decay = get_real("weight_decay");
    t.optimizer.momentum = get_real("momentum");
    t.schedule = get_choice<Schedule>("schedule", {{"constant", Schedule::constant}, {"cosine", Schedule::cosine}});
    t.epochs = get_uint("epochs", 1);
    t.batch_size = get_uint("batch_size", 1);
    t.clip_norm = get_real("clip_norm");
    t.seed = derive_seed(get_uint("seed"), 0x545241494EULL);
    t.weights.source = get_real("w_src");
    t.weights.target_ce = get_real("w_tgt_ce");
    t.weights.bridge = get_real("w_bridge");
    t.weights.distill = get_real("w_dtl");
    t.weights.temperature = get_real("temperature");
    t.flags.attention = attention_mode();
    t.flags.cross_attention = get_switch("cross_attention");
    t.flags.distillation = get_switch("distillation");
    t.flags.strict_uda = get_switch("strict_uda");
    if (!(t.optimizer.lr >= 0)) throw ConfigError("lr", "must be >= 0");
    if (!(t.optimizer.weight_decay >= 0)) throw ConfigError("weight_decay", "must be >= 0");
    if (!(t.clip_norm >= 0)) throw ConfigError("clip_norm", "must be >= 0");
    for (const char* k : {"w_src", "w_tgt_ce", "w_bridge", "w_dtl"})
      if (get_real(k) < 0) throw ConfigError(k, "must be >= 0");
    if (!(t.weights.temperature > 0)) throw ConfigError("temperature", "must be > 0");
    try {
      t.effective_weights().validate();
    } catch (const std::invalid_argument& e) {
      throw ConfigError("w_src", std::string("no active loss term after ablation flags (") + e.what() + ")");
    }
    return t;
  }

  std::uint64_t init_seed() const { return derive_seed(get_uint("seed"), 0x494E4954ULL); }

  /// Parses every typed view; throws ConfigError naming the first bad key.
  void validate() const {
    precision();
    model_config();
    synth_config();
    train_config();
  }

 private:
  static std::string trim(const std::string& s) {
    const auto b = s.find_first_not_of(" \t\r\n");
    if (b == std::string::npos) return {};
    const auto e = s.find_last_not_of(" \t\r\n");
    return s.substr(b, e - b + 1);
  }

  std::map<std::string, std::string> values_;
};

}  // namespace dkt
