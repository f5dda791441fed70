#pragma once

// Synthetic paired-domain action videos. A bright disk moves over a static
// textured background according to one of eight motion programs; the target
// domain is the same kind of clip after gamma darkening, contrast loss and
// sensor noise.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <numbers>
#include <stdexcept>
#include <string>
#include <vector>

#include "dkt/rng.hpp"
#include "dkt/tokenizer.hpp"

namespace dkt {

enum class Motion : std::uint8_t { move_right, move_left, move_up, move_down, diagonal, zigzag, grow, orbit };

inline constexpr std::size_t kMotionCount = 8;

inline const char* motion_name(std::size_t class_id) {
  static constexpr const char* names[kMotionCount] = {"move-right", "move-left", "move-up", "move-down",
                                                      "diagonal",   "zigzag",    "grow",    "rotate-orbit"};
  return class_id < kMotionCount ? names[class_id] : "unknown";
}

struct DomainShift {
  double gamma = 2.2;
  double contrast = 0.4;
  double noise = 0.05;

  void validate() const {
    if (!(gamma >= 1.0)) throw std::invalid_argument("darken: gamma must be >= 1, got " + std::to_string(gamma));
    if (!(contrast > 0.0 && contrast <= 1.0))
      throw std::invalid_argument("darken: contrast must be in (0,1], got " + std::to_string(contrast));
    if (!(noise >= 0.0)) throw std::invalid_argument("darken: noise must be >= 0, got " + std::to_string(noise));
  }
};

struct SynthConfig {
  std::size_t num_classes = 8;
  std::size_t train_per_class = 20;
  std::size_t test_per_class = 10;
  std::size_t frames = 15;  // raw frames per rendered video
  std::size_t height = 32, width = 32, channels = 1;
  DomainShift shift;
  double randomness = 1.0;  // scales every random range; 0 renders class prototypes
  std::uint64_t seed = 1;

  void validate() const {
    if (num_classes < 1 || num_classes > kMotionCount)
      throw std::invalid_argument("synth: num_classes must be in [1," + std::to_string(kMotionCount) + "]");
    if (frames < 1 || height < 8 || width < 8 || channels < 1)
      throw std::invalid_argument("synth: clip must have >= 1 frame and >= 8x8 pixels");
    if (!(randomness >= 0.0 && randomness <= 1.0)) throw std::invalid_argument("synth: randomness must be in [0,1]");
    shift.validate();
  }
};

struct PairItem {
  VideoClip source, target;
  std::size_t label() const { return source.label; }
};

using PairBatch = std::vector<PairItem>;

struct Dataset {
  std::size_t num_classes = 0;
  PairBatch train;
  std::vector<VideoClip> test_source, test_target;
};

namespace detail {

struct Sprite {
  double x, y, radius;
};

inline double triangle_wave(double u) {
  double f = u - std::floor(u);
  return f < 0.5 ? 4 * f - 1 : 3 - 4 * f;
}

}  // namespace detail

/// Source-domain clip of the given motion class.
inline VideoClip render_action(std::size_t class_id, Rng& rng, const SynthConfig& cfg) {
  if (class_id >= cfg.num_classes)
    throw std::invalid_argument("render_action: class " + std::to_string(class_id) + " >= " +
                                std::to_string(cfg.num_classes));
  const double rho = cfg.randomness;
  // mid +/- half, scaled by the randomness knob
  auto jit = [&](double mid, double half) { return mid + rho * half * rng.uniform(-1.0, 1.0); };
  const double H = static_cast<double>(cfg.height), W = static_cast<double>(cfg.width);
  const double scale = std::min(H, W) / 32.0;

  const double radius = jit(3.5, 1.0) * scale;
  const double intensity = jit(0.92, 0.06);
  const double bg_level = jit(0.30, 0.08);
  struct Wave {
    double amp, fx, fy, phase;
  };
  Wave waves[2];
  for (auto& w : waves)
    w = {jit(0.06, 0.03), jit(2.0, 1.0) / W, jit(2.0, 1.0) / H, jit(std::numbers::pi, std::numbers::pi)};
  const double dist = jit(0.45, 0.10) * std::min(H, W);
  const double margin = radius + 1.0;
  auto place = [&](double extent, double span) { return margin + (extent - 2 * margin - span) * jit(0.5, 0.5); };

  const auto motion = static_cast<Motion>(class_id);
  // Parameters of each motion program; position as a function of u in [0,1].
  double x0 = 0, y0 = 0, amp = 0, orbit_r = 0, theta0 = 0, sweep = 0;
  switch (motion) {
    case Motion::move_right:
    case Motion::move_left:
      x0 = place(W, dist);
      y0 = place(H, 0);
      break;
    case Motion::move_up:
    case Motion::move_down:
      x0 = place(W, 0);
      y0 = place(H, dist);
      break;
    case Motion::diagonal:
      x0 = place(W, dist * 0.7);
      y0 = place(H, dist * 0.7);
      break;
    case Motion::zigzag:
      amp = jit(0.12, 0.03) * H;
      x0 = place(W, dist);
      y0 = margin + amp + (H - 2 * (margin + amp)) * jit(0.5, 0.5);
      break;
    case Motion::grow:
      x0 = margin * 2 + (W - 4 * margin) * jit(0.5, 0.5);
      y0 = margin * 2 + (H - 4 * margin) * jit(0.5, 0.5);
      break;
    case Motion::orbit:
      orbit_r = jit(0.26, 0.04) * std::min(H, W);
      x0 = W / 2 + jit(0.0, 0.05) * W;
      y0 = H / 2 + jit(0.0, 0.05) * H;
      theta0 = jit(std::numbers::pi, std::numbers::pi);
      sweep = jit(1.5, 0.3) * std::numbers::pi;
      break;
  }
  auto sprite_at = [&](double u) -> detail::Sprite {
    switch (motion) {
      case Motion::move_right: return {x0 + dist * u, y0, radius};
      case Motion::move_left: return {x0 + dist * (1 - u), y0, radius};
      case Motion::move_down: return {x0, y0 + dist * u, radius};
      case Motion::move_up: return {x0, y0 + dist * (1 - u), radius};
      case Motion::diagonal: return {x0 + 0.7 * dist * u, y0 + 0.7 * dist * u, radius};
      case Motion::zigzag: return {x0 + dist * u, y0 + amp * detail::triangle_wave(2 * u), radius};
      case Motion::grow: return {x0, y0, radius * (0.6 + 1.4 * u)};
      case Motion::orbit:
        return {x0 + orbit_r * std::cos(theta0 + sweep * u), y0 - orbit_r * std::sin(theta0 + sweep * u), radius};
    }
    return {x0, y0, radius};
  };

  VideoClip clip;
  clip.frames = cfg.frames;
  clip.height = cfg.height;
  clip.width = cfg.width;
  clip.channels = cfg.channels;
  clip.label = class_id;
  clip.domain = Domain::source;
  clip.pixels.resize(clip.frames * clip.frame_size());

  std::vector<double> background(cfg.height * cfg.width);
  for (std::size_t y = 0; y < cfg.height; ++y)
    for (std::size_t x = 0; x < cfg.width; ++x) {
      double v = bg_level;
      for (const auto& w : waves)
        v += w.amp * std::sin(2 * std::numbers::pi * (w.fx * static_cast<double>(x) + w.fy * static_cast<double>(y)) +
                              w.phase);
      background[y * cfg.width + x] = v;
    }

  for (std::size_t t = 0; t < cfg.frames; ++t) {
    const double u = cfg.frames > 1 ? static_cast<double>(t) / static_cast<double>(cfg.frames - 1) : 0.0;
    const auto sp = sprite_at(u);
    for (std::size_t y = 0; y < cfg.height; ++y)
      for (std::size_t x = 0; x < cfg.width; ++x) {
        const double dx = static_cast<double>(x) + 0.5 - sp.x, dy = static_cast<double>(y) + 0.5 - sp.y;
        const double alpha = std::clamp(sp.radius + 0.5 - std::sqrt(dx * dx + dy * dy), 0.0, 1.0);
        const double v = std::clamp(background[y * cfg.width + x] * (1 - alpha) + intensity * alpha, 0.0, 1.0);
        for (std::size_t c = 0; c < cfg.channels; ++c) clip.at(t, y, x, c) = static_cast<float>(v);
      }
  }
  return clip;
}

/// pixel <- clamp(contrast * pixel^gamma + N(0, noise), 0, 1)
inline VideoClip darken(const VideoClip& clip, const DomainShift& shift, Rng& rng) {
  shift.validate();
  VideoClip out = clip;
  out.domain = Domain::target;
  for (auto& p : out.pixels) {
    double v = shift.contrast * std::pow(static_cast<double>(p), shift.gamma);
    if (shift.noise > 0) v += rng.normal(0.0, shift.noise);
    p = static_cast<float>(std::clamp(v, 0.0, 1.0));
  }
  return out;
}

namespace detail {
enum Stream : std::uint64_t { train_source = 1, train_target = 2, test_source = 3, test_target = 4, noise = 16 };
}

/// Class-balanced train pairs and test clips; every clip has its own derived
/// random stream, so splits are disjoint by construction.
inline Dataset make_dataset(const SynthConfig& cfg) {
  cfg.validate();
  Dataset ds;
  ds.num_classes = cfg.num_classes;
  auto render = [&](std::uint64_t stream, std::size_t k, std::size_t i) {
    Rng rng(derive_seed(cfg.seed, stream, k, i));
    return render_action(k, rng, cfg);
  };
  auto render_dark = [&](std::uint64_t stream, std::size_t k, std::size_t i) {
    Rng noise(derive_seed(cfg.seed, stream + detail::noise, k, i));
    return darken(render(stream, k, i), cfg.shift, noise);
  };
  for (std::size_t k = 0; k < cfg.num_classes; ++k)
    for (std::size_t i = 0; i < cfg.train_per_class; ++i)
      ds.train.push_back({render(detail::train_source, k, i), render_dark(detail::train_target, k, i)});
  for (std::size_t k = 0; k < cfg.num_classes; ++k)
    for (std::size_t i = 0; i < cfg.test_per_class; ++i) {
      ds.test_source.push_back(render(detail::test_source, k, i));
      ds.test_target.push_back(render_dark(detail::test_target, k, i));
    }
  return ds;
}

inline double mean_brightness(const std::vector<VideoClip>& clips) {
  double s = 0;
  std::size_t n = 0;
  for (const auto& c : clips) {
    for (float p : c.pixels) s += p;
    n += c.pixels.size();
  }
  return n ? s / static_cast<double>(n) : 0.0;
}

}  // namespace dkt
