#include <gtest/gtest.h>

#include <map>

#include "dkt/synth.hpp"

namespace {

dkt::SynthConfig small(std::uint64_t seed = 1) {
  dkt::SynthConfig c;
  c.train_per_class = 3;
  c.test_per_class = 2;
  c.seed = seed;
  return c;
}

// Centroid of pixels brighter than any background texel can be.
std::pair<double, double> sprite_centroid(const dkt::VideoClip& c, std::size_t t) {
  double sx = 0, sy = 0, w = 0;
  for (std::size_t y = 0; y < c.height; ++y)
    for (std::size_t x = 0; x < c.width; ++x) {
      const double v = std::max(0.0, static_cast<double>(c.at(t, y, x)) - 0.6);
      sx += v * static_cast<double>(x);
      sy += v * static_cast<double>(y);
      w += v;
    }
  return {sx / w, sy / w};
}

}  // namespace

TEST(Render, ZeroRandomnessIsDeterministicPerClass) {
  auto cfg = small();
  cfg.randomness = 0;
  for (std::size_t k = 0; k < cfg.num_classes; ++k) {
    dkt::Rng a(1), b(999);
    EXPECT_EQ(dkt::render_action(k, a, cfg).pixels, dkt::render_action(k, b, cfg).pixels) << dkt::motion_name(k);
  }
}

TEST(Render, MoveRightCentroidIncreases) {
  auto cfg = small();
  for (std::uint64_t seed = 0; seed < 20; ++seed) {
    dkt::Rng rng(seed);
    auto clip = dkt::render_action(0, rng, cfg);
    ASSERT_STREQ(dkt::motion_name(0), "move-right");
    double prev = -1;
    for (std::size_t t = 0; t < clip.frames; ++t) {
      const double x = sprite_centroid(clip, t).first;
      EXPECT_GT(x, prev) << "seed " << seed << " frame " << t;
      prev = x;
    }
  }
}

TEST(Render, DirectionalClassesMoveTheRightWay) {
  auto cfg = small();
  dkt::Rng rng(3);
  struct Want {
    std::size_t k;
    double dx, dy;
  };
  for (auto w : {Want{1, -1, 0}, Want{2, 0, -1}, Want{3, 0, 1}, Want{4, 1, 1}}) {
    auto c = dkt::render_action(w.k, rng, cfg);
    auto a = sprite_centroid(c, 0), b = sprite_centroid(c, c.frames - 1);
    if (w.dx != 0) {
      EXPECT_GT((b.first - a.first) * w.dx, 5.0) << dkt::motion_name(w.k);
    }
    if (w.dy != 0) {
      EXPECT_GT((b.second - a.second) * w.dy, 5.0) << dkt::motion_name(w.k);
    }
  }
}

TEST(Render, PixelsInUnitInterval) {
  auto ds = dkt::make_dataset(small());
  auto check = [](const dkt::VideoClip& c) {
    for (float p : c.pixels) ASSERT_TRUE(p >= 0.0f && p <= 1.0f);
  };
  for (const auto& p : ds.train) {
    check(p.source);
    check(p.target);
  }
  for (const auto& c : ds.test_target) check(c);
}

TEST(Render, InvalidClass) {
  dkt::Rng rng(1);
  EXPECT_THROW(dkt::render_action(8, rng, small()), std::invalid_argument);
}

TEST(Darken, IdentityParameters) {
  dkt::Rng rng(1);
  auto clip = dkt::render_action(2, rng, small());
  auto out = dkt::darken(clip, {1.0, 1.0, 0.0}, rng);
  EXPECT_EQ(out.pixels, clip.pixels);
  EXPECT_EQ(out.domain, dkt::Domain::target);
}

TEST(Darken, SinglePixelArithmetic) {
  dkt::VideoClip c;
  c.frames = c.height = c.width = c.channels = 1;
  c.pixels = {0.8f};
  dkt::Rng rng(1);
  EXPECT_NEAR(dkt::darken(c, {2.0, 0.5, 0.0}, rng).pixels[0], 0.32, 1e-6);
}

TEST(Darken, ParameterRanges) {
  dkt::VideoClip c;
  dkt::Rng rng(1);
  EXPECT_THROW(dkt::darken(c, {0.9, 0.5, 0.0}, rng), std::invalid_argument);
  EXPECT_THROW(dkt::darken(c, {2.0, 0.0, 0.0}, rng), std::invalid_argument);
  EXPECT_THROW(dkt::darken(c, {2.0, 1.5, 0.0}, rng), std::invalid_argument);
  EXPECT_THROW(dkt::darken(c, {2.0, 0.5, -0.1}, rng), std::invalid_argument);
}

TEST(Darken, BrightnessMonotoneInGammaAndContrast) {
  dkt::Rng rng(4);
  auto clip = dkt::render_action(5, rng, small());
  auto bright = [&](double g, double c) {
    dkt::Rng r(0);
    return dkt::mean_brightness({dkt::darken(clip, {g, c, 0.0}, r)});
  };
  double prev = 2;
  for (double g : {1.0, 1.5, 2.2, 3.0}) {
    const double b = bright(g, 0.7);
    EXPECT_LE(b, prev);
    prev = b;
  }
  prev = -1;
  for (double c : {0.2, 0.4, 0.7, 1.0}) {
    const double b = bright(2.2, c);
    EXPECT_GT(b, prev);
    prev = b;
  }
}

TEST(Dataset, TargetSplitIsDarker) {
  auto ds = dkt::make_dataset(small());
  EXPECT_LT(dkt::mean_brightness(ds.test_target), dkt::mean_brightness(ds.test_source));
}

TEST(Dataset, Counts) {
  auto cfg = small();
  cfg.train_per_class = 10;
  auto ds = dkt::make_dataset(cfg);
  EXPECT_EQ(ds.train.size(), 80u);
  EXPECT_EQ(ds.test_source.size(), 16u);
  EXPECT_EQ(ds.test_target.size(), 16u);
}

TEST(Dataset, SameSeedIdentical) {
  auto a = dkt::make_dataset(small(7)), b = dkt::make_dataset(small(7)), c = dkt::make_dataset(small(8));
  ASSERT_EQ(a.train.size(), b.train.size());
  for (std::size_t i = 0; i < a.train.size(); ++i) {
    EXPECT_EQ(a.train[i].source.pixels, b.train[i].source.pixels);
    EXPECT_EQ(a.train[i].target.pixels, b.train[i].target.pixels);
  }
  EXPECT_NE(a.train[0].source.pixels, c.train[0].source.pixels);
}

TEST(Dataset, BalancedLabelsAndPairedDomains) {
  auto ds = dkt::make_dataset(small());
  std::map<std::size_t, std::size_t> train, src, tgt;
  for (const auto& p : ds.train) {
    EXPECT_EQ(p.source.label, p.target.label);
    EXPECT_EQ(p.source.domain, dkt::Domain::source);
    EXPECT_EQ(p.target.domain, dkt::Domain::target);
    ++train[p.label()];
  }
  for (const auto& c : ds.test_source) ++src[c.label];
  for (const auto& c : ds.test_target) ++tgt[c.label];
  for (std::size_t k = 0; k < 8; ++k) {
    EXPECT_EQ(train[k], 3u);
    EXPECT_EQ(src[k], 2u);
    EXPECT_EQ(tgt[k], 2u);
  }
}

TEST(Dataset, TrainAndTestDisjoint) {
  auto ds = dkt::make_dataset(small());
  for (const auto& p : ds.train)
    for (const auto& c : ds.test_source) EXPECT_NE(p.source.pixels, c.pixels);
}

TEST(Dataset, PairsAreNotPixelAligned) {
  auto cfg = small();
  cfg.shift = {1.0, 1.0, 0.0};  // no darkening: any equality would be alignment
  auto ds = dkt::make_dataset(cfg);
  for (const auto& p : ds.train) EXPECT_NE(p.source.pixels, p.target.pixels);
}
