#include <gtest/gtest.h>

#include "dkt/attention.hpp"
#include "dkt/rng.hpp"
#include "oracle.hpp"

using T = dkt::Tensor<double>;

namespace {

T random(dkt::Rng& rng, dkt::Shape s) {
  std::vector<double> v(dkt::numel(s));
  for (auto& x : v) x = rng.uniform(-1, 1);
  return T(std::move(s), std::move(v), true);
}

dkt::AttentionParams<double> random_params(dkt::Rng& rng, std::size_t d, std::size_t heads) {
  return {random(rng, {d, d}), random(rng, {d, d}), random(rng, {d, d}), random(rng, {d, d}), heads};
}

oracle::AttentionResult reference(const T& zq, const T& zkv, const dkt::AttentionParams<double>& p,
                                  const std::function<bool(std::size_t, std::size_t)>& mask) {
  return oracle::masked_attention(zq.to_vector(), zkv.to_vector(), zq.dim(0), zq.dim(1), p.heads, p.wq.to_vector(),
                                  p.wk.to_vector(), p.wv.to_vector(), p.wo.to_vector(), mask);
}

void expect_near(const T& got, const std::vector<double>& want, double tol) {
  ASSERT_EQ(got.numel(), want.size());
  for (std::size_t i = 0; i < want.size(); ++i) ASSERT_NEAR(got.at(i), want[i], tol) << "element " << i;
}

T identity(std::size_t d) {
  auto t = T::zeros({d, d});
  for (std::size_t i = 0; i < d; ++i) t.mutable_data()[i * d + i] = 1;
  return t;
}

}  // namespace

TEST(Qkv, IdentityQueryIsInput) {
  dkt::Rng rng(1);
  auto p = random_params(rng, 4, 1);
  p.wq = identity(4);
  auto z = random(rng, {5, 4});
  auto h = dkt::qkv(z, p);
  EXPECT_EQ(h.q.shape(), (dkt::Shape{1, 5, 4}));
  expect_near(h.q, z.to_vector(), 0);
}

TEST(Qkv, ZeroInputGivesZero) {
  dkt::Rng rng(2);
  auto h = dkt::qkv(T::zeros({3, 4}), random_params(rng, 4, 2));
  for (const auto* t : {&h.q, &h.k, &h.v})
    for (double v : t->data()) EXPECT_EQ(v, 0.0);
}

TEST(Qkv, HeadsAreColumnSlicesOfOneMatmul) {
  dkt::Rng rng(3);
  auto p = random_params(rng, 6, 3);
  auto z = random(rng, {4, 6});
  auto full = oracle::matmul(z.to_vector(), p.wk.to_vector(), 4, 6, 6);
  auto k = dkt::qkv(z, p).k;
  for (std::size_t h = 0; h < 3; ++h)
    for (std::size_t i = 0; i < 4; ++i)
      for (std::size_t c = 0; c < 2; ++c) EXPECT_NEAR(k.at((h * 4 + i) * 2 + c), full[i * 6 + h * 2 + c], 1e-12);
}

TEST(Qkv, BadShapesThrow) {
  dkt::Rng rng(4);
  auto p = random_params(rng, 4, 3);
  EXPECT_THROW(dkt::qkv(T::zeros({2, 4}), p), dkt::ShapeError);
  p.heads = 2;
  EXPECT_THROW(dkt::qkv(T::zeros({2, 5}), p), dkt::ShapeError);
}

TEST(AttendTime, MatchesMaskedFullAttention) {
  dkt::Rng rng(5);
  const dkt::TokenGrid grid{4, 3};
  auto p = random_params(rng, 8, 2);
  auto z = random(rng, {grid.tokens(), 8});
  for (bool cls : {true, false})
    expect_near(dkt::attend_time(z, grid, p, cls), reference(z, z, p, oracle::temporal_mask(4, cls)).out, 1e-10);
}

TEST(AttendSpace, MatchesMaskedFullAttention) {
  dkt::Rng rng(6);
  const dkt::TokenGrid grid{4, 3};
  auto p = random_params(rng, 8, 2);
  auto z = random(rng, {grid.tokens(), 8});
  for (bool cls : {true, false})
    expect_near(dkt::attend_space(z, grid, p, cls), reference(z, z, p, oracle::spatial_mask(4, cls)).out, 1e-10);
}

TEST(AttendTime, SingleFrameGroupIsSelfAndClass) {
  dkt::Rng rng(7);
  const dkt::TokenGrid grid{3, 1};
  auto p = random_params(rng, 4, 1);
  auto z = random(rng, {grid.tokens(), 4});
  dkt::AttentionMap<double> map;
  dkt::attend_time(z, grid, p, true, nullptr, &map);
  for (std::size_t q = 1; q < grid.tokens(); ++q)
    for (std::size_t k = 0; k < grid.tokens(); ++k) {
      if (k == 0 || k == q)
        EXPECT_GT(map.at(0, q, k), 0.0);
      else
        EXPECT_EQ(map.at(0, q, k), 0.0);
    }
}

TEST(AttendSpace, SinglePatchGroupIsSelfAndClass) {
  dkt::Rng rng(8);
  const dkt::TokenGrid grid{1, 3};
  auto p = random_params(rng, 4, 1);
  auto z = random(rng, {grid.tokens(), 4});
  dkt::AttentionMap<double> map;
  dkt::attend_space(z, grid, p, true, nullptr, &map);
  for (std::size_t q = 1; q < grid.tokens(); ++q)
    for (std::size_t k = 0; k < grid.tokens(); ++k) EXPECT_EQ(map.at(0, q, k) > 0, k == 0 || k == q);
}

TEST(AttendTime, UniformValuesPassThrough) {
  dkt::Rng rng(9);
  const dkt::TokenGrid grid{2, 3};
  auto p = random_params(rng, 4, 2);
  p.wo = identity(4);
  // all value vectors equal v: rows of z identical in the V projection
  auto row = random(rng, {1, 4}).to_vector();
  std::vector<double> zz;
  for (std::size_t i = 0; i < grid.tokens(); ++i) zz.insert(zz.end(), row.begin(), row.end());
  auto v = oracle::matmul(row, p.wv.to_vector(), 1, 4, 4);
  auto out = dkt::attend_time(T({grid.tokens(), 4}, zz), grid, p);
  for (std::size_t i = 0; i < grid.tokens(); ++i)
    for (std::size_t c = 0; c < 4; ++c) EXPECT_NEAR(out.at(i * 4 + c), v[c], 1e-12);
}

TEST(AttendSpace, FramePermutationEquivariance) {
  dkt::Rng rng(10);
  const std::size_t m = 3, n = 4, d = 4;
  const dkt::TokenGrid grid{m, n};
  auto p = random_params(rng, d, 2);
  auto z = random(rng, {grid.tokens(), d});
  const std::vector<std::size_t> perm{2, 0, 3, 1};
  std::vector<std::size_t> tok{0};
  for (std::size_t t = 0; t < n; ++t)
    for (std::size_t s = 0; s < m; ++s) tok.push_back(dkt::token_index(s, perm[t], m));
  auto zp = dkt::gather(z, 0, tok);
  auto a = dkt::gather(dkt::attend_space(z, grid, p), 0, tok);
  auto b = dkt::attend_space(zp, grid, p);
  expect_near(b, a.to_vector(), 1e-12);
}

TEST(AttendCross, SameStreamIsFullSelfAttention) {
  dkt::Rng rng(11);
  auto p = random_params(rng, 8, 2);
  auto z = random(rng, {13, 8});
  expect_near(dkt::attend_cross(z, z, p), dkt::attend_full(z, p).to_vector(), 1e-12);
}

TEST(AttendCross, MatchesNaiveOracle) {
  dkt::Rng rng(12);
  auto p = random_params(rng, 8, 4);
  auto zq = random(rng, {9, 8}), zkv = random(rng, {9, 8});
  expect_near(dkt::attend_cross(zq, zkv, p), reference(zq, zkv, p, oracle::all_allowed).out, 1e-10);
}

TEST(AttendCross, EqualKeyValueRowsGiveThatValue) {
  dkt::Rng rng(13);
  auto p = random_params(rng, 4, 2);
  p.wv = identity(4);
  p.wo = identity(4);
  auto row = random(rng, {1, 4}).to_vector();
  std::vector<double> kv;
  for (int i = 0; i < 5; ++i) kv.insert(kv.end(), row.begin(), row.end());
  auto out = dkt::attend_cross(random(rng, {5, 4}), T({5, 4}, kv), p);
  for (std::size_t i = 0; i < 5; ++i)
    for (std::size_t c = 0; c < 4; ++c) EXPECT_NEAR(out.at(i * 4 + c), row[c], 1e-12);
}

TEST(AttendCross, LengthMismatchThrows) {
  dkt::Rng rng(14);
  auto p = random_params(rng, 4, 1);
  EXPECT_THROW(dkt::attend_cross(T::zeros({3, 4}), T::zeros({4, 4}), p), dkt::ShapeError);
}

TEST(AttentionMap, RowsAreDistributions) {
  dkt::Rng rng(15);
  const dkt::TokenGrid grid{4, 3};
  auto p = random_params(rng, 8, 2);
  auto z = random(rng, {grid.tokens(), 8});
  for (int kind = 0; kind < 3; ++kind) {
    dkt::AttentionMap<double> map;
    if (kind == 0) dkt::attend_time(z, grid, p, true, nullptr, &map);
    if (kind == 1) dkt::attend_space(z, grid, p, true, nullptr, &map);
    if (kind == 2) dkt::attend_cross(z, random(rng, {grid.tokens(), 8}), p, nullptr, &map);
    for (std::size_t h = 0; h < map.heads; ++h)
      for (std::size_t q = 0; q < map.tokens; ++q) {
        double s = 0;
        for (std::size_t k = 0; k < map.tokens; ++k) {
          EXPECT_GE(map.at(h, q, k), 0.0);
          s += map.at(h, q, k);
        }
        EXPECT_NEAR(s, 1.0, 1e-6);
      }
  }
}

TEST(AttentionMap, MatchesOracleWeights) {
  dkt::Rng rng(16);
  const dkt::TokenGrid grid{2, 3};
  auto p = random_params(rng, 4, 2);
  auto z = random(rng, {grid.tokens(), 4});
  dkt::AttentionMap<double> map;
  dkt::attend_time(z, grid, p, true, nullptr, &map);
  auto want = reference(z, z, p, oracle::temporal_mask(2, true)).weights;
  for (std::size_t i = 0; i < want.size(); ++i) EXPECT_NEAR(map.weights[i], want[i], 1e-12);
}

TEST(ScoreCounter, CountsEachGroupOnce) {
  dkt::Rng rng(17);
  const std::size_t m = 4, n = 3, l = 1 + m * n;
  const dkt::TokenGrid grid{m, n};
  auto p = random_params(rng, 4, 1);
  auto z = random(rng, {l, 4});
  dkt::ScoreCounter c;
  dkt::attend_time(z, grid, p, false, &c);
  EXPECT_EQ(c.scores, m * n * n);
  c.scores = 0;
  dkt::attend_space(z, grid, p, true, &c);
  EXPECT_EQ(c.scores, m * n * (m + 1) + l);
  c.scores = 0;
  dkt::attend_full(z, p, &c);
  EXPECT_EQ(c.scores, l * l);
}
