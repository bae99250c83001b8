#include <doctest.h>

#include <cmath>
#include <numbers>
#include <random>
#include <utility>
#include <vector>

#include "gliaseg/metrics.hpp"
#include "oracles.hpp"

using namespace gliaseg;

namespace {

// Inside-or-on test against every supporting plane through three points.
BinaryMask brute_hull(const std::vector<Eigen::Vector3d>& pts, const Dims& d) {
  std::vector<std::pair<Eigen::Vector3d, double>> planes;
  const std::size_t n = pts.size();
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = i + 1; j < n; ++j)
      for (std::size_t k = j + 1; k < n; ++k) {
        Eigen::Vector3d nrm = (pts[j] - pts[i]).cross(pts[k] - pts[i]);
        if (nrm.norm() < 1e-9) continue;
        double off = nrm.dot(pts[i]);
        bool pos = false, neg = false;
        for (const auto& p : pts) {
          const double s = nrm.dot(p) - off;
          pos = pos || s > 1e-9;
          neg = neg || s < -1e-9;
        }
        if (pos && neg) continue;
        if (pos) {
          nrm = -nrm;
          off = -off;
        }
        planes.emplace_back(nrm, off);
      }
  return BinaryMask::generate(d, Spacing::Ones(), [&](int x, int y, int z) {
    const Eigen::Vector3d p(x, y, z);
    for (const auto& [nrm, off] : planes)
      if (nrm.dot(p) - off > 1e-9) return 0;
    return 1;
  });
}

// Four tubes of radius r leaving a ball of radius R along +-x and +-y.
BinaryMask ball_with_tubes(double R, double r, double L, int n) {
  const double c = n / 2.0;
  return BinaryMask::generate(Dims(n, n, n), Spacing::Ones(), [&](int x, int y, int z) {
    const double dx = x - c, dy = y - c, dz = z - c;
    if (dx * dx + dy * dy + dz * dz <= R * R) return 1;
    if (std::abs(dx) <= L && dy * dy + dz * dz <= r * r) return 1;
    if (std::abs(dy) <= L && dx * dx + dz * dz <= r * r) return 1;
    return 0;
  });
}

double analytic_ball_tubes_ri(double R, double r, double L) {
  const double pi = std::numbers::pi;
  const double x0 = std::sqrt(R * R - r * r), h = R - x0;
  const double s = 4 * pi * R * R + 4 * (-2 * pi * R * h + 2 * pi * r * (L - x0) + pi * r * r);
  const double v = 4.0 / 3 * pi * R * R * R + 4 * (pi * r * r * (L - x0) - pi * h * h * (3 * R - h) / 3);
  return s / std::cbrt(36 * pi * v * v);
}

}  // namespace

TEST_CASE("dice on simple masks") {
  BinaryMask a(Dims(4, 4, 4)), b(Dims(4, 4, 4));
  CHECK(dice(a, b).both_empty);
  CHECK(dice(a, b).value == 1.0);
  a[0] = a[1] = a[2] = a[3] = 1;
  CHECK(dice(a, a).value == 1.0);
  CHECK(dice(a, b).value == 0.0);
  b[2] = b[3] = b[4] = b[5] = 1;
  CHECK(dice(a, b).value == doctest::Approx(0.5));
  CHECK(dice(a, b).value == dice(b, a).value);
  CHECK(!dice(a, b).both_empty);
  CHECK_THROWS_AS(dice(a, BinaryMask(Dims(4, 4, 5))), ShapeError);
}

TEST_CASE("convex hull of a point, a segment and a square") {
  BinaryMask m(Dims(9, 9, 9));
  m(4, 4, 4) = 1;
  CHECK((convex_hull_mask(m).data() == m.data()).all());

  BinaryMask seg(Dims(9, 9, 9));
  seg(1, 1, 1) = seg(7, 7, 7) = 1;
  const BinaryMask hs = convex_hull_mask(seg);
  CHECK(count(hs) == 7);
  for (int i = 1; i <= 7; ++i) CHECK(hs(i, i, i) == 1);

  BinaryMask sq(Dims(9, 9, 9));
  sq(2, 2, 4) = sq(6, 2, 4) = sq(2, 6, 4) = sq(6, 6, 4) = 1;
  const BinaryMask hq = convex_hull_mask(sq);
  CHECK(count(hq) == 25);
}

TEST_CASE("convex hull fills a C shape") {
  BinaryMask c(Dims(12, 12, 3));
  for (int y = 1; y <= 10; ++y)
    for (int x = 1; x <= 10; ++x)
      if (x <= 3 || y <= 3 || y >= 8) c(x, y, 1) = 1;
  const BinaryMask h = convex_hull_mask(c);
  CHECK(count(h) == 100);
  CHECK(h(8, 5, 1) == 1);
}

TEST_CASE("convex hull matches a brute-force plane oracle") {
  std::mt19937_64 rng(5);
  std::uniform_int_distribution<int> u(0, 11);
  for (int trial = 0; trial < 20; ++trial) {
    BinaryMask m(Dims(12, 12, 12));
    std::vector<Eigen::Vector3d> pts;
    for (int k = 0; k < 8; ++k) {
      const int x = u(rng), y = u(rng), z = u(rng);
      m(x, y, z) = 1;
      pts.emplace_back(x, y, z);
    }
    const BinaryMask expect = brute_hull(pts, m.dims());
    if (count(expect) <= 1) continue;
    REQUIRE((convex_hull_mask(m).data() == expect.data()).all());
  }
}

TEST_CASE("convex hull is a superset and idempotent") {
  const ScalarVolume noise = oracle::random_volume(Dims(14, 13, 12), 9);
  const BinaryMask m = threshold_mask(noise, 0.97);
  const BinaryMask h = convex_hull_mask(m);
  CHECK(count(mask_and_not(m, h)) == 0);
  CHECK((convex_hull_mask(h).data() == h.data()).all());
  CHECK(convex_hull_dice(m, m).value == 1.0);
}

TEST_CASE("surface area of balls") {
  for (double r : {6.0, 10.0, 14.0}) {
    const int n = static_cast<int>(2 * r) + 6;
    const double c = n / 2.0;
    const BinaryMask b = oracle::ball(Dims(n, n, n), Eigen::Vector3d(c, c, c), r);
    const double expect = 4 * std::numbers::pi * r * r;
    CHECK(std::abs(surface_area(b) - expect) <= 0.05 * expect);
  }
  const Spacing s(0.5, 0.5, 1.0);
  const BinaryMask a = oracle::ball(Dims(40, 40, 20), Eigen::Vector3d(10, 10, 10), 8.0, s);
  CHECK(std::abs(surface_area(a) - 4 * std::numbers::pi * 64) <= 0.05 * 4 * std::numbers::pi * 64);
}

TEST_CASE("ramification index of a ball is one and never below") {
  const BinaryMask b = oracle::ball(Dims(32, 32, 32), Eigen::Vector3d(16, 16, 16), 10.0);
  CHECK(std::abs(ramification_index(b) - 1.0) <= 0.1);

  std::mt19937_64 rng(8);
  for (int t = 0; t < 10; ++t) {
    const BinaryMask m = threshold_mask(oracle::random_volume(Dims(10, 10, 10), 40 + t), 0.4);
    CHECK(ramification_index(m) >= 0.95);
  }
  BinaryMask cube(Dims(12, 12, 12));
  for (int z = 2; z < 10; ++z)
    for (int y = 2; y < 10; ++y)
      for (int x = 2; x < 10; ++x) cube(x, y, z) = 1;
  CHECK(ramification_index(cube) > 1.0);
}

TEST_CASE("ramification index is translation and axis-permutation invariant") {
  const BinaryMask m = ball_with_tubes(5.0, 2.0, 14.0, 34);
  const double ri = ramification_index(m);
  BinaryMask shifted(m.dims()), swapped(m.dims());
  const int n = m.dims()[0];
  for (int z = 0; z < n; ++z)
    for (int y = 0; y < n; ++y)
      for (int x = 0; x < n; ++x) {
        if (x + 1 < n) shifted(x + 1, y, z) = m(x, y, z);
        swapped(z, x, y) = m(x, y, z);
      }
  CHECK(ramification_index(shifted) == doctest::Approx(ri).epsilon(1e-12));
  CHECK(ramification_index(swapped) == doctest::Approx(ri).epsilon(0.02));
}

TEST_CASE("ramification of a ball with four tubes tracks the analytic value") {
  const double ri = ramification_index(ball_with_tubes(5.0, 2.0, 28.0, 64));
  const double expect = analytic_ball_tubes_ri(5.0, 2.0, 28.0);
  CHECK(ri > 2.0);
  CHECK(std::abs(ri - expect) <= 0.15 * expect);
}

TEST_CASE("ramification of an empty mask is undefined") {
  CHECK_THROWS_AS(ramification_index(BinaryMask(Dims(5, 5, 5))), UndefinedMetricError);
}

TEST_CASE("mean absolute error") {
  const std::vector<std::pair<double, double>> v{{1.0, 2.5}, {3.0, 1.2}, {0.5, 0.5}, {2.0, 5.6}};
  CHECK(mae(v) == doctest::Approx((1.5 + 1.8 + 0.0 + 3.6) / 4.0));
  const std::vector<std::pair<double, double>> same{{1.725, 1.725}};
  CHECK(mae(same) == 0.0);
  CHECK_THROWS_AS(mae(std::vector<std::pair<double, double>>{}), ParameterError);
}

TEST_CASE("evaluate fills the report") {
  const BinaryMask truth = oracle::ball(Dims(24, 24, 24), Eigen::Vector3d(12, 12, 12), 6.0);
  const MetricsReport r = evaluate(truth, truth, "c1");
  CHECK(r.cell_id == "c1");
  CHECK(r.dice == 1.0);
  CHECK(r.dice_convex_hull == 1.0);
  CHECK(r.volume_voxels == count(truth));
  CHECK(r.ramification_index == doctest::Approx(r.ramification_index_truth));
  CHECK(r.surface_area > 0.0);
  const MetricsReport e = evaluate(truth, BinaryMask(truth.dims()));
  CHECK(e.dice == 0.0);
  CHECK(e.ramification_index == 0.0);
}
