#include "gliaseg/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <set>
#include <vector>

namespace gliaseg {

DiceScore dice(const BinaryMask& a, const BinaryMask& b) {
  require_same_shape(a, b, "dice");
  std::int64_t na = 0, nb = 0, both = 0;
  for (Eigen::Index i = 0; i < a.size(); ++i) {
    na += a[i] != 0;
    nb += b[i] != 0;
    both += a[i] && b[i];
  }
  if (na + nb == 0) return {1.0, true};
  return {2.0 * static_cast<double>(both) / static_cast<double>(na + nb), false};
}

namespace {

using Point = Eigen::Matrix<std::int64_t, 3, 1>;

std::int64_t side(const Point& a, const Point& normal, const Point& q) { return normal.dot(q - a); }

struct Facet {
  std::array<int, 3> v;
  Point normal;  // outward, unnormalized
};

Facet make_facet(const std::vector<Point>& p, int a, int b, int c) {
  return {{a, b, c}, (p[b] - p[a]).cross(p[c] - p[a])};
}

// Incremental hull; `p` must contain four affinely independent points first.
std::vector<Facet> hull3d(const std::vector<Point>& p) {
  std::vector<Facet> faces{make_facet(p, 0, 1, 2), make_facet(p, 0, 2, 3), make_facet(p, 0, 3, 1),
                           make_facet(p, 1, 3, 2)};
  // Orient outward with respect to the centroid (scaled by 4 to stay integral).
  const Point centroid4 = p[0] + p[1] + p[2] + p[3];
  for (Facet& f : faces)
    if (f.normal.dot(centroid4 - 4 * p[f.v[0]]) > 0) {
      std::swap(f.v[1], f.v[2]);
      f.normal = -f.normal;
    }

  std::vector<char> visible;
  for (std::size_t k = 4; k < p.size(); ++k) {
    visible.assign(faces.size(), 0);
    bool any = false;
    for (std::size_t f = 0; f < faces.size(); ++f)
      if (side(p[faces[f].v[0]], faces[f].normal, p[k]) > 0) visible[f] = any = true;
    if (!any) continue;

    std::set<std::pair<int, int>> visible_edges;
    for (std::size_t f = 0; f < faces.size(); ++f)
      if (visible[f])
        for (int e = 0; e < 3; ++e) visible_edges.emplace(faces[f].v[e], faces[f].v[(e + 1) % 3]);

    std::vector<Facet> next;
    next.reserve(faces.size() + 8);
    for (std::size_t f = 0; f < faces.size(); ++f)
      if (!visible[f]) next.push_back(faces[f]);
    for (const auto& [u, v] : visible_edges)
      if (!visible_edges.count({v, u})) next.push_back(make_facet(p, u, v, static_cast<int>(k)));
    faces = std::move(next);
  }
  return faces;
}

std::int64_t cross2(const Eigen::Matrix<std::int64_t, 2, 1>& o, const Eigen::Matrix<std::int64_t, 2, 1>& a,
                    const Eigen::Matrix<std::int64_t, 2, 1>& b) {
  return (a[0] - o[0]) * (b[1] - o[1]) - (a[1] - o[1]) * (b[0] - o[0]);
}

}  // namespace

BinaryMask convex_hull_mask(const BinaryMask& m) {
  BinaryMask out(m.dims(), m.spacing(), 0);
  const Dims& d = m.dims();

  // Only the extreme voxels of each x-row can be hull vertices.
  std::vector<Point> pts;
  for (int z = 0; z < d[2]; ++z)
    for (int y = 0; y < d[1]; ++y) {
      int lo = -1, hi = -1;
      for (int x = 0; x < d[0]; ++x)
        if (m(x, y, z)) {
          if (lo < 0) lo = x;
          hi = x;
        }
      if (lo < 0) continue;
      pts.emplace_back(lo, y, z);
      if (hi != lo) pts.emplace_back(hi, y, z);
    }
  if (pts.empty()) return out;

  Point lo = pts[0], hi = pts[0];
  for (const Point& q : pts) {
    lo = lo.cwiseMin(q);
    hi = hi.cwiseMax(q);
  }
  auto for_each_candidate = [&](auto&& inside) {
    for (std::int64_t z = lo[2]; z <= hi[2]; ++z)
      for (std::int64_t y = lo[1]; y <= hi[1]; ++y)
        for (std::int64_t x = lo[0]; x <= hi[0]; ++x)
          if (inside(Point(x, y, z))) out(int(x), int(y), int(z)) = 1;
  };

  // Find an affinely independent prefix and move it to the front.
  const Point a = pts[0];
  std::size_t ib = 0, ic = 0, id = 0;
  for (std::size_t i = 1; i < pts.size() && !ib; ++i)
    if (pts[i] != a) ib = i;
  if (!ib) {
    out(int(a[0]), int(a[1]), int(a[2])) = 1;
    return out;
  }
  const Point dir = pts[ib] - a;
  for (std::size_t i = 1; i < pts.size() && !ic; ++i)
    if (dir.cross(pts[i] - a) != Point::Zero()) ic = i;
  if (!ic) {
    std::int64_t tmin = 0, tmax = 0;
    for (const Point& q : pts) {
      const std::int64_t t = dir.dot(q - a);
      tmin = std::min(tmin, t);
      tmax = std::max(tmax, t);
    }
    for_each_candidate([&](const Point& q) {
      const std::int64_t t = dir.dot(q - a);
      return dir.cross(q - a) == Point::Zero() && t >= tmin && t <= tmax;
    });
    return out;
  }
  const Point normal = dir.cross(pts[ic] - a);
  for (std::size_t i = 1; i < pts.size() && !id; ++i)
    if (normal.dot(pts[i] - a) != 0) id = i;

  if (!id) {
    // Planar: 2D monotone-chain hull after dropping the dominant normal axis.
    Eigen::Index drop;
    normal.cwiseAbs().maxCoeff(&drop);
    const int u = drop == 0 ? 1 : 0, v = drop == 2 ? 1 : 2;
    using P2 = Eigen::Matrix<std::int64_t, 2, 1>;
    std::vector<P2> flat;
    for (const Point& q : pts) flat.emplace_back(q[u], q[v]);
    std::sort(flat.begin(), flat.end(), [](const P2& l, const P2& r) {
      return l[0] < r[0] || (l[0] == r[0] && l[1] < r[1]);
    });
    flat.erase(std::unique(flat.begin(), flat.end()), flat.end());
    std::vector<P2> poly(2 * flat.size());
    std::size_t k = 0;
    for (std::size_t i = 0; i < flat.size(); ++i) {
      while (k >= 2 && cross2(poly[k - 2], poly[k - 1], flat[i]) <= 0) --k;
      poly[k++] = flat[i];
    }
    for (std::size_t i = flat.size() - 1, t = k + 1; i > 0; --i) {
      while (k >= t && cross2(poly[k - 2], poly[k - 1], flat[i - 1]) <= 0) --k;
      poly[k++] = flat[i - 1];
    }
    poly.resize(k - 1);
    for_each_candidate([&](const Point& q) {
      if (normal.dot(q - a) != 0) return false;
      const P2 s(q[u], q[v]);
      for (std::size_t i = 0; i < poly.size(); ++i)
        if (cross2(poly[i], poly[(i + 1) % poly.size()], s) < 0) return false;
      return true;
    });
    return out;
  }

  std::vector<Point> ordered{a, pts[ib], pts[ic], pts[id]};
  for (std::size_t i = 1; i < pts.size(); ++i)
    if (i != ib && i != ic && i != id) ordered.push_back(pts[i]);
  const std::vector<Facet> faces = hull3d(ordered);
  for_each_candidate([&](const Point& q) {
    for (const Facet& f : faces)
      if (side(ordered[f.v[0]], f.normal, q) > 0) return false;
    return true;
  });
  return out;
}

DiceScore convex_hull_dice(const BinaryMask& truth, const BinaryMask& estimate) {
  return dice(convex_hull_mask(truth), convex_hull_mask(estimate));
}

namespace {

struct LineDirection {
  Eigen::Array3i step;
  double weight;  // share of the unit sphere closest to this direction (both signs)
  double length;  // physical step length
};

// The 13 undirected lattice directions of the 26-neighbourhood, weighted by
// their Voronoi cells on the sphere. Cells are measured on a fixed Fibonacci
// point set so anisotropic spacing gets its own weights.
std::vector<LineDirection> line_directions(const Spacing& h) {
  std::vector<LineDirection> dirs;
  std::vector<Eigen::Vector3d> unit;
  for (int dz = -1; dz <= 1; ++dz)
    for (int dy = -1; dy <= 1; ++dy)
      for (int dx = -1; dx <= 1; ++dx) {
        const Eigen::Array3i s(dx, dy, dz);
        // Keep one of each +-pair: last nonzero component positive.
        const int lead = dz != 0 ? dz : (dy != 0 ? dy : dx);
        if (lead <= 0) continue;
        const Eigen::Vector3d p = (s.cast<double>() * h).matrix();
        dirs.push_back({s, 0.0, p.norm()});
        unit.push_back(p.normalized());
      }
  constexpr int kSamples = 20000;
  const double golden = std::numbers::pi * (3.0 - std::sqrt(5.0));
  for (int i = 0; i < kSamples; ++i) {
    const double z = 1.0 - (2.0 * i + 1.0) / kSamples, r = std::sqrt(1.0 - z * z);
    const Eigen::Vector3d u(r * std::cos(golden * i), r * std::sin(golden * i), z);
    std::size_t best = 0;
    double best_dot = -1.0;
    for (std::size_t k = 0; k < unit.size(); ++k) {
      const double c = std::abs(u.dot(unit[k]));
      if (c > best_dot) {
        best_dot = c;
        best = k;
      }
    }
    dirs[best].weight += 1.0 / kSamples;
  }
  return dirs;
}

}  // namespace

double surface_area(const BinaryMask& m) {
  // Cauchy-Crofton: a surface meets lines of direction u at density rho
  // rho * integral |n.u| dS times, and |n.u| averages 1/2 over the sphere.
  const Dims& d = m.dims();
  auto at = [&](int x, int y, int z) -> bool { return m.contains(x, y, z) && m(x, y, z); };
  double area = 0.0;
  for (const LineDirection& dir : line_directions(m.spacing())) {
    const Eigen::Array3i& s = dir.step;
    std::int64_t crossings = 0;
    for (int z = -1; z < d[2] + 1; ++z)
      for (int y = -1; y < d[1] + 1; ++y)
        for (int x = -1; x < d[0] + 1; ++x)
          if (at(x, y, z) != at(x + s[0], y + s[1], z + s[2])) ++crossings;
    // Lines of this direction through every voxel centre: rho = length / voxel volume.
    area += 2.0 * dir.weight * static_cast<double>(crossings) * m.voxel_volume() / dir.length;
  }
  return area;
}

double ramification_index(const BinaryMask& m) {
  const std::int64_t n = count(m);
  if (n == 0) throw UndefinedMetricError("ramification_index: empty mask");
  const double volume = static_cast<double>(n) * m.voxel_volume();
  const double ball_area = std::cbrt(36.0 * std::numbers::pi * volume * volume);
  return surface_area(m) / ball_area;
}

double mae(std::span<const std::pair<double, double>> values) {
  if (values.empty()) throw ParameterError("mae: empty list");
  double sum = 0.0;
  for (const auto& [truth, estimate] : values) sum += std::abs(truth - estimate);
  return sum / static_cast<double>(values.size());
}

MetricsReport evaluate(const BinaryMask& truth, const BinaryMask& estimate, std::string cell_id) {
  MetricsReport r;
  r.cell_id = std::move(cell_id);
  const DiceScore d = dice(truth, estimate);
  r.dice = d.value;
  r.dice_vacuous = d.both_empty;
  r.dice_convex_hull = convex_hull_dice(truth, estimate).value;
  r.volume_voxels = count(estimate);
  r.surface_area = surface_area(estimate);
  if (r.volume_voxels > 0) r.ramification_index = ramification_index(estimate);
  if (count(truth) > 0) r.ramification_index_truth = ramification_index(truth);
  return r;
}

}  // namespace gliaseg
