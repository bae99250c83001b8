#include "gliaseg/distance.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <limits>
#include <vector>

namespace gliaseg {

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

// Lower envelope of parabolas h^2 (p - q)^2 + f(q) (Felzenszwalb & Huttenlocher).
void distance_1d(const std::vector<double>& f, double h2, std::vector<double>& d, std::vector<int>& v,
                 std::vector<double>& z) {
  const int n = static_cast<int>(f.size());
  int k = -1;
  for (int q = 0; q < n; ++q) {
    if (f[q] == kInf) continue;
    while (k >= 0) {
      const int r = v[k];
      const double s = ((f[q] + h2 * q * q) - (f[r] + h2 * r * r)) / (2.0 * h2 * (q - r));
      if (s <= z[k]) {
        --k;
      } else {
        break;
      }
    }
    ++k;
    v[k] = q;
    z[k] = k == 0 ? -kInf : ((f[q] + h2 * q * q) - (f[v[k - 1]] + h2 * v[k - 1] * v[k - 1])) /
                                (2.0 * h2 * (q - v[k - 1]));
    z[k + 1] = kInf;
  }
  if (k < 0) {
    std::fill(d.begin(), d.end(), kInf);
    return;
  }
  int j = 0;
  for (int p = 0; p < n; ++p) {
    while (z[j + 1] < p) ++j;
    const double dp = p - v[j];
    d[p] = h2 * dp * dp + f[v[j]];
  }
}

}  // namespace

ScalarVolume squared_distance_transform(const BinaryMask& targets) {
  const Dims& dims = targets.dims();
  ScalarVolume out(dims, targets.spacing(), kInf);
  for (Eigen::Index i = 0; i < targets.size(); ++i)
    if (targets[i]) out[i] = 0.0;

  for (int axis = 0; axis < 3; ++axis) {
    const int n = dims[axis];
    const double h2 = targets.spacing()[axis] * targets.spacing()[axis];
    const int a1 = (axis + 1) % 3, a2 = (axis + 2) % 3;
    std::vector<double> f(n), d(n), z(n + 1);
    std::vector<int> v(n);
    for (int j = 0; j < dims[a2]; ++j)
      for (int i = 0; i < dims[a1]; ++i) {
        Eigen::Array3i p;
        p[a1] = i;
        p[a2] = j;
        for (int t = 0; t < n; ++t) {
          p[axis] = t;
          f[t] = out(p[0], p[1], p[2]);
        }
        distance_1d(f, h2, d, v, z);
        for (int t = 0; t < n; ++t) {
          p[axis] = t;
          out(p[0], p[1], p[2]) = d[t];
        }
      }
  }
  return out;
}

namespace {

// Godunov upwind solution of sum_k ((u - a_k) / h_k)^2 = 1 over the finite a_k.
double eikonal_update(std::array<double, 3> a, std::array<double, 3> h) {
  std::array<int, 3> order{0, 1, 2};
  std::sort(order.begin(), order.end(), [&](int l, int r) { return a[l] < a[r]; });
  double u = kInf;
  double sa = 0.0, sa2 = 0.0, sw = 0.0;
  for (int m = 0; m < 3; ++m) {
    const int k = order[m];
    if (a[k] == kInf || a[k] >= u) break;
    const double w = 1.0 / (h[k] * h[k]);
    sw += w;
    sa += w * a[k];
    sa2 += w * a[k] * a[k];
    const double disc = sa * sa - sw * (sa2 - 1.0);
    u = (sa + std::sqrt(std::max(disc, 0.0))) / sw;
  }
  return u;
}

}  // namespace

ScalarVolume reinitialize(const ScalarVolume& phi, int sweep_rounds) {
  if (phi.empty()) throw ShapeError("reinitialize: empty field");
  const Dims& d = phi.dims();
  const Spacing& h = phi.spacing();
  ScalarVolume dist(d, h, kInf);
  std::vector<std::uint8_t> fixed(phi.size(), 0);

  for (int z = 0; z < d[2]; ++z)
    for (int y = 0; y < d[1]; ++y)
      for (int x = 0; x < d[0]; ++x) {
        const double p = phi(x, y, z);
        const Eigen::Index i = phi.index(x, y, z);
        if (p == 0.0) {
          dist[i] = 0.0;
          fixed[i] = 1;
          continue;
        }
        double inv2 = 0.0;
        for (int axis = 0; axis < 3; ++axis) {
          double best = kInf;
          for (int s : {-1, 1}) {
            Eigen::Array3i q(x, y, z);
            q[axis] += s;
            if (!phi.contains(q[0], q[1], q[2])) continue;
            const double pq = phi(q[0], q[1], q[2]);
            if ((p > 0.0) != (pq > 0.0)) best = std::min(best, h[axis] * p / (p - pq));
          }
          if (best < kInf) {
            if (best == 0.0) {
              inv2 = kInf;
              break;
            }
            inv2 += 1.0 / (best * best);
          }
        }
        if (inv2 > 0.0) {
          dist[i] = inv2 == kInf ? 0.0 : 1.0 / std::sqrt(inv2);
          fixed[i] = 1;
        }
      }

  const std::array<double, 3> hs{h[0], h[1], h[2]};
  for (int round = 0; round < sweep_rounds; ++round)
    for (int dir = 0; dir < 8; ++dir) {
      const int sx = dir & 1 ? -1 : 1, sy = dir & 2 ? -1 : 1, sz = dir & 4 ? -1 : 1;
      for (int kz = 0; kz < d[2]; ++kz) {
        const int z = sz > 0 ? kz : d[2] - 1 - kz;
        for (int ky = 0; ky < d[1]; ++ky) {
          const int y = sy > 0 ? ky : d[1] - 1 - ky;
          for (int kx = 0; kx < d[0]; ++kx) {
            const int x = sx > 0 ? kx : d[0] - 1 - kx;
            const Eigen::Index i = dist.index(x, y, z);
            if (fixed[i]) continue;
            std::array<double, 3> a;
            const Eigen::Array3i p(x, y, z);
            for (int axis = 0; axis < 3; ++axis) {
              double m = kInf;
              for (int s : {-1, 1}) {
                Eigen::Array3i q = p;
                q[axis] += s;
                if (dist.contains(q[0], q[1], q[2])) m = std::min(m, dist(q[0], q[1], q[2]));
              }
              a[axis] = m;
            }
            const double u = eikonal_update(a, hs);
            if (u < dist[i]) dist[i] = u;
          }
        }
      }
    }

  ScalarVolume out(d, h);
  const double far = (d.cast<double>() * h).matrix().norm();
  for (Eigen::Index i = 0; i < phi.size(); ++i) {
    const double m = dist[i] == kInf ? far : dist[i];
    out[i] = phi[i] > 0.0 ? m : -m;
  }
  return out;
}

}  // namespace gliaseg
