#include "gliaseg/mask.hpp"

#include <queue>

namespace gliaseg {

BinaryMask threshold_mask(const ScalarVolume& v, double threshold) {
  return BinaryMask(v.dims(), v.spacing(), (v.data() >= threshold).cast<std::uint8_t>());
}

BinaryMask positive_mask(const ScalarVolume& phi) {
  return BinaryMask(phi.dims(), phi.spacing(), (phi.data() > 0.0).cast<std::uint8_t>());
}

std::int64_t count(const BinaryMask& m) { return m.data().cast<std::int64_t>().sum(); }

namespace {
template <typename Op>
BinaryMask combine(const BinaryMask& a, const BinaryMask& b, Op op) {
  require_same_shape(a, b, "mask combine");
  BinaryMask out(a.dims(), a.spacing());
  for (Eigen::Index i = 0; i < a.size(); ++i) out[i] = op(a[i] != 0, b[i] != 0) ? 1 : 0;
  return out;
}
}  // namespace

BinaryMask mask_and(const BinaryMask& a, const BinaryMask& b) {
  return combine(a, b, [](bool x, bool y) { return x && y; });
}
BinaryMask mask_or(const BinaryMask& a, const BinaryMask& b) {
  return combine(a, b, [](bool x, bool y) { return x || y; });
}
BinaryMask mask_and_not(const BinaryMask& a, const BinaryMask& b) {
  return combine(a, b, [](bool x, bool y) { return x && !y; });
}
BinaryMask mask_not(const BinaryMask& a) {
  return BinaryMask(a.dims(), a.spacing(), (a.data() == 0).cast<std::uint8_t>());
}

const std::vector<Eigen::Array3i>& neighbourhood(Connectivity conn) {
  static const std::vector<Eigen::Array3i> face{{-1, 0, 0}, {1, 0, 0}, {0, -1, 0},
                                                {0, 1, 0},  {0, 0, -1}, {0, 0, 1}};
  static const std::vector<Eigen::Array3i> full = [] {
    std::vector<Eigen::Array3i> n;
    for (int dz = -1; dz <= 1; ++dz)
      for (int dy = -1; dy <= 1; ++dy)
        for (int dx = -1; dx <= 1; ++dx)
          if (dx || dy || dz) n.emplace_back(dx, dy, dz);
    return n;
  }();
  return conn == Connectivity::face ? face : full;
}

ComponentLabels label_components(const BinaryMask& m, Connectivity conn) {
  ComponentLabels out;
  out.labels = Volume<std::int32_t>(m.dims(), m.spacing(), 0);
  const auto& nbrs = neighbourhood(conn);
  std::queue<Eigen::Index> frontier;
  for (Eigen::Index seed = 0; seed < m.size(); ++seed) {
    if (!m[seed] || out.labels[seed]) continue;
    const std::int32_t label = out.count() + 1;
    std::int64_t size = 0;
    out.labels[seed] = label;
    frontier.push(seed);
    while (!frontier.empty()) {
      const Eigen::Index i = frontier.front();
      frontier.pop();
      ++size;
      const Eigen::Array3i p = m.coords(i);
      for (const auto& d : nbrs) {
        const Eigen::Array3i q = p + d;
        if (!m.contains(q[0], q[1], q[2])) continue;
        const Eigen::Index j = m.index(q[0], q[1], q[2]);
        if (m[j] && !out.labels[j]) {
          out.labels[j] = label;
          frontier.push(j);
        }
      }
    }
    out.sizes.push_back(size);
  }
  return out;
}

}  // namespace gliaseg
