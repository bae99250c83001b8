#pragma once

#include <cstdint>
#include <vector>

#include "gliaseg/volume.hpp"

namespace gliaseg {

/// One byte per voxel, 0 or 1.
using BinaryMask = Volume<std::uint8_t>;

BinaryMask threshold_mask(const ScalarVolume& v, double threshold);  // v >= threshold
BinaryMask positive_mask(const ScalarVolume& phi);                   // phi > 0
std::int64_t count(const BinaryMask& m);

BinaryMask mask_and(const BinaryMask& a, const BinaryMask& b);
BinaryMask mask_or(const BinaryMask& a, const BinaryMask& b);
BinaryMask mask_and_not(const BinaryMask& a, const BinaryMask& b);
BinaryMask mask_not(const BinaryMask& a);

enum class Connectivity { face = 6, full = 26 };

struct ComponentLabels {
  Volume<std::int32_t> labels;       // 0 = background, components numbered 1..N in scan order
  std::vector<std::int64_t> sizes;   // sizes[k - 1] is the voxel count of component k
  int count() const noexcept { return static_cast<int>(sizes.size()); }
};

ComponentLabels label_components(const BinaryMask& m, Connectivity conn = Connectivity::full);

/// Offsets of the 6- or 26-neighbourhood.
const std::vector<Eigen::Array3i>& neighbourhood(Connectivity conn);

}  // namespace gliaseg
