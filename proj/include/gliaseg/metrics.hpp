#pragma once

// Segmentation quality measures.

#include <cstdint>
#include <span>
#include <string>
#include <utility>

#include "gliaseg/mask.hpp"

namespace gliaseg {

struct DiceScore {
  double value = 0.0;
  bool both_empty = false;  // vacuous agreement, reported as 1
};

/// 2 |A n B| / (|A| + |B|).
DiceScore dice(const BinaryMask& a, const BinaryMask& b);

/// Voxels whose centres lie inside or on the convex hull of the foreground
/// voxel centres. Flat and collinear inputs produce the corresponding
/// polygon or segment.
BinaryMask convex_hull_mask(const BinaryMask& m);

/// Dice of the convex hulls of both masks.
DiceScore convex_hull_dice(const BinaryMask& truth, const BinaryMask& estimate);

/// Boundary area from inside/outside transitions along the 13 lattice line
/// directions (Cauchy-Crofton), each weighted by its share of the sphere.
/// The volume is padded by background. Balls come out within about 1%.
double surface_area(const BinaryMask& m);

/// Surface area over the area of a ball with the same volume:
/// S / (36 pi V^2)^(1/3). A ball scores 1.
double ramification_index(const BinaryMask& m);

/// Mean |truth - estimate|.
double mae(std::span<const std::pair<double, double>> values);

struct MetricsReport {
  std::string cell_id;
  double dice = 0.0;
  double dice_convex_hull = 0.0;
  bool dice_vacuous = false;
  double ramification_index = 0.0;
  double ramification_index_truth = 0.0;
  std::int64_t volume_voxels = 0;
  double surface_area = 0.0;
};

/// Full report for an estimate against ground truth. Ramification entries
/// are left at 0 when the corresponding mask is empty.
MetricsReport evaluate(const BinaryMask& truth, const BinaryMask& estimate, std::string cell_id = "cell");

}  // namespace gliaseg
