#pragma once

// Automatic seeding of the two level sets from the enhanced responses.

#include <string>
#include <vector>

#include "gliaseg/features.hpp"
#include "gliaseg/levelset.hpp"
#include "gliaseg/mask.hpp"

namespace gliaseg {

/// Histogram-based Otsu threshold over [min, max] of `v`.
///
/// Voxel value x falls in bin floor((x - min) / (max - min) * bins), clamped
/// to bins - 1. Candidate k (1 <= k < bins) splits bins [0, k) from [k, bins)
/// and returns min + k (max - min) / bins; class means use the exact voxel
/// sums per bin. The lowest k wins ties. Throws DegenerateInputError on a
/// constant volume.
double otsu_threshold(const ScalarVolume& v, int bins = 256);

/// Otsu bin index of `x` for a histogram over [lo, hi]; exposed so callers can
/// reproduce the class partition exactly.
int otsu_bin(double x, double lo, double hi, int bins);

/// +distance inside, -distance outside, measured between voxel centres and
/// offset by half a voxel so the zero crossing sits on the mask boundary.
/// Empty or full masks yield a constant field of magnitude equal to the
/// volume diagonal; `warning` (if given) is filled in that case.
LevelSetField mask_to_sdf(const BinaryMask& m, double epsilon = 1.5, std::string* warning = nullptr);

struct SeedPair {
  LevelSetField processes;
  LevelSetField soma;
  BinaryMask processes_seed;
  BinaryMask soma_seed;
  double processes_threshold = 0.0;
  double soma_threshold = 0.0;
  bool processes_absent = false;
  bool soma_absent = false;
  std::vector<std::string> warnings;
};

/// Otsu seeds on both responses. A blob-seed voxel must also respond more to
/// the blob filter than to the tube filter, and tube-seed components lying
/// entirely inside the blob seed are dropped. Throws EmptySeedError if both
/// seeds come out empty.
SeedPair initialize_pair(const EnhancedField& tube, const EnhancedField& blob, double epsilon = 1.5);

}  // namespace gliaseg
