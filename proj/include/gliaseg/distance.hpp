#pragma once

// Distance machinery shared by seeding and reinitialization.

#include "gliaseg/mask.hpp"

namespace gliaseg {

/// Exact squared Euclidean distance (physical units) from every voxel centre
/// to the nearest voxel centre where `targets` is set. +inf if `targets` is empty.
ScalarVolume squared_distance_transform(const BinaryMask& targets);

/// Restores the signed-distance property of `phi` by fast sweeping on the
/// eikonal equation |grad phi| = 1. Voxels straddling the zero crossing are
/// kept at their linearly interpolated offset, so the interface does not move.
ScalarVolume reinitialize(const ScalarVolume& phi, int sweep_rounds = 2);

}  // namespace gliaseg
