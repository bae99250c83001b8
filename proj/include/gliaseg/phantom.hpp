#pragma once

// Deterministic synthetic cells with analytic ground truth.
//
// Geometry is given in physical units; voxel (x, y, z) has its centre at
// (x, y, z) * spacing. A voxel belongs to a shape when its centre lies within
// the shape's radius. Intensity fades linearly over one voxel around the
// surface, then Gaussian noise is added.

#include <cstdint>
#include <optional>
#include <vector>

#include <Eigen/Dense>

#include "gliaseg/mask.hpp"

namespace gliaseg {

struct SomaSpec {
  Eigen::Vector3d center = Eigen::Vector3d::Zero();
  double radius = 1.0;
};

struct TubeSpec {
  Eigen::Vector3d start = Eigen::Vector3d::Zero();
  Eigen::Vector3d direction = Eigen::Vector3d::UnitX();
  double length = 1.0;
  double radius = 1.0;
  // Contrast multiplier, interpolated linearly from start to end.
  double start_contrast = 1.0;
  double end_contrast = 1.0;

  Eigen::Vector3d end() const { return start + length * direction.normalized(); }
};

struct NoiseSpec {
  enum class Kind { none, gaussian };
  Kind kind = Kind::none;
  double sigma = 0.0;
};

/// Contrast multiplier varying linearly along one axis, from `low` at index 0
/// to `high` at the last index.
struct IntensityRamp {
  int axis = 0;
  double low = 1.0;
  double high = 1.0;
};

struct PhantomSpec {
  Dims dims = Dims(64, 64, 32);
  Spacing spacing = Spacing::Ones();
  std::optional<SomaSpec> soma;
  std::vector<TubeSpec> tubes;
  NoiseSpec noise;
  std::optional<IntensityRamp> ramp;
  double background = 0.1;
  double foreground = 1.0;
  std::uint64_t seed = 1;

  void validate() const;

  /// Soma of radius 5 with four radiating processes of radius 1.2 in a
  /// 64x64x32 grid, Gaussian noise at the given SNR (contrast / noise sigma).
  /// `ramp` adds a contrast gradient from 1.0 down to 0.5 across x.
  static PhantomSpec microglia(bool ramp = false, double snr = 5.0, std::uint64_t seed = 1);
};

struct Phantom {
  ScalarVolume volume;
  BinaryMask soma;       // noise-free ground truth
  BinaryMask processes;  // tube voxels outside the soma core
  BinaryMask cell() const { return mask_or(soma, processes); }
};

Phantom generate(const PhantomSpec& spec);

}  // namespace gliaseg
