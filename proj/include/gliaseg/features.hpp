#pragma once

// Hessian-based structure enhancement: multiscale vesselness (bright tubes),
// blobness (bright blobs), the per-voxel orientation frame that goes with the
// winning scale, and the directional evolution weights alpha_i.

#include <array>
#include <span>
#include <vector>

#include <Eigen/Dense>

#include "gliaseg/volume.hpp"

namespace gliaseg {

enum class StructureKind { tube, blob };

const char* to_string(StructureKind kind) noexcept;

struct OrientationField {
  Dims dims = Dims::Zero();
  Spacing spacing = Spacing::Ones();
  StructureKind kind = StructureKind::tube;
  /// Column per voxel; |l1| <= |l2| <= |l3|.
  Eigen::Array<double, 3, Eigen::Dynamic> eigenvalues;
  /// Column per voxel holding e1, e2, e3 back to back.
  Eigen::Array<double, 9, Eigen::Dynamic> eigenvectors;
  /// Per-voxel sigma of the winning response.
  ScalarVolume scale;

  Eigen::Vector3d direction(Eigen::Index voxel, int i) const {
    return eigenvectors.col(voxel).segment<3>(3 * i).matrix();
  }
  Eigen::Index size() const noexcept { return eigenvalues.cols(); }
};

struct EnhancedField {
  ScalarVolume response;  // in [0, 1]
  StructureKind kind = StructureKind::tube;
  /// Directional evolution weights; empty volumes until evolution_weights().
  std::array<ScalarVolume, 3> alpha;
  std::vector<double> scales_used;

  bool has_weights() const noexcept { return !alpha[0].empty(); }
};

struct Enhancement {
  EnhancedField field;
  OrientationField orientation;
};

struct FrangiParams {
  double a = 0.5;
  double b = 0.5;
  double c = 0.0;  // <= 0: half the largest structure norm S over all scales
};

struct BlobParams {
  double b1 = 0.5;
  double b2 = 0.0;  // <= 0: half the largest structure norm S over all scales
};

/// Frangi bright-tube response, maximized over `scales` (physical sigma).
Enhancement vesselness(const ScalarVolume& v, std::span<const double> scales, const FrangiParams& params = {});

/// Bright-blob response, maximized over `scales`.
Enhancement blobness(const ScalarVolume& v, std::span<const double> scales, const BlobParams& params = {});

/// Tubes: alpha1 = response, alpha2 = alpha3 = cross_section_weight * response.
/// Blobs: alpha1 = alpha2 = alpha3 = response.
EnhancedField evolution_weights(EnhancedField field, const OrientationField& orientation,
                                double cross_section_weight = 0.5);

/// Runs the enhancement and fills in the evolution weights in one go.
Enhancement enhance(const ScalarVolume& v, StructureKind kind, std::span<const double> scales,
                    const FrangiParams& frangi = {}, const BlobParams& blob = {},
                    double cross_section_weight = 0.5);

}  // namespace gliaseg
