#include "gliaseg/features.hpp"

#include <algorithm>
#include <cmath>
#include <vector>
#include <string>

#include "gliaseg/eigen3.hpp"

namespace gliaseg {

const char* to_string(StructureKind kind) noexcept { return kind == StructureKind::tube ? "tube" : "blob"; }

namespace {

struct ScaleAnalysis {
  Eigen::Array<double, 3, Eigen::Dynamic> values;
  Eigen::Array<double, 9, Eigen::Dynamic> vectors;
  Eigen::ArrayXd structure_norm;  // S = sqrt(l1^2 + l2^2 + l3^2)
};

ScaleAnalysis analyze_scale(const ScalarVolume& v, double sigma) {
  const HessianVolume<double> h = hessian(v, sigma);
  ScaleAnalysis out;
  const Eigen::Index n = h.size();
  out.values.resize(3, n);
  out.vectors.resize(9, n);
  out.structure_norm.resize(n);
#pragma omp parallel for schedule(static)
  for (Eigen::Index i = 0; i < n; ++i) {
    const SymmetricEigen3<double> e = eigen_symmetric3<double>(h.matrix(i));
    out.values.col(i) = e.values.array();
    for (int k = 0; k < 3; ++k) out.vectors.col(i).segment<3>(3 * k) = e.vectors.col(k).array();
    out.structure_norm[i] = e.values.norm();
  }
  return out;
}

double auto_parameter(double requested, double s_max) {
  if (requested > 0.0) return requested;
  const double half_max = 0.5 * s_max;
  return half_max > 0.0 ? half_max : 1.0;
}

double frangi_tube(const Eigen::Array3d& l, double s, double a, double b, double c) {
  if (l[1] > 0.0 || l[2] > 0.0) return 0.0;
  const double l2 = std::abs(l[1]), l3 = std::abs(l[2]);
  if (l3 == 0.0 || l2 == 0.0) return 0.0;
  const double ra = l2 / l3;
  const double rb = std::abs(l[0]) / std::sqrt(l2 * l3);
  return (1.0 - std::exp(-ra * ra / (2.0 * a * a))) * std::exp(-rb * rb / (2.0 * b * b)) *
         (1.0 - std::exp(-s * s / (2.0 * c * c)));
}

double blob_response(const Eigen::Array3d& l, double s, double b1, double b2) {
  if ((l > 0.0).any()) return 0.0;
  const double l3 = std::abs(l[2]);
  if (l3 == 0.0) return 0.0;
  const double r = std::abs(l[0]) / l3;
  return (1.0 - std::exp(-r * r / (2.0 * b1 * b1))) * (1.0 - std::exp(-s * s / (2.0 * b2 * b2)));
}

template <typename Response>
Enhancement multiscale(const ScalarVolume& v, std::span<const double> scales, StructureKind kind, Response&& response) {
  if (v.empty()) throw ShapeError("enhancement: empty volume");
  if (scales.empty()) throw ParameterError("enhancement: empty scale list");
  for (double s : scales)
    if (!(s > 0.0) || !std::isfinite(s)) throw ParameterError("enhancement: scales must be positive");

  Enhancement out;
  out.field.kind = kind;
  out.field.response = ScalarVolume(v.dims(), v.spacing(), 0.0);
  out.field.scales_used.assign(scales.begin(), scales.end());
  OrientationField& o = out.orientation;
  o.dims = v.dims();
  o.spacing = v.spacing();
  o.kind = kind;
  o.scale = ScalarVolume(v.dims(), v.spacing(), scales.front());

  // Auto c / b2 use the largest S over all scales, one value for the whole set.
  std::vector<ScaleAnalysis> analyses;
  analyses.reserve(scales.size());
  double s_max = 0.0;
  for (double sigma : scales) {
    analyses.push_back(analyze_scale(v, sigma));
    s_max = std::max(s_max, analyses.back().structure_norm.maxCoeff());
  }
  const auto per_voxel = response(s_max);

  const Eigen::Index n = v.size();
  for (std::size_t k = 0; k < scales.size(); ++k) {
    ScaleAnalysis& a = analyses[k];
    if (k == 0) {
      o.eigenvalues = std::move(a.values);
      o.eigenvectors = std::move(a.vectors);
      for (Eigen::Index i = 0; i < n; ++i)
        out.field.response[i] = per_voxel(o.eigenvalues.col(i), a.structure_norm[i]);
      continue;
    }
#pragma omp parallel for schedule(static)
    for (Eigen::Index i = 0; i < n; ++i) {
      const double r = per_voxel(a.values.col(i), a.structure_norm[i]);
      if (r > out.field.response[i]) {
        out.field.response[i] = r;
        o.eigenvalues.col(i) = a.values.col(i);
        o.eigenvectors.col(i) = a.vectors.col(i);
        o.scale[i] = scales[k];
      }
    }
  }
  return out;
}

}  // namespace

Enhancement vesselness(const ScalarVolume& v, std::span<const double> scales, const FrangiParams& params) {
  if (!(params.a > 0.0) || !(params.b > 0.0)) throw ParameterError("vesselness: a and b must be positive");
  return multiscale(v, scales, StructureKind::tube, [&](double s_max) {
    const double c = auto_parameter(params.c, s_max);
    return [=](const Eigen::Array3d& l, double norm) { return frangi_tube(l, norm, params.a, params.b, c); };
  });
}

Enhancement blobness(const ScalarVolume& v, std::span<const double> scales, const BlobParams& params) {
  if (!(params.b1 > 0.0)) throw ParameterError("blobness: b1 must be positive");
  return multiscale(v, scales, StructureKind::blob, [&](double s_max) {
    const double b2 = auto_parameter(params.b2, s_max);
    return [=](const Eigen::Array3d& l, double norm) { return blob_response(l, norm, params.b1, b2); };
  });
}

EnhancedField evolution_weights(EnhancedField field, const OrientationField& orientation,
                                double cross_section_weight) {
  if (field.kind != orientation.kind)
    throw ParameterError(std::string("evolution_weights: ") + to_string(field.kind) +
                         " response paired with " + to_string(orientation.kind) + " orientation");
  if ((field.response.dims() != orientation.dims).any())
    throw ShapeError("evolution_weights: response and orientation dims differ");
  if (field.kind == StructureKind::tube && !(cross_section_weight > 0.0 && cross_section_weight <= 1.0))
    throw ParameterError("evolution_weights: cross-section weight must lie in (0, 1]");

  const ScalarVolume& r = field.response;
  const double side = field.kind == StructureKind::tube ? cross_section_weight : 1.0;
  field.alpha[0] = r;
  field.alpha[1] = r.with_data(side * r.data());
  field.alpha[2] = field.alpha[1];
  return field;
}

Enhancement enhance(const ScalarVolume& v, StructureKind kind, std::span<const double> scales,
                    const FrangiParams& frangi, const BlobParams& blob, double cross_section_weight) {
  Enhancement e = kind == StructureKind::tube ? vesselness(v, scales, frangi) : blobness(v, scales, blob);
  e.field = evolution_weights(std::move(e.field), e.orientation, cross_section_weight);
  return e;
}

}  // namespace gliaseg
