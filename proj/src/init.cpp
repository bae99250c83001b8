#include "gliaseg/init.hpp"

#include <cmath>

#include "gliaseg/distance.hpp"

namespace gliaseg {

int otsu_bin(double x, double lo, double hi, int bins) {
  const int b = static_cast<int>(std::floor((x - lo) / (hi - lo) * bins));
  return std::clamp(b, 0, bins - 1);
}

double otsu_threshold(const ScalarVolume& v, int bins) {
  if (v.empty()) throw ShapeError("otsu_threshold: empty volume");
  if (bins < 2) throw ParameterError("otsu_threshold: need at least 2 bins");
  require_finite(v, "otsu_threshold");
  const double lo = v.data().minCoeff(), hi = v.data().maxCoeff();
  if (!(hi > lo)) throw DegenerateInputError("otsu_threshold: constant volume");

  std::vector<double> counts(bins, 0.0), sums(bins, 0.0);
  for (Eigen::Index i = 0; i < v.size(); ++i) {
    const int b = otsu_bin(v[i], lo, hi, bins);
    counts[b] += 1.0;
    sums[b] += v[i];
  }
  const double total_n = static_cast<double>(v.size());
  double total_s = 0.0;
  for (double s : sums) total_s += s;

  double n0 = 0.0, s0 = 0.0, best = -1.0;
  int best_k = 1;
  for (int k = 1; k < bins; ++k) {
    n0 += counts[k - 1];
    s0 += sums[k - 1];
    const double n1 = total_n - n0;
    if (n0 == 0.0 || n1 == 0.0) continue;
    const double diff = s0 / n0 - (total_s - s0) / n1;
    const double between = n0 * n1 * diff * diff / (total_n * total_n);
    if (between > best) {
      best = between;
      best_k = k;
    }
  }
  return lo + best_k * (hi - lo) / bins;
}

LevelSetField mask_to_sdf(const BinaryMask& m, double epsilon, std::string* warning) {
  if (m.empty()) throw ShapeError("mask_to_sdf: empty volume");
  const std::int64_t n = count(m);
  const double far = (m.dims().cast<double>() * m.spacing()).matrix().norm();
  if (n == 0 || n == m.size()) {
    if (warning) *warning = n == 0 ? "mask is empty; level set is negative everywhere"
                                   : "mask is full; level set is positive everywhere";
    return LevelSetField(ScalarVolume(m.dims(), m.spacing(), n == 0 ? -far : far), epsilon);
  }
  const ScalarVolume to_inside = squared_distance_transform(m);
  const ScalarVolume to_outside = squared_distance_transform(mask_not(m));
  const double half = 0.5 * m.spacing().minCoeff();
  ScalarVolume phi(m.dims(), m.spacing());
  for (Eigen::Index i = 0; i < m.size(); ++i)
    phi[i] = m[i] ? std::sqrt(to_outside[i]) - half : half - std::sqrt(to_inside[i]);
  return LevelSetField(std::move(phi), epsilon);
}

namespace {

double seed_threshold(const ScalarVolume& response, std::vector<std::string>& warnings, const char* name) {
  try {
    return otsu_threshold(response);
  } catch (const DegenerateInputError&) {
    warnings.push_back(std::string(name) + " response is constant; seeding at 0.5");
    return 0.5;
  }
}

}  // namespace

constexpr double kAbsentPeakRatio = 0.5;

SeedPair initialize_pair(const EnhancedField& tube, const EnhancedField& blob, double epsilon) {
  require_same_shape(tube.response, blob.response, "initialize_pair");
  SeedPair out;
  out.processes_threshold = seed_threshold(tube.response, out.warnings, "tube");
  out.soma_threshold = seed_threshold(blob.response, out.warnings, "blob");

  // Each voxel seeds at most one structure: the one responding more strongly.
  BinaryMask soma = threshold_mask(blob.response, out.soma_threshold);
  BinaryMask processes = threshold_mask(tube.response, out.processes_threshold);
  for (Eigen::Index i = 0; i < soma.size(); ++i) {
    if (soma[i] && !(blob.response[i] > tube.response[i])) soma[i] = 0;
    if (processes[i] && !(tube.response[i] > blob.response[i])) processes[i] = 0;
  }

  // Tube fragments lying entirely within the blob response (the rim of a
  // bright sphere looks faintly tubular) belong to the soma.
  const ComponentLabels comps = label_components(processes, Connectivity::full);
  std::vector<std::uint8_t> escapes(comps.count() + 1, 0);
  for (Eigen::Index i = 0; i < processes.size(); ++i)
    if (comps.labels[i] && !(blob.response[i] > 0.0)) escapes[comps.labels[i]] = 1;
  for (Eigen::Index i = 0; i < processes.size(); ++i)
    if (comps.labels[i] && !escapes[comps.labels[i]]) processes[i] = 0;

  // A filter whose peak is well below the other's is answering to the other
  // structure (tube junctions look blob-like, sphere rims tube-like).
  const double tube_peak = tube.response.data().maxCoeff();
  const double blob_peak = blob.response.data().maxCoeff();
  if (tube_peak < kAbsentPeakRatio * blob_peak && count(processes) > 0) {
    processes.data().setZero();
    out.warnings.push_back("tube response peak is below half the blob peak; processes treated as absent");
  }
  if (blob_peak < kAbsentPeakRatio * tube_peak && count(soma) > 0) {
    soma.data().setZero();
    out.warnings.push_back("blob response peak is below half the tube peak; soma treated as absent");
  }

  out.processes_absent = count(processes) == 0;
  out.soma_absent = count(soma) == 0;
  if (out.processes_absent && out.soma_absent)
    throw EmptySeedError("initialize_pair: both the tube and blob seeds are empty");

  std::string warn;
  out.processes = mask_to_sdf(processes, epsilon, &warn);
  if (out.processes_absent) out.warnings.push_back("tube seed empty (processes absent): " + warn);
  warn.clear();
  out.soma = mask_to_sdf(soma, epsilon, &warn);
  if (out.soma_absent) out.warnings.push_back("blob seed empty (soma absent): " + warn);
  out.processes_seed = std::move(processes);
  out.soma_seed = std::move(soma);
  return out;
}

}  // namespace gliaseg
