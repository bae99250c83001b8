#include "gliaseg/phantom.hpp"

#include <algorithm>
#include <cmath>
#include <random>

namespace gliaseg {

namespace {

bool inside_domain(const Eigen::Vector3d& p, const PhantomSpec& s) {
  const Eigen::Array3d extent = (s.dims.cast<double>() - 1.0) * s.spacing;
  return (p.array() >= 0.0).all() && (p.array() <= extent).all();
}

double segment_distance(const Eigen::Vector3d& p, const TubeSpec& t, double& along) {
  const Eigen::Vector3d a = t.start, ab = t.end() - t.start;
  const double len2 = ab.squaredNorm();
  along = len2 > 0.0 ? std::clamp((p - a).dot(ab) / len2, 0.0, 1.0) : 0.0;
  return (p - (a + along * ab)).norm();
}

}  // namespace

void PhantomSpec::validate() const {
  if ((dims < 1).any()) throw ParameterError("phantom: dims must be >= 1");
  if ((spacing <= 0.0).any()) throw ParameterError("phantom: spacing must be positive");
  if (soma) {
    if (!(soma->radius > 0.0)) throw ParameterError("phantom: soma radius must be positive");
    for (int axis = 0; axis < 3; ++axis)
      for (double sgn : {-1.0, 1.0}) {
        Eigen::Vector3d p = soma->center;
        p[axis] += sgn * soma->radius;
        if (!inside_domain(p, *this)) throw ParameterError("phantom: soma extends outside the volume");
      }
  }
  for (const TubeSpec& t : tubes) {
    if (!(t.radius > 0.0) || !(t.length > 0.0)) throw ParameterError("phantom: tube radius and length must be positive");
    if (t.direction.norm() == 0.0) throw ParameterError("phantom: tube direction must be non-zero");
    if (!inside_domain(t.start, *this) || !inside_domain(t.end(), *this))
      throw ParameterError("phantom: tube endpoint outside the volume");
  }
  if (noise.kind == NoiseSpec::Kind::gaussian && !(noise.sigma >= 0.0))
    throw ParameterError("phantom: noise sigma must be non-negative");
  if (ramp && (ramp->axis < 0 || ramp->axis > 2)) throw ParameterError("phantom: ramp axis must be 0, 1 or 2");
}

PhantomSpec PhantomSpec::microglia(bool with_ramp, double snr, std::uint64_t seed) {
  PhantomSpec s;
  s.dims = Dims(64, 64, 32);
  s.spacing = Spacing::Ones();
  s.soma = SomaSpec{Eigen::Vector3d(32.0, 32.0, 16.0), 5.0};
  const double r = 1.2;
  const std::array<Eigen::Vector3d, 4> dirs{Eigen::Vector3d(1.0, 0.25, 0.1), Eigen::Vector3d(-1.0, 0.35, -0.1),
                                            Eigen::Vector3d(0.2, 1.0, 0.15), Eigen::Vector3d(-0.3, -1.0, 0.05)};
  for (const auto& d : dirs) s.tubes.push_back(TubeSpec{s.soma->center, d.normalized(), 24.0, r, 1.0, 1.0});
  s.background = 0.1;
  s.foreground = 1.0;
  if (snr > 0.0) s.noise = NoiseSpec{NoiseSpec::Kind::gaussian, (s.foreground - s.background) / snr};
  if (with_ramp) s.ramp = IntensityRamp{0, 1.0, 0.5};
  s.seed = seed;
  return s;
}

Phantom generate(const PhantomSpec& spec) {
  spec.validate();
  Phantom out;
  out.volume = ScalarVolume(spec.dims, spec.spacing, spec.background);
  out.soma = BinaryMask(spec.dims, spec.spacing, 0);
  out.processes = BinaryMask(spec.dims, spec.spacing, 0);
  const double edge = spec.spacing.minCoeff();
  const double contrast = spec.foreground - spec.background;

  for (int z = 0; z < spec.dims[2]; ++z)
    for (int y = 0; y < spec.dims[1]; ++y)
      for (int x = 0; x < spec.dims[0]; ++x) {
        const Eigen::Vector3d p = (Eigen::Array3d(x, y, z) * spec.spacing).matrix();
        double occupancy = 0.0;
        bool in_soma = false, in_soma_core = false, in_tube = false;
        if (spec.soma) {
          const double d = (p - spec.soma->center).norm();
          occupancy = std::clamp((spec.soma->radius - d) / edge + 0.5, 0.0, 1.0);
          in_soma = d <= spec.soma->radius;
          for (const TubeSpec& t : spec.tubes)
            in_soma_core = in_soma_core || d <= spec.soma->radius - t.radius;
        }
        for (const TubeSpec& t : spec.tubes) {
          double along = 0.0;
          const double d = segment_distance(p, t, along);
          const double profile = t.start_contrast + along * (t.end_contrast - t.start_contrast);
          occupancy = std::max(occupancy, profile * std::clamp((t.radius - d) / edge + 0.5, 0.0, 1.0));
          in_tube = in_tube || d <= t.radius;
        }
        double gain = 1.0;
        if (spec.ramp) {
          const int n = spec.dims[spec.ramp->axis];
          const double u = n > 1 ? static_cast<double>(Eigen::Array3i(x, y, z)[spec.ramp->axis]) / (n - 1) : 0.0;
          gain = spec.ramp->low + u * (spec.ramp->high - spec.ramp->low);
        }
        out.volume(x, y, z) = spec.background + contrast * gain * occupancy;
        out.soma(x, y, z) = in_soma ? 1 : 0;
        out.processes(x, y, z) = in_tube && !in_soma_core ? 1 : 0;
      }

  if (spec.noise.kind == NoiseSpec::Kind::gaussian && spec.noise.sigma > 0.0) {
    std::mt19937_64 rng(spec.seed);
    std::normal_distribution<double> gauss(0.0, spec.noise.sigma);
    for (Eigen::Index i = 0; i < out.volume.size(); ++i) out.volume[i] += gauss(rng);
  }
  return out;
}

}  // namespace gliaseg
