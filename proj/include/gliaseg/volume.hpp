#pragma once

// Dense 3D scalar grids and the separable filters that operate on them.
//
// Layout: voxel (x, y, z) lives at linear index x + nx * (y + ny * z), i.e.
// x is the fastest axis. Every module and every file format shares it.
// HessianVolume components are stored in the fixed order
// (xx, yy, zz, xy, xz, yz).

#include <array>
#include <cmath>
#include <cstdint>
#include <string>
#include <utility>

#include <Eigen/Dense>

#include "gliaseg/error.hpp"

namespace gliaseg {

using Dims = Eigen::Array3i;
using Spacing = Eigen::Array3d;

template <typename Scalar>
class Volume {
public:
  using Storage = Eigen::Array<Scalar, Eigen::Dynamic, 1>;

  Volume() : dims_(Dims::Zero()), spacing_(Spacing::Ones()) {}

  explicit Volume(const Dims& dims, const Spacing& spacing = Spacing::Ones(),
                  Scalar fill = Scalar(0))
      : dims_(dims), spacing_(spacing) {
    check_geometry();
    data_ = Storage::Constant(dims_.prod(), fill);
  }

  Volume(const Dims& dims, const Spacing& spacing, Storage data)
      : dims_(dims), spacing_(spacing), data_(std::move(data)) {
    check_geometry();
    if (data_.size() != static_cast<Eigen::Index>(dims_.prod()))
      throw ShapeError("volume data length does not match dims");
  }

  /// Builds a volume by evaluating `f(x, y, z)` at every voxel.
  template <typename F>
  static Volume generate(const Dims& dims, const Spacing& spacing, F&& f) {
    Volume v(dims, spacing);
    for (int z = 0; z < dims[2]; ++z)
      for (int y = 0; y < dims[1]; ++y)
        for (int x = 0; x < dims[0]; ++x) v(x, y, z) = static_cast<Scalar>(f(x, y, z));
    return v;
  }

  const Dims& dims() const noexcept { return dims_; }
  const Spacing& spacing() const noexcept { return spacing_; }
  void set_spacing(const Spacing& s) {
    if ((s <= 0.0).any() || !s.isFinite().all()) throw ParameterError("spacing must be positive");
    spacing_ = s;
  }

  Eigen::Index size() const noexcept { return data_.size(); }
  bool empty() const noexcept { return data_.size() == 0; }
  double voxel_volume() const noexcept { return spacing_.prod(); }

  Eigen::Index index(int x, int y, int z) const noexcept {
    return x + static_cast<Eigen::Index>(dims_[0]) * (y + static_cast<Eigen::Index>(dims_[1]) * z);
  }
  Eigen::Array3i coords(Eigen::Index i) const noexcept {
    const Eigen::Index nx = dims_[0], ny = dims_[1];
    return {static_cast<int>(i % nx), static_cast<int>((i / nx) % ny), static_cast<int>(i / (nx * ny))};
  }
  bool contains(int x, int y, int z) const noexcept {
    return x >= 0 && y >= 0 && z >= 0 && x < dims_[0] && y < dims_[1] && z < dims_[2];
  }

  Scalar& operator()(int x, int y, int z) noexcept { return data_[index(x, y, z)]; }
  const Scalar& operator()(int x, int y, int z) const noexcept { return data_[index(x, y, z)]; }
  Scalar& operator[](Eigen::Index i) noexcept { return data_[i]; }
  const Scalar& operator[](Eigen::Index i) const noexcept { return data_[i]; }

  Storage& data() noexcept { return data_; }
  const Storage& data() const noexcept { return data_; }

  template <typename Other>
  bool same_shape(const Volume<Other>& o) const noexcept {
    return (dims_ == o.dims()).all();
  }

  /// Same geometry, values replaced.
  Volume with_data(Storage data) const { return Volume(dims_, spacing_, std::move(data)); }

  template <typename Other>
  Volume<Other> cast() const {
    return Volume<Other>(dims_, spacing_, data_.template cast<Other>());
  }

private:
  void check_geometry() const {
    if ((dims_ < 1).any()) throw ShapeError("volume dims must all be >= 1");
    if ((spacing_ <= 0.0).any() || !spacing_.isFinite().all())
      throw ParameterError("volume spacing must be positive and finite");
  }

  Dims dims_;
  Spacing spacing_;
  Storage data_;
};

using ScalarVolume = Volume<double>;

template <typename Scalar>
void require_same_shape(const Volume<Scalar>& a, const Volume<Scalar>& b, const char* what) {
  if (!a.same_shape(b)) throw ShapeError(std::string(what) + ": dimension mismatch");
}

/// Half-sample symmetric reflection: ... 1 0 | 0 1 2 ... n-1 | n-1 n-2 ...
/// Works for any offset, including ones further than n outside the range.
inline int reflect_index(int i, int n) noexcept {
  if (n == 1) return 0;
  const int period = 2 * n;
  int m = i % period;
  if (m < 0) m += period;
  return m < n ? m : period - 1 - m;
}

/// Sampled, unit-sum Gaussian for one axis. `sigma` is physical, `step` is the
/// voxel spacing along the axis; taps cover ceil(3 sigma / step) voxels per side.
template <typename Scalar = double>
Eigen::Array<Scalar, Eigen::Dynamic, 1> gaussian_kernel(double sigma, double step) {
  if (!(sigma > 0.0) || !std::isfinite(sigma)) throw ParameterError("gaussian sigma must be positive");
  const int radius = static_cast<int>(std::ceil(3.0 * sigma / step));
  Eigen::Array<Scalar, Eigen::Dynamic, 1> k(2 * radius + 1);
  for (int i = -radius; i <= radius; ++i) {
    const double x = i * step;
    k[i + radius] = static_cast<Scalar>(std::exp(-0.5 * x * x / (sigma * sigma)));
  }
  k /= k.sum();
  return k;
}

/// 1D convolution along `axis` with a symmetric odd-length kernel, mirror boundaries.
template <typename Scalar>
Volume<Scalar> convolve_axis(const Volume<Scalar>& v, const Eigen::Array<Scalar, Eigen::Dynamic, 1>& kernel,
                             int axis) {
  const Dims& d = v.dims();
  const int radius = static_cast<int>(kernel.size() / 2);
  const int n = d[axis];
  const Eigen::Index stride = axis == 0 ? 1 : (axis == 1 ? d[0] : static_cast<Eigen::Index>(d[0]) * d[1]);
  Volume<Scalar> out(d, v.spacing());
  const Eigen::Index total = v.size();
  const auto& src = v.data();
  auto& dst = out.data();
#pragma omp parallel for schedule(static)
  for (Eigen::Index i = 0; i < total; ++i) {
    const int pos = v.coords(i)[axis];
    const Eigen::Index line_start = i - pos * stride;
    Scalar acc = 0;
    for (int k = -radius; k <= radius; ++k) {
      const int j = reflect_index(pos - k, n);
      acc += kernel[k + radius] * src[line_start + j * stride];
    }
    dst[i] = acc;
  }
  return out;
}

template <typename Scalar>
void require_finite(const Volume<Scalar>& v, const char* what) {
  if (!v.data().isFinite().all()) throw NumericError(std::string(what) + ": non-finite voxel value");
}

/// Separable Gaussian blur with physical-unit `sigma`, honoring anisotropic spacing.
template <typename Scalar>
Volume<Scalar> gaussian_smooth(const Volume<Scalar>& v, double sigma) {
  if (v.empty()) throw ShapeError("gaussian_smooth: empty volume");
  if (!(sigma > 0.0) || !std::isfinite(sigma)) throw ParameterError("gaussian_smooth: sigma must be positive");
  require_finite(v, "gaussian_smooth");
  Volume<Scalar> out = v;
  for (int axis = 0; axis < 3; ++axis)
    out = convolve_axis(out, gaussian_kernel<Scalar>(sigma, v.spacing()[axis]), axis);
  return out;
}

/// Per-voxel symmetric 3x3 matrices, 6 unique components per column in the
/// order (xx, yy, zz, xy, xz, yz).
template <typename Scalar>
struct HessianVolume {
  enum Component { XX = 0, YY, ZZ, XY, XZ, YZ };

  Dims dims = Dims::Zero();
  Spacing spacing = Spacing::Ones();
  double scale = 0.0;
  Eigen::Array<Scalar, 6, Eigen::Dynamic> components;

  Eigen::Index size() const noexcept { return components.cols(); }

  Eigen::Matrix<Scalar, 3, 3> matrix(Eigen::Index i) const {
    const auto c = components.col(i);
    Eigen::Matrix<Scalar, 3, 3> h;
    h << c[XX], c[XY], c[XZ],
         c[XY], c[YY], c[YZ],
         c[XZ], c[YZ], c[ZZ];
    return h;
  }
};

namespace detail {

// Central first difference with mirror boundaries (f[-1] = f[0]).
template <typename Scalar>
Volume<Scalar> mirrored_first_difference(const Volume<Scalar>& v, int axis) {
  const Dims& d = v.dims();
  const double h = v.spacing()[axis];
  Volume<Scalar> out(d, v.spacing());
#pragma omp parallel for schedule(static)
  for (int z = 0; z < d[2]; ++z)
    for (int y = 0; y < d[1]; ++y)
      for (int x = 0; x < d[0]; ++x) {
        Eigen::Array3i p(x, y, z), lo = p, hi = p;
        lo[axis] = reflect_index(p[axis] - 1, d[axis]);
        hi[axis] = reflect_index(p[axis] + 1, d[axis]);
        out(x, y, z) = static_cast<Scalar>((v(hi[0], hi[1], hi[2]) - v(lo[0], lo[1], lo[2])) / (2.0 * h));
      }
  return out;
}

template <typename Scalar>
Volume<Scalar> mirrored_second_difference(const Volume<Scalar>& v, int axis) {
  const Dims& d = v.dims();
  const double h = v.spacing()[axis];
  Volume<Scalar> out(d, v.spacing());
#pragma omp parallel for schedule(static)
  for (int z = 0; z < d[2]; ++z)
    for (int y = 0; y < d[1]; ++y)
      for (int x = 0; x < d[0]; ++x) {
        Eigen::Array3i p(x, y, z), lo = p, hi = p;
        lo[axis] = reflect_index(p[axis] - 1, d[axis]);
        hi[axis] = reflect_index(p[axis] + 1, d[axis]);
        out(x, y, z) = static_cast<Scalar>(
            (v(hi[0], hi[1], hi[2]) - 2.0 * v(x, y, z) + v(lo[0], lo[1], lo[2])) / (h * h));
      }
  return out;
}

}  // namespace detail

/// Scale-normalized (sigma^2) Hessian of the sigma-smoothed volume.
template <typename Scalar>
HessianVolume<Scalar> hessian(const Volume<Scalar>& v, double sigma) {
  const Volume<Scalar> s = gaussian_smooth(v, sigma);
  HessianVolume<Scalar> h;
  h.dims = v.dims();
  h.spacing = v.spacing();
  h.scale = sigma;
  h.components.resize(6, v.size());
  const Scalar norm = static_cast<Scalar>(sigma * sigma);

  for (int axis = 0; axis < 3; ++axis)
    h.components.row(axis) = norm * detail::mirrored_second_difference(s, axis).data().transpose();

  const Volume<Scalar> dx = detail::mirrored_first_difference(s, 0);
  const Volume<Scalar> dy = detail::mirrored_first_difference(s, 1);
  h.components.row(HessianVolume<Scalar>::XY) = norm * detail::mirrored_first_difference(dx, 1).data().transpose();
  h.components.row(HessianVolume<Scalar>::XZ) = norm * detail::mirrored_first_difference(dx, 2).data().transpose();
  h.components.row(HessianVolume<Scalar>::YZ) = norm * detail::mirrored_first_difference(dy, 2).data().transpose();
  return h;
}

/// Gradient by central differences in the interior and one-sided differences
/// on the faces, divided by spacing. Returns (d/dx, d/dy, d/dz).
template <typename Scalar>
std::array<Volume<Scalar>, 3> gradient(const Volume<Scalar>& v) {
  if (v.empty()) throw ShapeError("gradient: empty volume");
  const Dims& d = v.dims();
  std::array<Volume<Scalar>, 3> g{Volume<Scalar>(d, v.spacing()), Volume<Scalar>(d, v.spacing()),
                                  Volume<Scalar>(d, v.spacing())};
  for (int axis = 0; axis < 3; ++axis) {
    const double h = v.spacing()[axis];
    const int n = d[axis];
    auto& out = g[axis];
#pragma omp parallel for schedule(static)
    for (int z = 0; z < d[2]; ++z)
      for (int y = 0; y < d[1]; ++y)
        for (int x = 0; x < d[0]; ++x) {
          if (n == 1) {
            out(x, y, z) = 0;
            continue;
          }
          Eigen::Array3i p(x, y, z), lo = p, hi = p;
          const int i = p[axis];
          lo[axis] = i > 0 ? i - 1 : i;
          hi[axis] = i < n - 1 ? i + 1 : i;
          const double span = (hi[axis] - lo[axis]) * h;
          out(x, y, z) = static_cast<Scalar>((v(hi[0], hi[1], hi[2]) - v(lo[0], lo[1], lo[2])) / span);
        }
  }
  return g;
}

}  // namespace gliaseg
