#include "gliaseg/levelset.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>
#include <queue>
#include <sstream>

#include "gliaseg/distance.hpp"

namespace gliaseg {

double heaviside(double z, double epsilon) {
  if (!(epsilon > 0.0)) throw ParameterError("heaviside: epsilon must be positive");
  return 0.5 * (1.0 + (2.0 / std::numbers::pi) * std::atan(z / epsilon));
}

double dirac(double z, double epsilon) {
  if (!(epsilon > 0.0)) throw ParameterError("dirac: epsilon must be positive");
  return epsilon / (std::numbers::pi * (epsilon * epsilon + z * z));
}

void EvolutionConfig::validate() const {
  if (!(dt > 0.0) || !std::isfinite(dt)) throw ParameterError("dt must be positive");
  if (max_iters < 1) throw ParameterError("max_iters must be >= 1");
  if (weights.reg < 0 || weights.evolve < 0 || weights.attr < 0 || weights.repel < 0)
    throw ParameterError("evolution weights must be non-negative");
  if (reinit_every < 0) throw ParameterError("reinit_every must be >= 0");
  if (!(convergence_tol >= 0.0)) throw ParameterError("convergence_tol must be non-negative");
  if (convergence_window < 1) throw ParameterError("convergence_window must be at least 1");
  if (!(attraction_sigma > 0.0)) throw ParameterError("attraction_sigma must be positive");
  if (attraction_reach < 0.0) throw ParameterError("attraction_reach must be non-negative");
}

Drive make_drive(const Enhancement& e, const EvolutionConfig& cfg) {
  if (!e.field.has_weights()) throw ParameterError("drive: enhancement has no evolution weights");
  Drive d;
  d.enhancement = &e;
  d.attraction_potential = gaussian_smooth(e.field.response, cfg.attraction_sigma);
  return d;
}

namespace {

struct Normals {
  std::array<ScalarVolume, 3> grad;
  Eigen::ArrayXd magnitude;
};

Normals normals(const ScalarVolume& phi) {
  Normals n{gradient(phi), {}};
  n.magnitude = (n.grad[0].data().square() + n.grad[1].data().square() + n.grad[2].data().square()).sqrt();
  return n;
}

// sum_i alpha_i <e_i, n>^2 with n = -grad phi / |grad phi|.
double directional_drive(const Normals& nrm, const EnhancedField& enh, const OrientationField& o, Eigen::Index i) {
  const double mag = std::max(nrm.magnitude[i], 1e-8);
  const Eigen::Vector3d n(-nrm.grad[0][i] / mag, -nrm.grad[1][i] / mag, -nrm.grad[2][i] / mag);
  double a = 0.0;
  for (int k = 0; k < 3; ++k) {
    const double c = o.direction(i, k).dot(n);
    a += enh.alpha[k][i] * c * c;
  }
  return a;
}

void require_drive_shape(const LevelSetField& phi, const EnhancedField& enh, const OrientationField& o) {
  if ((phi.phi.dims() != enh.response.dims()).any() || (phi.phi.dims() != o.dims).any())
    throw ShapeError("level set and enhancement dims differ");
  if (!enh.has_weights()) throw ParameterError("enhancement has no evolution weights");
}

double band_width(const LevelSetField& f) {
  return (f.band > 0.0 ? f.band : 3.0) * f.phi.spacing().minCoeff();
}

}  // namespace

double energy_reg(const LevelSetField& phi, double weight) {
  if (weight == 0.0) return 0.0;
  const Normals n = normals(phi.phi);
  double sum = 0.0;
  for (Eigen::Index i = 0; i < phi.phi.size(); ++i) sum += dirac(phi.phi[i], phi.epsilon) * n.magnitude[i];
  return weight * sum * phi.phi.voxel_volume();
}

double energy_evolve(const LevelSetField& phi, const EnhancedField& enh, const OrientationField& orient) {
  require_drive_shape(phi, enh, orient);
  const Normals n = normals(phi.phi);
  double sum = 0.0;
  for (Eigen::Index i = 0; i < phi.phi.size(); ++i) {
    const double a = directional_drive(n, enh, orient, i);
    if (a != 0.0) sum += a * heaviside(phi.phi[i], phi.epsilon);
  }
  return -sum * phi.phi.voxel_volume();
}

double energy_repel(const LevelSetField& a, const LevelSetField& b) {
  require_same_shape(a.phi, b.phi, "energy_repel");
  double sum = 0.0;
  for (Eigen::Index i = 0; i < a.phi.size(); ++i)
    sum += heaviside(a.phi[i], a.epsilon) * heaviside(b.phi[i], b.epsilon);
  return sum * a.phi.voxel_volume();
}

std::int64_t overlap_count(const LevelSetField& a, const LevelSetField& b) {
  require_same_shape(a.phi, b.phi, "overlap_count");
  return ((a.phi.data() > 0.0) && (b.phi.data() > 0.0)).count();
}

Attraction attraction(const LevelSetField& phi, const ScalarVolume& potential, const EvolutionConfig& cfg) {
  require_same_shape(phi.phi, potential, "attraction");
  Attraction out;
  out.velocity = ScalarVolume(phi.phi.dims(), phi.phi.spacing(), 0.0);
  const ComponentLabels comps = label_components(positive_mask(phi.phi), Connectivity::full);
  out.components = comps.count();
  const double rmax = potential.data().maxCoeff();
  if (comps.count() < 2 || !(rmax > 0.0) || cfg.attraction_reach < 1.0) return out;

  // rank 0 is the largest component; ties go to the lower label.
  std::vector<int> by_size(comps.count());
  for (int k = 0; k < comps.count(); ++k) by_size[k] = k + 1;
  std::stable_sort(by_size.begin(), by_size.end(),
                   [&](int l, int r) { return comps.sizes[l - 1] > comps.sizes[r - 1]; });
  std::vector<int> rank(comps.count() + 1, 0);
  for (int k = 0; k < comps.count(); ++k) rank[by_size[k]] = k;

  std::vector<std::vector<Eigen::Index>> members(comps.count() + 1);
  for (Eigen::Index i = 0; i < phi.phi.size(); ++i)
    if (comps.labels[i]) members[comps.labels[i]].push_back(i);

  const double floor = cfg.attraction_floor * rmax;
  const int max_hops = static_cast<int>(std::floor(cfg.attraction_reach));
  const auto& nbrs = neighbourhood(Connectivity::full);
  const Spacing& h = phi.phi.spacing();
  const double hmin = h.minCoeff();
  std::vector<double> step_len(nbrs.size());
  for (std::size_t k = 0; k < nbrs.size(); ++k) step_len[k] = (nbrs[k].cast<double>() * h).matrix().norm() / hmin;

  const Eigen::Index n = phi.phi.size();
  constexpr double kInf = std::numeric_limits<double>::infinity();
  std::vector<double> cost(n, kInf);
  std::vector<int> hops(n, 0);
  std::vector<Eigen::Index> parent(n, -1);
  std::vector<Eigen::Index> touched;
  using Entry = std::pair<double, Eigen::Index>;

  for (int k = 1; k < comps.count(); ++k) {
    const int label = by_size[k];
    std::priority_queue<Entry, std::vector<Entry>, std::greater<>> heap;
    for (Eigen::Index s : members[label]) {
      cost[s] = 0.0;
      parent[s] = -1;
      touched.push_back(s);
      heap.emplace(0.0, s);
    }
    Eigen::Index reached = -1;
    while (!heap.empty()) {
      const auto [c, u] = heap.top();
      heap.pop();
      if (c > cost[u]) continue;
      const int lu = comps.labels[u];
      if (lu != 0 && lu != label && rank[lu] < k) {
        reached = u;
        break;
      }
      if (lu != 0 && lu != label) continue;  // smaller components are not crossed
      if (hops[u] >= max_hops + 1) continue;
      const Eigen::Array3i p = phi.phi.coords(u);
      for (std::size_t m = 0; m < nbrs.size(); ++m) {
        const Eigen::Array3i q = p + nbrs[m];
        if (!phi.phi.contains(q[0], q[1], q[2])) continue;
        const Eigen::Index v = phi.phi.index(q[0], q[1], q[2]);
        const int lv = comps.labels[v];
        if (lv == label) continue;
        double w;
        if (lv == 0) {
          if (potential[v] < floor) continue;
          w = step_len[m] * rmax / potential[v];
        } else {
          w = step_len[m];
        }
        const double nc = c + w;
        if (nc < cost[v]) {
          if (cost[v] == kInf) touched.push_back(v);
          cost[v] = nc;
          hops[v] = hops[u] + 1;
          parent[v] = u;
          heap.emplace(nc, v);
        }
      }
    }

    if (reached >= 0) {
      std::vector<Eigen::Index> path;
      for (Eigen::Index v = parent[reached]; v >= 0 && comps.labels[v] == 0; v = parent[v]) path.push_back(v);
      if (!path.empty() && static_cast<int>(path.size()) <= max_hops) {
        double peak = 0.0;
        for (Eigen::Index v : path) peak = std::max(peak, potential[v]);
        for (Eigen::Index v : path) {
          out.energy += potential[v] * (1.0 - heaviside(phi.phi[v], phi.epsilon));
          out.velocity[v] = std::max(out.velocity[v], potential[v] / peak);
        }
        ++out.bridges;
      }
    }
    for (Eigen::Index v : touched) {
      cost[v] = kInf;
      hops[v] = 0;
      parent[v] = -1;
    }
    touched.clear();
  }
  out.energy *= phi.phi.voxel_volume();
  return out;
}

double energy_attr(const LevelSetField& phi, const EnhancedField& enh, const EvolutionConfig& cfg) {
  return attraction(phi, gaussian_smooth(enh.response, cfg.attraction_sigma), cfg).energy;
}

FieldEnergy field_energy(const LevelSetField& self, const LevelSetField& other, const Drive& drive,
                         const EvolutionConfig& cfg) {
  const EvolutionWeights& w = cfg.weights;
  FieldEnergy e;
  e.reg = energy_reg(self, w.reg);
  if (w.evolve != 0.0)
    e.evolve = w.evolve * energy_evolve(self, drive.enhancement->field, drive.enhancement->orientation);
  if (w.attr != 0.0) e.attr = w.attr * attraction(self, drive.attraction_potential, cfg).energy;
  if (w.repel != 0.0) e.repel = w.repel * energy_repel(self, other);
  return e;
}

ScalarVolume curvature(const ScalarVolume& phi) {
  const Dims& d = phi.dims();
  const Spacing& h = phi.spacing();
  const double limit = 1.0 / h.minCoeff();
  ScalarVolume k(d, h, 0.0);
  auto at = [&](int x, int y, int z) {
    return phi(reflect_index(x, d[0]), reflect_index(y, d[1]), reflect_index(z, d[2]));
  };
#pragma omp parallel for schedule(static)
  for (int z = 0; z < d[2]; ++z)
    for (int y = 0; y < d[1]; ++y)
      for (int x = 0; x < d[0]; ++x) {
        const double c = phi(x, y, z);
        const double px = (at(x + 1, y, z) - at(x - 1, y, z)) / (2 * h[0]);
        const double py = (at(x, y + 1, z) - at(x, y - 1, z)) / (2 * h[1]);
        const double pz = (at(x, y, z + 1) - at(x, y, z - 1)) / (2 * h[2]);
        const double g2 = px * px + py * py + pz * pz;
        if (g2 < 1e-16) continue;
        const double pxx = (at(x + 1, y, z) - 2 * c + at(x - 1, y, z)) / (h[0] * h[0]);
        const double pyy = (at(x, y + 1, z) - 2 * c + at(x, y - 1, z)) / (h[1] * h[1]);
        const double pzz = (at(x, y, z + 1) - 2 * c + at(x, y, z - 1)) / (h[2] * h[2]);
        const double pxy = (at(x + 1, y + 1, z) - at(x + 1, y - 1, z) - at(x - 1, y + 1, z) + at(x - 1, y - 1, z)) /
                           (4 * h[0] * h[1]);
        const double pxz = (at(x + 1, y, z + 1) - at(x + 1, y, z - 1) - at(x - 1, y, z + 1) + at(x - 1, y, z - 1)) /
                           (4 * h[0] * h[2]);
        const double pyz = (at(x, y + 1, z + 1) - at(x, y + 1, z - 1) - at(x, y - 1, z + 1) + at(x, y - 1, z - 1)) /
                           (4 * h[1] * h[2]);
        const double num = pxx * (py * py + pz * pz) + pyy * (px * px + pz * pz) + pzz * (px * px + py * py) -
                           2.0 * (px * py * pxy + px * pz * pxz + py * pz * pyz);
        k(x, y, z) = std::clamp(num / (g2 * std::sqrt(g2)), -limit, limit);
      }
  return k;
}

ScalarVolume VelocityTerms::total(const EvolutionWeights& w) const {
  ScalarVolume f(reg.dims(), reg.spacing(), 0.0);
  if (w.reg != 0.0) f.data() += w.reg * reg.data();
  if (w.evolve != 0.0) f.data() += w.evolve * evolve.data();
  if (w.attr != 0.0) f.data() += w.attr * attr.data();
  if (w.repel != 0.0) f.data() += w.repel * repel.data();
  return f;
}

VelocityTerms velocity_terms(const LevelSetField& self, const LevelSetField* other, const Drive& drive,
                             const EvolutionConfig& cfg) {
  const EnhancedField& enh = drive.enhancement->field;
  const OrientationField& orient = drive.enhancement->orientation;
  require_drive_shape(self, enh, orient);
  const ScalarVolume& phi = self.phi;
  const EvolutionWeights& w = cfg.weights;
  const ScalarVolume zero(phi.dims(), phi.spacing(), 0.0);
  VelocityTerms t{zero, zero, zero, zero};

  if (w.reg != 0.0) t.reg = curvature(phi);
  if (w.evolve != 0.0) {
    const Normals n = normals(phi);
#pragma omp parallel for schedule(static)
    for (Eigen::Index i = 0; i < phi.size(); ++i) t.evolve[i] = directional_drive(n, enh, orient, i);
  }
  if (w.attr != 0.0) {
    Attraction a = attraction(self, drive.attraction_potential, cfg);
    t.attr = std::move(a.velocity);
    t.bridges = a.bridges;
  }
  if (w.repel != 0.0 && other != nullptr) {
    require_same_shape(phi, other->phi, "repel");
    for (Eigen::Index i = 0; i < phi.size(); ++i)
      if (phi[i] > 0.0 && other->phi[i] > 0.0) t.repel[i] = -heaviside(other->phi[i], other->epsilon);
  }
  return t;
}

FieldUpdate update_field(const LevelSetField& self, const LevelSetField* other, const Drive& drive,
                         const EvolutionConfig& cfg) {
  const VelocityTerms terms = velocity_terms(self, other, drive, cfg);
  const ScalarVolume f = terms.total(cfg.weights);
  const double fmax = f.data().abs().maxCoeff();
  const double scale = cfg.normalize_velocity && fmax > 0.0 ? 1.0 / fmax : 1.0;
  // Gate by H' relative to its peak so a unit-speed front moves dt voxels per iteration.
  const double gate_norm = std::numbers::pi * self.epsilon;
  const double tau = cfg.dt * scale * gate_norm * self.phi.spacing().minCoeff();

  FieldUpdate up;
  up.field = self;
  up.bridges = terms.bridges;
  up.max_displacement = cfg.dt * scale * fmax;
  const double band = band_width(self);
  ScalarVolume& phi = up.field.phi;
  for (Eigen::Index i = 0; i < phi.size(); ++i) {
    const double old = self.phi[i];
    const bool in_band = std::abs(old) <= band;
    if (in_band) ++up.band_voxels;
    if (f[i] == 0.0) continue;
    phi[i] = old + tau * dirac(old, self.epsilon) * f[i];
    if ((old > 0.0) != (phi[i] > 0.0)) ++up.sign_changes;
  }
  return up;
}

CoupledState initial_state(LevelSetField processes, LevelSetField soma, const Drive& tube, const Drive& blob,
                           const EvolutionConfig& cfg) {
  cfg.validate();
  require_same_shape(processes.phi, soma.phi, "initial_state");
  CoupledState s;
  s.processes = std::move(processes);
  s.soma = std::move(soma);
  s.initial_processes_energy = field_energy(s.processes, s.soma, tube, cfg);
  s.initial_soma_energy = field_energy(s.soma, s.processes, blob, cfg);
  s.initial_overlap = overlap_count(s.processes, s.soma);
  return s;
}

CoupledState step(const CoupledState& state, const Drive& tube, const Drive& blob, const EvolutionConfig& cfg) {
  FieldUpdate p = update_field(state.processes, &state.soma, tube, cfg);
  FieldUpdate s = update_field(state.soma, &state.processes, blob, cfg);

  CoupledState next = state;
  next.iteration = state.iteration + 1;
  next.processes = std::move(p.field);
  next.soma = std::move(s.field);
  for (const FieldUpdate* u : {&p, &s})
    if (u->max_displacement > 0.49) {
      std::ostringstream msg;
      msg << "iteration " << next.iteration << ": CFL bound exceeded (dt*max|F| = " << u->max_displacement << ")";
      next.warnings.push_back(msg.str());
    }
  if (cfg.reinit_every > 0 && next.iteration % cfg.reinit_every == 0) {
    next.processes.phi = reinitialize(next.processes.phi);
    next.soma.phi = reinitialize(next.soma.phi);
  }

  auto fraction = [](const FieldUpdate& u) {
    return static_cast<double>(u.sign_changes) / static_cast<double>(std::max<std::int64_t>(1, u.band_voxels));
  };
  next.interface_change.push_back(std::max(fraction(p), fraction(s)));
  // Single steps are sub-voxel right after seeding, so judge a trailing window.
  const auto w = static_cast<std::size_t>(cfg.convergence_window);
  if (next.interface_change.size() >= w) {
    double mean = 0.0;
    for (std::size_t k = next.interface_change.size() - w; k < next.interface_change.size(); ++k)
      mean += next.interface_change[k];
    // An open bridge is still pulling fragments together even when nothing flips sign.
    next.converged = mean / static_cast<double>(w) < cfg.convergence_tol && p.bridges == 0 && s.bridges == 0;
  }
  next.processes_energy.push_back(field_energy(next.processes, next.soma, tube, cfg));
  next.soma_energy.push_back(field_energy(next.soma, next.processes, blob, cfg));
  next.overlap.push_back(overlap_count(next.processes, next.soma));
  return next;
}

CoupledState step(const CoupledState& state, const Enhancement& tube, const Enhancement& blob,
                  const EvolutionConfig& cfg) {
  return step(state, make_drive(tube, cfg), make_drive(blob, cfg), cfg);
}

CoupledState run(CoupledState state, const Drive& tube, const Drive& blob, const EvolutionConfig& cfg) {
  cfg.validate();
  while (state.iteration < cfg.max_iters) {
    state = step(state, tube, blob, cfg);
    if (state.converged) break;
  }
  return state;
}

}  // namespace gliaseg
