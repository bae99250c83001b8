#pragma once

// Coupled two-phase level-set evolution.
//
// phi_processes follows the tubularity flow field and phi_soma the blob flow
// field. Both are positive inside their zero level set. Each field minimizes
//
//   E(phi) = E_reg + E_evolve + E_attr + E_repel
//
// by explicit gradient descent, and the repel term couples the two.

#include <cstdint>
#include <string>
#include <vector>

#include "gliaseg/features.hpp"
#include "gliaseg/mask.hpp"

namespace gliaseg {

struct LevelSetField {
  ScalarVolume phi;
  double epsilon = 1.5;  // width of the regularized Heaviside, voxels
  double band = 0.0;     // active half-width for diagnostics; 0 means the default of 3 voxels

  LevelSetField() = default;
  explicit LevelSetField(ScalarVolume p, double eps = 1.5) : phi(std::move(p)), epsilon(eps) {}
};

/// H(z) = 1/2 (1 + 2/pi atan(z / eps)).
double heaviside(double z, double epsilon);
/// dH/dz = eps / (pi (eps^2 + z^2)).
double dirac(double z, double epsilon);

struct EvolutionWeights {
  double reg = 0.05;
  double evolve = 1.0;
  double attr = 1.0;
  double repel = 1.0;
};

struct EvolutionConfig {
  EvolutionWeights weights;
  /// Per-iteration displacement, in voxels, of a front moving at unit speed.
  double dt = 0.4;
  int max_iters = 50;
  /// Evolution stops once, for both fields, the voxels changing sign per
  /// iteration (as a fraction of that field's band voxels, averaged over the
  /// last convergence_window iterations) drop below this and no attraction
  /// bridge is open.
  double convergence_tol = 1e-3;
  int convergence_window = 10;
  /// 0 disables reinitialization.
  int reinit_every = 10;
  /// Divide F by max|F|, so the fastest front moves exactly dt voxels.
  bool normalize_velocity = true;
  /// Largest gap, in voxels, the attraction term will bridge.
  double attraction_reach = 10.0;
  /// Smoothing applied to the response before it drives attraction.
  double attraction_sigma = 1.0;
  /// Bridges only run through voxels whose smoothed response exceeds this
  /// fraction of its maximum.
  double attraction_floor = 0.02;

  void validate() const;
};

/// Precomputed per-structure inputs for the evolution.
struct Drive {
  const Enhancement* enhancement = nullptr;
  ScalarVolume attraction_potential;  // G_sigma * response
};

Drive make_drive(const Enhancement& e, const EvolutionConfig& cfg);

struct FieldEnergy {
  double reg = 0.0;
  double evolve = 0.0;
  double attr = 0.0;
  double repel = 0.0;
  double total() const noexcept { return reg + evolve + attr + repel; }
};

struct CoupledState {
  LevelSetField processes;  // phi_1, tubularity-driven
  LevelSetField soma;       // phi_2, blob-driven
  int iteration = 0;
  FieldEnergy initial_processes_energy;
  FieldEnergy initial_soma_energy;
  std::vector<FieldEnergy> processes_energy;  // one entry per iteration
  std::vector<FieldEnergy> soma_energy;
  std::vector<std::int64_t> overlap;          // voxels with both phi > 0, per iteration
  /// Per iteration, the larger over both fields of sign changes / band voxels.
  std::vector<double> interface_change;
  std::int64_t initial_overlap = 0;
  bool converged = false;
  std::vector<std::string> warnings;

  double total_energy(std::size_t k) const { return processes_energy[k].total() + soma_energy[k].total(); }
  double initial_total_energy() const { return initial_processes_energy.total() + initial_soma_energy.total(); }
};

// Energies.
double energy_reg(const LevelSetField& phi, double weight);
double energy_evolve(const LevelSetField& phi, const EnhancedField& enh, const OrientationField& orient);
double energy_repel(const LevelSetField& a, const LevelSetField& b);

struct Attraction {
  double energy = 0.0;
  ScalarVolume velocity;  // >= 0, nonzero only on bridge voxels
  int components = 0;
  int bridges = 0;
};

/// Bridges each smaller component of {phi > 0} to a larger one along the
/// cheapest path through the smoothed response, at most `reach` voxels long.
/// Energy is the response still uncovered along those paths,
/// sum R (1 - H(phi)); the velocity raises phi along them.
Attraction attraction(const LevelSetField& phi, const ScalarVolume& potential, const EvolutionConfig& cfg);
double energy_attr(const LevelSetField& phi, const EnhancedField& enh, const EvolutionConfig& cfg = {});

/// Energy of one field given the other (for the repel term).
FieldEnergy field_energy(const LevelSetField& self, const LevelSetField& other, const Drive& drive,
                         const EvolutionConfig& cfg);

struct VelocityTerms {
  ScalarVolume reg, evolve, attr, repel;
  int bridges = 0;  // attraction paths in use
  ScalarVolume total(const EvolutionWeights& w) const;
};

/// Unweighted per-term speeds F for `self`; `other` may be null (no repulsion).
VelocityTerms velocity_terms(const LevelSetField& self, const LevelSetField* other, const Drive& drive,
                             const EvolutionConfig& cfg);

/// Mean curvature div(grad phi / |grad phi|), clamped to +-1/min(spacing).
ScalarVolume curvature(const ScalarVolume& phi);

struct FieldUpdate {
  LevelSetField field;
  std::int64_t sign_changes = 0;
  std::int64_t band_voxels = 0;
  int bridges = 0;
  double max_displacement = 0.0;  // dt * max|F_effective|
};

/// One gradient-descent update of a single field. The other field is read,
/// never written.
FieldUpdate update_field(const LevelSetField& self, const LevelSetField* other, const Drive& drive,
                         const EvolutionConfig& cfg);

CoupledState initial_state(LevelSetField processes, LevelSetField soma, const Drive& tube, const Drive& blob,
                           const EvolutionConfig& cfg);

/// Advances both fields by one iteration from the same previous iterate.
CoupledState step(const CoupledState& state, const Drive& tube, const Drive& blob, const EvolutionConfig& cfg);
CoupledState step(const CoupledState& state, const Enhancement& tube, const Enhancement& blob,
                  const EvolutionConfig& cfg);

/// Repeats step() until convergence or max_iters.
CoupledState run(CoupledState state, const Drive& tube, const Drive& blob, const EvolutionConfig& cfg);

std::int64_t overlap_count(const LevelSetField& a, const LevelSetField& b);

}  // namespace gliaseg
