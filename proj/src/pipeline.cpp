#include "gliaseg/pipeline.hpp"

namespace gliaseg {

void SegmentationParams::validate() const {
  if (tube_scales.empty() || blob_scales.empty()) throw ParameterError("scale lists must be non-empty");
  for (double s : tube_scales)
    if (!(s > 0.0)) throw ParameterError("tube scales must be positive");
  for (double s : blob_scales)
    if (!(s > 0.0)) throw ParameterError("blob scales must be positive");
  if (!(epsilon > 0.0)) throw ParameterError("epsilon must be positive");
  evolution.validate();
}

void assign_masks(SegmentationResult& r) {
  r.soma = positive_mask(r.state.soma.phi);
  r.processes = mask_and_not(positive_mask(r.state.processes.phi), r.soma);
  r.cell = mask_or(r.processes, r.soma);
}

SegmentationResult evolve(const ScalarVolume& volume, const SegmentationParams& params) {
  params.validate();
  if (volume.empty()) throw ShapeError("evolve: empty volume");
  require_finite(volume, "evolve");
  const ScalarVolume input = params.invert_polarity ? volume.with_data(-volume.data()) : volume;

  const Enhancement tube = enhance(input, StructureKind::tube, params.tube_scales, params.frangi, params.blob,
                                   params.cross_section_weight);
  const Enhancement blob = enhance(input, StructureKind::blob, params.blob_scales, params.frangi, params.blob,
                                   params.cross_section_weight);

  SeedPair seeds = initialize_pair(tube.field, blob.field, params.epsilon);
  SegmentationResult result;
  result.processes_threshold = seeds.processes_threshold;
  result.soma_threshold = seeds.soma_threshold;
  result.processes_absent = seeds.processes_absent;
  result.soma_absent = seeds.soma_absent;
  result.warnings = seeds.warnings;

  const Drive tube_drive = make_drive(tube, params.evolution);
  const Drive blob_drive = make_drive(blob, params.evolution);
  CoupledState state = initial_state(std::move(seeds.processes), std::move(seeds.soma), tube_drive, blob_drive,
                                     params.evolution);
  result.state = run(std::move(state), tube_drive, blob_drive, params.evolution);
  result.warnings.insert(result.warnings.end(), result.state.warnings.begin(), result.state.warnings.end());
  assign_masks(result);
  return result;
}

}  // namespace gliaseg
