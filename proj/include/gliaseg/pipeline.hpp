#pragma once

// End-to-end segmentation: enhancement -> seeding -> coupled evolution -> masks.

#include <string>
#include <vector>

#include "gliaseg/features.hpp"
#include "gliaseg/init.hpp"
#include "gliaseg/levelset.hpp"

namespace gliaseg {

struct SegmentationParams {
  std::vector<double> tube_scales{0.5, 0.75, 1.0};
  std::vector<double> blob_scales{4.0, 5.0, 6.0, 7.0};
  FrangiParams frangi;
  BlobParams blob;
  double cross_section_weight = 0.5;
  bool invert_polarity = false;  // segment dark structures on a bright background
  double epsilon = 1.5;
  EvolutionConfig evolution;

  void validate() const;
};

struct SegmentationResult {
  BinaryMask processes;  // phi_processes > 0 and not claimed by the soma
  BinaryMask soma;       // phi_soma > 0
  BinaryMask cell;       // union
  CoupledState state;
  double processes_threshold = 0.0;
  double soma_threshold = 0.0;
  bool processes_absent = false;
  bool soma_absent = false;
  std::vector<std::string> warnings;

  int iterations() const noexcept { return state.iteration; }
  bool converged() const noexcept { return state.converged; }
};

/// Final masks from a coupled state; voxels claimed by both fields go to the soma.
void assign_masks(SegmentationResult& result);

SegmentationResult evolve(const ScalarVolume& volume, const SegmentationParams& params = {});

}  // namespace gliaseg
