#pragma once

// Volume and result persistence.
//
// Raw volume format (little-endian, x-fastest):
//   16 bytes   magic "GLIASEGRAWV001\0\0"
//   one line   UTF-8 JSON header terminated by '\n', e.g.
//              {"axis_order":"xyz","dims":[nx,ny,nz],"spacing":[sx,sy,sz],"type":"float32"}
//   payload    nx*ny*nz values of `type` (uint8, uint16, float32 or float64)
//
// A headerless raw file is also accepted when a sidecar "<file>.json" holds
// the same JSON object. TIFF stacks are read as one page per z slice
// (uncompressed, single-sample, 8/16-bit unsigned or 32-bit float). Integer
// data is rescaled to [0, 1] by the type maximum.

#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "gliaseg/mask.hpp"
#include "gliaseg/metrics.hpp"
#include "gliaseg/pipeline.hpp"

namespace gliaseg {

enum class ValueType { uint8, uint16, float32, float64 };

const char* to_string(ValueType t) noexcept;
ValueType parse_value_type(const std::string& s);

struct VolumeHeader {
  Dims dims = Dims::Ones();
  Spacing spacing = Spacing::Ones();
  ValueType type = ValueType::float32;
  std::string axis_order = "xyz";

  std::size_t bytes_per_value() const noexcept;
  std::size_t payload_bytes() const noexcept { return bytes_per_value() * static_cast<std::size_t>(dims.prod()); }
};

inline constexpr char kRawMagic[16] = {'G', 'L', 'I', 'A', 'S', 'E', 'G', 'R',
                                       'A', 'W', 'V', '0', '0', '1', '\0', '\0'};

/// TIFF (.tif/.tiff) or raw, chosen by content. `spacing` overrides the file's.
ScalarVolume read_volume(const std::filesystem::path& path, std::optional<Spacing> spacing = std::nullopt);

ScalarVolume read_tiff(const std::filesystem::path& path);
ScalarVolume read_raw(const std::filesystem::path& path);
VolumeHeader read_raw_header(const std::filesystem::path& path);

void write_raw(const ScalarVolume& v, const std::filesystem::path& path, ValueType type = ValueType::float32);

/// 8-bit TIFF stack, 0 / 255.
void write_mask(const BinaryMask& m, const std::filesystem::path& path);
/// Any supported volume; nonzero voxels become 1.
BinaryMask read_mask(const std::filesystem::path& path, std::optional<Spacing> spacing = std::nullopt);

nlohmann::json to_json(const MetricsReport& r);

/// Diagnostics document for a segmentation run; metric fields are null
/// without ground truth.
nlohmann::json report_json(const SegmentationResult& result, const std::optional<MetricsReport>& metrics);

/// Writes processes/soma/cell masks (TIFF), both level sets (raw float32)
/// and report.json into `dir`. Returns the files written.
std::vector<std::filesystem::path> write_result(const SegmentationResult& result,
                                                const std::optional<MetricsReport>& metrics,
                                                const std::filesystem::path& dir);

/// Serializes JSON exactly as the writers do (two-space indent, trailing newline).
void write_json(const nlohmann::json& doc, const std::filesystem::path& path);

}  // namespace gliaseg
