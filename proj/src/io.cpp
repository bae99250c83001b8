#include "gliaseg/io.hpp"

#include <algorithm>
#include <bit>
#include <cstring>
#include <fstream>
#include <map>
#include <sstream>

namespace gliaseg {

namespace fs = std::filesystem;
using nlohmann::json;

const char* to_string(ValueType t) noexcept {
  switch (t) {
    case ValueType::uint8: return "uint8";
    case ValueType::uint16: return "uint16";
    case ValueType::float32: return "float32";
    case ValueType::float64: return "float64";
  }
  return "float32";
}

ValueType parse_value_type(const std::string& s) {
  if (s == "uint8") return ValueType::uint8;
  if (s == "uint16") return ValueType::uint16;
  if (s == "float32") return ValueType::float32;
  if (s == "float64") return ValueType::float64;
  throw FormatError("unsupported value type '" + s + "'");
}

std::size_t VolumeHeader::bytes_per_value() const noexcept {
  switch (type) {
    case ValueType::uint8: return 1;
    case ValueType::uint16: return 2;
    case ValueType::float32: return 4;
    case ValueType::float64: return 8;
  }
  return 4;
}

namespace {

static_assert(std::endian::native == std::endian::little, "raw and TIFF writers assume a little-endian host");

std::string read_file(const fs::path& path) {
  if (!fs::exists(path)) throw InputNotFoundError("no such file: " + path.string());
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open " + path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

template <typename T>
T load_le(const char* p) {
  T v;
  std::memcpy(&v, p, sizeof(T));
  return v;
}

double decode(const char* p, ValueType t) {
  switch (t) {
    case ValueType::uint8: return static_cast<std::uint8_t>(*p) / 255.0;
    case ValueType::uint16: return load_le<std::uint16_t>(p) / 65535.0;
    case ValueType::float32: return load_le<float>(p);
    case ValueType::float64: return load_le<double>(p);
  }
  return 0.0;
}

VolumeHeader header_from_json(const json& j, const std::string& where) {
  try {
    VolumeHeader h;
    const auto dims = j.at("dims").get<std::vector<int>>();
    if (dims.size() != 3) throw FormatError(where + ": dims must have 3 entries");
    h.dims = Dims(dims[0], dims[1], dims[2]);
    if (j.contains("spacing")) {
      const auto sp = j.at("spacing").get<std::vector<double>>();
      if (sp.size() != 3) throw FormatError(where + ": spacing must have 3 entries");
      h.spacing = Spacing(sp[0], sp[1], sp[2]);
    }
    h.type = parse_value_type(j.at("type").get<std::string>());
    h.axis_order = j.value("axis_order", std::string("xyz"));
    if (h.axis_order != "xyz") throw FormatError(where + ": unsupported axis_order '" + h.axis_order + "'");
    if (j.value("byte_order", std::string("little")) != "little")
      throw FormatError(where + ": unsupported byte_order (only little-endian)");
    if ((h.dims < 1).any()) throw FormatError(where + ": dims must be positive");
    if ((h.spacing <= 0.0).any()) throw FormatError(where + ": spacing must be positive");
    return h;
  } catch (const json::exception& e) {
    throw FormatError(where + ": malformed header: " + e.what());
  }
}

json header_to_json(const VolumeHeader& h) {
  return json{{"axis_order", h.axis_order},
              {"dims", {h.dims[0], h.dims[1], h.dims[2]}},
              {"spacing", {h.spacing[0], h.spacing[1], h.spacing[2]}},
              {"type", to_string(h.type)}};
}

struct RawView {
  VolumeHeader header;
  std::size_t payload_offset = 0;
};

RawView parse_raw(const std::string& bytes, const fs::path& path) {
  RawView v;
  if (bytes.size() >= sizeof(kRawMagic) && std::memcmp(bytes.data(), kRawMagic, sizeof(kRawMagic)) == 0) {
    const std::size_t eol = bytes.find('\n', sizeof(kRawMagic));
    if (eol == std::string::npos) throw FormatError(path.string() + ": raw header line not terminated");
    json j;
    try {
      j = json::parse(bytes.substr(sizeof(kRawMagic), eol - sizeof(kRawMagic)));
    } catch (const json::exception& e) {
      throw FormatError(path.string() + ": raw header is not JSON: " + e.what());
    }
    v.header = header_from_json(j, path.string());
    v.payload_offset = eol + 1;
  } else {
    fs::path sidecar = path;
    sidecar += ".json";
    if (!fs::exists(sidecar)) {
      sidecar = path;
      sidecar.replace_extension(".json");
    }
    if (!fs::exists(sidecar))
      throw FormatError(path.string() + ": no raw magic and no sidecar header (" + path.string() + ".json)");
    try {
      v.header = header_from_json(json::parse(read_file(sidecar)), sidecar.string());
    } catch (const json::parse_error& e) {
      throw FormatError(sidecar.string() + ": sidecar is not JSON: " + e.what());
    }
  }
  const std::size_t need = v.header.payload_bytes();
  const std::size_t have = bytes.size() - v.payload_offset;
  if (have != need) {
    std::ostringstream msg;
    msg << path.string() << ": payload is " << have << " bytes, header requires " << need;
    throw PayloadLengthError(msg.str());
  }
  return v;
}

// --- TIFF -------------------------------------------------------------------

struct TiffReader {
  const std::string& b;
  bool big_endian = false;
  std::string name;

  void need(std::size_t off, std::size_t len) const {
    if (off + len > b.size()) throw PayloadLengthError(name + ": truncated TIFF");
  }
  std::uint64_t u16(std::size_t off) const {
    need(off, 2);
    const auto* p = reinterpret_cast<const unsigned char*>(b.data() + off);
    return big_endian ? (p[0] << 8 | p[1]) : (p[1] << 8 | p[0]);
  }
  std::uint64_t u32(std::size_t off) const {
    need(off, 4);
    const auto* p = reinterpret_cast<const unsigned char*>(b.data() + off);
    return big_endian ? (std::uint64_t(p[0]) << 24 | p[1] << 16 | p[2] << 8 | p[3])
                      : (std::uint64_t(p[3]) << 24 | p[2] << 16 | p[1] << 8 | p[0]);
  }
};

struct TiffEntry {
  std::uint64_t type = 0, count = 0, value_offset = 0;
};

std::vector<std::uint64_t> tiff_values(const TiffReader& r, const TiffEntry& e) {
  const std::size_t size = e.type == 3 ? 2 : 4;
  if (e.type != 3 && e.type != 4) throw FormatError(r.name + ": unsupported TIFF field type " + std::to_string(e.type));
  std::vector<std::uint64_t> out(e.count);
  const std::size_t base = e.count * size <= 4 ? 0 : r.u32(e.value_offset);
  for (std::uint64_t i = 0; i < e.count; ++i) {
    const std::size_t off = (e.count * size <= 4 ? e.value_offset : base) + i * size;
    out[i] = size == 2 ? r.u16(off) : r.u32(off);
  }
  return out;
}

}  // namespace

ScalarVolume read_tiff(const fs::path& path) {
  const std::string bytes = read_file(path);
  TiffReader r{bytes, false, path.string()};
  r.need(0, 8);
  if (bytes.compare(0, 2, "II") == 0) r.big_endian = false;
  else if (bytes.compare(0, 2, "MM") == 0) r.big_endian = true;
  else throw FormatError(path.string() + ": not a TIFF file");
  if (r.u16(2) != 42) throw FormatError(path.string() + ": unsupported TIFF variant (not classic TIFF)");

  std::vector<double> values;
  int width = 0, height = 0, pages = 0;
  for (std::uint64_t ifd = r.u32(4); ifd != 0; ifd = r.u32(ifd + 2 + 12 * r.u16(ifd))) {
    std::map<std::uint64_t, TiffEntry> tags;
    const std::uint64_t n = r.u16(ifd);
    for (std::uint64_t k = 0; k < n; ++k) {
      const std::size_t e = ifd + 2 + 12 * k;
      tags[r.u16(e)] = TiffEntry{r.u16(e + 2), r.u32(e + 4), e + 8};
    }
    auto scalar = [&](std::uint64_t tag, std::uint64_t fallback) {
      const auto it = tags.find(tag);
      return it == tags.end() ? fallback : tiff_values(r, it->second).at(0);
    };
    const int w = static_cast<int>(scalar(256, 0)), h = static_cast<int>(scalar(257, 0));
    const std::uint64_t spp = scalar(277, 1);
    const std::uint64_t photometric = scalar(262, 1);
    if (spp != 1 || photometric == 2)
      throw FormatError(path.string() + ": page " + std::to_string(pages) + " has " + std::to_string(spp) +
                        " samples per pixel (photometric " + std::to_string(photometric) +
                        "); only single-channel grayscale is supported");
    if (scalar(259, 1) != 1) throw FormatError(path.string() + ": compressed TIFF is not supported");
    const std::uint64_t bits = scalar(258, 1);
    const std::uint64_t format = scalar(339, 1);
    ValueType type;
    if (bits == 8 && format == 1) type = ValueType::uint8;
    else if (bits == 16 && format == 1) type = ValueType::uint16;
    else if (bits == 32 && format == 3) type = ValueType::float32;
    else
      throw FormatError(path.string() + ": unsupported bit depth " + std::to_string(bits) + " (sample format " +
                        std::to_string(format) + ")");
    if (w <= 0 || h <= 0) throw FormatError(path.string() + ": missing image dimensions");
    if (pages == 0) {
      width = w;
      height = h;
    } else if (w != width || h != height) {
      throw FormatError(path.string() + ": pages differ in size");
    }
    if (!tags.count(273) || !tags.count(279)) throw FormatError(path.string() + ": missing strip layout");
    const auto offsets = tiff_values(r, tags[273]);
    const auto lengths = tiff_values(r, tags[279]);
    if (offsets.size() != lengths.size()) throw FormatError(path.string() + ": inconsistent strip tables");
    const std::size_t bpv = type == ValueType::uint8 ? 1 : (type == ValueType::uint16 ? 2 : 4);
    std::string page;
    for (std::size_t s = 0; s < offsets.size(); ++s) {
      r.need(offsets[s], lengths[s]);
      page.append(bytes, offsets[s], lengths[s]);
    }
    const std::size_t need = bpv * static_cast<std::size_t>(w) * h;
    if (page.size() < need) throw PayloadLengthError(path.string() + ": page " + std::to_string(pages) + " truncated");
    for (std::size_t i = 0; i < static_cast<std::size_t>(w) * h; ++i) {
      const char* p = page.data() + i * bpv;
      if (r.big_endian && bpv > 1) {
        char tmp[4];
        std::reverse_copy(p, p + bpv, tmp);
        values.push_back(decode(tmp, type));
      } else {
        values.push_back(decode(p, type));
      }
    }
    ++pages;
    if (pages > 1'000'000) throw FormatError(path.string() + ": IFD chain does not terminate");
  }
  if (pages == 0) throw FormatError(path.string() + ": TIFF has no pages");
  ScalarVolume v(Dims(width, height, pages), Spacing::Ones());
  for (Eigen::Index i = 0; i < v.size(); ++i) v[i] = values[i];
  return v;
}

VolumeHeader read_raw_header(const fs::path& path) { return parse_raw(read_file(path), path).header; }

ScalarVolume read_raw(const fs::path& path) {
  const std::string bytes = read_file(path);
  const RawView view = parse_raw(bytes, path);
  ScalarVolume v(view.header.dims, view.header.spacing);
  const std::size_t bpv = view.header.bytes_per_value();
  for (Eigen::Index i = 0; i < v.size(); ++i) v[i] = decode(bytes.data() + view.payload_offset + i * bpv, view.header.type);
  return v;
}

ScalarVolume read_volume(const fs::path& path, std::optional<Spacing> spacing) {
  const std::string head = [&] {
    if (!fs::exists(path)) throw InputNotFoundError("no such file: " + path.string());
    std::ifstream in(path, std::ios::binary);
    char buf[4] = {};
    in.read(buf, 4);
    return std::string(buf, static_cast<std::size_t>(in.gcount()));
  }();
  ScalarVolume v = (head.rfind("II", 0) == 0 || head.rfind("MM", 0) == 0) ? read_tiff(path) : read_raw(path);
  require_finite(v, "read_volume");
  if (spacing) v.set_spacing(*spacing);
  return v;
}

void write_raw(const ScalarVolume& v, const fs::path& path, ValueType type) {
  VolumeHeader h;
  h.dims = v.dims();
  h.spacing = v.spacing();
  h.type = type;
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot write " + path.string());
  out.write(kRawMagic, sizeof(kRawMagic));
  const std::string line = header_to_json(h).dump() + "\n";
  out.write(line.data(), static_cast<std::streamsize>(line.size()));
  for (Eigen::Index i = 0; i < v.size(); ++i) {
    switch (type) {
      case ValueType::uint8: {
        const auto q = static_cast<std::uint8_t>(std::lround(std::clamp(v[i], 0.0, 1.0) * 255.0));
        out.put(static_cast<char>(q));
        break;
      }
      case ValueType::uint16: {
        const auto q = static_cast<std::uint16_t>(std::lround(std::clamp(v[i], 0.0, 1.0) * 65535.0));
        out.write(reinterpret_cast<const char*>(&q), 2);
        break;
      }
      case ValueType::float32: {
        const float f = static_cast<float>(v[i]);
        out.write(reinterpret_cast<const char*>(&f), 4);
        break;
      }
      case ValueType::float64: out.write(reinterpret_cast<const char*>(&v[i]), 8); break;
    }
  }
  if (!out) throw IoError("failed writing " + path.string());
}

void write_mask(const BinaryMask& m, const fs::path& path) {
  const int w = m.dims()[0], h = m.dims()[1], pages = m.dims()[2];
  std::string buf;
  auto put16 = [&](std::uint16_t x) { buf.append(reinterpret_cast<const char*>(&x), 2); };
  auto put32 = [&](std::uint32_t x) { buf.append(reinterpret_cast<const char*>(&x), 4); };
  const std::string description = "ImageJ=1.11a\nimages=" + std::to_string(pages) + "\nslices=" +
                                  std::to_string(pages) + "\n";
  buf.append("II");
  put16(42);
  put32(8);
  const std::size_t plane = static_cast<std::size_t>(w) * h;
  constexpr int kEntries = 11;
  const std::size_t ifd_size = 2 + 12 * kEntries + 4;
  for (int z = 0; z < pages; ++z) {
    const std::size_t ifd = buf.size();
    const std::size_t desc_off = ifd + ifd_size;
    const std::size_t data_off = desc_off + description.size() + 1;
    const std::size_t next = z + 1 < pages ? data_off + plane : 0;
    put16(kEntries);
    auto entry = [&](std::uint16_t tag, std::uint16_t type, std::uint32_t count, std::uint32_t value) {
      put16(tag);
      put16(type);
      put32(count);
      if (type == 3 && count == 1) {
        put16(static_cast<std::uint16_t>(value));
        put16(0);
      } else {
        put32(value);
      }
    };
    entry(254, 4, 1, 0);                                                   // NewSubfileType
    entry(256, 4, 1, static_cast<std::uint32_t>(w));                       // ImageWidth
    entry(257, 4, 1, static_cast<std::uint32_t>(h));                       // ImageLength
    entry(258, 3, 1, 8);                                                   // BitsPerSample
    entry(259, 3, 1, 1);                                                   // Compression: none
    entry(262, 3, 1, 1);                                                   // BlackIsZero
    entry(270, 2, static_cast<std::uint32_t>(description.size() + 1),
          static_cast<std::uint32_t>(desc_off));                           // ImageDescription
    entry(273, 4, 1, static_cast<std::uint32_t>(data_off));                // StripOffsets
    entry(277, 3, 1, 1);                                                   // SamplesPerPixel
    entry(278, 4, 1, static_cast<std::uint32_t>(h));                       // RowsPerStrip
    entry(279, 4, 1, static_cast<std::uint32_t>(plane));                   // StripByteCounts
    put32(static_cast<std::uint32_t>(next));
    buf.append(description);
    buf.push_back('\0');
    for (int y = 0; y < h; ++y)
      for (int x = 0; x < w; ++x) buf.push_back(m(x, y, z) ? static_cast<char>(255) : 0);
  }
  if (buf.size() > 0xFFFFFFFFull) throw IoError("mask too large for classic TIFF: " + path.string());
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot write " + path.string());
  out.write(buf.data(), static_cast<std::streamsize>(buf.size()));
  if (!out) throw IoError("failed writing " + path.string());
}

BinaryMask read_mask(const fs::path& path, std::optional<Spacing> spacing) {
  const ScalarVolume v = read_volume(path, spacing);
  return BinaryMask(v.dims(), v.spacing(), (v.data() != 0.0).cast<std::uint8_t>());
}

json to_json(const MetricsReport& r) {
  return json{{"cell_id", r.cell_id},
              {"dice", r.dice},
              {"dice_convex_hull", r.dice_convex_hull},
              {"dice_vacuous", r.dice_vacuous},
              {"ramification_index", r.ramification_index},
              {"ramification_index_truth", r.ramification_index_truth},
              {"volume_voxels", r.volume_voxels},
              {"surface_area", r.surface_area}};
}

namespace {
json energy_json(const FieldEnergy& e) {
  return json{{"reg", e.reg}, {"evolve", e.evolve}, {"attr", e.attr}, {"repel", e.repel}, {"total", e.total()}};
}
}  // namespace

json report_json(const SegmentationResult& res, const std::optional<MetricsReport>& metrics) {
  const CoupledState& s = res.state;
  json energies = json::array();
  for (std::size_t k = 0; k < s.processes_energy.size(); ++k)
    energies.push_back({{"iteration", k + 1},
                        {"processes", energy_json(s.processes_energy[k])},
                        {"soma", energy_json(s.soma_energy[k])},
                        {"total", s.total_energy(k)}});
  json doc;
  doc["dice"] = metrics ? json(metrics->dice) : json(nullptr);
  doc["dice_convex_hull"] = metrics ? json(metrics->dice_convex_hull) : json(nullptr);
  doc["ramification_index"] = count(res.cell) > 0 ? json(ramification_index(res.cell)) : json(nullptr);
  doc["ramification_index_truth"] =
      metrics && metrics->ramification_index_truth > 0.0 ? json(metrics->ramification_index_truth) : json(nullptr);
  doc["iterations"] = s.iteration;
  doc["converged"] = s.converged;
  doc["initial_energy"] = {{"processes", energy_json(s.initial_processes_energy)},
                           {"soma", energy_json(s.initial_soma_energy)},
                           {"total", s.initial_total_energy()}};
  doc["energies"] = std::move(energies);
  doc["initial_overlap"] = s.initial_overlap;
  doc["overlap"] = s.overlap;
  doc["interface_change"] = s.interface_change;
  doc["soma_absent"] = res.soma_absent;
  doc["processes_absent"] = res.processes_absent;
  doc["thresholds"] = {{"processes", res.processes_threshold}, {"soma", res.soma_threshold}};
  doc["volume_voxels"] = {{"processes", count(res.processes)}, {"soma", count(res.soma)}, {"cell", count(res.cell)}};
  doc["warnings"] = res.warnings;
  return doc;
}

void write_json(const json& doc, const fs::path& path) {
  std::ofstream out(path);
  if (!out) throw IoError("cannot write " + path.string());
  out << doc.dump(2) << '\n';
  if (!out) throw IoError("failed writing " + path.string());
}

std::vector<fs::path> write_result(const SegmentationResult& res, const std::optional<MetricsReport>& metrics,
                                   const fs::path& dir) {
  std::error_code ec;
  fs::create_directories(dir, ec);
  if (ec || !fs::is_directory(dir)) throw IoError("cannot create output directory " + dir.string());
  std::vector<fs::path> files{dir / "processes_mask.tif", dir / "soma_mask.tif", dir / "cell_mask.tif",
                              dir / "phi_processes.raw", dir / "phi_soma.raw", dir / "report.json"};
  write_mask(res.processes, files[0]);
  write_mask(res.soma, files[1]);
  write_mask(res.cell, files[2]);
  write_raw(res.state.processes.phi, files[3], ValueType::float32);
  write_raw(res.state.soma.phi, files[4], ValueType::float32);
  write_json(report_json(res, metrics), files[5]);
  return files;
}

}  // namespace gliaseg
