// gliaseg: segment, phantom, metrics and trace-plot subcommands.

#include <cerrno>
#include <cstdint>
#include <fstream>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>
#include <yaml-cpp/yaml.h>

#include "gliaseg/io.hpp"
#include "gliaseg/metrics.hpp"
#include "gliaseg/phantom.hpp"
#include "gliaseg/pipeline.hpp"

namespace fs = std::filesystem;
using namespace gliaseg;

namespace {

// YAML key/value document for --config. Keys are flag names without the
// leading dashes; sequences become multi-value inputs. Flags given on the
// command line win.
void apply_config(CLI::App* app, const std::string& path) {
  if (!fs::exists(path)) throw InputNotFoundError("config file not found: " + path);
  YAML::Node root;
  try {
    root = YAML::LoadFile(path);
  } catch (const YAML::Exception& e) {
    throw ConfigError(path + ": " + e.what());
  }
  if (root.IsNull()) return;
  if (!root.IsMap()) throw ConfigError(path + ": top level must be a mapping");
  for (const auto& kv : root) {
    const std::string key = kv.first.as<std::string>();
    if (key == "config") throw ConfigError(path + ": config files cannot nest");
    CLI::Option* opt = nullptr;
    try {
      opt = app->get_option("--" + key);
    } catch (const CLI::OptionNotFound&) {
      throw ConfigError(path + ": unknown key '" + key + "'");
    }
    if (opt->count() > 0) continue;
    std::vector<std::string> values;
    const YAML::Node& v = kv.second;
    if (v.IsScalar()) {
      values.push_back(v.as<std::string>());
    } else if (v.IsSequence()) {
      for (const auto& e : v) {
        if (!e.IsScalar()) throw ConfigError(path + ": nested value for '" + key + "'");
        values.push_back(e.as<std::string>());
      }
    } else {
      throw ConfigError(path + ": unsupported value for '" + key + "'");
    }
    if (opt->get_type_size() == 0) {
      // Flags take true/false.
      if (values.size() != 1) throw ConfigError(path + ": '" + key + "' takes a single true/false");
      errno = 0;
      const std::int64_t on = CLI::detail::to_flag_value(values[0]);
      if (errno != 0) throw ConfigError(path + ": '" + key + "' must be true or false");
      if (on <= 0) continue;
      values = {"true"};
    }
    try {
      opt->add_result(values);
      opt->run_callback();
    } catch (const CLI::ParseError& e) {
      throw ConfigError(path + ": " + key + ": " + e.what());
    }
  }
}

struct PhantomOptions {
  std::string variant = "cell";
  double snr = 5.0;
  bool ramp = false;
  std::uint64_t seed = 1;
};

PhantomSpec phantom_spec(const PhantomOptions& o) {
  PhantomSpec spec = PhantomSpec::microglia(o.ramp, o.snr, o.seed);
  if (o.variant == "sphere") {
    spec.tubes.clear();
  } else if (o.variant == "tube") {
    spec.soma.reset();
    spec.tubes = {TubeSpec{Eigen::Vector3d(12, 32, 16), Eigen::Vector3d::UnitX(), 40.0, 1.2}};
  } else if (o.variant != "cell") {
    throw ConfigError("unknown phantom variant '" + o.variant + "'");
  }
  spec.validate();
  return spec;
}

void add_phantom_options(CLI::App* app, PhantomOptions& o) {
  app->add_option("--variant", o.variant, "Phantom shape: cell, sphere or tube")->capture_default_str();
  app->add_option("--snr", o.snr, "Contrast over noise sigma; 0 disables noise")->capture_default_str();
  app->add_flag("--ramp", o.ramp, "Contrast ramp from 1.0 to 0.5 across x");
  app->add_option("--seed", o.seed, "Noise seed")->capture_default_str();
}

std::optional<Spacing> spacing_from(const std::vector<double>& s) {
  if (s.empty()) return std::nullopt;
  if (s.size() != 3) throw ConfigError("--spacing takes three values");
  const Spacing out(s[0], s[1], s[2]);
  if ((out <= 0.0).any() || !out.isFinite().all()) throw ConfigError("--spacing values must be positive");
  return out;
}

void write_csv_trace(const nlohmann::json& report, std::ostream& out) {
  if (!report.contains("energies") || !report["energies"].is_array())
    throw FormatError("report has no energies array");
  const char* terms[] = {"reg", "evolve", "attr", "repel", "total"};
  out << "iteration";
  for (const char* field : {"processes", "soma"})
    for (const char* t : terms) out << ',' << field << '_' << t;
  out << ",total,overlap,interface_change\n";

  auto row = [&](const nlohmann::json& e, long iteration, const nlohmann::json& overlap,
                 const nlohmann::json& change) {
    out << iteration;
    for (const char* field : {"processes", "soma"})
      for (const char* t : terms) out << ',' << e.at(field).at(t).get<double>();
    out << ',' << e.at("total").get<double>() << ',';
    if (!overlap.is_null()) out << overlap.get<long long>();
    out << ',';
    if (!change.is_null()) out << change.get<double>();
    out << '\n';
  };
  out.precision(17);
  if (report.contains("initial_energy"))
    row(report["initial_energy"], 0, report.value("initial_overlap", nlohmann::json()), nlohmann::json());
  const auto& energies = report["energies"];
  const nlohmann::json overlap = report.value("overlap", nlohmann::json::array());
  const nlohmann::json change = report.value("interface_change", nlohmann::json::array());
  for (std::size_t k = 0; k < energies.size(); ++k)
    row(energies[k], energies[k].value("iteration", static_cast<long>(k + 1)),
        k < overlap.size() ? overlap[k] : nlohmann::json(), k < change.size() ? change[k] : nlohmann::json());
}

int fail(const std::string& category, const std::string& message) {
  std::cerr << "error: " << category << ": " << message << '\n';
  return 1;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Coupled tube/blob level-set segmentation of 3D volumes"};
  app.require_subcommand(1);

  // segment
  SegmentationParams params;
  std::string input, output, ground_truth;
  std::vector<double> spacing;
  PhantomOptions seg_phantom;
  CLI::App* seg = app.add_subcommand("segment", "Segment a volume (the default phantom when --input is absent)");
  std::string config;
  seg->add_option("--config", config, "YAML file of flag values; flags given on the command line win");
  seg->add_option("--input", input, "TIFF stack or raw volume");
  seg->add_option("--output", output, "Output directory")->required();
  seg->add_option("--tube-scales", params.tube_scales, "Process scales (physical sigma)")
      ->delimiter(',')
      ->capture_default_str();
  seg->add_option("--blob-scales", params.blob_scales, "Soma scales (physical sigma)")
      ->delimiter(',')
      ->capture_default_str();
  seg->add_option("--w-reg", params.evolution.weights.reg, "Smoothness weight")->capture_default_str();
  seg->add_option("--w-evolve", params.evolution.weights.evolve, "Evolution weight")->capture_default_str();
  seg->add_option("--w-attr", params.evolution.weights.attr, "Attraction weight")->capture_default_str();
  seg->add_option("--w-repel", params.evolution.weights.repel, "Repulsion weight")->capture_default_str();
  seg->add_option("--dt", params.evolution.dt, "Voxels moved per iteration by the fastest front")
      ->capture_default_str();
  seg->add_option("--max-iters", params.evolution.max_iters, "Iteration budget")->capture_default_str();
  seg->add_option("--convergence-tol", params.evolution.convergence_tol, "Sign-change fraction to stop at")
      ->capture_default_str();
  seg->add_option("--reinit-every", params.evolution.reinit_every, "Iterations between reinitializations")
      ->capture_default_str();
  seg->add_option("--cross-section-weight", params.cross_section_weight, "Tube cross-section growth weight")
      ->capture_default_str();
  seg->add_option("--ground-truth", ground_truth, "Cell mask to score against");
  seg->add_flag("--invert-polarity", params.invert_polarity, "Segment dark structures on a bright background");
  seg->add_option("--spacing", spacing, "Voxel spacing override: sx,sy,sz")->delimiter(',')->expected(3);
  add_phantom_options(seg, seg_phantom);

  // phantom
  PhantomOptions ph_opts;
  std::string ph_output;
  CLI::App* ph = app.add_subcommand("phantom", "Write a synthetic cell and its ground truth");
  ph->add_option("--output", ph_output, "Output directory")->required();
  add_phantom_options(ph, ph_opts);

  // metrics
  std::string m_input, m_truth, m_output;
  std::vector<double> m_spacing;
  CLI::App* met = app.add_subcommand("metrics", "Score a mask against ground truth");
  met->add_option("--input", m_input, "Estimated mask")->required();
  met->add_option("--ground-truth", m_truth, "Ground-truth mask")->required();
  met->add_option("--output", m_output, "JSON report path (stdout when absent)");
  met->add_option("--spacing", m_spacing, "Voxel spacing override: sx,sy,sz")->delimiter(',')->expected(3);

  // trace-plot
  std::string t_input, t_output;
  CLI::App* tr = app.add_subcommand("trace-plot", "Per-iteration energy trace of a report as CSV");
  tr->add_option("--input", t_input, "report.json from segment")->required();
  tr->add_option("--output", t_output, "CSV path (stdout when absent)");

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e);
  } catch (const CLI::Success& e) {
    return app.exit(e);
  } catch (const CLI::FileError& e) {
    return fail("input-not-found", e.what());
  } catch (const CLI::ParseError& e) {
    return fail("config", e.what());
  }

  try {
    if (seg->parsed()) {
      if (!config.empty()) apply_config(seg, config);
      // Everything is checked before any volume is read or filtered.
      params.validate();
      const std::optional<Spacing> sp = spacing_from(spacing);
      std::optional<PhantomSpec> pspec;
      if (input.empty()) pspec = phantom_spec(seg_phantom);

      ScalarVolume volume;
      std::optional<BinaryMask> truth;
      if (pspec) {
        Phantom p = generate(*pspec);
        volume = std::move(p.volume);
        if (sp) volume.set_spacing(*sp);
        truth = p.cell();
      } else {
        volume = read_volume(input, sp);
      }
      if (!ground_truth.empty()) truth = read_mask(ground_truth, volume.spacing());
      if (truth && (truth->dims() != volume.dims()).any())
        throw ShapeError("ground truth dims do not match the volume");

      const SegmentationResult result = evolve(volume, params);
      std::optional<MetricsReport> metrics;
      if (truth) {
        BinaryMask t = *truth;
        t.set_spacing(volume.spacing());
        metrics = evaluate(t, result.cell);
      }
      write_result(result, metrics, output);
      std::cout << "iterations " << result.iterations() << (result.converged() ? " converged" : " not-converged")
                << " cell_voxels " << count(result.cell);
      if (metrics) std::cout << " dice " << metrics->dice << " dice_convex_hull " << metrics->dice_convex_hull;
      std::cout << '\n';
      for (const std::string& w : result.warnings) std::cerr << "warning: " << w << '\n';
    } else if (ph->parsed()) {
      const PhantomSpec spec = phantom_spec(ph_opts);
      const Phantom p = generate(spec);
      std::error_code ec;
      fs::create_directories(ph_output, ec);
      if (ec || !fs::is_directory(ph_output)) throw IoError("cannot create output directory " + ph_output);
      const fs::path dir(ph_output);
      write_raw(p.volume, dir / "volume.raw", ValueType::float32);
      write_mask(p.soma, dir / "soma_truth.tif");
      write_mask(p.processes, dir / "processes_truth.tif");
      write_mask(p.cell(), dir / "cell_truth.tif");
    } else if (met->parsed()) {
      const std::optional<Spacing> sp = spacing_from(m_spacing);
      const BinaryMask truth = read_mask(m_truth, sp);
      const BinaryMask estimate = read_mask(m_input, sp ? sp : std::optional<Spacing>(truth.spacing()));
      const nlohmann::json doc = to_json(evaluate(truth, estimate, fs::path(m_input).stem().string()));
      if (m_output.empty())
        std::cout << doc.dump(2) << '\n';
      else
        write_json(doc, m_output);
    } else if (tr->parsed()) {
      std::ifstream in(t_input);
      if (!in) throw InputNotFoundError("cannot open " + t_input);
      nlohmann::json report;
      try {
        report = nlohmann::json::parse(in);
      } catch (const nlohmann::json::exception& e) {
        throw FormatError(t_input + ": " + e.what());
      }
      if (t_output.empty()) {
        write_csv_trace(report, std::cout);
      } else {
        std::ofstream out(t_output);
        if (!out) throw IoError("cannot write " + t_output);
        write_csv_trace(report, out);
      }
    }
  } catch (const Error& e) {
    return fail(e.category(), e.what());
  } catch (const nlohmann::json::exception& e) {
    return fail("format", e.what());
  } catch (const std::exception& e) {
    return fail("internal", e.what());
  }
  return 0;
}
