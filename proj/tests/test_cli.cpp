#include <doctest.h>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>

#include <sys/wait.h>
#include <unistd.h>

#include <json.hpp>

namespace fs = std::filesystem;

namespace {

struct Run {
  int status = -1;
  std::string out, err;
};

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  return std::string(std::istreambuf_iterator<char>(in), {});
}

struct Sandbox {
  fs::path dir;
  Sandbox() {
    static int counter = 0;
    dir = fs::temp_directory_path() / ("gliaseg_cli_" + std::to_string(::getpid()) + "_" + std::to_string(counter++));
    fs::create_directories(dir);
  }
  ~Sandbox() { fs::remove_all(dir); }

  Run run(const std::string& args) const {
    const fs::path out = dir / "stdout.txt", err = dir / "stderr.txt";
    const std::string cmd = std::string("\"") + GLIASEG_CLI_PATH + "\" " + args + " >\"" + out.string() + "\" 2>\"" +
                            err.string() + "\"";
    const int raw = std::system(cmd.c_str());
    Run r;
    r.status = WIFEXITED(raw) ? WEXITSTATUS(raw) : -1;
    r.out = slurp(out);
    r.err = slurp(err);
    return r;
  }
  std::string path(const std::string& name) const { return "\"" + (dir / name).string() + "\""; }
};

double field_after(const std::string& text, const std::string& key) {
  std::istringstream in(text);
  std::string word;
  while (in >> word)
    if (word == key) {
      double v;
      in >> v;
      return v;
    }
  return -1.0;
}

}  // namespace

TEST_CASE("segmenting the noise-free phantom reaches the Dice target") {
  Sandbox box;
  const Run r = box.run("segment --snr 0 --output " + box.path("out"));
  REQUIRE(r.status == 0);
  CHECK(field_after(r.out, "dice") >= 0.80);
  CHECK(fs::exists(box.dir / "out" / "cell_mask.tif"));
  const auto doc = nlohmann::json::parse(slurp(box.dir / "out" / "report.json"));
  CHECK(doc["dice"].get<double>() >= 0.80);
}

TEST_CASE("a missing input is reported by category") {
  Sandbox box;
  const Run r = box.run("segment --input " + box.path("nope.tif") + " --output " + box.path("out"));
  CHECK(r.status != 0);
  CHECK(r.err.find("input-not-found") != std::string::npos);
  const Run m = box.run("metrics --input " + box.path("a.tif") + " --ground-truth " + box.path("b.tif"));
  CHECK(m.status != 0);
  CHECK(m.err.find("input-not-found") != std::string::npos);
}

TEST_CASE("parameters are validated before any work") {
  Sandbox box;
  const Run r = box.run("segment --dt -1 --output " + box.path("out"));
  CHECK(r.status != 0);
  CHECK(r.err.find("parameter") != std::string::npos);
  CHECK(!fs::exists(box.dir / "out"));
  const Run s = box.run("segment --blob-scales 4,-1 --output " + box.path("out"));
  CHECK(s.status != 0);
  CHECK(!fs::exists(box.dir / "out"));
  const Run u = box.run("segment --bogus --output " + box.path("out"));
  CHECK(u.status != 0);
  CHECK(u.err.find("config") != std::string::npos);
}

TEST_CASE("phantom then metrics on identical masks") {
  Sandbox box;
  REQUIRE(box.run("phantom --snr 0 --output " + box.path("ph")).status == 0);
  for (const char* name : {"volume.raw", "soma_truth.tif", "processes_truth.tif", "cell_truth.tif"})
    CHECK(fs::exists(box.dir / "ph" / name));
  const Run m = box.run("metrics --input " + box.path("ph/cell_truth.tif") + " --ground-truth " +
                        box.path("ph/cell_truth.tif"));
  REQUIRE(m.status == 0);
  const auto doc = nlohmann::json::parse(m.out);
  CHECK(doc["dice"] == 1.0);
  CHECK(doc["dice_convex_hull"] == 1.0);

  const Run seg = box.run("segment --input " + box.path("ph/volume.raw") + " --ground-truth " +
                          box.path("ph/cell_truth.tif") + " --max-iters 3 --output " + box.path("seg"));
  REQUIRE(seg.status == 0);
  CHECK(field_after(seg.out, "iterations") == 3.0);
  CHECK(field_after(seg.out, "dice") >= 0.0);
}

TEST_CASE("repeated runs write identical bytes") {
  Sandbox box;
  for (const char* out : {"a", "b"})
    REQUIRE(box.run("segment --max-iters 5 --seed 4 --output " + box.path(out)).status == 0);
  for (const char* name : {"processes_mask.tif", "soma_mask.tif", "cell_mask.tif", "phi_processes.raw",
                           "phi_soma.raw", "report.json"})
    CHECK(slurp(box.dir / "a" / name) == slurp(box.dir / "b" / name));
}

TEST_CASE("trace-plot writes one row per iteration plus the start") {
  Sandbox box;
  REQUIRE(box.run("segment --max-iters 4 --output " + box.path("out")).status == 0);
  REQUIRE(box.run("trace-plot --input " + box.path("out/report.json") + " --output " + box.path("trace.csv")).status ==
          0);
  std::istringstream csv(slurp(box.dir / "trace.csv"));
  std::string line;
  std::getline(csv, line);
  CHECK(line.rfind("iteration,", 0) == 0);
  int rows = 0;
  while (std::getline(csv, line))
    if (!line.empty()) ++rows;
  CHECK(rows == 5);
}

TEST_CASE("a YAML config supplies defaults that flags override") {
  Sandbox box;
  std::ofstream(box.dir / "cfg.yaml") << "max-iters: 3\nsnr: 0\nw-repel: 2.0\n";
  const Run a = box.run("segment --config " + box.path("cfg.yaml") + " --output " + box.path("a"));
  REQUIRE(a.status == 0);
  CHECK(field_after(a.out, "iterations") == 3.0);
  const Run b = box.run("segment --config " + box.path("cfg.yaml") + " --max-iters 2 --output " + box.path("b"));
  REQUIRE(b.status == 0);
  CHECK(field_after(b.out, "iterations") == 2.0);

  std::ofstream(box.dir / "bad.yaml") << "no-such-key: 1\n";
  const Run c = box.run("segment --config " + box.path("bad.yaml") + " --output " + box.path("c"));
  CHECK(c.status != 0);
  CHECK(c.err.find("config") != std::string::npos);
  const Run d = box.run("segment --config " + box.path("absent.yaml") + " --output " + box.path("d"));
  CHECK(d.status != 0);
  CHECK(d.err.find("input-not-found") != std::string::npos);
}
