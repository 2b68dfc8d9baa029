#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>

#include "tpsmooth/rng.hpp"

namespace fs = std::filesystem;

namespace {

const char* cli_path() { return TPSMOOTH_CLI_PATH; }

int run_cli(const std::string& args) {
  const std::string cmd = std::string(cli_path()) + " " + args + " > /dev/null 2>&1";
  const int status = std::system(cmd.c_str());
  return WEXITSTATUS(status);
}

struct TempDir {
  fs::path path;
  explicit TempDir(const std::string& tag) {
    path = fs::temp_directory_path() / ("tpsmooth_cli_" + tag);
    fs::remove_all(path);
    fs::create_directories(path);
  }
  ~TempDir() { fs::remove_all(path); }
};

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::ostringstream os;
  os << in.rdbuf();
  return os.str();
}

void write_data(const fs::path& csv, long n, std::uint64_t seed) {
  tpsmooth::Rng rng(seed);
  std::ofstream out(csv);
  out << "time,lat,temp\n" << std::setprecision(12);
  for (long i = 0; i < n; ++i) {
    const double t = rng.uniform();
    const double lat = 30.0 + 15.0 * rng.uniform();
    out << t << ',' << lat << ','
        << std::sin(6.0 * t) + 0.05 * lat + 0.3 * rng.normal() << '\n';
  }
}

void write_config(const fs::path& conf, const fs::path& csv, const fs::path& out) {
  std::ofstream cfg(conf);
  cfg << "input = " << csv.string() << "\n"
      << "coords = time,lat\n"
      << "response = temp\n"
      << "basis_dims = 5,4\n"
      << "prior = weibull\n"
      << "iterations = 250\n"
      << "burn_in = 120\n"
      << "seed = 5\n"
      << "chains = 2\n"
      << "effects = time\n"
      << "output_dir = " << out.string() << "\n";
}

}  // namespace

TEST_CASE("fit / effects / diagnose / plotdata round trip through the binary") {
  TempDir dir("roundtrip");
  write_data(dir.path / "data.csv", 80, 7);
  write_config(dir.path / "fit.conf", dir.path / "data.csv", dir.path / "out");

  CHECK(run_cli("fit --config " + (dir.path / "fit.conf").string()) == 0);
  CHECK(fs::exists(dir.path / "out" / "manifest.json"));
  CHECK(fs::exists(dir.path / "out" / "effect_time.csv"));

  CHECK(run_cli("effects --fit " + (dir.path / "out").string() +
                " --request time:lat --grid 12") == 0);
  CHECK(fs::exists(dir.path / "out" / "effect_time_lat.csv"));

  CHECK(run_cli("diagnose --fit " + (dir.path / "out").string() + " --csv " +
                (dir.path / "diag.csv").string()) == 0);
  CHECK(fs::exists(dir.path / "diag.csv"));

  CHECK(run_cli("plotdata --fit " + (dir.path / "out").string() +
                " --trace sigma2 --slice lat=35 --effect lat --out " +
                (dir.path / "plots").string()) == 0);
  CHECK(fs::exists(dir.path / "plots" / "trace_sigma2.csv"));
  CHECK(fs::exists(dir.path / "plots" / "slice_0.csv"));
  CHECK(fs::exists(dir.path / "plots" / "effect_lat.csv"));
}

TEST_CASE("command line overrides rewrite config keys and keep determinism") {
  TempDir dir("override");
  write_data(dir.path / "data.csv", 60, 9);
  write_config(dir.path / "fit.conf", dir.path / "data.csv", dir.path / "a_out");

  const std::string base = "fit --config " + (dir.path / "fit.conf").string();
  CHECK(run_cli(base) == 0);
  CHECK(run_cli(base + " --output-dir " + (dir.path / "b_out").string()) == 0);
  CHECK(slurp(dir.path / "a_out" / "samples_b.bin") ==
        slurp(dir.path / "b_out" / "samples_b.bin"));

  // A different seed must change the samples.
  CHECK(run_cli(base + " --seed 99 --output-dir " +
                (dir.path / "c_out").string()) == 0);
  CHECK(slurp(dir.path / "a_out" / "samples_b.bin") !=
        slurp(dir.path / "c_out" / "samples_b.bin"));
}

TEST_CASE("exit codes distinguish validation failures") {
  TempDir dir("exitcodes");
  write_data(dir.path / "data.csv", 30, 11);
  write_config(dir.path / "fit.conf", dir.path / "data.csv", dir.path / "out");

  CHECK(run_cli("fit --config " + (dir.path / "missing.conf").string()) == 1);
  CHECK(run_cli("fit --config " + (dir.path / "fit.conf").string() +
                " --set basis_dims=3") == 1);
  CHECK(run_cli("fit --config " + (dir.path / "fit.conf").string() +
                " --effects nope") == 1);
  CHECK(run_cli("diagnose --fit " + (dir.path / "nowhere").string()) == 1);
}

TEST_CASE("simulate subcommand reports replicate metrics") {
  TempDir dir("simulate");
  CHECK(run_cli("simulate --function f1 --p 1 --n 200 --d 5 --replicates 1 "
                "--iterations 150 --burn-in 50 --prior weibull --seed 2 "
                "--output-dir " +
                (dir.path / "sim").string()) == 0);
  CHECK(fs::exists(dir.path / "sim" / "simulate_results.csv"));
  CHECK(fs::exists(dir.path / "sim" / "simulate_manifest.json"));
}
