#include <doctest.h>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <string>

namespace fs = std::filesystem;

namespace {

int run_cli(const std::string& args) {
  const std::string cmd =
      std::string(QSRLAB_CLI_PATH) + " " + args + " > /dev/null 2>&1";
  const int status = std::system(cmd.c_str());
  return WEXITSTATUS(status);
}

fs::path write_config(const std::string& name, const std::string& body) {
  const fs::path dir = fs::temp_directory_path() / "qsrlab_cli_tests";
  fs::create_directories(dir);
  const fs::path p = dir / name;
  std::ofstream out(p);
  out << body;
  return p;
}

}  // namespace

TEST_CASE("cli exit codes") {
  const fs::path out_dir = fs::temp_directory_path() / "qsrlab_cli_tests/out";

  SUBCASE("valid schedule config exits 0") {
    const auto cfg = write_config("ok.json", R"({
      "schedule": {"kind": "cosine", "eta_max": 0.1, "eta_end": 0.0,
                   "warmup_steps": 2, "total_steps": 50},
      "sync_rule": {"kind": "constant", "h_base": 4}
    })");
    CHECK(run_cli("schedule --config " + cfg.string() + " --out " +
                  out_dir.string()) == 0);
  }

  SUBCASE("config errors exit 2 and name the offending key") {
    const auto cfg = write_config("bad.json", R"({
      "schedule": {"kind": "cosine", "eta_end": 0.0, "total_steps": 50}
    })");
    CHECK(run_cli("schedule --config " + cfg.string() + " --out " +
                  out_dir.string()) == 2);
    // diagnostic names the key
    const std::string cmd = std::string(QSRLAB_CLI_PATH) +
                            " schedule --config " + cfg.string() + " --out " +
                            out_dir.string() + " 2>&1 | grep -q eta_max";
    CHECK(std::system(cmd.c_str()) == 0);
  }

  SUBCASE("invalid json exits 2") {
    const auto cfg = write_config("nonsense.json", "{ not json");
    CHECK(run_cli("schedule --config " + cfg.string() + " --out " +
                  out_dir.string()) == 2);
  }

  SUBCASE("numeric divergence exits 3") {
    const auto cfg = write_config("diverge.json", R"({
      "schedule": {"kind": "cosine", "eta_max": 10000.0, "eta_end": 10000.0,
                   "warmup_steps": 0, "total_steps": 3000},
      "optimizer": {"kind": "sgd"},
      "problem": {"kind": "noisy_quadratic", "dim": 3, "curvature": 1.0},
      "train": {"mode": "parallel", "workers": 1, "b_loc": 1}
    })");
    CHECK(run_cli("train --config " + cfg.string() + " --out " +
                  out_dir.string()) == 3);
  }

  SUBCASE("seed override changes the embedded config") {
    const auto cfg = write_config("seeded.json", R"({
      "seed": 1,
      "schedule": {"kind": "linear", "eta_max": 0.1, "eta_end": 0.0,
                   "warmup_steps": 0, "total_steps": 20}
    })");
    CHECK(run_cli("schedule --config " + cfg.string() + " --seed 424242 --out " +
                  out_dir.string()) == 0);
    std::ifstream in(out_dir / "summary.json");
    std::string all((std::istreambuf_iterator<char>(in)),
                    std::istreambuf_iterator<char>());
    CHECK(all.find("424242") != std::string::npos);
  }
}
