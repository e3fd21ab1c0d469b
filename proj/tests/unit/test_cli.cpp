#include <doctest.h>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <string>
#include <sys/wait.h>

namespace fs = std::filesystem;

namespace {

int run(const std::string& args) {
  const std::string cmd = std::string("\"") + MARDP_CLI_PATH + "\" " + args + " >/dev/null 2>&1";
  const int status = std::system(cmd.c_str());
  return WIFEXITED(status) ? WEXITSTATUS(status) : -1;
}

fs::path scratch(const std::string& name) {
  auto p = fs::temp_directory_path() / ("mardp_cli_" + name);
  fs::remove_all(p);
  return p;
}

}  // namespace

TEST_CASE("exit codes") {
  CHECK(run("--help") == 0);
  CHECK(run("") == 2);
  CHECK(run("fit --bogus") == 2);
  CHECK(run("fit --data x.csv --model bym") == 2);
  CHECK(run("fit --data /nonexistent/data.csv") == 3);
  const auto dir = scratch("bad");
  fs::create_directories(dir);
  std::ofstream(dir / "adj.csv") << "a,b\nb,c\n";
  CHECK(run("fit --adjacency " + (dir / "adj.csv").string() + " --data /nonexistent.csv") == 3);
  CHECK(run("boundaries --posterior " + (dir / "none").string()) == 3);
  fs::remove_all(dir);
}

TEST_CASE("simulate, fit, boundaries, evaluate and moran end to end") {
  const auto dir = scratch("e2e");
  const auto sim = dir / "sim";
  REQUIRE(run("simulate --seed 7 --replicates 2 --out " + sim.string()) == 0);
  CHECK(fs::exists(sim / "truth.json"));
  CHECK(fs::exists(sim / "manifest.json"));
  const auto data = sim / "data" / "dataset_001.csv";
  REQUIRE(fs::exists(data));

  const auto fit = dir / "fit";
  REQUIRE(run("fit --data " + data.string() + " --model MDAGAR --iterations 300 --burn-in 100 --chains 2 --seed 3 --delta 0.05 --out " +
              fit.string()) == 0);
  for (const char* f : {"beta.csv", "labels.csv", "rho.csv", "A.csv", "manifest.json"}) CHECK(fs::exists(fit / f));

  CHECK(run("boundaries --posterior " + fit.string() + " --query within --delta 0.05") == 0);
  CHECK(run("boundaries --posterior " + fit.string() + " --query cross --pair disease1,disease2 --top 30") == 0);
  CHECK(run("boundaries --posterior " + fit.string() + " --query within --delta 1.5") == 2);
  CHECK(run("boundaries --posterior " + fit.string() + " --query within --top 100000") == 2);

  const auto ev = dir / "eval";
  CHECK(run("evaluate --truth " + (sim / "truth.json").string() + " --fit " + fit.string() + " --out " + ev.string()) == 0);
  for (const char* f : {"boundary_rates.csv", "dscore.csv", "kl.csv", "parameters.csv"}) CHECK(fs::exists(ev / f));

  CHECK(run("moran --data " + data.string() + " --likelihood gaussian --out " + (dir / "moran.csv").string()) == 0);
  CHECK(fs::exists(dir / "moran.csv"));
  fs::remove_all(dir);
}
