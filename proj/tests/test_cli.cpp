#include <doctest.h>
#include <json.hpp>

#include <fstream>
#include <sstream>

#include "nsub/cli.hpp"
#include "nsub/io/checkpoint.hpp"

using namespace nsub;
namespace fs = std::filesystem;

namespace {

struct Run {
  int code;
  std::string out;
  std::string err;
};

Run run(std::vector<std::string> args) {
  args.insert(args.begin(), "nsub");
  std::vector<const char*> argv;
  for (const auto& a : args) argv.push_back(a.c_str());
  std::ostringstream out, err;
  const int code = cli_main(static_cast<int>(argv.size()), argv.data(), out, err);
  return {code, out.str(), err.str()};
}

fs::path scratch(const std::string& name) {
  const fs::path dir = fs::temp_directory_path() / ("nsub_test_cli_" + name);
  fs::remove_all(dir);
  fs::create_directories(dir);
  return dir;
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::ostringstream s;
  s << in.rdbuf();
  return s.str();
}

fs::path write_spec(const fs::path& dir, const std::string& extra_train = "") {
  const fs::path p = dir / "spec.yaml";
  std::ofstream f(p);
  f << "system:\n"
       "  name: toy\n"
       "  kind: abstract\n"
       "  n: 4\n"
       "  terms: [{type: quadratic, stiffness: [1, 4, 9, 16]}]\n"
       "train:\n"
       "  latent_dim: 2\n"
       "  sigma: 0.1\n"
       "  hidden_layers: 2\n"
       "  hidden_width: 16\n"
       "  total_steps: 200\n"
       "  log_every: 50\n"
       "  checkpoint_every: 100\n"
    << extra_train << "simulate: {steps: 5}\n";
  return p;
}

}  // namespace

TEST_CASE("unknown subcommand exits 1 with usage") {
  const Run r = run({"frobnicate"});
  CHECK(r.code == 1);
  CHECK(r.err.find("train") != std::string::npos);
  CHECK(r.err.find("Usage") != std::string::npos);
  CHECK(run({}).code == 1);
}

TEST_CASE("help exits 0") {
  const Run r = run({"--help"});
  CHECK(r.code == 0);
  CHECK(r.out.find("diagnose") != std::string::npos);
  CHECK(run({"simulate", "--help"}).code == 0);
}

TEST_CASE("validation errors exit 1") {
  const fs::path dir = scratch("invalid");
  CHECK(run({"train", (dir / "missing.yaml").string()}).code == 1);
  {
    std::ofstream f(dir / "bad.yaml");
    f << "system: {kind: abstract, n: 1, terms: [{type: quadratic, stiffness: [1]}]}\ntrain: {sigma: 0}\n";
  }
  const Run r = run({"train", (dir / "bad.yaml").string()});
  CHECK(r.code == 1);
  CHECK(r.err.find("train.sigma") != std::string::npos);
  CHECK(run({"sample", (dir / "nomodel.nsub").string()}).code == 1);
}

TEST_CASE("numerical failure exits 2") {
  const fs::path dir = scratch("diverge");
  const fs::path spec = write_spec(dir, "  learning_rate: 1.0e300\n  divergence_window: 3\n");
  const Run r = run({"train", spec.string(), "--out", (dir / "out").string(), "--quiet"});
  CHECK(r.code == 2);
  CHECK(r.err.find("diverged") != std::string::npos);
}

TEST_CASE("train writes model, telemetry, checkpoints and the effective config") {
  const fs::path dir = scratch("train");
  const fs::path spec = write_spec(dir);
  const fs::path out = dir / "out";
  const Run r = run({"train", spec.string(), "--out", out.string(), "--quiet"});
  REQUIRE(r.code == 0);
  CHECK(fs::exists(out / "model.nsub"));
  CHECK(fs::exists(out / "effective_config.yaml"));
  CHECK(fs::exists(out / "checkpoints" / "step_000000100.nsub"));
  std::ifstream tel(out / "telemetry.jsonl");
  std::string line;
  int lines = 0;
  while (std::getline(tel, line)) {
    const auto j = nlohmann::json::parse(line);
    CHECK(j["step"] == 50 * (lines + 1));
    ++lines;
  }
  CHECK(lines == 4);
  const SubspaceModel model = load_model(out / "model.nsub");
  CHECK(model.d == 2);
  CHECK(model.config_dim() == 4);
  CHECK(model.summary.steps == 200);
  CHECK(model.fingerprint.system_name == "toy");
}

TEST_CASE("single-threaded training is bit-reproducible, also from the effective config") {
  const fs::path dir = scratch("determinism");
  const fs::path spec = write_spec(dir);
  REQUIRE(run({"train", spec.string(), "--out", (dir / "a").string(), "--quiet"}).code == 0);
  REQUIRE(run({"train", spec.string(), "--out", (dir / "b").string(), "--quiet"}).code == 0);
  CHECK(slurp(dir / "a" / "model.nsub") == slurp(dir / "b" / "model.nsub"));
  CHECK(slurp(dir / "a" / "telemetry.jsonl") == slurp(dir / "b" / "telemetry.jsonl"));
  REQUIRE(run({"train", (dir / "a" / "effective_config.yaml").string(), "--out", (dir / "c").string(), "--quiet"})
              .code == 0);
  CHECK(slurp(dir / "a" / "model.nsub") == slurp(dir / "c" / "model.nsub"));

  REQUIRE(run({"train", spec.string(), "--out", (dir / "d").string(), "--seed", "5", "--quiet"}).code == 0);
  CHECK(slurp(dir / "a" / "model.nsub") != slurp(dir / "d" / "model.nsub"));
}

TEST_CASE("post-training subcommands") {
  const fs::path dir = scratch("post");
  const fs::path spec = write_spec(dir);
  const fs::path out = dir / "out";
  REQUIRE(run({"train", spec.string(), "--out", out.string(), "--quiet"}).code == 0);
  const std::string model = (out / "model.nsub").string();

  SUBCASE("modes") {
    const Run r = run({"modes", spec.string(), "-d", "2", "--sigma", "0.1", "--out", out.string()});
    REQUIRE(r.code == 0);
    const SubspaceModel m = load_model(out / "modes.nsub");
    CHECK(m.mlp.num_layers() == 1);
    CHECK(std::abs(std::abs(m.mlp.weights[0](0, 0)) - 0.1) < 1e-6);
    CHECK(r.out.find("eigenvalue") != std::string::npos);
  }
  SUBCASE("sample") {
    REQUIRE(run({"sample", model, "-n", "7", "--sinusoidal", "--out", out.string()}).code == 0);
    std::ifstream in(out / "samples.jsonl");
    std::string line;
    int count = 0;
    while (std::getline(in, line)) {
      const auto j = nlohmann::json::parse(line);
      CHECK(j["q"].size() == 4);
      ++count;
    }
    CHECK(count == 7);
    CHECK(run({"sample", model, "--condition", "1.0", "--out", out.string()}).code == 1);
  }
  SUBCASE("simulate") {
    {
      std::ofstream f(dir / "start.txt");
      f << "0.5 0\n0.5 0.01\n";
    }
    REQUIRE(run({"simulate", model, spec.string(), "--h", "0.01", "--keyframes", (dir / "start.txt").string(),
                 "--out", out.string(), "--quiet"})
                .code == 0);
    std::ifstream in(out / "trajectory.jsonl");
    std::string line;
    int count = 0;
    while (std::getline(in, line)) ++count;
    CHECK(count == 6);
  }
  SUBCASE("interpolate") {
    {
      std::ofstream f(dir / "keys.txt");
      f << "0 0\n1 0\n1 1\n0 1\n";
    }
    REQUIRE(run({"interpolate", model, (dir / "keys.txt").string(), "--samples-per-segment", "5", "--out",
                 out.string()})
                .code == 0);
    std::ifstream in(out / "path.jsonl");
    std::string line;
    int count = 0;
    while (std::getline(in, line)) ++count;
    CHECK(count == 20);
    REQUIRE(run({"interpolate", model, (dir / "keys.txt").string(), "--clamped", "--samples-per-segment", "5",
                 "--out", out.string()})
                .code == 0);
  }
  SUBCASE("export-web") {
    const fs::path file = dir / "web.json";
    REQUIRE(run({"export-web", model, spec.string(), "-o", file.string()}).code == 0);
    std::ifstream in(file);
    const auto doc = nlohmann::json::parse(in);
    CHECK(doc["dims"]["d"] == 2);
  }
  SUBCASE("diagnose") {
    const Run r = run({"diagnose", model, spec.string(), "--pairs", "100"});
    REQUIRE(r.code == 0);
    CHECK(r.out.find("median |log ratio|") != std::string::npos);
  }
  SUBCASE("model and spec must match") {
    const fs::path other = dir / "other.yaml";
    {
      std::ofstream f(other);
      f << "system: {kind: abstract, n: 3, terms: [{type: quadratic, stiffness: [1, 2, 3]}]}\n";
    }
    CHECK(run({"diagnose", model, other.string()}).code == 1);
  }
}
