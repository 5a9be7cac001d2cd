#include "doctest.h"

#include "sdore/cli.hpp"
#include "sdore/config.hpp"
#include "sdore/errors.hpp"

#include <sys/wait.h>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <random>
#include <sstream>

using namespace sdore;
namespace fs = std::filesystem;
using nlohmann::json;

namespace {

fs::path scratch(const std::string& name) {
  const auto dir = fs::temp_directory_path() / "sdore_test_cli" / name;
  fs::remove_all(dir);
  fs::create_directories(dir);
  return dir;
}

std::string read_all(const fs::path& path) {
  std::ifstream in(path);
  return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

void write_json(const fs::path& path, const json& j) { std::ofstream(path) << j.dump(2); }

struct Result {
  int code;
  std::string out;
  std::string err;
};

Result run_cli(std::vector<std::string> args) {
  args.insert(args.begin(), "sdore");
  std::vector<char*> argv;
  for (auto& a : args) argv.push_back(a.data());
  std::ostringstream out, err;
  const int code = cli::run_main(static_cast<int>(argv.size()), argv.data(), out, err);
  return {code, out.str(), err.str()};
}

/// Small enough to run in well under a second.
json tiny(const std::string& experiment) {
  json j{{"experiment", experiment},
         {"model", {{"hidden", {6}}}},
         {"train", {{"epochs", 3}, {"batch_size", 32}, {"learning_rate", 1e-2}}},
         {"seeds", {0, 1}},
         {"evaluation", {{"test_sets", 2}, {"test_size", 30}}}};
  if (experiment != "csv_selection") {
    j["problem"] = {{"n", 60}, {"m", 60}};
  } else {
    j["problem"] = {{"csv",
                     {{"path", (fs::path(SDORE_SOURCE_DIR) / "data" / "california_housing_standin.csv").string()},
                      {"unlabeled_fraction", 0.25}}}};
  }
  return j;
}

int shell(const std::string& command) {
  const int status = std::system(command.c_str());
  return WIFEXITED(status) ? WEXITSTATUS(status) : -1;
}

}  // namespace

TEST_CASE("list shows the six built-in experiments with their defaults") {
  const auto r = run_cli({"list"});
  CHECK(r.code == 0);
  CHECK(config::registry().size() == 6);
  for (const char* name : {"example6_1", "example6_2", "example6_3", "appendix_toy", "appendix_sim", "csv_selection"}) {
    CHECK_MESSAGE(r.out.find(std::string(name) + "\n") != std::string::npos, name);
  }
  CHECK(r.out.find("6 experiments") != std::string::npos);
  const auto e63 = r.out.substr(r.out.find("example6_3"));
  CHECK(e63.substr(0, e63.find("appendix_toy")).find("sigma=0.1,0.2") != std::string::npos);
  const auto e61 = r.out.substr(0, r.out.find("example6_2"));
  CHECK(e61.find("lambda=0.001") != std::string::npos);
  CHECK(e61.find("n=500 m=5000 snr=30") != std::string::npos);
}

TEST_CASE("registry defaults") {
  const auto c61 = config::default_config("example6_1");
  CHECK(c61.variants.size() == 1);
  CHECK(c61.variants[0].lambda == 1e-3);
  CHECK(c61.hidden == std::vector<int>{64, 64});
  CHECK(c61.train.learning_rate == 1e-2);
  CHECK(c61.train.batch_size == 128);
  CHECK(c61.train.epochs == 1000);
  const auto c62 = config::default_config("example6_2");
  CHECK(c62.seeds.size() == 10);
  CHECK(c62.test_sets == 100);
  CHECK(c62.test_size == 100);
  const auto c63 = config::default_config("example6_3");
  CHECK(c63.problem.sigma == std::vector<double>{0.1, 0.2});
  CHECK(c63.variants.size() == 5);
  CHECK(c63.variants.back().lambda == 0.0);
  CHECK(config::default_config("appendix_sim").test_size == 500);
  CHECK_THROWS_AS(config::default_config("nope"), ConfigError);
}

TEST_CASE("config round trip") {
  for (const auto& e : config::registry()) {
    const auto emitted = config::emit_config(e.defaults);
    const auto parsed = config::parse_config(emitted);
    CHECK_MESSAGE(parsed == e.defaults, e.name);
    CHECK(config::emit_config(parsed) == emitted);
    // Through text as well.
    CHECK(config::parse_config(json::parse(emitted.dump())) == e.defaults);
  }
  SUBCASE("randomized field values") {
    std::mt19937_64 rng(4);
    std::uniform_real_distribution<double> u(1e-9, 1.0);
    std::uniform_int_distribution<int> k(1, 50);
    for (int t = 0; t < 50; ++t) {
      auto c = config::default_config(t % 2 ? "example6_2" : "example6_3");
      c.problem.n = k(rng);
      c.problem.m = k(rng);
      c.variants = {{"a", "DORE", u(rng), std::int64_t{k(rng)}}, {"b", "SDORE_POOLED", u(rng), std::nullopt}};
      c.hidden = {k(rng), k(rng), k(rng)};
      c.train.learning_rate = u(rng);
      c.train.final_learning_rate = u(rng) * 1e-3;
      c.train.schedule = training::Schedule::kCosine;
      c.train.optimizer = training::Optimizer::kGradientDescent;
      c.train.beta2 = u(rng) * 0.99;
      c.seeds = {rng(), rng()};
      c.selection = {"top_k", u(rng), k(rng)};
      c.threads = k(rng);
      const auto back = config::parse_config(json::parse(config::emit_config(c).dump()));
      CHECK(back == c);
    }
  }
  SUBCASE("a minimal config takes the registry defaults") {
    const auto c = config::parse_config(json{{"experiment", "example6_1"}});
    CHECK(c == config::default_config("example6_1"));
  }
  SUBCASE("sigma replaces snr and unnamed variants get distinct names") {
    const auto c = config::parse_config(json{{"experiment", "example6_1"},
                                             {"problem", {{"sigma", 0.05}}},
                                             {"variants", {{{"variant", "SDORE"}, {"lambda", 0.1}},
                                                           {{"variant", "SDORE"}, {"lambda", 0.01}},
                                                           {{"variant", "LS"}, {"lambda", 0}}}}});
    CHECK_FALSE(c.problem.snr.has_value());
    CHECK(c.problem.sigma == std::vector<double>{0.05});
    CHECK(c.variants[0].name == "SDORE_0.1");
    CHECK(c.variants[1].name == "SDORE_0.01");
    CHECK(c.variants[2].name == "LS");
  }
}

TEST_CASE("schema violations name the field") {
  const auto check_field = [](json j, const std::string& field) {
    try {
      config::parse_config(j);
      FAIL("expected ConfigError for " << field);
    } catch (const ConfigError& e) {
      CHECK(e.field() == field);
    }
  };
  check_field(json{{"experiment", "example6_1"}, {"variants", {{{"variant", "SDORE"}}}}}, "variants[0].lambda");
  check_field(json{{"experiment", "example6_1"}, {"variants", {{{"lambda", 0.1}}}}}, "variants[0].variant");
  check_field(json::object(), "experiment");
  check_field(json{{"experiment", "example9"}}, "experiment");
  check_field(json{{"experiment", "example6_1"}, {"trian", json::object()}}, "trian");
  check_field(json{{"experiment", "example6_1"}, {"train", {{"epochs", "many"}}}}, "train.epochs");
  check_field(json{{"experiment", "example6_1"}, {"train", {{"epochs", 1.5}}}}, "train.epochs");
  check_field(json{{"experiment", "example6_1"}, {"train", {{"optimizer", "sgd"}}}}, "train.optimizer");
  check_field(json{{"experiment", "example6_1"}, {"train", {{"learning_rate", -1}}}}, "train");
  check_field(json{{"experiment", "example6_1"}, {"problem", {{"n", 0}}}}, "problem.n");
  check_field(json{{"experiment", "example6_1"}, {"problem", {{"snr", 1}, {"sigma", 1}}}}, "problem");
  check_field(json{{"experiment", "example6_1"}, {"problem", {{"sigma", {0.1, -0.1}}}}}, "problem.sigma[1]");
  check_field(json{{"experiment", "example6_1"}, {"seeds", json::array()}}, "seeds");
  check_field(json{{"experiment", "example6_1"}, {"seeds", {1, -1}}}, "seeds[1]");
  check_field(json{{"experiment", "example6_1"}, {"variants", {{{"variant", "SDORE"}, {"lambda", -1}}}}},
              "variants[0].lambda");
  check_field(json{{"experiment", "example6_1"},
                   {"variants", {{{"variant", "SDORE"}, {"lambda", 1}, {"nu_sample", 5}}}}},
              "variants[0].nu_sample");
  check_field(json{{"experiment", "example6_1"}, {"variants", {{{"variant", "RIDGE"}, {"lambda", 1}}}}},
              "variants[0].variant");
  check_field(json{{"experiment", "example6_1"},
                   {"variants", {{{"name", "x"}, {"variant", "SDORE"}, {"lambda", 1}},
                                 {{"name", "x"}, {"variant", "DORE"}, {"lambda", 1}}}}},
              "variants[1].name");
  check_field(json{{"experiment", "example6_1"}, {"evaluation", {{"selection", {{"rule", "best"}}}}}},
              "evaluation.selection.rule");
  check_field(json{{"experiment", "example6_1"}, {"problem", {{"csv", {{"path", "x.csv"}}}}}}, "problem.csv");
  check_field(json{{"experiment", "csv_selection"}, {"problem", {{"n", 10}}}}, "problem.n");
  check_field(json{{"experiment", "example6_1"}, {"threads", 0}}, "threads");
}

TEST_CASE("exit codes") {
  const auto dir = scratch("exit_codes");
  SUBCASE("missing lambda is a configuration error naming the field") {
    write_json(dir / "c.json", json{{"experiment", "example6_1"}, {"variants", {{{"variant", "SDORE"}}}}});
    const auto r = run_cli({"run", (dir / "c.json").string()});
    CHECK(r.code == 2);
    CHECK(r.err.find("variants[0].lambda") != std::string::npos);
    CHECK_FALSE(fs::exists(dir / "out"));
  }
  SUBCASE("malformed and missing files") {
    std::ofstream(dir / "bad.json") << "{\"experiment\": ";
    CHECK(run_cli({"run", (dir / "bad.json").string()}).code == 2);
    CHECK(run_cli({"run", (dir / "absent.json").string()}).code == 2);
  }
  SUBCASE("usage errors") {
    CHECK(run_cli({}).code == 2);
    CHECK(run_cli({"frobnicate"}).code == 2);
    CHECK(run_cli({"run"}).code == 2);
    CHECK(run_cli({"--threads", "0", "list"}).code == 2);
    CHECK(run_cli({"--help"}).code == 0);
  }
  SUBCASE("runtime failure") {
    auto j = tiny("csv_selection");
    j["problem"]["csv"]["path"] = (dir / "no_such.csv").string();
    j["output_dir"] = (dir / "out").string();
    write_json(dir / "c.json", j);
    const auto r = run_cli({"run", (dir / "c.json").string()});
    CHECK(r.code == 1);
    CHECK(r.err.find("no_such.csv") != std::string::npos);
  }
  SUBCASE("the installed binary reports the same codes") {
    const std::string bin = SDORE_CLI_PATH;
    CHECK(shell(bin + " list > /dev/null") == 0);
    CHECK(shell(bin + " run " + (dir / "absent.json").string() + " 2> /dev/null") == 2);
    CHECK(shell(bin + " gradcheck --networks 5 > /dev/null") == 0);
    CHECK(shell(bin + " gradcheck --networks 5 --corrupt-requ-prime 1.01 > /dev/null 2>&1") == 1);
  }
}

TEST_CASE("gradcheck") {
  for (std::uint64_t seed : {0, 1, 2, 3}) {
    const auto r = run_cli({"gradcheck", "--seed", std::to_string(seed)});
    CHECK(r.code == 0);
    for (const char* name : {"input_grad", "param_grad", "hessian", "ridge"}) {
      CHECK(r.out.find(name) != std::string::npos);
    }
  }
  const auto broken = run_cli({"gradcheck", "--corrupt-requ-prime", "1.01"});
  CHECK(broken.code == 1);
  CHECK(broken.err.find("param_grad") != std::string::npos);
  // The hook is scoped to the command.
  CHECK(run_cli({"gradcheck", "--networks", "10"}).code == 0);
}

TEST_CASE("run writes the artifact set") {
  const auto dir = scratch("artifacts");
  auto j = tiny("example6_1");
  j["output_dir"] = (dir / "out").string();
  write_json(dir / "c.json", j);
  const auto r = run_cli({"run", (dir / "c.json").string()});
  REQUIRE(r.code == 0);
  const auto out = dir / "out";
  for (const char* f : {"config.json", "report.csv", "report.json"}) CHECK_MESSAGE(fs::exists(out / f), f);
  for (const char* f : {"history.csv", "curve.csv", "model.ckpt", "selection.json"}) {
    CHECK_MESSAGE(fs::exists(out / "SDORE_seed0" / f), f);
    CHECK_MESSAGE(fs::exists(out / "SDORE_seed1" / f), f);
  }
  const auto report = json::parse(read_all(out / "report.json"));
  CHECK(report["version"] == cli::version());
  CHECK(report["config"] == config::emit_config(config::parse_config(j)));
  CHECK(report["runtime_seconds"].get<double>() >= 0.0);
  REQUIRE(report["settings"].size() == 1);
  CHECK(report["settings"][0]["sigma_provenance"].get<std::string>().find("snr = 30") != std::string::npos);
  CHECK(report["settings"][0]["rows"].size() == 2);
  CHECK(report["settings"][0]["aggregates"].size() == 1);
  const auto csv = read_all(out / "report.csv");
  CHECK(std::count(csv.begin(), csv.end(), '\n') == 3);

  SUBCASE("rerun and the echoed config reproduce the rows byte for byte") {
    CHECK(run_cli({"--output-dir", (dir / "again").string(), "run", (dir / "c.json").string()}).code == 0);
    CHECK(read_all(dir / "again" / "report.csv") == csv);
    CHECK(run_cli({"--output-dir", (dir / "echo").string(), "--threads", "3", "run", (out / "config.json").string()})
              .code == 0);
    CHECK(read_all(dir / "echo" / "report.csv") == csv);
    const auto echoed = config::load_config(dir / "echo" / "config.json");
    CHECK(echoed.threads == 3);
    CHECK(echoed.output_dir == (dir / "echo").string());
  }
}

TEST_CASE("tiny runs of every experiment are thread-count invariant") {
  for (const auto& e : config::registry()) {
    const auto dir = scratch("threads_" + e.name);
    auto j = tiny(e.name);
    if (e.name == "example6_3") j["variants"] = {{{"variant", "SDORE"}, {"lambda", 1e-4}}, {{"variant", "SDORE"}, {"lambda", 0}}};
    write_json(dir / "c.json", j);
    REQUIRE(run_cli({"--output-dir", (dir / "t1").string(), "--threads", "1", "run", (dir / "c.json").string()}).code == 0);
    REQUIRE(run_cli({"--output-dir", (dir / "t3").string(), "--threads", "3", "run", (dir / "c.json").string()}).code == 0);
    CHECK_MESSAGE(read_all(dir / "t1" / "report.csv") == read_all(dir / "t3" / "report.csv"), e.name);
    if (e.name == "example6_3") {
      for (const char* s : {"sigma0.1", "sigma0.2"}) {
        CHECK(fs::exists(dir / "t1" / s / "SDORE_0_seed0" / "recovery.csv"));
        CHECK(fs::exists(dir / "t1" / s / "SDORE_1e-04_seed1" / "curve.csv"));
      }
      const auto csv = read_all(dir / "t1" / "report.csv");
      CHECK(std::count(csv.begin(), csv.end(), '\n') == 1 + 2 * 2 * 2);
    }
  }
}

TEST_CASE("run writes nothing outside the output directory") {
  const auto dir = scratch("confined");
  const auto work = dir / "work";
  fs::create_directories(work);
  auto j = tiny("appendix_toy");
  j["output_dir"] = "results";
  write_json(work / "c.json", j);
  const auto previous = fs::current_path();
  fs::current_path(work);
  const auto r = run_cli({"run", "c.json"});
  const auto g = run_cli({"gradcheck", "--networks", "5"});
  const auto l = run_cli({"list"});
  fs::current_path(previous);
  REQUIRE(r.code == 0);
  CHECK(g.code == 0);
  CHECK(l.code == 0);
  std::vector<std::string> entries;
  for (const auto& p : fs::directory_iterator(work)) entries.push_back(p.path().filename().string());
  std::sort(entries.begin(), entries.end());
  CHECK(entries == std::vector<std::string>{"c.json", "results"});
  std::vector<std::string> outside;
  for (const auto& p : fs::directory_iterator(dir)) outside.push_back(p.path().filename().string());
  CHECK(outside == std::vector<std::string>{"work"});
}
