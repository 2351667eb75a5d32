#include <doctest.h>

#include <filesystem>
#include <json.hpp>
#include <sstream>
#include <string>
#include <vector>

#include "mfcopula/cli.hpp"
#include "mfcopula/io.hpp"

using namespace mfcopula;
namespace fs = std::filesystem;
using nlohmann::json;

namespace {

struct Result {
  int code;
  std::string out, err;
};

const char* no_env(const std::string&) { return nullptr; }

Result run(std::vector<std::string> args) {
  std::ostringstream out, err;
  const int code = run_cli(args, out, err, no_env);
  return {code, out.str(), err.str()};
}

struct TempDir {
  fs::path path;
  explicit TempDir(const std::string& name) : path(fs::temp_directory_path() / ("mfcopula_cli_" + name)) {
    fs::remove_all(path);
    fs::create_directories(path);
  }
  ~TempDir() { fs::remove_all(path); }
  std::string operator/(const std::string& leaf) const { return (path / leaf).string(); }
};

void check_same_files(const std::string& a, const std::string& b) {
  std::vector<std::string> names;
  for (const auto& e : fs::directory_iterator(a)) {
    if (e.is_regular_file()) names.push_back(e.path().filename().string());
  }
  CHECK_FALSE(names.empty());
  for (const auto& name : names) {
    CAPTURE(name);
    CHECK(read_text(a + "/" + name) == read_text(b + "/" + name));
  }
}

const std::vector<std::string> kFixed{"--fix", "alpha1,alpha2,deltaU,deltaL", "--alpha", "4,4", "--delta-upper", "0.8",
                                      "--delta-lower", "0.6"};

std::vector<std::string> concat(std::vector<std::string> a, const std::vector<std::string>& b) {
  a.insert(a.end(), b.begin(), b.end());
  return a;
}

}  // namespace

TEST_CASE("classify prints the tail report") {
  const auto r = run({"classify", "--alpha", "4,4", "--gamma", "0.4,0.6", "--delta-upper", "0.8", "--delta-lower", "0.6",
                      "--range", "0.6,0.3", "--rho", "-0.7"});
  REQUIRE(r.code == 0);
  const auto j = json::parse(r.out);
  CHECK(j["summary"] == "U: AD, AD--AD and L: AD, AI--AI");
  CHECK(j["upper"]["fields"] == json({"AD", "AD"}));
  CHECK(j["upper"]["cross"]["12"] == "AD");
  CHECK(j["lower"]["fields"] == json({"AD", "AI"}));
  CHECK(j["lower"]["cross"]["12"] == "AI");
  CHECK(j["spec_version"] == "1");
}

TEST_CASE("simulate is byte-identical across runs") {
  TempDir tmp("simulate");
  for (const char* out : {"a", "b"}) {
    const auto r = run({"simulate", "--p", "1", "--d", "1", "--n", "100", "--seed", "7", "--out", tmp / out});
    REQUIRE(r.code == 0);
  }
  check_same_files(tmp / "a", tmp / "b");
  const auto side = json::parse(read_text(tmp / "a/simulate.json"));
  CHECK(side["seed"] == 7);
  CHECK(side["p"] == 1);
  CHECK(side.contains("parameters"));

  REQUIRE(run({"simulate", "--p", "1", "--d", "1", "--n", "100", "--seed", "8", "--out", tmp / "c"}).code == 0);
  CHECK(read_text(tmp / "a/observations.csv") != read_text(tmp / "c/observations.csv"));
}

TEST_CASE("fit is reproducible from its sidecar") {
  TempDir tmp("fit");
  REQUIRE(run({"simulate", "--d", "4", "--n", "30", "--seed", "3", "--out", tmp / "sim"}).code == 0);
  const std::vector<std::string> base{"fit", "--observations", tmp / "sim/observations.csv", "--sites",
                                      tmp / "sim/sites.csv", "--iterations", "400", "--burn-in", "200", "--seed", "5"};
  for (const char* out : {"a", "b"}) REQUIRE(run(concat(concat(base, kFixed), {"--out", tmp / out})).code == 0);
  check_same_files(tmp / "a", tmp / "b");

  const auto side = json::parse(read_text(tmp / "a/fit.json"));
  CHECK(side["seed"] == 5);
  CHECK(side["config"]["sampler"]["iterations"] == 400);
  // The embedded configuration alone reproduces the chain.
  write_text(tmp / "config.json", side["config"].dump());
  const auto again = run({"fit", "--config", tmp / "config.json", "--observations", tmp / "sim/observations.csv",
                          "--sites", tmp / "sim/sites.csv", "--out", tmp / "c"});
  REQUIRE(again.code == 0);
  CHECK(read_text(tmp / "a/chain.csv") == read_text(tmp / "c/chain.csv"));
  CHECK(read_text(tmp / "a/chain.json") == read_text(tmp / "c/chain.json"));
}

TEST_CASE("select over one grid point is a fit plus a one-row ranking") {
  TempDir tmp("select");
  REQUIRE(run({"simulate", "--d", "4", "--n", "30", "--seed", "4", "--out", tmp / "sim"}).code == 0);
  write_text(tmp / "grid.json",
             R"({"grid": {"alpha": [[4]], "delta_upper": [0.8], "delta_lower": [0.6]},
                 "diagnostics": {"mc": 10000, "draws": 5}})");
  const std::vector<std::string> data{"--observations", tmp / "sim/observations.csv", "--sites", tmp / "sim/sites.csv",
                                      "--iterations", "300", "--burn-in", "200", "--seed", "9"};
  REQUIRE(run(concat(concat({"select", "--config", tmp / "grid.json"}, data), {"--out", tmp / "sel"})).code == 0);
  REQUIRE(run(concat(concat(concat({"fit", "--config", tmp / "grid.json"}, data), kFixed), {"--out", tmp / "fit"})).code ==
          0);
  CHECK(read_text(tmp / "sel/cell_001/chain.csv") == read_text(tmp / "fit/chain.csv"));
  CHECK(read_text(tmp / "sel/cell_001/chain.json") == read_text(tmp / "fit/chain.json"));
  std::istringstream ranking(read_text(tmp / "sel/ranking.csv"));
  std::string header, row, extra;
  std::getline(ranking, header);
  std::getline(ranking, row);
  CHECK(header == "rank,label,dir,discrepancy,cells_used,cells_missing");
  CHECK(row.rfind("1,alpha1=4;alpha2=4;deltaU=0.8;deltaL=0.6,cell_001,", 0) == 0);
  CHECK_FALSE(std::getline(ranking, extra));
  const auto side = json::parse(read_text(tmp / "sel/select.json"));
  CHECK(side["seed"] == 9);
  CHECK(side["config"]["grid"]["delta_upper"] == json({0.8}));
}

TEST_CASE("chi writes tidy curves") {
  TempDir tmp("chi");
  REQUIRE(run({"simulate", "--d", "6", "--n", "200", "--seed", "2", "--out", tmp / "sim"}).code == 0);
  const auto r = run({"chi", "--observations", tmp / "sim/observations.csv", "--sites", tmp / "sim/sites.csv", "--u",
                      "0.9", "--bins", "3", "--tail", "upper", "--out", tmp / "chi"});
  REQUIRE(r.code == 0);
  bool found = false;
  for (const auto& e : fs::directory_iterator(tmp / "chi")) {
    if (e.path().extension() != ".csv") continue;
    found = true;
    std::istringstream in(read_text(e.path().string()));
    std::string header;
    std::getline(in, header);
    CHECK(header == "tail,pair,abscissa_type,abscissa,estimate,lo,hi,estimator");
  }
  CHECK(found);
  CHECK(json::parse(read_text(tmp / "chi/chi.json"))["spec_version"] == "1");
}

TEST_CASE("errors are one json line with a nonzero status") {
  auto r = run({"frobnicate"});
  CHECK(r.code == 2);
  auto j = json::parse(r.err);
  CHECK(j["error"] == "usage");

  r = run({"fit", "--observations", "/nonexistent/obs.csv", "--sites", "/nonexistent/sites.csv"});
  CHECK(r.code == 1);
  CHECK(r.err.find('\n') == r.err.size() - 1);
  j = json::parse(r.err);
  CHECK(j["message"].get<std::string>().find("/nonexistent/") != std::string::npos);

  r = run({"classify", "--alpha", "4,4", "--gamma", "0.4,1.5"});
  CHECK(r.code == 1);
  j = json::parse(r.err);
  CHECK(j["error"] == "domain");
  CHECK(j["message"].get<std::string>().find("gamma2") != std::string::npos);

  r = run({"simulate", "--n", "many"});
  CHECK(r.code == 2);
  CHECK(json::parse(r.err)["message"].get<std::string>().find("--n") != std::string::npos);

  CHECK(run({"--help"}).code == 0);
  CHECK(run({"chi", "--help"}).code == 0);
}
