#include <doctest.h>
#include <json.hpp>
#include <sys/wait.h>
#include <unistd.h>

#include <array>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <random>
#include <sstream>

#include "lrvi/errors.hpp"
#include "lrvi/model_io.hpp"
#include "lrvi/pipeline.hpp"

using nlohmann::json;
using namespace lrvi;
namespace fs = std::filesystem;

namespace {

struct Run {
  int code = -1;
  std::string out;
  json doc() const { return json::parse(out); }
};

// Fresh copy of the test data so fit caches land in a scratch directory.
struct Scratch {
  fs::path dir;
  explicit Scratch(const std::string& name)
      : dir(fs::temp_directory_path() / ("lrvi_cli_" + name + "_" + std::to_string(::getpid()))) {
    fs::remove_all(dir);
    fs::create_directories(dir);
    for (const auto& e : fs::directory_iterator(LRVI_TEST_DATA)) fs::copy_file(e.path(), dir / e.path().filename());
  }
  ~Scratch() {
    std::error_code ec;
    fs::remove_all(dir, ec);
  }
};

Run run(const fs::path& dir, const std::string& args) {
  const std::string cmd = "cd '" + dir.string() + "' && '" + std::string(LRVI_CLI_PATH) + "' " + args + " 2>/dev/null";
  Run r;
  FILE* pipe = ::popen(cmd.c_str(), "r");
  REQUIRE(pipe != nullptr);
  std::array<char, 4096> buf{};
  std::size_t got = 0;
  while ((got = std::fread(buf.data(), 1, buf.size(), pipe)) > 0) r.out.append(buf.data(), got);
  const int status = ::pclose(pipe);
  r.code = WIFEXITED(status) ? WEXITSTATUS(status) : -1;
  return r;
}

json without_run(json j) {
  j.erase("run");
  return j;
}

double tv(const std::vector<double>& p, const std::vector<double>& q) {
  REQUIRE(p.size() == q.size());
  double s = 0.0;
  for (std::size_t i = 0; i < p.size(); ++i) s += std::abs(p[i] - q[i]);
  return 0.5 * s;
}

}  // namespace

TEST_CASE("infer and mcmc are deterministic apart from the run section") {
  const Scratch scratch("determinism");
  const fs::path& dir = scratch.dir;
  const Run a = run(dir, "--seed 11 --no-cache infer workshops.lrvi --query attends");
  const Run b = run(dir, "--seed 11 --no-cache infer workshops.lrvi --query attends");
  REQUIRE(a.code == 0);
  REQUIRE(b.code == 0);
  CHECK(without_run(a.doc()).dump() == without_run(b.doc()).dump());

  const std::string m = "--seed 5 mcmc job_house.lrvi --obs job_house.obs --query HP --steps 3000 --burn-in 100";
  const Run c = run(dir, m), d = run(dir, m);
  REQUIRE(c.code == 0);
  CHECK(without_run(c.doc()).dump() == without_run(d.doc()).dump());
  CHECK(c.doc().at("run").contains("timings"));
}

TEST_CASE("model files round-trip") {
  const Scratch scratch("roundtrip");
  const fs::path& dir = scratch.dir;
  for (const std::string name : {"workshops.lrvi", "mixed.lrvi", "job_house.lrvi"}) {
    const ModelDocument doc = load_model(dir / name);
    const std::string text = serialize_model_text(doc);
    CHECK(serialize_model_text(parse_model_text(text)) == text);
    CHECK(serialize_model_text(model_from_json(model_to_json(doc))) == text);

    const Run as_json = run(dir, "convert " + name + " --format json");
    REQUIRE(as_json.code == 0);
    write_file_atomic(dir / (name + ".json"), as_json.out);
    const Run back = run(dir, "convert " + name + ".json --format text");
    REQUIRE(back.code == 0);
    CHECK(back.out == text);
  }

  // A fitted model survives serialization too.
  const Run lifted = run(dir, "--no-cache lift mixed.lrvi");
  REQUIRE(lifted.code == 0);
  const ModelDocument fitted = model_from_json(lifted.doc().at("model"));
  CHECK(serialize_model_text(parse_model_text(serialize_model_text(fitted))) == serialize_model_text(fitted));
}

TEST_CASE("failures produce error documents and exit codes") {
  const Scratch scratch("errors");
  const fs::path& dir = scratch.dir;
  const Run parse = run(dir, "lift broken.lrvi");
  CHECK(parse.code == 1);
  CHECK(parse.doc().at("error").at("stage") == "parse");

  write_file_atomic(dir / "zero.lrvi",
                    "ATOMS\natom X binary 2\nPARFACTORS\nparfactor z\n  args X\n  table histogram\n"
                    "  value 2,0 0\n  value 1,1 0\n  value 0,2 0\n");
  const Run zero = run(dir, "lift zero.lrvi");
  CHECK(zero.code == 1);
  CHECK(zero.doc().at("error").at("parfactor") == "z");

  const Run usage = run(dir, "");
  CHECK(usage.code == 1);
  CHECK(usage.doc().at("error").at("stage") == "usage");

  const Run query = run(dir, "infer mixed.lrvi --query nope");
  CHECK(query.code == 1);
  CHECK(query.doc().contains("error"));

  std::string probs = "0.04";
  for (int i = 1; i < 25; ++i) probs += ",0.04";
  const Run cap = run(dir, "extend-check --probs " + probs + " --n-bar 100");
  CHECK(cap.code == 2);
  CHECK(cap.doc().at("error").at("stage") == "compute");

  CHECK(run(dir, "lift missing.lrvi").code == 1);
}

TEST_CASE("fit cache") {
  const Scratch scratch("cache");
  const fs::path& dir = scratch.dir;
  const Run first = run(dir, "lift workshops.lrvi");
  REQUIRE(first.code == 0);
  CHECK(first.doc().at("run").at("cache_hits") == 0);
  CHECK(fs::exists(cache_path_for(dir / "workshops.lrvi")));
  const Run second = run(dir, "lift workshops.lrvi");
  CHECK(second.doc().at("run").at("cache_hits") == 2);
  CHECK(without_run(first.doc()).dump() == without_run(second.doc()).dump());
  for (const auto& f : second.doc().at("run").at("fits")) CHECK(f.at("cache_hit") == true);
  CHECK(run(dir, "--no-cache lift workshops.lrvi").doc().at("run").at("cache_hits") == 0);
  // A different seed is a different fit.
  CHECK(run(dir, "--seed 9 lift workshops.lrvi").doc().at("run").at("cache_hits") == 0);
}

TEST_CASE("lift dispatches by parfactor kind") {
  const Scratch scratch("dispatch");
  const fs::path& dir = scratch.dir;
  const json mixed = run(dir, "--no-cache lift mixed.lrvi").doc();
  std::map<std::string, std::string> route;
  for (const auto& f : mixed.at("fits")) route[f.at("id")] = f.at("route");
  CHECK(route["jobs"] == "unchanged");
  CHECK(route["prices"] == "continuous");
  CHECK(route["pair"] == "discrete");

  const json variational = run(dir, "--no-cache lift job_house.lrvi").doc();
  for (const auto& f : variational.at("fits")) CHECK(f.at("route") == "unchanged");
  const ModelDocument before = load_model(dir / "job_house.lrvi");
  CHECK(serialize_model_text(model_from_json(variational.at("model"))) == serialize_model_text(before));
}

TEST_CASE("elimination and lifted MCMC agree on a small model") {
  const Scratch scratch("agree");
  const fs::path& dir = scratch.dir;
  const json ve = run(dir, "--seed 3 infer mixed.lrvi --query job").doc();
  const json mc = run(dir, "--seed 3 mcmc mixed.lrvi --query job --steps 40000 --burn-in 1000").doc();
  const auto p = ve.at("marginal").at("predictive").get<std::vector<double>>();
  const auto q = mc.at("marginal").at("estimate").get<std::vector<double>>();
  CHECK(tv(p, q) <= 0.05);
}

TEST_CASE("verify, bound and extend-check") {
  const Scratch scratch("verify");
  const fs::path& dir = scratch.dir;
  const json v = run(dir, "verify workshops.lrvi --query attends").doc();
  CHECK(v.at("tv").get<double>() <= 0.1);

  const json b = run(dir, "bound workshops.lrvi").doc();
  CHECK(b.at("parfactors").at(0).at("bound").get<double>() == doctest::Approx(0.4));
  CHECK(run(dir, "bound mixed.lrvi").code == 1);

  const json peak = run(dir, "extend-check --probs 0,0,1,0,0 --n-bar 40").doc();
  CHECK(peak.at("feasible") == false);
  const json flat = run(dir, "extend-check --probs 0.2,0.2,0.2,0.2,0.2 --n-bar 40").doc();
  CHECK(flat.at("feasible") == true);
  CHECK(flat.at("witness").size() == 41);
}

TEST_CASE("cluster command") {
  const Scratch scratch("cluster");
  const fs::path& dir = scratch.dir;
  const json two = run(dir, "cluster columns.csv --k 2").doc();
  const auto labels = two.at("labels").get<std::vector<int>>();
  REQUIRE(labels.size() == 6);
  CHECK(labels[0] == labels[2]);
  CHECK(labels[0] == labels[4]);
  CHECK(labels[1] == labels[3]);
  CHECK(labels[1] == labels[5]);
  CHECK(labels[0] != labels[1]);
  const json one = run(dir, "cluster columns.csv --k 1").doc();
  CHECK(one.at("sizes") == json::array({6}));
  CHECK(run(dir, "cluster columns.csv --k 9").code != 0);
}

TEST_CASE("cluster_columns recovers generating regimes") {
  std::mt19937_64 rng(1);
  std::normal_distribution<double> noise(0.0, 1.0);
  std::bernoulli_distribution missing(0.2);
  const int rows = 60, cols = 40;
  CsvMatrix m;
  m.values.resize(rows, cols);
  std::vector<int> regime(cols);
  for (int c = 0; c < cols; ++c) {
    regime[c] = c % 2;
    m.ids.push_back("w" + std::to_string(c));
    for (int r = 0; r < rows; ++r) {
      const double v = regime[c] == 0 ? 10.0 + 0.5 * noise(rng) : 14.0 + 2.0 * noise(rng);
      m.values(r, c) = missing(rng) ? std::nan("") : v;
    }
  }
  const ClusterResult res = cluster_columns(m, 2, 7);
  int agree = 0;
  for (int c = 0; c < cols; ++c) agree += (res.labels[c] == res.labels[0]) == (regime[c] == regime[0]);
  CHECK(agree >= 0.95 * cols);
  CHECK(cluster_columns(m, 2, 7).labels == res.labels);

  CsvMatrix same;
  same.values.resize(3, 4);
  for (int c = 0; c < 4; ++c) {
    same.ids.push_back("s" + std::to_string(c));
    same.values.col(c) << 1.0, 2.0, 6.0;
  }
  const ClusterResult single = cluster_columns(same, 1, 0);
  CHECK(single.centroids(0, 0) == doctest::Approx(3.0));
  CHECK(single.centroids(0, 1) == doctest::Approx(single.features(0, 1)));
  CHECK_THROWS(cluster_columns(same, 2, 0));
}

TEST_CASE("bench output") {
  const Scratch scratch("bench");
  const fs::path& dir = scratch.dir;
  const Run empty = run(dir, "bench");
  CHECK(empty.code == 0);
  CHECK(empty.out == "method,size,seed,error,step_time_us\n");
  const Run one = run(dir, "bench --sizes 16 --seeds 4 --steps 2000 --burn-in 100");
  std::istringstream lines(one.out);
  std::string line;
  std::vector<std::string> rows;
  while (std::getline(lines, line)) rows.push_back(line);
  REQUIRE(rows.size() == 3);
  CHECK(rows[1].rfind("lifted,16,4,", 0) == 0);
  CHECK(rows[2].rfind("ground,16,4,", 0) == 0);
}
