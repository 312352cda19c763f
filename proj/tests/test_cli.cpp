#include "helpers.hpp"

#include "fkuq/cli.hpp"
#include "fkuq/csv.hpp"
#include "fkuq/field.hpp"

#include <doctest.h>
#include <json.hpp>

#include <fstream>
#include <sstream>

using namespace fkuq;
namespace fs = std::filesystem;

namespace {

std::string slurp(const fs::path& p)
{
  std::ifstream in(p, std::ios::binary);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

int fkuq_run(std::vector<std::string> args)
{
  return cli::run(args);
}

/// gen-synthetic fixture shared by several cases.
fs::path fixture()
{
  static const fs::path dir = [] {
    const auto d = testing::scratch_dir("cli_fixture");
    REQUIRE(fkuq_run({"gen-synthetic", "--out-dir", d.string(), "--seed", "42"}) == 0);
    return d;
  }();
  return dir;
}

}  // namespace

TEST_CASE("gen-synthetic writes every artifact deterministically")
{
  const fs::path a = fixture();
  for (const char* f : {"graph.json", "prior.json", "truth.json", "scan1.csv", "scan2.csv", "manifest.json"})
    CHECK(fs::exists(a / f));
  const auto b = testing::scratch_dir("cli_gen_again");
  REQUIRE(fkuq_run({"gen-synthetic", "--out-dir", b.string(), "--seed", "42"}) == 0);
  for (const char* f : {"graph.json", "scan1.csv", "scan2.csv", "prior.json"}) CHECK(slurp(a / f) == slurp(b / f));
  const auto truth = load_region_records(a / "truth.json");
  CHECK(truth[0].name == "frontal");
  CHECK(truth[0].mu == doctest::Approx(0.1801));
}

TEST_CASE("simulate without reaction on two equal nodes keeps the regional average")
{
  const auto dir = testing::scratch_dir("cli_simulate");
  std::ofstream(dir / "g.json") << R"({"region_count": 1,
    "nodes": [{"id": 0, "region": 1, "volume": 1.0}, {"id": 1, "region": 1, "volume": 1.0}],
    "edges": [{"i": 0, "j": 1, "weight": 0.3}]})";
  std::ofstream(dir / "c0.csv") << "node_id,value\n0,0.2\n1,0.6\n";
  REQUIRE(fkuq_run({"simulate", "--graph", (dir / "g.json").string(), "--c0", (dir / "c0.csv").string(),
                    "--already-scaled", "--alpha", "0", "--T", "5", "--dt", "0.1", "--out",
                    (dir / "r.csv").string()}) == 0);
  const csv::Table t = csv::read(dir / "r.csv");
  REQUIRE(t.rows.size() == 6);
  for (const auto& row : t.rows) CHECK(row[1] == doctest::Approx(0.4).epsilon(1e-13));
  CHECK(fs::exists(dir / "r.csv.manifest.json"));
}

TEST_CASE("exit codes and single-line errors")
{
  const auto dir = testing::scratch_dir("cli_errors");
  CHECK(fkuq_run({}) == 1);
  CHECK(fkuq_run({"frobnicate"}) == 1);
  CHECK(fkuq_run({"simulate", "--graph", (dir / "missing.json").string(), "--c0", "x.csv", "--alpha", "0",
                  "--out", (dir / "o.csv").string()}) == 1);
  CHECK(fkuq_run({"uq-sc", "--count-only", "--rule", "clenshaw"}) == 1);
  CHECK(fkuq_run({"--help"}) == 0);

  // alpha = 4/dt with c = 0.5 makes the one-node system matrix exactly zero.
  std::ofstream(dir / "g.json") << R"({"region_count": 1, "nodes": [{"id": 0, "region": 1, "volume": 1.0}], "edges": []})";
  std::ofstream(dir / "c0.csv") << "node_id,value\n0,0.5\n";
  CHECK(fkuq_run({"simulate", "--graph", (dir / "g.json").string(), "--c0", (dir / "c0.csv").string(),
                  "--already-scaled", "--alpha", "4", "--T", "1", "--dt", "1", "--out",
                  (dir / "o.csv").string()}) == 2);

  // Outputs never overwrite inputs.
  CHECK(fkuq_run({"simulate", "--graph", (dir / "g.json").string(), "--c0", (dir / "c0.csv").string(),
                  "--already-scaled", "--alpha", "0", "--T", "1", "--dt", "1", "--out",
                  (dir / "c0.csv").string()}) == 1);
  CHECK(slurp(dir / "c0.csv") == "node_id,value\n0,0.5\n");
}

TEST_CASE("uq-sc --count-only reports grid sizes")
{
  CHECK(fkuq_run({"uq-sc", "--count-only", "--level", "4", "--lev2knots", "two-step"}) == 0);
}

TEST_CASE("calibrate then uq-sc: regional means increase over the report times")
{
  const fs::path fx = fixture();
  const auto dir = testing::scratch_dir("cli_pipeline");
  const std::string graph = (fx / "graph.json").string();
  REQUIRE(fkuq_run({"calibrate", "--graph", graph, "--scan1", (fx / "scan1.csv").string(), "--scan2",
                    (fx / "scan2.csv").string(), "--already-scaled", "--prior", (fx / "prior.json").string(),
                    "--steps", "3000", "--burn-in", "500", "--seed", "7", "--out", (dir / "posterior.json").string(),
                    "--chain-out", (dir / "chain.csv").string()}) == 0);
  const auto post = posterior_from_records(load_region_records(dir / "posterior.json"));
  CHECK(post.size() == 7);

  REQUIRE(fkuq_run({"uq-sc", "--graph", graph, "--posterior", (dir / "posterior.json").string(), "--c0",
                    (fx / "scan2.csv").string(), "--already-scaled", "--level", "5", "--out",
                    (dir / "sc.csv").string(), "--grid-out", (dir / "grid.csv").string()}) == 0);
  const csv::Table t = csv::read(dir / "sc.csv");
  REQUIRE(t.rows.size() == 4);
  for (int j = 1; j <= 7; ++j) {
    const auto col = t.column("mean_region_" + std::to_string(j));
    for (std::size_t r = 1; r < t.rows.size(); ++r) CHECK(t.rows[r][col] > t.rows[r - 1][col]);
  }
  CHECK(csv::read(dir / "grid.csv").rows.size() == 792);

  // Report: histograms from the chain and mean +- std bands from the moments.
  REQUIRE(fkuq_run({"report", "--moments", (dir / "sc.csv").string(), "--chain", (dir / "chain.csv").string(),
                    "--burn-in", "500", "--bins", "20", "--out-dir", dir.string()}) == 0);
  CHECK(csv::read(dir / "histograms.csv").rows.size() == 7 * 20);
  CHECK(csv::read(dir / "bands.csv").rows.size() == 4);
}

TEST_CASE("replaying a manifest reproduces outputs byte for byte")
{
  const fs::path fx = fixture();
  const auto dir = testing::scratch_dir("cli_replay");
  std::ofstream(dir / "post.json") << R"({"regions": [
    {"name": "frontal", "mu": 0.1801, "var": 0.0077}, {"name": "temporal", "mu": 0.1421, "var": 0.0079},
    {"name": "parietal", "mu": 0.0627, "var": 0.0060}, {"name": "insular", "mu": 0.1005, "var": 0.0070},
    {"name": "limbic", "mu": 0.1351, "var": 0.0075}, {"name": "occipital", "mu": 0.0545, "var": 0.0086},
    {"name": "subcortical", "mu": 0.1147, "var": 0.0093}]})";
  const std::string out = (dir / "mc.csv").string();
  REQUIRE(fkuq_run({"uq-mc", "--graph", (fx / "graph.json").string(), "--posterior", (dir / "post.json").string(),
                    "--c0", (fx / "scan2.csv").string(), "--already-scaled", "--dt", "0.2", "--samples", "50",
                    "--seed", "9", "--threads", "1", "--out", out}) == 0);
  const std::string first = slurp(out), first_manifest = slurp(out + ".manifest.json");
  fs::copy_file(out + ".manifest.json", dir / "replay.json");
  fs::remove(out);

  // Thread count is not part of the result.
  REQUIRE(fkuq_run({"uq-mc", "--config", (dir / "replay.json").string(), "--threads", "3"}) == 0);
  CHECK(slurp(out) == first);
  const auto m = nlohmann::json::parse(first_manifest);
  CHECK(m["command"] == "uq-mc");
  CHECK(m["options"]["seed"] == 9);
  CHECK(m["inputs"].contains("graph"));
  CHECK(m.dump().find("time\"") == std::string::npos);

  // --config values take precedence over flags.
  nlohmann::json cfg = {{"samples", 20}};
  std::ofstream(dir / "cfg.json") << cfg.dump();
  REQUIRE(fkuq_run({"uq-mc", "--graph", (fx / "graph.json").string(), "--posterior", (dir / "post.json").string(),
                    "--c0", (fx / "scan2.csv").string(), "--already-scaled", "--dt", "0.2", "--samples", "50",
                    "--out", (dir / "cfg.csv").string(), "--config", (dir / "cfg.json").string()}) == 0);
  CHECK(csv::read(dir / "cfg.csv").rows[0].back() == 20.0);
  CHECK(fkuq_run({"uq-sc", "--config", (dir / "replay.json").string()}) == 1);
}

TEST_CASE("report edge cases and per-time error files")
{
  const fs::path fx = fixture();
  const auto dir = testing::scratch_dir("cli_report");
  std::ofstream(dir / "chain.csv") << "step,p_1,p_2,accepted\n1,0.1,0.2,0\n2,0.1,0.2,0\n3,0.1,0.2,0\n";
  std::ofstream(dir / "m.csv") << "time,mean_global,var_global,mean_lobes,var_lobes,std_lobes,mean_region_1,"
                                  "var_region_1,samples\n5,0.3,0,0.3,0,0,0.3,0,10\n";
  REQUIRE(fkuq_run({"report", "--chain", (dir / "chain.csv").string(), "--moments", (dir / "m.csv").string(),
                    "--out-dir", dir.string()}) == 0);
  const csv::Table h = csv::read(dir / "histograms.csv");
  REQUIRE(h.rows.size() == 2);
  CHECK(h.rows[0][h.column("count")] == 3.0);
  CHECK(h.rows[0][h.column("degenerate")] == 1.0);
  const csv::Table b = csv::read(dir / "bands.csv");
  CHECK(b.rows[0][b.column("lower_lobes")] == b.rows[0][b.column("upper_lobes")]);
  CHECK(b.rows[0][b.column("collapsed")] == 1.0);

  const std::string post = (dir / "post.json").string();
  const PosteriorSummary lobes = lobe_posterior();
  save_region_records(make_records(lobe_names(), nullptr, &lobes), post);
  REQUIRE(fkuq_run({"uq-sc-convergence", "--graph", (fx / "graph.json").string(), "--posterior", post, "--c0",
                    (fx / "scan2.csv").string(), "--already-scaled", "--T", "10", "--dt", "0.5", "--times", "5,10",
                    "--levels", "3..8", "--reference-level", "9", "--out", (dir / "err.csv").string()}) == 0);
  REQUIRE(fkuq_run({"report", "--errors", (dir / "err.csv").string(), "--out-dir", dir.string()}) == 0);
  for (const char* f : {"errors_t5.csv", "errors_t10.csv"}) {
    const csv::Table t = csv::read(dir / f);
    CHECK(t.rows.size() == 6);
    CHECK(t.rows.front()[t.column("level")] == 3.0);
    CHECK(t.rows.back()[t.column("evaluations")] == 6435.0);
  }
}
