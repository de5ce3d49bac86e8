#include <gtest/gtest.h>

#include <cstdlib>
#include <sstream>

#include "cli.hpp"
#include "test_util.hpp"

using namespace axislab;
using axislab::testing::gaussian_rows;
using axislab::testing::temp_dir;

namespace {

struct Run {
  int code = 0;
  std::string out;
  std::string err;
  json j() const { return json::parse(out); }
};

Run run(std::vector<std::string> args) {
  std::ostringstream out, err;
  Run r;
  r.code = cli::run(args, out, err);
  r.out = out.str();
  r.err = err.str();
  return r;
}

const std::string kSpec = std::string(AXISLAB_DATA_DIR) + "/planted_cell.json";

// Two clouds far apart along the first coordinate.
std::pair<std::string, std::string> separable_pair(const fs::path& dir) {
  RowMatrix pos = gaussian_rows(40, 4, 1, 0.5);
  RowMatrix neg = gaussian_rows(40, 4, 2, 0.5);
  pos.col(0).array() += 5.0;
  neg.col(0).array() -= 5.0;
  save_embeddings(EmbeddingMatrix::from(pos, "sep"), dir / "pos.emb");
  save_embeddings(EmbeddingMatrix::from(neg, "sep"), dir / "neg.emb");
  return {(dir / "pos.emb").string(), (dir / "neg.emb").string()};
}

const fs::path& bundle_dir() {
  static const fs::path dir = [] {
    auto d = temp_dir("cli_bundle");
    const auto r = run({"synth", "--spec", kSpec, "--out", d.string()});
    EXPECT_EQ(r.code, 0) << r.err;
    return d;
  }();
  return dir;
}

}  // namespace

TEST(Cli, MetricsOnSeparablePools) {
  const auto [pos, neg] = separable_pair(temp_dir("cli_sep"));
  const auto r = run({"metrics", "--pos", pos, "--neg", neg});
  ASSERT_EQ(r.code, 0) << r.err;
  EXPECT_DOUBLE_EQ(r.j()["results"]["auroc"].get<double>(), 1.0);
  EXPECT_EQ(r.j()["kind"], "metrics");
}

TEST(Cli, PredictAtZeroEpsIsAllZero) {
  const auto cell = (bundle_dir() / "cell.json").string();
  const auto r = run({"predict", "--cell", cell, "--axis", "typ_HC3", "--pool", "HC3-AI", "--eps", "0"});
  ASSERT_EQ(r.code, 0) << r.err;
  const auto row = r.j()["results"]["rows"][0];
  ASSERT_EQ(row["predicted"].size(), 500u);
  for (const auto& v : row["predicted"]) EXPECT_EQ(v.get<double>(), 0.0);
}

TEST(Cli, SweepOnPlantedSpecPasses) {
  const auto r = run({"sweep", "--spec", kSpec});
  ASSERT_EQ(r.code, 0) << r.err;
  const auto res = r.j()["results"];
  EXPECT_EQ(res["verdict"], "PASS");
  EXPECT_GE(res["relative_fpr_reduction_selected"].get<double>(), 0.5);
  EXPECT_EQ(res["selection"]["oracle"]["chosen"]["axis_id"], "typ_HC3");
}

TEST(Cli, SelectReadsSavedParetoCell) {
  const auto dir = temp_dir("cli_select");
  const auto sw = run({"sweep", "--spec", kSpec});
  ASSERT_EQ(sw.code, 0);
  write_file(dir / "pc.json", canonical_json(sw.j()["results"]["pareto_cell"]));
  const auto r = run({"select", "--pareto", (dir / "pc.json").string()});
  ASSERT_EQ(r.code, 0) << r.err;
  EXPECT_EQ(r.j()["results"]["selection"]["agreement"], sw.j()["results"]["selection"]["agreement"]);
}

TEST(Cli, UnknownFlagExitsTwoWithUsage) {
  const auto r = run({"metrics", "--bogus"});
  EXPECT_EQ(r.code, 2);
  EXPECT_NE((r.out + r.err).find("Usage"), std::string::npos);
}

TEST(Cli, ValidationErrorExitsTwo) {
  const auto r = run({"metrics", "--pos", "/nonexistent/p.emb", "--neg", "/nonexistent/n.emb"});
  EXPECT_EQ(r.code, 2);
  EXPECT_EQ(json::parse(r.err)["error"], "validation");
}

TEST(Cli, ComputationErrorExitsOne) {
  const auto [pos, neg] = separable_pair(temp_dir("cli_degenerate"));
  const auto r = run({"metrics", "--pos", pos, "--neg", pos});
  EXPECT_EQ(r.code, 1);
  EXPECT_EQ(json::parse(r.err)["error"], "computation");
}

TEST(Cli, ReportIsByteIdenticalAcrossRuns) {
  const auto a = temp_dir("cli_report_a");
  const auto b = temp_dir("cli_report_b");
  ASSERT_EQ(run({"report", "--spec", kSpec, "--k", "5", "--out", a.string()}).code, 0);
  ASSERT_EQ(run({"report", "--spec", kSpec, "--k", "5", "--out", b.string()}).code, 0);
  std::size_t n = 0;
  for (const auto& e : fs::directory_iterator(a)) {
    EXPECT_EQ(read_file(e.path()), read_file(b / e.path().filename())) << e.path();
    ++n;
  }
  EXPECT_EQ(n, 4u);
  for (const char* f : {"report.json", "metric_blocks.csv", "roc_cell.svg", "scatter_selected.svg"}) EXPECT_TRUE(fs::exists(a / f)) << f;
}

TEST(Cli, SynthWritesLoadableBundle) {
  for (const char* f : {"cell.json", "head.json", "manifest.jsonl", "HC3-AI.emb", "axis_typ_HC3.json"})
    EXPECT_TRUE(fs::exists(bundle_dir() / f)) << f;
  EXPECT_NO_THROW(load_cell(bundle_dir() / "cell.json"));
}

TEST(Cli, AlignEmitsCosineMatrix) {
  const auto r = run({"align", "--axis", (bundle_dir() / "axis_class.json").string(), "--axis",
                      (bundle_dir() / "axis_typ_HC3.json").string()});
  ASSERT_EQ(r.code, 0) << r.err;
  const auto cos = r.j()["results"]["cosine"];
  EXPECT_DOUBLE_EQ(cos[0][0].get<double>(), 1.0);
  EXPECT_NEAR(cos[0][1].get<double>(), 0.0, 1e-12);
}

TEST(Cli, DeployRuleTable) {
  const auto r = run({"deploy-rule", "--norms", "a=17.47,b=7.74,c=6.41,d=5.11,e=4.77,f=3.00"});
  ASSERT_EQ(r.code, 0) << r.err;
  const auto res = r.j()["results"];
  EXPECT_EQ(res["n_success"], 4);
  EXPECT_EQ(res["n_failure"], 2);
  EXPECT_EQ(res["rows"].size(), 6u);
}

TEST(Cli, BinaryExitCodes) {
  const std::string bin = AXISLAB_BIN;
  EXPECT_EQ(WEXITSTATUS(std::system((bin + " --help > /dev/null 2>&1").c_str())), 0);
  EXPECT_EQ(WEXITSTATUS(std::system((bin + " metrics --bogus > /dev/null 2>&1").c_str())), 2);
  EXPECT_EQ(WEXITSTATUS(std::system((bin + " metrics --pos /nonexistent > /dev/null 2>&1").c_str())), 2);
}
