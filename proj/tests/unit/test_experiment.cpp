#include <gtest/gtest.h>

#include <cstdlib>
#include <filesystem>
#include <sstream>

#include <unistd.h>

#include "lpv_smpc/experiment.hpp"

using namespace lpv_smpc;
using namespace lpv_smpc::experiment;
namespace fs = std::filesystem;

namespace {

// A pipeline small enough for unit tests.
const char* kTiny = R"(
plant = double_integrator   # trailing comment
bnn.pretrain_epochs = 100
bnn.epochs = 100
validate.posterior_samples = 50
scenario.trajectories = 20
scenario.n_mc = 20
terminal.transform_epochs = 50
terminal.verify_probes = 20
terminal.doa = false
run.x0 = 2.7, -1.8
run.seeds = 2
run.steps = 8
run.envelope_models = 20
)";

std::string fresh_dir(const std::string& name) {
  const auto p = fs::temp_directory_path() / ("lpv_smpc_test_" + std::to_string(::getpid()) + "_" + name);
  fs::remove_all(p);
  return p.string();
}

std::string slurp(const fs::path& p) { return io::read_text(p.string()); }

}  // namespace

TEST(Config, DefaultsFollowThePlant) {
  const auto di = parse_config("plant = double_integrator\n");
  EXPECT_EQ(di.architecture, "affine");
  EXPECT_EQ(di.epochs, 1000);
  EXPECT_DOUBLE_EQ(di.lr, 0.01);
  EXPECT_EQ(di.data_samples, 500);
  EXPECT_EQ(di.data_train, 400);
  EXPECT_EQ(di.trajectories, 500);
  EXPECT_DOUBLE_EQ(di.beta_m, 1.0);
  EXPECT_EQ(di.x0.size(), 5u);
  const auto mimo = parse_config("plant = mimo_nonlinear\n");
  EXPECT_EQ(mimo.architecture, "deep_elu");
  EXPECT_EQ(mimo.epochs, 10000);
  EXPECT_DOUBLE_EQ(mimo.lr, 0.001);
  EXPECT_EQ(mimo.data_samples, 1100);
  EXPECT_EQ(mimo.data_train, 800);
  EXPECT_DOUBLE_EQ(mimo.beta_m, 2.0);
  EXPECT_EQ(mimo.R.size(), 2);
  EXPECT_EQ(mimo.x0.size(), 4u);
}

TEST(Config, OverridesCommentsAndLists) {
  const auto c = parse_config(kTiny);
  EXPECT_EQ(c.epochs, 100);
  EXPECT_FALSE(c.compute_doa);
  ASSERT_EQ(c.x0.size(), 1u);
  EXPECT_DOUBLE_EQ(c.x0[0](0), 2.7);
  EXPECT_DOUBLE_EQ(c.x0[0](1), -1.8);
  const auto m = parse_config("plant = double_integrator\nrun.x0 = 1,2; -3 , 4\nmpc.Q = 2, 0.5\n");
  ASSERT_EQ(m.x0.size(), 2u);
  EXPECT_DOUBLE_EQ(m.x0[1](0), -3.0);
  EXPECT_DOUBLE_EQ(m.Q(1), 0.5);
}

TEST(Config, CanonicalTextRoundTrips) {
  const auto c = parse_config(kTiny);
  const std::string text = canonical_text(c);
  const auto again = parse_config(text);
  EXPECT_EQ(canonical_text(again), text);
  EXPECT_EQ(config_hash(again), config_hash(c));
  // Key order does not matter.
  EXPECT_EQ(config_hash(parse_config("mpc.N = 8\nplant = double_integrator\n")), config_hash(parse_config("plant = double_integrator\nmpc.N = 8\n")));
}

TEST(Config, RejectsMalformedInput) {
  EXPECT_THROW(parse_config("bnn.epochs = 10\n"), ValidationError);  // no plant
  EXPECT_THROW(parse_config("plant = pendulum\n"), ValidationError);
  EXPECT_THROW(parse_config("plant = double_integrator\nbnn.epoch = 10\n"), ValidationError);
  EXPECT_THROW(parse_config("plant = double_integrator\nbnn.epochs = ten\n"), ValidationError);
  EXPECT_THROW(parse_config("plant = double_integrator\nbnn.epochs = 10.5\n"), ValidationError);
  EXPECT_THROW(parse_config("plant = double_integrator\nbnn.lr = 1e999\n"), ValidationError);
  EXPECT_THROW(parse_config("plant = double_integrator\nmpc.regenerate = yes\n"), ValidationError);
  EXPECT_THROW(parse_config("plant = double_integrator\nmpc.N = 5\nmpc.N = 6\n"), ValidationError);
  EXPECT_THROW(parse_config("plant = double_integrator\njust text\n"), ValidationError);
  EXPECT_THROW(parse_config("plant = double_integrator\nseed = -1\n"), ValidationError);
}

TEST(Config, RangesValidatedBeforeCompute) {
  const std::string base = "plant = double_integrator\n";
  for (const char* bad : {"data.train = 499", "data.train = 1", "bnn.lr = 0", "bnn.architecture = lstm", "validate.delta = 1",
                          "scenario.steps = 3", "scenario.clusters = 0", "mpc.N_b = 11", "mpc.N = 0", "mpc.Q = 1", "mpc.R = 1, 1",
                          "mpc.Q = 1, -1", "run.x0 = 1, 2, 3", "run.scheduling = sinusoid", "run.seeds = 0", "run.steps = 0"})
    EXPECT_THROW(parse_config(base + bad + "\n"), ValidationError) << bad;
  auto c = default_config("double_integrator");
  c.terminal_set = false;
  c.explicit_law = true;
  EXPECT_THROW(c.validate(), ValidationError);
}

TEST(Config, StageHashesTrackOnlyUpstreamKeys) {
  const auto a = parse_config(kTiny);
  auto b = a;
  b.steps = 9;
  EXPECT_NE(config_hash(a), config_hash(b));
  for (Stage s : {Stage::GenerateData, Stage::TrainBnn, Stage::ValidateModel, Stage::GenScenarios, Stage::SynthTerminal})
    EXPECT_EQ(stage_hash(a, s), stage_hash(b, s)) << info(s).command;
  EXPECT_NE(stage_hash(a, Stage::Simulate), stage_hash(b, Stage::Simulate));
  EXPECT_NE(stage_hash(a, Stage::Report), stage_hash(b, Stage::Report));
  auto c = a;
  c.epochs = 101;
  EXPECT_EQ(stage_hash(a, Stage::GenerateData), stage_hash(c, Stage::GenerateData));
  EXPECT_NE(stage_hash(a, Stage::TrainBnn), stage_hash(c, Stage::TrainBnn));
  EXPECT_NE(stage_hash(a, Stage::Simulate), stage_hash(c, Stage::Simulate));
  EXPECT_EQ(stage_hash(a, Stage::ValidateModel) == stage_hash(a, Stage::TrainBnn), false);
  // N enters the terminal synthesis (controlled invariant set), N_b only the controller.
  auto d = a;
  d.N_b = 2;
  EXPECT_EQ(stage_hash(a, Stage::SynthTerminal), stage_hash(d, Stage::SynthTerminal));
  d.N = 9;
  EXPECT_NE(stage_hash(a, Stage::SynthTerminal), stage_hash(d, Stage::SynthTerminal));
}

TEST(Concurrency, ThreadCountFromEnvironment) {
  ::setenv("LPV_SMPC_THREADS", "3", 1);
  EXPECT_EQ(thread_count(), 3);
  ::setenv("LPV_SMPC_THREADS", "0", 1);
  EXPECT_THROW(thread_count(), ValidationError);
  ::setenv("LPV_SMPC_THREADS", "two", 1);
  EXPECT_THROW(thread_count(), ValidationError);
  ::unsetenv("LPV_SMPC_THREADS");
  EXPECT_GE(thread_count(), 1);
}

TEST(Concurrency, ParallelForVisitsEveryIndexAndRethrowsLowestFailure) {
  std::vector<int> hit(100, 0);
  parallel_for(100, 4, [&](int i) { hit[static_cast<std::size_t>(i)] += 1; });
  for (int h : hit) EXPECT_EQ(h, 1);
  try {
    parallel_for(50, 4, [](int i) {
      if (i == 7 || i == 31) throw NumericalError("cell " + std::to_string(i));
    });
    FAIL() << "expected an exception";
  } catch (const NumericalError& e) {
    EXPECT_STREQ(e.what(), "cell 7");
  }
}

class PipelineTest : public ::testing::Test {
 protected:
  static void SetUpTestSuite() {
    dir_ = fresh_dir("pipeline");
    std::ostringstream log;
    outcomes_ = run_all(parse_config(kTiny), dir_, log, 2);
  }
  static std::string dir_;
  static std::vector<StageOutcome> outcomes_;
};
std::string PipelineTest::dir_;
std::vector<StageOutcome> PipelineTest::outcomes_;

TEST_F(PipelineTest, WritesSevenArtifactsAndManifest) {
  ASSERT_EQ(outcomes_.size(), 7u);
  for (const auto& s : stages()) {
    EXPECT_TRUE(fs::exists(fs::path(dir_) / s.artifact)) << s.artifact;
    const auto j = io::read_json((fs::path(dir_) / s.artifact).string());
    EXPECT_EQ(j.at("meta").at("stage"), s.command);
    EXPECT_EQ(j.at("meta").at("seed"), 1);
  }
  for (const auto& o : outcomes_) EXPECT_FALSE(o.skipped);
  const auto m = io::read_json((fs::path(dir_) / "manifest.json").string());
  const auto c = parse_config(kTiny);
  EXPECT_EQ(m.at("config_hash"), config_hash(c));
  EXPECT_EQ(m.at("artifacts").size(), 7u);
  EXPECT_EQ(m.at("versions").at("lpv_smpc"), kVersion);
  EXPECT_EQ(m.at("artifacts").at("model.json").at("config_hash"), stage_hash(c, Stage::TrainBnn));
  for (const char* f : {"dataset.csv", "predictions.csv", "runs/cell_000.csv", "runs/cell_001_envelope.csv", "report/bfr.csv",
                        "report/terminal_set_vertices.csv", "report/closed_loop_summary.csv", "report/scenario_probabilities.csv"})
    EXPECT_TRUE(fs::exists(fs::path(dir_) / f)) << f;
}

TEST_F(PipelineTest, ReportMatchesStageOutputs) {
  const auto rep = io::read_json((fs::path(dir_) / "report.json").string());
  const auto val = io::read_json((fs::path(dir_) / "validation.json").string());
  EXPECT_EQ(rep.at("identification").at("bfr_test"), val.at("bfr_test"));
  const auto p = io::json_vec(rep.at("scenarios").at("p"));
  EXPECT_NEAR(p.sum(), 1.0, 1e-9);
  const auto tab = io::read_csv((fs::path(dir_) / "report/scenario_probabilities.csv").string());
  for (Eigen::Index i = 0; i < p.size(); ++i) EXPECT_EQ(tab.data(i, tab.column("p")), p(i));
  const auto cl = io::read_csv((fs::path(dir_) / "report/closed_loop_summary.csv").string());
  EXPECT_EQ(cl.data.rows(), 2);
}

TEST_F(PipelineTest, RerunIsANoOp) {
  std::map<std::string, std::string> before;
  for (const auto& e : fs::recursive_directory_iterator(dir_))
    if (e.is_regular_file()) before[e.path().string()] = slurp(e.path());
  std::ostringstream log;
  const auto again = run_all(parse_config(kTiny), dir_, log, 1);
  for (const auto& o : again) EXPECT_TRUE(o.skipped) << o.artifact;
  for (const auto& [p, text] : before) EXPECT_EQ(slurp(p), text) << p;
}

TEST_F(PipelineTest, FreshRunIsByteIdenticalForAnyThreadCount) {
  const std::string other = fresh_dir("pipeline_rerun");
  std::ostringstream log;
  run_all(parse_config(kTiny), other, log, 1);
  int files = 0;
  for (const auto& e : fs::recursive_directory_iterator(dir_)) {
    if (!e.is_regular_file()) continue;
    const auto rel = fs::relative(e.path(), dir_);
    ASSERT_TRUE(fs::exists(fs::path(other) / rel)) << rel;
    EXPECT_EQ(slurp(e.path()), slurp(fs::path(other) / rel)) << rel;
    ++files;
  }
  EXPECT_GT(files, 20);
}

TEST_F(PipelineTest, StaleArtifactsAreRefused) {
  auto c = parse_config(kTiny);
  c.epochs = 101;  // model.json no longer matches
  std::ostringstream log;
  const std::string out = fresh_dir("pipeline_stale");
  try {
    run_stage(Stage::GenScenarios, c, out, dir_, log);
    FAIL() << "expected a stale-artifact error";
  } catch (const ValidationError& e) {
    EXPECT_NE(std::string(e.what()).find("stale artifact"), std::string::npos) << e.what();
  }
  auto s = parse_config(kTiny);
  s.seed = 2;
  EXPECT_THROW(run_stage(Stage::TrainBnn, s, out, dir_, log), ValidationError);
  // Unrelated keys leave upstream artifacts usable.
  auto r = parse_config(kTiny);
  r.steps = 6;
  EXPECT_NO_THROW(run_stage(Stage::Simulate, r, out, dir_, log));
  EXPECT_THROW(run_stage(Stage::Report, r, dir_, dir_, log), ValidationError);  // simulation.json is for 8 steps
}

TEST_F(PipelineTest, TamperedOrMixedInputsAreRefused) {
  const std::string copy = fresh_dir("pipeline_tamper");
  fs::copy(dir_, copy, fs::copy_options::recursive);
  const auto c = parse_config(kTiny);
  std::ostringstream log;
  // A data file that no longer matches its artifact.
  {
    std::string csv = slurp(fs::path(copy) / "runs/cell_000.csv");
    csv[csv.size() - 2] = csv[csv.size() - 2] == '1' ? '2' : '1';
    io::write_text((fs::path(copy) / "runs/cell_000.csv").string(), csv);
    EXPECT_THROW(run_stage(Stage::Report, c, copy, copy, log), ValidationError);
    fs::copy_file(fs::path(dir_) / "runs/cell_000.csv", fs::path(copy) / "runs/cell_000.csv", fs::copy_options::overwrite_existing);
  }
  // An artifact claiming a different upstream model.
  {
    auto j = io::read_json((fs::path(copy) / "scenarios.json").string());
    j["meta"]["inputs"]["model.json"] = "0000000000000000";
    io::write_text((fs::path(copy) / "scenarios.json").string(), j.dump(1) + "\n");
    try {
      run_stage(Stage::SynthTerminal, c, copy, copy, log);
      FAIL() << "expected a provenance error";
    } catch (const ValidationError& e) {
      EXPECT_NE(std::string(e.what()).find("mixed provenance"), std::string::npos) << e.what();
    }
  }
  EXPECT_THROW(run_stage(Stage::TrainBnn, c, copy, fresh_dir("pipeline_empty"), log), ValidationError);
}

TEST_F(PipelineTest, ArtifactsReloadIntoEquivalentObjects) {
  const auto c = parse_config(kTiny);
  const auto id = generate_data(c);
  const auto dj = io::read_json((fs::path(dir_) / "dataset.json").string());
  EXPECT_EQ(dj.at("train").get<std::vector<int>>(), id.data.train);
  const auto model = bnn::json_model(io::read_json((fs::path(dir_) / "model.json").string()));
  const auto st = scenario::json_stage(io::read_json((fs::path(dir_) / "scenarios.json").string()));
  const auto again = generate_scenarios(c, model);
  EXPECT_EQ(again.p, st.p);
  EXPECT_EQ(again.realizations, st.realizations);
}
