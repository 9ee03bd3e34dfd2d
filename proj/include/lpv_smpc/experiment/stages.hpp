#ifndef LPV_SMPC_EXPERIMENT_STAGES_HPP
#define LPV_SMPC_EXPERIMENT_STAGES_HPP

#include <algorithm>
#include <atomic>
#include <cstdlib>
#include <exception>
#include <memory>
#include <thread>
#include <vector>

#include "lpv_smpc/bnn.hpp"
#include "lpv_smpc/experiment/config.hpp"
#include "lpv_smpc/lpv.hpp"
#include "lpv_smpc/mpc.hpp"
#include "lpv_smpc/scenario.hpp"
#include "lpv_smpc/terminal.hpp"

// In-memory computations behind the pipeline commands. Each takes the config and the
// products of the earlier stages; the file layer in pipeline.hpp only serializes.
namespace lpv_smpc::experiment {

struct Identification {
  lpv::Dataset data;
  lpv::ExcitationProtocol protocol;  // with the accepted redraw attempt
};

inline Identification generate_data(const ExperimentConfig& c) {
  const auto plant = lpv::benchmark_plant(c.plant);
  Identification id;
  id.protocol = lpv::default_protocol(c.plant, c.seed);
  id.protocol.samples = c.data_samples;
  id.protocol.train_count = c.data_train;
  id.data = lpv::generate_excitation_data_retrying(plant, id.protocol);
  return id;
}

struct TrainedModel {
  bnn::BnnLpvModel model;
  double pretrain_loss = 0.0;  // final epoch
  double elbo_loss = 0.0;
};

inline bnn::TrainConfig train_config(const ExperimentConfig& c) {
  bnn::TrainConfig t;
  t.pretrain_epochs = c.pretrain_epochs;
  t.pretrain_lr = c.pretrain_lr;
  t.epochs = c.epochs;
  t.lr = c.lr;
  t.n_mc = c.train_n_mc;
  t.sigma_init = c.sigma_init;
  t.seed = c.seed;
  return t;
}

inline TrainedModel train_model(const ExperimentConfig& c, const lpv::Dataset& data) {
  TrainedModel t;
  t.model = bnn::make_model(c.architecture, static_cast<int>(data.n_x()), static_cast<int>(data.n_u()), static_cast<int>(data.n_theta()));
  const auto h = bnn::train(t.model, data, train_config(c));
  t.pretrain_loss = h.pretrain_loss.empty() ? 0.0 : h.pretrain_loss.back();
  t.elbo_loss = h.elbo_loss.back();
  return t;
}

struct ModelValidation {
  Vec bfr_train, bfr_test;  // one-step posterior mean, percent per channel
  double coverage = 0.0;    // fraction of test records inside mean +- band * std on every channel
  bnn::CalibrationResult calibration;
  bnn::PosteriorPrediction test_prediction;
};

inline ModelValidation validate_model(const ExperimentConfig& c, const bnn::BnnLpvModel& m, const lpv::Dataset& data) {
  const auto plant = lpv::benchmark_plant(c.plant);
  const auto tr = bnn::Batch::train(data), te = bnn::Batch::test(data);
  ModelValidation v;
  const auto ptr = bnn::predict_posterior(m, tr.theta, tr.x, tr.u, c.posterior_samples, c.seed);
  v.test_prediction = bnn::predict_posterior(m, te.theta, te.x, te.u, c.posterior_samples, c.seed);
  v.bfr_train = lpv::bfr(tr.xnext.transpose(), ptr.mean.transpose());
  v.bfr_test = lpv::bfr(te.xnext.transpose(), v.test_prediction.mean.transpose());
  v.coverage = bnn::band_coverage(te.xnext, v.test_prediction, c.band);
  v.calibration = bnn::calibrate_from_residuals(te.xnext - v.test_prediction.mean, v.test_prediction.std, c.delta, plant.state_set);
  return v;
}

inline scenario::StageSettings stage_settings(const ExperimentConfig& c) {
  scenario::StageSettings s;
  s.clusters = c.clusters;
  s.beta_m = c.beta_m;
  return s;
}

/// Scheduling-set-wide scenario set shared by every stage after the first.
inline scenario::StageScenarios generate_scenarios(const ExperimentConfig& c, const bnn::BnnLpvModel& m) {
  const auto plant = lpv::benchmark_plant(c.plant);
  const auto traj = scenario::sample_scheduling_trajectories(plant.sched_set, c.trajectories, c.scenario_steps, {}, c.seed);
  const auto samples = scenario::evaluate_matrix_samples(m, traj, c.scenario_n_mc, c.seed);
  return scenario::build_stage(samples.front(), m.n_x, m.n_u, stage_settings(c), c.seed);
}

inline lpv::CostConfig cost_config(const ExperimentConfig& c) {
  return lpv::CostConfig(Mat(c.Q.asDiagonal()), Mat(c.R.asDiagonal()));
}

struct TerminalProducts {
  std::shared_ptr<terminal::TerminalIngredients> ingredients;
  terminal::DecreaseCertificate certificate;
  terminal::TransformReport transform;
};

inline TerminalProducts synthesize_terminal(const ExperimentConfig& c, const scenario::StageScenarios& stage, const lpv::Dataset& data) {
  const auto plant = lpv::benchmark_plant(c.plant);
  const auto X = geometry::Polytope::box(plant.state_set), U = geometry::Polytope::box(plant.input_set);
  const auto cost = cost_config(c);
  terminal::TerminalSettings ts;
  ts.N = c.N;
  ts.compute_doa = c.compute_doa;
  TerminalProducts p;
  p.ingredients = std::make_shared<terminal::TerminalIngredients>(
      terminal::synth_terminal(terminal::extract_extreme_realizations(stage), cost.Q, cost.R, X, U, ts));
  terminal::TransformConfig tc;
  tc.epochs = c.transform_epochs;
  tc.seed = c.seed;
  p.ingredients->transform =
      terminal::train_transform_net(p.ingredients->affine, bnn::Batch::train(data), bnn::Batch::test(data), tc, &p.transform);
  p.certificate = terminal::verify_decrease(*p.ingredients, U, c.verify_probes, c.seed);
  return p;
}

inline mpc::RunConfig run_config(const ExperimentConfig& c, std::uint64_t run_seed) {
  mpc::RunConfig r;
  r.N = c.N;
  r.N_b = c.N_b;
  r.steps = c.steps;
  r.n_mc = c.scenario_n_mc;
  r.stage = stage_settings(c);
  r.regenerate = c.regenerate;
  r.terminal_cost = c.terminal_cost;
  r.terminal_set = c.terminal_set;
  r.explicit_terminal_law = c.explicit_law;
  r.seed = run_seed;
  return r;
}

/// One (x0, seed) cell of the run matrix.
struct CellResult {
  int index = 0;
  Vec x0;
  std::uint64_t seed = 0;
  Mat theta;  // scheduling signal
  mpc::RunResult run;
  bool envelope_checked = false;
  bnn::EnvelopeReport envelope;

  /// ||x(k)||_inf, or NaN when the run stopped before step k.
  double state_norm_at(int k) const {
    if (k < 0 || k >= run.trajectory.states.rows()) return std::numeric_limits<double>::quiet_NaN();
    return run.trajectory.states.row(k).cwiseAbs().maxCoeff();
  }
};

inline CellResult simulate_cell(const ExperimentConfig& c, const bnn::BnnLpvModel& m,
                                std::shared_ptr<const terminal::TerminalIngredients> ingredients, const scenario::StageScenarios& offline,
                                const Vec& x0, std::uint64_t run_seed, int index = 0) {
  const auto plant = lpv::benchmark_plant(c.plant);
  CellResult r;
  r.index = index;
  r.x0 = x0;
  r.seed = run_seed;
  r.theta = mpc::iid_uniform_schedule(plant.sched_set, c.steps, run_seed);
  r.run = mpc::receding_horizon_run(plant, m, std::move(ingredients), offline, cost_config(c), r.theta, x0, run_config(c, run_seed));
  const auto& t = r.run.trajectory;
  if (t.inputs.rows() > 0) {
    r.envelope = bnn::envelope_check(m, r.theta, x0, t.inputs, c.envelope_models, t.states, run_seed);
    r.envelope_checked = true;
  }
  return r;
}

/// Worker count for the run matrix: LPV_SMPC_THREADS, else the hardware concurrency.
inline int thread_count() {
  if (const char* e = std::getenv("LPV_SMPC_THREADS")) {
    const long long n = detail::to_int("LPV_SMPC_THREADS", detail::trim(e));
    require(n >= 1 && n <= 1024, "LPV_SMPC_THREADS must lie in [1, 1024]");
    return static_cast<int>(n);
  }
  return std::max(1, static_cast<int>(std::thread::hardware_concurrency()));
}

/// Runs f(0..n-1) on up to `threads` workers; the exception of the lowest failing index is rethrown.
template <class F>
void parallel_for(int n, int threads, F&& f) {
  std::vector<std::exception_ptr> errors(static_cast<std::size_t>(n));
  std::atomic<int> next{0};
  auto work = [&] {
    for (int i = next++; i < n; i = next++) {
      try {
        f(i);
      } catch (...) {
        errors[static_cast<std::size_t>(i)] = std::current_exception();
      }
    }
  };
  const int w = std::min(threads, n);
  std::vector<std::thread> pool;
  for (int i = 1; i < w; ++i) pool.emplace_back(work);
  work();
  for (auto& t : pool) t.join();
  for (auto& e : errors)
    if (e) std::rethrow_exception(e);
}

/// Cells ordered by x0 then seed: index = i_x0 * run.seeds + i_seed.
inline std::vector<CellResult> simulate_matrix(const ExperimentConfig& c, const bnn::BnnLpvModel& m,
                                               std::shared_ptr<const terminal::TerminalIngredients> ingredients,
                                               const scenario::StageScenarios& offline, int threads = 1) {
  const int n = static_cast<int>(c.x0.size()) * c.run_seeds;
  std::vector<CellResult> cells(static_cast<std::size_t>(n));
  parallel_for(n, threads, [&](int i) {
    const auto& x0 = c.x0[static_cast<std::size_t>(i / c.run_seeds)];
    const std::uint64_t seed = c.first_run_seed + static_cast<std::uint64_t>(i % c.run_seeds);
    cells[static_cast<std::size_t>(i)] = simulate_cell(c, m, ingredients, offline, x0, seed, i);
  });
  return cells;
}

}  // namespace lpv_smpc::experiment

#endif  // LPV_SMPC_EXPERIMENT_STAGES_HPP
