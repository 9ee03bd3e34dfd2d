#ifndef LPV_SMPC_EXPERIMENT_PIPELINE_HPP
#define LPV_SMPC_EXPERIMENT_PIPELINE_HPP

#include <filesystem>
#include <map>
#include <ostream>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "lpv_smpc/experiment/stages.hpp"

namespace lpv_smpc::experiment {

inline constexpr const char* kVersion = "0.1.0";

enum class Stage { GenerateData, TrainBnn, ValidateModel, GenScenarios, SynthTerminal, Simulate, Report };

struct StageInfo {
  Stage stage;
  const char* command;
  const char* artifact;
  std::vector<Stage> inputs;
  std::vector<std::string> keys;  // own config keys; "x." matches a prefix, "" matches everything
};

inline const std::vector<StageInfo>& stages() {
  using S = Stage;
  static const std::vector<StageInfo> all = {
      {S::GenerateData, "generate-data", "dataset.json", {}, {"plant", "seed", "data."}},
      {S::TrainBnn, "train-bnn", "model.json", {S::GenerateData}, {"bnn."}},
      {S::ValidateModel, "validate-model", "validation.json", {S::GenerateData, S::TrainBnn}, {"validate."}},
      {S::GenScenarios, "gen-scenarios", "scenarios.json", {S::TrainBnn}, {"scenario."}},
      {S::SynthTerminal,
       "synth-terminal",
       "terminal.json",
       {S::GenerateData, S::GenScenarios},
       {"mpc.N", "mpc.Q", "mpc.R", "terminal.doa", "terminal.transform_epochs", "terminal.verify_probes"}},
      {S::Simulate, "simulate", "simulation.json", {S::TrainBnn, S::GenScenarios, S::SynthTerminal}, {"mpc.", "terminal.", "run."}},
      {S::Report,
       "report",
       "report.json",
       {S::GenerateData, S::TrainBnn, S::ValidateModel, S::GenScenarios, S::SynthTerminal, S::Simulate},
       {""}},
  };
  return all;
}

inline const StageInfo& info(Stage s) { return stages()[static_cast<std::size_t>(s)]; }

inline const StageInfo& info(const std::string& command) {
  for (const auto& s : stages())
    if (command == s.command) return s;
  throw ValidationError("unknown command '" + command + "'");
}

namespace detail {

inline void collect_keys(Stage s, std::vector<std::string>& keys) {
  for (const auto& k : info(s).keys) keys.push_back(k);
  for (Stage in : info(s).inputs) collect_keys(in, keys);
}

inline bool key_matches(const std::string& key, const std::string& pattern) {
  if (pattern.empty()) return true;
  if (pattern.back() == '.') return key.compare(0, pattern.size(), pattern) == 0;
  return key == pattern;
}

}  // namespace detail

/// Hash of the configuration entries a stage and its upstream stages depend on.
inline std::string stage_hash(const ExperimentConfig& c, Stage s) {
  std::vector<std::string> keys;
  detail::collect_keys(s, keys);
  std::string text = std::string(info(s).command) + "\n";
  for (const auto& [k, v] : config_entries(c))
    for (const auto& p : keys)
      if (detail::key_matches(k, p)) {
        text += k + " = " + v + "\n";
        break;
      }
  return content_hash(text);
}

inline io::Json versions_json() {
  return {{"lpv_smpc", kVersion},
          {"eigen", std::to_string(EIGEN_WORLD_VERSION) + "." + std::to_string(EIGEN_MAJOR_VERSION) + "." + std::to_string(EIGEN_MINOR_VERSION)},
          {"nlohmann_json", std::to_string(NLOHMANN_JSON_VERSION_MAJOR) + "." + std::to_string(NLOHMANN_JSON_VERSION_MINOR) + "." +
                                std::to_string(NLOHMANN_JSON_VERSION_PATCH)},
          {"compiler", __VERSION__}};
}

/// Result of one command.
struct StageOutcome {
  bool skipped = false;  // outputs were already up to date
  std::string artifact;
  std::vector<std::string> files;  // written files relative to the run directory
};

namespace detail {

namespace fs = std::filesystem;

inline std::string path_in(const std::string& dir, const std::string& name) { return (fs::path(dir) / name).string(); }

inline std::string file_hash(const std::string& dir, const std::string& name) { return content_hash(io::read_text(path_in(dir, name))); }

/// Output collector: writes files under the run directory and records their digests.
class Writer {
 public:
  explicit Writer(std::string dir) : dir_(std::move(dir)) {}

  void text(const std::string& name, const std::string& content) {
    const auto p = fs::path(dir_) / name;
    fs::create_directories(p.parent_path());
    io::write_text(p.string(), content);
    files_[name] = content_hash(content);
  }
  void csv(const std::string& name, const io::CsvTable& t) { text(name, io::to_csv(t)); }

  const std::map<std::string, std::string>& files() const { return files_; }

 private:
  std::string dir_;
  std::map<std::string, std::string> files_;
};

inline io::Json meta_json(const ExperimentConfig& c, Stage s, const std::map<std::string, std::string>& inputs,
                          const std::map<std::string, std::string>& files) {
  return {{"stage", info(s).command}, {"config_hash", stage_hash(c, s)}, {"seed", c.seed}, {"inputs", inputs}, {"files", files}};
}

/**
 * Loads an input artifact and checks it was built from the current configuration, that its data files
 * are the ones it recorded, and that every recorded input still present in the directory is unchanged.
 */
inline io::Json load_verified(const std::string& dir, const ExperimentConfig& c, Stage s) {
  const auto& in = info(s);
  const std::string path = path_in(dir, in.artifact);
  if (!fs::exists(path)) throw ValidationError(std::string("missing input artifact ") + path + " (run `" + in.command + "` first)");
  const io::Json j = io::read_json(path);
  try {
    const auto& m = j.at("meta");
    require(m.at("stage").get<std::string>() == in.command, std::string("artifact ") + path + " was not produced by " + in.command);
    const std::string want = stage_hash(c, s), have = m.at("config_hash").get<std::string>();
    if (have != want)
      throw ValidationError(std::string("stale artifact ") + path + ": built for config hash " + have + ", the current config gives " +
                            want + " (rerun `" + in.command + "`)");
    require(m.at("seed").get<std::uint64_t>() == c.seed, std::string("artifact ") + path + " was built with a different seed");
    for (const auto& [name, h] : m.at("files").items())
      if (!fs::exists(path_in(dir, name)) || file_hash(dir, name) != h.get<std::string>())
        throw ValidationError("artifact file " + path_in(dir, name) + " is missing or does not match " + in.artifact);
    for (const auto& [name, h] : m.at("inputs").items())
      if (fs::exists(path_in(dir, name)) && file_hash(dir, name) != h.get<std::string>())
        throw ValidationError(std::string("mixed provenance: ") + in.artifact + " was built from a different " + name);
  } catch (const io::Json::exception& e) {
    throw ValidationError(std::string("artifact ") + path + " has no valid meta block: " + e.what());
  }
  return j;
}

/// True when the stage's artifact exists with the same config hash, inputs and intact files.
inline bool up_to_date(const std::string& out, const ExperimentConfig& c, Stage s, const std::map<std::string, std::string>& inputs) {
  const std::string path = path_in(out, info(s).artifact);
  if (!fs::exists(path)) return false;
  try {
    const io::Json j = io::Json::parse(io::read_text(path));
    const auto& m = j.at("meta");
    if (m.at("config_hash").get<std::string>() != stage_hash(c, s) || m.at("seed").get<std::uint64_t>() != c.seed) return false;
    if (m.at("inputs").get<std::map<std::string, std::string>>() != inputs) return false;
    for (const auto& [name, h] : m.at("files").items())
      if (!fs::exists(path_in(out, name)) || file_hash(out, name) != h.get<std::string>()) return false;
    return true;
  } catch (const std::exception&) {
    return false;
  }
}

inline lpv::Dataset load_dataset(const std::string& dir, const io::Json& j) {
  lpv::Dataset d = lpv::dataset_from_table(io::read_csv(path_in(dir, "dataset.csv")), j.at("n_x").get<Eigen::Index>(),
                                           j.at("n_u").get<Eigen::Index>(), j.at("n_theta").get<Eigen::Index>());
  d.train = j.at("train").get<std::vector<int>>();
  d.test = j.at("test").get<std::vector<int>>();
  d.validate();
  return d;
}

inline std::string cell_name(int i) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "runs/cell_%03d", i);
  return buf;
}

inline io::CsvTable envelope_table(const CellResult& r) {
  const auto& e = r.envelope;
  const auto nx = r.x0.size();
  io::CsvTable t;
  t.header = {"k"};
  for (const auto& v : {io::numbered("x", nx), io::numbered("lower", nx), io::numbered("upper", nx)})
    t.header.insert(t.header.end(), v.begin(), v.end());
  t.data.resize(e.lower.rows(), 1 + 3 * nx);
  for (Eigen::Index k = 0; k < e.lower.rows(); ++k) {
    t.data(k, 0) = static_cast<double>(k);
    t.data.row(k).segment(1, nx) = r.run.trajectory.states.row(k);
    t.data.row(k).segment(1 + nx, nx) = e.lower.row(k);
    t.data.row(k).segment(1 + 2 * nx, nx) = e.upper.row(k);
  }
  return t;
}

inline io::Json cell_json(const CellResult& r) {
  const double nan = std::numeric_limits<double>::quiet_NaN();
  return {{"index", r.index},
          {"x0", io::vec_json(r.x0)},
          {"seed", r.seed},
          {"completed", r.run.completed},
          {"failed_step", r.run.failed_step},
          {"failure", r.run.failure},
          {"steps_applied", r.run.trajectory.inputs.rows()},
          {"violations", r.run.safety.violations.size()},
          {"x_inf_at_30", r.state_norm_at(30)},
          {"x_inf_final", r.run.trajectory.states.bottomRows(1).cwiseAbs().maxCoeff()},
          {"stage_cost_sum", r.run.stage_cost_sum},
          {"envelope_checked", r.envelope_checked},
          {"envelope_contained", r.envelope_checked && r.envelope.contained},
          {"envelope_misses", r.envelope_checked ? static_cast<double>(r.envelope.misses.size()) : nan}};
}

}  // namespace detail

/**
 * Runs one pipeline command. Inputs are read (and verified) from `input_dir`, outputs go to `out_dir`
 * together with an updated manifest.json. Returns skipped = true when the outputs are already current.
 */
inline StageOutcome run_stage(Stage s, const ExperimentConfig& c, const std::string& out_dir, const std::string& input_dir,
                              std::ostream& log, int threads = 1);

namespace detail {

inline void write_manifest(const std::string& out, const ExperimentConfig& c) {
  io::Json arts = io::Json::object();
  for (const auto& s : stages()) {
    const std::string p = path_in(out, s.artifact);
    if (!fs::exists(p)) continue;
    io::Json entry = {{"fnv1a", file_hash(out, s.artifact)}};
    try {
      const auto j = io::Json::parse(io::read_text(p));
      entry["stage"] = j.at("meta").at("stage");
      entry["config_hash"] = j.at("meta").at("config_hash");
      entry["seed"] = j.at("meta").at("seed");
    } catch (const std::exception&) {
      entry["stage"] = "unreadable";
    }
    arts[s.artifact] = entry;
  }
  io::Json cfg = io::Json::object();
  for (const auto& [k, v] : config_entries(c)) cfg[k] = v;
  const io::Json m = {{"config_hash", config_hash(c)}, {"seed", c.seed}, {"versions", versions_json()}, {"config", cfg}, {"artifacts", arts}};
  io::write_json(path_in(out, "manifest.json"), m);
}

}  // namespace detail

inline StageOutcome run_stage(Stage s, const ExperimentConfig& c, const std::string& out_dir, const std::string& input_dir,
                              std::ostream& log, int threads) {
  using namespace detail;
  c.validate();
  fs::create_directories(out_dir);
  const auto& si = info(s);
  std::map<Stage, io::Json> in;
  std::map<std::string, std::string> digests;
  for (Stage i : si.inputs) {
    in[i] = load_verified(input_dir, c, i);
    digests[info(i).artifact] = file_hash(input_dir, info(i).artifact);
  }
  StageOutcome out;
  out.artifact = si.artifact;
  if (up_to_date(out_dir, c, s, digests)) {
    out.skipped = true;
    log << si.command << ": up to date (" << si.artifact << ")\n";
    write_manifest(out_dir, c);
    return out;
  }
  const auto plant = lpv::benchmark_plant(c.plant);
  Writer w(out_dir);
  io::Json payload;
  auto model_in = [&] { return bnn::json_model(in.at(Stage::TrainBnn)); };
  auto data_in = [&] { return load_dataset(input_dir, in.at(Stage::GenerateData)); };

  switch (s) {
    case Stage::GenerateData: {
      const auto id = generate_data(c);
      w.csv("dataset.csv", lpv::dataset_table(id.data));
      payload = lpv::dataset_sidecar(id.data, id.protocol);
      log << "generate-data: " << id.data.size() << " records (" << id.data.train.size() << " train), redraw attempt "
          << id.protocol.attempt << "\n";
      break;
    }
    case Stage::TrainBnn: {
      const auto t = train_model(c, data_in());
      payload = bnn::model_json(t.model);
      payload["training"] = {{"pretrain_epochs", c.pretrain_epochs}, {"epochs", c.epochs}, {"final_pretrain_loss", t.pretrain_loss},
                             {"final_elbo_loss", t.elbo_loss}};
      log << "train-bnn: final ELBO loss " << t.elbo_loss << "\n";
      break;
    }
    case Stage::ValidateModel: {
      const auto data = data_in();
      const auto v = validate_model(c, model_in(), data);
      const auto te = bnn::Batch::test(data);
      const auto nx = data.n_x();
      io::CsvTable t;
      t.header = {"record"};
      for (const auto& h : {io::numbered("x", nx), io::numbered("mean", nx), io::numbered("std", nx)}) t.header.insert(t.header.end(), h.begin(), h.end());
      t.data.resize(te.size(), 1 + 3 * nx);
      for (Eigen::Index n = 0; n < te.size(); ++n) {
        t.data(n, 0) = data.test[static_cast<std::size_t>(n)];
        t.data.row(n).segment(1, nx) = te.xnext.col(n).transpose();
        t.data.row(n).segment(1 + nx, nx) = v.test_prediction.mean.col(n).transpose();
        t.data.row(n).segment(1 + 2 * nx, nx) = v.test_prediction.std.col(n).transpose();
      }
      w.csv("predictions.csv", t);
      payload = {{"bfr_train", io::vec_json(v.bfr_train)}, {"bfr_test", io::vec_json(v.bfr_test)}, {"band", c.band},
                 {"coverage", v.coverage},                {"posterior_samples", c.posterior_samples}, {"calibration", bnn::calibration_json(v.calibration)}};
      log << "validate-model: test BFR [" << v.bfr_test.transpose() << "], " << c.band << "-sigma coverage " << v.coverage << "\n";
      break;
    }
    case Stage::GenScenarios: {
      const auto st = generate_scenarios(c, model_in());
      payload = scenario::stage_json(st);
      payload["worst_case_mass"] = st.p.tail(st.size() - st.n_clusters).sum();
      log << "gen-scenarios: p = [" << st.p.transpose() << "]\n";
      break;
    }
    case Stage::SynthTerminal: {
      const auto st = scenario::json_stage(in.at(Stage::GenScenarios));
      const auto t = synthesize_terminal(c, st, data_in());
      payload = terminal::terminal_json(*t.ingredients);
      const auto& cert = t.certificate;
      payload["certificate"] = {{"probes", cert.probes},
                                {"passed", cert.passed},
                                {"worst_decrease_slack", cert.worst_decrease_slack},
                                {"worst_input_violation", cert.worst_input_violation},
                                {"worst_set_violation", cert.worst_set_violation},
                                {"witness", cert.witness}};
      payload["transform_mse"] = {{"train", t.transform.train_mse}, {"test", t.transform.test_mse}};
      log << "synth-terminal: q = " << t.ingredients->q() << ", terminal set rows " << t.ingredients->omega.rows() << ", decrease check "
          << cert.passed << "/" << cert.probes << "\n";
      break;
    }
    case Stage::Simulate: {
      const auto m = model_in();
      const auto st = scenario::json_stage(in.at(Stage::GenScenarios));
      auto term = std::make_shared<const terminal::TerminalIngredients>(terminal::json_terminal(in.at(Stage::SynthTerminal)));
      const auto cells = simulate_matrix(c, m, term, st, threads);
      io::Json arr = io::Json::array();
      int completed = 0, clean = 0;
      for (const auto& r : cells) {
        const std::string base = cell_name(r.index);
        w.csv(base + ".csv", mpc::run_log_table(r.run));
        w.text(base + ".json", mpc::run_diagnostics_json(r.run).dump(1) + "\n");
        if (r.envelope_checked) w.csv(base + "_envelope.csv", envelope_table(r));
        arr.push_back(cell_json(r));
        completed += r.run.completed ? 1 : 0;
        clean += r.run.safety.violations.empty() ? 1 : 0;
      }
      payload = {{"cells", arr}};
      log << "simulate: " << cells.size() << " runs, " << completed << " completed, " << clean << " without violations\n";
      break;
    }
    case Stage::Report: {
      const auto& val = in.at(Stage::ValidateModel);
      const auto st = scenario::json_stage(in.at(Stage::GenScenarios));
      const auto term = terminal::json_terminal(in.at(Stage::SynthTerminal));
      const auto& sim = in.at(Stage::Simulate);
      const Vec bt = io::json_vec(val.at("bfr_train")), bs = io::json_vec(val.at("bfr_test"));
      const Vec beta = io::json_vec(val.at("calibration").at("beta")), rate = io::json_vec(val.at("calibration").at("channel_rate"));
      io::CsvTable bfr{{"channel", "bfr_train", "bfr_test"}, Mat(bt.size(), 3)};
      io::CsvTable cal{{"channel", "beta", "violation_rate"}, Mat(beta.size(), 3)};
      for (Eigen::Index i = 0; i < bt.size(); ++i) bfr.data.row(i) << static_cast<double>(i + 1), bt(i), bs(i);
      for (Eigen::Index i = 0; i < beta.size(); ++i) cal.data.row(i) << static_cast<double>(i + 1), beta(i), rate(i);
      io::CsvTable prob{{"scenario", "p", "worst_case"}, Mat(st.size(), 3)};
      for (int i = 0; i < st.size(); ++i) prob.data.row(i) << static_cast<double>(i + 1), st.p(i), i >= st.n_clusters ? 1.0 : 0.0;
      w.csv("report/bfr.csv", bfr);
      w.csv("report/calibration.csv", cal);
      w.csv("report/scenario_probabilities.csv", prob);
      if (plant.n_x() == 2) {
        w.csv("report/state_set_vertices.csv", geometry::vertices_csv(geometry::Polytope::box(plant.state_set)));
        w.csv("report/terminal_set_vertices.csv", geometry::vertices_csv(term.omega));
        w.csv("report/doa_vertices.csv", geometry::vertices_csv(term.cn));
      }
      const auto& cells = sim.at("cells");
      io::CsvTable cl;
      cl.header = {"cell"};
      for (const auto& h : io::numbered("x0", plant.n_x())) cl.header.push_back(h);
      for (const char* h : {"seed", "completed", "failed_step", "violations", "x_inf_at_30", "stage_cost_sum", "envelope_contained"}) cl.header.emplace_back(h);
      cl.data.resize(static_cast<Eigen::Index>(cells.size()), static_cast<Eigen::Index>(cl.header.size()));
      io::Json by_x0 = io::Json::array();
      const double nan = std::numeric_limits<double>::quiet_NaN();
      for (std::size_t i = 0; i < cells.size(); ++i) {
        const auto& r = cells[i];
        const Vec x0 = io::json_vec(r.at("x0"));
        const auto row = static_cast<Eigen::Index>(i);
        cl.data(row, 0) = r.at("index").get<double>();
        cl.data.row(row).segment(1, x0.size()) = x0.transpose();
        Eigen::Index col = 1 + x0.size();
        cl.data(row, col++) = r.at("seed").get<double>();
        cl.data(row, col++) = r.at("completed").get<bool>() ? 1.0 : 0.0;
        cl.data(row, col++) = r.at("failed_step").get<double>();
        cl.data(row, col++) = r.at("violations").get<double>();
        cl.data(row, col++) = r.at("x_inf_at_30").is_number() ? r.at("x_inf_at_30").get<double>() : nan;
        cl.data(row, col++) = r.at("stage_cost_sum").get<double>();
        cl.data(row, col++) = r.at("envelope_contained").get<bool>() ? 1.0 : 0.0;
      }
      w.csv("report/closed_loop_summary.csv", cl);
      for (const auto& x0 : c.x0) {
        int runs = 0, completed = 0, clean = 0, contained = 0;
        for (const auto& r : cells) {
          if ((io::json_vec(r.at("x0")) - x0).norm() != 0.0) continue;
          ++runs;
          completed += r.at("completed").get<bool>() ? 1 : 0;
          clean += r.at("violations").get<int>() == 0 ? 1 : 0;
          contained += r.at("envelope_contained").get<bool>() ? 1 : 0;
        }
        by_x0.push_back({{"x0", io::vec_json(x0)}, {"runs", runs}, {"completed", completed}, {"violation_free", clean}, {"envelope_contained", contained}});
      }
      payload = {{"identification",
                  {{"bfr_train", val.at("bfr_train")}, {"bfr_test", val.at("bfr_test")}, {"coverage", val.at("coverage")}, {"band", val.at("band")}}},
                 {"calibration", {{"beta", val.at("calibration").at("beta")}, {"delta_hat", val.at("calibration").at("delta_hat")}}},
                 {"scenarios", {{"p", io::vec_json(st.p)}, {"worst_case_mass", st.p.tail(st.size() - st.n_clusters).sum()},
                                {"max_mean_residual", st.match.mean_residual.size() ? st.match.mean_residual.cwiseAbs().maxCoeff() : 0.0}}},
                 {"terminal", {{"q", term.q()}, {"terminal_set_rows", term.omega.rows()}, {"doa_rows", term.cn.rows()},
                               {"certificate", in.at(Stage::SynthTerminal).at("certificate")}}},
                 {"closed_loop", by_x0},
                 {"plot_data", {{"trajectories", "runs/cell_NNN.csv: k, x_i, u_i, theta_i, objective, feasible, min_margin"},
                                {"envelopes", "runs/cell_NNN_envelope.csv: k, x_i, lower_i, upper_i"},
                                {"predictions", "predictions.csv: record, x_i, mean_i, std_i"},
                                {"sets", "report/*_vertices.csv: closed counterclockwise vertex loops x1, x2"}}}};
      log << "report: " << w.files().size() << " tables\n";
      break;
    }
  }
  payload["meta"] = meta_json(c, s, digests, w.files());
  const std::string text = payload.dump(1) + "\n";
  io::write_text(path_in(out_dir, si.artifact), text);
  out.files.push_back(si.artifact);
  for (const auto& [name, _] : w.files()) out.files.push_back(name);
  write_manifest(out_dir, c);
  return out;
}

/// Every stage in order; the output directory doubles as the input directory after the first stage.
inline std::vector<StageOutcome> run_all(const ExperimentConfig& c, const std::string& out_dir, std::ostream& log, int threads = 1) {
  std::vector<StageOutcome> r;
  for (const auto& s : stages()) r.push_back(run_stage(s.stage, c, out_dir, out_dir, log, threads));
  return r;
}

}  // namespace lpv_smpc::experiment

#endif  // LPV_SMPC_EXPERIMENT_PIPELINE_HPP
