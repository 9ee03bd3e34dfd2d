#ifndef LPV_SMPC_LPV_DATA_HPP
#define LPV_SMPC_LPV_DATA_HPP

#include <algorithm>
#include <cmath>
#include <numbers>
#include <numeric>
#include <string>
#include <vector>

#include "lpv_smpc/io/csv.hpp"
#include "lpv_smpc/io/json.hpp"
#include "lpv_smpc/lpv/system.hpp"
#include "lpv_smpc/rng.hpp"

namespace lpv_smpc::lpv {

/// theta_i(k) = clip(offset_i + amplitude_i * sin(omega_i * k + phase_i)), or i.i.d. uniform over Theta.
struct SchedulingGenerator {
  enum class Kind { Sinusoid, Uniform };
  Kind kind = Kind::Sinusoid;
  Vec offset;
  Vec amplitude;
  Vec omega;  // rad/sample
  Vec phase;
  bool random_phase = false;

  static SchedulingGenerator sinusoid(Vec offset, Vec amplitude, Vec omega, bool random_phase) {
    SchedulingGenerator g;
    g.kind = Kind::Sinusoid;
    g.phase = Vec::Zero(offset.size());
    g.offset = std::move(offset);
    g.amplitude = std::move(amplitude);
    g.omega = std::move(omega);
    g.random_phase = random_phase;
    return g;
  }

  static SchedulingGenerator uniform() {
    SchedulingGenerator g;
    g.kind = Kind::Uniform;
    return g;
  }
};

struct InputGenerator {
  enum class Kind { Prbs, Uniform, Zero };
  Kind kind = Kind::Prbs;
  double amplitude = 0.01;  // Prbs: +-amplitude
  double lower = -1.0;      // Uniform
  double upper = 1.0;
};

struct ExcitationProtocol {
  SchedulingGenerator scheduling;
  InputGenerator input;
  int samples = 500;
  int train_count = 400;
  Vec x0;
  std::uint64_t seed = 0;
  /// Redraw counter; attempt r > 0 draws every signal from sub-stream r of the seed.
  int attempt = 0;
};

/// Records ((theta(k), x(k), u(k)), x(k+1)) with a train/test partition of record indices.
struct Dataset {
  Mat theta;
  Mat x;
  Mat u;
  Mat xnext;
  std::vector<int> train;
  std::vector<int> test;

  Eigen::Index size() const { return x.rows(); }
  Eigen::Index n_x() const { return x.cols(); }
  Eigen::Index n_u() const { return u.cols(); }
  Eigen::Index n_theta() const { return theta.cols(); }

  /// Rows selected by an index list.
  static Mat rows_of(const Mat& m, const std::vector<int>& idx) {
    Mat out(static_cast<Eigen::Index>(idx.size()), m.cols());
    for (std::size_t i = 0; i < idx.size(); ++i) out.row(static_cast<Eigen::Index>(i)) = m.row(idx[i]);
    return out;
  }

  Dataset subset(const std::vector<int>& idx) const {
    Dataset d;
    d.theta = rows_of(theta, idx);
    d.x = rows_of(x, idx);
    d.u = rows_of(u, idx);
    d.xnext = rows_of(xnext, idx);
    d.train.resize(idx.size());
    std::iota(d.train.begin(), d.train.end(), 0);
    return d;
  }

  Dataset train_set() const { return subset(train); }
  Dataset test_set() const { return subset(test); }

  void validate(const LpvPlant* plant = nullptr) const {
    const auto n = size();
    require(theta.rows() == n && u.rows() == n && xnext.rows() == n, "Dataset: record count mismatch");
    require(xnext.cols() == x.cols(), "Dataset: state width mismatch");
    std::vector<int> all(train);
    all.insert(all.end(), test.begin(), test.end());
    std::sort(all.begin(), all.end());
    bool covering = static_cast<Eigen::Index>(all.size()) == n;
    for (std::size_t i = 0; covering && i < all.size(); ++i) covering = all[i] == static_cast<int>(i);
    require(covering, "Dataset: split must be disjoint and cover all records");
    if (plant) {
      for (Eigen::Index k = 0; k < n; ++k) {
        require(plant->state_set.contains(x.row(k).transpose()) && plant->state_set.contains(xnext.row(k).transpose()),
                "Dataset: record " + std::to_string(k) + " leaves the state set");
        require(plant->input_set.contains(u.row(k).transpose()), "Dataset: record " + std::to_string(k) + " leaves the input set");
        require(plant->sched_set.contains(theta.row(k).transpose()),
                "Dataset: record " + std::to_string(k) + " leaves the scheduling set");
      }
    }
  }
};

/// Seeded random permutation split: the first train_count indices form the training set.
inline void random_split(Dataset& d, int train_count, Rng rng) {
  const int n = static_cast<int>(d.size());
  require(train_count >= 0 && train_count <= n, "random_split: train count out of range");
  std::vector<int> perm(static_cast<std::size_t>(n));
  std::iota(perm.begin(), perm.end(), 0);
  for (int i = n - 1; i > 0; --i) std::swap(perm[static_cast<std::size_t>(i)], perm[rng.below(static_cast<std::uint64_t>(i) + 1)]);
  d.train.assign(perm.begin(), perm.begin() + train_count);
  d.test.assign(perm.begin() + train_count, perm.end());
  std::sort(d.train.begin(), d.train.end());
  std::sort(d.test.begin(), d.test.end());
}

/// Scheduling signal for k = 0..K-1 as a K x n_theta matrix.
inline Mat scheduling_signal(const SchedulingGenerator& g, const Box& Theta, int K, Rng rng) {
  const auto nt = Theta.dim();
  Mat out(K, nt);
  if (g.kind == SchedulingGenerator::Kind::Uniform) {
    for (int k = 0; k < K; ++k) out.row(k) = rng.uniform_in(Theta).transpose();
    return out;
  }
  require(g.offset.size() == nt && g.amplitude.size() == nt && g.omega.size() == nt && g.phase.size() == nt,
          "SchedulingGenerator: dimension mismatch with scheduling set");
  Vec phase = g.phase;
  if (g.random_phase)
    for (Eigen::Index i = 0; i < nt; ++i) phase(i) = rng.uniform(0.0, 2.0 * std::numbers::pi);
  for (int k = 0; k < K; ++k)
    for (Eigen::Index i = 0; i < nt; ++i) {
      const double v = g.offset(i) + g.amplitude(i) * std::sin(g.omega(i) * k + phase(i));
      out(k, i) = std::clamp(v, Theta.lower(i), Theta.upper(i));
    }
  return out;
}

inline Mat input_signal(const InputGenerator& g, Eigen::Index n_u, int K, Rng rng) {
  Mat out = Mat::Zero(K, n_u);
  for (int k = 0; k < K; ++k)
    for (Eigen::Index j = 0; j < n_u; ++j) {
      switch (g.kind) {
        case InputGenerator::Kind::Prbs: out(k, j) = rng.uniform() < 0.5 ? -g.amplitude : g.amplitude; break;
        case InputGenerator::Kind::Uniform: out(k, j) = rng.uniform(g.lower, g.upper); break;
        case InputGenerator::Kind::Zero: break;
      }
    }
  return out;
}

/**
 * Open-loop excitation experiment on the plant. Aborts (ValidationError naming
 * the record index) when a state leaves the state set or an input leaves the
 * input set.
 */
inline Dataset generate_excitation_data(const LpvPlant& plant, const ExcitationProtocol& p) {
  require(p.samples >= 1, "generate_excitation_data: need at least one sample");
  require(p.x0.size() == plant.n_x(), "generate_excitation_data: x0 dimension mismatch");
  require(plant.state_set.contains(p.x0), "generate_excitation_data: x0 outside the state set");
  const Rng root = p.attempt == 0 ? Rng(p.seed) : Rng(p.seed).split(static_cast<std::uint64_t>(p.attempt));
  Dataset d;
  d.theta = scheduling_signal(p.scheduling, plant.sched_set, p.samples, root.split("excitation.scheduling"));
  d.u = input_signal(p.input, plant.n_u(), p.samples, root.split("excitation.input"));
  d.x.resize(p.samples, plant.n_x());
  d.xnext.resize(p.samples, plant.n_x());
  Vec x = p.x0;
  for (int k = 0; k < p.samples; ++k) {
    if (!plant.input_set.contains(d.u.row(k).transpose()))
      throw ValidationError("excitation input leaves the input set at record " + std::to_string(k));
    d.x.row(k) = x.transpose();
    x = step(plant, x, d.u.row(k).transpose(), d.theta.row(k).transpose());
    if (!plant.state_set.contains(x))
      throw ValidationError("excitation too aggressive: state leaves the state set at record " + std::to_string(k));
    d.xnext.row(k) = x.transpose();
  }
  random_split(d, p.train_count, root.split("excitation.split"));
  return d;
}

/**
 * Rejection sampling over redraws: attempts r = 0, 1, ... until the excitation
 * stays inside the state set. The accepted attempt is written back into p.
 */
inline Dataset generate_excitation_data_retrying(const LpvPlant& plant, ExcitationProtocol& p, int max_attempts = 50) {
  std::string last;
  for (int r = 0; r < max_attempts; ++r) {
    p.attempt = r;
    try {
      return generate_excitation_data(plant, p);
    } catch (const ValidationError& e) {
      last = e.what();
      if (last.find("excitation too aggressive") == std::string::npos) throw;
    }
  }
  throw ValidationError("no admissible excitation in " + std::to_string(max_attempts) + " redraws; last: " + last);
}

inline io::CsvTable dataset_table(const Dataset& d) {
  io::CsvTable t;
  t.header = {"k"};
  for (const auto& v : {io::numbered("theta", d.n_theta()), io::numbered("x", d.n_x()), io::numbered("u", d.n_u()),
                        io::numbered("xnext", d.n_x())})
    t.header.insert(t.header.end(), v.begin(), v.end());
  const auto n = d.size();
  t.data.resize(n, static_cast<Eigen::Index>(t.header.size()));
  for (Eigen::Index k = 0; k < n; ++k) {
    t.data(k, 0) = static_cast<double>(k);
    t.data.row(k).segment(1, d.n_theta()) = d.theta.row(k);
    t.data.row(k).segment(1 + d.n_theta(), d.n_x()) = d.x.row(k);
    t.data.row(k).segment(1 + d.n_theta() + d.n_x(), d.n_u()) = d.u.row(k);
    t.data.row(k).segment(1 + d.n_theta() + d.n_x() + d.n_u(), d.n_x()) = d.xnext.row(k);
  }
  return t;
}

inline Dataset dataset_from_table(const io::CsvTable& t, Eigen::Index n_x, Eigen::Index n_u, Eigen::Index n_theta) {
  require(t.data.cols() == 1 + n_theta + 2 * n_x + n_u, "dataset CSV: unexpected column count");
  Dataset d;
  d.theta = t.data.middleCols(1, n_theta);
  d.x = t.data.middleCols(1 + n_theta, n_x);
  d.u = t.data.middleCols(1 + n_theta + n_x, n_u);
  d.xnext = t.data.middleCols(1 + n_theta + n_x + n_u, n_x);
  return d;
}

inline io::Json protocol_json(const ExcitationProtocol& p) {
  io::Json j;
  j["seed"] = p.seed;
  j["attempt"] = p.attempt;
  j["samples"] = p.samples;
  j["train_count"] = p.train_count;
  j["x0"] = io::vec_json(p.x0);
  const auto& s = p.scheduling;
  if (s.kind == SchedulingGenerator::Kind::Uniform) {
    j["scheduling"] = {{"kind", "uniform"}};
  } else {
    j["scheduling"] = {{"kind", "sinusoid"},         {"offset", io::vec_json(s.offset)},
                       {"amplitude", io::vec_json(s.amplitude)}, {"omega", io::vec_json(s.omega)},
                       {"phase", io::vec_json(s.phase)},         {"random_phase", s.random_phase}};
  }
  const auto& in = p.input;
  const char* kind = in.kind == InputGenerator::Kind::Prbs ? "prbs" : in.kind == InputGenerator::Kind::Uniform ? "uniform" : "zero";
  j["input"] = {{"kind", kind}, {"amplitude", in.amplitude}, {"lower", in.lower}, {"upper", in.upper}};
  return j;
}

/// Sidecar metadata: seed, protocol and split indices.
inline io::Json dataset_sidecar(const Dataset& d, const ExcitationProtocol& p) {
  return io::Json{{"protocol", protocol_json(p)}, {"train", d.train}, {"test", d.test},
                  {"n_x", d.n_x()}, {"n_u", d.n_u()}, {"n_theta", d.n_theta()}};
}

inline void write_dataset(const std::string& csv_path, const std::string& json_path, const Dataset& d,
                          const ExcitationProtocol& p) {
  io::write_csv(csv_path, dataset_table(d));
  io::write_json(json_path, dataset_sidecar(d, p));
}

inline Dataset read_dataset(const std::string& csv_path, const std::string& json_path) {
  const auto meta = io::read_json(json_path);
  Dataset d = dataset_from_table(io::read_csv(csv_path), meta.at("n_x").get<Eigen::Index>(),
                                 meta.at("n_u").get<Eigen::Index>(), meta.at("n_theta").get<Eigen::Index>());
  d.train = meta.at("train").get<std::vector<int>>();
  d.test = meta.at("test").get<std::vector<int>>();
  d.validate();
  return d;
}

}  // namespace lpv_smpc::lpv

#endif  // LPV_SMPC_LPV_DATA_HPP
