#pragma once

// Experiment harness: declarative scenario configs (JSON), synthetic
// heterogeneous-field generators, truth simulation, reduction and
// estimation runs, metrics, and plot-ready CSV emission.  Every run is
// reproducible from (config, seed).

#include <cstdint>
#include <filesystem>
#include <fstream>
#include <functional>
#include <optional>
#include <random>
#include <string>
#include <vector>

#include <json.hpp>

#include "agrohydro/csv.hpp"
#include "agrohydro/field_model.hpp"
#include "agrohydro/grid.hpp"
#include "agrohydro/mhe.hpp"
#include "agrohydro/reduction.hpp"
#include "agrohydro/soil.hpp"

namespace agrohydro {

inline constexpr const char* kVersion = "0.1.0";
inline constexpr int kSchemaVersion = 1;

// ---------------------------------------------------------------------------
// configuration

struct ParamRange {
  double lo = 0.0, hi = 0.0;
};

struct SoilMapConfig {
  std::string type = "uniform";  // uniform | synthetic | file
  SoilParams uniform = loam();
  std::uint64_t seed = 0;
  ParamRange k_sat{2.889e-6, 2.889e-6}, alpha{3.6, 3.6}, n{1.56, 1.56},
      theta_s{0.43, 0.43}, theta_r{0.078, 0.078};
  double s_r = 1e-4, lambda = 0.5;
  std::string path;
};

struct InitialConfig {
  std::string type = "uniform";  // uniform | clustered | file
  double h0 = -1.0;
  std::uint64_t seed = 0;
  int levels = 4;
  double h_min = -1.2, h_max = -0.8;
  std::string path;
};

struct TimeConfig {
  double t0 = 0.0, t1 = 0.0, dt = 360.0;
  int substeps = 1;
  int steps() const { return static_cast<int>(std::llround((t1 - t0) / dt)); }
};

struct EstimatorConfig {
  std::string type = "adaptive";  // adaptive | full_order
  EstimatorSettings settings;
  double prior_scale = 0.5;  ///< prior = scale * true initial state
};

struct ReductionConfig {
  double threshold = 0.05;
  std::string policy = "per_step";  // per_step | fixed_window | input_change
  double window = 7200.0;
};

struct OutputConfig {
  std::string dir = "runs/out";
  bool save_states = true;
  std::vector<double> map_times;  ///< emit layer error maps at these times [s]
};

struct Scenario {
  std::string name = "scenario";
  std::uint64_t seed = 0;
  int n_r = 5, n_theta = 8, n_z = 10;
  double radius = 10.0, depth = 0.15;
  SoilMapConfig soil;
  InitialConfig initial;
  PivotSchedule schedule;
  SinkConfig sink;
  NoiseSpec noise;
  TimeConfig time;
  SensorSpec sensors;
  double x_lb = -10.0, x_ub = 0.0;
  EstimatorConfig estimator;
  ReductionConfig reduction;
  OutputConfig outputs;
};

inline Scenario parse_scenario(const nlohmann::json& j) {
  Scenario s;
  if (j.value("schema_version", kSchemaVersion) != kSchemaVersion)
    throw std::invalid_argument("unsupported config schema_version");
  s.name = j.value("name", s.name);
  s.seed = j.value("seed", std::uint64_t{0});

  const auto& g = j.at("grid");
  s.n_r = g.at("n_r");
  s.n_theta = g.at("n_theta");
  s.n_z = g.at("n_z");
  s.radius = g.at("radius_m");
  s.depth = g.at("depth_m");

  if (j.contains("soil")) {
    const auto& so = j["soil"];
    s.soil.type = so.value("type", "uniform");
    auto rd = [&](const char* key, double dflt) { return so.value(key, dflt); };
    if (s.soil.type == "uniform") {
      s.soil.uniform = SoilParams{rd("k_sat", 2.889e-6), rd("alpha", 3.6),
                                  rd("n", 1.56),         rd("theta_s", 0.43),
                                  rd("theta_r", 0.078),  rd("s_r", 1e-4),
                                  rd("lambda", 0.5)};
    } else if (s.soil.type == "synthetic") {
      s.soil.seed = so.value("seed", std::uint64_t{0});
      auto rng = [&](const char* key, ParamRange dflt) {
        if (!so.contains(key)) return dflt;
        return ParamRange{so[key][0], so[key][1]};
      };
      s.soil.k_sat = rng("k_sat", s.soil.k_sat);
      s.soil.alpha = rng("alpha", s.soil.alpha);
      s.soil.n = rng("n", s.soil.n);
      s.soil.theta_s = rng("theta_s", s.soil.theta_s);
      s.soil.theta_r = rng("theta_r", s.soil.theta_r);
      s.soil.s_r = so.value("s_r", 1e-4);
      s.soil.lambda = so.value("lambda", 0.5);
    } else if (s.soil.type == "file") {
      s.soil.path = so.at("path");
    } else {
      throw std::invalid_argument("unknown soil type " + s.soil.type);
    }
  }

  if (j.contains("initial")) {
    const auto& ic = j["initial"];
    s.initial.type = ic.value("type", "uniform");
    s.initial.h0 = ic.value("h0_m", -1.0);
    s.initial.seed = ic.value("seed", std::uint64_t{0});
    s.initial.levels = ic.value("levels", 4);
    s.initial.h_min = ic.value("h_min_m", -1.2);
    s.initial.h_max = ic.value("h_max_m", -0.8);
    s.initial.path = ic.value("path", std::string{});
  }

  if (j.contains("schedule")) {
    const auto& sc = j["schedule"];
    s.schedule.angular_speed = sc.value("omega_rad_per_s", 0.0);
    s.schedule.phase0 = sc.value("phase_rad", 0.0);
    if (sc.contains("segments"))
      for (const auto& seg : sc["segments"])
        s.schedule.segments.push_back(
            {seg.at("t_start_s"), seg.at("t_end_s"), seg.at("rate_m_per_s")});
    if (sc.contains("radial_weights"))
      s.schedule.radial_weights = sc["radial_weights"].get<std::vector<double>>();
  }

  if (j.contains("sink")) {
    const auto& sk = j["sink"];
    s.sink.k_c = sk.value("k_c", 0.0);
    s.sink.pet = sk.value("pet_m_per_s", 0.0);
    s.sink.root_depth = sk.value("root_depth_m", s.depth);
  }

  if (j.contains("noise")) {
    const auto& nz = j["noise"];
    s.noise.process_std = nz.value("process_std_m", 0.0);
    s.noise.measurement_std = nz.value("measurement_std_m", 0.0);
    s.noise.seed = nz.value("seed", s.seed);
    s.noise.dt_ref = nz.value("dt_ref_s", 0.0);
  }

  const auto& t = j.at("time");
  s.time.t0 = t.value("t0_s", 0.0);
  s.time.t1 = t.at("t1_s");
  s.time.dt = t.value("dt_s", 360.0);
  s.time.substeps = t.value("substeps", 1);

  if (j.contains("sensors")) {
    const auto& se = j["sensors"];
    if (se.is_array()) {
      s.sensors.explicit_indices = se.get<std::vector<int>>();
    } else {
      s.sensors.by_rule = true;
      s.sensors.depth = se.at("depth_m");
      s.sensors.count = se.at("count");
    }
  }

  if (j.contains("bounds")) {
    s.x_lb = j["bounds"].value("x_lb_m", -10.0);
    s.x_ub = j["bounds"].value("x_ub_m", 0.0);
  }

  if (j.contains("estimator")) {
    const auto& e = j["estimator"];
    s.estimator.type = e.value("type", "adaptive");
    s.estimator.prior_scale = e.value("prior_scale", 0.5);
    auto& st = s.estimator.settings;
    st.horizon = e.value("horizon", 3);
    st.l = e.value("l", 1.0);
    st.q_value = e.value("q_diag", 1e-6);
    st.r_value = e.value("r_diag", 0.01);
    st.threshold = e.value("threshold_m", s.reduction.threshold);
    st.w_bound_sigmas = e.value("w_bound_sigmas", 6.0);
    st.x_lb = s.x_lb;
    st.x_ub = s.x_ub;
    if (e.contains("solver")) {
      const auto& so = e["solver"];
      st.nls.tol_g = so.value("tol_g", 1e-6);
      st.nls.tol_x = so.value("tol_x", 1e-12);
      st.nls.max_iter = so.value("max_iter", 60);
      st.nls.lambda0 = so.value("damping", 0.0);
    }
  }

  if (j.contains("reduction")) {
    const auto& r = j["reduction"];
    s.reduction.threshold = r.value("threshold_m", 0.05);
    s.reduction.policy = r.value("policy", "per_step");
    s.reduction.window = r.value("window_s", 7200.0);
  }

  if (j.contains("outputs")) {
    const auto& o = j["outputs"];
    s.outputs.dir = o.value("dir", s.outputs.dir);
    s.outputs.save_states = o.value("save_states", true);
    if (o.contains("map_times_s"))
      s.outputs.map_times = o["map_times_s"].get<std::vector<double>>();
  }
  return s;
}

inline Scenario load_scenario(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open config " + path.string());
  nlohmann::json j;
  in >> j;
  return parse_scenario(j);
}

// ---------------------------------------------------------------------------
// synthetic field generators

namespace detail {

/// Smooth random scalar field on the grid: a seeded mixture of low-order
/// harmonics in (r, theta, depth), normalized to [-1, 1].
class HarmonicField {
 public:
  HarmonicField(std::uint64_t seed, int n_modes = 6) {
    std::mt19937_64 rng(seed * 0x9e3779b97f4a7c15ull + 0x853c49e6748fea9bull);
    std::uniform_real_distribution<double> uni(0.0, 2.0 * std::numbers::pi);
    std::uniform_int_distribution<int> order(0, 3);
    std::uniform_real_distribution<double> amp(0.3, 1.0);
    double total = 0.0;
    for (int k = 0; k < n_modes; ++k) {
      Mode m;
      m.a = amp(rng);
      m.m_theta = order(rng);
      m.p_r = order(rng);
      m.q_z = order(rng);
      m.phi = uni(rng);
      m.psi = uni(rng);
      m.chi = uni(rng);
      total += m.a;
      modes_.push_back(m);
    }
    norm_ = 1.0 / total;
  }

  /// rho, theta in [0,1] x [0,2pi); depth_frac in [0,1]
  double operator()(double rho, double theta, double depth_frac) const {
    double v = 0.0;
    for (const auto& m : modes_)
      v += m.a * std::cos(m.m_theta * theta + m.phi) *
           std::cos(std::numbers::pi * m.p_r * rho + m.psi) *
           std::cos(std::numbers::pi * m.q_z * depth_frac + m.chi);
    return v * norm_;
  }

 private:
  struct Mode {
    double a, phi, psi, chi;
    int m_theta, p_r, q_z;
  };
  std::vector<Mode> modes_;
  double norm_ = 1.0;
};

}  // namespace detail

/// Spatially correlated per-node soil parameters, clamped to the
/// configured ranges; zero-width ranges reproduce the uniform values.
inline std::vector<SoilParams> synth_soil_map(const CylindricalGrid& g,
                                              const SoilMapConfig& cfg) {
  struct Entry {
    ParamRange range;
    detail::HarmonicField field;
  };
  std::vector<Entry> fields;
  const ParamRange* ranges[] = {&cfg.k_sat, &cfg.alpha, &cfg.n, &cfg.theta_s,
                                &cfg.theta_r};
  for (int p = 0; p < 5; ++p) {
    if (ranges[p]->lo > ranges[p]->hi)
      throw std::invalid_argument("synth_soil_map: inverted parameter range");
    fields.push_back({*ranges[p],
                      detail::HarmonicField(cfg.seed * 31 + p + 1)});
  }
  std::vector<SoilParams> soil(g.size());
  for (int i = 0; i < g.size(); ++i) {
    const auto [ir, it, iz] = g.coords(i);
    const double rho = g.r_center(ir) / g.radius;
    const double th = (it + 0.5) * g.dtheta;
    const double df = g.depth_center(iz) / g.depth;
    double v[5];
    for (int p = 0; p < 5; ++p) {
      const double x = 0.5 * (fields[p].field(rho, th, df) + 1.0);
      v[p] = fields[p].range.lo + x * (fields[p].range.hi - fields[p].range.lo);
    }
    soil[i] = SoilParams{v[0], v[1], v[2], v[3], v[4], cfg.s_r, cfg.lambda};
    soil[i].validate();
  }
  return soil;
}

/// Quantized smooth moisture field: `levels` discrete head values in
/// [h_min, h_max], constant along depth (surface pattern replicated).
inline VectorXd clustered_initial_condition(const CylindricalGrid& g,
                                            std::uint64_t seed, int levels,
                                            double h_min, double h_max) {
  if (levels < 1) throw std::invalid_argument("clustered IC: levels must be >= 1");
  if (!(h_min <= h_max)) throw std::invalid_argument("clustered IC: h_min > h_max");
  detail::HarmonicField field(seed);
  VectorXd x0(g.size());
  for (int i = 0; i < g.size(); ++i) {
    const auto [ir, it, iz] = g.coords(i);
    const double v = field(g.r_center(ir) / g.radius, (it + 0.5) * g.dtheta, 0.0);
    int bin = static_cast<int>((v + 1.0) * 0.5 * levels);
    bin = std::clamp(bin, 0, levels - 1);
    x0[i] = levels == 1 ? 0.5 * (h_min + h_max)
                        : h_min + bin * (h_max - h_min) / (levels - 1);
  }
  return x0;
}

inline std::vector<SoilParams> load_soil_csv(const std::filesystem::path& path,
                                             int n_nodes) {
  auto rows = read_csv(path);
  if (static_cast<int>(rows.size()) != n_nodes)
    throw std::runtime_error("soil csv: expected " + std::to_string(n_nodes) +
                             " rows");
  std::vector<SoilParams> soil(rows.size());
  for (std::size_t i = 0; i < rows.size(); ++i) {
    if (rows[i].size() < 5) throw std::runtime_error("soil csv: need >= 5 columns");
    soil[i] = SoilParams{rows[i][0], rows[i][1], rows[i][2], rows[i][3], rows[i][4],
                         rows[i].size() > 5 ? rows[i][5] : 1e-4,
                         rows[i].size() > 6 ? rows[i][6] : 0.5};
    soil[i].validate();
  }
  return soil;
}

// ---------------------------------------------------------------------------
// scenario materialization

struct BuiltScenario {
  CylindricalGrid grid;
  FieldModel model;
  GridNodeSets sets;
  VectorXd x0;
};

inline BuiltScenario build_scenario(const Scenario& s) {
  CylindricalGrid grid = build_grid(s.n_r, s.n_theta, s.n_z, s.radius, s.depth);
  std::vector<SoilParams> soil;
  if (s.soil.type == "uniform") {
    soil.assign(grid.size(), s.soil.uniform);
  } else if (s.soil.type == "synthetic") {
    soil = synth_soil_map(grid, s.soil);
  } else {
    soil = load_soil_csv(s.soil.path, grid.size());
  }
  FieldModel model(grid, std::move(soil), s.sink);
  GridNodeSets sets = node_sets(grid, s.sensors);

  VectorXd x0;
  if (s.initial.type == "uniform") {
    x0 = VectorXd::Constant(grid.size(), s.initial.h0);
  } else if (s.initial.type == "clustered") {
    x0 = clustered_initial_condition(grid, s.initial.seed, s.initial.levels,
                                     s.initial.h_min, s.initial.h_max);
  } else {
    auto rows = read_csv(s.initial.path);
    if (static_cast<int>(rows.size()) != grid.size())
      throw std::runtime_error("initial-condition csv: wrong node count");
    x0.resize(grid.size());
    for (int i = 0; i < grid.size(); ++i) x0[i] = rows[i].at(0);
  }
  return BuiltScenario{grid, std::move(model), std::move(sets), std::move(x0)};
}

// ---------------------------------------------------------------------------
// metrics

/// Per-step mean over nodes of the squared head error.
inline VectorXd mse_series(const MatrixXd& truth, const MatrixXd& estimate) {
  if (truth.rows() != estimate.rows() || truth.cols() != estimate.cols())
    throw std::invalid_argument("mse_series: shape mismatch");
  VectorXd out(truth.cols());
  for (int k = 0; k < truth.cols(); ++k)
    out[k] = (truth.col(k) - estimate.col(k)).squaredNorm() / truth.rows();
  return out;
}

/// Mean absolute error over one layer at one step.
inline double layer_mae(const CylindricalGrid& g, const VectorXd& truth,
                        const VectorXd& estimate, int iz) {
  const int per_layer = g.surface_count();
  double acc = 0.0;
  for (int i = iz * per_layer; i < (iz + 1) * per_layer; ++i)
    acc += std::abs(truth[i] - estimate[i]);
  return acc / per_layer;
}

// ---------------------------------------------------------------------------
// run artifacts

struct TruthRun {
  MatrixXd traj;          ///< N_x x (steps + 1)
  MatrixXd noise_record;  ///< N_x x steps, applied process perturbations
  MatrixXd meas;          ///< N_y x (steps + 1)
};

inline TruthRun run_truth(const Scenario& s, const BuiltScenario& b) {
  TruthRun out;
  const bool noisy = s.noise.process_std > 0.0 || s.noise.measurement_std > 0.0;
  out.traj = simulate(b.model, b.x0, s.schedule, s.time.t0, s.time.t1, s.time.dt,
                      s.time.substeps, noisy ? &s.noise : nullptr,
                      &out.noise_record);
  if (!b.sets.sensors.indices.empty()) {
    NoiseStreams streams(s.noise.seed);
    out.meas.resize(static_cast<int>(b.sets.sensors.indices.size()),
                    out.traj.cols());
    for (int k = 0; k < out.traj.cols(); ++k)
      out.meas.col(k) = measure(out.traj.col(k), b.sets.sensors,
                                s.noise.measurement_std, streams);
  }
  return out;
}

struct ReductionRun {
  MatrixXd reconstructed;          ///< N_x x (steps + 1)
  std::vector<int> num_clusters;   ///< one entry per region
  std::vector<double> region_time; ///< region start times
  VectorXd recon_mse;              ///< vs. the truth trajectory
  std::vector<std::vector<int>> region_labels;  ///< cluster label per node
};

/// Adaptive reduction tracking run: per region, snapshots come from the
/// nominal model restarted at the current reconstruction, and the reduced
/// state replays the truth's recorded process noise (projected).
inline ReductionRun run_reduction(const Scenario& s, const BuiltScenario& b,
                                  const TruthRun& truth) {
  SegmentPolicy policy = SegmentPolicy::per_step;
  if (s.reduction.policy == "fixed_window") policy = SegmentPolicy::fixed_window;
  else if (s.reduction.policy == "input_change") policy = SegmentPolicy::input_change;
  else if (s.reduction.policy != "per_step")
    throw std::invalid_argument("unknown reduction policy " + s.reduction.policy);
  OperatingRegions regions = segment_regions(s.schedule, s.time.t0, s.time.t1,
                                             s.time.dt, policy, s.reduction.window);

  ReductionRun out;
  const int steps = s.time.steps();
  out.reconstructed.resize(b.grid.size(), steps + 1);
  out.reconstructed.col(0) = b.x0;
  VectorXd x_tilde = b.x0;
  VectorXd u(b.grid.surface_count());
  int k = 0;
  for (const auto& [ta, tb] : regions.intervals) {
    const int n_steps = static_cast<int>(std::llround((tb - ta) / s.time.dt));
    // nominal snapshots over the region, restarted at the reconstruction
    MatrixXd snap(b.grid.size(), n_steps + 1);
    snap.col(0) = x_tilde;
    VectorXd xs = x_tilde;
    for (int j = 0; j < n_steps; ++j) {
      const double t = ta + j * s.time.dt;
      s.schedule.surface_input(t, b.grid, u);
      xs = b.model.step(xs, u, t, s.time.dt, s.time.substeps);
      snap.col(j + 1) = xs;
    }
    ClusterSet cs = cluster_trajectories(snap, s.reduction.threshold);
    ProjectionMap u_map(cs);
    out.num_clusters.push_back(u_map.cols());
    out.region_time.push_back(ta);
    std::vector<int> labels(b.grid.size());
    for (int i = 0; i < b.grid.size(); ++i) labels[i] = u_map.cluster_of(i);
    out.region_labels.push_back(std::move(labels));

    VectorXd xi = u_map.project(x_tilde);
    for (int j = 0; j < n_steps; ++j, ++k) {
      const double t = ta + j * s.time.dt;
      s.schedule.surface_input(t, b.grid, u);
      xi = reduced_step(b.model, u_map, xi, u, t, s.time.dt, s.time.substeps);
      if (truth.noise_record.size() > 0)
        xi += u_map.project(truth.noise_record.col(k));
      out.reconstructed.col(k + 1) = u_map.lift(xi);
    }
    x_tilde = out.reconstructed.col(k);
  }
  out.recon_mse = mse_series(truth.traj, out.reconstructed);
  return out;
}

struct EstimationRun {
  std::vector<EstimateStep> steps;
  MatrixXd x_hat;      ///< N_x x (steps + 1)
  VectorXd mse;        ///< vs. truth
  double total_wall_ms = 0.0;
};

inline EstimationRun run_estimation(const Scenario& s, const BuiltScenario& b,
                                    const TruthRun& truth,
                                    std::optional<double> prior_scale_override =
                                        std::nullopt) {
  if (b.sets.sensors.indices.empty())
    throw std::invalid_argument("estimation: scenario has no sensors");
  const double scale = prior_scale_override.value_or(s.estimator.prior_scale);
  VectorXd prior0 = scale * b.x0;

  EstimatorSettings settings = s.estimator.settings;
  settings.x_lb = s.x_lb;
  settings.x_ub = s.x_ub;
  settings.sigma_w = s.noise.process_std;

  auto input_at = [&](double t) {
    VectorXd u;
    s.schedule.surface_input(t, b.grid, u);
    return u;
  };

  EstimationRun out;
  const int steps = s.time.steps();
  out.x_hat.resize(b.grid.size(), steps + 1);

  if (s.estimator.type == "adaptive") {
    AdaptiveMhe est(b.model, b.sets.sensors, settings, s.time.dt,
                    s.time.substeps, prior0);
    for (int k = 0; k <= steps; ++k) {
      EstimateStep rec = est.process(k, truth.meas.col(k), input_at);
      out.x_hat.col(k) = rec.x_hat;
      out.total_wall_ms += rec.solve_ms;
      out.steps.push_back(std::move(rec));
    }
  } else if (s.estimator.type == "full_order") {
    FullOrderMhe est(b.model, b.sets.sensors, settings, s.time.dt,
                     s.time.substeps, prior0);
    for (int k = 0; k <= steps; ++k) {
      EstimateStep rec = est.process(k, truth.meas.col(k), input_at);
      out.x_hat.col(k) = rec.x_hat;
      out.total_wall_ms += rec.solve_ms;
      out.steps.push_back(std::move(rec));
    }
  } else {
    throw std::invalid_argument("unknown estimator type " + s.estimator.type);
  }
  out.mse = mse_series(truth.traj, out.x_hat);
  return out;
}

// ---------------------------------------------------------------------------
// persistence

namespace detail {

inline std::uint64_t fnv1a(const std::string& bytes) {
  std::uint64_t h = 1469598103934665603ull;
  for (unsigned char c : bytes) {
    h ^= c;
    h *= 1099511628211ull;
  }
  return h;
}

inline void write_matrix_csv(const std::filesystem::path& path, const MatrixXd& m,
                             double t0, double dt, const std::string& col_prefix) {
  CsvWriter w(path);
  std::vector<std::string> names{"t"};
  for (int i = 0; i < m.rows(); ++i)
    names.push_back(col_prefix + std::to_string(i));
  w.header(names);
  for (int k = 0; k < m.cols(); ++k) {
    w.stream() << (t0 + k * dt);
    for (int i = 0; i < m.rows(); ++i) w.stream() << ',' << m(i, k);
    w.stream() << '\n';
  }
}

}  // namespace detail

inline void write_manifest(const Scenario& s, const std::filesystem::path& dir,
                           const std::string& config_text) {
  nlohmann::json j;
  j["name"] = s.name;
  j["seed"] = s.seed;
  j["config_hash"] = detail::fnv1a(config_text);
  j["version"] = kVersion;
  j["schema_version"] = kSchemaVersion;
  std::ofstream out(dir / "run_manifest.json");
  out << j.dump(2) << '\n';
}

inline void write_truth(const Scenario& s, const TruthRun& truth,
                        const std::filesystem::path& dir) {
  if (s.outputs.save_states)
    detail::write_matrix_csv(dir / "trajectory.csv", truth.traj, s.time.t0,
                             s.time.dt, "node_");
  if (truth.meas.size() > 0)
    detail::write_matrix_csv(dir / "measurements.csv", truth.meas, s.time.t0,
                             s.time.dt, "y_");
}

inline void write_reduction(const Scenario& s, const ReductionRun& run,
                            const std::filesystem::path& dir) {
  {
    CsvWriter w(dir / "num_clusters.csv");
    w.header({"t", "num_clusters"});
    for (std::size_t m = 0; m < run.num_clusters.size(); ++m)
      w.stream() << run.region_time[m] << ',' << run.num_clusters[m] << '\n';
  }
  {
    CsvWriter w(dir / "clusters.csv");
    w.header({"region", "cluster_id", "node_index"});
    for (std::size_t m = 0; m < run.region_labels.size(); ++m)
      for (std::size_t i = 0; i < run.region_labels[m].size(); ++i)
        w.stream() << m << ',' << run.region_labels[m][i] << ',' << i << '\n';
  }
  {
    CsvWriter w(dir / "reconstruction_mse.csv");
    w.header({"k", "t", "mse"});
    for (int k = 0; k < run.recon_mse.size(); ++k)
      w.stream() << k << ',' << (s.time.t0 + k * s.time.dt) << ','
                 << run.recon_mse[k] << '\n';
  }
  if (s.outputs.save_states)
    detail::write_matrix_csv(dir / "reconstructed.csv", run.reconstructed,
                             s.time.t0, s.time.dt, "node_");
}

inline void write_estimation(const Scenario& s, const BuiltScenario& b,
                             const TruthRun& truth, const EstimationRun& run,
                             const std::filesystem::path& dir) {
  {
    CsvWriter w(dir / "estimates.csv");
    std::vector<std::string> names{"k", "t", "num_clusters", "objective",
                                   "solve_ms"};
    if (s.outputs.save_states)
      for (int i = 0; i < b.grid.size(); ++i)
        names.push_back("x_hat_" + std::to_string(i));
    w.header(names);
    for (const auto& rec : run.steps) {
      w.stream() << rec.k << ',' << rec.t << ',' << rec.num_clusters << ','
                 << rec.objective << ',' << rec.solve_ms;
      if (s.outputs.save_states)
        for (int i = 0; i < rec.x_hat.size(); ++i)
          w.stream() << ',' << rec.x_hat[i];
      w.stream() << '\n';
    }
  }
  {
    CsvWriter w(dir / "mse.csv");
    w.header({"k", "t", "mse"});
    for (int k = 0; k < run.mse.size(); ++k)
      w.stream() << k << ',' << (s.time.t0 + k * s.time.dt) << ',' << run.mse[k]
                 << '\n';
  }
  {
    CsvWriter w(dir / "num_clusters.csv");
    w.header({"t", "num_clusters"});
    for (const auto& rec : run.steps)
      w.stream() << rec.t << ',' << rec.num_clusters << '\n';
  }
  // layer absolute-error maps and their means at the requested times
  if (!s.outputs.map_times.empty()) {
    CsvWriter summary(dir / "layer_error_summary.csv");
    summary.header({"t", "surface_mae", "bottom_mae"});
    for (double tm : s.outputs.map_times) {
      const int k = static_cast<int>(std::llround((tm - s.time.t0) / s.time.dt));
      if (k < 0 || k >= run.x_hat.cols()) continue;
      const double s_mae = layer_mae(b.grid, truth.traj.col(k), run.x_hat.col(k), 0);
      const double b_mae =
          layer_mae(b.grid, truth.traj.col(k), run.x_hat.col(k), b.grid.n_z - 1);
      summary.stream() << tm << ',' << s_mae << ',' << b_mae << '\n';
      for (int layer : {0, b.grid.n_z - 1}) {
        CsvWriter w(dir / ("abs_error_" + std::string(layer == 0 ? "surface" : "bottom") +
                           "_t" + std::to_string(static_cast<long long>(tm)) + "s.csv"));
        w.header({"i_r", "i_theta", "abs_error_m"});
        for (int it = 0; it < b.grid.n_theta; ++it)
          for (int ir = 0; ir < b.grid.n_r; ++ir) {
            const int i = b.grid.flat(ir, it, layer);
            w.stream() << ir << ',' << it << ','
                       << std::abs(truth.traj(i, k) - run.x_hat(i, k)) << '\n';
          }
      }
    }
  }
}

}  // namespace agrohydro
