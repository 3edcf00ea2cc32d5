// Command-line front end: simulate / reduce / estimate / compare / report.

#include <chrono>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <sstream>

#include <CLI11.hpp>
#include <json.hpp>

#ifdef _OPENMP
#include <omp.h>
#endif

#include "agrohydro/scenario.hpp"

namespace fs = std::filesystem;
using namespace agrohydro;

namespace {

struct CommonOpts {
  std::optional<std::uint64_t> seed;
  std::optional<std::string> out;
  int threads = 1;
};

void add_common(CLI::App* cmd, CommonOpts& c) {
  cmd->add_option("--seed", c.seed, "override the scenario seed");
  cmd->add_option("--out", c.out, "override the output directory");
  cmd->add_option("--threads", c.threads, "worker threads (default 1)");
}

void apply_threads(int threads) {
#ifdef _OPENMP
  omp_set_num_threads(std::max(1, threads));
#endif
  Eigen::setNbThreads(std::max(1, threads));
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p);
  if (!in) throw std::runtime_error("cannot open " + p.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

Scenario load_with_overrides(const fs::path& config, const CommonOpts& c,
                             std::string* config_text) {
  *config_text = slurp(config);
  Scenario s = parse_scenario(nlohmann::json::parse(*config_text));
  if (c.seed) {
    s.seed = *c.seed;
    s.noise.seed = *c.seed;
    if (s.soil.type == "synthetic") s.soil.seed = *c.seed;
    if (s.initial.type == "clustered") s.initial.seed = *c.seed;
  }
  if (c.out) s.outputs.dir = *c.out;
  return s;
}

fs::path make_out_dir(const Scenario& s) {
  fs::path dir(s.outputs.dir);
  fs::create_directories(dir);
  return dir;
}

int cmd_simulate(const fs::path& config, const CommonOpts& c) {
  std::string text;
  Scenario s = load_with_overrides(config, c, &text);
  apply_threads(c.threads);
  BuiltScenario b = build_scenario(s);
  TruthRun truth = run_truth(s, b);
  fs::path dir = make_out_dir(s);
  write_truth(s, truth, dir);
  write_manifest(s, dir, text);
  std::cout << "simulated " << s.name << ": " << b.grid.size() << " nodes, "
            << s.time.steps() << " steps -> " << dir << "\n";
  return 0;
}

int cmd_reduce(const fs::path& config, const CommonOpts& c) {
  std::string text;
  Scenario s = load_with_overrides(config, c, &text);
  apply_threads(c.threads);
  BuiltScenario b = build_scenario(s);
  TruthRun truth = run_truth(s, b);
  ReductionRun red = run_reduction(s, b, truth);
  fs::path dir = make_out_dir(s);
  write_truth(s, truth, dir);
  write_reduction(s, red, dir);
  write_manifest(s, dir, text);
  const double worst = red.recon_mse.maxCoeff();
  std::cout << "reduced " << s.name << ": regions " << red.num_clusters.size()
            << ", cluster count range ["
            << *std::min_element(red.num_clusters.begin(), red.num_clusters.end())
            << ", "
            << *std::max_element(red.num_clusters.begin(), red.num_clusters.end())
            << "], max reconstruction MSE " << worst << " m^2 -> " << dir << "\n";
  return 0;
}

int cmd_estimate(const fs::path& config, const CommonOpts& c,
                 const std::optional<std::string>& estimator,
                 const std::optional<double>& prior_scale) {
  std::string text;
  Scenario s = load_with_overrides(config, c, &text);
  if (estimator) s.estimator.type = *estimator;
  apply_threads(c.threads);
  BuiltScenario b = build_scenario(s);
  TruthRun truth = run_truth(s, b);
  EstimationRun est = run_estimation(s, b, truth, prior_scale);
  fs::path dir = make_out_dir(s);
  write_truth(s, truth, dir);
  write_estimation(s, b, truth, est, dir);
  write_manifest(s, dir, text);
  std::cout << "estimated " << s.name << " (" << s.estimator.type << "): final MSE "
            << est.mse[est.mse.size() - 1] << " m^2, total wall "
            << est.total_wall_ms / 1000.0 << " s -> " << dir << "\n";
  return 0;
}

int cmd_compare(const fs::path& config_a, const fs::path& config_b,
                const CommonOpts& c) {
  std::string text_a, text_b;
  Scenario sa = load_with_overrides(config_a, c, &text_a);
  Scenario sb = load_with_overrides(config_b, c, &text_b);
  if (c.out) {
    sa.outputs.dir = (fs::path(*c.out) / "a").string();
    sb.outputs.dir = (fs::path(*c.out) / "b").string();
  }
  apply_threads(c.threads);

  BuiltScenario ba = build_scenario(sa);
  TruthRun ta = run_truth(sa, ba);
  EstimationRun ea = run_estimation(sa, ba, ta);
  write_truth(sa, ta, make_out_dir(sa));
  write_estimation(sa, ba, ta, ea, make_out_dir(sa));
  write_manifest(sa, make_out_dir(sa), text_a);

  BuiltScenario bb = build_scenario(sb);
  TruthRun tb = run_truth(sb, bb);
  EstimationRun eb = run_estimation(sb, bb, tb);
  write_truth(sb, tb, make_out_dir(sb));
  write_estimation(sb, bb, tb, eb, make_out_dir(sb));
  write_manifest(sb, make_out_dir(sb), text_b);

  fs::path dir = c.out ? fs::path(*c.out)
                       : fs::path("runs") / ("compare-" + sa.name + "-vs-" + sb.name);
  fs::create_directories(dir);
  {
    CsvWriter w(dir / "comparison.csv");
    w.header({"k", "t", "mse_a", "mse_b"});
    const int n = static_cast<int>(std::min(ea.mse.size(), eb.mse.size()));
    for (int k = 0; k < n; ++k)
      w.stream() << k << ',' << (sa.time.t0 + k * sa.time.dt) << ',' << ea.mse[k]
                 << ',' << eb.mse[k] << '\n';
  }
  {
    CsvWriter w(dir / "timing.csv");
    w.header({"run", "estimator", "total_wall_s"});
    w.stream() << sa.name << ',' << sa.estimator.type << ','
               << ea.total_wall_ms / 1000.0 << '\n';
    w.stream() << sb.name << ',' << sb.estimator.type << ','
               << eb.total_wall_ms / 1000.0 << '\n';
  }
  std::cout << "run A (" << sa.estimator.type << "): total "
            << ea.total_wall_ms / 1000.0 << " s, final MSE "
            << ea.mse[ea.mse.size() - 1] << " m^2\n";
  std::cout << "run B (" << sb.estimator.type << "): total "
            << eb.total_wall_ms / 1000.0 << " s, final MSE "
            << eb.mse[eb.mse.size() - 1] << " m^2\n";
  if (eb.total_wall_ms > 0.0)
    std::cout << "wall-time ratio A/B: " << ea.total_wall_ms / eb.total_wall_ms
              << "\n";
  std::cout << "comparison -> " << dir << "\n";
  return 0;
}

int cmd_report(const fs::path& run_dir) {
  const fs::path manifest = run_dir / "run_manifest.json";
  if (fs::exists(manifest)) {
    nlohmann::json j = nlohmann::json::parse(slurp(manifest));
    std::cout << "run: " << j.value("name", "?") << "  seed: " << j.value("seed", 0)
              << "  config hash: " << j.value("config_hash", 0ull)
              << "  version: " << j.value("version", "?") << "\n";
  }
  for (const char* f : {"mse.csv", "reconstruction_mse.csv"}) {
    const fs::path p = run_dir / f;
    if (!fs::exists(p)) continue;
    auto rows = read_csv(p);
    if (rows.empty()) continue;
    double peak = 0.0;
    for (const auto& r : rows) peak = std::max(peak, r.back());
    std::cout << f << ": " << rows.size() << " steps, first "
              << rows.front().back() << ", final " << rows.back().back()
              << ", peak " << peak << " m^2\n";
  }
  const fs::path nc = run_dir / "num_clusters.csv";
  if (fs::exists(nc)) {
    auto rows = read_csv(nc);
    if (!rows.empty()) {
      double lo = rows.front().back(), hi = lo;
      for (const auto& r : rows) {
        lo = std::min(lo, r.back());
        hi = std::max(hi, r.back());
      }
      std::cout << "clusters: " << lo << " .. " << hi << " over " << rows.size()
                << " records\n";
    }
  }
  const fs::path sum = run_dir / "layer_error_summary.csv";
  if (fs::exists(sum)) {
    for (const auto& r : read_csv(sum))
      std::cout << "layer MAE at t=" << r[0] << " s: surface " << r[1]
                << " m, bottom " << r[2] << " m\n";
  }
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"soil-moisture simulation, model reduction and moving-horizon "
               "estimation for center-pivot fields"};
  app.require_subcommand(1);

  std::string config, config_b, run_dir;
  CommonOpts common;
  std::optional<std::string> estimator;
  std::optional<double> prior_scale;

  auto* sim = app.add_subcommand("simulate", "run the truth simulation");
  sim->add_option("config", config, "scenario config (JSON)")->required();
  add_common(sim, common);

  auto* red = app.add_subcommand("reduce", "run the adaptive model reduction");
  red->add_option("config", config)->required();
  add_common(red, common);

  auto* est = app.add_subcommand("estimate", "run a state estimator");
  est->add_option("config", config)->required();
  est->add_option("--estimator", estimator, "adaptive | full_order");
  est->add_option("--prior-scale", prior_scale, "override the prior scale");
  add_common(est, common);

  auto* cmp = app.add_subcommand("compare", "run two scenarios and compare");
  cmp->add_option("config_a", config)->required();
  cmp->add_option("config_b", config_b)->required();
  add_common(cmp, common);

  auto* rep = app.add_subcommand("report", "summarize a finished run directory");
  rep->add_option("run_dir", run_dir)->required();

  CLI11_PARSE(app, argc, argv);

  try {
    if (sim->parsed()) return cmd_simulate(config, common);
    if (red->parsed()) return cmd_reduce(config, common);
    if (est->parsed()) return cmd_estimate(config, common, estimator, prior_scale);
    if (cmp->parsed()) return cmd_compare(config, config_b, common);
    if (rep->parsed()) return cmd_report(run_dir);
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return 0;
}
