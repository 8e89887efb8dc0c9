// Acceptance suite: one PASS/FAIL line per criterion, nonzero exit on any
// failure. Runs the experiments through the same harness the CLI uses and
// writes its artifacts under ./acceptance-out.

#include <Eigen/Dense>

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <functional>
#include <iostream>
#include <map>
#include <sstream>
#include <string>
#include <vector>

#include "dpca/harness.hpp"
#include "dpca/linalg.hpp"
#include "dpca/rng.hpp"
#include "dpca/solvers.hpp"
#include "dpca/synth.hpp"
#include "dpca/thresholding.hpp"

namespace fs = std::filesystem;
using dpca::Matrix;
using dpca::Solver;

namespace {

const fs::path kRoot = "acceptance-out";

struct Outcome {
  bool pass = false;
  std::string detail;
};

double seconds_since(std::chrono::steady_clock::time_point t0) {
  return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
}

std::string num(double v, int prec = 4) {
  std::ostringstream s;
  s.precision(prec);
  s << v;
  return s.str();
}

Matrix random_matrix(std::size_t rows, std::size_t cols, dpca::Rng& rng) {
  Matrix m(rows, cols);
  for (double& v : m.data()) v = rng.normal();
  return m;
}

int run_quiet(const dpca::ExperimentConfig& cfg) {
  std::ostringstream log;
  return dpca::run(cfg, log);
}

// Rows keyed by (case, algorithm, row kind) with the timing column dropped.
std::vector<std::string> metric_rows(const fs::path& csv) {
  const auto t = dpca::read_csv_table(csv);
  std::vector<std::string> out;
  for (const auto& r : t.rows) {
    std::string line;
    for (std::size_t c = 0; c < r.size(); ++c)
      if (t.header[c] != "seconds") line += r[c] + ",";
    out.push_back(line);
  }
  return out;
}

std::map<std::string, double> column_by_algorithm(const dpca::CsvTable& t, const std::string& column,
                                                  const std::string& row_kind = "") {
  std::map<std::string, double> out;
  for (std::size_t r = 0; r < t.rows.size(); ++r) {
    if (!row_kind.empty() && t.field(r, "row") != row_kind) continue;
    out[t.field(r, "algorithm")] = std::stod(t.field(r, column));
  }
  return out;
}

dpca::ExperimentConfig synth_config(const fs::path& out) {
  auto cfg = dpca::ExperimentConfig::defaults(dpca::Command::synth);
  cfg.solvers = {Solver::pca, Solver::dpca1b, Solver::dpca2};
  cfg.trials = 15;
  cfg.seed = 1;
  cfg.out = out;
  return cfg;
}

dpca::ExperimentConfig bgsub_config(const fs::path& out) {
  auto cfg = dpca::ExperimentConfig::defaults(dpca::Command::bgsub);
  cfg.solvers = {Solver::pca, Solver::dpca1b};
  cfg.seed = 1;
  cfg.out = out;
  return cfg;
}

// ---------------------------------------------------------------------------

Outcome reduction() {
  const auto t0 = std::chrono::steady_clock::now();
  dpca::Rng rng(2718);
  double worst = 0.0;
  for (std::size_t k : {1u, 4u, 8u}) {
    const Matrix x = dpca::matmul(random_matrix(60, k, rng), random_matrix(k, 100, rng));
    dpca::DpcaConfig cfg;
    cfg.K = k;
    cfg.lambda = 0.0;
    cfg.firm = dpca::FirmThresholds::inert();
    for (Solver s : {Solver::dpca1a, Solver::dpca1b, Solver::dpca2}) {
      const auto f = dpca::fit(s, x, cfg);
      worst = std::max(worst, dpca::frobenius_distance(x, f.reconstruct()) / dpca::frobenius_norm(x));
    }
  }
  const double secs = seconds_since(t0);
  return {worst <= 1e-6 && secs < 10.0, "max rel error " + num(worst) + " in " + num(secs, 3) + " s"};
}

Outcome thresholding() {
  const dpca::FirmThresholds t(1.0, 2.0);
  bool examples = dpca::soft_adaptive(2.0, 2.0) == 1.5 && dpca::soft_adaptive(0.5, 2.0) == 0.0 &&
                  dpca::firm(0.5, t) == 0.0 && dpca::firm(3.0, t) == 3.0 && dpca::firm(1.5, t) == 1.0;
  for (double y : {-4.0, -0.3, 0.0, 0.7, 9.0}) examples = examples && dpca::soft_adaptive(y, 0.0) == y;

  dpca::Rng rng(31415);
  std::size_t violations = 0;
  for (int i = 0; i < 10000; ++i) {
    const double y1 = 6.0 * std::abs(rng.normal());
    const double y2 = y1 * rng.uniform();
    const double y = rng.uniform() < 0.5 ? -y1 : y1;
    const double lam = 8.0 * rng.uniform();
    const double r1 = 3.0 * rng.uniform();
    const dpca::FirmThresholds ft(r1, r1 + 1e-3 + 3.0 * rng.uniform());
    const bool odd = dpca::soft_adaptive(-y, lam) == -dpca::soft_adaptive(y, lam) && dpca::firm(-y, ft) == -dpca::firm(y, ft);
    const bool shrink = std::abs(dpca::soft_adaptive(y, lam)) <= std::abs(y) && std::abs(dpca::firm(y, ft)) <= std::abs(y);
    const bool mono = dpca::soft_adaptive(y1, lam) >= dpca::soft_adaptive(y2, lam) && dpca::firm(y1, ft) >= dpca::firm(y2, ft);
    violations += !(odd && shrink && mono);
  }
  return {examples && violations == 0,
          std::string("examples ") + (examples ? "exact" : "WRONG") + ", " + std::to_string(violations) +
              " property violations in 10000 draws"};
}

Outcome svd_oracle() {
  dpca::Rng rng(1618);
  double worst = 0.0;
  for (int trial = 0; trial < 50; ++trial) {
    const std::size_t n = 1 + rng.index(10), p = 1 + rng.index(10);
    const std::size_t k = 1 + rng.index(std::min(n, p));
    const Matrix x = random_matrix(n, p, rng);
    const Matrix ours = dpca::truncated_svd(x, k).reconstruct();

    Eigen::MatrixXd ex(n, p);
    for (std::size_t r = 0; r < n; ++r)
      for (std::size_t c = 0; c < p; ++c) ex(r, c) = x(r, c);
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(ex.transpose() * ex);
    const Eigen::MatrixXd w = es.eigenvectors().rightCols(static_cast<Eigen::Index>(k));
    const Eigen::MatrixXd oracle = ex * w * w.transpose();
    double err = 0.0;
    for (std::size_t r = 0; r < n; ++r)
      for (std::size_t c = 0; c < p; ++c) err += std::pow(ours(r, c) - oracle(r, c), 2);
    worst = std::max(worst, std::sqrt(err));
  }
  return {worst <= 1e-8, "max reconstruction gap " + num(worst) + " over 50 matrices"};
}

Outcome synth_bss() {
  const auto t0 = std::chrono::steady_clock::now();
  const int status = run_quiet(synth_config(kRoot / "synth-a"));
  const double secs = seconds_since(t0);
  if (status != 0) return {false, "synth run failed"};
  const auto t = dpca::read_csv_table(kRoot / "synth-a" / "synth.csv");
  const auto mean = column_by_algorithm(t, "mean_correlation", "mean");
  const double pca = mean.at("pca"), b = mean.at("dpca1b"), two = mean.at("dpca2");
  const bool ok = b >= 0.90 && two >= 0.90 && b >= pca + 0.03 && two >= pca + 0.03 && secs < 300.0;
  return {ok, "mean correlation dpca1b " + num(b) + ", dpca2 " + num(two) + ", pca " + num(pca) + " over 15 trials in " +
                  num(secs, 3) + " s"};
}

struct ConvergenceRuns {
  std::map<Solver, std::size_t> monotone;
  std::size_t bound_checked = 0;
  std::size_t bound_violations = 0;
  std::size_t ev_violations = 0;
  double worst_margin = -1e300;
};

ConvergenceRuns convergence_runs() {
  ConvergenceRuns out;
  const auto exp = dpca::ExperimentConfig::defaults(dpca::Command::synth);
  for (std::uint64_t seed = 1; seed <= 10; ++seed) {
    auto sc = dpca::SynthConfig::preset(dpca::OverlapPreset::moderate);
    sc.seed = seed;
    const Matrix xc = dpca::center_columns(dpca::generate_scene(sc).X).matrix;
    const auto svd = dpca::truncated_svd(xc, exp.dpca.K);
    double bound = 0.0;
    for (double d : svd.D) bound += d * d;
    for (Solver s : {Solver::dpca1a, Solver::dpca1b, Solver::dpca2}) {
      const auto f = dpca::fit(s, xc, svd, exp.dpca);
      bool mono = true;
      for (std::size_t i = 2; i < f.rel_change_trace.size(); ++i)
        mono = mono && f.rel_change_trace[i] <= f.rel_change_trace[i - 1];
      out.monotone[s] += mono;
      const double ev = dpca::explained_variance(xc, f.Z);
      if (f.converged) {
        ++out.bound_checked;
        const double energy = dpca::dissociated_energy(f);
        out.worst_margin = std::max(out.worst_margin, energy - bound);
        out.bound_violations += energy > bound + 1e-6;
        out.ev_violations += !(ev >= 0.0 && ev <= 100.0);
      }
    }
  }
  return out;
}

Outcome convergence(const ConvergenceRuns& r) {
  const std::size_t b = r.monotone.at(Solver::dpca1b), two = r.monotone.at(Solver::dpca2);
  return {b >= 9 && two >= 9, "non-increasing traces on " + std::to_string(b) + "/10 seeds (dpca1b), " +
                                  std::to_string(two) + "/10 (dpca2); dpca1a " +
                                  std::to_string(r.monotone.at(Solver::dpca1a)) + "/10, exempt"};
}

Outcome background() {
  const auto t0 = std::chrono::steady_clock::now();
  const int status = run_quiet(bgsub_config(kRoot / "bgsub-a"));
  const double secs = seconds_since(t0);
  if (status != 0) return {false, "bgsub run failed"};
  const auto f = column_by_algorithm(dpca::read_csv_table(kRoot / "bgsub-a" / "metrics.csv"), "fscore");
  const auto still = column_by_algorithm(dpca::read_csv_table(kRoot / "bgsub-a" / "bgsub_static.csv"), "foreground_pixels");
  const bool ok = f.at("dpca1b") >= 0.9 && still.at("dpca1b") == 0.0 && secs < 30.0;
  return {ok, "dpca1b F " + num(f.at("dpca1b")) + " (pca " + num(f.at("pca")) + "), static-scene foreground pixels " +
                  num(still.at("dpca1b")) + ", " + num(secs, 3) + " s"};
}

Outcome imaging(dpca::Command command, double gain, const std::string& dir) {
  auto cfg = dpca::ExperimentConfig::defaults(command);
  cfg.solvers = {Solver::pca, Solver::dpca1a, Solver::dpca1b, Solver::dpca2};
  cfg.out = kRoot / dir;
  const auto t0 = std::chrono::steady_clock::now();
  const int status = run_quiet(cfg);
  const double secs = seconds_since(t0);
  if (status != 0) return {false, dir + " run failed"};
  const auto t = dpca::read_csv_table(cfg.out / "metrics.csv");
  const auto in = column_by_algorithm(t, "psnr_in");
  const auto out = column_by_algorithm(t, "psnr_out");
  // every DPCA variant for denoising; every dictionary for inpainting
  bool ok = secs < 120.0 && out.at("dpca2") >= out.at("pca");
  std::string detail = "psnr_in " + num(in.at("pca")) + " dB; out";
  for (const auto& [alg, v] : out) {
    if (command == dpca::Command::inpaint || alg != "pca") ok = ok && v >= in.at(alg) + gain;
    detail += " " + alg + " " + num(v);
  }
  return {ok, detail + "; " + num(secs, 3) + " s"};
}

Outcome determinism() {
  if (run_quiet(synth_config(kRoot / "synth-b")) != 0 || run_quiet(bgsub_config(kRoot / "bgsub-b")) != 0)
    return {false, "repeat run failed"};
  const bool synth = metric_rows(kRoot / "synth-a" / "synth.csv") == metric_rows(kRoot / "synth-b" / "synth.csv");
  const bool bg = metric_rows(kRoot / "bgsub-a" / "metrics.csv") == metric_rows(kRoot / "bgsub-b" / "metrics.csv");
  return {synth && bg, std::string("synth rows ") + (synth ? "identical" : "DIFFER") + ", bgsub rows " +
                           (bg ? "identical" : "DIFFER")};
}

Outcome variance_bound(const ConvergenceRuns& r) {
  const bool ok = r.bound_checked > 0 && r.bound_violations == 0 && r.ev_violations == 0;
  return {ok, std::to_string(r.bound_checked) + " converged runs, " + std::to_string(r.bound_violations) +
                  " bound violations (worst margin " + num(r.worst_margin) + "), " + std::to_string(r.ev_violations) +
                  " explained-variance violations"};
}

}  // namespace

int main() {
  fs::remove_all(kRoot);
  fs::create_directories(kRoot);

  std::vector<std::pair<std::string, std::function<Outcome()>>> criteria;
  ConvergenceRuns runs;
  bool have_runs = false;
  auto get_runs = [&]() -> const ConvergenceRuns& {
    if (!have_runs) {
      runs = convergence_runs();
      have_runs = true;
    }
    return runs;
  };

  criteria.emplace_back("reduction to PCA", reduction);
  criteria.emplace_back("thresholding algebra", thresholding);
  criteria.emplace_back("SVD oracle", svd_oracle);
  criteria.emplace_back("synthetic BSS", synth_bss);
  criteria.emplace_back("convergence traces", [&] { return convergence(get_runs()); });
  criteria.emplace_back("background subtraction", background);
  criteria.emplace_back("denoising", [] { return imaging(dpca::Command::denoise, 6.0, "denoise"); });
  criteria.emplace_back("inpainting", [] { return imaging(dpca::Command::inpaint, 3.0, "inpaint"); });
  criteria.emplace_back("determinism", determinism);
  criteria.emplace_back("variance accounting", [&] { return variance_bound(get_runs()); });

  int failures = 0;
  for (std::size_t i = 0; i < criteria.size(); ++i) {
    Outcome o;
    try {
      o = criteria[i].second();
    } catch (const std::exception& e) {
      o = {false, std::string("exception: ") + e.what()};
    }
    failures += !o.pass;
    std::cout << (o.pass ? "PASS" : "FAIL") << ' ' << (i + 1) << ' ' << criteria[i].first << ": " << o.detail
              << std::endl;
  }
  return failures == 0 ? 0 : 1;
}
