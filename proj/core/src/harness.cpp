#include "dpca/harness.hpp"

#include <algorithm>
#include <atomic>
#include <charconv>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <functional>
#include <iostream>
#include <mutex>
#include <numeric>
#include <sstream>
#include <stdexcept>
#include <thread>

#include "dpca/factorization_io.hpp"
#include "dpca/image.hpp"
#include "dpca/imaging.hpp"
#include "dpca/linalg.hpp"
#include "dpca/matrix_io.hpp"
#include "dpca/rng.hpp"
#include "dpca/surrogates.hpp"
#include "dpca/synth.hpp"
#include "dpca/thresholding.hpp"

namespace dpca {

namespace {

namespace fs = std::filesystem;

class StageError : public std::runtime_error {
public:
  StageError(std::string category, const std::string& what)
      : std::runtime_error(what), category_(std::move(category)) {}
  const std::string& category() const noexcept { return category_; }

private:
  std::string category_;
};

std::string trim(std::string s) {
  const auto first = s.find_first_not_of(" \t\r\n");
  if (first == std::string::npos) return {};
  const auto last = s.find_last_not_of(" \t\r\n");
  return s.substr(first, last - first + 1);
}

std::vector<std::string> split(const std::string& s, char sep) {
  std::vector<std::string> out;
  std::string cur;
  std::istringstream in(s);
  while (std::getline(in, cur, sep)) out.push_back(trim(cur));
  if (!s.empty() && s.back() == sep) out.emplace_back();
  return out;
}

double parse_double(const std::string& key, const std::string& v) {
  const std::string t = trim(v);
  double out = 0.0;
  const auto [ptr, ec] = std::from_chars(t.data(), t.data() + t.size(), out);
  if (ec != std::errc() || ptr != t.data() + t.size() || t.empty())
    throw std::invalid_argument(key + ": not a number: '" + v + "'");
  return out;
}

std::uint64_t parse_u64(const std::string& key, const std::string& v) {
  const std::string t = trim(v);
  std::uint64_t out = 0;
  const auto [ptr, ec] = std::from_chars(t.data(), t.data() + t.size(), out);
  if (ec != std::errc() || ptr != t.data() + t.size() || t.empty())
    throw std::invalid_argument(key + ": not a non-negative integer: '" + v + "'");
  return out;
}

bool parse_bool(const std::string& key, const std::string& v) {
  const std::string t = trim(v);
  if (t == "1" || t == "true" || t == "yes" || t == "on") return true;
  if (t == "0" || t == "false" || t == "no" || t == "off") return false;
  throw std::invalid_argument(key + ": not a boolean: '" + v + "'");
}

std::string_view to_string(Sweep s) noexcept {
  switch (s) {
    case Sweep::none: return "none";
    case Sweep::noise: return "noise";
    case Sweep::lambda: return "lambda";
  }
  return "none";
}

Sweep parse_sweep(const std::string& v) {
  if (v == "none" || v.empty()) return Sweep::none;
  if (v == "noise") return Sweep::noise;
  if (v == "lambda") return Sweep::lambda;
  throw std::invalid_argument("sweep: expected none, noise or lambda, got '" + v + "'");
}

OverlapPreset parse_overlap(const std::string& v) {
  if (v == "moderate") return OverlapPreset::moderate;
  if (v == "significant") return OverlapPreset::significant;
  throw std::invalid_argument("overlap: expected moderate or significant, got '" + v + "'");
}

std::string join_solvers(const std::vector<Solver>& s) {
  std::string out;
  for (std::size_t i = 0; i < s.size(); ++i) {
    if (i) out += ',';
    out += to_string(s[i]);
  }
  return out;
}

std::string fmt(double v) { return std::isnan(v) ? std::string() : format_double(v); }
std::string fmt(std::size_t v) { return std::to_string(v); }

double seconds_since(std::chrono::steady_clock::time_point t0) {
  return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
}

struct Stats {
  double mean = 0.0;
  double std = 0.0;
};

Stats stats(const std::vector<double>& v) {
  Stats s;
  if (v.empty()) return s;
  s.mean = std::accumulate(v.begin(), v.end(), 0.0) / static_cast<double>(v.size());
  if (v.size() > 1) {
    double ss = 0.0;
    for (double x : v) ss += (x - s.mean) * (x - s.mean);
    s.std = std::sqrt(ss / static_cast<double>(v.size() - 1));
  }
  return s;
}

// Runs task(i) for i in [0, n) on up to `workers` threads. The first
// exception is rethrown after all workers stop.
void parallel_for(std::size_t n, std::size_t workers, const std::function<void(std::size_t)>& task) {
  workers = std::max<std::size_t>(1, std::min(workers, n));
  if (workers == 1) {
    for (std::size_t i = 0; i < n; ++i) task(i);
    return;
  }
  std::atomic<std::size_t> next{0};
  std::exception_ptr error;
  std::mutex error_mutex;
  std::vector<std::thread> pool;
  for (std::size_t w = 0; w < workers; ++w) {
    pool.emplace_back([&] {
      for (std::size_t i = next++; i < n; i = next++) {
        try {
          task(i);
        } catch (...) {
          std::lock_guard lock(error_mutex);
          if (!error) error = std::current_exception();
          next = n;
        }
      }
    });
  }
  for (auto& t : pool) t.join();
  if (error) std::rethrow_exception(error);
}

// Appends rows under `header`, writing the header when the file is new or
// empty. An existing file with a different header is an error.
void append_rows(const fs::path& path, const std::string& header, const std::vector<std::string>& rows) {
  bool need_header = true;
  if (fs::exists(path) && fs::file_size(path) > 0) {
    std::ifstream in(path);
    std::string first;
    std::getline(in, first);
    if (trim(first) != header)
      throw StageError("io", path.string() + ": existing file has a different header");
    need_header = false;
  }
  std::ofstream out(path, std::ios::app | std::ios::binary);
  if (!out) throw StageError("io", "cannot open " + path.string() + " for writing");
  if (need_header) out << header << '\n';
  for (const auto& r : rows) out << r << '\n';
  if (!out) throw StageError("io", "write failed: " + path.string());
}

std::string join_row(const std::vector<std::string>& fields) {
  std::string out;
  for (std::size_t i = 0; i < fields.size(); ++i) {
    if (i) out += ',';
    out += fields[i];
  }
  return out;
}

// --------------------------------------------------------------------------
// Synth

struct SynthTrial {
  std::uint64_t seed = 0;
  double eta_t = 0.0;
  double eta_s = 0.0;
  double correlation = 0.0;
  double fscore = 0.0;
  double explained = 0.0;
  double lambda_used = 0.0;
  std::size_t iterations = 0;
  bool converged = false;
  double seconds = 0.0;
};

struct SweepPoint {
  std::string case_name;
  double eta_t;
  double eta_s;
  double lambda;
};

std::vector<SweepPoint> sweep_points(const ExperimentConfig& cfg) {
  const std::string base = "synth-" + cfg.overlap;
  std::vector<SweepPoint> pts;
  switch (cfg.sweep) {
    case Sweep::none:
      pts.push_back({base, cfg.eta_t, cfg.eta_s, cfg.dpca.lambda});
      break;
    case Sweep::noise:
      for (std::size_t i = 0; i < cfg.sweep_points; ++i) {
        const double a = cfg.sweep_points > 1 ? static_cast<double>(i) / static_cast<double>(cfg.sweep_points - 1) : 0.0;
        pts.push_back({base + "-noise" + std::to_string(i), 0.25 + a * (1.2 - 0.25), 0.001 + a * (0.017 - 0.001),
                       cfg.dpca.lambda});
      }
      break;
    case Sweep::lambda:
      for (std::size_t i = 0; i < cfg.lambdas.size(); ++i)
        pts.push_back({base + "-lambda" + std::to_string(i), cfg.eta_t, cfg.eta_s, cfg.lambdas[i]});
      break;
  }
  return pts;
}

std::optional<FirmThresholds> firm_for(Solver s, const DpcaConfig& cfg) {
  if (s == Solver::pca || s == Solver::dpca1a) return std::nullopt;
  return cfg.firm;
}

std::vector<std::string> synth_row(const std::string& row, const std::string& case_name, Solver s,
                                   const DpcaConfig& cfg, const std::string& seed, const std::string& eta_t,
                                   const std::string& eta_s, const std::string& lambda, double corr, double f,
                                   double ev, double iters, double conv, double secs) {
  const auto firm = firm_for(s, cfg);
  return {row,
          case_name,
          std::string(to_string(s)),
          lambda,
          firm ? fmt(firm->rho1()) : std::string(),
          firm ? fmt(firm->rho2()) : std::string(),
          fmt(cfg.K),
          seed,
          eta_t,
          eta_s,
          fmt(corr),
          fmt(f),
          fmt(ev),
          fmt(iters),
          fmt(conv),
          fmt(secs)};
}

void save_maps(const fs::path& dir, const Matrix& z, const SourceMatch& m, std::size_t grid) {
  fs::create_directories(dir);
  for (std::size_t j = 0; j < m.recovered_row.size(); ++j) {
    const auto row = z.row(m.recovered_row[j]);
    save_pgm(dir / ("source_" + std::to_string(j) + ".pgm"), map_to_image(row, grid, grid));
  }
}

int run_synth(const ExperimentConfig& cfg, std::ostream& log, std::string& stage) {
  const OverlapPreset overlap = parse_overlap(cfg.overlap);
  const auto points = sweep_points(cfg);
  std::vector<std::string> rows;

  for (const SweepPoint& pt : points) {
    DpcaConfig dcfg = cfg.dpca;
    dcfg.lambda = pt.lambda;
    const std::size_t n_solvers = cfg.solvers.size();
    std::vector<SynthTrial> results(cfg.trials * n_solvers);
    std::vector<std::optional<std::pair<Matrix, SourceMatch>>> first_maps(n_solvers);
    std::size_t grid = 0;

    stage = "solver";
    parallel_for(cfg.trials, cfg.worker_count(), [&](std::size_t t) {
      SynthConfig sc = SynthConfig::preset(overlap);
      sc.eta_t = pt.eta_t;
      sc.eta_s = pt.eta_s;
      sc.seed = cfg.seed + t;
      if (cfg.spread) sc.spread = *cfg.spread;
      if (cfg.amplitude) sc.amplitude = *cfg.amplitude;
      const SynthScene scene = generate_scene(sc);
      const Matrix xc = center_columns(scene.X).matrix;
      const std::size_t k = std::min({dcfg.K, xc.rows(), xc.cols()});
      const SvdFactors svd = truncated_svd(xc, k);
      if (t == 0) grid = sc.grid;
      for (std::size_t s = 0; s < n_solvers; ++s) {
        const auto t0 = std::chrono::steady_clock::now();
        const DpcaFactorization f = fit(cfg.solvers[s], xc, svd, dcfg);
        const double secs = seconds_since(t0);
        SynthTrial& r = results[s * cfg.trials + t];
        r.seed = sc.seed;
        r.eta_t = sc.eta_t;
        r.eta_s = sc.eta_s;
        r.seconds = secs;
        r.iterations = f.iterations_run;
        r.converged = f.converged;
        r.lambda_used = f.lambda_used;
        r.explained = explained_variance(xc, f.Z);
        if (f.Z.rows() == scene.LV.rows()) {
          const SourceMatch m = match_sources(f.Z, scene.LV);
          r.correlation = m.mean_correlation;
          double fsum = 0.0;
          for (std::size_t j = 0; j < m.recovered_row.size(); ++j)
            fsum += fscore_maps(f.Z.row(m.recovered_row[j]), scene.masks[j]).fscore;
          r.fscore = fsum / static_cast<double>(m.recovered_row.size());
          if (t == 0) first_maps[s] = std::make_pair(f.Z, m);
        } else {
          r.correlation = std::nan("");
          r.fscore = std::nan("");
        }
      }
    });

    stage = "io";
    for (std::size_t s = 0; s < n_solvers; ++s) {
      const Solver solver = cfg.solvers[s];
      std::vector<double> corr, fsc, ev, it, conv, secs;
      for (std::size_t t = 0; t < cfg.trials; ++t) {
        const SynthTrial& r = results[s * cfg.trials + t];
        rows.push_back(join_row(synth_row("trial", pt.case_name, solver, dcfg, std::to_string(r.seed), fmt(r.eta_t),
                                          fmt(r.eta_s), fmt(r.lambda_used), r.correlation, r.fscore, r.explained,
                                          static_cast<double>(r.iterations), r.converged ? 1.0 : 0.0, r.seconds)));
        corr.push_back(r.correlation);
        fsc.push_back(r.fscore);
        ev.push_back(r.explained);
        it.push_back(static_cast<double>(r.iterations));
        conv.push_back(r.converged ? 1.0 : 0.0);
        secs.push_back(r.seconds);
      }
      const std::string lam = fmt(results[s * cfg.trials].lambda_used);
      const Stats c = stats(corr), fs_ = stats(fsc), e = stats(ev), i = stats(it), v = stats(conv), sc = stats(secs);
      rows.push_back(join_row(synth_row("mean", pt.case_name, solver, dcfg, "", fmt(pt.eta_t), fmt(pt.eta_s), lam,
                                        c.mean, fs_.mean, e.mean, i.mean, v.mean, sc.mean)));
      rows.push_back(join_row(synth_row("std", pt.case_name, solver, dcfg, "", fmt(pt.eta_t), fmt(pt.eta_s), lam,
                                        c.std, fs_.std, e.std, i.std, v.std, sc.std)));
      log << pt.case_name << ' ' << to_string(solver) << " mean_correlation=" << fmt(c.mean)
          << " std=" << fmt(c.std) << " fscore=" << fmt(fs_.mean) << '\n';
      if (first_maps[s])
        save_maps(cfg.out / "maps" / pt.case_name / std::string(to_string(solver)), first_maps[s]->first,
                  first_maps[s]->second, grid);
    }
  }
  append_rows(cfg.out / "synth.csv", kSynthHeader, rows);
  return 0;
}

// --------------------------------------------------------------------------
// Imaging

struct ImagingRow {
  std::string case_name;
  Solver solver = Solver::pca;
  double lambda = 0.0;
  std::size_t K = 0;
  double psnr_in = std::nan("");
  double psnr_out = std::nan("");
  double sse = std::nan("");
  double precision = std::nan("");
  double recall = std::nan("");
  double fscore = std::nan("");
  double seconds = 0.0;
};

std::string imaging_line(const ImagingRow& r, const DpcaConfig& cfg) {
  const auto firm = firm_for(r.solver, cfg);
  return join_row({r.case_name, std::string(to_string(r.solver)), fmt(r.lambda),
                   firm ? fmt(firm->rho1()) : std::string(), firm ? fmt(firm->rho2()) : std::string(), fmt(r.K),
                   fmt(r.psnr_in), fmt(r.psnr_out), fmt(r.sse), fmt(r.precision), fmt(r.recall), fmt(r.fscore),
                   fmt(r.seconds)});
}

// Trial rows ordered by trial then solver, followed by per-solver mean and
// std rows when there is more than one trial.
void write_imaging(const ExperimentConfig& cfg, const std::vector<ImagingRow>& results, std::ostream& log) {
  const std::string command(to_string(cfg.command));
  std::vector<std::string> lines;
  for (const auto& r : results) {
    lines.push_back(imaging_line(r, cfg.dpca));
    log << r.case_name << ' ' << to_string(r.solver);
    if (!std::isnan(r.psnr_out)) log << " psnr_in=" << fmt(r.psnr_in) << " psnr_out=" << fmt(r.psnr_out);
    if (!std::isnan(r.fscore)) log << " fscore=" << fmt(r.fscore);
    log << '\n';
  }
  if (cfg.trials > 1) {
    for (std::size_t s = 0; s < cfg.solvers.size(); ++s) {
      std::vector<std::vector<double>> cols(7);
      for (std::size_t t = 0; t < cfg.trials; ++t) {
        const ImagingRow& r = results[t * cfg.solvers.size() + s];
        const double vals[7] = {r.psnr_in, r.psnr_out, r.sse, r.precision, r.recall, r.fscore, r.seconds};
        for (int c = 0; c < 7; ++c) cols[c].push_back(vals[c]);
      }
      for (const char* kind : {"mean", "std"}) {
        ImagingRow agg = results[s];
        agg.case_name = command + "-" + kind;
        double* fields[7] = {&agg.psnr_in, &agg.psnr_out, &agg.sse, &agg.precision, &agg.recall, &agg.fscore,
                             &agg.seconds};
        for (int c = 0; c < 7; ++c) {
          const Stats st = stats(cols[c]);
          *fields[c] = std::string(kind) == "mean" ? st.mean : st.std;
        }
        lines.push_back(imaging_line(agg, cfg.dpca));
      }
    }
  }
  append_rows(cfg.out / "metrics.csv", kImagingHeader, lines);
}

std::string trial_case(const ExperimentConfig& cfg, std::uint64_t seed) {
  return std::string(to_string(cfg.command)) + "-s" + std::to_string(seed);
}

std::vector<Image> load_corpus(const fs::path& dir) {
  std::vector<fs::path> files;
  for (const auto& e : fs::directory_iterator(dir))
    if (e.is_regular_file() && e.path().extension() == ".pgm") files.push_back(e.path());
  std::sort(files.begin(), files.end());
  if (files.empty()) throw std::invalid_argument("no .pgm files in " + dir.string());
  std::vector<Image> out;
  for (const auto& f : files) out.push_back(load_pgm(f));
  return out;
}

int run_bgsub(const ExperimentConfig& cfg, std::ostream& log, std::string& stage) {
  const std::size_t ns = cfg.solvers.size();
  std::vector<ImagingRow> results(cfg.trials * ns);
  std::vector<std::string> static_rows;

  for (std::size_t t = 0; t < cfg.trials; ++t) {
    const std::uint64_t seed = cfg.seed + t;
    stage = "input";
    FrameStack stack;
    std::vector<std::vector<bool>> truth;
    const bool surrogate = cfg.input.empty();
    if (surrogate) {
      MovingSquareConfig mc;
      mc.seed = seed;
      MovingSquareScene scene = moving_square_stack(mc);
      stack = std::move(scene.stack);
      truth = std::move(scene.truth);
    } else {
      stack = load_frame_stack(cfg.input);
      if (!cfg.mask.empty()) {
        std::vector<fs::path> files;
        for (const auto& e : fs::directory_iterator(cfg.mask))
          if (e.is_regular_file() && e.path().extension() == ".pgm") files.push_back(e.path());
        std::sort(files.begin(), files.end());
        if (files.size() != stack.size())
          throw std::invalid_argument("truth directory must hold one mask per frame");
        for (const auto& f : files) truth.push_back(load_mask(f));
      }
    }
    const FrameStack still = surrogate ? static_stack(stack.height, stack.size(), seed) : FrameStack{};

    stage = "solver";
    parallel_for(ns, cfg.worker_count(), [&](std::size_t s) {
      const Solver solver = cfg.solvers[s];
      const auto t0 = std::chrono::steady_clock::now();
      const DpcaFactorization f = bgsub_train(stack, solver, cfg.dpca);
      std::vector<std::vector<bool>> masks;
      for (std::size_t i = 0; i < stack.size(); ++i)
        masks.push_back(bgsub_foreground(f, i, stack.frames[i].data()));
      ImagingRow& r = results[t * ns + s];
      r.seconds = seconds_since(t0);
      r.case_name = trial_case(cfg, seed);
      r.solver = solver;
      r.lambda = f.lambda_used;
      r.K = cfg.dpca.K;
      if (!truth.empty()) {
        std::vector<bool> all_det, all_truth;
        for (std::size_t i = 0; i < masks.size(); ++i) {
          all_det.insert(all_det.end(), masks[i].begin(), masks[i].end());
          all_truth.insert(all_truth.end(), truth[i].begin(), truth[i].end());
        }
        const DetectionScores sc = score_masks(all_det, all_truth);
        r.precision = sc.precision;
        r.recall = sc.recall;
        r.fscore = sc.fscore;
      }
      const fs::path dir = cfg.out / "foreground" / (r.case_name + "-" + std::string(to_string(solver)));
      fs::create_directories(dir);
      for (std::size_t i = 0; i < masks.size(); ++i) {
        char name[32];
        std::snprintf(name, sizeof name, "frame_%04zu.pgm", i);
        save_mask(dir / name, masks[i], stack.height, stack.width);
      }
    });

    if (surrogate) {
      for (std::size_t s = 0; s < ns; ++s) {
        const DpcaFactorization f = bgsub_train(still, cfg.solvers[s], cfg.dpca);
        std::size_t count = 0;
        for (std::size_t i = 0; i < still.size(); ++i)
          for (bool b : bgsub_foreground(f, i, still.frames[i].data())) count += b;
        static_rows.push_back(join_row({trial_case(cfg, seed), std::string(to_string(cfg.solvers[s])), fmt(count)}));
        log << trial_case(cfg, seed) << ' ' << to_string(cfg.solvers[s]) << " static_foreground=" << count << '\n';
      }
    }
  }
  stage = "io";
  write_imaging(cfg, results, log);
  if (!static_rows.empty())
    append_rows(cfg.out / "bgsub_static.csv", "case,algorithm,foreground_pixels", static_rows);
  return 0;
}

int run_denoise(const ExperimentConfig& cfg, std::ostream& log, std::string& stage) {
  const std::size_t ns = cfg.solvers.size();
  std::vector<ImagingRow> results(cfg.trials * ns);
  for (std::size_t t = 0; t < cfg.trials; ++t) {
    const std::uint64_t seed = cfg.seed + t;
    stage = "input";
    const Image clean = cfg.input.empty() ? piecewise_smooth_image(256, seed) : load_pgm(cfg.input);
    const Image noisy = add_gaussian_noise(clean, sigma_for_psnr(cfg.psnr_in), seed + 1000);
    const double psnr_in = psnr(clean, noisy);
    const std::string case_name = trial_case(cfg, seed);
    fs::create_directories(cfg.out / "images");
    save_pgm(cfg.out / "images" / (case_name + "-noisy.pgm"), noisy);

    DenoiseConfig dc;
    dc.edge = cfg.patch_edge;
    dc.K = cfg.dpca.K;
    dc.train_patches = cfg.patches;
    dc.seed = seed;
    dc.dpca = cfg.dpca;

    stage = "solver";
    parallel_for(ns, cfg.worker_count(), [&](std::size_t s) {
      const Solver solver = cfg.solvers[s];
      const auto t0 = std::chrono::steady_clock::now();
      const DenoiseResult res = denoise(noisy, solver, dc);
      ImagingRow& r = results[t * ns + s];
      r.seconds = seconds_since(t0);
      r.case_name = case_name;
      r.solver = solver;
      r.lambda = res.model.lambda_used;
      r.K = res.model.K();
      r.psnr_in = psnr_in;
      r.psnr_out = psnr(clean, res.image);
      r.sse = sse(clean, res.image);
      save_pgm(cfg.out / "images" / (case_name + "-" + std::string(to_string(solver)) + ".pgm"), res.image);
    });
  }
  stage = "io";
  write_imaging(cfg, results, log);
  return 0;
}

int run_inpaint(const ExperimentConfig& cfg, std::ostream& log, std::string& stage) {
  const std::size_t ns = cfg.solvers.size();
  std::vector<ImagingRow> results(cfg.trials * ns);
  stage = "input";
  const std::vector<Image> corpus = cfg.corpus.empty() ? training_corpus() : load_corpus(cfg.corpus);
  for (std::size_t t = 0; t < cfg.trials; ++t) {
    const std::uint64_t seed = cfg.seed + t;
    stage = "input";
    const Image clean = cfg.input.empty() ? piecewise_smooth_image(256, seed + 1) : load_pgm(cfg.input);
    std::vector<bool> known;
    if (cfg.mask.empty()) {
      known = text_mask(clean.rows(), clean.cols(), cfg.mask_fraction, seed + 2);
    } else {
      std::size_t h = 0, w = 0;
      known = load_mask(cfg.mask, &h, &w);
      if (h != clean.rows() || w != clean.cols()) throw std::invalid_argument("mask size differs from the image");
    }
    const Image masked = apply_mask(clean, known);
    const double psnr_in = psnr(clean, masked);
    const std::string case_name = trial_case(cfg, seed);
    fs::create_directories(cfg.out / "images");
    save_pgm(cfg.out / "images" / (case_name + "-masked.pgm"), masked);

    stage = "solver";
    parallel_for(ns, cfg.worker_count(), [&](std::size_t s) {
      const Solver solver = cfg.solvers[s];
      const auto t0 = std::chrono::steady_clock::now();
      const DpcaFactorization model =
          train_dictionary(corpus, solver, cfg.dpca, cfg.patch_edge, cfg.corpus_patches, seed);
      InpaintTask task{masked, known, cfg.sparsity, cfg.patch_edge, 1};
      const InpaintResult res = inpaint(task, model.U);
      ImagingRow& r = results[t * ns + s];
      r.seconds = seconds_since(t0);
      r.case_name = case_name;
      r.solver = solver;
      r.lambda = model.lambda_used;
      r.K = model.K();
      r.psnr_in = psnr_in;
      r.psnr_out = psnr(clean, res.image);
      r.sse = sse(clean, res.image);
      save_pgm(cfg.out / "images" / (case_name + "-" + std::string(to_string(solver)) + ".pgm"), res.image);
    });
  }
  stage = "io";
  write_imaging(cfg, results, log);
  return 0;
}

std::string one_line(std::string s) {
  std::replace(s.begin(), s.end(), '\n', ' ');
  std::replace(s.begin(), s.end(), '\r', ' ');
  return s;
}

}  // namespace

// --------------------------------------------------------------------------

std::string_view to_string(Command c) noexcept {
  switch (c) {
    case Command::synth: return "synth";
    case Command::bgsub: return "bgsub";
    case Command::denoise: return "denoise";
    case Command::inpaint: return "inpaint";
    case Command::selftest: return "selftest";
  }
  return "selftest";
}

Command parse_command(std::string_view name) {
  for (Command c : {Command::synth, Command::bgsub, Command::denoise, Command::inpaint, Command::selftest})
    if (to_string(c) == name) return c;
  throw std::invalid_argument("unknown command '" + std::string(name) + "'");
}

ExperimentConfig ExperimentConfig::defaults(Command command) {
  ExperimentConfig cfg;
  cfg.command = command;
  switch (command) {
    case Command::synth:
      cfg.solvers = {Solver::pca, Solver::dpca1b, Solver::dpca2};
      cfg.trials = 15;
      cfg.dpca.K = 8;
      cfg.dpca.lambda = 0.67;
      cfg.dpca.scale_lambda = true;
      cfg.dpca.firm = FirmThresholds(0.12, 0.24);
      cfg.dpca.max_outer = 30;
      break;
    case Command::bgsub:
      cfg.solvers = {Solver::pca, Solver::dpca1b};
      cfg.dpca.K = 5;
      cfg.dpca.lambda = 3e5;
      cfg.dpca.firm = FirmThresholds(4.0, 16.0);
      cfg.dpca.max_outer = 20;
      break;
    case Command::denoise:
      cfg.solvers = {Solver::pca, Solver::dpca2};
      cfg.dpca.K = 64;
      cfg.dpca.lambda = 5e4;
      cfg.dpca.firm = FirmThresholds(10.0, 45.0);
      cfg.dpca.max_outer = 30;
      break;
    case Command::inpaint:
      cfg.solvers = {Solver::pca, Solver::dpca2};
      cfg.dpca.K = 64;
      cfg.dpca.lambda = 3000.0;
      cfg.dpca.firm = FirmThresholds(0.1, 1.0);
      cfg.dpca.max_outer = 10;
      break;
    case Command::selftest:
      break;
  }
  return cfg;
}

void ExperimentConfig::set(const std::string& raw_key, const std::string& raw_value) {
  std::string key = trim(raw_key);
  std::replace(key.begin(), key.end(), '-', '_');
  const std::string value = trim(raw_value);
  auto firm_pair = [&]() -> std::pair<double, double> {
    return dpca.firm ? std::pair{dpca.firm->rho1(), dpca.firm->rho2()} : std::pair{0.0, 1e12};
  };

  if (key == "command") {
    command = parse_command(value);
  } else if (key == "solver" || key == "solvers") {
    solvers.clear();
    for (const auto& s : split(value, ','))
      if (!s.empty()) solvers.push_back(parse_solver(s));
    if (solvers.empty()) throw std::invalid_argument("solver: empty list");
  } else if (key == "k" || key == "K") {
    dpca.K = static_cast<std::size_t>(parse_u64(key, value));
  } else if (key == "lambda") {
    dpca.lambda = parse_double(key, value);
  } else if (key == "scale_lambda") {
    dpca.scale_lambda = parse_bool(key, value);
  } else if (key == "rho1") {
    dpca.firm = FirmThresholds(parse_double(key, value), firm_pair().second);
  } else if (key == "rho2") {
    dpca.firm = FirmThresholds(firm_pair().first, parse_double(key, value));
  } else if (key == "firm") {
    if (value == "none") {
      dpca.firm.reset();
    } else if (value == "inert") {
      dpca.firm = FirmThresholds::inert();
    } else {
      throw std::invalid_argument("firm: expected none or inert (set rho1/rho2 for levels)");
    }
  } else if (key == "outer_tol") {
    dpca.outer_tol = parse_double(key, value);
  } else if (key == "inner_tol") {
    dpca.inner_tol = parse_double(key, value);
  } else if (key == "max_outer") {
    dpca.max_outer = static_cast<std::size_t>(parse_u64(key, value));
  } else if (key == "max_inner") {
    dpca.max_inner = static_cast<std::size_t>(parse_u64(key, value));
  } else if (key == "trials") {
    trials = static_cast<std::size_t>(parse_u64(key, value));
  } else if (key == "seed") {
    seed = parse_u64(key, value);
  } else if (key == "out") {
    out = value;
  } else if (key == "input") {
    input = value;
  } else if (key == "mask") {
    mask = value;
  } else if (key == "corpus") {
    corpus = value;
  } else if (key == "overlap") {
    parse_overlap(value);
    overlap = value;
  } else if (key == "eta_t") {
    eta_t = parse_double(key, value);
  } else if (key == "eta_s") {
    eta_s = parse_double(key, value);
  } else if (key == "spread") {
    spread = parse_double(key, value);
  } else if (key == "amplitude") {
    amplitude = parse_double(key, value);
  } else if (key == "sweep") {
    sweep = parse_sweep(value);
  } else if (key == "sweep_points") {
    sweep_points = static_cast<std::size_t>(parse_u64(key, value));
  } else if (key == "lambdas") {
    lambdas.clear();
    for (const auto& s : split(value, ','))
      if (!s.empty()) lambdas.push_back(parse_double(key, s));
  } else if (key == "psnr_in") {
    psnr_in = parse_double(key, value);
  } else if (key == "patches") {
    patches = static_cast<std::size_t>(parse_u64(key, value));
  } else if (key == "patch_edge") {
    patch_edge = static_cast<std::size_t>(parse_u64(key, value));
  } else if (key == "sparsity") {
    sparsity = static_cast<std::size_t>(parse_u64(key, value));
  } else if (key == "mask_fraction") {
    mask_fraction = parse_double(key, value);
  } else if (key == "corpus_patches") {
    corpus_patches = static_cast<std::size_t>(parse_u64(key, value));
  } else if (key == "threads") {
    threads = static_cast<std::size_t>(parse_u64(key, value));
  } else {
    throw std::invalid_argument("unknown config key '" + raw_key + "'");
  }
}

std::map<std::string, std::string> ExperimentConfig::to_key_values() const {
  std::map<std::string, std::string> kv{
      {"command", std::string(to_string(command))},
      {"solver", join_solvers(solvers)},
      {"K", fmt(dpca.K)},
      {"lambda", fmt(dpca.lambda)},
      {"scale_lambda", dpca.scale_lambda ? "true" : "false"},
      {"outer_tol", fmt(dpca.outer_tol)},
      {"inner_tol", fmt(dpca.inner_tol)},
      {"max_outer", fmt(dpca.max_outer)},
      {"max_inner", fmt(dpca.max_inner)},
      {"trials", fmt(trials)},
      {"seed", std::to_string(seed)},
      {"out", out.string()},
      {"overlap", overlap},
      {"eta_t", fmt(eta_t)},
      {"eta_s", fmt(eta_s)},
      {"sweep", std::string(to_string(sweep))},
      {"sweep_points", fmt(sweep_points)},
      {"psnr_in", fmt(psnr_in)},
      {"patches", fmt(patches)},
      {"patch_edge", fmt(patch_edge)},
      {"sparsity", fmt(sparsity)},
      {"mask_fraction", fmt(mask_fraction)},
      {"corpus_patches", fmt(corpus_patches)},
      {"threads", fmt(threads)},
  };
  if (dpca.firm) {
    kv["rho1"] = fmt(dpca.firm->rho1());
    kv["rho2"] = fmt(dpca.firm->rho2());
  } else {
    kv["firm"] = "none";
  }
  if (!input.empty()) kv["input"] = input.string();
  if (!mask.empty()) kv["mask"] = mask.string();
  if (!corpus.empty()) kv["corpus"] = corpus.string();
  if (spread) kv["spread"] = fmt(*spread);
  if (amplitude) kv["amplitude"] = fmt(*amplitude);
  if (!lambdas.empty()) {
    std::string l;
    for (std::size_t i = 0; i < lambdas.size(); ++i) l += (i ? "," : "") + fmt(lambdas[i]);
    kv["lambdas"] = l;
  }
  return kv;
}

void ExperimentConfig::validate() const {
  if (command == Command::selftest) return;
  if (solvers.empty()) throw std::invalid_argument("at least one solver is required");
  if (trials == 0) throw std::invalid_argument("trials must be >= 1");
  dpca.validate();
  for (Solver s : solvers)
    if ((s == Solver::dpca1b || s == Solver::dpca2) && !dpca.firm)
      throw std::invalid_argument(std::string(to_string(s)) + " needs rho1/rho2");
  if (command == Command::synth) {
    parse_overlap(overlap);
    if (sweep == Sweep::noise && sweep_points == 0) throw std::invalid_argument("sweep_points must be >= 1");
    if (sweep == Sweep::lambda && lambdas.empty()) throw std::invalid_argument("lambda sweep needs lambdas");
    if (!(eta_t >= 0.0) || !(eta_s >= 0.0)) throw std::invalid_argument("noise variances must be >= 0");
  }
  if (command == Command::denoise && !(psnr_in > 0.0)) throw std::invalid_argument("psnr_in must be > 0");
  if (command == Command::inpaint && !(mask_fraction >= 0.0 && mask_fraction < 1.0))
    throw std::invalid_argument("mask_fraction must be in [0, 1)");
  if (patch_edge == 0) throw std::invalid_argument("patch_edge must be >= 1");
  for (const fs::path* p : {&input, &mask, &corpus})
    if (!p->empty() && !fs::exists(*p)) throw StageError("input", "missing input: " + p->string());
}

std::size_t ExperimentConfig::worker_count() const {
  if (threads > 0) return threads;
  if (const char* env = std::getenv("DPCA_THREADS")) {
    std::size_t v = 0;
    const std::string s(env);
    const auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
    if (ec == std::errc() && ptr == s.data() + s.size() && v > 0) return v;
  }
  return std::max(1u, std::thread::hardware_concurrency());
}

ExperimentConfig load_experiment(const std::optional<fs::path>& file,
                                 const std::map<std::string, std::string>& overrides) {
  std::map<std::string, std::string> from_file;
  if (file) {
    if (!fs::exists(*file)) throw StageError("input", "missing config file: " + file->string());
    from_file = read_key_values(*file);
  }
  std::string command;
  if (auto it = overrides.find("command"); it != overrides.end()) {
    command = it->second;
  } else if (auto jt = from_file.find("command"); jt != from_file.end()) {
    command = jt->second;
  } else {
    throw std::invalid_argument("no command given");
  }
  ExperimentConfig cfg = ExperimentConfig::defaults(parse_command(trim(command)));
  // rho1 and rho2 given in the same layer are applied together so the new
  // pair is validated as a whole.
  auto apply = [&cfg](const std::map<std::string, std::string>& layer) {
    const auto r1 = layer.find("rho1");
    const auto r2 = layer.find("rho2");
    const bool paired = r1 != layer.end() && r2 != layer.end();
    if (paired)
      cfg.dpca.firm = FirmThresholds(parse_double("rho1", r1->second), parse_double("rho2", r2->second));
    for (const auto& [k, v] : layer)
      if (k != "command" && !(paired && (k == "rho1" || k == "rho2"))) cfg.set(k, v);
  };
  apply(from_file);
  apply(overrides);
  return cfg;
}

int run(const ExperimentConfig& cfg, std::ostream& log) {
  std::string stage = "config";
  try {
    cfg.validate();
    if (cfg.command == Command::selftest) {
      stage = "selftest";
      const SelftestResult r = run_selftest(log, cfg.seed);
      if (!r.ok()) {
        std::cerr << "error=selftest message=" << r.failures << " of " << r.checks << " checks failed\n";
        return 1;
      }
      return 0;
    }
    stage = "io";
    fs::create_directories(cfg.out);
    write_key_values(cfg.out / (std::string(to_string(cfg.command)) + ".config"), cfg.to_key_values());
    switch (cfg.command) {
      case Command::synth: return run_synth(cfg, log, stage);
      case Command::bgsub: return run_bgsub(cfg, log, stage);
      case Command::denoise: return run_denoise(cfg, log, stage);
      case Command::inpaint: return run_inpaint(cfg, log, stage);
      case Command::selftest: break;
    }
    return 0;
  } catch (const StageError& e) {
    std::cerr << "error=" << e.category() << " message=" << one_line(e.what()) << '\n';
  } catch (const std::exception& e) {
    std::cerr << "error=" << stage << " message=" << one_line(e.what()) << '\n';
  }
  return stage == "config" ? 2 : 1;
}

// --------------------------------------------------------------------------

const std::string& CsvTable::field(std::size_t r, const std::string& column) const {
  const auto it = std::find(header.begin(), header.end(), column);
  if (it == header.end()) throw std::invalid_argument("no column '" + column + "'");
  const auto c = static_cast<std::size_t>(it - header.begin());
  if (r >= rows.size() || c >= rows[r].size()) throw std::out_of_range("CsvTable::field: row out of range");
  return rows[r][c];
}

CsvTable read_csv_table(const fs::path& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open " + path.string());
  CsvTable t;
  std::string line;
  if (!std::getline(in, line)) return t;
  t.header = split(trim(line), ',');
  while (std::getline(in, line)) {
    line = trim(line);
    if (line.empty()) continue;
    auto fields = split(line, ',');
    if (fields.size() != t.header.size())
      throw std::runtime_error(path.string() + ": row has " + std::to_string(fields.size()) + " fields, header has " +
                               std::to_string(t.header.size()));
    t.rows.push_back(std::move(fields));
  }
  return t;
}

RecordedRun parse_recorded_run(const CsvTable& table, std::size_t row) {
  auto has = [&](const char* c) { return std::find(table.header.begin(), table.header.end(), c) != table.header.end(); };
  auto opt_double = [&](const char* c) -> std::optional<double> {
    if (!has(c)) return std::nullopt;
    const std::string& v = table.field(row, c);
    if (v.empty()) return std::nullopt;
    return parse_double(c, v);
  };
  RecordedRun r;
  r.case_name = table.field(row, "case");
  r.solver = parse_solver(table.field(row, "algorithm"));
  r.lambda = parse_double("lambda", table.field(row, "lambda"));
  r.rho1 = opt_double("rho1");
  r.rho2 = opt_double("rho2");
  r.K = static_cast<std::size_t>(parse_u64("K", table.field(row, "K")));
  r.eta_t = opt_double("eta_t");
  r.eta_s = opt_double("eta_s");
  r.psnr_in = opt_double("psnr_in");
  if (has("seed") && !table.field(row, "seed").empty()) {
    r.seed = parse_u64("seed", table.field(row, "seed"));
  } else if (const auto pos = r.case_name.rfind("-s"); pos != std::string::npos) {
    const std::string tail = r.case_name.substr(pos + 2);
    if (!tail.empty() && std::all_of(tail.begin(), tail.end(), [](char c) { return c >= '0' && c <= '9'; }))
      r.seed = parse_u64("seed", tail);
  }
  return r;
}

// --------------------------------------------------------------------------

SelftestResult run_selftest(std::ostream& log, std::uint64_t seed) {
  SelftestResult res;
  auto check = [&](const std::string& name, bool ok) {
    ++res.checks;
    if (!ok) ++res.failures;
    log << (ok ? "ok   " : "FAIL ") << name << '\n';
  };

  Rng rng(seed);
  for (std::size_t k : {1u, 4u, 8u}) {
    Matrix a(60, k), b(k, 100);
    for (double& v : a.data()) v = rng.normal();
    for (double& v : b.data()) v = rng.normal();
    const Matrix x = matmul(a, b);
    DpcaConfig cfg;
    cfg.K = k;
    cfg.lambda = 0.0;
    cfg.firm = FirmThresholds::inert();
    for (Solver s : {Solver::dpca1a, Solver::dpca1b, Solver::dpca2}) {
      const DpcaFactorization f = fit(s, x, cfg);
      const double rel = frobenius_distance(x, f.reconstruct()) / frobenius_norm(x);
      check("reduction " + std::string(to_string(s)) + " K=" + std::to_string(k) + " rel_err=" + fmt(rel),
            rel <= 1e-6);
    }
  }

  check("soft_adaptive(2, 2) = 1.5", soft_adaptive(2.0, 2.0) == 1.5);
  check("soft_adaptive(0.5, 2) = 0", soft_adaptive(0.5, 2.0) == 0.0);
  check("soft_adaptive(y, 0) = y", soft_adaptive(-3.25, 0.0) == -3.25 && soft_adaptive(0.7, 0.0) == 0.7);
  const FirmThresholds t(1.0, 2.0);
  check("firm(0.5; 1, 2) = 0", firm(0.5, t) == 0.0);
  check("firm(3; 1, 2) = 3", firm(3.0, t) == 3.0);
  check("firm(1.5; 1, 2) = 1", firm(1.5, t) == 1.0);

  bool odd = true, nonexpansive = true, monotone = true;
  for (int i = 0; i < 10000; ++i) {
    const double y = 10.0 * rng.normal();
    const double y2 = y + std::abs(rng.normal());
    const double lam = 20.0 * rng.uniform();
    const double r1 = 3.0 * rng.uniform();
    const FirmThresholds ft(r1, r1 + 0.1 + 3.0 * rng.uniform());
    odd &= soft_adaptive(-y, lam) == -soft_adaptive(y, lam) && firm(-y, ft) == -firm(y, ft);
    nonexpansive &= std::abs(soft_adaptive(y, lam)) <= std::abs(y) && std::abs(firm(y, ft)) <= std::abs(y);
    monotone &= soft_adaptive(y2, lam) >= soft_adaptive(y, lam) && firm(y2, ft) >= firm(y, ft);
  }
  check("thresholds odd on 10^4 inputs", odd);
  check("thresholds shrink magnitudes on 10^4 inputs", nonexpansive);
  check("thresholds monotone on 10^4 inputs", monotone);
  log << res.checks - res.failures << '/' << res.checks << " checks passed\n";
  return res;
}

}  // namespace dpca
