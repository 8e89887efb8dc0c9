#include "dpca/synth.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>
#include <stdexcept>
#include <string>

#include "dpca/factorization_io.hpp"
#include "dpca/image.hpp"
#include "dpca/matrix_io.hpp"
#include "dpca/rng.hpp"

namespace dpca {

namespace {

// Mask cutoff relative to a blob's own peak, ≈ the 2σ ellipse.
const double kMaskLevel = std::exp(-2.0);

std::vector<double> render_blob(const BlobParams& b, double spread, std::size_t grid) {
  std::vector<double> out(grid * grid);
  const double sr = spread * b.axis_row;
  const double sc = spread * b.axis_col;
  const double ca = std::cos(b.angle);
  const double sa = std::sin(b.angle);
  for (std::size_t r = 0; r < grid; ++r) {
    for (std::size_t c = 0; c < grid; ++c) {
      const double dr = static_cast<double>(r) - b.center_row;
      const double dc = static_cast<double>(c) - b.center_col;
      const double u = ca * dr + sa * dc;
      const double v = -sa * dr + ca * dc;
      out[r * grid + c] = std::exp(-0.5 * (u * u / (sr * sr) + v * v / (sc * sc)));
    }
  }
  return out;
}

}  // namespace

std::vector<BlobParams> SynthConfig::default_layout() {
  // 3×3 lattice minus the centre, 24 px pitch, peaks falling by 2.5 overall.
  const std::vector<BlobParams> shapes{
      {10.0, 11.0, 0.3, 1.0, 1.3},  {11.0, 36.0, -0.5, 1.2, 0.9}, {12.0, 59.0, 0.8, 1.0, 1.1},
      {34.0, 12.0, 0.0, 1.3, 1.0},  {35.0, 59.0, 1.1, 0.9, 1.2},  {60.0, 12.0, -0.9, 1.1, 1.0},
      {58.0, 35.0, 0.4, 1.0, 1.25}, {59.0, 60.0, -0.2, 1.2, 1.0},
  };
  std::vector<BlobParams> out = shapes;
  for (std::size_t b = 0; b < out.size(); ++b)
    out[b].weight = std::pow(2.5, -static_cast<double>(b) / static_cast<double>(out.size() - 1));
  return out;
}

SynthConfig SynthConfig::preset(OverlapPreset overlap) {
  SynthConfig cfg;
  cfg.blobs = default_layout();
  cfg.spread = overlap == OverlapPreset::moderate ? 6.0 : 12.0;
  return cfg;
}

void SynthConfig::validate() const {
  if (n_sources < 1 || n_time < 2 || grid < 1)
    throw std::invalid_argument("SynthConfig: counts must be >= 1 (n_time >= 2)");
  if (!(eta_t >= 0.0) || !(eta_s >= 0.0) || !(spread_variance >= 0.0))
    throw std::invalid_argument("SynthConfig: variances must be >= 0");
  if (dct_bases.size() != n_sources)
    throw std::invalid_argument("SynthConfig: need one DCT basis index per source");
  if (blobs.size() != n_sources)
    throw std::invalid_argument("SynthConfig: need one blob descriptor per source");
  for (auto b : dct_bases)
    if (b < 1 || b >= n_time) throw std::invalid_argument("SynthConfig: DCT basis index out of range");
  if (!(spread > 0.0)) throw std::invalid_argument("SynthConfig: spread must be > 0");
  if (!(amplitude > 0.0)) throw std::invalid_argument("SynthConfig: amplitude must be > 0");
  for (const auto& b : blobs)
    if (!(b.weight > 0.0) || !(b.axis_row > 0.0) || !(b.axis_col > 0.0))
      throw std::invalid_argument("SynthConfig: blob weight and axes must be > 0");
}

std::vector<double> dct_time_course(std::size_t length, std::size_t basis) {
  std::vector<double> tc(length);
  const double n = static_cast<double>(length);
  for (std::size_t t = 0; t < length; ++t) {
    tc[t] = std::cos(std::numbers::pi * static_cast<double>(basis) * (2.0 * static_cast<double>(t) + 1.0) /
                     (2.0 * n));
  }
  double mean = 0.0;
  for (double v : tc) mean += v;
  mean /= n;
  double ss = 0.0;
  for (double& v : tc) {
    v -= mean;
    ss += v * v;
  }
  const double sd = std::sqrt(ss / (n - 1.0));
  if (sd == 0.0) throw std::invalid_argument("dct_time_course: basis has zero variance");
  for (double& v : tc) v /= sd;
  return tc;
}

SynthScene generate_scene(const SynthConfig& cfg) {
  cfg.validate();
  const std::size_t s = cfg.n_sources;
  const std::size_t n = cfg.n_time;
  const std::size_t p = cfg.voxels();

  SynthScene scene;
  scene.PC = Matrix(n, s);
  for (std::size_t i = 0; i < s; ++i) scene.PC.set_col(i, dct_time_course(n, cfg.dct_bases[i]));

  Rng layout(cfg.layout_seed);
  const double spread_sd = std::sqrt(cfg.spread_variance);
  scene.LV = Matrix(s, p);
  scene.masks.assign(s, std::vector<bool>(p, false));
  for (std::size_t i = 0; i < s; ++i) {
    double spread = layout.normal(cfg.spread, spread_sd);
    while (spread <= 0.0) spread = layout.normal(cfg.spread, spread_sd);
    scene.spreads.push_back(spread);
    const std::vector<double> blob = render_blob(cfg.blobs[i], spread, cfg.grid);
    const double peak = *std::max_element(blob.begin(), blob.end());
    auto row = scene.LV.row(i);
    for (std::size_t v = 0; v < p; ++v) {
      row[v] = cfg.amplitude * cfg.blobs[i].weight * blob[v] / peak;
      scene.masks[i][v] = blob[v] > kMaskLevel * peak;
    }
  }

  Rng noise(cfg.seed);
  Matrix pc_noisy = scene.PC;
  const double sd_t = std::sqrt(cfg.eta_t);
  for (double& v : pc_noisy.data()) v += sd_t * noise.normal();
  Matrix lv_noisy = scene.LV;
  const double sd_s = std::sqrt(cfg.eta_s);
  for (double& v : lv_noisy.data()) v += sd_s * noise.normal();
  scene.X = matmul(pc_noisy, lv_noisy);
  return scene;
}

void export_scene(const std::filesystem::path& dir, const SynthConfig& cfg, const SynthScene& scene) {
  std::filesystem::create_directories(dir);
  save_csv(dir / "X.csv", scene.X);
  save_csv(dir / "PC.csv", scene.PC);
  save_csv(dir / "LV.csv", scene.LV);

  std::string bases;
  for (std::size_t i = 0; i < cfg.dct_bases.size(); ++i) {
    if (i) bases += ' ';
    bases += std::to_string(cfg.dct_bases[i]);
  }
  std::string spreads;
  for (std::size_t i = 0; i < scene.spreads.size(); ++i) {
    if (i) spreads += ' ';
    spreads += format_double(scene.spreads[i]);
  }
  write_key_values(dir / "manifest",
                   {{"n_sources", std::to_string(cfg.n_sources)},
                    {"n_time", std::to_string(cfg.n_time)},
                    {"grid", std::to_string(cfg.grid)},
                    {"dct_bases", bases},
                    {"spread", format_double(cfg.spread)},
                    {"spread_variance", format_double(cfg.spread_variance)},
                    {"realized_spreads", spreads},
                    {"eta_t", format_double(cfg.eta_t)},
                    {"eta_s", format_double(cfg.eta_s)},
                    {"amplitude", format_double(cfg.amplitude)},
                    {"seed", std::to_string(cfg.seed)},
                    {"layout_seed", std::to_string(cfg.layout_seed)}});

  for (std::size_t i = 0; i < scene.LV.rows(); ++i) {
    save_pgm(dir / ("lv_" + std::to_string(i + 1) + ".pgm"),
             map_to_image(scene.LV.row(i), cfg.grid, cfg.grid));
  }
}

double pearson(std::span<const double> a, std::span<const double> b) {
  if (a.size() != b.size()) throw std::invalid_argument("pearson: length mismatch");
  const double n = static_cast<double>(a.size());
  if (a.empty()) return 0.0;
  double ma = 0.0, mb = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    ma += a[i];
    mb += b[i];
  }
  ma /= n;
  mb /= n;
  double sab = 0.0, saa = 0.0, sbb = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    const double da = a[i] - ma;
    const double db = b[i] - mb;
    sab += da * db;
    saa += da * da;
    sbb += db * db;
  }
  if (saa <= 0.0 || sbb <= 0.0) return 0.0;
  return sab / std::sqrt(saa * sbb);
}

std::vector<std::size_t> assign_max(const Matrix& score) {
  const std::size_t n = score.rows();
  if (score.cols() != n) throw std::invalid_argument("assign_max: score matrix must be square");
  if (n == 0) return {};
  // Shortest augmenting path Hungarian algorithm on cost = -score, 1-based.
  const double inf = std::numeric_limits<double>::infinity();
  std::vector<double> u(n + 1, 0.0), v(n + 1, 0.0), minv(n + 1);
  std::vector<std::size_t> match(n + 1, 0), way(n + 1, 0);
  std::vector<bool> used(n + 1);
  for (std::size_t i = 1; i <= n; ++i) {
    match[0] = i;
    std::size_t j0 = 0;
    std::fill(minv.begin(), minv.end(), inf);
    std::fill(used.begin(), used.end(), false);
    do {
      used[j0] = true;
      const std::size_t i0 = match[j0];
      double delta = inf;
      std::size_t j1 = 0;
      for (std::size_t j = 1; j <= n; ++j) {
        if (used[j]) continue;
        const double cur = -score(i0 - 1, j - 1) - u[i0] - v[j];
        if (cur < minv[j]) {
          minv[j] = cur;
          way[j] = j0;
        }
        if (minv[j] < delta) {
          delta = minv[j];
          j1 = j;
        }
      }
      for (std::size_t j = 0; j <= n; ++j) {
        if (used[j]) {
          u[match[j]] += delta;
          v[j] -= delta;
        } else {
          minv[j] -= delta;
        }
      }
      j0 = j1;
    } while (match[j0] != 0);
    do {
      const std::size_t j1 = way[j0];
      match[j0] = match[j1];
      j0 = j1;
    } while (j0 != 0);
  }
  std::vector<std::size_t> col_of_row(n);
  for (std::size_t j = 1; j <= n; ++j) col_of_row[match[j] - 1] = j - 1;
  return col_of_row;
}

SourceMatch match_sources(const Matrix& recovered, const Matrix& truth) {
  if (recovered.rows() != truth.rows() || recovered.cols() != truth.cols()) {
    throw std::invalid_argument("match_sources: recovered and truth shapes differ");
  }
  const std::size_t k = truth.rows();
  Matrix corr(k, k);   // truth × recovered, signed
  Matrix score(k, k);  // |corr|
  for (std::size_t j = 0; j < k; ++j) {
    for (std::size_t i = 0; i < k; ++i) {
      corr(j, i) = pearson(truth.row(j), recovered.row(i));
      score(j, i) = std::abs(corr(j, i));
    }
  }
  SourceMatch m;
  m.recovered_row = assign_max(score);
  m.signs.resize(k);
  m.correlations.resize(k);
  double total = 0.0;
  for (std::size_t j = 0; j < k; ++j) {
    const double c = corr(j, m.recovered_row[j]);
    m.signs[j] = c < 0.0 ? -1 : 1;
    m.correlations[j] = std::abs(c);
    total += m.correlations[j];
  }
  m.mean_correlation = k ? total / static_cast<double>(k) : 0.0;
  return m;
}

DetectionScores score_masks(const std::vector<bool>& detected, const std::vector<bool>& truth) {
  if (detected.size() != truth.size()) throw std::invalid_argument("score_masks: size mismatch");
  std::size_t tp = 0, n_det = 0, n_true = 0;
  for (std::size_t i = 0; i < truth.size(); ++i) {
    if (detected[i]) ++n_det;
    if (truth[i]) ++n_true;
    if (detected[i] && truth[i]) ++tp;
  }
  DetectionScores s;
  s.precision = n_det ? static_cast<double>(tp) / static_cast<double>(n_det) : 0.0;
  s.recall = n_true ? static_cast<double>(tp) / static_cast<double>(n_true) : 0.0;
  s.fscore = (s.precision + s.recall) > 0.0
                 ? 2.0 * s.precision * s.recall / (s.precision + s.recall)
                 : 0.0;
  return s;
}

std::vector<bool> binarize(std::span<const double> row, BinarizeRule rule) {
  double peak = 0.0;
  for (double v : row) peak = std::max(peak, std::abs(v));
  std::vector<bool> out(row.size(), false);
  if (peak == 0.0) return out;
  const double cut = rule.relative * peak;
  for (std::size_t i = 0; i < row.size(); ++i) out[i] = std::abs(row[i]) > cut;
  return out;
}

DetectionScores fscore_maps(std::span<const double> recovered, const std::vector<bool>& truth,
                            BinarizeRule rule) {
  if (std::none_of(truth.begin(), truth.end(), [](bool b) { return b; })) {
    throw std::invalid_argument("fscore_maps: truth mask has no active pixel");
  }
  return score_masks(binarize(recovered, rule), truth);
}

}  // namespace dpca
