#include "dpca/imaging.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <stdexcept>

#include "dpca/linalg.hpp"
#include "dpca/rng.hpp"
#include "dpca/thresholding.hpp"

namespace dpca {

namespace {

constexpr double kOmpResidualStop = 1e-6;
constexpr double kOmpDependence = 1e-10;

std::vector<bool> threshold_residual(std::span<const double> residual, const ThresholdRule& rule) {
  std::vector<double> mag(residual.size());
  for (std::size_t i = 0; i < residual.size(); ++i) mag[i] = std::abs(residual[i]);
  const double tau = rule.tau(residual);
  std::vector<bool> mask(residual.size());
  for (std::size_t i = 0; i < mag.size(); ++i) mask[i] = mag[i] > tau;
  return mask;
}

std::vector<std::size_t> positions(std::size_t extent, std::size_t edge, std::size_t stride) {
  std::vector<std::size_t> out;
  const std::size_t last = extent - edge;
  for (std::size_t p = 0; p <= last; p += stride) out.push_back(p);
  if (out.back() != last) out.push_back(last);
  return out;
}

// Row basis (orthonormal rows) of the data matrix a code row is projected on.
Matrix row_basis(const Matrix& x) {
  const std::size_t k = std::min(x.rows(), x.cols());
  return truncated_svd(x, k).Z;
}

}  // namespace

// ---------------------------------------------------------------------------

Matrix FrameStack::vectorized() const {
  validate();
  Matrix x(pixels(), frames.size());
  for (std::size_t f = 0; f < frames.size(); ++f) x.set_col(f, frames[f].data());
  return x;
}

void FrameStack::validate() const {
  if (frames.empty()) throw std::invalid_argument("FrameStack: no frames");
  for (const Image& f : frames) {
    if (f.rows() != height || f.cols() != width)
      throw std::invalid_argument("FrameStack: frames differ in size");
    require_finite(f, "FrameStack frame");
  }
}

FrameStack load_frame_stack(const std::filesystem::path& dir) {
  if (!std::filesystem::is_directory(dir))
    throw std::runtime_error("load_frame_stack: not a directory: " + dir.string());
  std::vector<std::filesystem::path> files;
  for (const auto& entry : std::filesystem::directory_iterator(dir)) {
    if (entry.is_regular_file() && entry.path().extension() == ".pgm") files.push_back(entry.path());
  }
  if (files.empty()) throw std::runtime_error("load_frame_stack: no .pgm files in " + dir.string());
  std::sort(files.begin(), files.end());
  FrameStack stack;
  for (const auto& f : files) stack.frames.push_back(load_pgm(f));
  stack.height = stack.frames.front().rows();
  stack.width = stack.frames.front().cols();
  stack.validate();
  return stack;
}

void save_frame_stack(const std::filesystem::path& dir, const FrameStack& stack) {
  stack.validate();
  std::filesystem::create_directories(dir);
  for (std::size_t i = 0; i < stack.frames.size(); ++i) {
    std::string name = std::to_string(i);
    name.insert(0, name.size() < 4 ? 4 - name.size() : 0, '0');
    save_pgm(dir / ("frame_" + name + ".pgm"), stack.frames[i]);
  }
}

std::vector<bool> load_mask(const std::filesystem::path& path, std::size_t* height,
                            std::size_t* width) {
  const Image img = load_pgm(path);
  if (height) *height = img.rows();
  if (width) *width = img.cols();
  std::vector<bool> mask(img.size());
  auto px = img.data();
  for (std::size_t i = 0; i < px.size(); ++i) mask[i] = px[i] != 0.0;
  return mask;
}

void save_mask(const std::filesystem::path& path, const std::vector<bool>& mask,
               std::size_t height, std::size_t width) {
  if (mask.size() != height * width) throw std::invalid_argument("save_mask: size mismatch");
  Image img(height, width);
  auto px = img.data();
  for (std::size_t i = 0; i < mask.size(); ++i) px[i] = mask[i] ? 255.0 : 0.0;
  save_pgm(path, img);
}

double ThresholdRule::tau(std::span<const double> residual) const {
  if (kind == Kind::fixed) return value;
  if (residual.empty()) return floor;
  double mean = 0.0;
  for (double r : residual) mean += std::abs(r);
  mean /= static_cast<double>(residual.size());
  double var = 0.0;
  for (double r : residual) var += (std::abs(r) - mean) * (std::abs(r) - mean);
  var /= static_cast<double>(residual.size());
  return std::max(mean + k_sigma * std::sqrt(var), floor);
}

DpcaFactorization bgsub_train(const FrameStack& stack, Solver solver, const DpcaConfig& cfg) {
  if (stack.size() < cfg.K) {
    throw std::invalid_argument("bgsub_train: need at least K=" + std::to_string(cfg.K) +
                                " frames, got " + std::to_string(stack.size()));
  }
  return fit(solver, stack.vectorized(), cfg);
}

std::vector<double> background_code(const DpcaFactorization& f, std::span<const double> frame) {
  if (frame.size() != f.U.rows()) throw std::invalid_argument("background_code: frame size mismatch");
  return matvec(pinv(f.U), frame);
}

std::vector<bool> bgsub_foreground(const DpcaFactorization& f, std::size_t index,
                                   std::span<const double> frame, const ThresholdRule& rule) {
  if (frame.size() != f.U.rows()) throw std::invalid_argument("bgsub_foreground: frame size mismatch");
  if (index >= f.Z.cols()) throw std::invalid_argument("bgsub_foreground: frame index out of range");
  const std::vector<double> background = matvec(f.U, f.Z.col(index));
  std::vector<double> r(frame.begin(), frame.end());
  for (std::size_t i = 0; i < r.size(); ++i) r[i] -= background[i];
  return threshold_residual(r, rule);
}

std::vector<bool> bgsub_foreground(std::span<const double> frame, const DpcaFactorization& f,
                                   const ThresholdRule& rule) {
  const std::vector<double> background = matvec(f.U, background_code(f, frame));
  std::vector<double> r(frame.begin(), frame.end());
  for (std::size_t i = 0; i < r.size(); ++i) r[i] -= background[i];
  return threshold_residual(r, rule);
}

// ---------------------------------------------------------------------------

PatchSet extract_patches(const Image& img, std::size_t edge, const PatchSampling& sampling) {
  if (edge == 0) throw std::invalid_argument("extract_patches: edge must be >= 1");
  if (sampling.stride == 0) throw std::invalid_argument("extract_patches: stride must be >= 1");
  if (img.rows() < edge || img.cols() < edge) {
    throw std::invalid_argument("extract_patches: image " + std::to_string(img.rows()) + "x" +
                                std::to_string(img.cols()) + " is smaller than the " +
                                std::to_string(edge) + "x" + std::to_string(edge) + " patch");
  }
  require_finite(img, "extract_patches input");

  std::vector<PatchOrigin> origins;
  for (std::size_t r : positions(img.rows(), edge, sampling.stride))
    for (std::size_t c : positions(img.cols(), edge, sampling.stride)) origins.push_back({r, c});

  if (sampling.count_cap > 0 && sampling.count_cap < origins.size()) {
    Rng rng(sampling.seed);
    std::vector<std::size_t> idx(origins.size());
    std::iota(idx.begin(), idx.end(), 0);
    for (std::size_t i = 0; i < sampling.count_cap; ++i) {
      std::swap(idx[i], idx[i + rng.index(idx.size() - i)]);
    }
    idx.resize(sampling.count_cap);
    std::sort(idx.begin(), idx.end());
    std::vector<PatchOrigin> picked;
    picked.reserve(idx.size());
    for (std::size_t i : idx) picked.push_back(origins[i]);
    origins = std::move(picked);
  }

  PatchSet set;
  set.edge = edge;
  set.image_rows = img.rows();
  set.image_cols = img.cols();
  set.patches = Matrix(edge * edge, origins.size());
  set.means.assign(origins.size(), 0.0);
  for (std::size_t j = 0; j < origins.size(); ++j) {
    const auto [r0, c0] = origins[j];
    double mean = 0.0;
    for (std::size_t c = 0; c < edge; ++c)
      for (std::size_t r = 0; r < edge; ++r) mean += img(r0 + r, c0 + c);
    mean = sampling.remove_mean ? mean / static_cast<double>(edge * edge) : 0.0;
    set.means[j] = mean;
    for (std::size_t c = 0; c < edge; ++c)
      for (std::size_t r = 0; r < edge; ++r) set.patches(c * edge + r, j) = img(r0 + r, c0 + c) - mean;
  }
  set.origins = std::move(origins);
  return set;
}

Image reconstruct_from_patches(const PatchSet& coded, const Image& fallback) {
  const std::size_t e = coded.edge;
  if (fallback.rows() != coded.image_rows || fallback.cols() != coded.image_cols)
    throw std::invalid_argument("reconstruct_from_patches: fallback has the wrong size");
  if (coded.patches.rows() != e * e || coded.patches.cols() != coded.count() ||
      coded.means.size() != coded.count())
    throw std::invalid_argument("reconstruct_from_patches: patch matrix does not match origins");
  Matrix sum(coded.image_rows, coded.image_cols);
  Matrix count(coded.image_rows, coded.image_cols);
  for (std::size_t j = 0; j < coded.count(); ++j) {
    const auto [r0, c0] = coded.origins[j];
    for (std::size_t c = 0; c < e; ++c) {
      for (std::size_t r = 0; r < e; ++r) {
        sum(r0 + r, c0 + c) += coded.patches(c * e + r, j) + coded.means[j];
        count(r0 + r, c0 + c) += 1.0;
      }
    }
  }
  Image out = fallback;
  for (std::size_t r = 0; r < out.rows(); ++r)
    for (std::size_t c = 0; c < out.cols(); ++c)
      if (count(r, c) > 0.0) out(r, c) = sum(r, c) / count(r, c);
  return out;
}

// ---------------------------------------------------------------------------

Matrix code_patches(const DpcaFactorization& model, const Matrix& x, const DpcaConfig& cfg) {
  if (model.U.rows() != x.rows()) throw std::invalid_argument("code_patches: U does not match patch size");
  Matrix y = matmul_tn(model.U, x);
  if (model.solver == Solver::pca) return y;

  const double lambda = cfg.effective_lambda(x.rows(), x.cols());
  for (std::size_t k = 0; k < y.rows(); ++k) soft_adaptive_inplace(y.row(k), lambda);
  const Matrix basis = row_basis(x);
  Matrix z = matmul(matmul_nt(y, basis), basis);
  if (model.solver != Solver::dpca1a && cfg.firm) {
    for (std::size_t k = 0; k < z.rows(); ++k) firm_inplace(z.row(k), *cfg.firm);
  }
  return z;
}

DenoiseResult denoise(const Image& noisy, Solver solver, const DenoiseConfig& cfg) {
  const PatchSet all = extract_patches(noisy, cfg.edge, {1, 0, cfg.seed, true});
  const PatchSet train = extract_patches(noisy, cfg.edge, {1, cfg.train_patches, cfg.seed, true});
  DpcaConfig dcfg = cfg.dpca;
  dcfg.K = cfg.K;

  DenoiseResult result;
  result.model = fit(solver, train.patches, dcfg);
  PatchSet coded = all;
  coded.patches = matmul(result.model.U, code_patches(result.model, all.patches, dcfg));
  result.image = reconstruct_from_patches(coded, noisy);
  clamp_pixels(result.image);
  return result;
}

Image add_gaussian_noise(const Image& img, double sigma, std::uint64_t seed) {
  if (!(sigma >= 0.0)) throw std::invalid_argument("add_gaussian_noise: sigma must be >= 0");
  Rng rng(seed);
  Image out = img;
  for (double& v : out.data()) v += sigma * rng.normal();
  return out;
}

// ---------------------------------------------------------------------------

OmpResult omp_masked(std::span<const double> b, const std::vector<bool>& known, const Matrix& dict,
                     std::size_t sparsity) {
  if (b.size() != dict.rows() || known.size() != dict.rows())
    throw std::invalid_argument("omp_masked: b, mask and dictionary rows disagree");
  if (sparsity > dict.cols()) throw std::invalid_argument("omp_masked: sparsity exceeds atom count");

  OmpResult res;
  res.z.assign(dict.cols(), 0.0);
  std::vector<std::size_t> rows;
  for (std::size_t i = 0; i < known.size(); ++i)
    if (known[i]) rows.push_back(i);
  if (rows.empty()) {
    res.recoverable = false;
    return res;
  }
  const std::size_t m = rows.size();
  const std::size_t n_atoms = dict.cols();

  // Restricted atoms stored as columns of a (n_atoms × m) row-major matrix.
  Matrix atoms(n_atoms, m);
  std::vector<double> atom_norm(n_atoms);
  for (std::size_t j = 0; j < n_atoms; ++j) {
    for (std::size_t i = 0; i < m; ++i) atoms(j, i) = dict(rows[i], j);
    atom_norm[j] = norm2(atoms.row(j));
  }
  std::vector<double> target(m);
  for (std::size_t i = 0; i < m; ++i) target[i] = b[rows[i]];
  std::vector<double> resid = target;
  res.residual_norms.push_back(norm2(resid));

  std::vector<std::vector<double>> q;  // orthonormal basis of selected atoms
  Matrix r_factor(sparsity, sparsity);
  std::vector<double> qtb;
  std::vector<bool> excluded(n_atoms, false);
  for (std::size_t j = 0; j < n_atoms; ++j) excluded[j] = atom_norm[j] <= 0.0;

  while (res.support.size() < sparsity && res.residual_norms.back() >= kOmpResidualStop) {
    std::size_t best = n_atoms;
    double best_score = -1.0;
    for (std::size_t j = 0; j < n_atoms; ++j) {
      if (excluded[j]) continue;
      const double score = std::abs(dot(atoms.row(j), resid)) / atom_norm[j];
      if (score > best_score) {
        best_score = score;
        best = j;
      }
    }
    if (best == n_atoms) break;
    excluded[best] = true;

    std::vector<double> v(atoms.row(best).begin(), atoms.row(best).end());
    std::vector<double> coef(q.size(), 0.0);
    for (int pass = 0; pass < 2; ++pass) {
      for (std::size_t t = 0; t < q.size(); ++t) {
        const double c = dot(q[t], v);
        coef[t] += c;
        for (std::size_t i = 0; i < m; ++i) v[i] -= c * q[t][i];
      }
    }
    const double nv = norm2(v);
    if (nv <= kOmpDependence * atom_norm[best]) continue;  // dependent on the current support
    for (double& x : v) x /= nv;

    const std::size_t s = q.size();
    for (std::size_t t = 0; t < s; ++t) r_factor(t, s) = coef[t];
    r_factor(s, s) = nv;
    qtb.push_back(dot(v, target));
    const double proj = dot(v, resid);
    for (std::size_t i = 0; i < m; ++i) resid[i] -= proj * v[i];
    q.push_back(std::move(v));
    res.support.push_back(best);
    res.residual_norms.push_back(norm2(resid));
  }

  // Back substitution R c = Qᵀ b over the selected atoms.
  const std::size_t s = res.support.size();
  std::vector<double> c(s);
  for (std::size_t t = s; t-- > 0;) {
    double acc = qtb[t];
    for (std::size_t u = t + 1; u < s; ++u) acc -= r_factor(t, u) * c[u];
    c[t] = acc / r_factor(t, t);
  }
  for (std::size_t t = 0; t < s; ++t) res.z[res.support[t]] = c[t];
  return res;
}

void InpaintTask::validate() const {
  if (known.size() != image.size()) throw std::invalid_argument("InpaintTask: mask size differs from image");
  if (sparsity < 1) throw std::invalid_argument("InpaintTask: sparsity must be >= 1");
  if (edge < 1 || stride < 1) throw std::invalid_argument("InpaintTask: edge and stride must be >= 1");
  if (image.rows() < edge || image.cols() < edge)
    throw std::invalid_argument("InpaintTask: image smaller than patch");
}

DpcaFactorization train_dictionary(const std::vector<Image>& corpus, Solver solver, const DpcaConfig& cfg,
                                   std::size_t edge, std::size_t patches_per_image, std::uint64_t seed) {
  if (corpus.empty()) throw std::invalid_argument("train_dictionary: empty corpus");
  std::vector<PatchSet> sets;
  std::size_t total = 0;
  for (std::size_t i = 0; i < corpus.size(); ++i) {
    sets.push_back(extract_patches(corpus[i], edge, {1, patches_per_image, seed + i, false}));
    total += sets.back().count();
  }
  Matrix x(edge * edge, total);
  std::size_t col = 0;
  for (const PatchSet& s : sets) {
    for (std::size_t j = 0; j < s.count(); ++j, ++col)
      for (std::size_t r = 0; r < x.rows(); ++r) x(r, col) = s.patches(r, j);
  }
  return fit(solver, x, cfg);
}

InpaintResult inpaint(const InpaintTask& task, const Matrix& dict) {
  task.validate();
  const std::size_t e = task.edge;
  if (dict.rows() != e * e) throw std::invalid_argument("inpaint: dictionary rows must equal edge²");

  Matrix atoms(dict.rows(), dict.cols() + 1);
  for (std::size_t r = 0; r < dict.rows(); ++r) {
    for (std::size_t c = 0; c < dict.cols(); ++c) atoms(r, c) = dict(r, c);
    atoms(r, dict.cols()) = 1.0 / static_cast<double>(e);
  }
  const std::size_t sparsity = std::min(task.sparsity, atoms.cols());

  const Image masked = apply_mask(task.image, task.known);
  PatchSet set = extract_patches(masked, e, {task.stride, 0, 1, false});
  const std::size_t w = task.image.cols();

  InpaintResult result;
  std::vector<bool> usable(set.count(), true);
  std::vector<bool> bits(e * e);
  for (std::size_t j = 0; j < set.count(); ++j) {
    const auto [r0, c0] = set.origins[j];
    for (std::size_t c = 0; c < e; ++c)
      for (std::size_t r = 0; r < e; ++r) bits[c * e + r] = task.known[(r0 + r) * w + c0 + c];
    const std::vector<double> b = set.patches.col(j);
    const OmpResult code = omp_masked(b, bits, atoms, sparsity);
    if (!code.recoverable) {
      usable[j] = false;
      ++result.unrecoverable_patches;
      continue;
    }
    set.patches.set_col(j, matvec(atoms, code.z));
  }

  // Sum and count per pixel over usable patches only.
  Matrix sum(task.image.rows(), w);
  Matrix count(task.image.rows(), w);
  for (std::size_t j = 0; j < set.count(); ++j) {
    if (!usable[j]) continue;
    const auto [r0, c0] = set.origins[j];
    for (std::size_t c = 0; c < e; ++c) {
      for (std::size_t r = 0; r < e; ++r) {
        sum(r0 + r, c0 + c) += set.patches(c * e + r, j);
        count(r0 + r, c0 + c) += 1.0;
      }
    }
  }

  Image out = masked;
  const std::size_t h = out.rows();
  for (std::size_t r = 0; r < h; ++r) {
    for (std::size_t c = 0; c < w; ++c) {
      if (task.known[r * w + c]) continue;
      if (count(r, c) > 0.0) {
        out(r, c) = sum(r, c) / count(r, c);
        continue;
      }
      double acc = 0.0;
      std::size_t n = 0;
      for (std::size_t rad = 1; n == 0 && rad <= std::max(h, w); ++rad) {
        const std::size_t rlo = r >= rad ? r - rad : 0, rhi = std::min(h - 1, r + rad);
        const std::size_t clo = c >= rad ? c - rad : 0, chi = std::min(w - 1, c + rad);
        for (std::size_t rr = rlo; rr <= rhi; ++rr)
          for (std::size_t cc = clo; cc <= chi; ++cc)
            if (task.known[rr * w + cc]) {
              acc += task.image(rr, cc);
              ++n;
            }
      }
      out(r, c) = n ? acc / static_cast<double>(n) : 0.0;
    }
  }
  clamp_pixels(out);
  result.image = std::move(out);
  return result;
}

Image apply_mask(const Image& img, const std::vector<bool>& known, double fill) {
  if (known.size() != img.size()) throw std::invalid_argument("apply_mask: mask size differs from image");
  Image out = img;
  auto px = out.data();
  for (std::size_t i = 0; i < px.size(); ++i)
    if (!known[i]) px[i] = fill;
  return out;
}

}  // namespace dpca
