#include <doctest.h>

#include <cmath>
#include <filesystem>
#include <stdexcept>

#include "dpca/image.hpp"
#include "dpca/imaging.hpp"
#include "dpca/surrogates.hpp"
#include "helpers.hpp"

using dpca::Image;
using dpca::Matrix;

TEST_CASE("psnr and sse") {
  const Image a = dpca::piecewise_smooth_image(32, 3);
  CHECK(dpca::sse(a, a) == 0.0);
  CHECK(dpca::psnr(a, a) == dpca::kPsnrIdentical);
  Image b = a;
  for (double& v : b.data()) v += 1.0;
  CHECK(dpca::psnr(a, b) == doctest::Approx(48.1308036).epsilon(1e-8));
  CHECK(dpca::sse(a, b) == doctest::Approx(32.0 * 32.0));
  CHECK(dpca::sigma_for_psnr(18.58) == doctest::Approx(30.0).epsilon(1e-3));
  Image noisy = dpca::add_gaussian_noise(a, 9.0, 4);
  Image a2 = a, n2 = noisy;
  for (double& v : a2.data()) v += 17.0;
  for (double& v : n2.data()) v += 17.0;
  CHECK(dpca::psnr(a2, n2) == doctest::Approx(dpca::psnr(a, noisy)).epsilon(1e-12));
  CHECK_THROWS_AS(dpca::psnr(a, Image(3, 3)), std::invalid_argument);
}

TEST_CASE("PGM round trip") {
  const auto path = std::filesystem::temp_directory_path() / "dpca-test.pgm";
  const Image img = dpca::piecewise_smooth_image(16, 2);
  Image rounded = img;
  for (double& v : rounded.data()) v = std::round(v);
  dpca::save_pgm(path, img);
  CHECK(dpca::load_pgm(path) == rounded);
  std::filesystem::remove(path);
  const Image m = dpca::map_to_image(std::vector<double>{-1.0, 0.0, 1.0, 3.0}, 2, 2);
  CHECK(m(0, 0) == 0.0);
  CHECK(m(1, 1) == 255.0);
}

TEST_CASE("extract_patches") {
  SUBCASE("single patch") {
    const auto ps = dpca::extract_patches(dpca::piecewise_smooth_image(8, 1), 8);
    CHECK(ps.count() == 1);
    double s = 0.0;
    for (double v : ps.patches.data()) s += v;
    CHECK(std::abs(s) < 1e-9);
  }
  SUBCASE("positions") {
    CHECK(dpca::extract_patches(Image(9, 9, 1.0), 8).count() == 4);
    const auto c = dpca::extract_patches(Image(12, 12, 7.0), 4);
    for (double v : c.patches.data()) CHECK(v == 0.0);
    CHECK(dpca::extract_patches(Image(10, 10), 4, {3, 0, 1, true}).count() == 9);
  }
  SUBCASE("count cap subsample") {
    const auto ps = dpca::extract_patches(dpca::piecewise_smooth_image(40, 1), 8, {1, 50, 9, true});
    CHECK(ps.count() == 50);
    const auto again = dpca::extract_patches(dpca::piecewise_smooth_image(40, 1), 8, {1, 50, 9, true});
    CHECK(again.patches == ps.patches);
  }
  CHECK_THROWS_AS(dpca::extract_patches(Image(5, 5), 8), std::invalid_argument);
}

TEST_CASE("patch round trip for any stride") {
  const Image img = dpca::piecewise_smooth_image(37, 5);
  for (std::size_t stride : {1u, 2u, 3u, 5u}) {
    for (bool remove_mean : {true, false}) {
      const auto ps = dpca::extract_patches(img, 8, {stride, 0, 1, remove_mean});
      const Image back = dpca::reconstruct_from_patches(ps, Image(37, 37));
      CHECK(dpca::frobenius_distance(back, img) <= 1e-10);
    }
  }
}

TEST_CASE("overlapping patches are averaged") {
  dpca::PatchSet ps;
  ps.edge = 2;
  ps.image_rows = 2;
  ps.image_cols = 3;
  ps.patches = Matrix(4, 2);
  for (std::size_t r = 0; r < 4; ++r) {
    ps.patches(r, 0) = 2.0;
    ps.patches(r, 1) = 6.0;
  }
  ps.means = {0.0, 0.0};
  ps.origins = {{0, 0}, {0, 1}};
  const Image out = dpca::reconstruct_from_patches(ps, Image(2, 3));
  CHECK(out(0, 0) == 2.0);
  CHECK(out(0, 1) == 4.0);
  CHECK(out(1, 2) == 6.0);
}

TEST_CASE("omp_masked") {
  const Matrix dict = testing::random_matrix(16, 8, 40);
  const std::vector<bool> full(16, true);

  SUBCASE("exact atom") {
    const auto b = dict.col(3);
    const auto r = dpca::omp_masked(b, full, dict, 4);
    CHECK(r.support.front() == 3);
    CHECK(r.z[3] == doctest::Approx(1.0));
    CHECK(r.residual_norms[1] < 1e-9);
  }
  SUBCASE("half the pixels missing") {
    std::vector<bool> half(16, false);
    for (std::size_t i = 0; i < 16; i += 2) half[i] = true;
    for (std::size_t j = 0; j < 8; ++j) {
      const auto r = dpca::omp_masked(dict.col(j), half, dict, 1);
      CHECK(r.support.front() == j);
    }
  }
  SUBCASE("full sparsity gives least squares") {
    const Matrix b = testing::random_matrix(16, 1, 41);
    const auto r = dpca::omp_masked(b.data(), full, dict, 8);
    const auto ed = testing::to_eigen(dict);
    const Eigen::VectorXd eb = testing::to_eigen(b);
    const Eigen::VectorXd ls = (ed.transpose() * ed).ldlt().solve(ed.transpose() * eb);
    for (int j = 0; j < 8; ++j) CHECK(r.z[j] == doctest::Approx(ls(j)).epsilon(1e-8));
  }
  SUBCASE("residuals never increase and atoms stay independent") {
    dpca::Rng rng(42);
    for (int t = 0; t < 20; ++t) {
      std::vector<bool> known(16);
      for (std::size_t i = 0; i < 16; ++i) known[i] = rng.uniform() < 0.7;
      const Matrix b = testing::random_matrix(16, 1, 100 + t);
      const auto r = dpca::omp_masked(b.data(), known, dict, 6);
      for (std::size_t i = 1; i < r.residual_norms.size(); ++i)
        CHECK(r.residual_norms[i] <= r.residual_norms[i - 1] + 1e-12);
      Eigen::MatrixXd sel(16, r.support.size());
      sel.setZero();
      for (std::size_t c = 0; c < r.support.size(); ++c)
        for (std::size_t i = 0; i < 16; ++i)
          if (known[i]) sel(i, c) = dict(i, r.support[c]);
      CHECK(Eigen::FullPivLU<Eigen::MatrixXd>(sel).rank() == static_cast<Eigen::Index>(r.support.size()));
    }
  }
  SUBCASE("nothing known") {
    const auto r = dpca::omp_masked(dict.col(0), std::vector<bool>(16, false), dict, 3);
    CHECK_FALSE(r.recoverable);
    for (double v : r.z) CHECK(v == 0.0);
  }
}

TEST_CASE("inpaint keeps known pixels") {
  const Image img = dpca::piecewise_smooth_image(32, 6);
  const Matrix dict = testing::random_matrix(64, 16, 50);
  SUBCASE("nothing missing") {
    dpca::InpaintTask task{img, std::vector<bool>(32 * 32, true), 5, 8, 1};
    Image rounded = img;
    const auto r = dpca::inpaint(task, dict);
    CHECK(dpca::sse(r.image, img) == 0.0);
  }
  SUBCASE("scattered holes") {
    dpca::Rng rng(2);
    std::vector<bool> known(32 * 32);
    for (std::size_t i = 0; i < known.size(); ++i) known[i] = rng.uniform() > 0.15;
    dpca::InpaintTask task{dpca::apply_mask(img, known), known, 5, 8, 1};
    const auto r = dpca::inpaint(task, dict);
    for (std::size_t i = 0; i < known.size(); ++i)
      if (known[i]) CHECK(r.image.data()[i] == img.data()[i]);
  }
  dpca::InpaintTask bad{img, std::vector<bool>(10, true), 5, 8, 1};
  CHECK_THROWS_AS(bad.validate(), std::invalid_argument);
}

TEST_CASE("denoise") {
  const Image clean = dpca::piecewise_smooth_image(48, 8);
  const Image noisy = dpca::add_gaussian_noise(clean, dpca::sigma_for_psnr(20.0), 3);
  dpca::DenoiseConfig cfg;
  cfg.K = 16;
  cfg.train_patches = 600;
  cfg.dpca.lambda = 5e4;
  cfg.dpca.firm = dpca::FirmThresholds(10.0, 45.0);
  cfg.dpca.max_outer = 5;
  const auto r = dpca::denoise(noisy, dpca::Solver::dpca2, cfg);
  CHECK(dpca::psnr(clean, r.image) > dpca::psnr(clean, noisy));
  for (double v : r.image.data()) CHECK((v >= 0.0 && v <= 255.0));

  auto pca_cfg = cfg;
  pca_cfg.K = 64;
  const auto identity = dpca::denoise(clean, dpca::Solver::pca, pca_cfg);
  CHECK(dpca::psnr(clean, identity.image) >= 60.0);
}

TEST_CASE("background subtraction") {
  SUBCASE("static scene") {
    const auto still = dpca::static_stack(32, 12, 4);
    dpca::DpcaConfig cfg;
    cfg.K = 1;
    const auto f = dpca::bgsub_train(still, dpca::Solver::pca, cfg);
    for (std::size_t i = 0; i < still.size(); ++i) {
      const auto fr = still.frames[i].data();
      const auto m = dpca::bgsub_foreground(f, i, fr);
      CHECK(std::count(m.begin(), m.end(), true) == 0);
      const auto z = dpca::background_code(f, fr);
      const auto rec = dpca::matvec(f.U, z);
      for (std::size_t v = 0; v < rec.size(); ++v) CHECK(std::abs(rec[v] - fr[v]) < 1e-8);
    }
  }
  SUBCASE("moving square") {
    dpca::MovingSquareConfig mc;
    mc.size = 32;
    mc.frames = 30;
    const auto scene = dpca::moving_square_stack(mc);
    dpca::DpcaConfig cfg;
    cfg.K = 3;
    const auto f = dpca::bgsub_train(scene.stack, dpca::Solver::pca, cfg);
    std::size_t hit = 0, total = 0;
    for (std::size_t i = 0; i < scene.stack.size(); ++i) {
      const auto m = dpca::bgsub_foreground(scene.stack.frames[i].data(), f);
      for (std::size_t v = 0; v < m.size(); ++v) {
        total += scene.truth[i][v];
        hit += scene.truth[i][v] && m[v];
      }
    }
    CHECK(static_cast<double>(hit) / static_cast<double>(total) > 0.8);
  }
  SUBCASE("threshold rule") {
    const std::vector<double> r{0.0, 0.0, 0.0, 0.0};
    CHECK(dpca::ThresholdRule{}.tau(r) == 1.0);
    CHECK(dpca::ThresholdRule::fixed(7.5).tau(r) == 7.5);
    const std::vector<double> s{1.0, -1.0, 3.0, -3.0};
    CHECK(dpca::ThresholdRule{}.tau(s) == doctest::Approx(4.0));
  }
  dpca::DpcaConfig too_many;
  too_many.K = 20;
  CHECK_THROWS_AS(dpca::bgsub_train(dpca::static_stack(16, 5), dpca::Solver::pca, too_many), std::invalid_argument);
}

TEST_CASE("frame stack files") {
  const auto dir = std::filesystem::temp_directory_path() / "dpca-test-frames";
  std::filesystem::remove_all(dir);
  dpca::MovingSquareConfig mc;
  mc.size = 16;
  mc.frames = 4;
  mc.square = 4;
  const auto scene = dpca::moving_square_stack(mc);
  dpca::save_frame_stack(dir, scene.stack);
  const auto back = dpca::load_frame_stack(dir);
  REQUIRE(back.size() == 4);
  for (std::size_t i = 0; i < 4; ++i) CHECK(back.frames[i] == scene.stack.frames[i]);
  dpca::save_mask(dir / "mask.pgm", scene.truth[0], 16, 16);
  std::size_t h = 0, w = 0;
  CHECK(dpca::load_mask(dir / "mask.pgm", &h, &w) == scene.truth[0]);
  CHECK(h == 16);
  std::filesystem::remove_all(dir);
}
