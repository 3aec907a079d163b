#include <doctest.h>

#include <cmath>
#include <limits>

#include "../support.hpp"
#include "patk/iqa.hpp"

using namespace patk;
using patk::test::random_image;

namespace {

// Closed-form pair shared with tests/oracles/iqa_oracles.py.
std::pair<Image, Image> oracle_pair(std::size_t nx, std::size_t ny) {
  Image gt(nx, ny), rec(nx, ny);
  for (std::size_t i = 0; i < nx; ++i)
    for (std::size_t j = 0; j < ny; ++j) {
      const double x = static_cast<double>(i), y = static_cast<double>(j);
      const double disk = (x - 20) * (x - 20) + (y - 18) * (y - 18) < 100 ? 40.0 : 0.0;
      gt(i, j) = 100 + 60 * std::sin(0.3 * x) * std::cos(0.17 * y) + disk;
      rec(i, j) = gt(i, j) + 15 * std::sin(0.9 * x + 1.3 * y) + 5 * std::cos(2.1 * x * y / 37);
    }
  return {gt, rec};
}

Image disk_image(std::size_t n, double r, double amp) {
  Image f(n, n);
  const double c = static_cast<double>(n) / 2.0;
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = 0; j < n; ++j) {
      const double x = static_cast<double>(i) + 0.5 - c, y = static_cast<double>(j) + 0.5 - c;
      if (x * x + y * y < r * r) f(i, j) = amp;
    }
  return f;
}

Image textured(std::size_t n) {
  Image f(n, n);
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = 0; j < n; ++j)
      f(i, j) = 0.5 + 0.3 * std::sin(0.4 * static_cast<double>(i)) * std::cos(0.25 * static_cast<double>(j)) +
                0.2 * ((i / 8 + j / 8) % 2);
  return f;
}

}  // namespace

TEST_CASE("roi from ground truth") {
  Image gt(8, 8);
  gt(2, 3) = 0.5;
  gt(4, 4) = 1.0;
  gt(5, 5) = 1.0;
  const RoiMask support = roi_from_gt(gt, 0.0);
  CHECK(support.count() == 3);
  CHECK(support(2, 3));
  const RoiMask top = roi_from_gt(gt, 0.999);
  CHECK(top.count() == 2);
  CHECK_FALSE(top(2, 3));
  CHECK_THROWS_AS(roi_from_gt(Image(8, 8), 0.1), NumericalError);
  CHECK_THROWS_AS(roi_from_gt(gt, 1.0), ConfigError);

  const double r = 20.0, pi = std::acos(-1.0);
  const RoiMask disk = roi_from_gt(disk_image(64, r, 1.0), 0.1);
  CHECK(std::abs(static_cast<double>(disk.count()) - pi * r * r) <= 0.02 * pi * r * r);

  const Image masked = top.apply(gt);
  CHECK(masked(2, 3) == 0.0);
  CHECK(masked(4, 4) == 1.0);
}

TEST_CASE("psnr") {
  Image gt = disk_image(32, 10, 1.0);
  const RoiMask full = RoiMask::full(gt);
  CHECK(psnr(gt, gt, full) == std::numeric_limits<double>::infinity());
  Image rec = gt;
  for (auto& v : rec.values()) v += 0.1;
  CHECK(psnr(rec, gt, full) == doctest::Approx(20.0).epsilon(1e-13));

  const Image a = random_image(16, 12, 1), b = random_image(16, 12, 2);
  RoiMask roi(16, 12, false);
  for (std::size_t i = 2; i < 14; ++i)
    for (std::size_t j = 1; j < 9; ++j) roi.set(i, j, (i + j) % 3 != 0);
  double lo = 1e300, hi = -1e300, se = 0.0;
  std::size_t n = 0;
  for (std::size_t k = 0; k < a.size(); ++k)
    if (roi[k]) {
      lo = std::min(lo, b[k]);
      hi = std::max(hi, b[k]);
      se += (a[k] - b[k]) * (a[k] - b[k]);
      ++n;
    }
  const double expect = 10.0 * std::log10((hi - lo) * (hi - lo) / (se / static_cast<double>(n)));
  CHECK(std::abs(psnr(a, b, roi) - expect) <= 1e-12 * std::abs(expect));

  CHECK_THROWS_AS(psnr(rec, Image(32, 32), full), NumericalError);
  CHECK_THROWS_AS(psnr(rec, gt, RoiMask(32, 32, false)), ConfigError);
  CHECK_THROWS_AS(psnr(Image(8, 8), gt, full), ConfigError);
}

TEST_CASE("ssim against scikit-image") {
  {
    const auto [gt, rec] = oracle_pair(48, 40);
    CHECK(ssim(rec, gt, RoiMask::full(gt)) == doctest::Approx(0.82302356882783323).epsilon(1e-12));
    const RoiMask roi = roi_from_gt(gt, 0.6);
    CHECK(roi.count() == 638);
    CHECK(ssim(rec, gt, roi) == doctest::Approx(0.94899301450075124).epsilon(1e-12));
  }
  const auto [gt, rec] = oracle_pair(37, 45);
  CHECK(ssim(rec, gt, RoiMask::full(gt)) == doctest::Approx(0.82657950522224211).epsilon(1e-12));
}

TEST_CASE("ssim properties") {
  const Image gt = textured(40);
  const RoiMask full = RoiMask::full(gt);
  CHECK(ssim(gt, gt, full) == doctest::Approx(1.0).epsilon(1e-15));

  // Zero-mean texture: range symmetric about 0, local means near 0.
  Image sym(40, 40);
  for (std::size_t i = 0; i < 40; ++i)
    for (std::size_t j = 0; j < 40; ++j)
      sym(i, j) = 0.5 * std::sin(1.1 * static_cast<double>(i) + 0.3) * std::cos(0.9 * static_cast<double>(j));
  Image neg = sym;
  for (auto& v : neg.values()) v = -v;
  const double s_neg = ssim(neg, sym, full);
  CHECK(s_neg == doctest::Approx(-0.9852257187602673).epsilon(1e-12));
  CHECK(s_neg < 0.5);

  Image shifted = gt;
  for (auto& v : shifted.values()) v += 0.5 * 1.0;  // range of gt is 1
  CHECK(ssim(shifted, gt, full) < 0.9);

  Image g2 = gt, r2 = random_image(40, 40, 4, 0.0, 1.0);
  const double base = ssim(r2, gt, full);
  for (auto& v : g2.values()) v *= 2.0;
  for (auto& v : r2.values()) v *= 2.0;
  CHECK(std::abs(ssim(r2, g2, full) - base) <= 1e-12);

  RoiMask tiny(40, 40, false);
  for (std::size_t i = 0; i < 5; ++i)
    for (std::size_t j = 0; j < 5; ++j) tiny.set(10 + i, 10 + j, true);
  CHECK_THROWS_AS(ssim(gt, gt, tiny), ConfigError);
}

TEST_CASE("pearson correlation") {
  const Image gt = random_image(20, 20, 5, 0.1, 1.0);
  const RoiMask full = RoiMask::full(gt);
  Image aff = gt, neg = gt;
  for (auto& v : aff.values()) v = 2.0 * v + 3.0;
  for (auto& v : neg.values()) v = -v;
  CHECK(std::abs(pearson_cc(aff, gt, full) - 1.0) <= 1e-12);
  CHECK(std::abs(pearson_cc(neg, gt, full) + 1.0) <= 1e-12);

  const Image rec = random_image(20, 20, 6);
  Image rec_aff = rec;
  for (auto& v : rec_aff.values()) v = 7.5 * v - 40.0;
  CHECK(std::abs(pearson_cc(rec_aff, gt, full) - pearson_cc(rec, gt, full)) <= 1e-12);

  // Textbook formula over ROI pixels with nonzero ground truth.
  Image g = gt;
  for (std::size_t k = 0; k < g.size(); k += 7) g[k] = 0.0;
  double sx = 0, sy = 0, n = 0;
  for (std::size_t k = 0; k < g.size(); ++k)
    if (g[k] != 0.0) sx += rec[k], sy += g[k], n += 1;
  const double mx = sx / n, my = sy / n;
  double sxy = 0, sxx = 0, syy = 0;
  for (std::size_t k = 0; k < g.size(); ++k)
    if (g[k] != 0.0) {
      sxy += (rec[k] - mx) * (g[k] - my);
      sxx += (rec[k] - mx) * (rec[k] - mx);
      syy += (g[k] - my) * (g[k] - my);
    }
  CHECK(std::abs(pearson_cc(rec, g, full) - sxy / std::sqrt(sxx * syy)) <= 1e-12);

  Image flat(20, 20);
  for (auto& v : flat.values()) v = 1.0;
  CHECK_THROWS_AS(pearson_cc(rec, flat, full), NumericalError);
}

TEST_CASE("haarpsi against piq") {
  {
    const auto [gt, rec] = oracle_pair(48, 40);
    CHECK(haarpsi_raw(rec, gt) == doctest::Approx(0.80902449752595262).epsilon(1e-10));
  }
  const auto [gt, rec] = oracle_pair(37, 45);
  CHECK(haarpsi_raw(rec, gt) == doctest::Approx(0.85066321870404071).epsilon(1e-10));
}

TEST_CASE("haarpsi properties") {
  const Image gt = textured(64);
  const RoiMask full = RoiMask::full(gt);
  CHECK(haarpsi(gt, gt, full) == doctest::Approx(1.0).epsilon(1e-14));

  Image shifted(64, 64);
  for (std::size_t i = 1; i < 64; ++i)
    for (std::size_t j = 0; j < 64; ++j) shifted(i, j) = gt(i - 1, j);
  const double h = haarpsi(shifted, gt, full);
  CHECK(h > 0.0);
  CHECK(h < 1.0);

  // Full ROI: the masked variant maps the ground-truth range onto [0, 255].
  const Image rec = random_image(64, 64, 9, 0.0, 1.0);
  const auto [lo, hi] = std::minmax_element(gt.values().begin(), gt.values().end());
  Image gs = gt, rs = rec;
  for (auto& v : gs.values()) v = (v - *lo) / (*hi - *lo) * 255.0;
  for (auto& v : rs.values()) v = (v - *lo) / (*hi - *lo) * 255.0;
  CHECK(haarpsi(rec, gt, full) == doctest::Approx(haarpsi_raw(rs, gs)).epsilon(1e-12));

  CHECK_THROWS_AS(haarpsi(Image(16, 16), Image(16, 16), RoiMask(16, 16)), ConfigError);
}

TEST_CASE("metrics report") {
  const Image gt = textured(40);
  const MetricsReport id = evaluate(gt, gt, RoiMask::full(gt));
  CHECK(id.psnr_infinite);
  CHECK(id.psnr == std::numeric_limits<double>::max());
  CHECK(id.ssim == doctest::Approx(1.0));
  CHECK(id.cc == doctest::Approx(1.0));
  CHECK(id.haarpsi == doctest::Approx(1.0));
  CHECK_FALSE(id.lpips.has_value());

  const Image rec = random_image(40, 40, 3, 0.0, 1.0);
  const MetricsReport r = evaluate(rec, gt, RoiMask::full(gt));
  CHECK_FALSE(r.psnr_infinite);
  CHECK(r.ssim < 1.0);
  CHECK(r.haarpsi >= 0.0);
  CHECK(r.haarpsi <= 1.0);
  CHECK(r.cc >= -1.0);
  CHECK(r.cc <= 1.0);
}
