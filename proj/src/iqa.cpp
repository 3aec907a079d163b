#include "patk/iqa.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <limits>

namespace patk {
namespace {

struct Box {
  std::size_t i0 = 0, i1 = 0, j0 = 0, j1 = 0;  // inclusive-exclusive
};

void check_inputs(const Image& rec, const Image& gt, const RoiMask& roi, const char* who) {
  if (!rec.same_shape(gt) || !roi.matches(gt)) throw ConfigError(std::string(who) + ": shape mismatch");
  if (roi.count() == 0) throw ConfigError(std::string(who) + ": empty region of interest");
}

std::pair<double, double> roi_range(const Image& gt, const RoiMask& roi) {
  double lo = std::numeric_limits<double>::infinity(), hi = -lo;
  for (std::size_t k = 0; k < gt.size(); ++k)
    if (roi[k]) {
      lo = std::min(lo, gt[k]);
      hi = std::max(hi, gt[k]);
    }
  return {lo, hi};
}

double dynamic_range(const Image& gt, const RoiMask& roi) {
  const auto [lo, hi] = roi_range(gt, roi);
  if (!(hi > lo)) throw NumericalError("ground truth is constant on the region of interest; range undefined");
  return hi - lo;
}

Box bounding_box(const RoiMask& roi) {
  Box b{roi.nx(), 0, roi.ny(), 0};
  for (std::size_t i = 0; i < roi.nx(); ++i)
    for (std::size_t j = 0; j < roi.ny(); ++j)
      if (roi(i, j)) {
        b.i0 = std::min(b.i0, i);
        b.i1 = std::max(b.i1, i + 1);
        b.j0 = std::min(b.j0, j);
        b.j1 = std::max(b.j1, j + 1);
      }
  return b;
}

// Same-size 2D convolution with zero fill and output offset k/2, the
// alignment of the reference HaarPSI code for even kernels.
Image convolve_same(const Image& d, const std::vector<double>& ker, std::size_t k) {
  Image out(d.nx(), d.ny());
  const auto nx = static_cast<std::ptrdiff_t>(d.nx()), ny = static_cast<std::ptrdiff_t>(d.ny());
  const auto h = static_cast<std::ptrdiff_t>(k / 2), kk = static_cast<std::ptrdiff_t>(k);
  for (std::ptrdiff_t i = 0; i < nx; ++i)
    for (std::ptrdiff_t j = 0; j < ny; ++j) {
      double s = 0.0;
      for (std::ptrdiff_t a = 0; a < kk; ++a) {
        const std::ptrdiff_t ii = i + h - a;
        if (ii < 0 || ii >= nx) continue;
        for (std::ptrdiff_t b = 0; b < kk; ++b) {
          const std::ptrdiff_t jj = j + h - b;
          if (jj < 0 || jj >= ny) continue;
          s += d(static_cast<std::size_t>(ii), static_cast<std::size_t>(jj)) *
               ker[static_cast<std::size_t>(a * kk + b)];
        }
      }
      out(static_cast<std::size_t>(i), static_cast<std::size_t>(j)) = s;
    }
  return out;
}

Image haar_subsample(const Image& f) {
  const Image m = convolve_same(f, std::vector<double>(4, 0.25), 2);
  Image out((f.nx() + 1) / 2, (f.ny() + 1) / 2);
  for (std::size_t i = 0; i < out.nx(); ++i)
    for (std::size_t j = 0; j < out.ny(); ++j) out(i, j) = m(2 * i, 2 * j);
  return out;
}

// Responses of the scale-s Haar filter: index 0 = rows flipped (vertical
// differences), 1 = transposed filter.
std::array<Image, 2> haar_responses(const Image& f, int scale) {
  const std::size_t k = std::size_t{1} << scale;
  const double w = std::ldexp(1.0, -scale);
  std::vector<double> h(k * k, w), ht(k * k, w);
  for (std::size_t a = 0; a < k / 2; ++a)
    for (std::size_t b = 0; b < k; ++b) {
      h[a * k + b] = -w;
      ht[b * k + a] = -w;
    }
  return {convolve_same(f, h, k), convolve_same(f, ht, k)};
}

}  // namespace

std::size_t RoiMask::count() const {
  return static_cast<std::size_t>(std::count(m_.begin(), m_.end(), std::uint8_t{1}));
}

Image RoiMask::apply(const Image& f) const {
  if (!matches(f)) throw ConfigError("roi: shape mismatch");
  Image out = f;
  for (std::size_t k = 0; k < f.size(); ++k)
    if (!m_[k]) out[k] = 0.0;
  return out;
}

RoiMask roi_from_gt(const Image& gt, double threshold_frac) {
  if (threshold_frac < 0.0 || threshold_frac >= 1.0) throw ConfigError("roi_from_gt: threshold must be in [0, 1)");
  const double peak = *std::max_element(gt.values().begin(), gt.values().end());
  const double level = threshold_frac * peak;
  RoiMask m(gt.nx(), gt.ny(), false);
  for (std::size_t i = 0; i < gt.nx(); ++i)
    for (std::size_t j = 0; j < gt.ny(); ++j) m.set(i, j, gt(i, j) > level);
  if (m.count() == 0) throw NumericalError("roi_from_gt: empty mask");
  return m;
}

double psnr(const Image& rec, const Image& gt, const RoiMask& roi) {
  check_inputs(rec, gt, roi, "psnr");
  const double range = dynamic_range(gt, roi);
  double se = 0.0;
  std::size_t n = 0;
  for (std::size_t k = 0; k < gt.size(); ++k)
    if (roi[k]) {
      const double d = rec[k] - gt[k];
      se += d * d;
      ++n;
    }
  const double mse = se / static_cast<double>(n);
  if (mse == 0.0) return std::numeric_limits<double>::infinity();
  return 10.0 * std::log10(range * range / mse);
}

double ssim(const Image& rec, const Image& gt, const RoiMask& roi, const SsimOptions& opt) {
  check_inputs(rec, gt, roi, "ssim");
  if (opt.window < 1 || opt.window % 2 == 0) throw ConfigError("ssim: window must be odd");
  const double range = dynamic_range(gt, roi);
  const double c1 = (opt.k1 * range) * (opt.k1 * range);
  const double c2 = (opt.k2 * range) * (opt.k2 * range);
  const Box box = bounding_box(roi);
  const auto w = static_cast<std::size_t>(opt.window), r = w / 2;
  const double np = static_cast<double>(w * w);
  const double cov_norm = np / (np - 1.0);

  auto val = [&](const Image& f, std::size_t i, std::size_t j) { return roi(i, j) ? f(i, j) : 0.0; };

  double total = 0.0;
  std::size_t n = 0;
  for (std::size_t i = box.i0 + r; i + r < box.i1; ++i)
    for (std::size_t j = box.j0 + r; j + r < box.j1; ++j) {
      if (!roi(i, j)) continue;
      double sx = 0, sy = 0, sxx = 0, syy = 0, sxy = 0;
      for (std::size_t a = i - r; a <= i + r; ++a)
        for (std::size_t b = j - r; b <= j + r; ++b) {
          const double x = val(rec, a, b), y = val(gt, a, b);
          sx += x;
          sy += y;
          sxx += x * x;
          syy += y * y;
          sxy += x * y;
        }
      const double ux = sx / np, uy = sy / np;
      const double vx = cov_norm * (sxx / np - ux * ux);
      const double vy = cov_norm * (syy / np - uy * uy);
      const double vxy = cov_norm * (sxy / np - ux * uy);
      total += ((2 * ux * uy + c1) * (2 * vxy + c2)) / ((ux * ux + uy * uy + c1) * (vx + vy + c2));
      ++n;
    }
  if (n == 0) throw ConfigError("ssim: region of interest is smaller than the window");
  return total / static_cast<double>(n);
}

double pearson_cc(const Image& rec, const Image& gt, const RoiMask& roi) {
  check_inputs(rec, gt, roi, "pearson_cc");
  double sx = 0, sy = 0;
  std::size_t n = 0;
  for (std::size_t k = 0; k < gt.size(); ++k)
    if (roi[k] && gt[k] != 0.0) {
      sx += rec[k];
      sy += gt[k];
      ++n;
    }
  if (n < 2) throw NumericalError("pearson_cc: fewer than two usable pixels");
  const double mx = sx / static_cast<double>(n), my = sy / static_cast<double>(n);
  double cxy = 0, cxx = 0, cyy = 0;
  for (std::size_t k = 0; k < gt.size(); ++k)
    if (roi[k] && gt[k] != 0.0) {
      const double a = rec[k] - mx, b = gt[k] - my;
      cxy += a * b;
      cxx += a * a;
      cyy += b * b;
    }
  if (cxx == 0.0 || cyy == 0.0) throw NumericalError("pearson_cc: constant sample");
  return cxy / std::sqrt(cxx * cyy);
}

double haarpsi_raw(const Image& rec, const Image& gt, const HaarPsiOptions& opt) {
  if (!rec.same_shape(gt)) throw ConfigError("haarpsi: shape mismatch");
  if (rec.nx() < 32 || rec.ny() < 32) throw ConfigError("haarpsi: images must be at least 32 x 32");
  const Image a = opt.preprocess ? haar_subsample(gt) : gt;
  const Image b = opt.preprocess ? haar_subsample(rec) : rec;

  constexpr int kScales = 3;
  std::array<std::array<Image, 2>, kScales> ca, cb;
  for (int s = 0; s < kScales; ++s) {
    ca[static_cast<std::size_t>(s)] = haar_responses(a, s + 1);
    cb[static_cast<std::size_t>(s)] = haar_responses(b, s + 1);
  }

  auto sigmoid = [&](double v) { return 1.0 / (1.0 + std::exp(-opt.alpha * v)); };
  double num = 0.0, den = 0.0;
  for (std::size_t ori = 0; ori < 2; ++ori)
    for (std::size_t k = 0; k < a.size(); ++k) {
      const double weight = std::max(std::abs(ca[2][ori][k]), std::abs(cb[2][ori][k]));
      double local = 0.0;
      for (std::size_t s = 0; s < 2; ++s) {
        const double x = std::abs(ca[s][ori][k]), y = std::abs(cb[s][ori][k]);
        local += (2 * x * y + opt.c) / (x * x + y * y + opt.c);
      }
      local /= 2.0;
      num += sigmoid(local) * weight;
      den += weight;
    }
  if (den == 0.0) throw NumericalError("haarpsi: both images are flat");
  const double v = num / den;
  const double logit = std::log(v / (1.0 - v)) / opt.alpha;
  return logit * logit;
}

double haarpsi(const Image& rec, const Image& gt, const RoiMask& roi, const HaarPsiOptions& opt) {
  check_inputs(rec, gt, roi, "haarpsi");
  if (rec.nx() < 32 || rec.ny() < 32) throw ConfigError("haarpsi: images must be at least 32 x 32");
  const auto [lo, hi] = roi_range(gt, roi);
  if (!(hi > lo)) throw NumericalError("haarpsi: ground truth is constant on the region of interest");
  const double s = 255.0 / (hi - lo);
  Image a = rec, b = gt;
  for (auto& v : a.values()) v = (v - lo) * s;
  for (auto& v : b.values()) v = (v - lo) * s;
  return haarpsi_raw(roi.apply(a), roi.apply(b), opt);
}

MetricsReport evaluate(const Image& rec, const Image& gt, const RoiMask& roi) {
  MetricsReport r;
  const double p = psnr(rec, gt, roi);
  r.psnr_infinite = std::isinf(p);
  r.psnr = r.psnr_infinite ? std::numeric_limits<double>::max() : p;
  r.ssim = ssim(rec, gt, roi);
  r.cc = pearson_cc(rec, gt, roi);
  r.haarpsi = haarpsi(rec, gt, roi);
  return r;
}

}  // namespace patk
