#pragma once

#include <cstdint>
#include <optional>
#include <vector>

#include "patk/field.hpp"

namespace patk {

/// Binary region of interest over an image grid.
class RoiMask {
 public:
  RoiMask() = default;
  RoiMask(std::size_t nx, std::size_t ny, bool value = true) : nx_(nx), ny_(ny), m_(nx * ny, value ? 1 : 0) {}

  static RoiMask full(const Image& like) { return RoiMask(like.nx(), like.ny(), true); }

  std::size_t nx() const { return nx_; }
  std::size_t ny() const { return ny_; }
  std::size_t count() const;
  bool operator()(std::size_t i, std::size_t j) const { return m_[i * ny_ + j] != 0; }
  bool operator[](std::size_t k) const { return m_[k] != 0; }
  void set(std::size_t i, std::size_t j, bool v) { m_[i * ny_ + j] = v ? 1 : 0; }

  bool matches(const Image& f) const { return f.nx() == nx_ && f.ny() == ny_; }
  /// f with pixels outside the mask set to zero.
  Image apply(const Image& f) const;

 private:
  std::size_t nx_ = 0, ny_ = 0;
  std::vector<std::uint8_t> m_;
};

/// gt > threshold_frac * max(gt).
RoiMask roi_from_gt(const Image& gt, double threshold_frac);

/// 10 log10(R^2 / MSE) over the ROI, R the ground-truth range on the ROI.
/// Returns +infinity when MSE is zero.
double psnr(const Image& rec, const Image& gt, const RoiMask& roi);

struct SsimOptions {
  int window = 7;
  double k1 = 0.01;
  double k2 = 0.03;
};

/// Mean SSIM with a uniform window and sample covariances. Both images are
/// zeroed outside the ROI and cropped to its bounding box; the map is
/// averaged over window centers that lie in the ROI and whose window fits
/// in the box.
double ssim(const Image& rec, const Image& gt, const RoiMask& roi, const SsimOptions& opt = {});

/// Pearson correlation over pixels inside the ROI with nonzero ground truth.
double pearson_cc(const Image& rec, const Image& gt, const RoiMask& roi);

struct HaarPsiOptions {
  double c = 30.0;
  double alpha = 4.2;
  bool preprocess = true;  // 2x2 mean filter and factor-2 subsampling
};

/// HaarPSI of grayscale images already on a [0, 255] scale.
double haarpsi_raw(const Image& rec, const Image& gt, const HaarPsiOptions& opt = {});

/// HaarPSI after mapping the ground-truth ROI range onto [0, 255] and
/// zeroing pixels outside the ROI. Images must be at least 32 x 32.
double haarpsi(const Image& rec, const Image& gt, const RoiMask& roi, const HaarPsiOptions& opt = {});

struct MetricsReport {
  double psnr = 0.0;          // dB; largest finite double when infinite
  bool psnr_infinite = false;
  double ssim = 0.0;
  double cc = 0.0;
  double haarpsi = 0.0;
  std::optional<double> lpips;  // not computed
};

MetricsReport evaluate(const Image& rec, const Image& gt, const RoiMask& roi);

}  // namespace patk
