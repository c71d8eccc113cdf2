#pragma once

#include <torch/torch.h>

#include <map>
#include <optional>
#include <string>
#include <vector>

#include "pstnet/types.hpp"

namespace pstnet {

inline constexpr double kCharbonnierEps = 1e-3;
inline constexpr double kBceClip = 1e-6;

struct LossWeights {
  double alpha = 1.0;
  double beta = 1.0;
  double gamma = 1.0;

  void validate() const;
};

/// mean(sqrt((a - b)^2 + eps^2)).
torch::Tensor charbonnier(const torch::Tensor& a, const torch::Tensor& b);

/// sum over patches of charbonnier(w_n, w_hat_n) + charbonnier(b_n, b_hat_n);
/// each term averages the three channels. (B, N, 3) inputs, mean over the batch.
torch::Tensor loss_reg(const torch::Tensor& w, const torch::Tensor& b, const torch::Tensor& w_gt,
                       const torch::Tensor& b_gt);
double loss_reg(const ExposureParams& pred, const ExposureParams& gt);

/// Mean binary cross entropy with predictions clipped to [1e-6, 1 - 1e-6].
torch::Tensor loss_seg(const torch::Tensor& m_pred, const torch::Tensor& m_gt);

/// charbonnier(r_middle, gt_small) + charbonnier(r_final, gt). An undefined
/// r_middle drops the coarse term.
torch::Tensor loss_res(const torch::Tensor& r_middle, const torch::Tensor& r_final, const torch::Tensor& gt_small,
                       const torch::Tensor& gt);

/// alpha * reg + beta * seg + gamma * res. Undefined components count as zero.
torch::Tensor total_loss(const torch::Tensor& reg, const torch::Tensor& seg, const torch::Tensor& res,
                         const LossWeights& weights);

/// Area-downsampled mask re-binarised at 0.5.
torch::Tensor downsample_mask(const torch::Tensor& mask, int64_t factor);

/// sRGB-encoded [0, 1] values -> CIELAB (D65), float64. Accepts (3, H, W) or (B, 3, H, W).
torch::Tensor rgb_to_lab(const torch::Tensor& rgb);

/// Squared and absolute LAB error totals over one pixel region.
struct RegionError {
  double sq_sum = 0.0;
  double abs_sum = 0.0;
  int64_t pixels = 0;

  /// sqrt(mean over pixels of sum_c d_c^2 / 3); nullopt for an empty region.
  std::optional<double> rmse() const;
  /// mean over pixels of sum_c |d_c| / 3.
  std::optional<double> mae() const;
  RegionError& operator+=(const RegionError& o);
};

struct RegionTriple {
  RegionError shadow;
  RegionError non_shadow;
  RegionError all;
  RegionTriple& operator+=(const RegionTriple& o);
};

/// Per-region LAB errors of one prediction against ground truth.
RegionTriple lab_errors(const Frame& pred, const Frame& gt, const Mask& mask);
/// Same on precomputed (3, H, W) float64 LAB images.
RegionTriple lab_errors_from_lab(const torch::Tensor& lab_pred, const torch::Tensor& lab_gt, const Mask& mask);

struct MetricValues {
  std::optional<double> shadow;
  std::optional<double> non_shadow;
  std::optional<double> all;
  std::optional<double> mae_shadow;
  std::optional<double> mae_non_shadow;
  std::optional<double> mae_all;

  static MetricValues from(const RegionTriple& e);
};

/// Region-split LAB metrics for a test set. Aggregate values pool all pixels
/// unless per_frame averaging is requested.
struct MetricReport {
  MetricValues aggregate;
  std::map<std::string, MetricValues> per_video;

  std::string to_json() const;
};

class MetricAccumulator {
 public:
  explicit MetricAccumulator(bool per_frame_average = false) : per_frame_(per_frame_average) {}

  void add(const std::string& video_id, const Frame& pred, const Frame& gt, const Mask& mask);
  MetricReport report() const;

 private:
  bool per_frame_;
  RegionTriple pooled_;
  std::map<std::string, RegionTriple> videos_;
  std::vector<RegionTriple> frames_;
};

/// Single-frame convenience: pooled metrics of one frame.
MetricValues rmse_lab(const Frame& pred, const Frame& gt, const Mask& mask);

}  // namespace pstnet
