#pragma once

#include <torch/torch.h>

#include <array>
#include <cstdint>
#include <vector>

namespace pstnet {

/// One RGB video frame, float32 tensor of shape (3, H, W) with values in [0, 1].
///
/// H and W are even and at least 8. The tensor is cloned on construction so a
/// Frame never aliases caller-owned storage.
class Frame {
 public:
  explicit Frame(const torch::Tensor& data);

  /// Clamps to [0, 1] before validating. Non-finite input is still rejected.
  static Frame clamped(const torch::Tensor& data);

  const torch::Tensor& tensor() const { return data_; }
  int64_t height() const { return data_.size(1); }
  int64_t width() const { return data_.size(2); }

 private:
  torch::Tensor data_;
};

/// Shadow mask, float32 (1, H, W). Ground-truth masks are exactly {0, 1};
/// predictions may take any value in [0, 1].
class Mask {
 public:
  explicit Mask(const torch::Tensor& data);

  const torch::Tensor& tensor() const { return data_; }
  int64_t height() const { return data_.size(1); }
  int64_t width() const { return data_.size(2); }
  bool is_binary() const;

 private:
  torch::Tensor data_;
};

/// Dense displacement field (2, H, W): channel 0 is u (columns), channel 1 is v
/// (rows), in pixels from frame t to frame t+1.
class FlowField {
 public:
  explicit FlowField(const torch::Tensor& data);
  static FlowField zeros(int64_t height, int64_t width);

  const torch::Tensor& tensor() const { return data_; }
  int64_t height() const { return data_.size(1); }
  int64_t width() const { return data_.size(2); }

 private:
  torch::Tensor data_;
};

struct PatchExposure {
  std::array<double, 3> w{1.0, 1.0, 1.0};
  std::array<double, 3> b{0.0, 0.0, 0.0};

  friend bool operator==(const PatchExposure&, const PatchExposure&) = default;
};

/// Per-patch, per-channel affine relighting coefficients, row-major over a
/// grid x grid partition of the frame.
class ExposureParams {
 public:
  ExposureParams(int grid, std::vector<PatchExposure> patches);
  static ExposureParams identity(int grid);

  int grid() const { return grid_; }
  std::size_t size() const { return patches_.size(); }
  const std::vector<PatchExposure>& patches() const { return patches_; }
  const PatchExposure& at(int row, int col) const { return patches_[row * grid_ + col]; }

  friend bool operator==(const ExposureParams&, const ExposureParams&) = default;

 private:
  int grid_;
  std::vector<PatchExposure> patches_;
};

/// Aligned training record for frame t of a clip.
struct ClipSample {
  Frame shadow_t;
  Frame shadow_t1;
  Frame free_t;
  Mask mask_t;
  FlowField flow_t;
  ExposureParams exposure_t;
};

/// Throws ValidationError unless every spatial dimension in the sample agrees
/// and the exposure grid divides the frame.
void validate_sample(const ClipSample& sample);

}  // namespace pstnet
