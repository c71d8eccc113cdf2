#include "pstnet/types.hpp"

#include <cmath>
#include <sstream>

#include "pstnet/error.hpp"

namespace pstnet {
namespace {

torch::Tensor as_float_contiguous(const torch::Tensor& t) {
  return t.detach().to(torch::kFloat32).contiguous().clone();
}

void require_finite(const torch::Tensor& t, const char* what) {
  if (!torch::isfinite(t).all().item<bool>()) {
    throw ValidationError(std::string(what) + " contains non-finite values");
  }
}

std::string shape_str(const torch::Tensor& t) {
  std::ostringstream os;
  os << t.sizes();
  return os.str();
}

}  // namespace

Frame::Frame(const torch::Tensor& data) {
  if (!data.defined() || data.dim() != 3 || data.size(0) != 3) {
    throw ShapeError("frame must have shape (3, H, W), got " +
                     (data.defined() ? shape_str(data) : std::string("undefined")));
  }
  if (data.size(1) < 8 || data.size(2) < 8) {
    throw ShapeError("frame must be at least 8x8, got " + shape_str(data));
  }
  if (data.size(1) % 2 != 0 || data.size(2) % 2 != 0) {
    throw ShapeError("frame dimensions must be even, got " + shape_str(data));
  }
  data_ = as_float_contiguous(data);
  require_finite(data_, "frame");
  if (data_.min().item<float>() < 0.0f || data_.max().item<float>() > 1.0f) {
    throw ValidationError("frame values must lie in [0, 1]");
  }
}

Frame Frame::clamped(const torch::Tensor& data) {
  auto t = data.detach().to(torch::kFloat32);
  require_finite(t, "frame");
  return Frame(t.clamp(0.0, 1.0));
}

Mask::Mask(const torch::Tensor& data) {
  if (!data.defined() || data.dim() != 3 || data.size(0) != 1) {
    throw ShapeError("mask must have shape (1, H, W)");
  }
  data_ = as_float_contiguous(data);
  require_finite(data_, "mask");
  if (data_.min().item<float>() < 0.0f || data_.max().item<float>() > 1.0f) {
    throw ValidationError("mask values must lie in [0, 1]");
  }
}

bool Mask::is_binary() const {
  return ((data_ == 0.0f) | (data_ == 1.0f)).all().item<bool>();
}

FlowField::FlowField(const torch::Tensor& data) {
  if (!data.defined() || data.dim() != 3 || data.size(0) != 2) {
    throw ShapeError("flow must have shape (2, H, W)");
  }
  data_ = as_float_contiguous(data);
  require_finite(data_, "flow");
  const auto h = static_cast<float>(data_.size(1));
  const auto w = static_cast<float>(data_.size(2));
  if (data_[0].abs().max().item<float>() >= w || data_[1].abs().max().item<float>() >= h) {
    throw ValidationError("flow displacement exceeds frame extent");
  }
}

FlowField FlowField::zeros(int64_t height, int64_t width) {
  return FlowField(torch::zeros({2, height, width}));
}

ExposureParams::ExposureParams(int grid, std::vector<PatchExposure> patches)
    : grid_(grid), patches_(std::move(patches)) {
  if (grid_ < 1) {
    throw ValidationError("exposure grid must be >= 1");
  }
  if (patches_.size() != static_cast<std::size_t>(grid_) * grid_) {
    throw ValidationError("exposure patch count " + std::to_string(patches_.size()) +
                          " does not match grid " + std::to_string(grid_) + "x" +
                          std::to_string(grid_));
  }
  for (const auto& p : patches_) {
    for (int c = 0; c < 3; ++c) {
      if (!std::isfinite(p.w[c]) || !std::isfinite(p.b[c])) {
        throw ValidationError("exposure parameters must be finite");
      }
      if (p.w[c] <= 0.0) {
        throw ValidationError("exposure w must be positive");
      }
    }
  }
}

ExposureParams ExposureParams::identity(int grid) {
  return ExposureParams(grid, std::vector<PatchExposure>(static_cast<std::size_t>(grid) * grid));
}

void validate_sample(const ClipSample& s) {
  const auto h = s.shadow_t.height();
  const auto w = s.shadow_t.width();
  auto same = [&](int64_t hh, int64_t ww) { return hh == h && ww == w; };
  if (!same(s.shadow_t1.height(), s.shadow_t1.width()) ||
      !same(s.free_t.height(), s.free_t.width()) ||
      !same(s.mask_t.height(), s.mask_t.width()) ||
      !same(s.flow_t.height(), s.flow_t.width())) {
    throw ValidationError("clip sample spatial dimensions disagree");
  }
  const int g = s.exposure_t.grid();
  if (h % g != 0 || w % g != 0) {
    throw ValidationError("exposure grid does not divide the frame");
  }
}

}  // namespace pstnet
