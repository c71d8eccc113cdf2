#include "pstnet/tensor_ops.hpp"

#include <charconv>

#include "pstnet/error.hpp"

namespace pstnet::ops {

namespace F = torch::nn::functional;

torch::Tensor area_downsample(const torch::Tensor& x, int64_t factor) {
  if (factor == 1) return x;
  if (x.size(-1) % factor != 0 || x.size(-2) % factor != 0) {
    throw ShapeError("area_downsample: dims not divisible by " + std::to_string(factor));
  }
  return F::avg_pool2d(x, F::AvgPool2dFuncOptions(factor).stride(factor));
}

torch::Tensor resize_bilinear(const torch::Tensor& x, int64_t height, int64_t width) {
  if (x.size(-2) == height && x.size(-1) == width) return x;
  return F::interpolate(x, F::InterpolateFuncOptions()
                               .size(std::vector<int64_t>{height, width})
                               .mode(torch::kBilinear)
                               .align_corners(false));
}

torch::Tensor luma(const torch::Tensor& rgb) {
  const int64_t c = rgb.dim() - 3;
  return 0.299 * rgb.select(c, 0) + 0.587 * rgb.select(c, 1) + 0.114 * rgb.select(c, 2);
}

torch::Tensor stack_frames(const std::vector<Frame>& frames) {
  std::vector<torch::Tensor> ts;
  ts.reserve(frames.size());
  for (const auto& f : frames) ts.push_back(f.tensor());
  return torch::stack(ts);
}

torch::Tensor stack_masks(const std::vector<Mask>& masks) {
  std::vector<torch::Tensor> ts;
  ts.reserve(masks.size());
  for (const auto& m : masks) ts.push_back(m.tensor());
  return torch::stack(ts);
}

torch::Tensor stack_flows(const std::vector<FlowField>& flows) {
  std::vector<torch::Tensor> ts;
  ts.reserve(flows.size());
  for (const auto& f : flows) ts.push_back(f.tensor());
  return torch::stack(ts);
}

std::pair<torch::Tensor, torch::Tensor> stack_exposure(const std::vector<ExposureParams>& params) {
  if (params.empty()) throw ShapeError("stack_exposure: empty batch");
  const auto n = static_cast<int64_t>(params.front().size());
  auto w = torch::empty({static_cast<int64_t>(params.size()), n, 3}, torch::kFloat32);
  auto b = torch::empty_like(w);
  auto wa = w.accessor<float, 3>();
  auto ba = b.accessor<float, 3>();
  for (std::size_t i = 0; i < params.size(); ++i) {
    if (static_cast<int64_t>(params[i].size()) != n) throw ShapeError("stack_exposure: mixed grids");
    for (int64_t p = 0; p < n; ++p) {
      for (int c = 0; c < 3; ++c) {
        wa[i][p][c] = static_cast<float>(params[i].patches()[p].w[c]);
        ba[i][p][c] = static_cast<float>(params[i].patches()[p].b[c]);
      }
    }
  }
  return {w, b};
}

std::string format_double(double v) {
  char buf[64];
  auto [ptr, ec] = std::to_chars(buf, buf + sizeof(buf), v);
  return std::string(buf, ptr);
}

}  // namespace pstnet::ops
