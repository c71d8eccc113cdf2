#include "pstnet/context.hpp"

#include <cmath>
#include <limits>
#include <numbers>
#include <vector>

#include "pstnet/error.hpp"
#include "pstnet/tensor_ops.hpp"

namespace pstnet {

namespace nn = torch::nn;

std::string to_string(FlowProviderKind kind) {
  return kind == FlowProviderKind::ground_truth ? "ground_truth" : "block_matching";
}

FlowProviderKind flow_provider_from_string(const std::string& name) {
  if (name == "ground_truth") return FlowProviderKind::ground_truth;
  if (name == "block_matching") return FlowProviderKind::block_matching;
  throw ConfigError("flow.provider must be ground_truth or block_matching, got '" + name + "'");
}

FlowField flow_estimate(const FlowProvider& provider, const Frame& frame_t, const Frame& frame_t1,
                        const std::optional<FlowField>& stored) {
  if (frame_t.height() != frame_t1.height() || frame_t.width() != frame_t1.width()) {
    throw ShapeError("flow_estimate: frames differ in shape");
  }
  if (provider.kind == FlowProviderKind::ground_truth) {
    if (!stored) throw MissingDataError("ground_truth flow provider needs stored flow");
    return *stored;
  }
  return block_matching_flow(frame_t, frame_t1, provider.block, provider.radius);
}

FlowField block_matching_flow(const Frame& frame_t, const Frame& frame_t1, int block, int radius) {
  if (block < 1 || radius < 0) throw ValidationError("block matching: bad block or radius");
  const auto a = frame_t.tensor().contiguous();
  const auto b = frame_t1.tensor().contiguous();
  const int h = static_cast<int>(frame_t.height());
  const int w = static_cast<int>(frame_t.width());
  const float* pa = a.data_ptr<float>();
  const float* pb = b.data_ptr<float>();
  const std::size_t plane = static_cast<std::size_t>(h) * w;

  const int by_count = (h + block - 1) / block;
  const int bx_count = (w + block - 1) / block;
  std::vector<float> bu(static_cast<std::size_t>(by_count) * bx_count);
  std::vector<float> bv(bu.size());
  std::vector<double> cy(by_count);
  std::vector<double> cx(bx_count);

  for (int by = 0; by < by_count; ++by) {
    const int y0 = by * block;
    const int y1 = std::min(h, y0 + block);
    cy[by] = 0.5 * (y0 + y1) - 0.5;
    for (int bx = 0; bx < bx_count; ++bx) {
      const int x0 = bx * block;
      const int x1 = std::min(w, x0 + block);
      cx[bx] = 0.5 * (x0 + x1) - 0.5;
      double best = std::numeric_limits<double>::infinity();
      int best_norm = std::numeric_limits<int>::max();
      int best_dx = 0;
      int best_dy = 0;
      for (int dy = -radius; dy <= radius; ++dy) {
        if (y0 + dy < 0 || y1 + dy > h) continue;
        for (int dx = -radius; dx <= radius; ++dx) {
          if (x0 + dx < 0 || x1 + dx > w) continue;
          double sad = 0.0;
          for (int c = 0; c < 3; ++c) {
            for (int y = y0; y < y1; ++y) {
              const float* ra = pa + c * plane + static_cast<std::size_t>(y) * w;
              const float* rb = pb + c * plane + static_cast<std::size_t>(y + dy) * w + dx;
              for (int x = x0; x < x1; ++x) sad += std::abs(ra[x] - rb[x]);
            }
          }
          const int norm = dx * dx + dy * dy;
          if (sad < best || (sad == best && norm < best_norm)) {
            best = sad;
            best_norm = norm;
            best_dx = dx;
            best_dy = dy;
          }
        }
      }
      bu[static_cast<std::size_t>(by) * bx_count + bx] = static_cast<float>(best_dx);
      bv[static_cast<std::size_t>(by) * bx_count + bx] = static_cast<float>(best_dy);
    }
  }

  // Bilinear interpolation between block centres, clamped at the borders.
  auto out = torch::zeros({2, h, w}, torch::kFloat32);
  float* ou = out[0].data_ptr<float>();
  float* ov = out[1].data_ptr<float>();
  auto locate = [](const std::vector<double>& centers, double p, int& i0, int& i1, double& t) {
    const int n = static_cast<int>(centers.size());
    if (p <= centers.front() || n == 1) {
      i0 = i1 = 0;
      t = 0.0;
      return;
    }
    if (p >= centers.back()) {
      i0 = i1 = n - 1;
      t = 0.0;
      return;
    }
    i0 = 0;
    while (i0 + 1 < n && centers[i0 + 1] <= p) ++i0;
    i1 = std::min(i0 + 1, n - 1);
    t = i1 == i0 ? 0.0 : (p - centers[i0]) / (centers[i1] - centers[i0]);
  };
  for (int y = 0; y < h; ++y) {
    int y0 = 0, y1 = 0;
    double ty = 0.0;
    locate(cy, y, y0, y1, ty);
    for (int x = 0; x < w; ++x) {
      int x0 = 0, x1 = 0;
      double tx = 0.0;
      locate(cx, x, x0, x1, tx);
      auto sample = [&](const std::vector<float>& v) {
        auto at = [&](int yy, int xx) { return static_cast<double>(v[static_cast<std::size_t>(yy) * bx_count + xx]); };
        const double top = at(y0, x0) * (1 - tx) + at(y0, x1) * tx;
        const double bot = at(y1, x0) * (1 - tx) + at(y1, x1) * tx;
        return static_cast<float>(top * (1 - ty) + bot * ty);
      };
      ou[static_cast<std::size_t>(y) * w + x] = sample(bu);
      ov[static_cast<std::size_t>(y) * w + x] = sample(bv);
    }
  }
  return FlowField(out);
}

torch::Tensor flow_to_color(const torch::Tensor& flow) {
  if (flow.dim() != 4 || flow.size(1) != 2) throw ShapeError("flow_to_color expects (B, 2, H, W)");
  const double cap = 0.25 * static_cast<double>(std::max(flow.size(2), flow.size(3)));
  auto u = flow.select(1, 0);
  auto v = flow.select(1, 1);
  auto hue = torch::atan2(v, u);
  hue = torch::where(hue < 0, hue + 2.0 * std::numbers::pi, hue);
  auto sat = (torch::sqrt(u * u + v * v) / cap).clamp_max(1.0);
  auto h6 = hue * (3.0 / std::numbers::pi);
  // HSV -> RGB with V = 1: channel(n) = 1 - S * clamp(min(k, 4 - k), 0, 1), k = (n + H6) mod 6.
  auto channel = [&](double n) {
    auto k = torch::remainder(h6 + n, 6.0);
    return 1.0 - sat * torch::minimum(k, 4.0 - k).clamp(0.0, 1.0);
  };
  return torch::stack({channel(5.0), channel(3.0), channel(1.0)}, 1);
}

Frame flow_to_color(const FlowField& flow) {
  return Frame::clamped(flow_to_color(flow.tensor().unsqueeze(0))[0]);
}

SpatioBranchImpl::SpatioBranchImpl(int width, int reduction) {
  conv = register_module("conv", nn::Conv2d(nn::Conv2dOptions(3, width, 3).padding(1)));
  scab = register_module("scab", Scab(width, reduction));
}

torch::Tensor SpatioBranchImpl::forward(const torch::Tensor& frame) {
  auto out = scab(conv(frame));
  if (out.size(2) != frame.size(2) || out.size(3) != frame.size(3)) {
    throw ShapeError("spatio branch changed the spatial resolution");
  }
  return out;
}

TemporalBranchImpl::TemporalBranchImpl(int width, int branch_scale, int reduction) : branch_scale_(branch_scale) {
  conv = register_module("conv", nn::Conv2d(nn::Conv2dOptions(3, width, 3).padding(1)));
  scab = register_module("scab", Scab(width, reduction));
}

torch::Tensor TemporalBranchImpl::forward(const torch::Tensor& flow) {
  const auto dtype = conv->weight.scalar_type();
  auto color = flow_to_color(flow.detach()).to(dtype);
  return scab(conv(ops::area_downsample(color, branch_scale_)));
}

}  // namespace pstnet
