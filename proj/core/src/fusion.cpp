#include "pstnet/fusion.hpp"

#include <algorithm>

#include "pstnet/error.hpp"
#include "pstnet/tensor_ops.hpp"

namespace pstnet {

namespace nn = torch::nn;

namespace {

nn::Conv2d conv3x3(int in, int out) { return nn::Conv2d(nn::Conv2dOptions(in, out, 3).padding(1)); }
nn::Conv2d conv1x1(int in, int out) { return nn::Conv2d(nn::Conv2dOptions(in, out, 1)); }

void require_aligned(const torch::Tensor& a, const torch::Tensor& b, const char* what) {
  if (a.size(0) != b.size(0) || a.size(2) != b.size(2) || a.size(3) != b.size(3)) {
    throw ShapeError(std::string(what) + ": inputs are not spatially aligned");
  }
}

}  // namespace

void FusionConfig::validate() const {
  if (width < 4) throw ConfigError("fusion.width must be >= 4");
  if (k < 1) throw ConfigError("fusion.k must be >= 1");
  if (reduction < 1) throw ConfigError("fusion.reduction must be >= 1");
}

ScabImpl::ScabImpl(int width, int reduction) : width_(width) {
  const int squeezed = std::max(1, width / reduction);
  conv1 = register_module("conv1", conv3x3(width, width));
  act1 = register_module("act1", nn::PReLU());
  conv2 = register_module("conv2", conv3x3(width, width));
  act2 = register_module("act2", nn::PReLU());
  squeeze = register_module("squeeze", conv1x1(width, squeezed));
  squeeze_act = register_module("squeeze_act", nn::PReLU());
  excite = register_module("excite", conv1x1(squeezed, width));
}

std::pair<torch::Tensor, torch::Tensor> ScabImpl::body_and_attention(const torch::Tensor& f) {
  if (f.size(1) != width_) {
    throw ShapeError("SCAB: expected " + std::to_string(width_) + " channels, got " + std::to_string(f.size(1)));
  }
  auto g = act2(conv2(act1(conv1(f))));
  auto pooled = g.mean({2, 3}, /*keepdim=*/true);
  auto a = torch::sigmoid(excite(squeeze_act(squeeze(pooled))));
  return {g, a};
}

torch::Tensor ScabImpl::forward(const torch::Tensor& f) {
  auto [g, a] = body_and_attention(f);
  return g * a;
}

CcabImpl::CcabImpl(int width, int temporal_width, int reduction) {
  reduce = register_module("reduce", conv1x1(width + temporal_width, width));
  body = register_module("body", Scab(width, reduction));
}

torch::Tensor CcabImpl::forward(const torch::Tensor& f, const torch::Tensor& f_te) {
  require_aligned(f, f_te, "CCAB");
  return body(reduce(torch::cat({f, f_te}, 1)));
}

TabImpl::TabImpl(int width, int k, int reduction) {
  scabs = register_module("scabs", nn::ModuleList());
  for (int i = 0; i < k; ++i) scabs->push_back(Scab(width, reduction));
  ccab = register_module("ccab", Ccab(width, width, reduction));
}

torch::Tensor TabImpl::forward(const torch::Tensor& f, const torch::Tensor& f_te) {
  auto h = f;
  for (const auto& s : *scabs) h = s->as<Scab>()->forward(h);
  return f + ccab(h, f_te);
}

FusionModuleImpl::FusionModuleImpl(const FusionConfig& config) : config_(config) {
  config_.validate();
  const int w = config_.width;
  if (config_.mode == FusionMode::tab) {
    adapter = register_module("adapter", conv1x1(2 * w, w));
    tabs = register_module("tabs", nn::ModuleList());
    for (int i = 0; i < FusionConfig::n_tabs; ++i) tabs->push_back(Tab(w, config_.k, config_.reduction));
  } else {
    adapter = register_module("adapter", conv1x1(3 * w, w));
  }
  output = register_module("output", conv1x1(w, 3));
}

torch::Tensor FusionModuleImpl::forward(const torch::Tensor& f_ph, const torch::Tensor& f_sp,
                                        const torch::Tensor& f_te, const std::vector<torch::Tensor>& d_feats,
                                        const torch::Tensor& frame) {
  const auto h = frame.size(2);
  const auto w = frame.size(3);
  if (d_feats.size() != 3) throw ShapeError("fusion: expected three decoder side features");
  require_aligned(f_sp, frame, "fusion");
  for (const auto& d : d_feats) require_aligned(d, frame, "fusion");

  auto ph = ops::resize_bilinear(f_ph, h, w);
  auto te = ops::resize_bilinear(f_te, h, w);
  torch::Tensor hybrid;
  if (config_.mode == FusionMode::tab) {
    hybrid = adapter(torch::cat({ph, f_sp}, 1));
    for (int i = 0; i < FusionConfig::n_tabs; ++i) {
      if (i > 0) hybrid = hybrid + d_feats[i - 1];
      hybrid = tabs[i]->as<Tab>()->forward(hybrid, te);
    }
  } else {
    hybrid = adapter(torch::cat({ph, f_sp, te}, 1));
  }
  auto out = frame + output(hybrid + d_feats[2]);
  if (out.size(2) != h || out.size(3) != w) {
    throw ShapeError("fusion changed the spatial resolution");
  }
  return out;
}

}  // namespace pstnet
