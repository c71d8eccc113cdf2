#include "pstnet/physical.hpp"

#include "pstnet/error.hpp"
#include "pstnet/tensor_ops.hpp"

namespace pstnet {

namespace nn = torch::nn;

namespace {

nn::Conv2d conv3x3(int in, int out, int stride = 1) {
  return nn::Conv2d(nn::Conv2dOptions(in, out, 3).stride(stride).padding(1));
}

nn::Conv2d conv1x1(int in, int out) { return nn::Conv2d(nn::Conv2dOptions(in, out, 1)); }

}  // namespace

void PhysicalConfig::validate() const {
  if (base_channels < 4) throw ConfigError("physical.base_channels must be >= 4");
  if (depth < 2) throw ConfigError("physical.depth must be >= 2 (three decoder side outputs)");
  if (branch_scale < 1) throw ConfigError("physical.branch_scale must be >= 1");
  if (fusion_width < 1) throw ConfigError("fusion width must be >= 1");
}

ConvBlockImpl::ConvBlockImpl(int in_channels, int out_channels, int stride) {
  conv1 = register_module("conv1", conv3x3(in_channels, out_channels, stride));
  act1 = register_module("act1", nn::PReLU());
  conv2 = register_module("conv2", conv3x3(out_channels, out_channels));
  act2 = register_module("act2", nn::PReLU());
}

torch::Tensor ConvBlockImpl::forward(const torch::Tensor& x) { return act2(conv2(act1(conv1(x)))); }

UNetEncoderImpl::UNetEncoderImpl(int in_channels, int base_channels, int depth) {
  stages = register_module("stages", nn::ModuleList());
  stages->push_back(ConvBlock(in_channels, base_channels));
  int ch = base_channels;
  for (int i = 0; i < depth; ++i) {
    stages->push_back(ConvBlock(ch, ch * 2, 2));
    ch *= 2;
  }
}

std::vector<torch::Tensor> UNetEncoderImpl::forward(const torch::Tensor& x) {
  std::vector<torch::Tensor> feats;
  auto h = x;
  for (const auto& stage : *stages) {
    h = stage->as<ConvBlock>()->forward(h);
    feats.push_back(h);
  }
  return feats;
}

UNetDecoderImpl::UNetDecoderImpl(int base_channels, int depth) {
  stages = register_module("stages", nn::ModuleList());
  for (int level = depth - 1; level >= 0; --level) {
    const int skip_ch = base_channels << level;
    const int up_ch = base_channels << (level + 1);
    stages->push_back(ConvBlock(up_ch + skip_ch, skip_ch));
  }
}

std::vector<torch::Tensor> UNetDecoderImpl::forward(const std::vector<torch::Tensor>& skips) {
  std::vector<torch::Tensor> outs{skips.back()};
  auto h = skips.back();
  int level = static_cast<int>(skips.size()) - 2;
  for (const auto& stage : *stages) {
    const auto& skip = skips[level--];
    auto up = ops::resize_bilinear(h, skip.size(2), skip.size(3));
    h = stage->as<ConvBlock>()->forward(torch::cat({up, skip}, 1));
    outs.push_back(h);
  }
  return outs;
}

MsamImpl::MsamImpl(int channels, MsamMode mode) : channels_(channels), mode_(mode) {
  if (mode_ == MsamMode::no_msam) return;
  conv_image = register_module("conv_image", conv1x1(channels, 3));
  if (mode_ == MsamMode::full) {
    conv_mask = register_module("conv_mask", conv1x1(channels, 1));
  }
  conv_att = register_module("conv_att", conv1x1(mode_ == MsamMode::full ? 4 : 3, channels));
  conv_residual = register_module("conv_residual", conv1x1(channels, channels));
}

torch::Tensor MsamImpl::attention(const torch::Tensor& r_middle, const torch::Tensor& m_pred) {
  auto hybrid = m_pred.defined() ? torch::cat({r_middle, m_pred}, 1) : r_middle;
  return torch::sigmoid(conv_att(hybrid));
}

MsamOutputs MsamImpl::forward(const torch::Tensor& f_rem, const torch::Tensor& f_msk, const torch::Tensor& frame_s) {
  if (f_rem.size(1) != channels_) {
    throw ShapeError("MSAM: expected " + std::to_string(channels_) + " removal channels, got " +
                     std::to_string(f_rem.size(1)));
  }
  if (mode_ == MsamMode::no_msam) {
    return {f_rem, {}, {}};
  }
  if (frame_s.size(2) != f_rem.size(2) || frame_s.size(3) != f_rem.size(3)) {
    throw ShapeError("MSAM: frame and features are not spatially aligned");
  }
  MsamOutputs out;
  out.r_middle = frame_s + conv_image(f_rem);
  if (mode_ == MsamMode::full) {
    if (!f_msk.defined() || f_msk.size(1) != channels_) {
      throw ShapeError("MSAM: mask features missing or with wrong channel count");
    }
    out.m_pred = torch::sigmoid(conv_mask(f_msk));
  }
  out.f_ph = f_rem + conv_residual(f_rem) * attention(out.r_middle, out.m_pred);
  return out;
}

PhysicalBranchImpl::PhysicalBranchImpl(const PhysicalConfig& config) : config_(config) {
  config_.validate();
  const int c = config_.base_channels;
  encoder = register_module("encoder", UNetEncoder(6, c, config_.depth));
  removal_decoder = register_module("removal_decoder", UNetDecoder(c, config_.depth));
  if (config_.msam == MsamMode::full) {
    mask_decoder = register_module("mask_decoder", UNetDecoder(c, config_.depth));
  }
  side_proj = register_module("side_proj", nn::ModuleList());
  // The last three removal-decoder outputs: levels 2, 1, 0.
  for (int level = 2; level >= 0; --level) {
    side_proj->push_back(conv1x1(c << level, config_.fusion_width));
  }
  msam = register_module("msam", Msam(c, config_.msam));
}

PhysicalOutputs PhysicalBranchImpl::forward(const torch::Tensor& frame, const torch::Tensor& relit) {
  if (frame.sizes() != relit.sizes()) {
    throw ShapeError("physical branch: frame and relit image differ in shape");
  }
  const auto h = frame.size(2);
  const auto w = frame.size(3);
  if (h % config_.alignment() != 0 || w % config_.alignment() != 0) {
    throw ShapeError("physical branch: input " + std::to_string(h) + "x" + std::to_string(w) +
                     " not divisible by " + std::to_string(config_.alignment()));
  }
  auto frame_s = ops::area_downsample(frame, config_.branch_scale);
  auto relit_s = ops::area_downsample(relit, config_.branch_scale);
  auto skips = encoder(torch::cat({frame_s, relit_s}, 1));
  auto rem = removal_decoder(skips);

  PhysicalOutputs out;
  out.f_rem = rem.back();
  if (mask_decoder) {
    out.f_msk = mask_decoder(skips).back();
  }
  const std::size_t first = rem.size() - 3;
  for (std::size_t i = 0; i < 3; ++i) {
    auto proj = side_proj[i]->as<nn::Conv2d>()->forward(rem[first + i]);
    out.d_feats.push_back(ops::resize_bilinear(proj, h, w));
  }
  auto m = msam(out.f_rem, out.f_msk, frame_s);
  out.f_ph = m.f_ph;
  out.r_middle = m.r_middle;
  out.m_pred = m.m_pred;
  return out;
}

}  // namespace pstnet
