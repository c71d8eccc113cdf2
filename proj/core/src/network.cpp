#include "pstnet/network.hpp"

#include <numeric>

#include "pstnet/error.hpp"

namespace pstnet {

void ModelConfig::finalize() {
  physical.fusion_width = fusion.width;
  aeem.validate();
  physical.validate();
  fusion.validate();
}

int ModelConfig::alignment() const {
  const int a = physical.alignment();
  return use_aeem ? std::lcm(a, aeem.grid) : a;
}

PstNetImpl::PstNetImpl(ModelConfig config) : config_(std::move(config)) {
  config_.finalize();
  if (config_.use_aeem) {
    aeem = register_module("aeem", AeemModel(config_.aeem));
  }
  physical = register_module("physical", PhysicalBranch(config_.physical));
  spatio = register_module("spatio", SpatioBranch(config_.fusion.width, config_.fusion.reduction));
  temporal = register_module(
      "temporal", TemporalBranch(config_.fusion.width, config_.physical.branch_scale, config_.fusion.reduction));
  fusion = register_module("fusion", FusionModule(config_.fusion));
}

NetworkOutputs PstNetImpl::forward(const torch::Tensor& frames, const torch::Tensor& flow) {
  if (frames.dim() != 4 || frames.size(1) != 3) throw ShapeError("network expects frames (B, 3, H, W)");
  if (flow.dim() != 4 || flow.size(1) != 2 || flow.size(0) != frames.size(0) || flow.size(2) != frames.size(2) ||
      flow.size(3) != frames.size(3)) {
    throw ShapeError("network expects flow (B, 2, H, W) aligned with the frames");
  }
  NetworkOutputs out;
  if (config_.use_aeem) {
    out.exposure = aeem(frames);
    out.relit = relight(frames, out.exposure.w, out.exposure.b, config_.aeem.grid);
  } else {
    out.relit = frames;
  }
  out.physical = physical(frames, out.relit);
  out.f_sp = spatio(frames);
  out.f_te = temporal(flow);
  out.r_final_raw = fusion(out.physical.f_ph, out.f_sp, out.f_te, out.physical.d_feats, frames);
  out.r_final = out.r_final_raw.clamp(0.0, 1.0);
  return out;
}

void zero_parameters(torch::nn::Module& module) {
  torch::NoGradGuard no_grad;
  for (auto& p : module.parameters()) p.zero_();
}

}  // namespace pstnet
