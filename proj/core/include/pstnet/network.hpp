#pragma once

#include <torch/torch.h>

#include "pstnet/aeem.hpp"
#include "pstnet/context.hpp"
#include "pstnet/fusion.hpp"
#include "pstnet/physical.hpp"

namespace pstnet {

struct ModelConfig {
  AeemConfig aeem;
  PhysicalConfig physical;
  FusionConfig fusion;
  /// false: the physical branch sees the input frame twice instead of [I, L].
  bool use_aeem = true;

  /// Fills derived fields (physical.fusion_width) and validates everything.
  void finalize();
  /// Frame dims must be multiples of this.
  int alignment() const;
};

struct NetworkOutputs {
  /// Undefined when the AEEM is disabled.
  ExposureTensors exposure;
  torch::Tensor relit;
  PhysicalOutputs physical;
  torch::Tensor f_sp;
  torch::Tensor f_te;
  /// frame + conv(B_3 + D_3) before clamping.
  torch::Tensor r_final_raw;
  /// r_final_raw clamped to [0, 1].
  torch::Tensor r_final;
};

/// Three-branch shadow removal network: exposure-guided physical branch,
/// full-resolution spatio branch and flow-driven temporal branch, merged by
/// the fusion module.
class PstNetImpl : public torch::nn::Module {
 public:
  explicit PstNetImpl(ModelConfig config);

  /// frames: (B, 3, H, W) shadow frames I_t; flow: (B, 2, H, W) motion to I_{t+1}.
  NetworkOutputs forward(const torch::Tensor& frames, const torch::Tensor& flow);

  const ModelConfig& config() const { return config_; }

  AeemModel aeem{nullptr};
  PhysicalBranch physical{nullptr};
  SpatioBranch spatio{nullptr};
  TemporalBranch temporal{nullptr};
  FusionModule fusion{nullptr};

 private:
  ModelConfig config_;
};
TORCH_MODULE(PstNet);

/// Sets every parameter of the module tree to zero.
void zero_parameters(torch::nn::Module& module);

}  // namespace pstnet
