#pragma once

#include <torch/torch.h>

#include <vector>

namespace pstnet {

enum class FusionMode {
  /// Three temporal-aware attention blocks.
  tab,
  /// Plain concatenation of the three branches + 1x1 convolution (ablation).
  concat,
};

struct FusionConfig {
  int width = 32;
  /// SCABs per TAB.
  int k = 8;
  /// Channel reduction inside the SCAB attention squeeze.
  int reduction = 4;
  FusionMode mode = FusionMode::tab;

  static constexpr int n_tabs = 3;
  void validate() const;
};

/// Self channel attention block:
///   g = PReLU(conv3x3(PReLU(conv3x3(f))))
///   a = sigmoid(conv1x1(PReLU(conv1x1(GAP(g)))))
///   out = g * a
class ScabImpl : public torch::nn::Module {
 public:
  ScabImpl(int width, int reduction);
  torch::Tensor forward(const torch::Tensor& f);
  /// Body features g and the per-channel attention a, shape (B, C, 1, 1).
  std::pair<torch::Tensor, torch::Tensor> body_and_attention(const torch::Tensor& f);

  torch::nn::Conv2d conv1{nullptr};
  torch::nn::PReLU act1{nullptr};
  torch::nn::Conv2d conv2{nullptr};
  torch::nn::PReLU act2{nullptr};
  torch::nn::Conv2d squeeze{nullptr};
  torch::nn::PReLU squeeze_act{nullptr};
  torch::nn::Conv2d excite{nullptr};

 private:
  int width_;
};
TORCH_MODULE(Scab);

/// Cross channel attention block: 1x1 reduction of [f, f_te] followed by a SCAB.
class CcabImpl : public torch::nn::Module {
 public:
  CcabImpl(int width, int temporal_width, int reduction);
  torch::Tensor forward(const torch::Tensor& f, const torch::Tensor& f_te);

  torch::nn::Conv2d reduce{nullptr};
  Scab body{nullptr};
};
TORCH_MODULE(Ccab);

/// Temporal-aware attention block: f + CCAB(SCAB^k(f), f_te).
class TabImpl : public torch::nn::Module {
 public:
  TabImpl(int width, int k, int reduction);
  torch::Tensor forward(const torch::Tensor& f, const torch::Tensor& f_te);

  torch::nn::ModuleList scabs{nullptr};
  Ccab ccab{nullptr};
};
TORCH_MODULE(Tab);

/// Full-resolution fusion of physical, spatio and temporal features.
class FusionModuleImpl : public torch::nn::Module {
 public:
  explicit FusionModuleImpl(const FusionConfig& config);

  /// f_ph, f_te at branch resolution; f_sp, d_feats at (H, W). Returns the
  /// unclamped residual prediction frame + conv(B_3 + D_3).
  torch::Tensor forward(const torch::Tensor& f_ph, const torch::Tensor& f_sp, const torch::Tensor& f_te,
                        const std::vector<torch::Tensor>& d_feats, const torch::Tensor& frame);

  const FusionConfig& config() const { return config_; }

  torch::nn::Conv2d adapter{nullptr};
  torch::nn::ModuleList tabs{nullptr};
  torch::nn::Conv2d output{nullptr};

 private:
  FusionConfig config_;
};
TORCH_MODULE(FusionModule);

}  // namespace pstnet
