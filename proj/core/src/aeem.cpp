#include "pstnet/aeem.hpp"

#include <cmath>

#include "pstnet/error.hpp"

namespace pstnet {

namespace F = torch::nn::functional;

void AeemConfig::validate() const {
  if (grid < 1) throw ConfigError("aeem.grid must be >= 1");
  if (token_dim < 1 || n_heads < 1 || token_dim % n_heads != 0) {
    throw ConfigError("aeem.token_dim must be divisible by aeem.n_heads");
  }
  if (n_blocks < 0) throw ConfigError("aeem.n_blocks must be >= 0");
  if (!(mlp_ratio > 0.0)) throw ConfigError("aeem.mlp_ratio must be positive");
  if (patch_pool < 1) throw ConfigError("aeem.patch_pool must be >= 1");
}

SelfAttentionImpl::SelfAttentionImpl(int dim, int heads) : heads_(heads) {
  qkv = register_module("qkv", torch::nn::Linear(dim, 3 * dim));
  proj = register_module("proj", torch::nn::Linear(dim, dim));
}

torch::Tensor SelfAttentionImpl::forward(const torch::Tensor& x) {
  const auto batch = x.size(0);
  const auto tokens = x.size(1);
  const auto dim = x.size(2);
  const auto head_dim = dim / heads_;
  // (B, T, 3, heads, hd) -> 3 x (B, heads, T, hd)
  auto parts = qkv(x).view({batch, tokens, 3, heads_, head_dim}).permute({2, 0, 3, 1, 4});
  auto q = parts[0];
  auto k = parts[1];
  auto v = parts[2];
  auto attn = torch::softmax(torch::matmul(q, k.transpose(-2, -1)) / std::sqrt(static_cast<double>(head_dim)), -1);
  auto out = torch::matmul(attn, v).transpose(1, 2).reshape({batch, tokens, dim});
  return proj(out);
}

TransformerBlockImpl::TransformerBlockImpl(int dim, int heads, double mlp_ratio) {
  const int hidden = static_cast<int>(std::lround(dim * mlp_ratio));
  norm1 = register_module("norm1", torch::nn::LayerNorm(torch::nn::LayerNormOptions({dim})));
  attn = register_module("attn", SelfAttention(dim, heads));
  norm2 = register_module("norm2", torch::nn::LayerNorm(torch::nn::LayerNormOptions({dim})));
  fc1 = register_module("fc1", torch::nn::Linear(dim, hidden));
  fc2 = register_module("fc2", torch::nn::Linear(hidden, dim));
}

torch::Tensor TransformerBlockImpl::forward(torch::Tensor x) {
  x = x + attn(norm1(x));
  return x + fc2(F::gelu(fc1(norm2(x))));
}

AeemModelImpl::AeemModelImpl(const AeemConfig& config) : config_(config) {
  config_.validate();
  const int in_features = 3 * config_.patch_pool * config_.patch_pool;
  token_proj = register_module("token_proj", torch::nn::Linear(in_features, config_.token_dim));
  pos_embed = register_parameter("pos_embed", torch::randn({config_.patches(), config_.token_dim}) * 0.02);
  blocks = register_module("blocks", torch::nn::ModuleList());
  for (int i = 0; i < config_.n_blocks; ++i) {
    blocks->push_back(TransformerBlock(config_.token_dim, config_.n_heads, config_.mlp_ratio));
  }
  head = register_module("head", torch::nn::Linear(config_.token_dim, config_.per_channel ? 6 : 2));
}

torch::Tensor tokenize_patches(const torch::Tensor& frames, int grid, int pool) {
  const auto batch = frames.size(0);
  const auto h = frames.size(2);
  const auto w = frames.size(3);
  if (h % grid != 0 || w % grid != 0) {
    throw ShapeError("AEEM: frame " + std::to_string(h) + "x" + std::to_string(w) +
                     " not divisible by grid " + std::to_string(grid));
  }
  const auto ph = h / grid;
  const auto pw = w / grid;
  auto patches = frames.reshape({batch, 3, grid, ph, grid, pw})
                     .permute({0, 2, 4, 1, 3, 5})
                     .reshape({batch * grid * grid, 3, ph, pw});
  auto pooled = F::adaptive_avg_pool2d(patches, F::AdaptiveAvgPool2dFuncOptions({pool, pool}));
  return pooled.reshape({batch, grid * grid, 3 * pool * pool});
}

ExposureTensors AeemModelImpl::forward(const torch::Tensor& frames) {
  if (frames.dim() != 4 || frames.size(1) != 3) {
    throw ShapeError("AEEM expects (B, 3, H, W)");
  }
  auto tokens = token_proj(tokenize_patches(frames, config_.grid, config_.patch_pool)) + pos_embed;
  for (const auto& block : *blocks) {
    tokens = block->as<TransformerBlock>()->forward(tokens);
  }
  auto h = head(tokens);
  if (config_.per_channel) {
    return {1.0 + F::softplus(h.slice(2, 0, 3)), h.slice(2, 3, 6)};
  }
  auto w = (1.0 + F::softplus(h.slice(2, 0, 1))).expand({-1, -1, 3});
  auto b = h.slice(2, 1, 2).expand({-1, -1, 3});
  return {w, b};
}

ExposureParams estimate_exposure(AeemModel& model, const Frame& frame) {
  torch::NoGradGuard no_grad;
  const auto dtype = model->token_proj->weight.scalar_type();
  auto out = model->forward(frame.tensor().unsqueeze(0).to(dtype));
  auto w = out.w[0].to(torch::kFloat64).contiguous();
  auto b = out.b[0].to(torch::kFloat64).contiguous();
  auto wa = w.accessor<double, 2>();
  auto ba = b.accessor<double, 2>();
  std::vector<PatchExposure> patches(static_cast<std::size_t>(w.size(0)));
  for (int64_t n = 0; n < w.size(0); ++n) {
    for (int c = 0; c < 3; ++c) {
      patches[n].w[c] = wa[n][c];
      patches[n].b[c] = ba[n][c];
    }
  }
  return ExposureParams(model->config().grid, std::move(patches));
}

namespace {

/// (B, N, 3) -> (B, 3, H, W) piecewise-constant map over the patch grid.
torch::Tensor expand_to_pixels(const torch::Tensor& coeff, int grid, int64_t h, int64_t w) {
  const auto batch = coeff.size(0);
  auto g = coeff.reshape({batch, grid, grid, 3}).permute({0, 3, 1, 2});
  return g.repeat_interleave(h / grid, 2).repeat_interleave(w / grid, 3);
}

}  // namespace

torch::Tensor relight(const torch::Tensor& frames, const torch::Tensor& w, const torch::Tensor& b, int grid,
                      bool clamp) {
  const auto h = frames.size(2);
  const auto wd = frames.size(3);
  if (h % grid != 0 || wd % grid != 0) {
    throw ShapeError("relight: grid does not divide the frame");
  }
  if (w.size(1) != grid * grid || b.size(1) != grid * grid) {
    throw ShapeError("relight: exposure grid does not match");
  }
  auto out = expand_to_pixels(w, grid, h, wd) * frames + expand_to_pixels(b, grid, h, wd);
  return clamp ? out.clamp(0.0, 1.0) : out;
}

namespace {

std::pair<torch::Tensor, torch::Tensor> params_to_tensors(const ExposureParams& params) {
  const auto n = static_cast<int64_t>(params.size());
  auto w = torch::empty({1, n, 3}, torch::kFloat64);
  auto b = torch::empty({1, n, 3}, torch::kFloat64);
  for (int64_t i = 0; i < n; ++i) {
    for (int c = 0; c < 3; ++c) {
      w[0][i][c] = params.patches()[i].w[c];
      b[0][i][c] = params.patches()[i].b[c];
    }
  }
  return {w, b};
}

}  // namespace

torch::Tensor relight_unclamped(const Frame& frame, const ExposureParams& params) {
  auto [w, b] = params_to_tensors(params);
  return relight(frame.tensor().to(torch::kFloat64).unsqueeze(0), w, b, params.grid(), false)[0];
}

Frame relight(const Frame& frame, const ExposureParams& params) {
  return Frame(relight_unclamped(frame, params).clamp(0.0, 1.0));
}

torch::Tensor patch_index_map(int64_t height, int64_t width, int grid) {
  auto idx = torch::arange(grid * grid, torch::kFloat32).reshape({1, grid * grid, 1}).expand({1, -1, 3});
  return expand_to_pixels(idx, grid, height, width).slice(1, 0, 1);
}

}  // namespace pstnet
