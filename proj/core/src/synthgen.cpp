#include "pstnet/synthgen.hpp"

#include <algorithm>
#include <cmath>
#include <json.hpp>
#include <numbers>

#include "pstnet/dataset.hpp"
#include "pstnet/error.hpp"
#include "pstnet/image_io.hpp"
#include "pstnet/rng.hpp"
#include "pstnet/tensor_ops.hpp"

namespace pstnet::synth {
namespace {

using json = nlohmann::json;

constexpr double kMinBackground = 0.35;
constexpr double kMaxBackground = 0.9;

using pstnet::Rng;

/// Row-major single-channel image.
struct Plane {
  int h = 0;
  int w = 0;
  std::vector<float> v;

  Plane(int height, int width, float fill = 0.0f) : h(height), w(width), v(static_cast<std::size_t>(height) * width, fill) {}
  float& at(int y, int x) { return v[static_cast<std::size_t>(y) * w + x]; }
  float at(int y, int x) const { return v[static_cast<std::size_t>(y) * w + x]; }
};

using Rgb = std::array<Plane, 3>;

Rgb make_rgb(int h, int w) { return {Plane(h, w), Plane(h, w), Plane(h, w)}; }

double smoothstep(double t) { return t * t * (3.0 - 2.0 * t); }

/// Lattice value noise with smoothstep interpolation.
Plane value_noise(int h, int w, int cell, Rng& rng) {
  const int gh = h / cell + 2;
  const int gw = w / cell + 2;
  std::vector<double> lattice(static_cast<std::size_t>(gh) * gw);
  for (auto& x : lattice) x = rng.uniform(-1.0, 1.0);
  Plane out(h, w);
  for (int y = 0; y < h; ++y) {
    for (int x = 0; x < w; ++x) {
      const double fy = static_cast<double>(y) / cell;
      const double fx = static_cast<double>(x) / cell;
      const int iy = static_cast<int>(fy);
      const int ix = static_cast<int>(fx);
      const double ty = smoothstep(fy - iy);
      const double tx = smoothstep(fx - ix);
      auto l = [&](int yy, int xx) { return lattice[static_cast<std::size_t>(yy) * gw + xx]; };
      const double top = l(iy, ix) * (1 - tx) + l(iy, ix + 1) * tx;
      const double bot = l(iy + 1, ix) * (1 - tx) + l(iy + 1, ix + 1) * tx;
      out.at(y, x) = static_cast<float>(top * (1 - ty) + bot * ty);
    }
  }
  return out;
}

Rgb render_background(const SceneSpec& spec, Rng& rng) {
  const int h = spec.height;
  const int w = spec.width;
  Rgb bg = make_rgb(h, w);
  const double base = rng.uniform(0.5, 0.72);
  std::array<double, 3> tint{};
  for (auto& t : tint) t = rng.uniform(-0.05, 0.05);

  switch (spec.background_style) {
    case BackgroundStyle::gradient: {
      const double angle = rng.uniform(0.0, 2.0 * std::numbers::pi);
      const double span = rng.uniform(0.06, 0.14);
      const double ripple_freq = rng.uniform(0.05, 0.15);
      const double diag = std::hypot(h, w);
      for (int y = 0; y < h; ++y) {
        for (int x = 0; x < w; ++x) {
          const double t = ((x - w / 2.0) * std::cos(angle) + (y - h / 2.0) * std::sin(angle)) / diag;
          const double ripple = 0.02 * std::sin(ripple_freq * (x + 0.7 * y));
          for (int c = 0; c < 3; ++c) bg[c].at(y, x) = static_cast<float>(base + tint[c] + span * 2.0 * t + ripple);
        }
      }
      break;
    }
    case BackgroundStyle::perlin_like: {
      const Plane coarse = value_noise(h, w, 16, rng);
      const Plane fine = value_noise(h, w, 6, rng);
      for (int y = 0; y < h; ++y) {
        for (int x = 0; x < w; ++x) {
          const double n = 0.08 * coarse.at(y, x) + 0.03 * fine.at(y, x);
          for (int c = 0; c < 3; ++c) bg[c].at(y, x) = static_cast<float>(base + tint[c] + n);
        }
      }
      break;
    }
    case BackgroundStyle::tiled: {
      const int tile = rng.uniform_int(10, 16);
      const double contrast = rng.uniform(0.04, 0.1);
      for (int y = 0; y < h; ++y) {
        for (int x = 0; x < w; ++x) {
          const bool grout = (x % tile == 0) || (y % tile == 0);
          const bool odd = ((x / tile) + (y / tile)) % 2 == 1;
          double v = base + (odd ? contrast : -contrast);
          if (grout) v -= 0.06;
          for (int c = 0; c < 3; ++c) bg[c].at(y, x) = static_cast<float>(v + tint[c]);
        }
      }
      break;
    }
  }
  for (auto& p : bg) {
    for (auto& v : p.v) v = std::clamp(v, static_cast<float>(kMinBackground), static_cast<float>(kMaxBackground));
  }
  return bg;
}

bool inside_ellipse(double cx, double cy, double rx, double ry, int y, int x) {
  const double dx = (x + 0.5 - cx) / rx;
  const double dy = (y + 0.5 - cy) / ry;
  return dx * dx + dy * dy <= 1.0;
}

/// Per-occluder texture parameters drawn once per clip so the pattern moves with the object.
struct OccluderTexture {
  double fx = 0.1;
  double fy = 0.05;
  double amplitude = 0.15;
};

void gaussian_blur(Plane& p, double sigma) {
  if (sigma <= 0.0) return;
  const int radius = static_cast<int>(std::ceil(3.0 * sigma));
  std::vector<double> k(2 * radius + 1);
  double sum = 0.0;
  for (int i = -radius; i <= radius; ++i) sum += k[i + radius] = std::exp(-0.5 * i * i / (sigma * sigma));
  for (auto& x : k) x /= sum;
  Plane tmp(p.h, p.w);
  for (int y = 0; y < p.h; ++y) {
    for (int x = 0; x < p.w; ++x) {
      double acc = 0.0;
      for (int i = -radius; i <= radius; ++i) acc += k[i + radius] * p.at(y, std::clamp(x + i, 0, p.w - 1));
      tmp.at(y, x) = static_cast<float>(acc);
    }
  }
  for (int y = 0; y < p.h; ++y) {
    for (int x = 0; x < p.w; ++x) {
      double acc = 0.0;
      for (int i = -radius; i <= radius; ++i) acc += k[i + radius] * tmp.at(std::clamp(y + i, 0, p.h - 1), x);
      p.at(y, x) = static_cast<float>(acc);
    }
  }
}

/// Median of a binary 3x3 window: true when at least 5 of the 9 samples are set.
std::vector<std::uint8_t> median_pass(const std::vector<std::uint8_t>& in, int h, int w) {
  std::vector<std::uint8_t> out(in.size());
  for (int y = 0; y < h; ++y) {
    for (int x = 0; x < w; ++x) {
      int count = 0;
      for (int dy = -1; dy <= 1; ++dy) {
        const int yy = std::clamp(y + dy, 0, h - 1);
        for (int dx = -1; dx <= 1; ++dx) {
          const int xx = std::clamp(x + dx, 0, w - 1);
          count += in[static_cast<std::size_t>(yy) * w + xx];
        }
      }
      out[static_cast<std::size_t>(y) * w + x] = count >= 5 ? 1 : 0;
    }
  }
  return out;
}

Frame to_frame(const Rgb& rgb) {
  const int h = rgb[0].h;
  const int w = rgb[0].w;
  auto t = torch::empty({3, h, w}, torch::kFloat32);
  for (int c = 0; c < 3; ++c) std::copy(rgb[c].v.begin(), rgb[c].v.end(), t[c].data_ptr<float>());
  return Frame(t);
}

/// Everything rendered for one frame index.
struct RenderedFrame {
  Rgb free;
  Rgb shadow;
  std::vector<std::uint8_t> mask;
  Plane flow_u;
  Plane flow_v;
};

RenderedFrame render_frame(const SceneSpec& spec, const Rgb& background,
                           const std::vector<OccluderTexture>& textures, int t) {
  const int h = spec.height;
  const int w = spec.width;
  const int n_occ = static_cast<int>(spec.occluders.size());
  RenderedFrame out{background, make_rgb(h, w), {}, Plane(h, w), Plane(h, w)};

  // Occluder layer: highest index on top.
  std::vector<int> occ_label(static_cast<std::size_t>(h) * w, -1);
  std::vector<int> shadow_label(static_cast<std::size_t>(h) * w, -1);
  for (int k = 0; k < n_occ; ++k) {
    const auto& o = spec.occluders[k];
    const double cx = o.center_x + o.velocity_x * t;
    const double cy = o.center_y + o.velocity_y * t;
    const double sx = cx + spec.shadow_offset_x;
    const double sy = cy + spec.shadow_offset_y;
    for (int y = 0; y < h; ++y) {
      for (int x = 0; x < w; ++x) {
        const auto idx = static_cast<std::size_t>(y) * w + x;
        if (inside_ellipse(cx, cy, o.radius_x, o.radius_y, y, x)) occ_label[idx] = k;
        if (inside_ellipse(sx, sy, o.radius_x, o.radius_y, y, x)) shadow_label[idx] = k;
      }
    }
  }

  // Draw occluders into the shadow-free render; texture is anchored to the moving center.
  for (int y = 0; y < h; ++y) {
    for (int x = 0; x < w; ++x) {
      const int k = occ_label[static_cast<std::size_t>(y) * w + x];
      if (k < 0) continue;
      const auto& o = spec.occluders[k];
      const double cx = o.center_x + o.velocity_x * t;
      const double cy = o.center_y + o.velocity_y * t;
      const double phase = 2.0 * std::numbers::pi * ((x + 0.5 - cx) * textures[k].fx + (y + 0.5 - cy) * textures[k].fy);
      const double mod = 1.0 + textures[k].amplitude * std::sin(phase);
      for (int c = 0; c < 3; ++c) {
        out.free[c].at(y, x) = static_cast<float>(std::clamp(o.color[c] * mod, kMinBackground, kMaxBackground));
      }
    }
  }

  // Hard visible shadow: cast silhouette minus occluder pixels, reduced to a
  // 3x3-median root so the pseudo-mask pipeline reproduces it exactly.
  std::vector<std::uint8_t> hard(static_cast<std::size_t>(h) * w, 0);
  for (std::size_t i = 0; i < hard.size(); ++i) {
    if (shadow_label[i] >= 0 && occ_label[i] < 0) hard[i] = 1;
    else shadow_label[i] = -1;
  }
  for (int iter = 0; iter < 64; ++iter) {
    auto next = median_pass(hard, h, w);
    if (next == hard) break;
    // Newly added pixels inherit the largest neighbouring shadow label.
    std::vector<int> next_label(shadow_label);
    for (int y = 0; y < h; ++y) {
      for (int x = 0; x < w; ++x) {
        const auto idx = static_cast<std::size_t>(y) * w + x;
        if (!next[idx]) {
          next_label[idx] = -1;
        } else if (!hard[idx]) {
          int best = -1;
          for (int dy = -1; dy <= 1; ++dy) {
            for (int dx = -1; dx <= 1; ++dx) {
              const int yy = std::clamp(y + dy, 0, h - 1);
              const int xx = std::clamp(x + dx, 0, w - 1);
              if (hard[static_cast<std::size_t>(yy) * w + xx]) best = std::max(best, shadow_label[static_cast<std::size_t>(yy) * w + xx]);
            }
          }
          next_label[idx] = best;
        }
      }
    }
    hard = std::move(next);
    shadow_label = std::move(next_label);
  }

  // Per-occluder soft shadow coverage.
  std::vector<Plane> coverage(n_occ, Plane(h, w));
  for (std::size_t i = 0; i < hard.size(); ++i) {
    if (hard[i]) coverage[shadow_label[i]].v[i] = 1.0f;
  }
  if (spec.penumbra_sigma > 0.0) {
    for (auto& cov : coverage) {
      gaussian_blur(cov, spec.penumbra_sigma);
      for (std::size_t i = 0; i < cov.v.size(); ++i) {
        if (occ_label[i] >= 0) cov.v[i] = 0.0f;
      }
    }
  }

  // shadow = (1 - S) * free + sum_k S_k * (free - b_k) / w_k
  out.mask.assign(static_cast<std::size_t>(h) * w, 0);
  for (int c = 0; c < 3; ++c) {
    for (std::size_t i = 0; i < out.free[c].v.size(); ++i) {
      const float f = out.free[c].v[i];
      float s_total = 0.0f;
      float darkened = 0.0f;
      for (int k = 0; k < n_occ; ++k) {
        const float s = coverage[k].v[i];
        if (s == 0.0f) continue;
        const auto& o = spec.occluders[k];
        s_total += s;
        darkened += s * static_cast<float>((f - o.b[c]) / o.w[c]);
      }
      out.shadow[c].v[i] = s_total == 0.0f ? f : (1.0f - s_total) * f + darkened;
      if (c == 0) out.mask[i] = s_total > 0.5f ? 1 : 0;
    }
  }

  // Analytic flow: occluders move with their velocity, as do the shadows they cast.
  for (int y = 0; y < h; ++y) {
    for (int x = 0; x < w; ++x) {
      const auto idx = static_cast<std::size_t>(y) * w + x;
      int k = occ_label[idx];
      if (k < 0 && out.mask[idx]) {
        float best = 0.0f;
        for (int j = 0; j < n_occ; ++j) {
          if (coverage[j].v[idx] > best) {
            best = coverage[j].v[idx];
            k = j;
          }
        }
      }
      if (k >= 0) {
        out.flow_u.at(y, x) = static_cast<float>(spec.occluders[k].velocity_x);
        out.flow_v.at(y, x) = static_cast<float>(spec.occluders[k].velocity_y);
      }
    }
  }
  return out;
}

void check_range(const std::array<double, 3>& v, double lo, double hi, const char* what) {
  for (double x : v) {
    if (!(x >= lo && x <= hi)) {
      throw ValidationError(std::string("scene spec: ") + what + " outside [" + std::to_string(lo) +
                            ", " + std::to_string(hi) + "]");
    }
  }
}

json occluder_to_json(const OccluderSpec& o) {
  return {{"center", {o.center_x, o.center_y}},  {"radius", {o.radius_x, o.radius_y}},
          {"velocity", {o.velocity_x, o.velocity_y}}, {"color", o.color},
          {"w", o.w},                                 {"b", o.b}};
}

}  // namespace

std::string to_string(BackgroundStyle style) {
  switch (style) {
    case BackgroundStyle::gradient: return "gradient";
    case BackgroundStyle::perlin_like: return "perlin_like";
    case BackgroundStyle::tiled: return "tiled";
  }
  return "gradient";
}

BackgroundStyle background_style_from_string(const std::string& name) {
  if (name == "gradient") return BackgroundStyle::gradient;
  if (name == "perlin_like") return BackgroundStyle::perlin_like;
  if (name == "tiled") return BackgroundStyle::tiled;
  throw ValidationError("unknown background style: " + name);
}

void validate_spec(const SceneSpec& spec) {
  if (spec.frames < 2) throw ValidationError("scene spec: frames must be >= 2");
  if (spec.height < 8 || spec.width < 8 || spec.height % 2 || spec.width % 2) {
    throw ValidationError("scene spec: height and width must be even and >= 8");
  }
  if (spec.occluders.empty() || spec.occluders.size() > 4) {
    throw ValidationError("scene spec: n_occluders must be in [1, 4]");
  }
  if (!(spec.penumbra_sigma >= 0.0)) throw ValidationError("scene spec: penumbra_sigma must be >= 0");
  for (std::size_t k = 0; k < spec.occluders.size(); ++k) {
    const auto& o = spec.occluders[k];
    check_range(o.w, 1.2, 3.0, "region w");
    check_range(o.b, -0.05, 0.05, "region b");
    check_range(o.color, 0.0, 1.0, "occluder color");
    if (!(o.radius_x > 0.0 && o.radius_y > 0.0)) throw ValidationError("scene spec: radii must be positive");
    for (int t : {0, spec.frames - 1}) {
      const double cx = o.center_x + o.velocity_x * t;
      const double cy = o.center_y + o.velocity_y * t;
      if (cx - o.radius_x < 1.0 || cx + o.radius_x > spec.width - 1.0 || cy - o.radius_y < 1.0 ||
          cy + o.radius_y > spec.height - 1.0) {
        throw ValidationError("scene spec: occluder " + std::to_string(k) + " escapes the frame at t=" +
                              std::to_string(t));
      }
    }
  }
}

SceneSpec random_scene_spec(std::uint64_t seed, int frames, int height, int width) {
  Rng rng(seed);
  SceneSpec spec;
  spec.seed = seed;
  spec.frames = frames;
  spec.height = height;
  spec.width = width;
  spec.background_style = static_cast<BackgroundStyle>(rng.uniform_int(0, 2));
  spec.penumbra_sigma = rng.uniform() < 0.5 ? 0.0 : rng.uniform(0.5, 1.5);
  const double side = std::min(height, width);
  const double angle = rng.uniform(0.0, 2.0 * std::numbers::pi);
  const double offset = rng.uniform(0.06, 0.12) * side;
  spec.shadow_offset_x = offset * std::cos(angle);
  spec.shadow_offset_y = offset * std::sin(angle);

  // One light source: shadows share a base darkening, occluders only jitter around it.
  const double w_base = rng.uniform(1.4, 2.8);
  const int n = rng.uniform_int(1, 3);
  for (int k = 0; k < n; ++k) {
    OccluderSpec o;
    o.radius_x = rng.uniform(0.08, 0.18) * side;
    o.radius_y = rng.uniform(0.08, 0.18) * side;
    o.velocity_x = rng.uniform_int(-2, 2);
    o.velocity_y = rng.uniform_int(-2, 2);
    const double travel_x = std::abs(o.velocity_x) * (frames - 1);
    const double travel_y = std::abs(o.velocity_y) * (frames - 1);
    // Stationary fallback when the path cannot fit inside the safety border.
    if (2.0 * o.radius_x + travel_x > width - 4.0) o.velocity_x = 0.0;
    if (2.0 * o.radius_y + travel_y > height - 4.0) o.velocity_y = 0.0;
    const double span_x = width - 4.0 - 2.0 * o.radius_x - std::abs(o.velocity_x) * (frames - 1);
    const double span_y = height - 4.0 - 2.0 * o.radius_y - std::abs(o.velocity_y) * (frames - 1);
    const double start_x = 2.0 + o.radius_x + rng.uniform(0.0, std::max(0.0, span_x));
    const double start_y = 2.0 + o.radius_y + rng.uniform(0.0, std::max(0.0, span_y));
    o.center_x = o.velocity_x >= 0 ? start_x : start_x + std::abs(o.velocity_x) * (frames - 1);
    o.center_y = o.velocity_y >= 0 ? start_y : start_y + std::abs(o.velocity_y) * (frames - 1);
    for (auto& c : o.color) c = rng.uniform(0.4, 0.8);
    for (int c = 0; c < 3; ++c) {
      o.w[c] = std::clamp(w_base + rng.uniform(-0.15, 0.15), 1.2, 3.0);
      o.b[c] = rng.uniform(-0.05, 0.05);
    }
    spec.occluders.push_back(o);
  }
  validate_spec(spec);
  return spec;
}

std::vector<ClipSample> generate_clip(const SceneSpec& spec, int grid) {
  validate_spec(spec);
  if (spec.height % grid || spec.width % grid) {
    throw ValidationError("scene spec: grid does not divide the frame");
  }
  Rng rng(spec.seed ^ 0xA5A5A5A5DEADBEEFULL);
  const Rgb background = render_background(spec, rng);
  std::vector<OccluderTexture> textures;
  for (std::size_t k = 0; k < spec.occluders.size(); ++k) {
    OccluderTexture tex;
    tex.fx = rng.uniform(-0.15, 0.15);
    tex.fy = rng.uniform(-0.15, 0.15);
    tex.amplitude = rng.uniform(0.1, 0.25);
    textures.push_back(tex);
  }

  std::vector<RenderedFrame> rendered;
  rendered.reserve(spec.frames);
  for (int t = 0; t < spec.frames; ++t) rendered.push_back(render_frame(spec, background, textures, t));

  std::vector<ClipSample> clip;
  clip.reserve(spec.frames);
  for (int t = 0; t < spec.frames; ++t) {
    const auto& r = rendered[t];
    const int next = t + 1 < spec.frames ? t + 1 : t - 1;
    Frame shadow = to_frame(r.shadow);
    Frame free = to_frame(r.free);
    auto mask_t = torch::empty({1, spec.height, spec.width}, torch::kFloat32);
    std::transform(r.mask.begin(), r.mask.end(), mask_t.data_ptr<float>(),
                   [](std::uint8_t m) { return static_cast<float>(m); });
    Mask mask(mask_t);
    auto flow_t = torch::empty({2, spec.height, spec.width}, torch::kFloat32);
    const Plane* u = &r.flow_u;
    const Plane* v = &r.flow_v;
    float sign = 1.0f;
    if (t + 1 == spec.frames) {
      // Last frame pairs with its predecessor: negated flow of t-1 -> t.
      u = &rendered[t - 1].flow_u;
      v = &rendered[t - 1].flow_v;
      sign = -1.0f;
    }
    std::transform(u->v.begin(), u->v.end(), flow_t[0].data_ptr<float>(), [&](float x) { return sign * x; });
    std::transform(v->v.begin(), v->v.end(), flow_t[1].data_ptr<float>(), [&](float x) { return sign * x; });
    auto exposure = fit_exposure_params(shadow, free, mask, grid);
    clip.push_back(ClipSample{shadow, to_frame(rendered[next].shadow), free, mask, FlowField(flow_t),
                              std::move(exposure)});
  }
  return clip;
}

torch::Tensor median3x3(const torch::Tensor& binary_hw) {
  auto m = binary_hw.to(torch::kFloat32).contiguous();
  const int h = static_cast<int>(m.size(0));
  const int w = static_cast<int>(m.size(1));
  std::vector<std::uint8_t> in(static_cast<std::size_t>(h) * w);
  const float* src = m.data_ptr<float>();
  for (std::size_t i = 0; i < in.size(); ++i) in[i] = src[i] > 0.5f ? 1 : 0;
  auto out_bits = median_pass(in, h, w);
  auto out = torch::empty({h, w}, torch::kFloat32);
  std::transform(out_bits.begin(), out_bits.end(), out.data_ptr<float>(),
                 [](std::uint8_t b) { return static_cast<float>(b); });
  return out;
}

PseudoMask compute_pseudo_mask(const Frame& shadow, const Frame& free) {
  if (shadow.height() != free.height() || shadow.width() != free.width()) {
    throw ShapeError("compute_pseudo_mask: frame shapes differ");
  }
  const auto h = shadow.height();
  const auto w = shadow.width();
  auto d = (ops::luma(free.tensor().to(torch::kFloat64)) - ops::luma(shadow.tensor().to(torch::kFloat64)))
               .clamp(0.0, 1.0)
               .contiguous();
  const double* dp = d.data_ptr<double>();
  const auto n = static_cast<std::size_t>(h * w);
  std::vector<int> bins(n);
  std::array<double, 256> hist{};
  for (std::size_t i = 0; i < n; ++i) {
    bins[i] = std::min(255, static_cast<int>(dp[i] * 256.0));
    hist[bins[i]] += 1.0;
  }
  const int occupied = static_cast<int>(std::count_if(hist.begin(), hist.end(), [](double c) { return c > 0.0; }));
  if (occupied < 2) {
    return PseudoMask{Mask(torch::zeros({1, h, w})), -1, true};
  }

  double total_mean = 0.0;
  for (int i = 0; i < 256; ++i) total_mean += i * hist[i];
  total_mean /= static_cast<double>(n);
  double w0 = 0.0;
  double sum0 = 0.0;
  double best_var = -1.0;
  int best_k = 0;
  for (int k = 0; k < 255; ++k) {
    w0 += hist[k];
    sum0 += k * hist[k];
    const double w1 = static_cast<double>(n) - w0;
    if (w0 == 0.0 || w1 == 0.0) continue;
    const double mu0 = sum0 / w0;
    const double mu1 = (total_mean * n - sum0) / w1;
    const double between = w0 * w1 * (mu0 - mu1) * (mu0 - mu1);
    if (between > best_var) {
      best_var = between;
      best_k = k;
    }
  }
  auto raw = torch::empty({h, w}, torch::kFloat32);
  float* rp = raw.data_ptr<float>();
  for (std::size_t i = 0; i < n; ++i) rp[i] = bins[i] > best_k ? 1.0f : 0.0f;
  return PseudoMask{Mask(median3x3(raw).unsqueeze(0)), best_k, false};
}

ExposureParams fit_exposure_params(const Frame& shadow, const Frame& free, const Mask& mask, int grid) {
  const auto h = shadow.height();
  const auto w = shadow.width();
  if (grid < 1 || h % grid || w % grid) {
    throw ShapeError("fit_exposure_params: grid " + std::to_string(grid) + " does not divide " +
                     std::to_string(h) + "x" + std::to_string(w));
  }
  if (free.height() != h || free.width() != w || mask.height() != h || mask.width() != w) {
    throw ShapeError("fit_exposure_params: inputs are not aligned");
  }
  auto s = shadow.tensor().to(torch::kFloat64).contiguous();
  auto f = free.tensor().to(torch::kFloat64).contiguous();
  auto m = mask.tensor().contiguous();
  auto sa = s.accessor<double, 3>();
  auto fa = f.accessor<double, 3>();
  auto ma = m.accessor<float, 3>();
  const int64_t ph = h / grid;
  const int64_t pw = w / grid;

  std::vector<PatchExposure> patches;
  for (int gy = 0; gy < grid; ++gy) {
    for (int gx = 0; gx < grid; ++gx) {
      PatchExposure patch;
      for (int c = 0; c < 3; ++c) {
        double n = 0, sx = 0, sy = 0, sxx = 0, sxy = 0;
        for (int64_t y = gy * ph; y < (gy + 1) * ph; ++y) {
          for (int64_t x = gx * pw; x < (gx + 1) * pw; ++x) {
            if (ma[0][y][x] <= 0.5f) continue;
            const double xs = sa[c][y][x];
            const double yf = fa[c][y][x];
            n += 1;
            sx += xs;
            sy += yf;
            sxx += xs * xs;
            sxy += xs * yf;
          }
        }
        if (n < kMinFitPixels) continue;
        // Centered normal equations; exact for affine data up to rounding.
        const double mx = sx / n;
        const double my = sy / n;
        const double var = sxx / n - mx * mx;
        const double cov = sxy / n - mx * my;
        if (var <= 1e-12) continue;
        const double wc = cov / var;
        if (!(wc > 0.0) || !std::isfinite(wc)) continue;
        patch.w[c] = wc;
        patch.b[c] = my - wc * mx;
      }
      patches.push_back(patch);
    }
  }
  return ExposureParams(grid, std::move(patches));
}

std::string spec_to_json(const SceneSpec& spec) {
  json occ = json::array();
  for (const auto& o : spec.occluders) occ.push_back(occluder_to_json(o));
  json doc = {{"seed", spec.seed},
              {"frames", spec.frames},
              {"height", spec.height},
              {"width", spec.width},
              {"background_style", to_string(spec.background_style)},
              {"penumbra_sigma", spec.penumbra_sigma},
              {"shadow_offset", {spec.shadow_offset_x, spec.shadow_offset_y}},
              {"occluders", occ}};
  return doc.dump();
}

SceneSpec spec_from_json(const std::string& text) {
  SceneSpec spec;
  try {
    const auto doc = json::parse(text);
    spec.seed = doc.at("seed").get<std::uint64_t>();
    spec.frames = doc.at("frames").get<int>();
    spec.height = doc.at("height").get<int>();
    spec.width = doc.at("width").get<int>();
    spec.background_style = background_style_from_string(doc.at("background_style").get<std::string>());
    spec.penumbra_sigma = doc.at("penumbra_sigma").get<double>();
    spec.shadow_offset_x = doc.at("shadow_offset").at(0).get<double>();
    spec.shadow_offset_y = doc.at("shadow_offset").at(1).get<double>();
    for (const auto& jo : doc.at("occluders")) {
      OccluderSpec o;
      o.center_x = jo.at("center").at(0).get<double>();
      o.center_y = jo.at("center").at(1).get<double>();
      o.radius_x = jo.at("radius").at(0).get<double>();
      o.radius_y = jo.at("radius").at(1).get<double>();
      o.velocity_x = jo.at("velocity").at(0).get<double>();
      o.velocity_y = jo.at("velocity").at(1).get<double>();
      o.color = jo.at("color").get<std::array<double, 3>>();
      o.w = jo.at("w").get<std::array<double, 3>>();
      o.b = jo.at("b").get<std::array<double, 3>>();
      spec.occluders.push_back(o);
    }
  } catch (const json::exception& e) {
    throw FormatError(std::string("scene spec JSON: ") + e.what());
  }
  return spec;
}

DatasetSummary generate_dataset(const DatasetOptions& options, const std::filesystem::path& root) {
  if (options.videos < 1) throw ValidationError("gen: need at least one video");
  if (!(options.train_ratio >= 0.0 && options.train_ratio <= 1.0)) {
    throw ValidationError("gen: split ratio must lie in [0, 1]");
  }
  if (options.height % 2 || options.width % 2) {
    throw ValidationError("gen: frame height and width must be even");
  }
  Rng rng(options.seed);
  std::vector<std::uint64_t> seeds;
  for (int i = 0; i < options.videos; ++i) seeds.push_back(rng.next());

  // Seeded Fisher-Yates shuffle over video indices.
  std::vector<int> order(options.videos);
  for (int i = 0; i < options.videos; ++i) order[i] = i;
  for (int i = options.videos - 1; i > 0; --i) std::swap(order[i], order[rng.uniform_int(0, i)]);
  const int n_train = static_cast<int>(std::lround(options.train_ratio * options.videos));

  std::vector<std::string> split(options.videos);
  for (int i = 0; i < options.videos; ++i) split[order[i]] = i < n_train ? "train" : "test";

  DatasetSummary summary;
  json videos = json::array();
  std::filesystem::create_directories(root);
  for (int i = 0; i < options.videos; ++i) {
    char id[16];
    std::snprintf(id, sizeof(id), "v%03d", i);
    const auto spec = random_scene_spec(seeds[i], options.frames, options.height, options.width);
    const auto clip = generate_clip(spec, options.grid);
    std::vector<Mask> pseudo;
    for (const auto& s : clip) pseudo.push_back(compute_pseudo_mask(s.shadow_t, s.free_t).mask);
    data::write_video(data::video_dir(root, split[i], id), clip, pseudo);
    (split[i] == "train" ? summary.train : summary.test).push_back(id);
    videos.push_back({{"id", id}, {"split", split[i]}, {"spec", json::parse(spec_to_json(spec))}});
  }
  json manifest = {{"seed", options.seed},
                   {"grid", options.grid},
                   {"frames", options.frames},
                   {"height", options.height},
                   {"width", options.width},
                   {"split_ratio", options.train_ratio},
                   {"train", summary.train},
                   {"test", summary.test},
                   {"videos", videos}};
  io::write_file_atomic(root / "manifest.json", manifest.dump(2) + "\n");
  return summary;
}

}  // namespace pstnet::synth
