#include "pstnet/s2r.hpp"

#include <cmath>
#include <limits>

#include "pstnet/error.hpp"
#include "pstnet/tensor_ops.hpp"

namespace pstnet {

void FdaConfig::validate() const {
  if (!(delta >= 0.0 && delta <= 0.5)) throw ConfigError("fda delta must lie in [0, 0.5]");
}

namespace {

torch::Tensor axis_window(int64_t n, double delta) {
  const auto half = static_cast<int64_t>(std::floor(delta * static_cast<double>(n)));
  auto idx = torch::arange(n, torch::kInt64);
  auto freq = torch::where(idx <= n / 2, idx, idx - n).abs();
  if (2 * half >= n) return torch::ones({n}, torch::kBool);
  return freq < half;
}

/// Reraises the active library error with the frame index prefixed, keeping its type.
[[noreturn]] void rethrow_for_frame(std::size_t t) {
  const std::string where = "frame " + std::to_string(t) + ": ";
  try {
    throw;
  } catch (const IoError& e) {
    throw IoError(where + e.what());
  } catch (const FormatError& e) {
    throw FormatError(where + e.what());
  } catch (const ShapeError& e) {
    throw ShapeError(where + e.what());
  } catch (const NumericError& e) {
    throw NumericError(where + e.what());
  } catch (const MissingDataError& e) {
    throw MissingDataError(where + e.what());
  } catch (const ConfigError& e) {
    throw ConfigError(where + e.what());
  } catch (const Error& e) {
    throw ValidationError(where + e.what());
  }
}

}  // namespace

torch::Tensor fda_window(int64_t height, int64_t width, double delta) {
  FdaConfig{delta}.validate();
  return axis_window(height, delta).unsqueeze(1) & axis_window(width, delta).unsqueeze(0);
}

torch::Tensor fda_unclamped(const Frame& source, const Frame& target, double delta) {
  if (source.height() != target.height() || source.width() != target.width()) {
    throw ShapeError("fda: source and target differ in size; resize the target first");
  }
  const auto window = fda_window(source.height(), source.width(), delta);
  auto src = torch::fft::fft2(source.tensor().to(torch::kFloat64));
  auto tgt = torch::fft::fft2(target.tensor().to(torch::kFloat64));
  auto amp = torch::where(window, tgt.abs(), src.abs());
  auto spec = torch::polar(amp, torch::angle(src));
  return torch::real(torch::fft::ifft2(spec)).contiguous();
}

Frame fda(const Frame& source, const Frame& target, double delta) {
  return Frame::clamped(fda_unclamped(source, target, delta).to(torch::kFloat32));
}

ColorHistogram color_histogram(const Frame& frame) {
  constexpr int k = ColorHistogram::kBins;
  auto bins = (frame.tensor().to(torch::kFloat64) * k).floor().clamp(0, k - 1).to(torch::kInt64);
  auto flat = (bins[0] * (k * k) + bins[1] * k + bins[2]).flatten();
  auto counts = torch::bincount(flat, {}, k * k * k).to(torch::kFloat64).contiguous();
  const double n = static_cast<double>(flat.numel());
  ColorHistogram h;
  const double* p = counts.data_ptr<double>();
  for (std::size_t i = 0; i < h.counts.size(); ++i) h.counts[i] = p[i] / n;
  return h;
}

double histogram_distance(const ColorHistogram& a, const ColorHistogram& b) {
  double d = 0.0;
  for (std::size_t i = 0; i < a.counts.size(); ++i) d += std::abs(a.counts[i] - b.counts[i]);
  return d;
}

std::size_t select_reference(const Frame& query, const std::vector<Frame>& refs) {
  if (refs.empty()) throw ValidationError("reference pool is empty");
  const auto hq = color_histogram(query);
  std::size_t best = 0;
  double best_score = std::numeric_limits<double>::infinity();
  for (std::size_t i = 0; i < refs.size(); ++i) {
    const double s = histogram_distance(hq, color_histogram(refs[i]));
    if (s < best_score) {
      best_score = s;
      best = i;
    }
  }
  return best;
}

std::vector<Frame> s2r_pipeline(PstNet& model, const std::vector<Frame>& video, const std::vector<Frame>& refs,
                                double delta, const FlowProvider& provider) {
  FdaConfig{delta}.validate();
  if (video.empty()) return {};
  const Frame& ref = refs[select_reference(video.front(), refs)];
  const int64_t h = video.front().height();
  const int64_t w = video.front().width();
  const Frame ref_sized = Frame::clamped(ops::resize_bilinear(ref.tensor().unsqueeze(0), h, w)[0]);

  std::vector<Frame> adapted;
  adapted.reserve(video.size());
  for (std::size_t t = 0; t < video.size(); ++t) {
    try {
      adapted.push_back(fda(video[t], ref_sized, delta));
    } catch (const Error&) {
      rethrow_for_frame(t);
    }
  }
  const auto removed = remove_shadows(model, adapted, provider);
  std::vector<Frame> out;
  out.reserve(video.size());
  for (std::size_t t = 0; t < video.size(); ++t) {
    try {
      out.push_back(fda(removed[t], video[t], delta));
    } catch (const Error&) {
      rethrow_for_frame(t);
    }
  }
  return out;
}

}  // namespace pstnet
