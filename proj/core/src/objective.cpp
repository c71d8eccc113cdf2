#include "pstnet/objective.hpp"

#include <cmath>
#include <json.hpp>

#include "pstnet/error.hpp"
#include "pstnet/tensor_ops.hpp"

namespace pstnet {

void LossWeights::validate() const {
  if (!(alpha >= 0.0 && beta >= 0.0 && gamma >= 0.0)) {
    throw ConfigError("loss weights must be non-negative");
  }
}

namespace {

// sqrt(d^2 + eps^2) - eps without cancellation; exactly zero at d == 0 so equal inputs give eps exactly.
torch::Tensor charbonnier_excess(const torch::Tensor& d) {
  const auto d2 = d * d;
  return d2 / (torch::sqrt(d2 + kCharbonnierEps * kCharbonnierEps) + kCharbonnierEps);
}

}  // namespace

torch::Tensor charbonnier(const torch::Tensor& a, const torch::Tensor& b) {
  if (a.sizes() != b.sizes()) throw ShapeError("charbonnier: shape mismatch");
  return charbonnier_excess(a - b).mean() + kCharbonnierEps;
}

torch::Tensor loss_reg(const torch::Tensor& w, const torch::Tensor& b, const torch::Tensor& w_gt,
                       const torch::Tensor& b_gt) {
  if (w.sizes() != w_gt.sizes() || b.sizes() != b_gt.sizes()) {
    throw ShapeError("loss_reg: exposure grids differ");
  }
  auto per = [](const torch::Tensor& x, const torch::Tensor& y) {
    return charbonnier_excess(x - y).mean(2) + kCharbonnierEps;  // (B, N)
  };
  return (per(w, w_gt) + per(b, b_gt)).sum(1).mean();
}

double loss_reg(const ExposureParams& pred, const ExposureParams& gt) {
  if (pred.grid() != gt.grid()) throw ShapeError("loss_reg: exposure grids differ");
  auto char3 = [](const std::array<double, 3>& x, const std::array<double, 3>& y) {
    double s = 0.0;
    for (int c = 0; c < 3; ++c) s += std::sqrt((x[c] - y[c]) * (x[c] - y[c]) + kCharbonnierEps * kCharbonnierEps);
    return s / 3.0;
  };
  double total = 0.0;
  for (std::size_t n = 0; n < pred.size(); ++n) {
    total += char3(pred.patches()[n].w, gt.patches()[n].w) + char3(pred.patches()[n].b, gt.patches()[n].b);
  }
  return total;
}

torch::Tensor loss_seg(const torch::Tensor& m_pred, const torch::Tensor& m_gt) {
  if (m_pred.sizes() != m_gt.sizes()) throw ShapeError("loss_seg: shape mismatch");
  auto p = m_pred.clamp(kBceClip, 1.0 - kBceClip);
  return -(m_gt * torch::log(p) + (1.0 - m_gt) * torch::log(1.0 - p)).mean();
}

torch::Tensor loss_res(const torch::Tensor& r_middle, const torch::Tensor& r_final, const torch::Tensor& gt_small,
                       const torch::Tensor& gt) {
  auto res = charbonnier(r_final, gt);
  if (r_middle.defined()) res = res + charbonnier(r_middle, gt_small);
  return res;
}

torch::Tensor total_loss(const torch::Tensor& reg, const torch::Tensor& seg, const torch::Tensor& res,
                         const LossWeights& weights) {
  torch::Tensor total;
  auto add = [&](const torch::Tensor& t, double wgt) {
    if (!t.defined()) return;
    auto term = wgt * t;
    total = total.defined() ? total + term : term;
  };
  add(reg, weights.alpha);
  add(seg, weights.beta);
  add(res, weights.gamma);
  return total.defined() ? total : torch::zeros({});
}

torch::Tensor downsample_mask(const torch::Tensor& mask, int64_t factor) {
  return (ops::area_downsample(mask, factor) >= 0.5).to(mask.scalar_type());
}

torch::Tensor rgb_to_lab(const torch::Tensor& rgb) {
  const bool batched = rgb.dim() == 4;
  auto x = (batched ? rgb : rgb.unsqueeze(0)).to(torch::kFloat64);
  auto lin = torch::where(x <= 0.04045, x / 12.92, torch::pow((x + 0.055) / 1.055, 2.4));
  auto r = lin.select(1, 0);
  auto g = lin.select(1, 1);
  auto b = lin.select(1, 2);
  auto X = (0.4124564 * r + 0.3575761 * g + 0.1804375 * b) / 0.95047;
  auto Y = (0.2126729 * r + 0.7151522 * g + 0.0721750 * b) / 1.0;
  auto Z = (0.0193339 * r + 0.1191920 * g + 0.9503041 * b) / 1.08883;
  constexpr double delta = 6.0 / 29.0;
  auto f = [&](const torch::Tensor& t) {
    return torch::where(t > delta * delta * delta, torch::pow(t, 1.0 / 3.0), t / (3.0 * delta * delta) + 4.0 / 29.0);
  };
  auto fx = f(X);
  auto fy = f(Y);
  auto fz = f(Z);
  auto lab = torch::stack({116.0 * fy - 16.0, 500.0 * (fx - fy), 200.0 * (fy - fz)}, 1);
  return batched ? lab : lab[0];
}

std::optional<double> RegionError::rmse() const {
  if (pixels == 0) return std::nullopt;
  return std::sqrt(sq_sum / (3.0 * static_cast<double>(pixels)));
}

std::optional<double> RegionError::mae() const {
  if (pixels == 0) return std::nullopt;
  return abs_sum / (3.0 * static_cast<double>(pixels));
}

RegionError& RegionError::operator+=(const RegionError& o) {
  sq_sum += o.sq_sum;
  abs_sum += o.abs_sum;
  pixels += o.pixels;
  return *this;
}

RegionTriple& RegionTriple::operator+=(const RegionTriple& o) {
  shadow += o.shadow;
  non_shadow += o.non_shadow;
  all += o.all;
  return *this;
}

RegionTriple lab_errors(const Frame& pred, const Frame& gt, const Mask& mask) {
  if (pred.height() != gt.height() || pred.width() != gt.width() || mask.height() != gt.height() ||
      mask.width() != gt.width()) {
    throw ShapeError("rmse_lab: inputs are not aligned");
  }
  return lab_errors_from_lab(rgb_to_lab(pred.tensor()), rgb_to_lab(gt.tensor()), mask);
}

RegionTriple lab_errors_from_lab(const torch::Tensor& lab_pred, const torch::Tensor& lab_gt, const Mask& mask) {
  if (lab_pred.sizes() != lab_gt.sizes() || lab_pred.dim() != 3 || lab_pred.size(0) != 3 ||
      lab_pred.size(1) != mask.height() || lab_pred.size(2) != mask.width()) {
    throw ShapeError("rmse_lab: inputs are not aligned");
  }
  auto d = (lab_pred.to(torch::kFloat64) - lab_gt.to(torch::kFloat64));
  auto sq = (d * d).sum(0).contiguous();
  auto ab = d.abs().sum(0).contiguous();
  auto in_shadow = (mask.tensor()[0] > 0.5).contiguous();
  RegionTriple e;
  const double* psq = sq.data_ptr<double>();
  const double* pab = ab.data_ptr<double>();
  const bool* pm = in_shadow.data_ptr<bool>();
  for (int64_t i = 0; i < sq.numel(); ++i) {
    RegionError& r = pm[i] ? e.shadow : e.non_shadow;
    r.sq_sum += psq[i];
    r.abs_sum += pab[i];
    r.pixels += 1;
  }
  e.all = e.shadow;
  e.all += e.non_shadow;
  return e;
}

MetricValues MetricValues::from(const RegionTriple& e) {
  return {e.shadow.rmse(), e.non_shadow.rmse(), e.all.rmse(), e.shadow.mae(), e.non_shadow.mae(), e.all.mae()};
}

namespace {

nlohmann::json values_to_json(const MetricValues& v) {
  nlohmann::json j = nlohmann::json::object();
  nlohmann::json empty = nlohmann::json::array();
  auto put = [&](const char* key, const std::optional<double>& x) {
    if (x) j[key] = *x;
  };
  put("shadow", v.shadow);
  put("non_shadow", v.non_shadow);
  put("all", v.all);
  put("mae_shadow", v.mae_shadow);
  put("mae_non_shadow", v.mae_non_shadow);
  put("mae_all", v.mae_all);
  if (!v.shadow) empty.push_back("shadow");
  if (!v.non_shadow) empty.push_back("non_shadow");
  if (!empty.empty()) j["empty_regions"] = empty;
  return j;
}

MetricValues average(const std::vector<MetricValues>& values) {
  auto mean_of = [&](auto member) -> std::optional<double> {
    double s = 0.0;
    int n = 0;
    for (const auto& v : values) {
      if (v.*member) {
        s += *(v.*member);
        ++n;
      }
    }
    if (n == 0) return std::nullopt;
    return s / n;
  };
  return {mean_of(&MetricValues::shadow),     mean_of(&MetricValues::non_shadow),
          mean_of(&MetricValues::all),        mean_of(&MetricValues::mae_shadow),
          mean_of(&MetricValues::mae_non_shadow), mean_of(&MetricValues::mae_all)};
}

}  // namespace

std::string MetricReport::to_json() const {
  auto doc = values_to_json(aggregate);
  nlohmann::json videos = nlohmann::json::object();
  for (const auto& [id, v] : per_video) videos[id] = values_to_json(v);
  doc["per_video"] = videos;
  return doc.dump(2);
}

void MetricAccumulator::add(const std::string& video_id, const Frame& pred, const Frame& gt, const Mask& mask) {
  auto e = lab_errors(pred, gt, mask);
  pooled_ += e;
  videos_[video_id] += e;
  if (per_frame_) frames_.push_back(e);
}

MetricReport MetricAccumulator::report() const {
  MetricReport r;
  if (per_frame_) {
    std::vector<MetricValues> vals;
    for (const auto& f : frames_) vals.push_back(MetricValues::from(f));
    r.aggregate = average(vals);
  } else {
    r.aggregate = MetricValues::from(pooled_);
  }
  for (const auto& [id, e] : videos_) r.per_video[id] = MetricValues::from(e);
  return r;
}

MetricValues rmse_lab(const Frame& pred, const Frame& gt, const Mask& mask) {
  return MetricValues::from(lab_errors(pred, gt, mask));
}

}  // namespace pstnet
