#include <bit>
#include <cstring>

#include "pstnet/error.hpp"
#include "pstnet/image_io.hpp"
#include "pstnet/trainer.hpp"

namespace pstnet {

static_assert(std::endian::native == std::endian::little, "checkpoint format is little-endian");

namespace {

constexpr char kMagic[4] = {'P', 'S', 'T', 'N'};
constexpr std::uint32_t kFloat32 = 0;
constexpr std::uint32_t kFloat64 = 1;

class Writer {
 public:
  template <typename T>
  void put(T v) {
    static_assert(std::is_trivially_copyable_v<T>);
    buf_.append(reinterpret_cast<const char*>(&v), sizeof(T));
  }
  void put_string(const std::string& s) {
    put<std::uint64_t>(s.size());
    buf_.append(s);
  }
  void put_tensor(const torch::Tensor& t) {
    auto c = t.detach().contiguous().cpu();
    std::uint32_t code;
    if (c.scalar_type() == torch::kFloat32) {
      code = kFloat32;
    } else if (c.scalar_type() == torch::kFloat64) {
      code = kFloat64;
    } else {
      throw FormatError("checkpoint: unsupported tensor dtype");
    }
    put(code);
    put<std::uint32_t>(static_cast<std::uint32_t>(c.dim()));
    for (auto d : c.sizes()) put<std::int64_t>(d);
    buf_.append(static_cast<const char*>(c.data_ptr()), c.numel() * c.element_size());
  }
  std::string take() { return std::move(buf_); }

 private:
  std::string buf_;
};

class Reader {
 public:
  explicit Reader(const std::string& bytes) : bytes_(bytes) {}

  template <typename T>
  T get() {
    T v;
    need(sizeof(T));
    std::memcpy(&v, bytes_.data() + pos_, sizeof(T));
    pos_ += sizeof(T);
    return v;
  }
  std::string get_string() {
    const auto n = get<std::uint64_t>();
    need(n);
    std::string s = bytes_.substr(pos_, n);
    pos_ += n;
    return s;
  }
  torch::Tensor get_tensor() {
    const auto code = get<std::uint32_t>();
    if (code != kFloat32 && code != kFloat64) throw FormatError("checkpoint: unknown tensor dtype code");
    const auto ndim = get<std::uint32_t>();
    if (ndim > 8) throw FormatError("checkpoint: tensor rank out of range");
    std::vector<int64_t> dims(ndim);
    for (auto& d : dims) {
      d = get<std::int64_t>();
      if (d < 0) throw FormatError("checkpoint: negative tensor dimension");
    }
    auto t = torch::empty(dims, code == kFloat32 ? torch::kFloat32 : torch::kFloat64);
    const std::size_t n = static_cast<std::size_t>(t.numel()) * t.element_size();
    need(n);
    std::memcpy(t.data_ptr(), bytes_.data() + pos_, n);
    pos_ += n;
    return t;
  }
  bool done() const { return pos_ == bytes_.size(); }

 private:
  void need(std::size_t n) const {
    if (bytes_.size() - pos_ < n) throw FormatError("checkpoint is truncated");
  }
  const std::string& bytes_;
  std::size_t pos_ = 0;
};

}  // namespace

std::string Checkpoint::serialize() const {
  Writer w;
  for (char c : kMagic) w.put(c);
  w.put<std::uint32_t>(kFormatVersion);
  w.put<std::int32_t>(epoch);
  w.put<std::int64_t>(global_step);
  w.put_string(config.to_kv().to_string());
  w.put<std::uint64_t>(rng_state);
  w.put<std::uint8_t>(best_metric ? 1 : 0);
  w.put<double>(best_metric.value_or(0.0));
  w.put<std::uint64_t>(parameters.size());
  for (const auto& [name, t] : parameters) {
    w.put_string(name);
    w.put_tensor(t);
  }
  w.put<std::uint64_t>(optimizer.size());
  for (const auto& m : optimizer) {
    w.put<std::int64_t>(m.step);
    w.put_tensor(m.exp_avg);
    w.put_tensor(m.exp_avg_sq);
  }
  return w.take();
}

Checkpoint Checkpoint::deserialize(const std::string& bytes) {
  Reader r(bytes);
  for (char c : kMagic) {
    if (r.get<char>() != c) throw FormatError("not a checkpoint: bad magic");
  }
  const auto version = r.get<std::uint32_t>();
  if (version != kFormatVersion) {
    throw FormatError("unsupported checkpoint format version " + std::to_string(version));
  }
  Checkpoint ck;
  ck.epoch = r.get<std::int32_t>();
  ck.global_step = r.get<std::int64_t>();
  ck.config = TrainConfig::from_kv(KeyValueConfig::parse(r.get_string()));
  ck.rng_state = r.get<std::uint64_t>();
  const bool has_best = r.get<std::uint8_t>() != 0;
  const double best = r.get<double>();
  if (has_best) ck.best_metric = best;
  const auto n_params = r.get<std::uint64_t>();
  for (std::uint64_t i = 0; i < n_params; ++i) {
    auto name = r.get_string();
    ck.parameters.emplace_back(std::move(name), r.get_tensor());
  }
  const auto n_moments = r.get<std::uint64_t>();
  if (n_moments != 0 && n_moments != n_params) throw FormatError("checkpoint: optimizer state count mismatch");
  for (std::uint64_t i = 0; i < n_moments; ++i) {
    MomentState m;
    m.step = r.get<std::int64_t>();
    m.exp_avg = r.get_tensor();
    m.exp_avg_sq = r.get_tensor();
    ck.optimizer.push_back(std::move(m));
  }
  if (!r.done()) throw FormatError("checkpoint has trailing bytes");
  return ck;
}

void Checkpoint::save(const fs::path& path) const { io::write_file_atomic(path, serialize()); }

Checkpoint Checkpoint::load(const fs::path& path) {
  if (!fs::is_regular_file(path)) throw IoError("checkpoint not found: " + path.string());
  try {
    return deserialize(io::read_file(path));
  } catch (const FormatError& e) {
    throw FormatError(path.string() + ": " + e.what());
  }
}

Checkpoint capture(PstNet& model, const TrainConfig& config, torch::optim::Adam* optimizer) {
  Checkpoint ck;
  ck.config = config;
  for (const auto& item : model->named_parameters(true)) {
    ck.parameters.emplace_back(item.key(), item.value().detach().clone());
  }
  if (optimizer) {
    auto& state = optimizer->state();
    for (const auto& item : model->named_parameters(true)) {
      const auto& p = item.value();
      MomentState m;
      auto it = state.find(p.unsafeGetTensorImpl());
      if (it == state.end()) {
        m.exp_avg = torch::zeros_like(p);
        m.exp_avg_sq = torch::zeros_like(p);
      } else {
        auto& s = static_cast<torch::optim::AdamParamState&>(*it->second);
        m.step = s.step();
        m.exp_avg = s.exp_avg().clone();
        m.exp_avg_sq = s.exp_avg_sq().clone();
      }
      ck.optimizer.push_back(std::move(m));
    }
  }
  return ck;
}

PstNet restore_model(const Checkpoint& ckpt) {
  PstNet model(ckpt.config.model);
  auto named = model->named_parameters(true);
  if (named.size() != ckpt.parameters.size()) {
    throw FormatError("checkpoint holds " + std::to_string(ckpt.parameters.size()) + " tensors, model expects " +
                      std::to_string(named.size()));
  }
  torch::NoGradGuard no_grad;
  std::size_t i = 0;
  for (auto& item : named) {
    const auto& [name, value] = ckpt.parameters[i++];
    if (name != item.key() || value.sizes() != item.value().sizes()) {
      throw FormatError("checkpoint tensor '" + name + "' does not match model parameter '" + item.key() + "'");
    }
    item.value().copy_(value);
  }
  return model;
}

void restore_optimizer(const Checkpoint& ckpt, PstNet& model, torch::optim::Adam& optimizer) {
  if (ckpt.optimizer.empty()) return;
  auto params = model->parameters(true);
  if (params.size() != ckpt.optimizer.size()) throw FormatError("checkpoint optimizer state does not match the model");
  auto& state = optimizer.state();
  for (std::size_t i = 0; i < params.size(); ++i) {
    const auto& m = ckpt.optimizer[i];
    if (m.step == 0) continue;
    auto s = std::make_unique<torch::optim::AdamParamState>();
    s->step(m.step);
    s->exp_avg(m.exp_avg.clone());
    s->exp_avg_sq(m.exp_avg_sq.clone());
    state[params[i].unsafeGetTensorImpl()] = std::move(s);
  }
}

}  // namespace pstnet
