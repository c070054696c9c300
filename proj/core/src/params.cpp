#include "wks/params.hpp"

#include <cmath>
#include <cstring>
#include <fstream>
#include <stdexcept>

namespace wks::nn {
namespace {

constexpr char kMagic[8] = {'W', 'K', 'C', 'K', 'P', 'T', '0', '1'};

void write_u64(std::ostream& out, std::uint64_t value) {
  out.write(reinterpret_cast<const char*>(&value), sizeof(value));
}

std::uint64_t read_u64(std::istream& in) {
  std::uint64_t value = 0;
  in.read(reinterpret_cast<char*>(&value), sizeof(value));
  return value;
}

void write_tensor(std::ostream& out, const Tensor& t) {
  out.write(reinterpret_cast<const char*>(t.data()),
            static_cast<std::streamsize>(t.numel() * sizeof(double)));
}

void read_tensor(std::istream& in, Tensor& t) {
  in.read(reinterpret_cast<char*>(t.data()),
          static_cast<std::streamsize>(t.numel() * sizeof(double)));
}

}  // namespace

Param& ParameterSet::add(std::string name, Tensor value, bool trainable) {
  if (index_.count(name) != 0) {
    throw std::logic_error("duplicate parameter name: " + name);
  }
  Param p;
  p.name = std::move(name);
  p.grad = Tensor(value.shape());
  p.m = Tensor(value.shape());
  p.v = Tensor(value.shape());
  p.value = std::move(value);
  p.trainable = trainable;
  index_[p.name] = params_.size();
  params_.push_back(std::move(p));
  return params_.back();
}

Param& ParameterSet::at(const std::string& name) {
  auto it = index_.find(name);
  if (it == index_.end()) throw std::logic_error("unknown parameter: " + name);
  return params_[it->second];
}

const Param& ParameterSet::at(const std::string& name) const {
  auto it = index_.find(name);
  if (it == index_.end()) throw std::logic_error("unknown parameter: " + name);
  return params_[it->second];
}

void ParameterSet::zero_grads() {
  for (auto& p : params_) p.grad.zero();
}

std::size_t ParameterSet::trainable_parameters() const {
  std::size_t n = 0;
  for (const auto& p : params_)
    if (p.trainable) n += p.value.numel();
  return n;
}

std::size_t ParameterSet::total_parameters() const {
  std::size_t n = 0;
  for (const auto& p : params_) n += p.value.numel();
  return n;
}

void ParameterSet::adam_step(const AdamConfig& config) {
  ++step_;
  const double t = static_cast<double>(step_);
  const double bc1 = 1.0 - std::pow(config.beta1, t);
  const double bc2 = 1.0 - std::pow(config.beta2, t);
  for (auto& p : params_) {
    if (!p.trainable) continue;
    double* value = p.value.data();
    const double* grad = p.grad.data();
    double* m = p.m.data();
    double* v = p.v.data();
    const std::size_t n = p.value.numel();
    for (std::size_t i = 0; i < n; ++i) {
      m[i] = config.beta1 * m[i] + (1.0 - config.beta1) * grad[i];
      v[i] = config.beta2 * v[i] + (1.0 - config.beta2) * grad[i] * grad[i];
      const double m_hat = m[i] / bc1;
      const double v_hat = v[i] / bc2;
      value[i] -= config.lr * m_hat / (std::sqrt(v_hat) + config.eps);
    }
  }
}

ParameterSet::Snapshot ParameterSet::snapshot() const {
  Snapshot snap;
  snap.values.reserve(params_.size());
  snap.m.reserve(params_.size());
  snap.v.reserve(params_.size());
  for (const auto& p : params_) {
    snap.values.push_back(p.value);
    snap.m.push_back(p.m);
    snap.v.push_back(p.v);
  }
  snap.step = step_;
  return snap;
}

void ParameterSet::restore(const Snapshot& snap) {
  if (snap.values.size() != params_.size()) {
    throw std::logic_error("snapshot does not match parameter registry");
  }
  for (std::size_t i = 0; i < params_.size(); ++i) {
    params_[i].value = snap.values[i];
    params_[i].m = snap.m[i];
    params_[i].v = snap.v[i];
  }
  step_ = snap.step;
}

void ParameterSet::save(const std::filesystem::path& path) const {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot open " + path.string() + " for writing");
  out.write(kMagic, sizeof(kMagic));
  write_u64(out, step_);
  write_u64(out, params_.size());
  for (const auto& p : params_) {
    write_u64(out, p.name.size());
    out.write(p.name.data(), static_cast<std::streamsize>(p.name.size()));
    out.put(p.trainable ? 1 : 0);
    write_u64(out, p.value.rank());
    for (std::size_t d : p.value.shape()) write_u64(out, d);
    write_tensor(out, p.value);
    write_tensor(out, p.m);
    write_tensor(out, p.v);
  }
  if (!out) throw std::runtime_error("failed while writing " + path.string());
}

void ParameterSet::load(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot open " + path.string());
  char magic[8];
  in.read(magic, sizeof(magic));
  if (!in || std::memcmp(magic, kMagic, sizeof(kMagic)) != 0) {
    throw std::runtime_error(path.string() + " is not a checkpoint file");
  }
  const std::uint64_t step = read_u64(in);
  const std::uint64_t count = read_u64(in);
  if (count != params_.size()) {
    throw std::runtime_error("checkpoint has " + std::to_string(count) +
                             " parameters, model expects " + std::to_string(params_.size()));
  }
  for (auto& p : params_) {
    std::string name(read_u64(in), '\0');
    in.read(name.data(), static_cast<std::streamsize>(name.size()));
    if (name != p.name) {
      throw std::runtime_error("checkpoint parameter '" + name + "' does not match model parameter '" +
                               p.name + "'");
    }
    p.trainable = in.get() != 0;
    std::vector<std::size_t> shape(read_u64(in));
    for (auto& d : shape) d = read_u64(in);
    if (shape != p.value.shape()) {
      throw std::runtime_error("checkpoint shape mismatch for parameter '" + name + "'");
    }
    read_tensor(in, p.value);
    read_tensor(in, p.m);
    read_tensor(in, p.v);
  }
  if (!in) throw std::runtime_error("truncated checkpoint file " + path.string());
  step_ = step;
}

}  // namespace wks::nn
