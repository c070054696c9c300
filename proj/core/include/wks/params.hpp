#pragma once

#include <cstdint>
#include <deque>
#include <filesystem>
#include <map>
#include <string>

#include "wks/tensor.hpp"

namespace wks::nn {

/// One named parameter with its gradient and Adam moment buffers.
/// Non-trainable entries (batchnorm running statistics) ride along for
/// checkpointing but are skipped by the optimizer and by grad checks.
struct Param {
  std::string name;
  Tensor value;
  Tensor grad;
  Tensor m;
  Tensor v;
  bool trainable = true;
};

struct AdamConfig {
  double lr = 1e-4;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
};

/// Ordered registry of all model parameters. Layers register at
/// construction and keep stable Param* handles (std::deque never moves
/// elements). Registration order defines checkpoint layout.
class ParameterSet {
 public:
  Param& add(std::string name, Tensor value, bool trainable = true);
  Param& at(const std::string& name);
  const Param& at(const std::string& name) const;
  bool contains(const std::string& name) const { return index_.count(name) != 0; }

  std::deque<Param>& items() { return params_; }
  const std::deque<Param>& items() const { return params_; }

  void zero_grads();
  std::size_t trainable_parameters() const;
  std::size_t total_parameters() const;

  /// One Adam update over every trainable parameter; advances the step
  /// counter used for bias correction.
  void adam_step(const AdamConfig& config);
  std::uint64_t steps() const { return step_; }

  /// Deep copy / restore of values, moments, and the step counter.
  /// Used for the divergence rollback in the trainer.
  struct Snapshot {
    std::vector<Tensor> values;
    std::vector<Tensor> m;
    std::vector<Tensor> v;
    std::uint64_t step = 0;
  };
  Snapshot snapshot() const;
  void restore(const Snapshot& snap);

  /// Binary checkpoint; loading requires an identically-shaped registry
  /// (build the model from the same config first).
  void save(const std::filesystem::path& path) const;
  void load(const std::filesystem::path& path);

 private:
  std::deque<Param> params_;
  std::map<std::string, std::size_t> index_;
  std::uint64_t step_ = 0;
};

}  // namespace wks::nn
