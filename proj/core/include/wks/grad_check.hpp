#pragma once

#include <functional>
#include <string>

#include "wks/params.hpp"

namespace wks::nn {

struct GradCheckReport {
  double max_rel_error = 0.0;
  std::string worst_param;
  std::size_t worst_flat_index = 0;
  double analytic = 0.0;
  double numeric = 0.0;
  std::size_t checked = 0;
};

/// Central-difference check of analytic gradients. `backward` must zero
/// the grads, run forward+backward once, and leave gradients in `params`;
/// `loss` must evaluate the same forward pass without touching grads.
/// Both must be deterministic (freeze dropout masks). Relative error is
/// |a - n| / max(|a|, |n|, 1e-8); `stride` checks every stride-th element
/// of each trainable tensor. Directions where analytic and numeric are
/// both below 1e-7 are counted but not compared: a loss that is exactly
/// invariant (conv bias absorbed by batch norm) leaves the differences
/// measuring rounding noise.
GradCheckReport check_gradients(ParameterSet& params,
                                const std::function<double()>& loss,
                                const std::function<void()>& backward,
                                double step = 1e-4, std::size_t stride = 1);

}  // namespace wks::nn
