#include "wks/grad_check.hpp"

#include <algorithm>
#include <cmath>
#include <vector>

namespace wks::nn {

GradCheckReport check_gradients(ParameterSet& params, const std::function<double()>& loss,
                                const std::function<void()>& backward, double step,
                                std::size_t stride) {
  backward();
  std::vector<Tensor> analytic;
  analytic.reserve(params.items().size());
  for (const auto& p : params.items()) analytic.push_back(p.grad);

  GradCheckReport report;
  std::size_t param_idx = 0;
  for (auto& p : params.items()) {
    const Tensor& grads = analytic[param_idx++];
    if (!p.trainable) continue;
    for (std::size_t i = 0; i < p.value.numel(); i += stride) {
      const double saved = p.value[i];
      p.value[i] = saved + step;
      const double plus = loss();
      p.value[i] = saved - step;
      const double minus = loss();
      p.value[i] = saved;

      const double numeric = (plus - minus) / (2.0 * step);
      const double a = grads[i];
      ++report.checked;
      // exactly-invariant directions: both sides vanish up to FD noise
      if (std::abs(a) < 1e-7 && std::abs(numeric) < 1e-7) continue;
      const double rel = std::abs(a - numeric) /
                         std::max({std::abs(a), std::abs(numeric), 1e-8});
      if (rel > report.max_rel_error) {
        report.max_rel_error = rel;
        report.worst_param = p.name;
        report.worst_flat_index = i;
        report.analytic = a;
        report.numeric = numeric;
      }
    }
  }
  return report;
}

}  // namespace wks::nn
