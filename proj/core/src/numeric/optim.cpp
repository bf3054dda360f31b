#include "gesturegen/numeric/optim.hpp"

#include <cmath>

#include "gesturegen/error.hpp"

namespace gesturegen::numeric {

AdamW::AdamW(const ParameterSet& params, AdamWConfig config) : config_(config) {
  m_.reserve(params.size());
  v_.reserve(params.size());
  for (const auto& entry : params.entries()) {
    m_.emplace_back(entry.second->value.shape());
    v_.emplace_back(entry.second->value.shape());
  }
}

void AdamW::step(const ParameterSet& params) {
  if (params.size() != m_.size()) fail(ErrorKind::kContract, "optimizer state does not match parameters");
  ++steps_;
  const double t = static_cast<double>(steps_);
  const double correction1 = 1.0 - std::pow(config_.beta1, t);
  const double correction2 = 1.0 - std::pow(config_.beta2, t);
  for (std::size_t p = 0; p < params.size(); ++p) {
    DualValue& param = *params.entries()[p].second;
    DenseArray& m = m_[p];
    DenseArray& v = v_[p];
    for (std::size_t i = 0; i < param.value.size(); ++i) {
      const double g = param.gradient[i];
      m[i] = config_.beta1 * m[i] + (1.0 - config_.beta1) * g;
      v[i] = config_.beta2 * v[i] + (1.0 - config_.beta2) * g * g;
      const double update = (m[i] / correction1) / (std::sqrt(v[i] / correction2) + config_.eps);
      param.value[i] -= config_.lr * (update + config_.weight_decay * param.value[i]);
    }
  }
}

}  // namespace gesturegen::numeric
