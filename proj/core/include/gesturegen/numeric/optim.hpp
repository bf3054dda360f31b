#pragma once

#include <cstdint>
#include <vector>

#include "gesturegen/numeric/layers.hpp"

namespace gesturegen::numeric {

struct AdamWConfig {
  double lr = 3e-5;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
  double weight_decay = 1e-4;
};

/// Adam with decoupled weight decay. Moment buffers follow the parameter
/// set's registration order.
class AdamW {
 public:
  AdamW() = default;
  AdamW(const ParameterSet& params, AdamWConfig config);

  void step(const ParameterSet& params);

  const AdamWConfig& config() const { return config_; }
  std::int64_t step_count() const { return steps_; }
  void set_step_count(std::int64_t steps) { steps_ = steps; }
  std::vector<DenseArray>& first_moments() { return m_; }
  std::vector<DenseArray>& second_moments() { return v_; }

 private:
  AdamWConfig config_;
  std::vector<DenseArray> m_;
  std::vector<DenseArray> v_;
  std::int64_t steps_ = 0;
};

}  // namespace gesturegen::numeric
