#pragma once

#include <cstdint>
#include <random>
#include <string>
#include <utility>
#include <vector>

#include "gesturegen/numeric/dense_array.hpp"

namespace gesturegen::numeric {

/// A trainable value paired with its accumulated gradient.
struct DualValue {
  DenseArray value;
  DenseArray gradient;

  DualValue() = default;
  explicit DualValue(DenseArray v) : value(std::move(v)), gradient(value.shape()) {}

  void zero_grad() { gradient.fill(0.0); }
  void accumulate(const DenseArray& g) { gradient += g; }
};

/// Ordered, named view of every parameter of a model. Order is the
/// registration order and is what checkpoints and the optimizer rely on.
class ParameterSet {
 public:
  void add(std::string name, DualValue& param) { entries_.emplace_back(std::move(name), &param); }
  void append(const ParameterSet& other, const std::string& prefix);

  const std::vector<std::pair<std::string, DualValue*>>& entries() const { return entries_; }
  std::size_t size() const { return entries_.size(); }
  std::size_t scalar_count() const;
  void zero_grad();
  DualValue* find(const std::string& name) const;

 private:
  std::vector<std::pair<std::string, DualValue*>> entries_;
};

using Rng = std::mt19937_64;

DenseArray gaussian(Shape shape, double stddev, Rng& rng);
DenseArray standard_normal_like(const DenseArray& like, Rng& rng);

/// y = x W + b with W stored in x [in x out] orientation.
class Linear {
 public:
  Linear() = default;
  Linear(std::size_t in, std::size_t out, bool bias, double init_std, Rng& rng);

  std::size_t in_features() const { return weight.value.rows(); }
  std::size_t out_features() const { return weight.value.cols(); }
  bool has_bias() const { return has_bias_; }

  DenseArray forward(const DenseArray& x) const;
  /// Accumulates parameter gradients and returns dL/dx.
  DenseArray backward(const DenseArray& x, const DenseArray& dy);
  /// Same as backward but skips the input gradient.
  void accumulate_only(const DenseArray& x, const DenseArray& dy);

  void register_params(ParameterSet& set, const std::string& prefix);

  DualValue weight;
  DualValue bias;

 private:
  bool has_bias_ = false;
};

}  // namespace gesturegen::numeric
