#include "gesturegen/numeric/layers.hpp"

#include "gesturegen/error.hpp"
#include "gesturegen/numeric/ops.hpp"

namespace gesturegen::numeric {

void ParameterSet::append(const ParameterSet& other, const std::string& prefix) {
  for (const auto& [name, param] : other.entries_) entries_.emplace_back(prefix + name, param);
}

std::size_t ParameterSet::scalar_count() const {
  std::size_t n = 0;
  for (const auto& entry : entries_) n += entry.second->value.size();
  return n;
}

void ParameterSet::zero_grad() {
  for (auto& entry : entries_) entry.second->zero_grad();
}

DualValue* ParameterSet::find(const std::string& name) const {
  for (const auto& [n, p] : entries_)
    if (n == name) return p;
  return nullptr;
}

DenseArray gaussian(Shape shape, double stddev, Rng& rng) {
  DenseArray out(std::move(shape));
  std::normal_distribution<double> normal(0.0, stddev);
  for (auto& v : out.values()) v = normal(rng);
  return out;
}

DenseArray standard_normal_like(const DenseArray& like, Rng& rng) {
  return gaussian(like.shape(), 1.0, rng);
}

Linear::Linear(std::size_t in, std::size_t out, bool bias, double init_std, Rng& rng)
    : weight(gaussian({in, out}, init_std, rng)), bias(DenseArray::vector(out)), has_bias_(bias) {}

DenseArray Linear::forward(const DenseArray& x) const {
  DenseArray y = matmul(x, weight.value);
  if (has_bias_) add_row_bias(y, bias.value);
  return y;
}

DenseArray Linear::backward(const DenseArray& x, const DenseArray& dy) {
  accumulate_only(x, dy);
  return matmul_nt(dy, weight.value);
}

void Linear::accumulate_only(const DenseArray& x, const DenseArray& dy) {
  weight.gradient += matmul_tn(x, dy);
  if (has_bias_) bias.gradient += column_sums(dy);
}

void Linear::register_params(ParameterSet& set, const std::string& prefix) {
  set.add(prefix + ".weight", weight);
  if (has_bias_) set.add(prefix + ".bias", bias);
}

}  // namespace gesturegen::numeric
