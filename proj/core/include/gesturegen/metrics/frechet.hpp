#pragma once

#include "gesturegen/numeric/dense_array.hpp"

namespace gesturegen::metrics {

using numeric::DenseArray;

struct GaussianStats {
  DenseArray mean;        // k
  DenseArray covariance;  // k x k, unbiased
};

GaussianStats gaussian_stats(const DenseArray& feats);

/// Symmetric PSD square root through an eigendecomposition; negative
/// eigenvalues (numerical noise) are clamped to zero.
DenseArray psd_sqrt(const DenseArray& symmetric);

/// |mu_r - mu_g|^2 + tr(S_r + S_g - 2 (S_r S_g)^(1/2)). The trace of the
/// product root is evaluated as tr((S_r^(1/2) S_g S_r^(1/2))^(1/2)), which is
/// symmetric and shares its eigenvalues.
double frechet_distance(const DenseArray& real_feats, const DenseArray& gen_feats);
double frechet_distance(const GaussianStats& real, const GaussianStats& gen);

}  // namespace gesturegen::metrics
