#include "gesturegen/metrics/frechet.hpp"

#include <algorithm>
#include <cmath>

#include <Eigen/Dense>
#include <fmt/format.h>

#include "gesturegen/error.hpp"

namespace gesturegen::metrics {

namespace {

using Matrix = Eigen::MatrixXd;

Matrix to_eigen(const DenseArray& a) {
  Matrix m(a.rows(), a.cols());
  for (std::size_t r = 0; r < a.rows(); ++r)
    for (std::size_t c = 0; c < a.cols(); ++c) m(r, c) = a(r, c);
  return m;
}

DenseArray from_eigen(const Matrix& m) {
  DenseArray a = DenseArray::matrix(m.rows(), m.cols());
  for (Eigen::Index r = 0; r < m.rows(); ++r)
    for (Eigen::Index c = 0; c < m.cols(); ++c) a(r, c) = m(r, c);
  return a;
}

Matrix sqrt_psd(const Matrix& s) {
  const Matrix sym = 0.5 * (s + s.transpose());
  Eigen::SelfAdjointEigenSolver<Matrix> eig(sym);
  if (eig.info() != Eigen::Success) fail(ErrorKind::kNumerical, "eigendecomposition failed");
  const Eigen::VectorXd root = eig.eigenvalues().cwiseMax(0.0).cwiseSqrt();
  return eig.eigenvectors() * root.asDiagonal() * eig.eigenvectors().transpose();
}

double trace_sqrt_psd(const Matrix& s) {
  const Matrix sym = 0.5 * (s + s.transpose());
  Eigen::SelfAdjointEigenSolver<Matrix> eig(sym, Eigen::EigenvaluesOnly);
  if (eig.info() != Eigen::Success) fail(ErrorKind::kNumerical, "eigendecomposition failed");
  return eig.eigenvalues().cwiseMax(0.0).cwiseSqrt().sum();
}

}  // namespace

GaussianStats gaussian_stats(const DenseArray& feats) {
  if (feats.rank() != 2 || feats.rows() < 2)
    fail(ErrorKind::kDataset, fmt::format("need at least 2 feature rows, got {}", feats.rows()));
  const Matrix x = to_eigen(feats);
  const Eigen::RowVectorXd mu = x.colwise().mean();
  const Matrix centered = x.rowwise() - mu;
  const Matrix cov = centered.transpose() * centered / static_cast<double>(x.rows() - 1);
  GaussianStats s;
  s.mean = DenseArray::vector(feats.cols());
  for (std::size_t c = 0; c < feats.cols(); ++c) s.mean[c] = mu(static_cast<Eigen::Index>(c));
  s.covariance = from_eigen(cov);
  return s;
}

DenseArray psd_sqrt(const DenseArray& symmetric) {
  if (symmetric.rows() != symmetric.cols())
    fail(ErrorKind::kDimension, fmt::format("psd_sqrt needs a square matrix, got {}",
                                            numeric::shape_string(symmetric.shape())));
  return from_eigen(sqrt_psd(to_eigen(symmetric)));
}

double frechet_distance(const GaussianStats& real, const GaussianStats& gen) {
  if (real.mean.size() != gen.mean.size())
    fail(ErrorKind::kDimension, fmt::format("feature widths differ: {} vs {}", real.mean.size(), gen.mean.size()));
  double mean_term = 0.0;
  for (std::size_t i = 0; i < real.mean.size(); ++i) {
    const double d = real.mean[i] - gen.mean[i];
    mean_term += d * d;
  }
  const Matrix sr = to_eigen(real.covariance);
  const Matrix sg = to_eigen(gen.covariance);
  const Matrix root_r = sqrt_psd(sr);
  const double cross = trace_sqrt_psd(root_r * sg * root_r);
  return std::max(0.0, mean_term + sr.trace() + sg.trace() - 2.0 * cross);
}

double frechet_distance(const DenseArray& real_feats, const DenseArray& gen_feats) {
  if (real_feats.cols() != gen_feats.cols())
    fail(ErrorKind::kDimension,
         fmt::format("feature widths differ: {} vs {}", real_feats.cols(), gen_feats.cols()));
  return frechet_distance(gaussian_stats(real_feats), gaussian_stats(gen_feats));
}

}  // namespace gesturegen::metrics
