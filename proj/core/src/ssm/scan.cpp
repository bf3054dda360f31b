#include "gesturegen/ssm/scan.hpp"

#include <bit>
#include <cmath>

#include <fmt/format.h>

#include "gesturegen/error.hpp"

namespace gesturegen::ssm {

namespace {

void require_input(const SelectiveSsmParams& params, const DenseArray& u) {
  params.validate();
  if (u.rows() != params.length || u.cols() != params.channels) {
    fail(ErrorKind::kDimension,
         fmt::format("scan input {} does not match params [{}x{}]", numeric::shape_string(u.shape()),
                     params.length, params.channels));
  }
}

struct Affine {
  double a;
  double b;
};

// Applies `first` then `second`: h -> second.a * (first.a * h + first.b) + second.b.
Affine combine(Affine first, Affine second) {
  return {first.a * second.a, second.a * first.b + second.b};
}

}  // namespace

void ContinuousSsm::validate() const {
  if (a.empty()) fail(ErrorKind::kParameter, "SSM state dimension must be >= 1");
  if (b.size() != a.size() || c.size() != a.size()) {
    fail(ErrorKind::kDimension, "SSM A, B and C must share the state dimension");
  }
  for (double v : a)
    if (!(v < 0.0)) fail(ErrorKind::kParameter, "SSM A entries must be strictly negative");
}

DiscreteSsm discretize_zoh(const std::vector<double>& a, const std::vector<double>& b, double delta) {
  if (!(delta > 0.0)) fail(ErrorKind::kParameter, fmt::format("discretization step {} must be > 0", delta));
  if (a.size() != b.size()) fail(ErrorKind::kDimension, "discretize_zoh: A and B sizes differ");
  DiscreteSsm out;
  out.abar.reserve(a.size());
  out.bbar.reserve(b.size());
  for (std::size_t n = 0; n < a.size(); ++n) {
    out.abar.push_back(std::exp(delta * a[n]));
    out.bbar.push_back(delta * b[n]);
  }
  return out;
}

SelectiveSsmParams::SelectiveSsmParams(std::size_t l, std::size_t e, std::size_t n)
    : length(l),
      channels(e),
      state(n),
      abar(l * e * n),
      bbar(l * e * n),
      c(l * e * n),
      d(e) {}

void SelectiveSsmParams::validate() const {
  const std::size_t n = length * channels * state;
  if (length < 1 || channels < 1 || state < 1) fail(ErrorKind::kDimension, "scan params need L, E, N >= 1");
  if (abar.size() != n || bbar.size() != n || c.size() != n || d.size() != channels) {
    fail(ErrorKind::kDimension, "scan parameter buffers do not match [L x E x N]");
  }
}

DenseArray selective_scan_seq(const SelectiveSsmParams& params, const DenseArray& u,
                              std::vector<double>* states) {
  require_input(params, u);
  const std::size_t L = params.length;
  const std::size_t E = params.channels;
  const std::size_t N = params.state;
  DenseArray y = DenseArray::matrix(L, E);
  std::vector<double> h(E * N, 0.0);
  if (states != nullptr) states->assign(L * E * N, 0.0);
  for (std::size_t k = 0; k < L; ++k) {
    for (std::size_t e = 0; e < E; ++e) {
      const std::size_t base = params.offset(k, e);
      const double uk = u(k, e);
      double* he = h.data() + e * N;
      double acc = params.d[e] * uk;
      for (std::size_t n = 0; n < N; ++n) {
        he[n] = params.abar[base + n] * he[n] + params.bbar[base + n] * uk;
        acc += params.c[base + n] * he[n];
      }
      y(k, e) = acc;
    }
    if (states != nullptr) std::copy(h.begin(), h.end(), states->begin() + static_cast<std::ptrdiff_t>(k * E * N));
  }
  return y;
}

DenseArray selective_scan_parallel(const SelectiveSsmParams& params, const DenseArray& u) {
  require_input(params, u);
  const std::size_t L = params.length;
  const std::size_t E = params.channels;
  const std::size_t N = params.state;
  const std::size_t padded = std::bit_ceil(L);

  DenseArray y = DenseArray::matrix(L, E);
  for (std::size_t k = 0; k < L; ++k)
    for (std::size_t e = 0; e < E; ++e) y(k, e) = params.d[e] * u(k, e);

  std::vector<Affine> tree(padded);
  std::vector<Affine> leaves(L);
  for (std::size_t e = 0; e < E; ++e) {
    for (std::size_t n = 0; n < N; ++n) {
      for (std::size_t k = 0; k < padded; ++k) {
        if (k < L) {
          const std::size_t idx = params.offset(k, e) + n;
          leaves[k] = {params.abar[idx], params.bbar[idx] * u(k, e)};
          tree[k] = leaves[k];
        } else {
          tree[k] = {1.0, 0.0};
        }
      }
      // Up-sweep: each right child accumulates the total of its subtree.
      for (std::size_t stride = 1; stride < padded; stride *= 2) {
        for (std::size_t i = 2 * stride - 1; i < padded; i += 2 * stride) {
          tree[i] = combine(tree[i - stride], tree[i]);
        }
      }
      // Down-sweep: turn subtree totals into exclusive prefixes.
      tree[padded - 1] = {1.0, 0.0};
      for (std::size_t stride = padded / 2; stride >= 1; stride /= 2) {
        for (std::size_t i = 2 * stride - 1; i < padded; i += 2 * stride) {
          const Affine left = tree[i - stride];
          tree[i - stride] = tree[i];
          tree[i] = combine(tree[i], left);
        }
      }
      for (std::size_t k = 0; k < L; ++k) {
        const double h = combine(tree[k], leaves[k]).b;
        y(k, e) += params.c[params.offset(k, e) + n] * h;
      }
    }
  }
  return y;
}

ScanGrad selective_scan_backward(const SelectiveSsmParams& params, const DenseArray& u,
                                 const std::vector<double>& states, const DenseArray& dy) {
  require_input(params, u);
  const std::size_t L = params.length;
  const std::size_t E = params.channels;
  const std::size_t N = params.state;
  if (states.size() != L * E * N || dy.rows() != L || dy.cols() != E) {
    fail(ErrorKind::kDimension, "scan backward: cached states or upstream gradient mismatch");
  }
  ScanGrad g{std::vector<double>(L * E * N), std::vector<double>(L * E * N),
             std::vector<double>(L * E * N), std::vector<double>(E), DenseArray::matrix(L, E)};
  std::vector<double> carry(E * N, 0.0);
  for (std::size_t k = L; k-- > 0;) {
    for (std::size_t e = 0; e < E; ++e) {
      const std::size_t base = params.offset(k, e);
      const double dyk = dy(k, e);
      const double uk = u(k, e);
      g.dd[e] += dyk * uk;
      double du = params.d[e] * dyk;
      double* ce = carry.data() + e * N;
      for (std::size_t n = 0; n < N; ++n) {
        const double dh = ce[n] + params.c[base + n] * dyk;
        const double h_prev = k > 0 ? states[params.offset(k - 1, e) + n] : 0.0;
        g.dc[base + n] = dyk * states[base + n];
        g.dabar[base + n] = dh * h_prev;
        g.dbbar[base + n] = dh * uk;
        du += dh * params.bbar[base + n];
        ce[n] = dh * params.abar[base + n];
      }
      g.du(k, e) = du;
    }
  }
  return g;
}

std::vector<double> ssm_impulse_kernel(const ContinuousSsm& ssm, double delta, std::size_t length) {
  ssm.validate();
  const DiscreteSsm disc = discretize_zoh(ssm.a, ssm.b, delta);
  std::vector<double> kernel(length, 0.0);
  for (std::size_t n = 0; n < ssm.state_dim(); ++n) {
    double power = 1.0;
    for (std::size_t j = 0; j < length; ++j) {
      kernel[j] += ssm.c[n] * power * disc.bbar[n];
      power *= disc.abar[n];
    }
  }
  return kernel;
}

std::vector<double> causal_convolve(const std::vector<double>& kernel, const std::vector<double>& u,
                                    double d) {
  std::vector<double> y(u.size(), 0.0);
  for (std::size_t k = 0; k < u.size(); ++k) {
    double acc = d * u[k];
    for (std::size_t j = 0; j <= k && j < kernel.size(); ++j) acc += kernel[j] * u[k - j];
    y[k] = acc;
  }
  return y;
}

}  // namespace gesturegen::ssm
