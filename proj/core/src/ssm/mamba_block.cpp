#include "gesturegen/ssm/mamba_block.hpp"

#include <cmath>

#include <fmt/format.h>

#include "gesturegen/error.hpp"

namespace gesturegen::ssm {

using numeric::column_sums;
using numeric::concat_cols;
using numeric::slice_cols;

MambaBlockWeights MambaBlockWeights::initialized(const MambaConfig& config, numeric::Rng& rng,
                                                 double init_std) {
  const std::size_t d = config.d_model;
  const std::size_t e = config.inner();
  const std::size_t n = config.state;
  const std::size_t r = config.rank();
  MambaBlockWeights w;
  w.config = config;
  w.in_proj = Linear(d, 2 * e, false, init_std, rng);
  w.conv_kernel = DualValue(numeric::gaussian({config.conv_width, e}, init_std, rng));
  w.conv_bias = DualValue(DenseArray::vector(e));
  w.x_proj = Linear(e, r + 2 * n, false, init_std, rng);
  w.dt_proj = Linear(r, e, true, init_std, rng);
  std::uniform_real_distribution<double> log_dt(std::log(1e-3), std::log(1e-1));
  for (std::size_t c = 0; c < e; ++c) {
    const double dt = std::exp(log_dt(rng));
    w.dt_proj.bias.value[c] = dt + std::log(-std::expm1(-dt));
  }
  w.a_log = DualValue(DenseArray::matrix(e, n));
  for (std::size_t c = 0; c < e; ++c)
    for (std::size_t s = 0; s < n; ++s) w.a_log.value(c, s) = std::log(static_cast<double>(s + 1));
  w.d_skip = DualValue(DenseArray::vector(e, 1.0));
  w.out_proj = Linear(e, d, false, init_std, rng);
  return w;
}

MambaBlockWeights MambaBlockWeights::zeros(const MambaConfig& config) {
  numeric::Rng rng(0);
  MambaBlockWeights w = initialized(config, rng, 0.0);
  w.dt_proj.bias.value.fill(0.0);
  w.a_log.value.fill(0.0);
  w.d_skip.value.fill(0.0);
  return w;
}

void MambaBlockWeights::register_params(numeric::ParameterSet& set, const std::string& prefix) {
  in_proj.register_params(set, prefix + ".in_proj");
  set.add(prefix + ".conv.kernel", conv_kernel);
  set.add(prefix + ".conv.bias", conv_bias);
  x_proj.register_params(set, prefix + ".x_proj");
  dt_proj.register_params(set, prefix + ".dt_proj");
  set.add(prefix + ".a_log", a_log);
  set.add(prefix + ".d", d_skip);
  out_proj.register_params(set, prefix + ".out_proj");
}

DenseArray mamba_block_forward(const MambaBlockWeights& w, const DenseArray& x, MambaCache* cache) {
  const MambaConfig& cfg = w.config;
  if (x.cols() != cfg.d_model) {
    fail(ErrorKind::kDimension, fmt::format("mamba block expects width {}, got {}", cfg.d_model, x.cols()));
  }
  const std::size_t L = x.rows();
  const std::size_t E = cfg.inner();
  const std::size_t N = cfg.state;
  const std::size_t R = cfg.rank();

  const DenseArray xz = w.in_proj.forward(x);
  DenseArray main = slice_cols(xz, 0, E);
  DenseArray gate = slice_cols(xz, E, E);
  DenseArray conv_out = numeric::causal_depthwise_conv(main, w.conv_kernel.value, w.conv_bias.value);
  DenseArray u = numeric::silu(conv_out);
  DenseArray dbc = w.x_proj.forward(u);
  DenseArray dt_low = slice_cols(dbc, 0, R);
  DenseArray dt_pre = w.dt_proj.forward(dt_low);
  DenseArray delta = dt_pre;
  for (auto& v : delta.values()) v = numeric::softplus(v);

  std::vector<double> a_cont(E * N);
  for (std::size_t i = 0; i < E * N; ++i) a_cont[i] = -std::exp(w.a_log.value[i]);
  SelectiveSsmParams params(L, E, N);
  for (std::size_t k = 0; k < L; ++k) {
    const double* bk = dbc.data() + k * dbc.cols() + R;
    const double* ck = bk + N;
    for (std::size_t e = 0; e < E; ++e) {
      const double dk = delta(k, e);
      const std::size_t base = params.offset(k, e);
      const double* a_row = a_cont.data() + e * N;
      for (std::size_t n = 0; n < N; ++n) {
        const double a = a_row[n];
        params.abar[base + n] = std::exp(dk * a);
        params.bbar[base + n] = dk * bk[n];
        params.c[base + n] = ck[n];
      }
    }
  }
  for (std::size_t e = 0; e < E; ++e) params.d[e] = w.d_skip.value[e];

  std::vector<double> states;
  DenseArray scan_out = selective_scan_seq(params, u, cache != nullptr ? &states : nullptr);
  DenseArray gated = numeric::hadamard(scan_out, numeric::silu(gate));
  DenseArray out = w.out_proj.forward(gated);

  if (cache != nullptr) {
    cache->x = x;
    cache->main = std::move(main);
    cache->gate = std::move(gate);
    cache->conv_out = std::move(conv_out);
    cache->u = std::move(u);
    cache->dbc = std::move(dbc);
    cache->dt_low = std::move(dt_low);
    cache->dt_pre = std::move(dt_pre);
    cache->delta = std::move(delta);
    cache->params = std::move(params);
    cache->states = std::move(states);
    cache->scan_out = std::move(scan_out);
    cache->gated = std::move(gated);
  }
  return out;
}

DenseArray mamba_block_backward(MambaBlockWeights& w, const MambaCache& c, const DenseArray& dout) {
  const MambaConfig& cfg = w.config;
  const std::size_t L = c.x.rows();
  const std::size_t E = cfg.inner();
  const std::size_t N = cfg.state;
  const std::size_t R = cfg.rank();

  const DenseArray dgated = w.out_proj.backward(c.gated, dout);
  const DenseArray gate_act = numeric::silu(c.gate);
  const DenseArray dscan = numeric::hadamard(dgated, gate_act);
  const DenseArray dgate = numeric::silu_backward(c.gate, numeric::hadamard(dgated, c.scan_out));

  ScanGrad sg = selective_scan_backward(c.params, c.u, c.states, dscan);
  for (std::size_t e = 0; e < E; ++e) w.d_skip.gradient[e] += sg.dd[e];

  std::vector<double> a_cont(E * N);
  for (std::size_t i = 0; i < E * N; ++i) a_cont[i] = -std::exp(w.a_log.value[i]);
  DenseArray ddelta = DenseArray::matrix(L, E);
  DenseArray ddbc = DenseArray::matrix(L, R + 2 * N);
  for (std::size_t k = 0; k < L; ++k) {
    const double* bk = c.dbc.data() + k * c.dbc.cols() + R;
    double* dbk = ddbc.data() + k * ddbc.cols() + R;
    double* dck = dbk + N;
    for (std::size_t e = 0; e < E; ++e) {
      const double dk = c.delta(k, e);
      const std::size_t base = c.params.offset(k, e);
      double acc = 0.0;
      const double* a_row = a_cont.data() + e * N;
      double* da_row = w.a_log.gradient.data() + e * N;
      for (std::size_t n = 0; n < N; ++n) {
        const double a = a_row[n];
        const double g_abar = sg.dabar[base + n] * c.params.abar[base + n];
        acc += g_abar * a + sg.dbbar[base + n] * bk[n];
        // dA * dA/da_log with A = -exp(a_log).
        da_row[n] += g_abar * dk * a;
        dbk[n] += sg.dbbar[base + n] * dk;
        dck[n] += sg.dc[base + n];
      }
      ddelta(k, e) = acc;
    }
  }

  DenseArray ddt_pre = ddelta;
  for (std::size_t i = 0; i < ddt_pre.size(); ++i) ddt_pre[i] *= numeric::sigmoid(c.dt_pre[i]);
  const DenseArray ddt_low = w.dt_proj.backward(c.dt_low, ddt_pre);
  for (std::size_t k = 0; k < L; ++k)
    for (std::size_t r = 0; r < R; ++r) ddbc(k, r) += ddt_low(k, r);

  DenseArray du = w.x_proj.backward(c.u, ddbc);
  du += sg.du;
  const DenseArray dconv = numeric::silu_backward(c.conv_out, du);
  const auto conv_grad = numeric::causal_depthwise_conv_backward(c.main, w.conv_kernel.value, dconv);
  w.conv_kernel.gradient += conv_grad.dkernel;
  w.conv_bias.gradient += conv_grad.dbias;

  const DenseArray dxz = concat_cols({conv_grad.dx, dgate});
  return w.in_proj.backward(c.x, dxz);
}

}  // namespace gesturegen::ssm
