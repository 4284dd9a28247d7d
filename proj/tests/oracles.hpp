#pragma once

// Independent re-implementations used as test oracles. Written directly
// from the formulas, without sharing code with the library.

#include <algorithm>
#include <cmath>
#include <vector>

namespace oracle {

inline bool close(double got, double want, double rel = 1e-12) {
  if (got == want) return true;
  return std::abs(got - want) <= rel * std::max(std::abs(want), 1e-300);
}

inline double aard(const std::vector<double>& ni, const std::vector<double>& nj) {
  double s = 0;
  for (std::size_t t = 0; t < ni.size(); t++) {
    double den = ni[t] > 1e-3 ? ni[t] : 1e-3;
    double diff = ni[t] - nj[t];
    if (diff < 0) diff = -diff;
    s = s + diff / den;
  }
  return s / ni.size();
}

inline double aare(const std::vector<double>& y, const std::vector<double>& yhat) {
  double s = 0;
  for (std::size_t w = 0; w < y.size(); w++) {
    double den = y[w] > 0.1 ? y[w] : 0.1;
    s = s + std::fabs(y[w] - yhat[w]) / den;
  }
  return s / y.size();
}

inline double aae(const std::vector<double>& y, const std::vector<double>& yhat) {
  double s = 0;
  for (std::size_t w = 0; w < y.size(); w++) s = s + std::fabs(y[w] - yhat[w]);
  return s / y.size();
}

inline double rmse(const std::vector<double>& y, const std::vector<double>& yhat) {
  double s = 0;
  for (std::size_t w = 0; w < y.size(); w++) s = s + (y[w] - yhat[w]) * (y[w] - yhat[w]);
  return std::sqrt(s / y.size());
}

inline double mean(const std::vector<double>& v) {
  double s = 0;
  for (double x : v) s = s + x;
  return s / v.size();
}

}  // namespace oracle

#include "distpre/lstm.hpp"

namespace oracle {

inline double sig(double x) { return 1.0 / (1.0 + std::exp(-x)); }

// Step-by-step stacked LSTM forward pass. Gate rows are ordered input,
// forget, output, candidate; the prediction is a linear read-out of the top
// layer's final hidden state.
inline double lstm_forward(const distpre::LstmModel& m, const std::vector<double>& x) {
  std::vector<std::vector<double>> seq;
  for (double v : x) seq.push_back({v});
  for (const auto& layer : m.params.layers) {
    const std::size_t H = layer.units, in = layer.input_width;
    std::vector<double> h(H, 0.0), c(H, 0.0);
    std::vector<std::vector<double>> next;
    for (const auto& xt : seq) {
      std::vector<double> hn(H), cn(H);
      for (std::size_t u = 0; u < H; u++) {
        double z[4];
        for (int g = 0; g < 4; g++) {
          const std::size_t row = g * H + u;
          double s = layer.bias[row];
          for (std::size_t k = 0; k < in; k++) s += layer.w_in[row * in + k] * xt[k];
          for (std::size_t k = 0; k < H; k++) s += layer.w_rec[row * H + k] * h[k];
          z[g] = s;
        }
        const double ig = sig(z[0]), fg = sig(z[1]), og = sig(z[2]), gg = std::tanh(z[3]);
        cn[u] = fg * c[u] + ig * gg;
        hn[u] = og * std::tanh(cn[u]);
      }
      h = hn;
      c = cn;
      next.push_back(h);
    }
    seq = next;
  }
  double y = m.params.out_b;
  for (std::size_t k = 0; k < seq.back().size(); k++) y += m.params.out_w[k] * seq.back()[k];
  return y;
}

// Visits every scalar parameter in a fixed order.
template <class Fn>
void each_param(distpre::LstmParameters& p, Fn fn) {
  for (auto& l : p.layers) {
    for (auto& v : l.w_in) fn(v);
    for (auto& v : l.w_rec) fn(v);
    for (auto& v : l.bias) fn(v);
  }
  for (auto& v : p.out_w) fn(v);
  fn(p.out_b);
}

// Max relative discrepancy between the library's analytic gradient and
// central finite differences of the oracle forward pass.
inline double fd_discrepancy(const distpre::LstmModel& model, const distpre::Sample& s,
                             double step = 1e-5) {
  const auto analytic = distpre::loss_gradient(model, s).grad;
  std::vector<double> a;
  auto ag = analytic;
  each_param(ag, [&](double& v) { a.push_back(v); });

  distpre::LstmModel m = model;
  std::size_t idx = 0;
  double worst = 0.0;
  each_param(m.params, [&](double& v) {
    const double saved = v;
    v = saved + step;
    const double e_plus = lstm_forward(m, s.input) - s.target;
    v = saved - step;
    const double e_minus = lstm_forward(m, s.input) - s.target;
    v = saved;
    const double fd = (e_plus * e_plus - e_minus * e_minus) / (2 * step);
    const double den = std::max({std::fabs(a[idx]), std::fabs(fd), 1e-8});
    worst = std::max(worst, std::fabs(a[idx] - fd) / den);
    ++idx;
  });
  return worst;
}

}  // namespace oracle
