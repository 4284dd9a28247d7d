#include "distpre/lstm.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <string>

#include "distpre/error.hpp"
#include "distpre/kernels.hpp"
#include "distpre/rng.hpp"

namespace distpre {
namespace {

double sigmoid(double x) noexcept { return 1.0 / (1.0 + std::exp(-x)); }

struct LayerTrace {
  std::vector<double> x;       // T x input_width
  std::vector<double> h;       // (T + 1) x H, row 0 is the zero initial state
  std::vector<double> c;       // (T + 1) x H
  std::vector<double> gates;   // T x 4H, post-activation
  std::vector<double> tanh_c;  // T x H
};

struct Workspace {
  std::vector<LayerTrace> layers;
  std::vector<double> dh_above;
  std::vector<double> dx_below;
  std::vector<double> dh_next;
  std::vector<double> dc_next;
  std::vector<double> dz;
};

// Runs the network over `input`, recording every activation in `ws`.
double forward_trace(const LstmModel& model, std::span<const double> input, Workspace& ws) {
  const auto& layers = model.params.layers;
  const std::size_t steps = input.size();
  ws.layers.resize(layers.size());
  for (std::size_t l = 0; l < layers.size(); ++l) {
    const LstmLayer& layer = layers[l];
    const std::size_t in = layer.input_width;
    const std::size_t H = layer.units;
    LayerTrace& tr = ws.layers[l];
    tr.x.resize(steps * in);
    tr.h.assign((steps + 1) * H, 0.0);
    tr.c.assign((steps + 1) * H, 0.0);
    tr.gates.resize(steps * kGates * H);
    tr.tanh_c.resize(steps * H);
    for (std::size_t t = 0; t < steps; ++t) {
      double* x = tr.x.data() + t * in;
      if (l == 0) {
        x[0] = input[t];
      } else {
        const auto& below = ws.layers[l - 1].h;
        std::copy_n(below.data() + (t + 1) * in, in, x);
      }
      double* z = tr.gates.data() + t * kGates * H;
      std::copy(layer.bias.begin(), layer.bias.end(), z);
      std::span<double> zs(z, kGates * H);
      kernels::gemv_acc(layer.w_in, kGates * H, in, std::span<const double>(x, in), zs);
      kernels::gemv_acc(layer.w_rec, kGates * H, H,
                        std::span<const double>(tr.h.data() + t * H, H), zs);
      const double* c_prev = tr.c.data() + t * H;
      double* c = tr.c.data() + (t + 1) * H;
      double* h = tr.h.data() + (t + 1) * H;
      double* tc = tr.tanh_c.data() + t * H;
      bool finite = true;
      for (std::size_t u = 0; u < H; ++u) {
        const double i = sigmoid(z[gate_input * H + u]);
        const double f = sigmoid(z[gate_forget * H + u]);
        const double o = sigmoid(z[gate_output * H + u]);
        const double g = std::tanh(z[gate_candidate * H + u]);
        z[gate_input * H + u] = i;
        z[gate_forget * H + u] = f;
        z[gate_output * H + u] = o;
        z[gate_candidate * H + u] = g;
        c[u] = f * c_prev[u] + i * g;
        tc[u] = std::tanh(c[u]);
        h[u] = o * tc[u];
        finite = finite && std::isfinite(c[u]) && std::isfinite(h[u]);
      }
      if (!finite) {
        throw NumericalError("non-finite activation in layer " + std::to_string(l) +
                             " at step " + std::to_string(t));
      }
    }
  }
  const auto& top = ws.layers.back();
  const std::size_t H = layers.back().units;
  const double pred =
      kernels::dot(model.params.out_w, std::span<const double>(top.h.data() + steps * H, H)) +
      model.params.out_b;
  if (!std::isfinite(pred)) {
    throw NumericalError("non-finite prediction at output layer, step " +
                         std::to_string(steps == 0 ? 0 : steps - 1));
  }
  return pred;
}

// Accumulates d(loss)/d(params) into `grad` given d(loss)/d(prediction).
void backward(const LstmModel& model, Workspace& ws, double dpred, LstmParameters& grad) {
  const auto& layers = model.params.layers;
  const std::size_t L = layers.size();
  const std::size_t steps = ws.layers.front().x.size() / layers.front().input_width;

  const std::size_t top_units = layers.back().units;
  kernels::axpy(dpred,
                std::span<const double>(ws.layers.back().h.data() + steps * top_units, top_units),
                grad.out_w);
  grad.out_b += dpred;

  ws.dh_above.assign(steps * top_units, 0.0);
  kernels::axpy(dpred, model.params.out_w,
                std::span<double>(ws.dh_above.data() + (steps - 1) * top_units, top_units));

  for (std::size_t l = L; l-- > 0;) {
    const LstmLayer& layer = layers[l];
    LstmLayer& g = grad.layers[l];
    const LayerTrace& tr = ws.layers[l];
    const std::size_t in = layer.input_width;
    const std::size_t H = layer.units;
    ws.dh_next.assign(H, 0.0);
    ws.dc_next.assign(H, 0.0);
    ws.dz.resize(kGates * H);
    if (l > 0) ws.dx_below.assign(steps * in, 0.0);

    for (std::size_t t = steps; t-- > 0;) {
      const double* gates = tr.gates.data() + t * kGates * H;
      const double* c_prev = tr.c.data() + t * H;
      const double* tc = tr.tanh_c.data() + t * H;
      const double* dh_ext = ws.dh_above.data() + t * H;
      double* dz = ws.dz.data();
      for (std::size_t u = 0; u < H; ++u) {
        const double i = gates[gate_input * H + u];
        const double f = gates[gate_forget * H + u];
        const double o = gates[gate_output * H + u];
        const double gg = gates[gate_candidate * H + u];
        const double dh = dh_ext[u] + ws.dh_next[u];
        const double dc = ws.dc_next[u] + dh * o * (1.0 - tc[u] * tc[u]);
        dz[gate_input * H + u] = dc * gg * i * (1.0 - i);
        dz[gate_forget * H + u] = dc * c_prev[u] * f * (1.0 - f);
        dz[gate_output * H + u] = dh * tc[u] * o * (1.0 - o);
        dz[gate_candidate * H + u] = dc * i * (1.0 - gg * gg);
        ws.dc_next[u] = dc * f;
      }
      std::span<const double> dzs(dz, kGates * H);
      kernels::axpy(1.0, dzs, g.bias);
      kernels::ger_acc(dzs, std::span<const double>(tr.x.data() + t * in, in), g.w_in);
      kernels::ger_acc(dzs, std::span<const double>(tr.h.data() + t * H, H), g.w_rec);
      if (l > 0) {
        kernels::gemv_t_acc(layer.w_in, kGates * H, in, dzs,
                            std::span<double>(ws.dx_below.data() + t * in, in));
      }
      std::fill(ws.dh_next.begin(), ws.dh_next.end(), 0.0);
      kernels::gemv_t_acc(layer.w_rec, kGates * H, H, dzs, ws.dh_next);
    }
    if (l > 0) ws.dh_above.swap(ws.dx_below);
  }
}

LstmParameters shaped_like(const LstmParameters& p) {
  LstmParameters z;
  z.layers.reserve(p.layers.size());
  for (const auto& l : p.layers) {
    LstmLayer zl;
    zl.input_width = l.input_width;
    zl.units = l.units;
    zl.w_in.assign(l.w_in.size(), 0.0);
    zl.w_rec.assign(l.w_rec.size(), 0.0);
    zl.bias.assign(l.bias.size(), 0.0);
    z.layers.push_back(std::move(zl));
  }
  z.out_w.assign(p.out_w.size(), 0.0);
  return z;
}

void fill_zero(LstmParameters& p) {
  p.for_each_tensor([](std::span<double> t) { std::fill(t.begin(), t.end(), 0.0); });
}

// Calls fn(a_tensor, b_tensor) pairwise over two identically shaped sets.
template <class A, class B, class Fn>
void zip_tensors(A& a, B& b, Fn&& fn) {
  std::vector<std::span<std::conditional_t<std::is_const_v<B>, const double, double>>> bs;
  b.for_each_tensor([&](auto t) { bs.push_back(t); });
  std::size_t k = 0;
  a.for_each_tensor([&](auto t) { fn(t, bs[k++]); });
}

void check_model_shape(const LstmModel& model, std::size_t window) {
  if (model.params.layers.empty()) throw ConfigError("model has no layers");
  if (window != model.window_length) {
    throw DataError("input window has " + std::to_string(window) + " values, model expects " +
                    std::to_string(model.window_length));
  }
}

}  // namespace

LstmParameters LstmParameters::zeros(std::size_t layers, std::size_t units) {
  LstmParameters p;
  for (std::size_t l = 0; l < layers; ++l) {
    LstmLayer layer;
    layer.input_width = l == 0 ? 1 : units;
    layer.units = units;
    layer.w_in.assign(kGates * units * layer.input_width, 0.0);
    layer.w_rec.assign(kGates * units * units, 0.0);
    layer.bias.assign(kGates * units, 0.0);
    p.layers.push_back(std::move(layer));
  }
  p.out_w.assign(units, 0.0);
  return p;
}

std::size_t LstmParameters::count() const noexcept {
  std::size_t n = 0;
  for_each_tensor([&](std::span<const double> t) { n += t.size(); });
  return n;
}

bool all_finite(const LstmParameters& p) noexcept {
  bool ok = true;
  p.for_each_tensor([&](std::span<const double> t) {
    for (double v : t) ok = ok && std::isfinite(v);
  });
  return ok;
}

void TrainingConfig::validate() const {
  if (batch_size < 1) throw ConfigError("batch size must be >= 1");
  if (!(grad_clip_norm > 0.0)) throw ConfigError("gradient clip norm must be > 0");
}

LstmModel zero_model(const HyperparameterSetting& setting, std::size_t window_length, double f) {
  if (setting.layers < 1 || setting.units < 1) {
    throw ConfigError("model needs at least one layer and one unit");
  }
  LstmModel m;
  m.setting = setting;
  m.params = LstmParameters::zeros(static_cast<std::size_t>(setting.layers),
                                   static_cast<std::size_t>(setting.units));
  m.f = f;
  m.window_length = window_length;
  return m;
}

LstmModel init_model(const HyperparameterSetting& setting, std::size_t window_length, double f,
                     std::uint64_t seed, const GridSpec& grid) {
  if (!grid.contains(setting)) {
    throw ConfigError("hyperparameter setting " + to_string(setting) + " is not on the grid");
  }
  if (window_length < 1) throw ConfigError("window length must be >= 1");
  if (!(f > 0.0)) throw ConfigError("normalization constant f must be > 0");
  LstmModel m = zero_model(setting, window_length, f);

  std::uint64_t key = combine(seed, std::bit_cast<std::uint64_t>(setting.learning_rate));
  key = combine(key, static_cast<std::uint64_t>(setting.layers));
  key = combine(key, static_cast<std::uint64_t>(setting.units));
  key = combine(key, static_cast<std::uint64_t>(setting.epochs));
  CounterRng rng(key);
  const double bound = 1.0 / std::sqrt(static_cast<double>(setting.units));
  m.params.for_each_tensor([&](std::span<double> t) {
    for (double& v : t) v = rng.uniform(-bound, bound);
  });
  for (auto& layer : m.params.layers) {
    std::fill_n(layer.bias.begin() + static_cast<std::ptrdiff_t>(gate_forget * layer.units),
                layer.units, 1.0);
  }
  return m;
}

double forward(const LstmModel& model, std::span<const double> input_window) {
  check_model_shape(model, input_window.size());
  Workspace ws;
  return forward_trace(model, input_window, ws);
}

LossGradient loss_gradient(const LstmModel& model, const Sample& sample) {
  check_model_shape(model, sample.input.size());
  Workspace ws;
  LossGradient out;
  out.grad = shaped_like(model.params);
  const double pred = forward_trace(model, sample.input, ws);
  const double e = pred - sample.target;
  out.loss = e * e;
  backward(model, ws, 2.0 * e, out.grad);
  return out;
}

TrainingOutcome train(LstmModel model, std::span<const Sample> samples,
                      const TrainingConfig& config) {
  config.validate();
  if (samples.empty()) throw DataError("training needs at least one sample");
  for (const auto& s : samples) check_model_shape(model, s.input.size());

  TrainingOutcome out;
  LstmParameters grad = shaped_like(model.params);
  Workspace ws;
  const double lr = model.setting.learning_rate;
  const std::size_t n = samples.size();
  out.loss_history.reserve(static_cast<std::size_t>(std::max(model.setting.epochs, 0)));

  for (int epoch = 0; epoch < model.setting.epochs; ++epoch) {
    double epoch_loss = 0.0;
    for (std::size_t start = 0; start < n; start += config.batch_size) {
      const std::size_t end = std::min(n, start + config.batch_size);
      const double scale = 1.0 / static_cast<double>(end - start);
      fill_zero(grad);
      for (std::size_t k = start; k < end; ++k) {
        double pred = 0.0;
        try {
          pred = forward_trace(model, samples[k].input, ws);
        } catch (const NumericalError& e) {
          throw TrainingError(epoch, "diverged in epoch " + std::to_string(epoch) + ": " +
                                         e.what());
        }
        const double e = pred - samples[k].target;
        epoch_loss += e * e;
        backward(model, ws, 2.0 * e * scale, grad);
      }
      double norm2 = 0.0;
      grad.for_each_tensor([&](std::span<const double> t) { norm2 += kernels::dot(t, t); });
      const double norm = std::sqrt(norm2);
      if (!std::isfinite(norm)) {
        throw TrainingError(epoch, "non-finite gradient in epoch " + std::to_string(epoch));
      }
      const double clip = norm > config.grad_clip_norm ? config.grad_clip_norm / norm : 1.0;
      zip_tensors(model.params, grad, [&](std::span<double> w, std::span<double> g) {
        kernels::axpy(-lr * clip, g, w);
      });
    }
    epoch_loss /= static_cast<double>(n);
    if (!std::isfinite(epoch_loss)) {
      throw TrainingError(epoch, "non-finite loss in epoch " + std::to_string(epoch));
    }
    out.loss_history.push_back(epoch_loss);
  }
  if (!all_finite(model.params)) {
    throw TrainingError(model.setting.epochs, "non-finite weights after training");
  }
  out.final_loss = out.loss_history.empty() ? 0.0 : out.loss_history.back();
  out.model = std::move(model);
  return out;
}

double gradient_check(const LstmModel& model, const Sample& sample, double step) {
  const auto analytic = loss_gradient(model, sample);
  std::vector<double> ga;
  analytic.grad.for_each_tensor(
      [&](std::span<const double> t) { ga.insert(ga.end(), t.begin(), t.end()); });

  LstmModel probe = model;
  auto loss_at = [&]() {
    const double e = forward(probe, sample.input) - sample.target;
    return e * e;
  };
  double worst = 0.0;
  std::size_t k = 0;
  std::vector<std::span<double>> tensors;
  probe.params.for_each_tensor([&](std::span<double> t) { tensors.push_back(t); });
  for (auto t : tensors) {
    for (double& w : t) {
      const double saved = w;
      w = saved + step;
      const double up = loss_at();
      w = saved - step;
      const double down = loss_at();
      w = saved;
      const double fd = (up - down) / (2.0 * step);
      const double a = ga[k++];
      const double denom = std::max({std::abs(a), std::abs(fd), 1e-8});
      worst = std::max(worst, std::abs(a - fd) / denom);
    }
  }
  return worst;
}

std::vector<double> predict_series(const LstmModel& model, std::span<const double> segment) {
  const std::size_t w = model.window_length;
  if (segment.size() <= w) {
    throw DataError("segment of length " + std::to_string(segment.size()) +
                    " is too short for window " + std::to_string(w));
  }
  check_model_shape(model, w);
  Workspace ws;
  std::vector<double> out;
  out.reserve(segment.size() - w);
  for (std::size_t k = 0; k + w < segment.size(); ++k) {
    out.push_back(forward_trace(model, segment.subspan(k, w), ws) * model.f);
  }
  return out;
}

EvaluationReport evaluate(const LstmModel& model, std::span<const double> segment) {
  const auto forecast = predict_series(model, segment);
  std::vector<double> actual;
  actual.reserve(forecast.size());
  for (std::size_t k = model.window_length; k < segment.size(); ++k) {
    actual.push_back(segment[k] * model.f);
  }
  return evaluate_forecast(actual, forecast);
}

}  // namespace distpre
