#pragma once

// Stacked LSTM regressor for one-step-ahead speed forecasting.
//
// Cell (per layer, per step, gates stacked in the order i, f, o, g):
//   i = sigmoid(W_i x + U_i h + b_i)     f = sigmoid(W_f x + U_f h + b_f)
//   o = sigmoid(W_o x + U_o h + b_o)     g = tanh(W_g x + U_g h + b_g)
//   c <- f * c + i * g                   h <- o * tanh(c)
// Layer 0 sees the scalar normalized speed; layer l > 0 sees h of layer
// l - 1. The prediction is out_w . h_top + out_b at the final step.

#include <cstddef>
#include <cstdint>
#include <span>
#include <vector>

#include "distpre/data.hpp"
#include "distpre/hyperparams.hpp"
#include "distpre/metrics.hpp"

namespace distpre {

inline constexpr int kModelFormatVersion = 1;
inline constexpr std::size_t kGates = 4;
enum Gate : std::size_t { gate_input = 0, gate_forget = 1, gate_output = 2, gate_candidate = 3 };

struct LstmLayer {
  std::size_t input_width = 0;
  std::size_t units = 0;
  std::vector<double> w_in;   // (4 * units) x input_width, row-major
  std::vector<double> w_rec;  // (4 * units) x units, row-major
  std::vector<double> bias;   // 4 * units

  friend bool operator==(const LstmLayer&, const LstmLayer&) = default;
};

struct LstmParameters {
  std::vector<LstmLayer> layers;
  std::vector<double> out_w;  // units of the top layer
  double out_b = 0.0;

  // Zero-valued parameters with the given shape.
  static LstmParameters zeros(std::size_t layers, std::size_t units);

  std::size_t count() const noexcept;

  // Visits every parameter tensor in a fixed order (layer by layer: w_in,
  // w_rec, bias; then out_w, then out_b as a 1-element span).
  template <class Fn>
  void for_each_tensor(Fn&& fn) {
    for (auto& l : layers) {
      fn(std::span<double>(l.w_in));
      fn(std::span<double>(l.w_rec));
      fn(std::span<double>(l.bias));
    }
    fn(std::span<double>(out_w));
    fn(std::span<double>(&out_b, 1));
  }
  template <class Fn>
  void for_each_tensor(Fn&& fn) const {
    for (const auto& l : layers) {
      fn(std::span<const double>(l.w_in));
      fn(std::span<const double>(l.w_rec));
      fn(std::span<const double>(l.bias));
    }
    fn(std::span<const double>(out_w));
    fn(std::span<const double>(&out_b, 1));
  }

  friend bool operator==(const LstmParameters&, const LstmParameters&) = default;
};

struct LstmModel {
  HyperparameterSetting setting;
  LstmParameters params;
  double f = 70.0;
  std::size_t window_length = 12;
  int format_version = kModelFormatVersion;

  friend bool operator==(const LstmModel&, const LstmModel&) = default;
};

struct TrainingConfig {
  std::size_t batch_size = 8;
  double grad_clip_norm = 5.0;
  std::uint64_t seed = 0;

  void validate() const;
  friend bool operator==(const TrainingConfig&, const TrainingConfig&) = default;
};

struct TrainingOutcome {
  LstmModel model;
  double final_loss = 0.0;          // mean per-sample MSE over the last epoch
  std::vector<double> loss_history;  // one entry per epoch
};

// Uniform(-1/sqrt(units), 1/sqrt(units)) weights from a counter-based
// stream keyed by (seed, setting); forget-gate biases are 1.
LstmModel init_model(const HyperparameterSetting& setting, std::size_t window_length, double f,
                     std::uint64_t seed, const GridSpec& grid = GridSpec::paper());

// Model with every weight and bias zero (a debugging fixed point).
LstmModel zero_model(const HyperparameterSetting& setting, std::size_t window_length, double f);

// Normalized one-step-ahead prediction. Throws NumericalError naming the
// layer and step if an activation becomes non-finite.
double forward(const LstmModel& model, std::span<const double> input_window);

// Squared-error loss (pred - target)^2 of one sample and its gradient with
// respect to every parameter.
struct LossGradient {
  double loss = 0.0;
  LstmParameters grad;
};
LossGradient loss_gradient(const LstmModel& model, const Sample& sample);

// Runs setting.epochs epochs of chronological mini-batch SGD on MSE with
// global gradient-norm clipping. Throws TrainingError on divergence.
TrainingOutcome train(LstmModel model, std::span<const Sample> samples,
                      const TrainingConfig& config);

// max over parameters of |analytic - fd| / max(|analytic|, |fd|, 1e-8),
// with central differences of step `step`.
double gradient_check(const LstmModel& model, const Sample& sample, double step = 1e-5);

// Teacher-forced one-step-ahead forecasts (mph) for positions
// window_length .. size-1 of the normalized segment.
std::vector<double> predict_series(const LstmModel& model, std::span<const double> segment);

EvaluationReport evaluate(const LstmModel& model, std::span<const double> segment);

bool all_finite(const LstmParameters& p) noexcept;

}  // namespace distpre
