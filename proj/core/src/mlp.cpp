#include "ecount/mlp.hpp"

#include <cmath>

#include "ecount/error.hpp"
#include "ecount/rng.hpp"

namespace ecount {

Mlp::Mlp(std::vector<int> layer_sizes) : sizes_(std::move(layer_sizes)) {
  if (sizes_.size() < 2) throw Error("an MLP needs at least input and output layers");
  std::size_t total = 0;
  for (std::size_t l = 0; l + 1 < sizes_.size(); ++l) {
    if (sizes_[l] < 1 || sizes_[l + 1] < 1) throw Error("MLP layer sizes must be positive");
    offsets_.push_back(total);
    total += static_cast<std::size_t>(sizes_[l]) * sizes_[l + 1] + sizes_[l + 1];
  }
  params_.assign(total, 0.0);
}

std::size_t Mlp::forward_macs() const {
  std::size_t macs = 0;
  for (std::size_t l = 0; l + 1 < sizes_.size(); ++l) {
    macs += static_cast<std::size_t>(sizes_[l]) * sizes_[l + 1];
  }
  return macs;
}

void Mlp::init(std::uint64_t seed, double out_gain) {
  KeyedRng rng(seed, 0x6d6c70);
  const std::size_t layers = sizes_.size() - 1;
  for (std::size_t l = 0; l < layers; ++l) {
    const int in = sizes_[l];
    const int out = sizes_[l + 1];
    double limit = std::sqrt(6.0 / (in + out));
    if (l + 1 == layers) limit *= out_gain;
    double* w = params_.data() + offsets_[l];
    for (int i = 0; i < in * out; ++i) w[i] = (2.0 * rng.uniform() - 1.0) * limit;
    for (int j = 0; j < out; ++j) w[in * out + j] = 0.0;
  }
}

std::vector<double> Mlp::forward(std::span<const double> x, Tape* tape) const {
  if (x.size() != static_cast<std::size_t>(input_size())) {
    throw Error("MLP input has " + std::to_string(x.size()) + " values, expected " +
                std::to_string(input_size()));
  }
  std::vector<double> a(x.begin(), x.end());
  if (tape) {
    tape->activations.clear();
    tape->activations.push_back(a);
  }
  const std::size_t layers = sizes_.size() - 1;
  for (std::size_t l = 0; l < layers; ++l) {
    const int in = sizes_[l];
    const int out = sizes_[l + 1];
    const double* w = params_.data() + offsets_[l];
    const double* b = w + static_cast<std::size_t>(in) * out;
    std::vector<double> z(static_cast<std::size_t>(out));
    for (int j = 0; j < out; ++j) {
      double acc = b[j];
      const double* row = w + static_cast<std::size_t>(j) * in;
      for (int i = 0; i < in; ++i) acc += row[i] * a[static_cast<std::size_t>(i)];
      z[static_cast<std::size_t>(j)] = (l + 1 < layers) ? std::tanh(acc) : acc;
    }
    a = std::move(z);
    if (tape) tape->activations.push_back(a);
  }
  return a;
}

void Mlp::backward(const Tape& tape, std::span<const double> grad_out,
                   std::span<double> grad) const {
  const std::size_t layers = sizes_.size() - 1;
  if (tape.activations.size() != layers + 1) throw Error("MLP tape does not match network");
  if (grad_out.size() != static_cast<std::size_t>(output_size())) {
    throw Error("MLP output gradient has the wrong size");
  }
  if (grad.size() != params_.size()) throw Error("MLP gradient buffer has the wrong size");

  std::vector<double> delta(grad_out.begin(), grad_out.end());  // dL/dz of current layer
  for (std::size_t l = layers; l-- > 0;) {
    const int in = sizes_[l];
    const int out = sizes_[l + 1];
    const auto& a_in = tape.activations[l];
    const double* w = params_.data() + offsets_[l];
    double* gw = grad.data() + offsets_[l];
    double* gb = gw + static_cast<std::size_t>(in) * out;
    for (int j = 0; j < out; ++j) {
      const double d = delta[static_cast<std::size_t>(j)];
      gb[j] += d;
      double* grow = gw + static_cast<std::size_t>(j) * in;
      for (int i = 0; i < in; ++i) grow[i] += d * a_in[static_cast<std::size_t>(i)];
    }
    if (l == 0) break;
    std::vector<double> prev(static_cast<std::size_t>(in), 0.0);
    for (int j = 0; j < out; ++j) {
      const double d = delta[static_cast<std::size_t>(j)];
      const double* row = w + static_cast<std::size_t>(j) * in;
      for (int i = 0; i < in; ++i) prev[static_cast<std::size_t>(i)] += d * row[i];
    }
    // a_in is tanh output of layer l-1: d tanh = 1 - a^2.
    for (int i = 0; i < in; ++i) {
      const double ai = a_in[static_cast<std::size_t>(i)];
      prev[static_cast<std::size_t>(i)] *= 1.0 - ai * ai;
    }
    delta = std::move(prev);
  }
}

Adam::Adam(std::size_t n, double lr, double beta1, double beta2, double eps)
    : lr_(lr), beta1_(beta1), beta2_(beta2), eps_(eps), m_(n, 0.0), v_(n, 0.0) {}

void Adam::step(std::span<double> params, std::span<const double> grad) {
  if (params.size() != m_.size() || grad.size() != m_.size()) throw Error("Adam size mismatch");
  if (lr_ == 0.0) return;
  ++t_;
  const double c1 = 1.0 - std::pow(beta1_, static_cast<double>(t_));
  const double c2 = 1.0 - std::pow(beta2_, static_cast<double>(t_));
  for (std::size_t i = 0; i < params.size(); ++i) {
    m_[i] = beta1_ * m_[i] + (1.0 - beta1_) * grad[i];
    v_[i] = beta2_ * v_[i] + (1.0 - beta2_) * grad[i] * grad[i];
    params[i] -= lr_ * (m_[i] / c1) / (std::sqrt(v_[i] / c2) + eps_);
  }
}

}  // namespace ecount
