#pragma once

#include <cstdint>
#include <span>
#include <vector>

namespace ecount {

/// Fully connected network with tanh hidden layers and a linear output layer.
/// Parameters live in one flat buffer: for each layer, the weight matrix
/// (out x in, row-major) followed by the bias vector.
class Mlp {
 public:
  /// Intermediate activations kept for backprop.
  struct Tape {
    std::vector<std::vector<double>> activations;  ///< input, hidden..., output
  };

  Mlp() = default;
  explicit Mlp(std::vector<int> layer_sizes);

  const std::vector<int>& layer_sizes() const { return sizes_; }
  int input_size() const { return sizes_.front(); }
  int output_size() const { return sizes_.back(); }
  std::size_t param_count() const { return params_.size(); }
  /// Multiply-adds of one forward pass.
  std::size_t forward_macs() const;

  std::span<double> params() { return params_; }
  std::span<const double> params() const { return params_; }

  /// Scaled uniform (Glorot) weights, zero biases; the output layer is scaled by out_gain.
  void init(std::uint64_t seed, double out_gain = 1.0);

  std::vector<double> forward(std::span<const double> x, Tape* tape = nullptr) const;
  /// Accumulates dL/dparams into grad given dL/doutput at the taped pass.
  void backward(const Tape& tape, std::span<const double> grad_out, std::span<double> grad) const;

 private:
  std::size_t layer_offset(std::size_t layer) const { return offsets_[layer]; }

  std::vector<int> sizes_;
  std::vector<std::size_t> offsets_;
  std::vector<double> params_;
};

/// Adam optimizer over a flat parameter buffer.
class Adam {
 public:
  Adam() = default;
  explicit Adam(std::size_t n, double lr, double beta1 = 0.9, double beta2 = 0.999,
                double eps = 1e-8);

  void step(std::span<double> params, std::span<const double> grad);
  double learning_rate() const { return lr_; }

 private:
  double lr_ = 0.0, beta1_ = 0.9, beta2_ = 0.999, eps_ = 1e-8;
  std::int64_t t_ = 0;
  std::vector<double> m_, v_;
};

}  // namespace ecount
