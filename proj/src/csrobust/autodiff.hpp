#pragma once

#include <functional>
#include <span>
#include <string>
#include <vector>

#include "csrobust/error.hpp"

// Reverse-mode differentiation over real tensors. Complex fields travel as
// channel pairs: channel 2k holds the real part and 2k+1 the imaginary part.
namespace csr::ad {

using Shape = std::vector<int>;

std::size_t element_count(const Shape& shape);
std::string shape_string(const Shape& shape);

class Tape;

class Var {
 public:
  Var() = default;

  int id() const { return id_; }
  Tape& tape() const { return *tape_; }
  bool valid() const { return tape_ != nullptr; }

  const Shape& shape() const;
  std::size_t size() const;
  std::span<const double> value() const;
  // Empty until backward() reaches this node.
  std::span<const double> grad() const;

 private:
  friend class Tape;
  Var(Tape* tape, int id) : tape_(tape), id_(id) {}
  Tape* tape_ = nullptr;
  int id_ = -1;
};

class Tape {
 public:
  // Called with the gradient of the node's output; accumulates into parents.
  using Pullback = std::function<void(std::span<const double> out_grad, Tape& tape)>;

  Tape() = default;
  Tape(const Tape&) = delete;
  Tape& operator=(const Tape&) = delete;

  Var variable(Shape shape, std::vector<double> values);
  Var constant(Shape shape, std::vector<double> values);

  // Records an op output. Throws NumericalFailure if the value is not finite.
  Var record(const char* op, Shape shape, std::vector<double> value, std::initializer_list<Var> parents,
             Pullback pullback);

  void backward(Var loss);
  void zero_grad();
  void clear();
  std::size_t size() const { return nodes_.size(); }

  const Shape& shape(int id) const { return nodes_[id].shape; }
  std::span<const double> value(int id) const { return nodes_[id].value; }
  std::span<const double> grad(int id) const { return nodes_[id].grad; }
  bool needs_grad(int id) const { return nodes_[id].needs_grad; }
  // Gradient buffer of a node, zero-allocated on first use.
  std::span<double> grad_buffer(int id);

 private:
  struct Node {
    Shape shape;
    std::vector<double> value;
    std::vector<double> grad;
    bool needs_grad = false;
    Pullback pullback;
  };
  std::vector<Node> nodes_;
};

Var add(Var a, Var b);
Var sub(Var a, Var b);
Var mul(Var a, Var b);
Var scale(Var a, double s);

// x: [C,H,W]; weight: [O,C,k,k] with odd k; bias: [O]. Stride 1, zero padding k/2.
Var conv2d(Var x, Var weight, Var bias);
Var conv2d(Var x, Var weight);

enum class Upsample { Nearest, Bilinear };
Upsample parse_upsample(const std::string& name);
Var upsample2x(Var x, Upsample kind);
Var avg_pool2x(Var x);
Var concat_channels(Var a, Var b);

Var relu(Var x);
Var leaky_relu(Var x, double slope);
// y[c] = gamma[c] * x[c] + beta[c]
Var channel_affine(Var x, Var gamma, Var beta);

// Centered unitary 2D DFT on each complex channel pair of [2K,H,W].
Var fft2c(Var x);
Var ifft2c(Var x);
// Zeroes columns with keep[col] == 0.
Var column_mask(Var x, std::span<const std::uint8_t> keep);

inline constexpr double kMagnitudeSmoothing = 1e-12;
// [2K,H,W] -> [K,H,W], sqrt(re^2 + im^2 + delta).
Var magnitude(Var x);
// [2K,H,W] -> [1,H,W], sqrt(sum_k re^2 + im^2 + delta).
Var rss(Var x);
// -> [1]
Var sum_squares(Var x);

enum class Difference { Forward, Central };

// Numerical gradient of a scalar function, one coordinate at a time.
std::vector<double> finite_diff_gradient(const std::function<double(std::span<const double>)>& f,
                                         std::span<const double> x, double h,
                                         Difference scheme = Difference::Central);

}  // namespace csr::ad
