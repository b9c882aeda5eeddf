#pragma once

#include <cstdint>
#include <functional>
#include <random>
#include <span>
#include <string>
#include <vector>

#include <Eigen/Dense>

namespace advexp::nn {

using Matrix = Eigen::MatrixXd;
using Vector = Eigen::VectorXd;

struct Parameter {
  std::string name;
  Matrix value;
};

/// Named, ordered collection of parameter tensors.
class ParameterSet {
 public:
  int add(std::string name, Eigen::Index rows, Eigen::Index cols);
  [[nodiscard]] int find(std::string_view name) const;  // -1 when absent

  [[nodiscard]] Matrix& value(int id) { return params_[static_cast<std::size_t>(id)].value; }
  [[nodiscard]] const Matrix& value(int id) const { return params_[static_cast<std::size_t>(id)].value; }
  [[nodiscard]] const std::vector<Parameter>& all() const { return params_; }
  std::vector<Parameter>& all() { return params_; }
  [[nodiscard]] std::size_t size() const { return params_.size(); }
  [[nodiscard]] std::size_t scalar_count() const;

  /// Uniform(-scale, scale) init for matrices, zeros for names ending in ".b".
  void init_uniform(std::mt19937_64& rng, double scale);
  /// FNV-1a over the raw bytes of every tensor; bit-exact change detector.
  [[nodiscard]] std::uint64_t checksum() const;

 private:
  std::vector<Parameter> params_;
};

/// Gradient buffers aligned with a ParameterSet.
class Gradients {
 public:
  Gradients() = default;
  explicit Gradients(const ParameterSet& params);
  void zero();
  void add(const Gradients& other);
  void scale(double s);
  [[nodiscard]] double norm() const;
  Matrix& operator[](int id) { return grads_[static_cast<std::size_t>(id)]; }
  const Matrix& operator[](int id) const { return grads_[static_cast<std::size_t>(id)]; }
  [[nodiscard]] std::size_t size() const { return grads_.size(); }

 private:
  std::vector<Matrix> grads_;
};

/// A parameter tensor as seen by the tape; `grad` is null for frozen tensors.
struct ParamRef {
  const Matrix* value = nullptr;
  Matrix* grad = nullptr;
};

inline ParamRef frozen(const ParameterSet& p, int id) { return {&p.value(id), nullptr}; }
inline ParamRef trainable(const ParameterSet& p, Gradients& g, int id) { return {&p.value(id), &g[id]}; }

struct GruParams {
  ParamRef w;  // 3H x in: update, reset, candidate blocks
  ParamRef u;  // 3H x H
  ParamRef b;  // 3H x 1
};

/// Forward kernels shared by the tape and the inference fast path.
struct GruCache {
  Vector z, r, n, uh_n;
};
Vector gru_step(const Matrix& w, const Matrix& u, const Matrix& b, const Vector& x, const Vector& h,
                GruCache* cache = nullptr);
double log_sum_exp(const Vector& v);

struct Var {
  int id = -1;
};

/// Single-use reverse-mode tape over column vectors.
class Tape {
 public:
  Var constant(Vector v);
  [[nodiscard]] const Vector& value(Var v) const { return nodes_[static_cast<std::size_t>(v.id)].value; }
  [[nodiscard]] double scalar(Var v) const { return value(v)(0); }

  Var embed(ParamRef table, int column);
  Var linear(ParamRef w, ParamRef b, Var x);
  Var gru(const GruParams& p, Var x, Var h);
  Var concat(std::initializer_list<Var> parts);
  Var concat(std::span<const Var> parts);
  Var slice(Var x, Eigen::Index start, Eigen::Index len);
  Var tanh(Var x);
  Var add(Var a, Var b);
  Var scale(Var a, double s);
  /// Weighted sum of scalar nodes.
  Var weighted_sum(std::initializer_list<std::pair<Var, double>> terms);
  Var weighted_sum(std::span<const std::pair<Var, double>> terms);
  /// -log softmax(W h + b)[target]; W is V x H.
  Var softmax_nll(ParamRef w, ParamRef b, Var h, int target);
  /// -log softmax(logits)[target].
  Var nll(Var logits, int target);
  /// Closed-form KL(N(mu_q, e^lv_q) || N(mu_p, e^lv_p)) summed over dimensions.
  Var kl_diag(Var mu_q, Var lv_q, Var mu_p, Var lv_p);
  /// mu + exp(lv / 2) * eps.
  Var reparam(Var mu, Var lv, const Vector& eps);
  /// log N(z; mu, diag(exp(lv))) with z treated as a constant.
  Var gaussian_logpdf(Var mu, Var lv, const Vector& z);
  /// max(0, x) elementwise.
  Var relu(Var x);
  /// Elementwise max over equally sized vectors; ties go to the earliest.
  Var max_pool(std::span<const Var> xs);

  /// Accumulates d(loss)/d(param) into every trainable ParamRef.
  void backward(Var loss);

 private:
  struct Node {
    Vector value;
    Vector grad;
    std::function<void(Tape&, const Vector&)> backprop;
  };
  Var push(Vector value, std::function<void(Tape&, const Vector&)> backprop = {});
  void accumulate(Var v, const Vector& g);

  std::vector<Node> nodes_;
};

/// Adam with optional global-norm clipping.
class Adam {
 public:
  explicit Adam(double lr = 1e-3, double beta1 = 0.9, double beta2 = 0.999, double eps = 1e-8)
      : lr_(lr), beta1_(beta1), beta2_(beta2), eps_(eps) {}
  void step(ParameterSet& params, const Gradients& grads, double clip_norm = 0.0);
  void set_lr(double lr) { lr_ = lr; }
  [[nodiscard]] double lr() const { return lr_; }

 private:
  double lr_, beta1_, beta2_, eps_;
  long t_ = 0;
  std::vector<Matrix> m_, v_;
};

Vector standard_normal(std::mt19937_64& rng, Eigen::Index n);
Vector softmax(const Vector& logits);

}  // namespace advexp::nn
