#include "advexp/nn.hpp"

#include <cmath>
#include <cstring>
#include <numbers>
#include <stdexcept>

namespace advexp::nn {

// ---------------------------------------------------------------------------
// Parameters

int ParameterSet::add(std::string name, Eigen::Index rows, Eigen::Index cols) {
  if (find(name) >= 0) throw std::invalid_argument("duplicate parameter " + name);
  params_.push_back({std::move(name), Matrix::Zero(rows, cols)});
  return static_cast<int>(params_.size()) - 1;
}

int ParameterSet::find(std::string_view name) const {
  for (std::size_t i = 0; i < params_.size(); ++i)
    if (params_[i].name == name) return static_cast<int>(i);
  return -1;
}

std::size_t ParameterSet::scalar_count() const {
  std::size_t n = 0;
  for (const auto& p : params_) n += static_cast<std::size_t>(p.value.size());
  return n;
}

void ParameterSet::init_uniform(std::mt19937_64& rng, double scale) {
  std::uniform_real_distribution<double> u(-scale, scale);
  for (auto& p : params_) {
    if (p.name.size() >= 2 && p.name.compare(p.name.size() - 2, 2, ".b") == 0) {
      p.value.setZero();
      continue;
    }
    for (Eigen::Index i = 0; i < p.value.size(); ++i) p.value.data()[i] = u(rng);
  }
}

std::uint64_t ParameterSet::checksum() const {
  std::uint64_t h = 1469598103934665603ull;
  for (const auto& p : params_) {
    const auto* bytes = reinterpret_cast<const unsigned char*>(p.value.data());
    for (std::size_t i = 0; i < static_cast<std::size_t>(p.value.size()) * sizeof(double); ++i) {
      h ^= bytes[i];
      h *= 1099511628211ull;
    }
  }
  return h;
}

Gradients::Gradients(const ParameterSet& params) {
  grads_.reserve(params.size());
  for (const auto& p : params.all()) grads_.push_back(Matrix::Zero(p.value.rows(), p.value.cols()));
}

void Gradients::zero() {
  for (auto& g : grads_) g.setZero();
}

void Gradients::add(const Gradients& other) {
  for (std::size_t i = 0; i < grads_.size(); ++i) grads_[i] += other.grads_[i];
}

void Gradients::scale(double s) {
  for (auto& g : grads_) g *= s;
}

double Gradients::norm() const {
  double s = 0;
  for (const auto& g : grads_) s += g.squaredNorm();
  return std::sqrt(s);
}

// ---------------------------------------------------------------------------
// Kernels

namespace {
inline double sigmoid(double x) { return 1.0 / (1.0 + std::exp(-x)); }
}  // namespace

Vector gru_step(const Matrix& w, const Matrix& u, const Matrix& b, const Vector& x, const Vector& h,
                GruCache* cache) {
  const Eigen::Index H = h.size();
  Vector wx = w * x + b.col(0);
  Vector uh = u * h;
  Vector z = (wx.segment(0, H) + uh.segment(0, H)).unaryExpr(&sigmoid);
  Vector r = (wx.segment(H, H) + uh.segment(H, H)).unaryExpr(&sigmoid);
  Vector n = (wx.segment(2 * H, H).array() + r.array() * uh.segment(2 * H, H).array()).tanh().matrix();
  Vector out = ((1.0 - z.array()) * n.array() + z.array() * h.array()).matrix();
  if (cache != nullptr) {
    cache->z = std::move(z);
    cache->r = std::move(r);
    cache->n = std::move(n);
    cache->uh_n = uh.segment(2 * H, H);
  }
  return out;
}

double log_sum_exp(const Vector& v) {
  const double m = v.maxCoeff();
  return m + std::log((v.array() - m).exp().sum());
}

Vector softmax(const Vector& logits) {
  Vector e = (logits.array() - logits.maxCoeff()).exp().matrix();
  return e / e.sum();
}

Vector standard_normal(std::mt19937_64& rng, Eigen::Index n) {
  std::normal_distribution<double> nd(0.0, 1.0);
  Vector v(n);
  for (Eigen::Index i = 0; i < n; ++i) v(i) = nd(rng);
  return v;
}

// ---------------------------------------------------------------------------
// Tape

Var Tape::push(Vector value, std::function<void(Tape&, const Vector&)> backprop) {
  Node n;
  n.grad = Vector::Zero(value.size());
  n.value = std::move(value);
  n.backprop = std::move(backprop);
  nodes_.push_back(std::move(n));
  return Var{static_cast<int>(nodes_.size()) - 1};
}

void Tape::accumulate(Var v, const Vector& g) { nodes_[static_cast<std::size_t>(v.id)].grad += g; }

Var Tape::constant(Vector v) { return push(std::move(v)); }

Var Tape::embed(ParamRef table, int column) {
  return push(table.value->col(column), [table, column](Tape&, const Vector& g) {
    if (table.grad) table.grad->col(column) += g;
  });
}

Var Tape::linear(ParamRef w, ParamRef b, Var x) {
  Vector out = (*w.value) * value(x);
  if (b.value) out += b.value->col(0);
  return push(std::move(out), [w, b, x](Tape& t, const Vector& g) {
    const Vector& xv = t.value(x);
    if (w.grad) w.grad->noalias() += g * xv.transpose();
    if (b.grad) b.grad->col(0) += g;
    t.accumulate(x, w.value->transpose() * g);
  });
}

Var Tape::gru(const GruParams& p, Var x, Var h) {
  GruCache cache;
  Vector out = gru_step(*p.w.value, *p.u.value, *p.b.value, value(x), value(h), &cache);
  return push(std::move(out), [p, x, h, c = std::move(cache)](Tape& t, const Vector& g) {
    const Vector& xv = t.value(x);
    const Vector& hv = t.value(h);
    const Eigen::Index H = hv.size();
    Vector dn = (g.array() * (1.0 - c.z.array())).matrix();
    Vector dz = (g.array() * (hv - c.n).array()).matrix();
    Vector dh = (g.array() * c.z.array()).matrix();
    Vector dan = (dn.array() * (1.0 - c.n.array().square())).matrix();
    Vector dr = (dan.array() * c.uh_n.array()).matrix();
    Vector dwx(3 * H), duh(3 * H);
    dwx.segment(0, H) = (dz.array() * c.z.array() * (1.0 - c.z.array())).matrix();
    dwx.segment(H, H) = (dr.array() * c.r.array() * (1.0 - c.r.array())).matrix();
    dwx.segment(2 * H, H) = dan;
    duh.segment(0, 2 * H) = dwx.segment(0, 2 * H);
    duh.segment(2 * H, H) = (dan.array() * c.r.array()).matrix();
    if (p.w.grad) p.w.grad->noalias() += dwx * xv.transpose();
    if (p.b.grad) p.b.grad->col(0) += dwx;
    if (p.u.grad) p.u.grad->noalias() += duh * hv.transpose();
    t.accumulate(x, p.w.value->transpose() * dwx);
    dh.noalias() += p.u.value->transpose() * duh;
    t.accumulate(h, dh);
  });
}

Var Tape::concat(std::initializer_list<Var> parts) {
  return concat(std::span<const Var>(parts.begin(), parts.size()));
}

Var Tape::concat(std::span<const Var> parts) {
  Eigen::Index n = 0;
  for (auto p : parts) n += value(p).size();
  Vector out(n);
  std::vector<std::pair<Var, Eigen::Index>> layout;
  Eigen::Index at = 0;
  for (auto p : parts) {
    const auto& v = value(p);
    out.segment(at, v.size()) = v;
    layout.emplace_back(p, at);
    at += v.size();
  }
  return push(std::move(out), [layout](Tape& t, const Vector& g) {
    for (const auto& [v, off] : layout) t.accumulate(v, g.segment(off, t.value(v).size()));
  });
}

Var Tape::slice(Var x, Eigen::Index start, Eigen::Index len) {
  return push(value(x).segment(start, len), [x, start, len](Tape& t, const Vector& g) {
    Vector full = Vector::Zero(t.value(x).size());
    full.segment(start, len) = g;
    t.accumulate(x, full);
  });
}

Var Tape::tanh(Var x) {
  Vector out = value(x).array().tanh().matrix();
  return push(out, [x, out](Tape& t, const Vector& g) {
    t.accumulate(x, (g.array() * (1.0 - out.array().square())).matrix());
  });
}

Var Tape::relu(Var x) {
  Vector out = value(x).cwiseMax(0.0);
  return push(out, [x](Tape& t, const Vector& g) {
    t.accumulate(x, (t.value(x).array() > 0.0).select(g, 0.0).matrix());
  });
}

Var Tape::max_pool(std::span<const Var> xs) {
  if (xs.empty()) throw std::invalid_argument("max_pool of nothing");
  const Eigen::Index n = value(xs[0]).size();
  Vector out = value(xs[0]);
  std::vector<Var> arg(static_cast<std::size_t>(n), xs[0]);
  for (std::size_t k = 1; k < xs.size(); ++k) {
    const auto& v = value(xs[k]);
    if (v.size() != n) throw std::invalid_argument("max_pool size mismatch");
    for (Eigen::Index i = 0; i < n; ++i)
      if (v(i) > out(i)) {
        out(i) = v(i);
        arg[static_cast<std::size_t>(i)] = xs[k];
      }
  }
  return push(std::move(out), [arg](Tape& t, const Vector& g) {
    for (std::size_t i = 0; i < arg.size(); ++i) {
      Vector gi = Vector::Zero(t.value(arg[i]).size());
      gi(static_cast<Eigen::Index>(i)) = g(static_cast<Eigen::Index>(i));
      t.accumulate(arg[i], gi);
    }
  });
}

Var Tape::add(Var a, Var b) {
  return push(value(a) + value(b), [a, b](Tape& t, const Vector& g) {
    t.accumulate(a, g);
    t.accumulate(b, g);
  });
}

Var Tape::scale(Var a, double s) {
  return push(value(a) * s, [a, s](Tape& t, const Vector& g) { t.accumulate(a, g * s); });
}

Var Tape::weighted_sum(std::initializer_list<std::pair<Var, double>> terms) {
  return weighted_sum(std::span<const std::pair<Var, double>>(terms.begin(), terms.size()));
}

Var Tape::weighted_sum(std::span<const std::pair<Var, double>> terms) {
  double total = 0;
  std::vector<std::pair<Var, double>> list(terms.begin(), terms.end());
  for (const auto& [v, w] : list) total += w * scalar(v);
  return push(Vector::Constant(1, total), [list](Tape& t, const Vector& g) {
    for (const auto& [v, w] : list) t.accumulate(v, Vector::Constant(1, g(0) * w));
  });
}

Var Tape::softmax_nll(ParamRef w, ParamRef b, Var h, int target) {
  Vector logits = (*w.value) * value(h);
  if (b.value) logits += b.value->col(0);
  const double lse = log_sum_exp(logits);
  Vector probs = (logits.array() - lse).exp().matrix();
  return push(Vector::Constant(1, lse - logits(target)), [w, b, h, target, probs](Tape& t, const Vector& g) {
    Vector d = probs * g(0);
    d(target) -= g(0);
    if (w.grad) w.grad->noalias() += d * t.value(h).transpose();
    if (b.grad) b.grad->col(0) += d;
    t.accumulate(h, w.value->transpose() * d);
  });
}

Var Tape::nll(Var logits, int target) {
  const Vector& l = value(logits);
  const double lse = log_sum_exp(l);
  Vector probs = (l.array() - lse).exp().matrix();
  return push(Vector::Constant(1, lse - l(target)), [logits, target, probs](Tape& t, const Vector& g) {
    Vector d = probs * g(0);
    d(target) -= g(0);
    t.accumulate(logits, d);
  });
}

Var Tape::kl_diag(Var mu_q, Var lv_q, Var mu_p, Var lv_p) {
  const Vector& mq = value(mu_q);
  const Vector& vq = value(lv_q);
  const Vector& mp = value(mu_p);
  const Vector& vp = value(lv_p);
  if (mq.size() != mp.size() || vq.size() != vp.size() || mq.size() != vq.size())
    throw std::invalid_argument("kl_diag: dimension mismatch");
  // 0.5 * sum(lv_p - lv_q + (e^lv_q + (mu_q - mu_p)^2) / e^lv_p - 1)
  Vector inv_p = (-vp.array()).exp().matrix();
  Vector diff = mq - mp;
  // e^(lv_q - lv_p) rather than e^lv_q / e^lv_p: exactly zero when q == p.
  const Vector ratio = (vq - vp).array().exp().matrix();
  double kl = 0.5 * (vp.array() - vq.array() + ratio.array() + diff.array().square() * inv_p.array() - 1.0).sum();
  return push(Vector::Constant(1, kl), [=](Tape& t, const Vector& g) {
    const double s = g(0);
    t.accumulate(mu_q, (s * diff.array() * inv_p.array()).matrix());
    t.accumulate(mu_p, (-s * diff.array() * inv_p.array()).matrix());
    t.accumulate(lv_q, (0.5 * s * (ratio.array() - 1.0)).matrix());
    t.accumulate(lv_p, (0.5 * s * (1.0 - (ratio.array() + diff.array().square() * inv_p.array()))).matrix());
  });
}

Var Tape::reparam(Var mu, Var lv, const Vector& eps) {
  Vector sigma = (0.5 * value(lv).array()).exp().matrix();
  Vector out = value(mu) + (sigma.array() * eps.array()).matrix();
  return push(std::move(out), [mu, lv, eps, sigma](Tape& t, const Vector& g) {
    t.accumulate(mu, g);
    t.accumulate(lv, (0.5 * g.array() * sigma.array() * eps.array()).matrix());
  });
}

Var Tape::gaussian_logpdf(Var mu, Var lv, const Vector& z) {
  const Vector& m = value(mu);
  const Vector& v = value(lv);
  Vector inv = (-v.array()).exp().matrix();
  Vector diff = z - m;
  const double k = static_cast<double>(z.size());
  double lp = -0.5 * ((diff.array().square() * inv.array()).sum() + v.sum() + k * std::log(2.0 * std::numbers::pi));
  return push(Vector::Constant(1, lp), [mu, lv, inv, diff](Tape& t, const Vector& g) {
    const double s = g(0);
    t.accumulate(mu, (s * diff.array() * inv.array()).matrix());
    t.accumulate(lv, (0.5 * s * (diff.array().square() * inv.array() - 1.0)).matrix());
  });
}

void Tape::backward(Var loss) {
  nodes_[static_cast<std::size_t>(loss.id)].grad.setOnes();
  for (int i = loss.id; i >= 0; --i) {
    auto& n = nodes_[static_cast<std::size_t>(i)];
    if (n.backprop && !n.grad.isZero(0.0)) n.backprop(*this, n.grad);
  }
}

// ---------------------------------------------------------------------------
// Adam

void Adam::step(ParameterSet& params, const Gradients& grads, double clip_norm) {
  if (m_.empty()) {
    for (const auto& p : params.all()) {
      m_.push_back(Matrix::Zero(p.value.rows(), p.value.cols()));
      v_.push_back(Matrix::Zero(p.value.rows(), p.value.cols()));
    }
  }
  double factor = 1.0;
  if (clip_norm > 0) {
    const double n = grads.norm();
    if (n > clip_norm) factor = clip_norm / n;
  }
  ++t_;
  const double c1 = 1.0 - std::pow(beta1_, static_cast<double>(t_));
  const double c2 = 1.0 - std::pow(beta2_, static_cast<double>(t_));
  for (std::size_t i = 0; i < params.size(); ++i) {
    const Matrix g = grads[static_cast<int>(i)] * factor;
    m_[i] = beta1_ * m_[i] + (1.0 - beta1_) * g;
    v_[i] = beta2_ * v_[i] + (1.0 - beta2_) * g.cwiseProduct(g);
    auto& w = params.value(static_cast<int>(i));
    w.array() -= lr_ * (m_[i].array() / c1) / ((v_[i].array() / c2).sqrt() + eps_);
  }
}

}  // namespace advexp::nn
