#include "tiercache/nn/tape.hpp"

#include <algorithm>
#include <cassert>
#include <cmath>

#include "tiercache/error.hpp"

namespace tiercache::nn {

ParamId ParameterSet::add(std::string name, std::size_t rows, std::size_t cols) {
  if (contains(name)) throw Error(ErrorKind::kValidation, "duplicate parameter " + name);
  names_.push_back(std::move(name));
  tensors_.emplace_back(rows, cols);
  return {tensors_.size() - 1};
}

ParamId ParameterSet::find(std::string_view name) const {
  for (std::size_t i = 0; i < names_.size(); ++i) {
    if (names_[i] == name) return {i};
  }
  throw Error(ErrorKind::kValidation, "unknown parameter " + std::string(name));
}

bool ParameterSet::contains(std::string_view name) const {
  return std::find(names_.begin(), names_.end(), name) != names_.end();
}

std::size_t ParameterSet::scalar_count() const {
  std::size_t n = 0;
  for (const auto& t : tensors_) n += t.size();
  return n;
}

ParameterSet ParameterSet::zeros_like() const {
  ParameterSet out;
  for (std::size_t i = 0; i < tensors_.size(); ++i) {
    out.add(names_[i], tensors_[i].rows, tensors_[i].cols);
  }
  return out;
}

void ParameterSet::fill(double value) {
  for (auto& t : tensors_) std::fill(t.data.begin(), t.data.end(), value);
}

namespace {

double sigmoid_of(double x) {
  if (x >= 0) return 1.0 / (1.0 + std::exp(-x));
  double e = std::exp(x);
  return e / (1.0 + e);
}

double sign_of(double x) { return x > 0 ? 1.0 : (x < 0 ? -1.0 : 0.0); }

std::vector<double>& ensure(std::vector<double>& g, std::size_t n) {
  if (g.size() != n) g.assign(n, 0.0);
  return g;
}

}  // namespace

Tape::Tape(const ParameterSet& params, ParameterSet* grads) : params_(params), grads_(grads) {
  nodes_.reserve(1024);
}

Var Tape::push(std::vector<double> value, std::function<void(Tape&, std::uint32_t)> back) {
  nodes_.push_back({std::move(value), {}, std::move(back)});
  return {static_cast<std::uint32_t>(nodes_.size() - 1)};
}

Var Tape::constant(std::vector<double> value) { return push(std::move(value), nullptr); }

Var Tape::gather_row(ParamId table, std::size_t row) {
  const Tensor& t = params_[table];
  assert(row < t.rows);
  auto first = t.data.begin() + static_cast<std::ptrdiff_t>(row * t.cols);
  std::vector<double> v(first, first + static_cast<std::ptrdiff_t>(t.cols));
  return push(std::move(v), [table, row](Tape& tape, std::uint32_t self) {
    Tensor* g = tape.param_grad(table);
    if (!g) return;
    const auto& up = tape.nodes_[self].grad;
    for (std::size_t c = 0; c < g->cols; ++c) g->data[row * g->cols + c] += up[c];
  });
}

Var Tape::param_vector(ParamId p) {
  return push(params_[p].data, [p](Tape& tape, std::uint32_t self) {
    Tensor* g = tape.param_grad(p);
    if (!g) return;
    const auto& up = tape.nodes_[self].grad;
    for (std::size_t i = 0; i < up.size(); ++i) g->data[i] += up[i];
  });
}

Var Tape::linear(ParamId weight, Var x) {
  const Tensor& w = params_[weight];
  const auto& xv = value(x);
  assert(xv.size() == w.cols);
  std::vector<double> y(w.rows, 0.0);
  for (std::size_t r = 0; r < w.rows; ++r) {
    const double* row = &w.data[r * w.cols];
    double s = 0.0;
    for (std::size_t c = 0; c < w.cols; ++c) s += row[c] * xv[c];
    y[r] = s;
  }
  return push(std::move(y), [weight, x](Tape& tape, std::uint32_t self) {
    const Tensor& w = tape.params_[weight];
    const auto& up = tape.nodes_[self].grad;
    const auto& xv = tape.nodes_[x.id].value;
    auto& gx = ensure(tape.nodes_[x.id].grad, w.cols);
    Tensor* gw = tape.param_grad(weight);
    for (std::size_t r = 0; r < w.rows; ++r) {
      const double u = up[r];
      if (u == 0.0) continue;
      const double* row = &w.data[r * w.cols];
      for (std::size_t c = 0; c < w.cols; ++c) gx[c] += row[c] * u;
      if (gw) {
        double* grow = &gw->data[r * w.cols];
        for (std::size_t c = 0; c < w.cols; ++c) grow[c] += xv[c] * u;
      }
    }
  });
}

Var Tape::affine(ParamId weight, ParamId bias, Var x) {
  return add(linear(weight, x), param_vector(bias));
}

Var Tape::concat(Var a, Var b) {
  std::vector<double> v = value(a);
  const auto& bv = value(b);
  const std::size_t na = v.size();
  v.insert(v.end(), bv.begin(), bv.end());
  return push(std::move(v), [a, b, na](Tape& tape, std::uint32_t self) {
    const auto& up = tape.nodes_[self].grad;
    auto& ga = ensure(tape.nodes_[a.id].grad, na);
    for (std::size_t i = 0; i < na; ++i) ga[i] += up[i];
    auto& gb = ensure(tape.nodes_[b.id].grad, up.size() - na);
    for (std::size_t i = na; i < up.size(); ++i) gb[i - na] += up[i];
  });
}

Var Tape::add(Var a, Var b) {
  std::vector<double> v = value(a);
  const auto& bv = value(b);
  assert(v.size() == bv.size());
  for (std::size_t i = 0; i < v.size(); ++i) v[i] += bv[i];
  return push(std::move(v), [a, b](Tape& tape, std::uint32_t self) {
    const auto& up = tape.nodes_[self].grad;
    auto& ga = ensure(tape.nodes_[a.id].grad, up.size());
    for (std::size_t i = 0; i < up.size(); ++i) ga[i] += up[i];
    auto& gb = ensure(tape.nodes_[b.id].grad, up.size());
    for (std::size_t i = 0; i < up.size(); ++i) gb[i] += up[i];
  });
}

Var Tape::mul(Var a, Var b) {
  std::vector<double> v = value(a);
  const auto& bv = value(b);
  assert(v.size() == bv.size());
  for (std::size_t i = 0; i < v.size(); ++i) v[i] *= bv[i];
  return push(std::move(v), [a, b](Tape& tape, std::uint32_t self) {
    const auto& up = tape.nodes_[self].grad;
    const auto& av = tape.nodes_[a.id].value;
    const auto& bv = tape.nodes_[b.id].value;
    auto& ga = ensure(tape.nodes_[a.id].grad, up.size());
    for (std::size_t i = 0; i < up.size(); ++i) ga[i] += up[i] * bv[i];
    auto& gb = ensure(tape.nodes_[b.id].grad, up.size());
    for (std::size_t i = 0; i < up.size(); ++i) gb[i] += up[i] * av[i];
  });
}

Var Tape::sigmoid(Var a) {
  std::vector<double> v = value(a);
  for (auto& x : v) x = sigmoid_of(x);
  return push(std::move(v), [a](Tape& tape, std::uint32_t self) {
    const auto& up = tape.nodes_[self].grad;
    const auto& y = tape.nodes_[self].value;
    auto& ga = ensure(tape.nodes_[a.id].grad, up.size());
    for (std::size_t i = 0; i < up.size(); ++i) ga[i] += up[i] * y[i] * (1.0 - y[i]);
  });
}

Var Tape::tanh(Var a) {
  std::vector<double> v = value(a);
  for (auto& x : v) x = std::tanh(x);
  return push(std::move(v), [a](Tape& tape, std::uint32_t self) {
    const auto& up = tape.nodes_[self].grad;
    const auto& y = tape.nodes_[self].value;
    auto& ga = ensure(tape.nodes_[a.id].grad, up.size());
    for (std::size_t i = 0; i < up.size(); ++i) ga[i] += up[i] * (1.0 - y[i] * y[i]);
  });
}

Var Tape::dot(Var a, Var b) {
  const auto& av = value(a);
  const auto& bv = value(b);
  assert(av.size() == bv.size());
  double s = 0.0;
  for (std::size_t i = 0; i < av.size(); ++i) s += av[i] * bv[i];
  return push({s}, [a, b](Tape& tape, std::uint32_t self) {
    const double u = tape.nodes_[self].grad[0];
    const auto& av = tape.nodes_[a.id].value;
    const auto& bv = tape.nodes_[b.id].value;
    auto& ga = ensure(tape.nodes_[a.id].grad, av.size());
    for (std::size_t i = 0; i < av.size(); ++i) ga[i] += u * bv[i];
    auto& gb = ensure(tape.nodes_[b.id].grad, bv.size());
    for (std::size_t i = 0; i < bv.size(); ++i) gb[i] += u * av[i];
  });
}

std::pair<Var, Var> Tape::lstm_cell(ParamId weight, ParamId bias, Var x, Var h, Var c) {
  Var z = affine(weight, bias, concat(x, h));
  const std::size_t n = value(c).size();
  assert(value(z).size() == 4 * n);

  // Gate activations are stored after the new cell state in one node so the
  // backward pass has everything it needs: [c'(n), i, f, g, o (4n)].
  const auto& zv = value(z);
  const auto& cv = value(c);
  std::vector<double> state(5 * n);
  for (std::size_t k = 0; k < n; ++k) {
    double i = sigmoid_of(zv[k]);
    double f = sigmoid_of(zv[n + k]);
    double g = std::tanh(zv[2 * n + k]);
    double o = sigmoid_of(zv[3 * n + k]);
    state[k] = f * cv[k] + i * g;
    state[n + k] = i;
    state[2 * n + k] = f;
    state[3 * n + k] = g;
    state[4 * n + k] = o;
  }
  Var cell = push(std::move(state), [z, c, n](Tape& tape, std::uint32_t self) {
    // Upstream grad covers c' only (the first n entries); gates carry the
    // o-path contribution written by the hidden node below.
    const auto& up = tape.nodes_[self].grad;
    const auto& s = tape.nodes_[self].value;
    const auto& cv = tape.nodes_[c.id].value;
    auto& gz = ensure(tape.nodes_[z.id].grad, 4 * n);
    auto& gc = ensure(tape.nodes_[c.id].grad, n);
    for (std::size_t k = 0; k < n; ++k) {
      double dc = up[k];
      double i = s[n + k], f = s[2 * n + k], g = s[3 * n + k], o = s[4 * n + k];
      gz[k] += dc * g * i * (1.0 - i);
      gz[n + k] += dc * cv[k] * f * (1.0 - f);
      gz[2 * n + k] += dc * i * (1.0 - g * g);
      gz[3 * n + k] += up[4 * n + k] * o * (1.0 - o);
      gc[k] += dc * f;
    }
  });

  const auto& sv = value(cell);
  std::vector<double> hv(n);
  for (std::size_t k = 0; k < n; ++k) hv[k] = sv[4 * n + k] * std::tanh(sv[k]);
  Var hidden = push(std::move(hv), [cell, n](Tape& tape, std::uint32_t self) {
    const auto& up = tape.nodes_[self].grad;
    const auto& s = tape.nodes_[cell.id].value;
    auto& gs = ensure(tape.nodes_[cell.id].grad, 5 * n);
    for (std::size_t k = 0; k < n; ++k) {
      double tc = std::tanh(s[k]);
      double o = s[4 * n + k];
      gs[k] += up[k] * o * (1.0 - tc * tc);
      gs[4 * n + k] += up[k] * tc;
    }
  });

  // Expose c' as an n-vector for the next step.
  std::vector<double> cnext(sv.begin(), sv.begin() + static_cast<std::ptrdiff_t>(n));
  Var cell_out = push(std::move(cnext), [cell, n](Tape& tape, std::uint32_t self) {
    const auto& up = tape.nodes_[self].grad;
    auto& gs = ensure(tape.nodes_[cell.id].grad, 5 * n);
    for (std::size_t k = 0; k < n; ++k) gs[k] += up[k];
  });
  return {hidden, cell_out};
}

Var Tape::attend(std::span<const Var> scores, std::span<const Var> values) {
  assert(scores.size() == values.size() && !scores.empty());
  const std::size_t m = scores.size();
  const std::size_t dim = value(values[0]).size();
  std::vector<double> weights(m);
  double mx = -INFINITY;
  for (std::size_t j = 0; j < m; ++j) mx = std::max(mx, scalar(scores[j]));
  double z = 0.0;
  for (std::size_t j = 0; j < m; ++j) z += (weights[j] = std::exp(scalar(scores[j]) - mx));
  for (auto& w : weights) w /= z;
  std::vector<double> ctx(dim, 0.0);
  for (std::size_t j = 0; j < m; ++j) {
    const auto& v = value(values[j]);
    for (std::size_t k = 0; k < dim; ++k) ctx[k] += weights[j] * v[k];
  }
  std::vector<Var> s(scores.begin(), scores.end());
  std::vector<Var> vs(values.begin(), values.end());
  return push(std::move(ctx), [s = std::move(s), vs = std::move(vs), weights = std::move(weights),
                               dim](Tape& tape, std::uint32_t self) {
    const auto& up = tape.nodes_[self].grad;
    const std::size_t m = s.size();
    // d ctx / d v_j = w_j; d ctx / d score_j = w_j (v_j - ctx).
    const auto& ctx = tape.nodes_[self].value;
    for (std::size_t j = 0; j < m; ++j) {
      const auto& v = tape.nodes_[vs[j].id].value;
      auto& gv = ensure(tape.nodes_[vs[j].id].grad, dim);
      double gs = 0.0;
      for (std::size_t k = 0; k < dim; ++k) {
        gv[k] += weights[j] * up[k];
        gs += up[k] * (v[k] - ctx[k]);
      }
      ensure(tape.nodes_[s[j].id].grad, 1)[0] += weights[j] * gs;
    }
  });
}

Var Tape::chamfer(std::span<const Var> po, std::span<const double> window, double alpha) {
  if (po.empty() || window.empty()) throw Error(ErrorKind::kValidation, "chamfer of an empty set");
  const std::size_t np = po.size(), nw = window.size();
  std::vector<double> p(np);
  for (std::size_t i = 0; i < np; ++i) p[i] = scalar(po[i]);
  std::vector<double> w(window.begin(), window.end());

  // First minimizer on ties.
  std::vector<std::size_t> nearest_w(np), nearest_p(nw);
  double fwd = 0.0, bwd = 0.0;
  for (std::size_t i = 0; i < np; ++i) {
    std::size_t best = 0;
    for (std::size_t j = 1; j < nw; ++j) {
      if (std::abs(p[i] - w[j]) < std::abs(p[i] - w[best])) best = j;
    }
    nearest_w[i] = best;
    fwd += std::abs(p[i] - w[best]);
  }
  for (std::size_t j = 0; j < nw; ++j) {
    std::size_t best = 0;
    for (std::size_t i = 1; i < np; ++i) {
      if (std::abs(w[j] - p[i]) < std::abs(w[j] - p[best])) best = i;
    }
    nearest_p[j] = best;
    bwd += std::abs(w[j] - p[best]);
  }
  double loss = alpha * fwd / static_cast<double>(np) + (1.0 - alpha) * bwd / static_cast<double>(nw);

  std::vector<Var> inputs(po.begin(), po.end());
  return push({loss}, [inputs = std::move(inputs), p = std::move(p), w = std::move(w),
                       nearest_w = std::move(nearest_w), nearest_p = std::move(nearest_p),
                       alpha](Tape& tape, std::uint32_t self) {
    const double u = tape.nodes_[self].grad[0];
    const double np = static_cast<double>(p.size()), nw = static_cast<double>(w.size());
    std::vector<double> g(p.size(), 0.0);
    for (std::size_t i = 0; i < p.size(); ++i) g[i] += alpha / np * sign_of(p[i] - w[nearest_w[i]]);
    for (std::size_t j = 0; j < w.size(); ++j) {
      std::size_t i = nearest_p[j];
      g[i] += (1.0 - alpha) / nw * sign_of(p[i] - w[j]);
    }
    for (std::size_t i = 0; i < p.size(); ++i) {
      ensure(tape.nodes_[inputs[i].id].grad, 1)[0] += u * g[i];
    }
  });
}

Var Tape::binary_cross_entropy(std::span<const Var> probs, std::span<const std::uint8_t> labels) {
  if (probs.size() != labels.size() || probs.empty()) {
    throw Error(ErrorKind::kValidation, "cross entropy needs equal, non-empty lengths");
  }
  constexpr double kEps = 1e-7;
  const double n = static_cast<double>(probs.size());
  double loss = 0.0;
  for (std::size_t i = 0; i < probs.size(); ++i) {
    double p = std::clamp(scalar(probs[i]), kEps, 1.0 - kEps);
    loss -= labels[i] ? std::log(p) : std::log(1.0 - p);
  }
  loss /= n;
  std::vector<Var> inputs(probs.begin(), probs.end());
  std::vector<std::uint8_t> ys(labels.begin(), labels.end());
  return push({loss}, [inputs = std::move(inputs), ys = std::move(ys), n](Tape& tape,
                                                                         std::uint32_t self) {
    const double u = tape.nodes_[self].grad[0];
    for (std::size_t i = 0; i < inputs.size(); ++i) {
      double p = tape.nodes_[inputs[i].id].value[0];
      if (p < kEps || p > 1.0 - kEps) continue;  // clamped: flat
      double d = ys[i] ? -1.0 / p : 1.0 / (1.0 - p);
      ensure(tape.nodes_[inputs[i].id].grad, 1)[0] += u * d / n;
    }
  });
}

Var Tape::scaled_sum(std::span<const Var> scalars, double scale) {
  double s = 0.0;
  for (auto v : scalars) s += scalar(v);
  std::vector<Var> inputs(scalars.begin(), scalars.end());
  return push({s * scale}, [inputs = std::move(inputs), scale](Tape& tape, std::uint32_t self) {
    const double u = tape.nodes_[self].grad[0];
    for (auto v : inputs) ensure(tape.nodes_[v.id].grad, 1)[0] += u * scale;
  });
}

void Tape::backward(Var root) {
  for (auto& n : nodes_) n.grad.clear();
  ensure(nodes_[root.id].grad, nodes_[root.id].value.size())[0] = 1.0;
  for (std::uint32_t id = root.id + 1; id-- > 0;) {
    Node& node = nodes_[id];
    if (node.grad.empty() || !node.back) continue;
    // Nodes that only received a partial gradient (the cell node) still need
    // a full-size buffer.
    ensure(node.grad, node.value.size());
    node.back(*this, id);
  }
}

}  // namespace tiercache::nn
