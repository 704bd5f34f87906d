#ifndef PGNN_AUTODIFF_HPP
#define PGNN_AUTODIFF_HPP

#include <armadillo>
#include <cmath>
#include <functional>
#include <stdexcept>
#include <vector>

#include "pgnn/errors.hpp"

// Reverse-mode differentiation over dense real matrices. A Tape records a
// per-sample computation graph; nodes are appended in evaluation order, so
// walking them backwards is already a topological sweep. Hidden edge states
// are stored flat as (N*K) x J with row r = k*N + n (antenna index fastest),
// which makes a feature column reinterpretable as the column-major N x K
// matrix of that feature.

namespace pgnn::ad {

struct Var {
  int idx = -1;
  bool valid() const { return idx >= 0; }
};

class Tape {
 public:
  explicit Tape(bool recording = true) : recording_(recording) {}

  const arma::mat& value(Var v) const { return nodes_[check(v)].value; }
  const arma::mat& grad(Var v) const { return nodes_[check(v)].grad; }
  double scalar(Var v) const {
    const arma::mat& m = value(v);
    if (m.n_elem != 1) throw std::invalid_argument("tape: scalar() on non 1x1 value");
    return m(0, 0);
  }

  Var constant(arma::mat v) { return push(std::move(v), false, {}); }
  Var param(arma::mat v) { return push(std::move(v), true, {}); }

  Var add(Var a, Var b) {
    same_shape(a, b, "add");
    arma::mat out = value(a) + value(b);
    return push(std::move(out), needs(a) || needs(b), [a, b](Tape& t, const arma::mat& g) {
      t.accumulate(a, g);
      t.accumulate(b, g);
    });
  }

  Var sub(Var a, Var b) {
    same_shape(a, b, "sub");
    arma::mat out = value(a) - value(b);
    return push(std::move(out), needs(a) || needs(b), [a, b](Tape& t, const arma::mat& g) {
      t.accumulate(a, g);
      t.accumulate(b, arma::mat(-g));
    });
  }

  Var neg(Var a) { return scale(a, -1.0); }

  Var scale(Var a, double c) {
    arma::mat out = value(a) * c;
    return push(std::move(out), needs(a),
                [a, c](Tape& t, const arma::mat& g) { t.accumulate(a, arma::mat(g * c)); });
  }

  Var add_const(Var a, double c) {
    arma::mat out = value(a) + c;
    return push(std::move(out), needs(a),
                [a](Tape& t, const arma::mat& g) { t.accumulate(a, g); });
  }

  Var mul(Var a, Var b) {  // elementwise
    same_shape(a, b, "mul");
    arma::mat out = value(a) % value(b);
    return push(std::move(out), needs(a) || needs(b), [a, b](Tape& t, const arma::mat& g) {
      t.accumulate(a, arma::mat(g % t.value(b)));
      t.accumulate(b, arma::mat(g % t.value(a)));
    });
  }

  Var div(Var a, Var b) {  // elementwise
    same_shape(a, b, "div");
    arma::mat out = value(a) / value(b);
    return push(std::move(out), needs(a) || needs(b), [a, b](Tape& t, const arma::mat& g) {
      t.accumulate(a, arma::mat(g / t.value(b)));
      t.accumulate(b, arma::mat(-g % t.value(a) / arma::square(t.value(b))));
    });
  }

  Var mm(Var a, Var b) {  // A * B
    if (value(a).n_cols != value(b).n_rows) throw std::invalid_argument("tape: mm shape mismatch");
    arma::mat out = value(a) * value(b);
    return push(std::move(out), needs(a) || needs(b), [a, b](Tape& t, const arma::mat& g) {
      t.accumulate(a, arma::mat(g * t.value(b).t()));
      t.accumulate(b, arma::mat(t.value(a).t() * g));
    });
  }

  Var mm_tn(Var a, Var b) {  // A^T * B
    if (value(a).n_rows != value(b).n_rows) throw std::invalid_argument("tape: mm_tn shape mismatch");
    arma::mat out = value(a).t() * value(b);
    return push(std::move(out), needs(a) || needs(b), [a, b](Tape& t, const arma::mat& g) {
      t.accumulate(a, arma::mat(t.value(b) * g.t()));
      t.accumulate(b, arma::mat(t.value(a) * g));
    });
  }

  Var mm_nt(Var a, Var b) {  // A * B^T
    if (value(a).n_cols != value(b).n_cols) throw std::invalid_argument("tape: mm_nt shape mismatch");
    arma::mat out = value(a) * value(b).t();
    return push(std::move(out), needs(a) || needs(b), [a, b](Tape& t, const arma::mat& g) {
      t.accumulate(a, arma::mat(g * t.value(b)));
      t.accumulate(b, arma::mat(g.t() * t.value(a)));
    });
  }

  Var sum_all(Var a) {
    arma::mat out(1, 1);
    out(0, 0) = arma::accu(value(a));
    return push(std::move(out), needs(a), [a](Tape& t, const arma::mat& g) {
      t.accumulate(a, arma::mat(t.value(a).n_rows, t.value(a).n_cols, arma::fill::value(g(0, 0))));
    });
  }

  Var sqrt_op(Var a) {
    arma::mat out = arma::sqrt(value(a));
    const int self = static_cast<int>(nodes_.size());
    return push(std::move(out), needs(a), [a, self](Tape& t, const arma::mat& g) {
      t.accumulate(a, arma::mat(g / (2.0 * t.nodes_[self].value)));
    });
  }

  Var log_op(Var a) {
    arma::mat out = arma::log(value(a));
    return push(std::move(out), needs(a), [a](Tape& t, const arma::mat& g) {
      t.accumulate(a, arma::mat(g / t.value(a)));
    });
  }

  Var recip(Var a) {
    arma::mat out = 1.0 / value(a);
    return push(std::move(out), needs(a), [a](Tape& t, const arma::mat& g) {
      t.accumulate(a, arma::mat(-g / arma::square(t.value(a))));
    });
  }

  Var relu(Var a) {
    arma::mat out = arma::clamp(value(a), 0.0, arma::datum::inf);
    return push(std::move(out), needs(a), [a](Tape& t, const arma::mat& g) {
      arma::mat mask = arma::conv_to<arma::mat>::from(t.value(a) > 0.0);
      t.accumulate(a, arma::mat(g % mask));
    });
  }

  Var softplus(Var a) {
    // log(1 + e^x), evaluated stably on both tails
    arma::mat out = value(a);
    out.transform([](double x) { return x > 0.0 ? x + std::log1p(std::exp(-x)) : std::log1p(std::exp(x)); });
    return push(std::move(out), needs(a), [a](Tape& t, const arma::mat& g) {
      arma::mat s = t.value(a);
      s.transform([](double x) { return 1.0 / (1.0 + std::exp(-x)); });
      t.accumulate(a, arma::mat(g % s));
    });
  }

  Var scalar_mul(Var a, Var s) {  // broadcast multiply by a 1x1 value
    if (value(s).n_elem != 1) throw std::invalid_argument("tape: scalar_mul needs a 1x1 scale");
    arma::mat out = value(a) * value(s)(0, 0);
    return push(std::move(out), needs(a) || needs(s), [a, s](Tape& t, const arma::mat& g) {
      t.accumulate(a, arma::mat(g * t.value(s)(0, 0)));
      arma::mat gs(1, 1);
      gs(0, 0) = arma::accu(g % t.value(a));
      t.accumulate(s, gs);
    });
  }

  Var extract_cols(Var a, arma::uword j0, arma::uword width) {
    if (j0 + width > value(a).n_cols) throw std::invalid_argument("tape: extract_cols out of range");
    arma::mat out = value(a).cols(j0, j0 + width - 1);
    return push(std::move(out), needs(a), [a, j0, width](Tape& t, const arma::mat& g) {
      arma::mat full(t.value(a).n_rows, t.value(a).n_cols, arma::fill::zeros);
      full.cols(j0, j0 + width - 1) = g;
      t.accumulate(a, full);
    });
  }

  Var extract_rows(Var a, arma::uword r0, arma::uword height) {
    if (r0 + height > value(a).n_rows) throw std::invalid_argument("tape: extract_rows out of range");
    arma::mat out = value(a).rows(r0, r0 + height - 1);
    return push(std::move(out), needs(a), [a, r0, height](Tape& t, const arma::mat& g) {
      arma::mat full(t.value(a).n_rows, t.value(a).n_cols, arma::fill::zeros);
      full.rows(r0, r0 + height - 1) = g;
      t.accumulate(a, full);
    });
  }

  Var hcat(const std::vector<Var>& parts) {
    if (parts.empty()) throw std::invalid_argument("tape: hcat of nothing");
    arma::uword cols = 0;
    bool any = false;
    for (Var p : parts) {
      cols += value(p).n_cols;
      any = any || needs(p);
    }
    arma::mat out(value(parts.front()).n_rows, cols);
    arma::uword at = 0;
    for (Var p : parts) {
      out.cols(at, at + value(p).n_cols - 1) = value(p);
      at += value(p).n_cols;
    }
    std::vector<Var> ps = parts;
    return push(std::move(out), any, [ps](Tape& t, const arma::mat& g) {
      arma::uword at = 0;
      for (Var p : ps) {
        const arma::uword w = t.value(p).n_cols;
        t.accumulate(p, arma::mat(g.cols(at, at + w - 1)));
        at += w;
      }
    });
  }

  Var vcat(const std::vector<Var>& parts) {
    if (parts.empty()) throw std::invalid_argument("tape: vcat of nothing");
    arma::uword rows = 0;
    bool any = false;
    for (Var p : parts) {
      rows += value(p).n_rows;
      any = any || needs(p);
    }
    arma::mat out(rows, value(parts.front()).n_cols);
    arma::uword at = 0;
    for (Var p : parts) {
      out.rows(at, at + value(p).n_rows - 1) = value(p);
      at += value(p).n_rows;
    }
    std::vector<Var> ps = parts;
    return push(std::move(out), any, [ps](Tape& t, const arma::mat& g) {
      arma::uword at = 0;
      for (Var p : ps) {
        const arma::uword h = t.value(p).n_rows;
        t.accumulate(p, arma::mat(g.rows(at, at + h - 1)));
        at += h;
      }
    });
  }

  // column-major reinterpretation; free of data movement semantics
  Var reshape(Var a, arma::uword rows, arma::uword cols) {
    if (rows * cols != value(a).n_elem) throw std::invalid_argument("tape: reshape element count mismatch");
    arma::mat out = arma::reshape(value(a), rows, cols);
    return push(std::move(out), needs(a), [a](Tape& t, const arma::mat& g) {
      t.accumulate(a, arma::mat(arma::reshape(g, t.value(a).n_rows, t.value(a).n_cols)));
    });
  }

  // ---- structured pooling over the flat edge layout (rows r = k*N + n) ----
  // Sums include the edge itself; self-excluded variants are formed by the
  // caller as pool(x) - x. These linear maps are self-adjoint, so the
  // backward pass reuses the forward kernel.

  Var pool_antennas(Var e, arma::uword N, arma::uword K) {  // sum over n for fixed k
    check_edge_shape(e, N, K, "pool_antennas");
    arma::mat out = pool_antennas_kernel(value(e), N, K);
    return push(std::move(out), needs(e), [e, N, K](Tape& t, const arma::mat& g) {
      t.accumulate(e, pool_antennas_kernel(g, N, K));
    });
  }

  Var pool_users(Var e, arma::uword N, arma::uword K) {  // sum over k for fixed n
    check_edge_shape(e, N, K, "pool_users");
    arma::mat out = pool_users_kernel(value(e), N, K);
    return push(std::move(out), needs(e), [e, N, K](Tape& t, const arma::mat& g) {
      t.accumulate(e, pool_users_kernel(g, N, K));
    });
  }

  // elementwise max over the self-excluded neighbor set; subgradient routed
  // to one argmax per (edge, feature)
  Var pool_antennas_max_excl(Var e, arma::uword N, arma::uword K) {
    return pool_max_excl(e, N, K, /*over_antennas=*/true);
  }
  Var pool_users_max_excl(Var e, arma::uword N, arma::uword K) {
    return pool_max_excl(e, N, K, /*over_antennas=*/false);
  }

  // ---- multi-cell grouped pools; antennas a = m*N + n, users u = m'*K + k ----

  // sum over antennas of the SAME cell as a (including self), fixed user
  Var pool_antennas_intra(Var e, arma::uword M, arma::uword N, arma::uword users) {
    check_edge_shape(e, M * N, users, "pool_antennas_intra");
    arma::mat out = pool_antennas_intra_kernel(value(e), M, N, users);
    return push(std::move(out), needs(e), [e, M, N, users](Tape& t, const arma::mat& g) {
      t.accumulate(e, pool_antennas_intra_kernel(g, M, N, users));
    });
  }

  // sum over users of the same cell as u (including self), fixed antenna
  Var pool_users_intra(Var e, arma::uword antennas, arma::uword M, arma::uword K) {
    check_edge_shape(e, antennas, M * K, "pool_users_intra");
    arma::mat out = pool_users_intra_kernel(value(e), antennas, M, K);
    return push(std::move(out), needs(e), [e, antennas, M, K](Tape& t, const arma::mat& g) {
      t.accumulate(e, pool_users_intra_kernel(g, antennas, M, K));
    });
  }

  void backward(Var out) {
    if (value(out).n_elem != 1) throw std::invalid_argument("tape: backward needs a scalar output");
    if (!recording_) throw std::logic_error("tape: backward on a non-recording tape");
    nodes_[out.idx].grad.set_size(1, 1);
    nodes_[out.idx].grad(0, 0) = 1.0;
    for (int i = out.idx; i >= 0; --i) {
      Node& n = nodes_[i];
      if (n.grad.is_empty() || !n.back) continue;
      n.back(*this, n.grad);
    }
  }

  std::size_t size() const { return nodes_.size(); }

 private:
  struct Node {
    arma::mat value;
    arma::mat grad;
    std::function<void(Tape&, const arma::mat&)> back;
    bool needs_grad = false;
  };

  bool recording_;
  std::vector<Node> nodes_;

  int check(Var v) const {
    if (!v.valid() || static_cast<std::size_t>(v.idx) >= nodes_.size())
      throw std::invalid_argument("tape: dangling variable handle");
    return v.idx;
  }
  bool needs(Var v) const { return nodes_[check(v)].needs_grad; }
  void same_shape(Var a, Var b, const char* op) const {
    if (value(a).n_rows != value(b).n_rows || value(a).n_cols != value(b).n_cols)
      throw std::invalid_argument(std::string("tape: ") + op + " shape mismatch");
  }
  static void check_edge_shape_impl(arma::uword rows, arma::uword want, const char* op) {
    if (rows != want) throw std::invalid_argument(std::string("tape: ") + op + " bad edge layout");
  }
  void check_edge_shape(Var e, arma::uword N, arma::uword K, const char* op) const {
    check_edge_shape_impl(value(e).n_rows, N * K, op);
  }

  Var push(arma::mat&& v, bool needs_grad, std::function<void(Tape&, const arma::mat&)> back) {
    if (!v.is_finite()) throw numeric_error("tape: non-finite value produced");
    Node n;
    n.value = std::move(v);
    n.needs_grad = needs_grad;
    if (recording_ && needs_grad) n.back = std::move(back);
    nodes_.push_back(std::move(n));
    return {static_cast<int>(nodes_.size()) - 1};
  }

  void accumulate(Var v, const arma::mat& g) {
    Node& n = nodes_[check(v)];
    if (!n.needs_grad) return;
    if (n.grad.is_empty())
      n.grad = g;
    else
      n.grad += g;
  }

  static arma::mat pool_antennas_kernel(const arma::mat& e, arma::uword N, arma::uword K) {
    arma::mat out(e.n_rows, e.n_cols);
    for (arma::uword j = 0; j < e.n_cols; ++j) {
      for (arma::uword k = 0; k < K; ++k) {
        double s = 0.0;
        for (arma::uword n = 0; n < N; ++n) s += e(k * N + n, j);
        for (arma::uword n = 0; n < N; ++n) out(k * N + n, j) = s;
      }
    }
    return out;
  }

  static arma::mat pool_users_kernel(const arma::mat& e, arma::uword N, arma::uword K) {
    arma::mat out(e.n_rows, e.n_cols);
    for (arma::uword j = 0; j < e.n_cols; ++j) {
      for (arma::uword n = 0; n < N; ++n) {
        double s = 0.0;
        for (arma::uword k = 0; k < K; ++k) s += e(k * N + n, j);
        for (arma::uword k = 0; k < K; ++k) out(k * N + n, j) = s;
      }
    }
    return out;
  }

  static arma::mat pool_antennas_intra_kernel(const arma::mat& e, arma::uword M, arma::uword N,
                                              arma::uword users) {
    arma::mat out(e.n_rows, e.n_cols);
    const arma::uword MN = M * N;
    for (arma::uword j = 0; j < e.n_cols; ++j)
      for (arma::uword u = 0; u < users; ++u)
        for (arma::uword m = 0; m < M; ++m) {
          double s = 0.0;
          for (arma::uword n = 0; n < N; ++n) s += e(u * MN + m * N + n, j);
          for (arma::uword n = 0; n < N; ++n) out(u * MN + m * N + n, j) = s;
        }
    return out;
  }

  static arma::mat pool_users_intra_kernel(const arma::mat& e, arma::uword antennas, arma::uword M,
                                           arma::uword K) {
    arma::mat out(e.n_rows, e.n_cols);
    for (arma::uword j = 0; j < e.n_cols; ++j)
      for (arma::uword a = 0; a < antennas; ++a)
        for (arma::uword m = 0; m < M; ++m) {
          double s = 0.0;
          for (arma::uword k = 0; k < K; ++k) s += e((m * K + k) * antennas + a, j);
          for (arma::uword k = 0; k < K; ++k) out((m * K + k) * antennas + a, j) = s;
        }
    return out;
  }

  Var pool_max_excl(Var e, arma::uword N, arma::uword K, bool over_antennas) {
    check_edge_shape(e, N, K, "pool_max_excl");
    const arma::uword group = over_antennas ? N : K;
    if (group < 2) throw std::invalid_argument("tape: max pooling needs at least two neighbors");
    const arma::mat& in = value(e);
    arma::mat out(in.n_rows, in.n_cols);
    arma::umat argmax(in.n_rows, in.n_cols);
    auto row_of = [N](arma::uword n, arma::uword k) { return k * N + n; };
    for (arma::uword j = 0; j < in.n_cols; ++j)
      for (arma::uword k = 0; k < K; ++k)
        for (arma::uword n = 0; n < N; ++n) {
          double best = -arma::datum::inf;
          arma::uword best_row = 0;
          for (arma::uword o = 0; o < group; ++o) {
            const bool self = over_antennas ? (o == n) : (o == k);
            if (self) continue;
            const arma::uword r = over_antennas ? row_of(o, k) : row_of(n, o);
            if (in(r, j) > best) {
              best = in(r, j);
              best_row = r;
            }
          }
          out(row_of(n, k), j) = best;
          argmax(row_of(n, k), j) = best_row;
        }
    return push(std::move(out), needs(e), [e, argmax](Tape& t, const arma::mat& g) {
      arma::mat acc(t.value(e).n_rows, t.value(e).n_cols, arma::fill::zeros);
      for (arma::uword j = 0; j < g.n_cols; ++j)
        for (arma::uword r = 0; r < g.n_rows; ++r) acc(argmax(r, j), j) += g(r, j);
      t.accumulate(e, acc);
    });
  }
};

}  // namespace pgnn::ad

#endif
