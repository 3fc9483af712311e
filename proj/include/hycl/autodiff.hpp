#pragma once

#include <cmath>
#include <functional>
#include <map>
#include <string>
#include <utility>
#include <vector>

#include "hycl/common.hpp"
#include "hycl/hypergraph.hpp"

namespace hycl::ad {

// Reverse-mode tape over dense row-major matrices. Nodes are recorded in
// construction order, which is already a topological order, so backward() is
// one reverse sweep. Scalars are 1x1 matrices.
template <typename S>
class Tape;

template <typename S>
struct Value {
  Tape<S>* tape = nullptr;
  int id = -1;

  const Matrix<S>& val() const { return tape->value(id); }
  Index rows() const { return val().rows(); }
  Index cols() const { return val().cols(); }
};

// Constant CSR matrix used on the input side of the encoder; gradients never
// flow into it, only through it.
template <typename S>
struct SparseRows {
  Index rows = 0;
  Index cols = 0;
  std::vector<std::size_t> row_offsets;
  std::vector<Index> col_indices;
  std::vector<S> values;

  static SparseRows from_dense(const Matrix<S>& m) {
    SparseRows out;
    out.rows = m.rows();
    out.cols = m.cols();
    out.row_offsets.assign(static_cast<std::size_t>(m.rows()) + 1, 0);
    for (Index r = 0; r < m.rows(); ++r) {
      for (Index c = 0; c < m.cols(); ++c) {
        if (m(r, c) != S{0}) {
          out.col_indices.push_back(c);
          out.values.push_back(m(r, c));
        }
      }
      out.row_offsets[static_cast<std::size_t>(r) + 1] = out.col_indices.size();
    }
    return out;
  }
};

template <typename S>
class Tape {
 public:
  Value<S> input(Matrix<S> v, bool requires_grad) {
    check_finite(v);
    nodes_.push_back(Node{std::move(v), {}, requires_grad, false, nullptr});
    return {this, static_cast<int>(nodes_.size()) - 1};
  }

  Value<S> constant(Matrix<S> v) { return input(std::move(v), false); }

  Value<S> scalar_constant(S v) {
    Matrix<S> m(1, 1);
    m(0, 0) = v;
    return constant(std::move(m));
  }

  Value<S> parameter(const Matrix<S>& v) { return input(v, true); }

  const Matrix<S>& value(int id) const { return nodes_[static_cast<std::size_t>(id)].value; }

  bool requires_grad(int id) const { return nodes_[static_cast<std::size_t>(id)].requires_grad; }

  Matrix<S>& grad(int id) {
    Node& n = nodes_[static_cast<std::size_t>(id)];
    if (!n.grad_live) {
      n.grad = Matrix<S>::Zero(n.value.rows(), n.value.cols());
      n.grad_live = true;
    }
    return n.grad;
  }

  bool grad_live(int id) const { return nodes_[static_cast<std::size_t>(id)].grad_live; }

  const Matrix<S>& grad_of(Value<S> v) {
    check_contract(backward_done_, "Tape: gradients requested before backward()");
    return grad(v.id);
  }

  void backward(Value<S> loss) {
    check_contract(loss.tape == this, "Tape::backward: loss from a different tape");
    check_contract(!backward_done_, "Tape::backward: called twice on one tape");
    const Matrix<S>& lv = value(loss.id);
    check_contract(lv.rows() == 1 && lv.cols() == 1, "Tape::backward: loss must be scalar");
    check_contract(requires_grad(loss.id), "Tape::backward: loss is detached from all parameters");
    grad(loss.id).setConstant(S{1});
    for (int i = loss.id; i >= 0; --i) {
      Node& n = nodes_[static_cast<std::size_t>(i)];
      if (n.backprop && n.grad_live && n.requires_grad) n.backprop(*this, i);
    }
    backward_done_ = true;
  }

  std::size_t size() const { return nodes_.size(); }

  // --- used by op implementations ---

  using Backprop = std::function<void(Tape&, int)>;

  Value<S> make(Matrix<S> v, bool requires_grad, Backprop bp) {
    check_finite(v);
    nodes_.push_back(Node{std::move(v), {}, requires_grad, false, std::move(bp)});
    return {this, static_cast<int>(nodes_.size()) - 1};
  }

 private:
  struct Node {
    Matrix<S> value;
    Matrix<S> grad;
    bool requires_grad;
    bool grad_live;
    Backprop backprop;
  };

  static void check_finite(const Matrix<S>& m) {
    // a single reduction: NaN/Inf anywhere propagates into the sum
    if (m.size() > 0 && !std::isfinite(static_cast<double>(m.sum())))
      throw NumericError("Tape: non-finite values produced");
  }

  std::vector<Node> nodes_;
  bool backward_done_ = false;
};

namespace detail {

template <typename S>
Tape<S>& same_tape(Value<S> a, Value<S> b) {
  check_contract(a.tape != nullptr && a.tape == b.tape, "ad: operands from different tapes");
  return *a.tape;
}

// Shared dense log-sum-exp kernel (max-subtracted, vectorized). Both the
// full-row reduction and the subset reduction route through this exact
// kernel, so selecting every column reproduces the full loss bit for bit.
template <typename S>
Vector<S> lse_rows(const Matrix<S>& m) {
  Vector<S> out(m.rows());
  for (Index r = 0; r < m.rows(); ++r) {
    const auto row = m.row(r).array();
    const S mx = row.maxCoeff();
    out[r] = mx + std::log((row - mx).exp().sum());
  }
  return out;
}

// Scalar scan for ragged selections; same max-subtraction shape.
template <typename S>
S lse_scan(const Matrix<S>& m, Index row, const Index* idx, Index n) {
  S mx = m(row, idx[0]);
  for (Index t = 1; t < n; ++t) {
    const S v = m(row, idx[t]);
    if (v > mx) mx = v;
  }
  S acc{0};
  for (Index t = 0; t < n; ++t) acc += std::exp(m(row, idx[t]) - mx);
  return mx + std::log(acc);
}

}  // namespace detail

template <typename S>
Value<S> matmul(Value<S> a, Value<S> b) {
  Tape<S>& T = detail::same_tape(a, b);
  check_contract(a.cols() == b.rows(), "matmul: inner dimensions differ");
  Matrix<S> out = a.val() * b.val();
  const int ai = a.id, bi = b.id;
  const bool rg = T.requires_grad(ai) || T.requires_grad(bi);
  return T.make(std::move(out), rg, [ai, bi](Tape<S>& t, int self) {
    const Matrix<S>& g = t.grad(self);
    if (t.requires_grad(ai)) t.grad(ai).noalias() += g * t.value(bi).transpose();
    if (t.requires_grad(bi)) t.grad(bi).noalias() += t.value(ai).transpose() * g;
  });
}

// A * B^T; the workhorse for similarity matrices.
template <typename S>
Value<S> matmul_nt(Value<S> a, Value<S> b) {
  Tape<S>& T = detail::same_tape(a, b);
  check_contract(a.cols() == b.cols(), "matmul_nt: column dimensions differ");
  Matrix<S> out = a.val() * b.val().transpose();
  const int ai = a.id, bi = b.id;
  const bool rg = T.requires_grad(ai) || T.requires_grad(bi);
  return T.make(std::move(out), rg, [ai, bi](Tape<S>& t, int self) {
    const Matrix<S>& g = t.grad(self);
    if (t.requires_grad(ai)) t.grad(ai).noalias() += g * t.value(bi);
    if (t.requires_grad(bi)) t.grad(bi).noalias() += g.transpose() * t.value(ai);
  });
}

// X (constant, sparse) * B. Gradient flows only into B.
template <typename S>
Value<S> sparse_matmul(Value<S> b, const SparseRows<S>& x) {
  Tape<S>& T = *b.tape;
  check_contract(x.cols == b.rows(), "sparse_matmul: inner dimensions differ");
  Matrix<S> out = Matrix<S>::Zero(x.rows, b.cols());
  const Matrix<S>& bv = b.val();
  for (Index r = 0; r < x.rows; ++r)
    for (std::size_t t = x.row_offsets[static_cast<std::size_t>(r)];
         t < x.row_offsets[static_cast<std::size_t>(r) + 1]; ++t)
      out.row(r) += x.values[t] * bv.row(x.col_indices[t]);
  const int bi = b.id;
  const SparseRows<S>* xp = &x;
  return T.make(std::move(out), T.requires_grad(bi), [bi, xp](Tape<S>& t, int self) {
    if (!t.requires_grad(bi)) return;
    const Matrix<S>& g = t.grad(self);
    Matrix<S>& gb = t.grad(bi);
    for (Index r = 0; r < xp->rows; ++r)
      for (std::size_t k = xp->row_offsets[static_cast<std::size_t>(r)];
           k < xp->row_offsets[static_cast<std::size_t>(r) + 1]; ++k)
        gb.row(xp->col_indices[k]) += xp->values[k] * g.row(r);
  });
}

template <typename S>
Value<S> add(Value<S> a, Value<S> b) {
  Tape<S>& T = detail::same_tape(a, b);
  check_contract(a.rows() == b.rows() && a.cols() == b.cols(), "add: shape mismatch");
  Matrix<S> out = a.val() + b.val();
  const int ai = a.id, bi = b.id;
  const bool rg = T.requires_grad(ai) || T.requires_grad(bi);
  return T.make(std::move(out), rg, [ai, bi](Tape<S>& t, int self) {
    const Matrix<S>& g = t.grad(self);
    if (t.requires_grad(ai)) t.grad(ai) += g;
    if (t.requires_grad(bi)) t.grad(bi) += g;
  });
}

// Adds a 1 x C bias row to every row of a.
template <typename S>
Value<S> add_rowvec(Value<S> a, Value<S> bias) {
  Tape<S>& T = detail::same_tape(a, bias);
  check_contract(bias.rows() == 1 && bias.cols() == a.cols(), "add_rowvec: bias must be 1 x cols(a)");
  Matrix<S> out = a.val().rowwise() + bias.val().row(0);
  const int ai = a.id, bi = bias.id;
  const bool rg = T.requires_grad(ai) || T.requires_grad(bi);
  return T.make(std::move(out), rg, [ai, bi](Tape<S>& t, int self) {
    const Matrix<S>& g = t.grad(self);
    if (t.requires_grad(ai)) t.grad(ai) += g;
    if (t.requires_grad(bi)) t.grad(bi).row(0) += g.colwise().sum();
  });
}

template <typename S>
Value<S> scale(Value<S> a, S c) {
  Tape<S>& T = *a.tape;
  Matrix<S> out = a.val() * c;
  const int ai = a.id;
  return T.make(std::move(out), T.requires_grad(ai), [ai, c](Tape<S>& t, int self) {
    if (t.requires_grad(ai)) t.grad(ai) += c * t.grad(self);
  });
}

template <typename S>
Value<S> sub(Value<S> a, Value<S> b) {
  return add(a, scale(b, S{-1}));
}

template <typename S>
Value<S> hadamard(Value<S> a, Value<S> b) {
  Tape<S>& T = detail::same_tape(a, b);
  check_contract(a.rows() == b.rows() && a.cols() == b.cols(), "hadamard: shape mismatch");
  Matrix<S> out = a.val().cwiseProduct(b.val());
  const int ai = a.id, bi = b.id;
  const bool rg = T.requires_grad(ai) || T.requires_grad(bi);
  return T.make(std::move(out), rg, [ai, bi](Tape<S>& t, int self) {
    const Matrix<S>& g = t.grad(self);
    if (t.requires_grad(ai)) t.grad(ai) += g.cwiseProduct(t.value(bi));
    if (t.requires_grad(bi)) t.grad(bi) += g.cwiseProduct(t.value(ai));
  });
}

// Scales row r by the constant factor v[r].
template <typename S>
Value<S> row_scale(Value<S> a, const Vector<S>& v) {
  Tape<S>& T = *a.tape;
  check_contract(v.size() == a.rows(), "row_scale: factor length != rows");
  Matrix<S> out = v.asDiagonal() * a.val();
  const int ai = a.id;
  const Vector<S> vc = v;
  return T.make(std::move(out), T.requires_grad(ai), [ai, vc](Tape<S>& t, int self) {
    if (t.requires_grad(ai)) t.grad(ai) += vc.asDiagonal() * t.grad(self);
  });
}

template <typename S>
Value<S> transpose(Value<S> a) {
  Tape<S>& T = *a.tape;
  Matrix<S> out = a.val().transpose();
  const int ai = a.id;
  return T.make(std::move(out), T.requires_grad(ai), [ai](Tape<S>& t, int self) {
    if (t.requires_grad(ai)) t.grad(ai) += t.grad(self).transpose();
  });
}

// out.row(r) = a.row(idx[r]); duplicate indices accumulate in backward.
template <typename S>
Value<S> row_gather(Value<S> a, std::vector<Index> idx) {
  Tape<S>& T = *a.tape;
  for (const Index i : idx)
    check_contract(i >= 0 && i < a.rows(), "row_gather: index out of range");
  Matrix<S> out(static_cast<Index>(idx.size()), a.cols());
  const Matrix<S>& av = a.val();
  for (Index r = 0; r < out.rows(); ++r) out.row(r) = av.row(idx[static_cast<std::size_t>(r)]);
  const int ai = a.id;
  return T.make(std::move(out), T.requires_grad(ai),
                [ai, idx = std::move(idx)](Tape<S>& t, int self) {
                  if (!t.requires_grad(ai)) return;
                  const Matrix<S>& g = t.grad(self);
                  Matrix<S>& ga = t.grad(ai);
                  for (Index r = 0; r < g.rows(); ++r) ga.row(idx[static_cast<std::size_t>(r)]) += g.row(r);
                });
}

enum class AggregateDir { NodeToEdge, EdgeToNode };
enum class AggregateNorm { None, Dest, Source };

namespace detail {

// Per-membership coefficient for the incidence aggregation. Zero-degree
// endpoints contribute factor 0, so empty hyperedges / isolated nodes yield
// zero rows and propagate zero gradient.
template <typename S>
struct AggregateCoeffs {
  std::vector<S> by_membership;  // in (hyperedge, node) canonical order
};

template <typename S>
AggregateCoeffs<S> aggregate_coeffs(const Hypergraph& h, const DegreeVectors& deg, AggregateDir dir,
                                    AggregateNorm norm) {
  AggregateCoeffs<S> c;
  c.by_membership.reserve(h.memberships().size());
  for (const auto& m : h.memberships()) {
    const double w = h.hyperedge_weights()[static_cast<std::size_t>(m.hyperedge)];
    const double d_node = deg.node_degrees[m.node];
    const double d_edge = static_cast<double>(deg.hyperedge_degrees[static_cast<std::size_t>(m.hyperedge)]);
    double f = 1.0;
    if (dir == AggregateDir::NodeToEdge) {
      if (norm == AggregateNorm::Dest) f = d_edge > 0 ? 1.0 / d_edge : 0.0;
      if (norm == AggregateNorm::Source) f = d_node > 0 ? 1.0 / d_node : 0.0;
    } else {
      f = w;
      if (norm == AggregateNorm::Dest) f = d_node > 0 ? w / d_node : 0.0;
      if (norm == AggregateNorm::Source) f = d_edge > 0 ? w / d_edge : 0.0;
    }
    c.by_membership.push_back(static_cast<S>(f));
  }
  return c;
}

}  // namespace detail

// NodeToEdge with Dest norm computes D_E^-1 H^T M; EdgeToNode with Dest norm
// computes D_V^-1 H W M. Scatter order is fixed (destination-major, sources
// ascending) so accumulation is bitwise reproducible.
template <typename S>
Value<S> incidence_aggregate(Value<S> m, const Hypergraph& h, const DegreeVectors& deg,
                             AggregateDir dir, AggregateNorm norm) {
  Tape<S>& T = *m.tape;
  const Index src_rows = dir == AggregateDir::NodeToEdge ? h.num_nodes() : h.num_hyperedges();
  const Index dst_rows = dir == AggregateDir::NodeToEdge ? h.num_hyperedges() : h.num_nodes();
  check_contract(m.rows() == src_rows, "incidence_aggregate: input rows mismatch");

  auto coeffs = detail::aggregate_coeffs<S>(h, deg, dir, norm);
  // Membership t (canonical order) sits at position edge_offsets[j] + rank of
  // the node within the edge, which is exactly t itself.
  Matrix<S> out = Matrix<S>::Zero(dst_rows, m.cols());
  const Matrix<S>& mv = m.val();
  const auto& pairs = h.memberships();
  if (dir == AggregateDir::NodeToEdge) {
    for (std::size_t t = 0; t < pairs.size(); ++t)
      out.row(pairs[t].hyperedge) += coeffs.by_membership[t] * mv.row(pairs[t].node);
  } else {
    // EdgeToNode walks the node-major adjacency so the scatter stays
    // destination-major; coefficients are recomputed in that order.
    for (Index i = 0; i < h.num_nodes(); ++i) {
      auto [b, e] = h.node_edges(i);
      for (const Index* p = b; p != e; ++p) {
        const Index j = *p;
        const double w = h.hyperedge_weights()[static_cast<std::size_t>(j)];
        const double d_node = deg.node_degrees[i];
        const double d_edge = static_cast<double>(deg.hyperedge_degrees[static_cast<std::size_t>(j)]);
        double f = w;
        if (norm == AggregateNorm::Dest) f = d_node > 0 ? w / d_node : 0.0;
        if (norm == AggregateNorm::Source) f = d_edge > 0 ? w / d_edge : 0.0;
        out.row(i) += static_cast<S>(f) * mv.row(j);
      }
    }
  }

  const int mi = m.id;
  const Hypergraph* hp = &h;
  return T.make(std::move(out), T.requires_grad(mi),
                [mi, hp, dir, norm, coeffs = std::move(coeffs), degp = &deg](Tape<S>& t, int self) {
                  if (!t.requires_grad(mi)) return;
                  const Matrix<S>& g = t.grad(self);
                  Matrix<S>& gm = t.grad(mi);
                  const auto& pairs = hp->memberships();
                  if (dir == AggregateDir::NodeToEdge) {
                    // adjoint scatters into node rows; walk node-major for a
                    // destination-major order
                    for (Index i = 0; i < hp->num_nodes(); ++i) {
                      auto [b, e] = hp->node_edges(i);
                      for (const Index* p = b; p != e; ++p) {
                        const Index j = *p;
                        const double d_node = degp->node_degrees[i];
                        const double d_edge =
                            static_cast<double>(degp->hyperedge_degrees[static_cast<std::size_t>(j)]);
                        double f = 1.0;
                        if (norm == AggregateNorm::Dest) f = d_edge > 0 ? 1.0 / d_edge : 0.0;
                        if (norm == AggregateNorm::Source) f = d_node > 0 ? 1.0 / d_node : 0.0;
                        gm.row(i) += static_cast<S>(f) * g.row(j);
                      }
                    }
                  } else {
                    for (std::size_t k = 0; k < pairs.size(); ++k)
                      gm.row(pairs[k].hyperedge) += coeffs.by_membership[k] * g.row(pairs[k].node);
                  }
                });
}

// PReLU with one learnable slope (1x1 value) per activation site; the slope
// branch handles x <= 0.
template <typename S>
Value<S> prelu(Value<S> x, Value<S> slope) {
  Tape<S>& T = detail::same_tape(x, slope);
  check_contract(slope.rows() == 1 && slope.cols() == 1, "prelu: slope must be a scalar value");
  const S a = slope.val()(0, 0);
  // max/min split keeps the whole activation vectorized
  Matrix<S> out = x.val().cwiseMax(S{0}) + a * x.val().cwiseMin(S{0});
  const int xi = x.id, si = slope.id;
  const bool rg = T.requires_grad(xi) || T.requires_grad(si);
  return T.make(std::move(out), rg, [xi, si, a](Tape<S>& t, int self) {
    const Matrix<S>& g = t.grad(self);
    const Matrix<S>& xv = t.value(xi);
    if (t.requires_grad(xi)) {
      const Matrix<S> dx =
          ((xv.array() > S{0}).template cast<S>() * (S{1} - a) + a).matrix();
      t.grad(xi) += g.cwiseProduct(dx);
    }
    if (t.requires_grad(si))
      t.grad(si)(0, 0) += g.cwiseProduct(xv.cwiseMin(S{0})).sum();
  });
}

// ELU with alpha = 1.
template <typename S>
Value<S> elu(Value<S> x) {
  Tape<S>& T = *x.tape;
  // exp(min(x, 0)) is 1 on the positive side, e^x on the negative side
  Matrix<S> out =
      x.val().cwiseMax(S{0}) +
      (x.val().cwiseMin(S{0}).array().exp() - S{1}).matrix();
  const int xi = x.id;
  return T.make(std::move(out), T.requires_grad(xi), [xi](Tape<S>& t, int self) {
    if (!t.requires_grad(xi)) return;
    const Matrix<S>& xv = t.value(xi);
    const Matrix<S> deriv = xv.cwiseMin(S{0}).array().exp().matrix();
    t.grad(xi) += t.grad(self).cwiseProduct(deriv);
  });
}

template <typename S>
Value<S> sigmoid(Value<S> x) {
  Tape<S>& T = *x.tape;
  Matrix<S> out = (S{0.5} * (x.val().array() * S{0.5}).tanh() + S{0.5}).matrix();
  const int xi = x.id;
  return T.make(std::move(out), T.requires_grad(xi), [xi](Tape<S>& t, int self) {
    if (!t.requires_grad(xi)) return;
    const Matrix<S>& y = t.value(self);
    t.grad(xi) += t.grad(self).cwiseProduct(y.cwiseProduct(Matrix<S>::Constant(y.rows(), y.cols(), S{1}) - y));
  });
}

template <typename S>
Value<S> exp_elem(Value<S> x) {
  Tape<S>& T = *x.tape;
  Matrix<S> out = x.val().array().exp().matrix();
  const int xi = x.id;
  return T.make(std::move(out), T.requires_grad(xi), [xi](Tape<S>& t, int self) {
    if (t.requires_grad(xi)) t.grad(xi) += t.grad(self).cwiseProduct(t.value(self));
  });
}

template <typename S>
Value<S> log_elem(Value<S> x) {
  Tape<S>& T = *x.tape;
  Matrix<S> out = x.val().array().log().matrix();
  const int xi = x.id;
  return T.make(std::move(out), T.requires_grad(xi), [xi](Tape<S>& t, int self) {
    if (t.requires_grad(xi)) t.grad(xi) += t.grad(self).cwiseQuotient(t.value(xi));
  });
}

inline constexpr double kNormClamp = 1e-12;

// Rows scaled to unit L2 norm; norms below the clamp are treated as the clamp
// so zero rows stay zero instead of dividing by zero.
template <typename S>
Value<S> row_l2_normalize(Value<S> x) {
  Tape<S>& T = *x.tape;
  const Matrix<S>& xv = x.val();
  Vector<S> norms(xv.rows());
  for (Index r = 0; r < xv.rows(); ++r)
    norms[r] = std::max(xv.row(r).norm(), static_cast<S>(kNormClamp));
  Matrix<S> out = norms.cwiseInverse().asDiagonal() * xv;
  const int xi = x.id;
  return T.make(std::move(out), T.requires_grad(xi), [xi, norms = std::move(norms)](Tape<S>& t, int self) {
    if (!t.requires_grad(xi)) return;
    const Matrix<S>& g = t.grad(self);
    const Matrix<S>& y = t.value(self);
    Matrix<S>& gx = t.grad(xi);
    for (Index r = 0; r < g.rows(); ++r) {
      const S dot = g.row(r).dot(y.row(r));
      gx.row(r) += (g.row(r) - dot * y.row(r)) / norms[r];
    }
  });
}

// Per-row inner product of two equal-shape matrices -> n x 1.
template <typename S>
Value<S> row_dot(Value<S> a, Value<S> b) {
  Tape<S>& T = detail::same_tape(a, b);
  check_contract(a.rows() == b.rows() && a.cols() == b.cols(), "row_dot: shape mismatch");
  Matrix<S> out(a.rows(), 1);
  for (Index r = 0; r < a.rows(); ++r) out(r, 0) = a.val().row(r).dot(b.val().row(r));
  const int ai = a.id, bi = b.id;
  const bool rg = T.requires_grad(ai) || T.requires_grad(bi);
  return T.make(std::move(out), rg, [ai, bi](Tape<S>& t, int self) {
    const Matrix<S>& g = t.grad(self);
    if (t.requires_grad(ai))
      t.grad(ai) += g.col(0).asDiagonal() * t.value(bi);
    if (t.requires_grad(bi))
      t.grad(bi) += g.col(0).asDiagonal() * t.value(ai);
  });
}

// Batched bilinear form: out[t] = z.row(zi[t]) * s * y.row(yi[t])^T.
template <typename S>
Value<S> bilinear_pairs(Value<S> z, Value<S> s, Value<S> y, std::vector<Index> zi,
                        std::vector<Index> yi) {
  Tape<S>& T = detail::same_tape(z, s);
  detail::same_tape(s, y);
  check_contract(zi.size() == yi.size(), "bilinear_pairs: index lists differ in length");
  check_contract(z.cols() == s.rows() && s.cols() == y.cols(), "bilinear_pairs: dimension mismatch");
  for (const Index i : zi) check_contract(i >= 0 && i < z.rows(), "bilinear_pairs: z index out of range");
  for (const Index i : yi) check_contract(i >= 0 && i < y.rows(), "bilinear_pairs: y index out of range");

  Matrix<S> u = z.val() * s.val();  // n x F''
  Matrix<S> out(static_cast<Index>(zi.size()), 1);
  for (Index t = 0; t < out.rows(); ++t)
    out(t, 0) = u.row(zi[static_cast<std::size_t>(t)]).dot(y.val().row(yi[static_cast<std::size_t>(t)]));

  const int zid = z.id, sid = s.id, yid = y.id;
  const bool rg = T.requires_grad(zid) || T.requires_grad(sid) || T.requires_grad(yid);
  return T.make(std::move(out), rg,
                [zid, sid, yid, zi = std::move(zi), yi = std::move(yi), u = std::move(u)](Tape<S>& t,
                                                                                          int self) {
                  const Matrix<S>& g = t.grad(self);
                  const Matrix<S>& zv = t.value(zid);
                  const Matrix<S>& sv = t.value(sid);
                  const Matrix<S>& yv = t.value(yid);
                  Matrix<S> gu = Matrix<S>::Zero(u.rows(), u.cols());
                  for (Index k = 0; k < g.rows(); ++k) {
                    const Index a = zi[static_cast<std::size_t>(k)];
                    const Index b = yi[static_cast<std::size_t>(k)];
                    gu.row(a) += g(k, 0) * yv.row(b);
                    if (t.requires_grad(yid)) t.grad(yid).row(b) += g(k, 0) * u.row(a);
                  }
                  if (t.requires_grad(zid)) t.grad(zid).noalias() += gu * sv.transpose();
                  if (t.requires_grad(sid)) t.grad(sid).noalias() += zv.transpose() * gu;
                });
}

// Log-sum-exp over each full row with max-subtraction -> n x 1.
template <typename S>
Value<S> row_lse(Value<S> x) {
  Tape<S>& T = *x.tape;
  check_contract(x.cols() >= 1, "row_lse: empty rows");
  Matrix<S> out = detail::lse_rows(x.val());
  const int xi = x.id;
  return T.make(std::move(out), T.requires_grad(xi), [xi](Tape<S>& t, int self) {
    if (!t.requires_grad(xi)) return;
    const Matrix<S>& g = t.grad(self);
    const Matrix<S>& xv = t.value(xi);
    const Matrix<S>& lse = t.value(self);
    Matrix<S>& gx = t.grad(xi);
    for (Index r = 0; r < xv.rows(); ++r)
      gx.row(r).array() += g(r, 0) * (xv.row(r).array() - lse(r, 0)).exp();
  });
}

// Log-sum-exp of selected columns per row; list t applies to row t. Uniform
// list lengths take a gathered dense path through the same kernel as row_lse,
// so selecting all columns in ascending order reproduces row_lse bit for bit;
// ragged lists fall back to a scalar scan.
template <typename S>
Value<S> row_lse_subset(Value<S> x, std::vector<std::vector<Index>> lists) {
  Tape<S>& T = *x.tape;
  check_contract(static_cast<Index>(lists.size()) == x.rows(), "row_lse_subset: one list per row required");
  bool uniform = true;
  for (const auto& l : lists) {
    check_contract(!l.empty(), "row_lse_subset: empty selection");
    uniform = uniform && l.size() == lists.front().size();
    for (const Index c : l) check_contract(c >= 0 && c < x.cols(), "row_lse_subset: column out of range");
  }

  Matrix<S> out(x.rows(), 1);
  if (uniform) {
    const Index width = static_cast<Index>(lists.front().size());
    Matrix<S> gathered(x.rows(), width);
    const Matrix<S>& xv = x.val();
    for (Index r = 0; r < x.rows(); ++r)
      for (Index t = 0; t < width; ++t)
        gathered(r, t) = xv(r, lists[static_cast<std::size_t>(r)][static_cast<std::size_t>(t)]);
    out = detail::lse_rows(gathered);
  } else {
    for (Index r = 0; r < x.rows(); ++r)
      out(r, 0) = detail::lse_scan(x.val(), r, lists[static_cast<std::size_t>(r)].data(),
                                   static_cast<Index>(lists[static_cast<std::size_t>(r)].size()));
  }
  const int xi = x.id;
  return T.make(std::move(out), T.requires_grad(xi),
                [xi, lists = std::move(lists)](Tape<S>& t, int self) {
                  if (!t.requires_grad(xi)) return;
                  const Matrix<S>& g = t.grad(self);
                  const Matrix<S>& xv = t.value(xi);
                  const Matrix<S>& lse = t.value(self);
                  Matrix<S>& gx = t.grad(xi);
                  for (Index r = 0; r < xv.rows(); ++r)
                    for (const Index c : lists[static_cast<std::size_t>(r)])
                      gx(r, c) += g(r, 0) * std::exp(xv(r, c) - lse(r, 0));
                });
}

// n x 1 columns side by side -> n x 2.
template <typename S>
Value<S> hstack2(Value<S> a, Value<S> b) {
  Tape<S>& T = detail::same_tape(a, b);
  check_contract(a.cols() == 1 && b.cols() == 1 && a.rows() == b.rows(), "hstack2: need equal n x 1 inputs");
  Matrix<S> out(a.rows(), 2);
  out.col(0) = a.val().col(0);
  out.col(1) = b.val().col(0);
  const int ai = a.id, bi = b.id;
  const bool rg = T.requires_grad(ai) || T.requires_grad(bi);
  return T.make(std::move(out), rg, [ai, bi](Tape<S>& t, int self) {
    const Matrix<S>& g = t.grad(self);
    if (t.requires_grad(ai)) t.grad(ai).col(0) += g.col(0);
    if (t.requires_grad(bi)) t.grad(bi).col(0) += g.col(1);
  });
}

template <typename S>
Value<S> mean_all(Value<S> x) {
  Tape<S>& T = *x.tape;
  Matrix<S> out(1, 1);
  out(0, 0) = x.val().mean();
  const int xi = x.id;
  const S inv = S{1} / static_cast<S>(x.rows() * x.cols());
  return T.make(std::move(out), T.requires_grad(xi), [xi, inv](Tape<S>& t, int self) {
    if (t.requires_grad(xi)) t.grad(xi).array() += t.grad(self)(0, 0) * inv;
  });
}

// --- finite-difference oracle ---

struct GradCheckEntry {
  std::string name;
  double max_rel_err = 0.0;
};

struct GradCheckReport {
  std::vector<GradCheckEntry> params;
  double max_rel_err = 0.0;

  bool passed(double tol) const { return max_rel_err < tol; }
};

// Central-difference check of analytic gradients. `loss_fn` must rebuild the
// forward pass from the current parameter contents on every call; `grads`
// holds the analytic result per parameter name.
inline GradCheckReport grad_check(
    const std::vector<std::pair<std::string, Matrix<double>*>>& params,
    const std::function<double()>& loss_fn, const std::map<std::string, Matrix<double>>& grads,
    double eps, double ignore_below = 1e-10) {
  check_contract(eps > 0, "grad_check: eps must be positive");
  GradCheckReport report;
  for (const auto& [name, mat] : params) {
    const auto it = grads.find(name);
    check_contract(it != grads.end(), "grad_check: missing analytic gradient for " + name);
    const Matrix<double>& g = it->second;
    check_contract(g.rows() == mat->rows() && g.cols() == mat->cols(),
                   "grad_check: gradient shape mismatch for " + name);
    GradCheckEntry entry{name, 0.0};
    for (Index r = 0; r < mat->rows(); ++r) {
      for (Index c = 0; c < mat->cols(); ++c) {
        const double saved = (*mat)(r, c);
        (*mat)(r, c) = saved + eps;
        const double up = loss_fn();
        (*mat)(r, c) = saved - eps;
        const double down = loss_fn();
        (*mat)(r, c) = saved;
        const double fd = (up - down) / (2.0 * eps);
        const double an = g(r, c);
        const double denom = std::max({std::abs(fd), std::abs(an), 1.0e-6});
        if (std::abs(fd) < ignore_below && std::abs(an) < ignore_below) continue;
        entry.max_rel_err = std::max(entry.max_rel_err, std::abs(fd - an) / denom);
      }
    }
    report.max_rel_err = std::max(report.max_rel_err, entry.max_rel_err);
    report.params.push_back(std::move(entry));
  }
  return report;
}

}  // namespace hycl::ad
