#pragma once

#include <cmath>
#include <string>
#include <utility>
#include <vector>

#include "hycl/autodiff.hpp"
#include "hycl/hypergraph.hpp"
#include "hycl/rng.hpp"

namespace hycl {

// Entries uniform in +-sqrt(6 / (fan_in + fan_out)).
template <typename S>
Matrix<S> glorot_init(Index rows, Index cols, Rng& rng) {
  check_config(rows > 0 && cols > 0, "glorot_init: dimensions must be positive");
  const double bound = std::sqrt(6.0 / static_cast<double>(rows + cols));
  Matrix<S> m(rows, cols);
  for (Index r = 0; r < rows; ++r)
    for (Index c = 0; c < cols; ++c)
      m(r, c) = static_cast<S>((2.0 * rng.next_double() - 1.0) * bound);
  return m;
}

inline constexpr double kPreluInitSlope = 0.25;

template <typename S>
struct MeanPoolLayerParams {
  Matrix<S> theta_edge;  // F_{k-1} x F''_k
  Matrix<S> bias_edge;   // 1 x F''_k
  Matrix<S> theta_node;  // F''_k x F'_k
  Matrix<S> bias_node;   // 1 x F'_k
  Matrix<S> slope_edge;  // 1 x 1 PReLU slope, edge-side activation
  Matrix<S> slope_node;  // 1 x 1 PReLU slope, node-side activation
};

template <typename S>
struct HgnnLayerParams {
  Matrix<S> theta;  // F_{k-1} x F_k
  Matrix<S> bias;   // 1 x F_k
  Matrix<S> slope;  // 1 x 1 PReLU slope
};

enum class EncoderKind { MeanPool, Hgnn };

template <typename S>
struct EncoderParams {
  EncoderKind kind = EncoderKind::MeanPool;
  std::vector<MeanPoolLayerParams<S>> mean_pool;
  std::vector<HgnnLayerParams<S>> hgnn;

  Index output_dim() const {
    if (kind == EncoderKind::MeanPool) return mean_pool.back().theta_node.cols();
    return hgnn.back().theta.cols();
  }
};

// Two-layer MLP head with ELU between the layers.
template <typename S>
struct ProjectionHeadParams {
  Matrix<S> w1;  // in x hidden
  Matrix<S> b1;  // 1 x hidden
  Matrix<S> w2;  // hidden x out
  Matrix<S> b2;  // 1 x out
};

template <typename S>
struct DiscriminatorParams {
  Matrix<S> s;  // node projection dim x hyperedge projection dim
};

template <typename S>
struct ModelParams {
  EncoderParams<S> encoder;
  ProjectionHeadParams<S> node_head;
  ProjectionHeadParams<S> edge_head;
  DiscriminatorParams<S> discriminator;
};

template <typename S>
EncoderParams<S> init_mean_pool_encoder(Index feature_dim, Index edge_dim, Index node_dim, Index layers,
                                        Rng& rng) {
  check_config(layers >= 1, "encoder: layer count must be >= 1");
  EncoderParams<S> p;
  p.kind = EncoderKind::MeanPool;
  Index in = feature_dim;
  for (Index k = 0; k < layers; ++k) {
    MeanPoolLayerParams<S> layer;
    layer.theta_edge = glorot_init<S>(in, edge_dim, rng);
    layer.bias_edge = Matrix<S>::Zero(1, edge_dim);
    layer.theta_node = glorot_init<S>(edge_dim, node_dim, rng);
    layer.bias_node = Matrix<S>::Zero(1, node_dim);
    layer.slope_edge = Matrix<S>::Constant(1, 1, static_cast<S>(kPreluInitSlope));
    layer.slope_node = Matrix<S>::Constant(1, 1, static_cast<S>(kPreluInitSlope));
    p.mean_pool.push_back(std::move(layer));
    in = node_dim;
  }
  return p;
}

template <typename S>
EncoderParams<S> init_hgnn_encoder(Index feature_dim, Index node_dim, Index layers, Rng& rng) {
  check_config(layers >= 1, "encoder: layer count must be >= 1");
  EncoderParams<S> p;
  p.kind = EncoderKind::Hgnn;
  Index in = feature_dim;
  for (Index k = 0; k < layers; ++k) {
    HgnnLayerParams<S> layer;
    layer.theta = glorot_init<S>(in, node_dim, rng);
    layer.bias = Matrix<S>::Zero(1, node_dim);
    layer.slope = Matrix<S>::Constant(1, 1, static_cast<S>(kPreluInitSlope));
    p.hgnn.push_back(std::move(layer));
    in = node_dim;
  }
  return p;
}

template <typename S>
ProjectionHeadParams<S> init_projection_head(Index in, Index hidden, Index out, Rng& rng) {
  ProjectionHeadParams<S> p;
  p.w1 = glorot_init<S>(in, hidden, rng);
  p.b1 = Matrix<S>::Zero(1, hidden);
  p.w2 = glorot_init<S>(hidden, out, rng);
  p.b2 = Matrix<S>::Zero(1, out);
  return p;
}

// Tape-side handles for one encoder forward; parameters become leaves once and
// are shared between the two view encodings.
template <typename S>
struct MeanPoolLayerValues {
  ad::Value<S> theta_edge, bias_edge, theta_node, bias_node, slope_edge, slope_node;
};

template <typename S>
struct HgnnLayerValues {
  ad::Value<S> theta, bias, slope;
};

template <typename S>
struct ProjectionHeadValues {
  ad::Value<S> w1, b1, w2, b2;
};

template <typename S>
struct EncoderValues {
  EncoderKind kind;
  std::vector<MeanPoolLayerValues<S>> mean_pool;
  std::vector<HgnnLayerValues<S>> hgnn;
};

template <typename S>
EncoderValues<S> stage_encoder(ad::Tape<S>& tape, const EncoderParams<S>& p) {
  EncoderValues<S> v;
  v.kind = p.kind;
  for (const auto& l : p.mean_pool)
    v.mean_pool.push_back({tape.parameter(l.theta_edge), tape.parameter(l.bias_edge),
                           tape.parameter(l.theta_node), tape.parameter(l.bias_node),
                           tape.parameter(l.slope_edge), tape.parameter(l.slope_node)});
  for (const auto& l : p.hgnn)
    v.hgnn.push_back({tape.parameter(l.theta), tape.parameter(l.bias), tape.parameter(l.slope)});
  return v;
}

template <typename S>
ProjectionHeadValues<S> stage_projection_head(ad::Tape<S>& tape, const ProjectionHeadParams<S>& p) {
  return {tape.parameter(p.w1), tape.parameter(p.b1), tape.parameter(p.w2), tape.parameter(p.b2)};
}

template <typename S>
struct EncodedPair {
  ad::Value<S> node_embeddings;  // P, |V| x F'
  ad::Value<S> edge_embeddings;  // Q, |E| x F''
};

// Features enter either as a dense tape value or, when the input matrix is
// sparse enough, as a constant CSR operand of the first multiply.
template <typename S>
struct FeatureInput {
  ad::Value<S> dense;
  const ad::SparseRows<S>* sparse = nullptr;
};

namespace detail {

template <typename S>
ad::Value<S> input_matmul(const FeatureInput<S>& x, ad::Value<S> w) {
  if (x.sparse) return ad::sparse_matmul(w, *x.sparse);
  return ad::matmul(x.dense, w);
}

}  // namespace detail

// Mean-pooling message passing: per layer,
//   Q = act(D_E^-1 H^T P Theta_E + b_E), then P = act(D_V^-1 H W Q Theta_V + b_V).
// The projection is applied on whichever side has fewer rows.
template <typename S>
EncodedPair<S> encode_mean_pool([[maybe_unused]] ad::Tape<S>& tape, const EncoderValues<S>& enc,
                                const FeatureInput<S>& x, const Hypergraph& h,
                                const DegreeVectors& deg) {
  check_contract(enc.kind == EncoderKind::MeanPool, "encode_mean_pool: wrong encoder kind");
  ad::Value<S> p;
  ad::Value<S> q;
  bool first = true;
  for (const auto& layer : enc.mean_pool) {
    ad::Value<S> projected =
        first ? detail::input_matmul(x, layer.theta_edge) : ad::matmul(p, layer.theta_edge);
    ad::Value<S> agg = ad::incidence_aggregate(projected, h, deg, ad::AggregateDir::NodeToEdge,
                                               ad::AggregateNorm::Dest);
    q = ad::prelu(ad::add_rowvec(agg, layer.bias_edge), layer.slope_edge);

    ad::Value<S> back = ad::incidence_aggregate(q, h, deg, ad::AggregateDir::EdgeToNode,
                                                ad::AggregateNorm::Dest);
    p = ad::prelu(ad::add_rowvec(ad::matmul(back, layer.theta_node), layer.bias_node),
                  layer.slope_node);
    first = false;
  }
  return {p, q};
}

// HGNN message passing:
//   q_j = sum_{i in e_j} p_i / sqrt(d_i),
//   p_i = act((1 / sqrt(d_i)) sum_{j : i in e_j} w_j q_j Theta / delta_j + b).
template <typename S>
EncodedPair<S> encode_hgnn(ad::Tape<S>& tape, const EncoderValues<S>& enc, const FeatureInput<S>& x,
                           const Hypergraph& h, const DegreeVectors& deg) {
  check_contract(enc.kind == EncoderKind::Hgnn, "encode_hgnn: wrong encoder kind");
  Vector<S> inv_sqrt_d(h.num_nodes());
  for (Index i = 0; i < h.num_nodes(); ++i) {
    const double d = deg.node_degrees[i];
    inv_sqrt_d[i] = d > 0 ? static_cast<S>(1.0 / std::sqrt(d)) : S{0};
  }

  ad::Value<S> p = x.sparse ? [&] {
    Matrix<S> dense = Matrix<S>::Zero(x.sparse->rows, x.sparse->cols);
    for (Index r = 0; r < x.sparse->rows; ++r)
      for (std::size_t t = x.sparse->row_offsets[static_cast<std::size_t>(r)];
           t < x.sparse->row_offsets[static_cast<std::size_t>(r) + 1]; ++t)
        dense(r, x.sparse->col_indices[t]) = x.sparse->values[t];
    return tape.constant(std::move(dense));
  }()
                            : x.dense;
  ad::Value<S> q;
  for (const auto& layer : enc.hgnn) {
    ad::Value<S> scaled = ad::row_scale(p, inv_sqrt_d);
    q = ad::incidence_aggregate(scaled, h, deg, ad::AggregateDir::NodeToEdge, ad::AggregateNorm::None);
    ad::Value<S> back =
        ad::incidence_aggregate(q, h, deg, ad::AggregateDir::EdgeToNode, ad::AggregateNorm::Source);
    ad::Value<S> pre = ad::row_scale(ad::matmul(back, layer.theta), inv_sqrt_d);
    p = ad::prelu(ad::add_rowvec(pre, layer.bias), layer.slope);
  }
  return {p, q};
}

template <typename S>
EncodedPair<S> encode(ad::Tape<S>& tape, const EncoderValues<S>& enc, const FeatureInput<S>& x,
                      const Hypergraph& h, const DegreeVectors& deg) {
  return enc.kind == EncoderKind::MeanPool ? encode_mean_pool(tape, enc, x, h, deg)
                                           : encode_hgnn(tape, enc, x, h, deg);
}

// Z = ELU(P W1 + b1) W2 + b2, rows independent.
template <typename S>
ad::Value<S> project([[maybe_unused]] ad::Tape<S>& tape, const ProjectionHeadValues<S>& head,
                     ad::Value<S> input) {
  ad::Value<S> hidden = ad::elu(ad::add_rowvec(ad::matmul(input, head.w1), head.b1));
  return ad::add_rowvec(ad::matmul(hidden, head.w2), head.b2);
}

// D(z, y) = sigmoid(z^T S y) for a single row pair; plain (non-tape) variant.
template <typename S>
double discriminate(const DiscriminatorParams<S>& d, const Eigen::RowVectorX<S>& z,
                    const Eigen::RowVectorX<S>& y) {
  check_contract(z.cols() == d.s.rows() && y.cols() == d.s.cols(), "discriminate: dimension mismatch");
  const double score = static_cast<double>(z * d.s * y.transpose());
  return 1.0 / (1.0 + std::exp(-score));
}

}  // namespace hycl
