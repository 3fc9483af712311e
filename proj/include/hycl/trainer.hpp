#pragma once

#include <chrono>
#include <map>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "hycl/augment.hpp"
#include "hycl/autodiff.hpp"
#include "hycl/hypergraph.hpp"
#include "hycl/loss.hpp"
#include "hycl/model.hpp"
#include "hycl/optim.hpp"
#include "hycl/rng.hpp"

namespace hycl {

struct TrainConfig {
  AugmentConfig augment;
  LossConfig loss;
  double learning_rate = 1e-3;
  double weight_decay = 1e-5;
  Index epochs = 100;
  Index node_emb_dim = 128;
  Index hyperedge_emb_dim = 128;
  Index projection_hidden_dim = 128;
  EncoderKind encoder_kind = EncoderKind::MeanPool;
  Index encoder_layers = 1;
  bool add_self_loops = true;
  std::uint64_t seed = 0;
  int precision = 32;  // 32 or 64
  std::optional<Index> membership_batch;

  void validate() const {
    augment.validate();
    loss.validate();
    check_config(learning_rate > 0, "TrainConfig: learning_rate must be positive");
    check_config(weight_decay >= 0, "TrainConfig: weight_decay must be nonnegative");
    check_config(epochs >= 1, "TrainConfig: epochs must be >= 1");
    check_config(node_emb_dim > 0 && hyperedge_emb_dim > 0 && projection_hidden_dim > 0,
                 "TrainConfig: embedding dimensions must be positive");
    check_config(encoder_layers >= 1, "TrainConfig: encoder_layers must be >= 1");
    check_config(precision == 32 || precision == 64, "TrainConfig: precision must be 32 or 64");
    if (membership_batch) check_config(*membership_batch >= 1, "TrainConfig: membership_batch must be >= 1");
  }
};

struct LossComponents {
  double total = 0;
  double node = 0;
  double group = 0;
  double membership = 0;
};

// Trained parameters are held in double regardless of the training precision;
// embed() casts back down when the model was trained in 32-bit.
struct TrainedModel {
  TrainConfig config;
  ModelParams<double> params;
  std::vector<LossComponents> loss_trace;
  std::vector<double> epoch_ms;
  Index skipped_node_anchored = 0;
  Index skipped_edge_anchored = 0;

  double mean_epoch_ms() const {
    if (epoch_ms.empty()) return 0.0;
    double s = 0;
    for (const double t : epoch_ms) s += t;
    return s / static_cast<double>(epoch_ms.size());
  }
};

namespace detail {

template <typename From, typename To>
Matrix<To> cast_matrix(const Matrix<From>& m) {
  return m.template cast<To>();
}

template <typename From, typename To>
ModelParams<To> cast_model(const ModelParams<From>& p) {
  ModelParams<To> out;
  out.encoder.kind = p.encoder.kind;
  for (const auto& l : p.encoder.mean_pool)
    out.encoder.mean_pool.push_back({cast_matrix<From, To>(l.theta_edge),
                                     cast_matrix<From, To>(l.bias_edge),
                                     cast_matrix<From, To>(l.theta_node),
                                     cast_matrix<From, To>(l.bias_node),
                                     cast_matrix<From, To>(l.slope_edge),
                                     cast_matrix<From, To>(l.slope_node)});
  for (const auto& l : p.encoder.hgnn)
    out.encoder.hgnn.push_back({cast_matrix<From, To>(l.theta), cast_matrix<From, To>(l.bias),
                                cast_matrix<From, To>(l.slope)});
  auto cast_head = [](const ProjectionHeadParams<From>& h) {
    return ProjectionHeadParams<To>{cast_matrix<From, To>(h.w1), cast_matrix<From, To>(h.b1),
                                    cast_matrix<From, To>(h.w2), cast_matrix<From, To>(h.b2)};
  };
  out.node_head = cast_head(p.node_head);
  out.edge_head = cast_head(p.edge_head);
  out.discriminator.s = cast_matrix<From, To>(p.discriminator.s);
  return out;
}

}  // namespace detail

template <typename S>
ModelParams<S> init_model(Index feature_dim, const TrainConfig& cfg) {
  Rng rng(Rng::derive(cfg.seed, "init"));
  ModelParams<S> p;
  Index edge_repr_dim;
  if (cfg.encoder_kind == EncoderKind::MeanPool) {
    p.encoder = init_mean_pool_encoder<S>(feature_dim, cfg.hyperedge_emb_dim, cfg.node_emb_dim,
                                          cfg.encoder_layers, rng);
    edge_repr_dim = cfg.hyperedge_emb_dim;
  } else {
    p.encoder = init_hgnn_encoder<S>(feature_dim, cfg.node_emb_dim, cfg.encoder_layers, rng);
    // the HGNN edge representation is the un-projected node input of its layer
    edge_repr_dim = cfg.encoder_layers == 1 ? feature_dim : cfg.node_emb_dim;
  }
  p.node_head = init_projection_head<S>(cfg.node_emb_dim, cfg.projection_hidden_dim, cfg.node_emb_dim, rng);
  p.edge_head = init_projection_head<S>(edge_repr_dim, cfg.projection_hidden_dim, edge_repr_dim, rng);
  p.discriminator.s = glorot_init<S>(cfg.node_emb_dim, edge_repr_dim, rng);
  return p;
}

// Registry order is also the tape staging order; decay applies to weights and
// the discriminator only.
template <typename S>
std::vector<ParamSlot<S>> parameter_registry(ModelParams<S>& p) {
  std::vector<ParamSlot<S>> slots;
  for (std::size_t k = 0; k < p.encoder.mean_pool.size(); ++k) {
    auto& l = p.encoder.mean_pool[k];
    const std::string tag = "encoder.layer" + std::to_string(k);
    slots.push_back({tag + ".theta_edge", &l.theta_edge, true});
    slots.push_back({tag + ".bias_edge", &l.bias_edge, false});
    slots.push_back({tag + ".theta_node", &l.theta_node, true});
    slots.push_back({tag + ".bias_node", &l.bias_node, false});
    slots.push_back({tag + ".slope_edge", &l.slope_edge, false});
    slots.push_back({tag + ".slope_node", &l.slope_node, false});
  }
  for (std::size_t k = 0; k < p.encoder.hgnn.size(); ++k) {
    auto& l = p.encoder.hgnn[k];
    const std::string tag = "encoder.layer" + std::to_string(k);
    slots.push_back({tag + ".theta", &l.theta, true});
    slots.push_back({tag + ".bias", &l.bias, false});
    slots.push_back({tag + ".slope", &l.slope, false});
  }
  auto head = [&](ProjectionHeadParams<S>& h, const std::string& tag) {
    slots.push_back({tag + ".w1", &h.w1, true});
    slots.push_back({tag + ".b1", &h.b1, false});
    slots.push_back({tag + ".w2", &h.w2, true});
    slots.push_back({tag + ".b2", &h.b2, false});
  };
  head(p.node_head, "node_head");
  head(p.edge_head, "edge_head");
  slots.push_back({"discriminator.s", &p.discriminator.s, true});
  return slots;
}

namespace detail {

template <typename S>
struct StagedModel {
  EncoderValues<S> encoder;
  ProjectionHeadValues<S> node_head;
  ProjectionHeadValues<S> edge_head;
  ad::Value<S> discriminator;
  std::vector<ad::Value<S>> registry_order;
};

template <typename S>
StagedModel<S> stage_model(ad::Tape<S>& tape, const ModelParams<S>& p) {
  StagedModel<S> staged;
  staged.encoder = stage_encoder(tape, p.encoder);
  staged.node_head = stage_projection_head(tape, p.node_head);
  staged.edge_head = stage_projection_head(tape, p.edge_head);
  staged.discriminator = tape.parameter(p.discriminator.s);
  for (std::size_t k = 0; k < staged.encoder.mean_pool.size(); ++k) {
    const auto& l = staged.encoder.mean_pool[k];
    for (auto v : {l.theta_edge, l.bias_edge, l.theta_node, l.bias_node, l.slope_edge, l.slope_node})
      staged.registry_order.push_back(v);
  }
  for (std::size_t k = 0; k < staged.encoder.hgnn.size(); ++k) {
    const auto& l = staged.encoder.hgnn[k];
    for (auto v : {l.theta, l.bias, l.slope}) staged.registry_order.push_back(v);
  }
  for (const auto* h : {&staged.node_head, &staged.edge_head})
    for (auto v : {h->w1, h->b1, h->w2, h->b2}) staged.registry_order.push_back(v);
  staged.registry_order.push_back(staged.discriminator);
  return staged;
}

// Hyperedges eligible for group/membership contrast: original (non-self-loop)
// hyperedges that kept at least one member in both views.
inline std::pair<std::vector<Index>, std::vector<Index>> eligible_hyperedges(
    const Hypergraph& original, const DegreeVectors& deg1, const DegreeVectors& deg2) {
  std::vector<Index> eligible;
  std::vector<Index> edge_pos(static_cast<std::size_t>(original.num_hyperedges()), -1);
  for (Index j = 0; j < original.num_hyperedges(); ++j) {
    if (original.is_self_loop(j)) continue;
    if (deg1.hyperedge_degrees[static_cast<std::size_t>(j)] == 0) continue;
    if (deg2.hyperedge_degrees[static_cast<std::size_t>(j)] == 0) continue;
    edge_pos[static_cast<std::size_t>(j)] = static_cast<Index>(eligible.size());
    eligible.push_back(j);
  }
  return {std::move(eligible), std::move(edge_pos)};
}

template <typename S>
struct EpochOutcome {
  LossComponents components;
  std::vector<Matrix<S>> grads;  // registry order, present when backward ran
  Index skipped_node_anchored = 0;
  Index skipped_edge_anchored = 0;
};

// One full-batch forward (and optional backward) at a fixed epoch seed. The
// same seed replays identical views and negative draws.
template <typename S>
EpochOutcome<S> run_epoch(const LabeledDataset& d, const TrainConfig& cfg,
                          const ModelParams<S>& params, std::uint64_t epoch_seed, bool backward) {
  auto [view1, view2] = make_views(d, cfg.augment, epoch_seed);
  const Hypergraph h1 = cfg.add_self_loops ? hycl::add_self_loops(view1.hypergraph) : view1.hypergraph;
  const Hypergraph h2 = cfg.add_self_loops ? hycl::add_self_loops(view2.hypergraph) : view2.hypergraph;
  const DegreeVectors deg1 = compute_degrees(h1);
  const DegreeVectors deg2 = compute_degrees(h2);

  ad::Tape<S> tape;
  StagedModel<S> staged = stage_model(tape, params);

  // the bag-of-words benchmarks are sparse; route the first multiply through
  // CSR when it pays off
  const double nnz = static_cast<double>((d.features.array() != 0.0).count());
  const bool sparse_input =
      nnz < 0.25 * static_cast<double>(d.features.rows() * d.features.cols());

  auto make_input = [&](const Matrix<double>& feats, ad::SparseRows<S>& storage) {
    FeatureInput<S> in;
    Matrix<S> cast = feats.template cast<S>();
    if (sparse_input && params.encoder.kind == EncoderKind::MeanPool) {
      storage = ad::SparseRows<S>::from_dense(cast);
      in.sparse = &storage;
    } else {
      in.dense = tape.constant(std::move(cast));
    }
    return in;
  };
  ad::SparseRows<S> sparse1, sparse2;
  FeatureInput<S> x1 = make_input(view1.features, sparse1);
  FeatureInput<S> x2 = make_input(view2.features, sparse2);

  EncodedPair<S> enc1 = encode(tape, staged.encoder, x1, h1, deg1);
  EncodedPair<S> enc2 = encode(tape, staged.encoder, x2, h2, deg2);

  ad::Value<S> z1 = project(tape, staged.node_head, enc1.node_embeddings);
  ad::Value<S> z2 = project(tape, staged.node_head, enc2.node_embeddings);

  EpochOutcome<S> out;
  std::optional<ad::Value<S>> l_n, l_g, l_m;
  if (cfg.loss.use_node) {
    if (cfg.loss.negatives_k) {
      Rng rng(Rng::derive(epoch_seed, "subsample_node"));
      l_n = subsampled_contrast(tape, z1, z2, cfg.loss.tau_n, *cfg.loss.negatives_k, rng);
    } else {
      l_n = node_loss(tape, z1, z2, cfg.loss.tau_n);
    }
  }

  if (cfg.loss.use_group || cfg.loss.use_membership) {
    auto [eligible, edge_pos] = eligible_hyperedges(h1, deg1, deg2);
    ad::Value<S> y1 = project(tape, staged.edge_head, ad::row_gather(enc1.edge_embeddings, eligible));
    ad::Value<S> y2 = project(tape, staged.edge_head, ad::row_gather(enc2.edge_embeddings, eligible));

    if (cfg.loss.use_group) {
      if (cfg.loss.negatives_k) {
        Rng rng(Rng::derive(epoch_seed, "subsample_group"));
        l_g = subsampled_contrast(tape, y1, y2, cfg.loss.tau_g, *cfg.loss.negatives_k, rng);
      } else {
        l_g = group_loss(tape, y1, y2, cfg.loss.tau_g);
      }
    }

    if (cfg.loss.use_membership) {
      if (cfg.loss.membership_full_denominator) {
        l_m = membership_loss_full(tape, z1, y2, z2, y1, staged.discriminator, d.hypergraph,
                                   eligible, edge_pos, cfg.loss.tau_m);
      } else {
        std::vector<std::uint8_t> keep;
        if (cfg.membership_batch) {
          // without-replacement minibatch over eligible memberships
          std::vector<std::size_t> positions;
          const auto& pairs = d.hypergraph.memberships();
          for (std::size_t t = 0; t < pairs.size(); ++t)
            if (edge_pos[static_cast<std::size_t>(pairs[t].hyperedge)] >= 0) positions.push_back(t);
          if (static_cast<Index>(positions.size()) > *cfg.membership_batch) {
            Rng rng(Rng::derive(epoch_seed, "membership_batch"));
            for (std::size_t i = positions.size() - 1; i > 0; --i)
              std::swap(positions[i], positions[static_cast<std::size_t>(rng.next_below(i + 1))]);
            positions.resize(static_cast<std::size_t>(*cfg.membership_batch));
            keep.assign(pairs.size(), 0);
            for (const std::size_t t : positions) keep[t] = 1;
          }
        }
        Rng rng_a(Rng::derive(epoch_seed, "membership", std::uint64_t{1}));
        Rng rng_b(Rng::derive(epoch_seed, "membership", std::uint64_t{2}));
        MembershipSamples sa = sample_membership_negatives(d.hypergraph, eligible, edge_pos, rng_a,
                                                           keep.empty() ? nullptr : &keep);
        MembershipSamples sb = sample_membership_negatives(d.hypergraph, eligible, edge_pos, rng_b,
                                                           keep.empty() ? nullptr : &keep);
        out.skipped_node_anchored = sa.skipped_node_anchored + sb.skipped_node_anchored;
        out.skipped_edge_anchored = sa.skipped_edge_anchored + sb.skipped_edge_anchored;
        l_m = membership_loss(tape, z1, y2, z2, y1, staged.discriminator, sa, sb, cfg.loss.tau_m);
      }
    }
  }

  ad::Value<S> total = total_loss(l_n, l_g, l_m, cfg.loss);

  out.components.total = static_cast<double>(total.val()(0, 0));
  out.components.node = l_n ? static_cast<double>(l_n->val()(0, 0)) : 0.0;
  out.components.group = l_g ? static_cast<double>(l_g->val()(0, 0)) : 0.0;
  out.components.membership = l_m ? static_cast<double>(l_m->val()(0, 0)) : 0.0;

  if (backward) {
    tape.backward(total);
    out.grads.reserve(staged.registry_order.size());
    for (const auto v : staged.registry_order) {
      if (tape.grad_live(v.id))
        out.grads.push_back(tape.grad(v.id));
      else
        out.grads.push_back(Matrix<S>::Zero(v.rows(), v.cols()));
    }
  }
  return out;
}

template <typename S>
TrainedModel train_impl(const LabeledDataset& d, const TrainConfig& cfg) {
  ModelParams<S> params = init_model<S>(d.features.cols(), cfg);
  std::vector<ParamSlot<S>> registry = parameter_registry(params);
  typename AdamW<S>::Options opts;
  opts.learning_rate = cfg.learning_rate;
  opts.weight_decay = cfg.weight_decay;
  AdamW<S> optimizer(registry, opts);

  TrainedModel model;
  model.config = cfg;
  for (Index epoch = 0; epoch < cfg.epochs; ++epoch) {
    const auto t0 = std::chrono::steady_clock::now();
    const std::uint64_t epoch_seed = Rng::derive(cfg.seed, "epoch", static_cast<std::uint64_t>(epoch));
    EpochOutcome<S> outcome;
    try {
      outcome = run_epoch(d, cfg, params, epoch_seed, true);
    } catch (const NumericError& e) {
      throw NumericError("training aborted at epoch " + std::to_string(epoch) + ": " + e.what());
    }
    if (!std::isfinite(outcome.components.total))
      throw NumericError("training aborted at epoch " + std::to_string(epoch) +
                         ": non-finite loss (node=" + std::to_string(outcome.components.node) +
                         ", group=" + std::to_string(outcome.components.group) +
                         ", membership=" + std::to_string(outcome.components.membership) + ")");

    std::vector<const Matrix<S>*> grad_ptrs;
    grad_ptrs.reserve(outcome.grads.size());
    for (const auto& g : outcome.grads) grad_ptrs.push_back(&g);
    optimizer.step(grad_ptrs);

    model.loss_trace.push_back(outcome.components);
    model.skipped_node_anchored += outcome.skipped_node_anchored;
    model.skipped_edge_anchored += outcome.skipped_edge_anchored;
    const auto t1 = std::chrono::steady_clock::now();
    model.epoch_ms.push_back(std::chrono::duration<double, std::milli>(t1 - t0).count());
  }
  model.params = detail::cast_model<S, double>(params);
  return model;
}

}  // namespace detail

// Full-batch self-supervised training: one gradient step per epoch, all
// randomness derived from cfg.seed.
inline TrainedModel train(const LabeledDataset& d, const TrainConfig& cfg) {
  cfg.validate();
  d.validate();
  for (Index i = 0; i < d.hypergraph.num_nodes(); ++i)
    check_contract(d.hypergraph.node_degree_count(i) > 0,
                   "train: dataset contains isolated nodes; run remove_isolated_nodes first");
  if (cfg.precision == 64) return detail::train_impl<double>(d, cfg);
  return detail::train_impl<float>(d, cfg);
}

namespace detail {

template <typename S>
Matrix<double> embed_impl(const ModelParams<S>& params, const LabeledDataset& d, bool add_loops) {
  const Hypergraph h = add_loops ? hycl::add_self_loops(d.hypergraph) : d.hypergraph;
  const DegreeVectors deg = compute_degrees(h);
  ad::Tape<S> tape;
  // inference: parameters enter as constants, nothing is differentiated
  ModelParams<S> copy = params;
  EncoderValues<S> enc;
  enc.kind = copy.encoder.kind;
  for (const auto& l : copy.encoder.mean_pool)
    enc.mean_pool.push_back({tape.constant(l.theta_edge), tape.constant(l.bias_edge),
                             tape.constant(l.theta_node), tape.constant(l.bias_node),
                             tape.constant(l.slope_edge), tape.constant(l.slope_node)});
  for (const auto& l : copy.encoder.hgnn)
    enc.hgnn.push_back({tape.constant(l.theta), tape.constant(l.bias), tape.constant(l.slope)});

  FeatureInput<S> x;
  Matrix<S> cast = d.features.template cast<S>();
  ad::SparseRows<S> sparse;
  const double nnz = static_cast<double>((d.features.array() != 0.0).count());
  if (enc.kind == EncoderKind::MeanPool &&
      nnz < 0.25 * static_cast<double>(d.features.rows() * d.features.cols())) {
    sparse = ad::SparseRows<S>::from_dense(cast);
    x.sparse = &sparse;
  } else {
    x.dense = tape.constant(std::move(cast));
  }
  EncodedPair<S> out = encode(tape, enc, x, h, deg);
  return out.node_embeddings.val().template cast<double>();
}

}  // namespace detail

// Untrained model with the configured architecture and seed; the Random-Init
// baseline embeds with exactly these parameters.
inline TrainedModel random_init_model(const LabeledDataset& d, const TrainConfig& cfg) {
  cfg.validate();
  d.validate();
  TrainedModel m;
  m.config = cfg;
  if (cfg.precision == 64) {
    m.params = init_model<double>(d.features.cols(), cfg);
  } else {
    m.params = detail::cast_model<float, double>(init_model<float>(d.features.cols(), cfg));
  }
  return m;
}

struct EpochDiagnostics {
  LossComponents components;
  std::map<std::string, Matrix<double>> gradients;
  Index skipped_node_anchored = 0;
  Index skipped_edge_anchored = 0;
};

// One 64-bit forward/backward at a fixed epoch seed, gradients keyed by
// parameter name. The same seed replays identical views and negatives, which
// is what a finite-difference check needs.
inline EpochDiagnostics epoch_diagnostics(const LabeledDataset& d, const TrainConfig& cfg,
                                          ModelParams<double>& params, std::uint64_t epoch_seed,
                                          bool with_gradients = true) {
  auto outcome = detail::run_epoch<double>(d, cfg, params, epoch_seed, with_gradients);
  EpochDiagnostics diag;
  diag.components = outcome.components;
  diag.skipped_node_anchored = outcome.skipped_node_anchored;
  diag.skipped_edge_anchored = outcome.skipped_edge_anchored;
  if (with_gradients) {
    auto registry = parameter_registry(params);
    for (std::size_t k = 0; k < registry.size(); ++k)
      diag.gradients[registry[k].name] = outcome.grads[k];
  }
  return diag;
}

// Encoder forward on the clean hypergraph (plus self-loops when the model was
// trained with them); no projection heads, no gradients.
inline Matrix<double> embed(const TrainedModel& m, const LabeledDataset& d) {
  d.validate();
  check_contract(d.features.cols() ==
                     (m.config.encoder_kind == EncoderKind::MeanPool
                          ? m.params.encoder.mean_pool.front().theta_edge.rows()
                          : m.params.encoder.hgnn.front().theta.rows()),
                 "embed: dataset feature dimension does not match the model");
  if (m.config.precision == 64)
    return detail::embed_impl<double>(m.params, d, m.config.add_self_loops);
  const ModelParams<float> params = detail::cast_model<double, float>(m.params);
  return detail::embed_impl<float>(params, d, m.config.add_self_loops);
}

}  // namespace hycl
