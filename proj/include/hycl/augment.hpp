#pragma once

#include <utility>
#include <vector>

#include "hycl/hypergraph.hpp"
#include "hycl/rng.hpp"

namespace hycl {

struct AugmentConfig {
  double p_f = 0.0;  // feature-column mask rate
  double p_m = 0.0;  // membership mask rate
  double p_n = 0.0;  // node mask rate
  double p_e = 0.0;  // hyperedge mask rate

  void validate() const {
    for (const double p : {p_f, p_m, p_n, p_e})
      check_config(p >= 0.0 && p <= 1.0, "AugmentConfig: rates must lie in [0, 1]");
  }
};

// A corrupted copy of the hypergraph. Masking removes memberships or zeroes
// feature columns; it never reindexes nodes or hyperedges.
struct View {
  Matrix<double> features;
  Hypergraph hypergraph;
};

// One Bernoulli(1 - p_f) draw per feature column, applied to every row.
inline Matrix<double> mask_features(const Matrix<double>& x, double p_f, Rng& rng) {
  check_config(p_f >= 0.0 && p_f <= 1.0, "mask_features: p_f must lie in [0, 1]");
  Matrix<double> out = x;
  for (Index c = 0; c < x.cols(); ++c)
    if (!rng.next_bernoulli(1.0 - p_f)) out.col(c).setZero();
  return out;
}

// Keeps each membership independently with probability 1 - p_m.
inline Hypergraph mask_memberships(const Hypergraph& h, double p_m, Rng& rng) {
  check_config(p_m >= 0.0 && p_m <= 1.0, "mask_memberships: p_m must lie in [0, 1]");
  std::vector<Membership> kept;
  kept.reserve(h.memberships().size());
  for (const auto& m : h.memberships())
    if (rng.next_bernoulli(1.0 - p_m)) kept.push_back(m);
  return Hypergraph(h.num_nodes(), h.num_hyperedges(), std::move(kept), h.hyperedge_weights(),
                    h.self_loop_flags());
}

// Drops every membership of a masked node.
inline Hypergraph mask_nodes(const Hypergraph& h, double p_n, Rng& rng) {
  check_config(p_n >= 0.0 && p_n <= 1.0, "mask_nodes: p_n must lie in [0, 1]");
  std::vector<std::uint8_t> keep(static_cast<std::size_t>(h.num_nodes()));
  for (auto& k : keep) k = rng.next_bernoulli(1.0 - p_n) ? 1 : 0;
  std::vector<Membership> kept;
  kept.reserve(h.memberships().size());
  for (const auto& m : h.memberships())
    if (keep[static_cast<std::size_t>(m.node)]) kept.push_back(m);
  return Hypergraph(h.num_nodes(), h.num_hyperedges(), std::move(kept), h.hyperedge_weights(),
                    h.self_loop_flags());
}

// Drops every membership of a masked hyperedge.
inline Hypergraph mask_hyperedges(const Hypergraph& h, double p_e, Rng& rng) {
  check_config(p_e >= 0.0 && p_e <= 1.0, "mask_hyperedges: p_e must lie in [0, 1]");
  std::vector<std::uint8_t> keep(static_cast<std::size_t>(h.num_hyperedges()));
  for (auto& k : keep) k = rng.next_bernoulli(1.0 - p_e) ? 1 : 0;
  std::vector<Membership> kept;
  kept.reserve(h.memberships().size());
  for (const auto& m : h.memberships())
    if (keep[static_cast<std::size_t>(m.hyperedge)]) kept.push_back(m);
  return Hypergraph(h.num_nodes(), h.num_hyperedges(), std::move(kept), h.hyperedge_weights(),
                    h.self_loop_flags());
}

inline View make_view(const Matrix<double>& features, const Hypergraph& h, const AugmentConfig& cfg,
                      Rng& rng) {
  View v;
  v.hypergraph = mask_memberships(h, cfg.p_m, rng);
  if (cfg.p_n > 0.0) v.hypergraph = mask_nodes(v.hypergraph, cfg.p_n, rng);
  if (cfg.p_e > 0.0) v.hypergraph = mask_hyperedges(v.hypergraph, cfg.p_e, rng);
  v.features = mask_features(features, cfg.p_f, rng);
  return v;
}

// Two independently corrupted views with identical rates. view_seed feeds two
// child streams so the draws never overlap.
inline std::pair<View, View> make_views(const LabeledDataset& d, const AugmentConfig& cfg,
                                        std::uint64_t view_seed) {
  cfg.validate();
  Rng rng1(Rng::derive(view_seed, "view", std::uint64_t{1}));
  Rng rng2(Rng::derive(view_seed, "view", std::uint64_t{2}));
  return {make_view(d.features, d.hypergraph, cfg, rng1),
          make_view(d.features, d.hypergraph, cfg, rng2)};
}

}  // namespace hycl
