#pragma once

#include <algorithm>
#include <array>
#include <optional>
#include <utility>
#include <vector>

#include "hycl/autodiff.hpp"
#include "hycl/hypergraph.hpp"
#include "hycl/model.hpp"
#include "hycl/rng.hpp"

namespace hycl {

struct LossConfig {
  double tau_n = 0.5;
  double tau_g = 0.5;
  double tau_m = 1.0;
  double omega_g = 1.0;
  double omega_m = 1.0;
  bool use_node = true;
  bool use_group = true;
  bool use_membership = true;
  std::optional<Index> negatives_k;       // subsample size for node/group contrast
  bool membership_full_denominator = false;  // sum over all valid negatives instead of sampling one

  void validate() const {
    check_config(tau_n > 0 && tau_g > 0 && tau_m > 0, "LossConfig: temperatures must be positive");
    check_config(omega_g >= 0 && omega_m >= 0, "LossConfig: loss weights must be nonnegative");
    check_config(use_node || use_group || use_membership,
                 "LossConfig: at least one loss component must be enabled");
    if (negatives_k) check_config(*negatives_k >= 1, "LossConfig: negatives_k must be >= 1");
  }
};

inline double cosine_similarity(const Eigen::RowVectorXd& u, const Eigen::RowVectorXd& v) {
  check_contract(u.cols() == v.cols(), "cosine_similarity: dimension mismatch");
  const double nu = std::max(u.norm(), ad::kNormClamp);
  const double nv = std::max(v.norm(), ad::kNormClamp);
  return u.dot(v) / (nu * nv);
}

namespace detail {

// k distinct draws from {0, ..., population-1} \ {exclude} via Floyd's
// algorithm, returned ascending.
inline std::vector<Index> sample_distinct_excluding(Rng& rng, Index population, Index exclude,
                                                    Index k) {
  const Index n = population - 1;
  check_contract(k >= 0 && k <= n, "sample_distinct_excluding: k out of range");
  std::vector<Index> picked;
  picked.reserve(static_cast<std::size_t>(k));
  for (Index j = n - k; j < n; ++j) {
    const Index t = rng.next_index(j + 1);
    const bool have = std::find(picked.begin(), picked.end(), t) != picked.end();
    picked.push_back(have ? j : t);
  }
  for (Index& v : picked)
    if (v >= exclude) ++v;
  std::sort(picked.begin(), picked.end());
  return picked;
}

// Symmetrized InfoNCE over a similarity matrix of normalized rows. When
// `selections` is present, the denominator of direction d for anchor i runs
// over selections[d][i] (which must contain the positive index i); otherwise
// it runs over every column.
template <typename S>
ad::Value<S> infonce(ad::Value<S> z1, ad::Value<S> z2, double tau,
                     const std::array<std::vector<std::vector<Index>>, 2>* selections) {
  ad::Value<S> z1n = ad::row_l2_normalize(z1);
  ad::Value<S> z2n = ad::row_l2_normalize(z2);
  ad::Value<S> sim = ad::scale(ad::matmul_nt(z1n, z2n), static_cast<S>(1.0 / tau));
  ad::Value<S> pos = ad::scale(ad::row_dot(z1n, z2n), static_cast<S>(1.0 / tau));

  ad::Value<S> lse1 = selections ? ad::row_lse_subset(sim, (*selections)[0]) : ad::row_lse(sim);
  ad::Value<S> simT = ad::transpose(sim);
  ad::Value<S> lse2 = selections ? ad::row_lse_subset(simT, (*selections)[1]) : ad::row_lse(simT);

  ad::Value<S> per_anchor = ad::sub(ad::add(lse1, lse2), ad::scale(pos, S{2}));
  return ad::scale(ad::mean_all(per_anchor), S{0.5});
}

}  // namespace detail

// Node-level contrast: anchors in one view, positives the same row of the
// other view, negatives every other row of that view; symmetrized and
// averaged over all nodes.
template <typename S>
ad::Value<S> node_loss([[maybe_unused]] ad::Tape<S>& tape, ad::Value<S> z1, ad::Value<S> z2, double tau) {
  check_contract(z1.rows() == z2.rows() && z1.cols() == z2.cols(), "node_loss: shape mismatch");
  check_contract(z1.rows() >= 2, "node_loss: need at least 2 rows");
  return detail::infonce(z1, z2, tau, nullptr);
}

// Group-level contrast over hyperedge rows. Callers pass projections already
// restricted to eligible hyperedges (no self-loops, nonempty in both views).
template <typename S>
ad::Value<S> group_loss([[maybe_unused]] ad::Tape<S>& tape, ad::Value<S> y1, ad::Value<S> y2, double tau) {
  check_contract(y1.rows() == y2.rows() && y1.cols() == y2.cols(), "group_loss: shape mismatch");
  check_contract(y1.rows() >= 2, "group_loss: need at least 2 eligible hyperedges");
  return detail::infonce(y1, y2, tau, nullptr);
}

// InfoNCE where each anchor's denominator holds the positive plus k distinct
// uniformly sampled negatives, resampled on every call. With
// k = population - 1 the selection is every index and the result matches the
// full loss bit for bit.
template <typename S>
ad::Value<S> subsampled_contrast([[maybe_unused]] ad::Tape<S>& tape, ad::Value<S> z1, ad::Value<S> z2, double tau,
                                 Index k, Rng& rng) {
  check_contract(z1.rows() == z2.rows() && z1.cols() == z2.cols(), "subsampled_contrast: shape mismatch");
  const Index n = z1.rows();
  check_config(k >= 1 && k <= n - 1, "subsampled_contrast: k must lie in [1, population-1]");
  std::array<std::vector<std::vector<Index>>, 2> selections;
  for (auto& dir : selections) {
    dir.resize(static_cast<std::size_t>(n));
    for (Index i = 0; i < n; ++i) {
      std::vector<Index> sel = detail::sample_distinct_excluding(rng, n, i, k);
      sel.insert(std::lower_bound(sel.begin(), sel.end(), i), i);
      dir[static_cast<std::size_t>(i)] = std::move(sel);
    }
  }
  return detail::infonce(z1, z2, tau, &selections);
}

// Fixed negative draws for one view pairing, taken before the tape is built
// so gradient checks can replay them. The two anchored sides of a membership
// are sampled and skipped independently: a node incident to every eligible
// hyperedge loses only its node-anchored term.
struct MembershipSamples {
  // node-anchored terms: anchor z_i, positive y_j, negative y_k with k not incident to i
  std::vector<Index> na_node;
  std::vector<Index> na_edge;           // position in the eligible projection rows
  std::vector<Index> na_negative_edge;  // position in the eligible projection rows
  // edge-anchored terms: anchor y_j, positive z_i, negative z_k with k outside e_j
  std::vector<Index> ea_node;
  std::vector<Index> ea_edge;
  std::vector<Index> ea_negative_node;
  Index skipped_node_anchored = 0;
  Index skipped_edge_anchored = 0;
  Index considered = 0;  // memberships whose hyperedge was eligible
};

// `eligible_edges` lists original hyperedge ids ascending; `edge_pos` maps a
// hyperedge id to its row in the eligible projection matrices (-1 when
// ineligible). Negatives are uniform over the valid complement, drawn by
// rejection.
inline MembershipSamples sample_membership_negatives(const Hypergraph& original,
                                                     const std::vector<Index>& eligible_edges,
                                                     const std::vector<Index>& edge_pos, Rng& rng,
                                                     const std::vector<std::uint8_t>* keep = nullptr) {
  MembershipSamples s;
  const Index n_edges = static_cast<Index>(eligible_edges.size());
  const Index n_nodes = original.num_nodes();

  std::vector<Index> eligible_incident(static_cast<std::size_t>(n_nodes), 0);
  for (const auto& m : original.memberships())
    if (edge_pos[static_cast<std::size_t>(m.hyperedge)] >= 0)
      ++eligible_incident[static_cast<std::size_t>(m.node)];

  for (std::size_t t = 0; t < original.memberships().size(); ++t) {
    if (keep && !(*keep)[t]) continue;  // outside this epoch's minibatch
    const auto& m = original.memberships()[t];
    const Index jpos = edge_pos[static_cast<std::size_t>(m.hyperedge)];
    if (jpos < 0) continue;  // self-loop or emptied by augmentation
    ++s.considered;

    if (eligible_incident[static_cast<std::size_t>(m.node)] < n_edges) {
      for (;;) {
        const Index cand = rng.next_index(n_edges);
        if (!original.has_membership(m.node, eligible_edges[static_cast<std::size_t>(cand)])) {
          s.na_node.push_back(m.node);
          s.na_edge.push_back(jpos);
          s.na_negative_edge.push_back(cand);
          break;
        }
      }
    } else {
      ++s.skipped_node_anchored;
    }

    if (original.edge_size(m.hyperedge) < n_nodes) {
      for (;;) {
        const Index cand = rng.next_index(n_nodes);
        if (!original.has_membership(cand, m.hyperedge)) {
          s.ea_node.push_back(m.node);
          s.ea_edge.push_back(jpos);
          s.ea_negative_node.push_back(cand);
          break;
        }
      }
    } else {
      ++s.skipped_edge_anchored;
    }
  }
  return s;
}

namespace detail {

// Both anchored sides of l_m for one view pairing. Each side contributes the
// mean of its kept terms, which equals the 1/K-normalized per-membership sum
// whenever nothing was skipped.
template <typename S>
ad::Value<S> membership_pairing_terms(ad::Value<S> z, ad::Value<S> y, ad::Value<S> s,
                                      const MembershipSamples& samples, double tau) {
  const S inv_tau = static_cast<S>(1.0 / tau);
  std::optional<ad::Value<S>> acc;
  if (!samples.na_node.empty()) {
    ad::Value<S> pos = ad::scale(
        ad::sigmoid(ad::bilinear_pairs(z, s, y, samples.na_node, samples.na_edge)), inv_tau);
    ad::Value<S> neg = ad::scale(
        ad::sigmoid(ad::bilinear_pairs(z, s, y, samples.na_node, samples.na_negative_edge)), inv_tau);
    acc = ad::mean_all(ad::sub(ad::row_lse(ad::hstack2(pos, neg)), pos));
  }
  if (!samples.ea_node.empty()) {
    ad::Value<S> pos = ad::scale(
        ad::sigmoid(ad::bilinear_pairs(z, s, y, samples.ea_node, samples.ea_edge)), inv_tau);
    ad::Value<S> neg = ad::scale(
        ad::sigmoid(ad::bilinear_pairs(z, s, y, samples.ea_negative_node, samples.ea_edge)), inv_tau);
    ad::Value<S> term = ad::mean_all(ad::sub(ad::row_lse(ad::hstack2(pos, neg)), pos));
    acc = acc ? ad::add(*acc, term) : term;
  }
  check_contract(acc.has_value(), "membership terms: every anchored term was skipped");
  return *acc;
}

// Full-denominator variant: anchors contrast against every valid negative
// rather than one sample.
template <typename S>
ad::Value<S> membership_pairing_terms_full(ad::Value<S> z, ad::Value<S> y,
                                           ad::Value<S> s, const Hypergraph& original,
                                           const std::vector<Index>& eligible_edges,
                                           const std::vector<Index>& edge_pos, double tau) {
  const S inv_tau = static_cast<S>(1.0 / tau);
  ad::Value<S> scores = ad::scale(ad::sigmoid(ad::matmul_nt(ad::matmul(z, s), y)), inv_tau);

  std::vector<Index> mi, mj;
  for (const auto& m : original.memberships()) {
    const Index jpos = edge_pos[static_cast<std::size_t>(m.hyperedge)];
    if (jpos < 0) continue;
    mi.push_back(m.node);
    mj.push_back(jpos);
  }
  check_contract(!mi.empty(), "membership loss: no eligible memberships");

  // node-anchored: row i of `scores`, columns = positive j plus all eligible
  // hyperedges not containing i
  std::vector<std::vector<Index>> node_lists(mi.size());
  std::vector<std::vector<Index>> edge_lists(mi.size());
  for (std::size_t t = 0; t < mi.size(); ++t) {
    std::vector<Index>& nl = node_lists[t];
    for (Index c = 0; c < static_cast<Index>(eligible_edges.size()); ++c)
      if (c == mj[t] || !original.has_membership(mi[t], eligible_edges[static_cast<std::size_t>(c)]))
        nl.push_back(c);
    std::vector<Index>& el = edge_lists[t];
    for (Index r = 0; r < original.num_nodes(); ++r)
      if (r == mi[t] || !original.has_membership(r, eligible_edges[static_cast<std::size_t>(mj[t])]))
        el.push_back(r);
  }

  ad::Value<S> node_rows = ad::row_gather(scores, mi);
  ad::Value<S> edge_rows = ad::row_gather(ad::transpose(scores), mj);
  ad::Value<S> node_lse = ad::row_lse_subset(node_rows, std::move(node_lists));
  ad::Value<S> edge_lse = ad::row_lse_subset(edge_rows, std::move(edge_lists));

  // positive entries scores(mi[t], mj[t]); the LSE of a singleton list is the
  // entry itself, gradient included
  std::vector<std::vector<Index>> pos_lists(mi.size());
  for (std::size_t t = 0; t < mi.size(); ++t) pos_lists[t] = {mj[t]};
  ad::Value<S> pos_entries = ad::row_lse_subset(node_rows, std::move(pos_lists));

  ad::Value<S> terms = ad::sub(ad::add(node_lse, edge_lse), ad::scale(pos_entries, S{2}));
  return ad::mean_all(terms);
}

}  // namespace detail

// Membership-level contrast with one sampled negative per anchored term.
// The 1/(2K) normalization of the per-membership sum equals half the mean of
// the four per-membership terms.
template <typename S>
ad::Value<S> membership_loss([[maybe_unused]] ad::Tape<S>& tape, ad::Value<S> z1, ad::Value<S> y2, ad::Value<S> z2,
                             ad::Value<S> y1, ad::Value<S> s, const MembershipSamples& pairing_a,
                             const MembershipSamples& pairing_b, double tau) {
  check_contract(pairing_a.considered > 0 && pairing_b.considered > 0,
                 "membership_loss: no eligible memberships");
  check_contract(!pairing_a.na_node.empty() || !pairing_a.ea_node.empty(),
                 "membership_loss: every term was skipped");
  ad::Value<S> a = detail::membership_pairing_terms(z1, y2, s, pairing_a, tau);
  ad::Value<S> b = detail::membership_pairing_terms(z2, y1, s, pairing_b, tau);
  return ad::scale(ad::add(a, b), S{0.5});
}

template <typename S>
ad::Value<S> membership_loss_full([[maybe_unused]] ad::Tape<S>& tape, ad::Value<S> z1, ad::Value<S> y2,
                                  ad::Value<S> z2, ad::Value<S> y1, ad::Value<S> s,
                                  const Hypergraph& original, const std::vector<Index>& eligible_edges,
                                  const std::vector<Index>& edge_pos, double tau) {
  ad::Value<S> a =
      detail::membership_pairing_terms_full(z1, y2, s, original, eligible_edges, edge_pos, tau);
  ad::Value<S> b =
      detail::membership_pairing_terms_full(z2, y1, s, original, eligible_edges, edge_pos, tau);
  return ad::scale(ad::add(a, b), S{0.5});
}

// L = L_n + omega_g L_g + omega_m L_m with disabled components contributing 0.
template <typename S>
ad::Value<S> total_loss(std::optional<ad::Value<S>> l_n,
                        std::optional<ad::Value<S>> l_g, std::optional<ad::Value<S>> l_m,
                        const LossConfig& cfg) {
  cfg.validate();
  std::optional<ad::Value<S>> total;
  auto accumulate = [&](std::optional<ad::Value<S>> term, double weight) {
    if (!term) return;
    ad::Value<S> scaled = ad::scale(*term, static_cast<S>(weight));
    total = total ? ad::add(*total, scaled) : scaled;
  };
  if (cfg.use_node) accumulate(l_n, 1.0);
  if (cfg.use_group) accumulate(l_g, cfg.omega_g);
  if (cfg.use_membership) accumulate(l_m, cfg.omega_m);
  check_contract(total.has_value(), "total_loss: no loss component produced");
  return *total;
}

}  // namespace hycl
