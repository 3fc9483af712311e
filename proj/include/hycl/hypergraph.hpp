#pragma once

#include <algorithm>
#include <numeric>
#include <string>
#include <utility>
#include <vector>

#include "hycl/common.hpp"
#include "hycl/rng.hpp"

namespace hycl {

struct Membership {
  Index node;
  Index hyperedge;

  friend bool operator==(const Membership&, const Membership&) = default;
};

// Sparse incidence structure. Memberships are kept as a flat pair list in
// canonical (hyperedge, node) order, with CSR-style adjacency in both
// directions so either aggregation direction is an O(K) walk.
class Hypergraph {
 public:
  Hypergraph() = default;

  Hypergraph(Index num_nodes, Index num_hyperedges, std::vector<Membership> memberships,
             std::vector<double> hyperedge_weights = {}, std::vector<std::uint8_t> self_loop_flags = {})
      : num_nodes_(num_nodes),
        num_hyperedges_(num_hyperedges),
        memberships_(std::move(memberships)),
        hyperedge_weights_(std::move(hyperedge_weights)),
        self_loop_flags_(std::move(self_loop_flags)) {
    if (hyperedge_weights_.empty()) hyperedge_weights_.assign(static_cast<std::size_t>(num_hyperedges_), 1.0);
    if (self_loop_flags_.empty()) self_loop_flags_.assign(static_cast<std::size_t>(num_hyperedges_), 0);
    validate();
    build_adjacency();
  }

  static Hypergraph from_edge_lists(Index num_nodes, const std::vector<std::vector<Index>>& edges) {
    std::vector<Membership> pairs;
    for (Index j = 0; j < static_cast<Index>(edges.size()); ++j)
      for (const Index i : edges[static_cast<std::size_t>(j)]) pairs.push_back({i, j});
    return Hypergraph(num_nodes, static_cast<Index>(edges.size()), std::move(pairs));
  }

  Index num_nodes() const { return num_nodes_; }
  Index num_hyperedges() const { return num_hyperedges_; }
  Index num_memberships() const { return static_cast<Index>(memberships_.size()); }

  const std::vector<Membership>& memberships() const { return memberships_; }
  const std::vector<double>& hyperedge_weights() const { return hyperedge_weights_; }
  bool is_self_loop(Index j) const { return self_loop_flags_[static_cast<std::size_t>(j)] != 0; }
  const std::vector<std::uint8_t>& self_loop_flags() const { return self_loop_flags_; }

  // Nodes of hyperedge j, ascending.
  std::pair<const Index*, const Index*> edge_members(Index j) const {
    return {edge_adj_.data() + edge_offsets_[static_cast<std::size_t>(j)],
            edge_adj_.data() + edge_offsets_[static_cast<std::size_t>(j) + 1]};
  }

  // Hyperedges of node i, ascending.
  std::pair<const Index*, const Index*> node_edges(Index i) const {
    return {node_adj_.data() + node_offsets_[static_cast<std::size_t>(i)],
            node_adj_.data() + node_offsets_[static_cast<std::size_t>(i) + 1]};
  }

  Index edge_size(Index j) const {
    return static_cast<Index>(edge_offsets_[static_cast<std::size_t>(j) + 1] -
                              edge_offsets_[static_cast<std::size_t>(j)]);
  }

  Index node_degree_count(Index i) const {
    return static_cast<Index>(node_offsets_[static_cast<std::size_t>(i) + 1] -
                              node_offsets_[static_cast<std::size_t>(i)]);
  }

  bool has_membership(Index node, Index hyperedge) const {
    auto [b, e] = edge_members(hyperedge);
    return std::binary_search(b, e, node);
  }

 private:
  void validate() const {
    check_contract(num_nodes_ >= 0 && num_hyperedges_ >= 0, "Hypergraph: negative counts");
    check_contract(static_cast<Index>(hyperedge_weights_.size()) == num_hyperedges_,
                   "Hypergraph: weight count != num_hyperedges");
    check_contract(static_cast<Index>(self_loop_flags_.size()) == num_hyperedges_,
                   "Hypergraph: flag count != num_hyperedges");
    for (const double w : hyperedge_weights_)
      check_contract(w > 0.0, "Hypergraph: hyperedge weights must be positive");
    for (const auto& m : memberships_) {
      check_contract(m.node >= 0 && m.node < num_nodes_, "Hypergraph: node index out of range");
      check_contract(m.hyperedge >= 0 && m.hyperedge < num_hyperedges_,
                     "Hypergraph: hyperedge index out of range");
    }
  }

  void build_adjacency() {
    std::sort(memberships_.begin(), memberships_.end(), [](const Membership& a, const Membership& b) {
      return a.hyperedge != b.hyperedge ? a.hyperedge < b.hyperedge : a.node < b.node;
    });
    for (std::size_t t = 1; t < memberships_.size(); ++t)
      check_contract(!(memberships_[t] == memberships_[t - 1]),
                     "Hypergraph: duplicate (node, hyperedge) membership");

    const std::size_t k = memberships_.size();
    edge_offsets_.assign(static_cast<std::size_t>(num_hyperedges_) + 1, 0);
    node_offsets_.assign(static_cast<std::size_t>(num_nodes_) + 1, 0);
    for (const auto& m : memberships_) {
      ++edge_offsets_[static_cast<std::size_t>(m.hyperedge) + 1];
      ++node_offsets_[static_cast<std::size_t>(m.node) + 1];
    }
    std::partial_sum(edge_offsets_.begin(), edge_offsets_.end(), edge_offsets_.begin());
    std::partial_sum(node_offsets_.begin(), node_offsets_.end(), node_offsets_.begin());

    edge_adj_.resize(k);
    node_adj_.resize(k);
    std::vector<std::size_t> cursor(node_offsets_.begin(), node_offsets_.end() - 1);
    std::size_t t = 0;
    for (const auto& m : memberships_) {
      edge_adj_[t++] = m.node;  // memberships already sorted by (edge, node)
      node_adj_[cursor[static_cast<std::size_t>(m.node)]++] = m.hyperedge;
    }
  }

  Index num_nodes_ = 0;
  Index num_hyperedges_ = 0;
  std::vector<Membership> memberships_;
  std::vector<double> hyperedge_weights_;
  std::vector<std::uint8_t> self_loop_flags_;
  std::vector<std::size_t> edge_offsets_;
  std::vector<Index> edge_adj_;
  std::vector<std::size_t> node_offsets_;
  std::vector<Index> node_adj_;
};

struct DegreeVectors {
  Vector<double> node_degrees;        // d_i = sum of w_j over incident hyperedges
  std::vector<Index> hyperedge_degrees;  // delta_j = member count
};

inline DegreeVectors compute_degrees(const Hypergraph& h) {
  DegreeVectors d;
  d.node_degrees = Vector<double>::Zero(h.num_nodes());
  d.hyperedge_degrees.assign(static_cast<std::size_t>(h.num_hyperedges()), 0);
  for (const auto& m : h.memberships()) {
    d.node_degrees[m.node] += h.hyperedge_weights()[static_cast<std::size_t>(m.hyperedge)];
    ++d.hyperedge_degrees[static_cast<std::size_t>(m.hyperedge)];
  }
  return d;
}

// Appends one single-node hyperedge per node (unit weight, flagged), leaving
// the original hyperedges untouched.
inline Hypergraph add_self_loops(const Hypergraph& h) {
  std::vector<Membership> pairs = h.memberships();
  std::vector<double> weights = h.hyperedge_weights();
  std::vector<std::uint8_t> flags = h.self_loop_flags();
  pairs.reserve(pairs.size() + static_cast<std::size_t>(h.num_nodes()));
  for (Index i = 0; i < h.num_nodes(); ++i) {
    pairs.push_back({i, h.num_hyperedges() + i});
    weights.push_back(1.0);
    flags.push_back(1);
  }
  return Hypergraph(h.num_nodes(), h.num_hyperedges() + h.num_nodes(), std::move(pairs),
                    std::move(weights), std::move(flags));
}

struct LabeledDataset {
  Hypergraph hypergraph;
  Matrix<double> features;   // |V| x F
  std::vector<int> labels;   // per node, in [0, num_classes)
  int num_classes = 0;
  std::vector<std::string> class_names;  // optional

  void validate() const {
    check_contract(features.rows() == hypergraph.num_nodes(), "LabeledDataset: feature row count != num_nodes");
    check_contract(static_cast<Index>(labels.size()) == hypergraph.num_nodes(),
                   "LabeledDataset: label count != num_nodes");
    for (const int y : labels)
      check_contract(y >= 0 && y < num_classes, "LabeledDataset: label out of range");
  }
};

struct IsolatedNodeRemoval {
  LabeledDataset dataset;
  std::vector<Index> old_to_new;  // -1 for removed nodes
};

inline IsolatedNodeRemoval remove_isolated_nodes(const LabeledDataset& d) {
  const Hypergraph& h = d.hypergraph;
  std::vector<Index> old_to_new(static_cast<std::size_t>(h.num_nodes()), -1);
  Index kept = 0;
  for (Index i = 0; i < h.num_nodes(); ++i)
    if (h.node_degree_count(i) > 0) old_to_new[static_cast<std::size_t>(i)] = kept++;

  std::vector<Membership> pairs;
  pairs.reserve(h.memberships().size());
  for (const auto& m : h.memberships())
    pairs.push_back({old_to_new[static_cast<std::size_t>(m.node)], m.hyperedge});

  IsolatedNodeRemoval out;
  out.dataset.hypergraph = Hypergraph(kept, h.num_hyperedges(), std::move(pairs),
                                      h.hyperedge_weights(), h.self_loop_flags());
  out.dataset.features.resize(kept, d.features.cols());
  out.dataset.labels.resize(static_cast<std::size_t>(kept));
  for (Index i = 0; i < h.num_nodes(); ++i) {
    const Index ni = old_to_new[static_cast<std::size_t>(i)];
    if (ni < 0) continue;
    out.dataset.features.row(ni) = d.features.row(i);
    out.dataset.labels[static_cast<std::size_t>(ni)] = d.labels[static_cast<std::size_t>(i)];
  }
  out.dataset.num_classes = d.num_classes;
  out.dataset.class_names = d.class_names;
  out.old_to_new = std::move(old_to_new);
  return out;
}

struct Split {
  std::vector<Index> train;
  std::vector<Index> valid;
  std::vector<Index> test;
};

// Floors each ratio; the rounding remainder lands in the test set.
inline Split random_split(Index num_nodes, double train_ratio, double valid_ratio, double test_ratio,
                          std::uint64_t seed) {
  check_config(train_ratio > 0 && valid_ratio > 0 && test_ratio > 0, "random_split: ratios must be positive");
  check_config(std::abs(train_ratio + valid_ratio + test_ratio - 1.0) < 1e-9,
               "random_split: ratios must sum to 1");

  std::vector<Index> order(static_cast<std::size_t>(num_nodes));
  std::iota(order.begin(), order.end(), Index{0});
  Rng rng(Rng::derive(seed, "split"));
  for (Index i = num_nodes - 1; i > 0; --i)
    std::swap(order[static_cast<std::size_t>(i)], order[static_cast<std::size_t>(rng.next_index(i + 1))]);

  const auto n_train = static_cast<Index>(std::floor(train_ratio * static_cast<double>(num_nodes)));
  const auto n_valid = static_cast<Index>(std::floor(valid_ratio * static_cast<double>(num_nodes)));
  Split s;
  s.train.assign(order.begin(), order.begin() + n_train);
  s.valid.assign(order.begin() + n_train, order.begin() + n_train + n_valid);
  s.test.assign(order.begin() + n_train + n_valid, order.end());
  std::sort(s.train.begin(), s.train.end());
  std::sort(s.valid.begin(), s.valid.end());
  std::sort(s.test.begin(), s.test.end());
  return s;
}

}  // namespace hycl
