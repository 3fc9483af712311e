#pragma once

#include <algorithm>
#include <string>
#include <vector>

#include "hycl/hypergraph.hpp"
#include "hycl/rng.hpp"

namespace hycl {

// Homophilous hypergraph generator: hyperedges draw members mostly from one
// "home" class, features are class-coherent bags of words. Produces exact
// node / hyperedge / membership counts so shape statistics can be pinned.
struct SynthConfig {
  Index num_nodes = 200;
  int num_classes = 4;
  Index num_hyperedges = 220;
  Index num_memberships = 660;  // sum of hyperedge sizes
  Index min_edge_size = 2;
  Index max_edge_size = 5;
  double homophily = 0.85;      // probability a member comes from the home class
  Index feature_dim = 64;
  Index words_per_node = 12;
  double topic_fidelity = 0.8;  // probability a word comes from the class topic block
  double label_noise = 0.0;     // fraction of emitted labels resampled uniformly
  std::uint64_t seed = 0;

  void validate() const {
    check_config(num_nodes > 0 && num_classes >= 2, "SynthConfig: need nodes and >= 2 classes");
    check_config(num_hyperedges > 0, "SynthConfig: need hyperedges");
    check_config(min_edge_size >= 1 && max_edge_size >= min_edge_size,
                 "SynthConfig: bad edge size bounds");
    check_config(num_memberships >= num_hyperedges * min_edge_size &&
                     num_memberships <= num_hyperedges * max_edge_size,
                 "SynthConfig: membership total incompatible with size bounds");
    check_config(num_memberships >= num_nodes, "SynthConfig: need at least one membership per node");
    check_config(homophily >= 0 && homophily <= 1, "SynthConfig: homophily in [0,1]");
    check_config(feature_dim >= num_classes, "SynthConfig: feature_dim below class count");
    check_config(words_per_node >= 1, "SynthConfig: words_per_node must be >= 1");
    check_config(label_noise >= 0 && label_noise <= 1, "SynthConfig: label_noise in [0,1]");
  }
};

inline LabeledDataset make_synthetic(const SynthConfig& cfg) {
  cfg.validate();
  Rng rng(Rng::derive(cfg.seed, "synth"));

  LabeledDataset d;
  d.num_classes = cfg.num_classes;
  d.labels.resize(static_cast<std::size_t>(cfg.num_nodes));
  std::vector<std::vector<Index>> class_members(static_cast<std::size_t>(cfg.num_classes));
  for (Index i = 0; i < cfg.num_nodes; ++i) {
    const int c = static_cast<int>(rng.next_below(static_cast<std::uint64_t>(cfg.num_classes)));
    d.labels[static_cast<std::size_t>(i)] = c;
    class_members[static_cast<std::size_t>(c)].push_back(i);
  }
  // guard against an empty class on tiny instances
  for (int c = 0; c < cfg.num_classes; ++c) {
    if (class_members[static_cast<std::size_t>(c)].empty()) {
      const Index donor = rng.next_index(cfg.num_nodes);
      const int old = d.labels[static_cast<std::size_t>(donor)];
      auto& from = class_members[static_cast<std::size_t>(old)];
      from.erase(std::find(from.begin(), from.end(), donor));
      d.labels[static_cast<std::size_t>(donor)] = c;
      class_members[static_cast<std::size_t>(c)].push_back(donor);
    }
  }

  // hyperedge sizes: start at the minimum, then spread the remaining
  // increments uniformly under the cap
  std::vector<Index> sizes(static_cast<std::size_t>(cfg.num_hyperedges), cfg.min_edge_size);
  Index leftover = cfg.num_memberships - cfg.num_hyperedges * cfg.min_edge_size;
  while (leftover > 0) {
    const Index e = rng.next_index(cfg.num_hyperedges);
    if (sizes[static_cast<std::size_t>(e)] < cfg.max_edge_size) {
      ++sizes[static_cast<std::size_t>(e)];
      --leftover;
    }
  }

  std::vector<std::vector<Index>> edges(static_cast<std::size_t>(cfg.num_hyperedges));
  std::vector<int> home(static_cast<std::size_t>(cfg.num_hyperedges));
  for (Index e = 0; e < cfg.num_hyperedges; ++e) {
    // home class weighted by class frequency
    const Index pick = rng.next_index(cfg.num_nodes);
    home[static_cast<std::size_t>(e)] = d.labels[static_cast<std::size_t>(pick)];
    auto& edge = edges[static_cast<std::size_t>(e)];
    while (static_cast<Index>(edge.size()) < sizes[static_cast<std::size_t>(e)]) {
      Index candidate;
      if (rng.next_bernoulli(cfg.homophily)) {
        const auto& pool = class_members[static_cast<std::size_t>(home[static_cast<std::size_t>(e)])];
        candidate = pool[static_cast<std::size_t>(rng.next_index(static_cast<Index>(pool.size())))];
      } else {
        candidate = rng.next_index(cfg.num_nodes);
      }
      if (std::find(edge.begin(), edge.end(), candidate) == edge.end()) edge.push_back(candidate);
    }
  }

  // coverage pass: swap isolated nodes into same-class hyperedges without
  // changing any edge size
  std::vector<Index> degree(static_cast<std::size_t>(cfg.num_nodes), 0);
  for (const auto& edge : edges)
    for (const Index i : edge) ++degree[static_cast<std::size_t>(i)];
  for (Index i = 0; i < cfg.num_nodes; ++i) {
    if (degree[static_cast<std::size_t>(i)] > 0) continue;
    const int c = d.labels[static_cast<std::size_t>(i)];
    bool placed = false;
    for (Index attempt = 0; attempt < 4 * cfg.num_hyperedges && !placed; ++attempt) {
      const Index e = rng.next_index(cfg.num_hyperedges);
      if (home[static_cast<std::size_t>(e)] != c && attempt < 2 * cfg.num_hyperedges) continue;
      auto& edge = edges[static_cast<std::size_t>(e)];
      if (std::find(edge.begin(), edge.end(), i) != edge.end()) continue;
      // evict a member that can afford to leave
      for (auto& member : edge) {
        if (degree[static_cast<std::size_t>(member)] >= 2) {
          --degree[static_cast<std::size_t>(member)];
          member = i;
          ++degree[static_cast<std::size_t>(i)];
          placed = true;
          break;
        }
      }
    }
    check_contract(placed, "make_synthetic: could not cover every node");
  }

  std::vector<Membership> pairs;
  pairs.reserve(static_cast<std::size_t>(cfg.num_memberships));
  for (Index e = 0; e < cfg.num_hyperedges; ++e)
    for (const Index i : edges[static_cast<std::size_t>(e)]) pairs.push_back({i, e});
  d.hypergraph = Hypergraph(cfg.num_nodes, cfg.num_hyperedges, std::move(pairs));

  // class-coherent bag-of-words: class c owns a contiguous topic block
  d.features = Matrix<double>::Zero(cfg.num_nodes, cfg.feature_dim);
  const Index block = cfg.feature_dim / cfg.num_classes;
  for (Index i = 0; i < cfg.num_nodes; ++i) {
    const Index base = block * d.labels[static_cast<std::size_t>(i)];
    for (Index w = 0; w < cfg.words_per_node; ++w) {
      Index word;
      if (rng.next_bernoulli(cfg.topic_fidelity))
        word = base + rng.next_index(block);
      else
        word = rng.next_index(cfg.feature_dim);
      d.features(i, word) = 1.0;
    }
  }

  // structure and features follow the latent classes above; the emitted
  // labels may carry observation noise
  if (cfg.label_noise > 0) {
    Rng noise(Rng::derive(cfg.seed, "label_noise"));
    for (Index i = 0; i < cfg.num_nodes; ++i)
      if (noise.next_bernoulli(cfg.label_noise))
        d.labels[static_cast<std::size_t>(i)] =
            static_cast<int>(noise.next_below(static_cast<std::uint64_t>(cfg.num_classes)));
  }

  d.class_names.clear();
  for (int c = 0; c < cfg.num_classes; ++c) d.class_names.push_back("class_" + std::to_string(c));
  return d;
}

// Shape presets mirroring benchmark statistics at desk scale.
inline SynthConfig synth_preset(const std::string& name, std::uint64_t seed) {
  SynthConfig cfg;
  cfg.seed = seed;
  if (name == "cora-c") {
    cfg.num_nodes = 1434;
    cfg.num_classes = 7;
    cfg.num_hyperedges = 1579;
    cfg.num_memberships = 4786;
    cfg.min_edge_size = 2;
    cfg.max_edge_size = 5;
    cfg.homophily = 0.85;
    cfg.feature_dim = 1433;
    cfg.words_per_node = 12;
    cfg.topic_fidelity = 0.5;
    cfg.label_noise = 0.12;
  } else if (name == "homophilous-200") {
    cfg.num_nodes = 200;
    cfg.num_classes = 4;
    cfg.num_hyperedges = 220;
    cfg.num_memberships = 660;
    cfg.homophily = 0.85;
    cfg.feature_dim = 64;
    cfg.words_per_node = 12;
    cfg.topic_fidelity = 0.8;
  } else {
    throw ConfigError("synth_preset: unknown preset '" + name + "'");
  }
  return cfg;
}

}  // namespace hycl
