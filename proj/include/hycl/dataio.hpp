#pragma once

#include <cstdint>
#include <cstdio>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <map>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include <json.hpp>

#include "hycl/eval.hpp"
#include "hycl/hypergraph.hpp"
#include "hycl/trainer.hpp"

namespace hycl {

namespace io {

using nlohmann::json;

inline json read_json_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw DataError("cannot open file: " + path);
  json j;
  try {
    in >> j;
  } catch (const json::parse_error& e) {
    throw DataError("parse failure in " + path + ": " + e.what());
  }
  return j;
}

inline void write_json_file(const std::string& path, const json& j) {
  std::ofstream out(path);
  if (!out) throw DataError("cannot write file: " + path);
  out << j.dump(2) << '\n';
  if (!out) throw DataError("write failure: " + path);
}

inline void reject_unknown_keys(const json& j, const std::vector<std::string>& known,
                                const std::string& context) {
  for (const auto& [key, _] : j.items()) {
    if (std::find(known.begin(), known.end(), key) == known.end())
      throw DataError(context + ": unknown key '" + key + "'");
  }
}

}  // namespace io

inline constexpr int kDatasetSchemaVersion = 1;

// Canonical dataset format: JSON with hyperedges as node-index lists, dense
// feature rows, and per-node class indices.
inline void save_dataset(const LabeledDataset& d, const std::string& path) {
  d.validate();
  io::json j;
  j["schema_version"] = kDatasetSchemaVersion;
  j["num_nodes"] = d.hypergraph.num_nodes();
  io::json edges = io::json::array();
  for (Index e = 0; e < d.hypergraph.num_hyperedges(); ++e) {
    auto [b, end] = d.hypergraph.edge_members(e);
    edges.push_back(std::vector<Index>(b, end));
  }
  j["hyperedges"] = std::move(edges);
  io::json feats = io::json::array();
  for (Index r = 0; r < d.features.rows(); ++r) {
    io::json row = io::json::array();
    for (Index c = 0; c < d.features.cols(); ++c) row.push_back(d.features(r, c));
    feats.push_back(std::move(row));
  }
  j["features"] = std::move(feats);
  j["labels"] = d.labels;
  j["num_classes"] = d.num_classes;
  if (!d.class_names.empty()) j["class_names"] = d.class_names;
  io::write_json_file(path, j);
}

inline LabeledDataset load_dataset(const std::string& path) {
  const io::json j = io::read_json_file(path);
  io::reject_unknown_keys(
      j, {"schema_version", "num_nodes", "hyperedges", "features", "labels", "num_classes", "class_names"},
      path);
  for (const char* key : {"num_nodes", "hyperedges", "features", "labels", "num_classes"})
    if (!j.contains(key)) throw DataError(path + ": missing field '" + std::string(key) + "'");
  if (j.contains("schema_version") && j["schema_version"].get<int>() != kDatasetSchemaVersion)
    throw DataError(path + ": unsupported schema_version");

  LabeledDataset d;
  const Index num_nodes = j["num_nodes"].get<Index>();
  if (num_nodes <= 0) throw DataError(path + ": num_nodes must be positive");

  std::vector<Membership> pairs;
  Index edge_id = 0;
  for (const auto& edge : j["hyperedges"]) {
    for (const auto& v : edge) {
      const Index node = v.get<Index>();
      if (node < 0 || node >= num_nodes)
        throw DataError(path + ": hyperedges[" + std::to_string(edge_id) + "] contains node index " +
                        std::to_string(node) + " out of range [0, " + std::to_string(num_nodes) + ")");
      pairs.push_back({node, edge_id});
    }
    ++edge_id;
  }
  try {
    d.hypergraph = Hypergraph(num_nodes, edge_id, std::move(pairs));
  } catch (const ContractError& e) {
    throw DataError(path + ": " + e.what());
  }

  const auto& feats = j["features"];
  if (static_cast<Index>(feats.size()) != num_nodes)
    throw DataError(path + ": features row count " + std::to_string(feats.size()) +
                    " != num_nodes " + std::to_string(num_nodes));
  const Index f = feats.empty() ? 0 : static_cast<Index>(feats[0].size());
  d.features.resize(num_nodes, f);
  for (Index r = 0; r < num_nodes; ++r) {
    if (static_cast<Index>(feats[r].size()) != f)
      throw DataError(path + ": features[" + std::to_string(r) + "] has inconsistent width");
    for (Index c = 0; c < f; ++c) d.features(r, c) = feats[r][c].get<double>();
  }

  d.num_classes = j["num_classes"].get<int>();
  const auto& labels = j["labels"];
  if (static_cast<Index>(labels.size()) != num_nodes)
    throw DataError(path + ": labels count != num_nodes");
  for (const auto& l : labels) {
    const int y = l.get<int>();
    if (y < 0 || y >= d.num_classes)
      throw DataError(path + ": label " + std::to_string(y) + " out of range [0, " +
                      std::to_string(d.num_classes) + ")");
    d.labels.push_back(y);
  }
  if (j.contains("class_names")) d.class_names = j["class_names"].get<std::vector<std::string>>();
  return d;
}

// Structure-only ingestion: one hyperedge per line, whitespace-separated node
// indices. Lines starting with '#' are comments.
inline Hypergraph load_hyperedge_lines(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw DataError("cannot open file: " + path);
  std::vector<std::vector<Index>> edges;
  Index max_node = -1;
  std::string line;
  Index line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty() || line[0] == '#') continue;
    std::istringstream ss(line);
    std::vector<Index> edge;
    long long v;
    while (ss >> v) {
      if (v < 0) throw DataError(path + ":" + std::to_string(line_no) + ": negative node index");
      edge.push_back(static_cast<Index>(v));
      max_node = std::max(max_node, static_cast<Index>(v));
    }
    if (!ss.eof()) throw DataError(path + ":" + std::to_string(line_no) + ": non-numeric token");
    if (!edge.empty()) edges.push_back(std::move(edge));
  }
  return Hypergraph::from_edge_lists(max_node + 1, edges);
}

// --- embeddings ---

// CSV layout: two header lines (format tag, then rows/cols), then one
// decimal-text row per node.
inline void save_embeddings_csv(const Matrix<double>& m, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw DataError("cannot write file: " + path);
  out << "# hycl embeddings csv v1\n";
  out << "# rows=" << m.rows() << " cols=" << m.cols() << "\n";
  out.precision(9);
  for (Index r = 0; r < m.rows(); ++r) {
    for (Index c = 0; c < m.cols(); ++c) {
      if (c) out << ',';
      out << m(r, c);
    }
    out << '\n';
  }
  if (!out) throw DataError("write failure: " + path);
}

inline constexpr char kEmbeddingMagic[4] = {'H', 'C', 'E', 'B'};
inline constexpr std::uint8_t kEmbeddingVersion = 1;

// Binary layout, bit-exact: magic "HCEB", one version byte, little-endian u64
// rows and cols, then row-major float32 values.
inline void save_embeddings_binary(const Matrix<double>& m, const std::string& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw DataError("cannot write file: " + path);
  out.write(kEmbeddingMagic, 4);
  out.put(static_cast<char>(kEmbeddingVersion));
  const std::uint64_t rows = static_cast<std::uint64_t>(m.rows());
  const std::uint64_t cols = static_cast<std::uint64_t>(m.cols());
  auto write_u64 = [&](std::uint64_t v) {
    char buf[8];
    for (int i = 0; i < 8; ++i) buf[i] = static_cast<char>((v >> (8 * i)) & 0xff);
    out.write(buf, 8);
  };
  write_u64(rows);
  write_u64(cols);
  for (Index r = 0; r < m.rows(); ++r) {
    for (Index c = 0; c < m.cols(); ++c) {
      const float v = static_cast<float>(m(r, c));
      out.write(reinterpret_cast<const char*>(&v), 4);
    }
  }
  if (!out) throw DataError("write failure: " + path);
}

inline Matrix<double> load_embeddings_binary(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError("cannot open file: " + path);
  char magic[4];
  in.read(magic, 4);
  if (!in || std::memcmp(magic, kEmbeddingMagic, 4) != 0)
    throw DataError(path + ": not an embedding file (bad magic)");
  const int version = in.get();
  if (version != kEmbeddingVersion) throw DataError(path + ": unsupported embedding version");
  auto read_u64 = [&]() {
    unsigned char buf[8];
    in.read(reinterpret_cast<char*>(buf), 8);
    std::uint64_t v = 0;
    for (int i = 0; i < 8; ++i) v |= static_cast<std::uint64_t>(buf[i]) << (8 * i);
    return v;
  };
  const std::uint64_t rows = read_u64();
  const std::uint64_t cols = read_u64();
  if (!in) throw DataError(path + ": truncated header");
  Matrix<double> m(static_cast<Index>(rows), static_cast<Index>(cols));
  for (std::uint64_t r = 0; r < rows; ++r) {
    for (std::uint64_t c = 0; c < cols; ++c) {
      float v;
      in.read(reinterpret_cast<char*>(&v), 4);
      m(static_cast<Index>(r), static_cast<Index>(c)) = v;
    }
  }
  if (!in) throw DataError(path + ": truncated payload");
  return m;
}

inline Matrix<double> load_embeddings_csv(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw DataError("cannot open file: " + path);
  std::string line;
  if (!std::getline(in, line) || line.rfind("# hycl embeddings csv", 0) != 0)
    throw DataError(path + ": missing csv embedding header");
  Index rows = 0, cols = 0;
  if (!std::getline(in, line) ||
      std::sscanf(line.c_str(), "# rows=%ld cols=%ld", &rows, &cols) != 2)
    throw DataError(path + ": missing shape header");
  Matrix<double> m(rows, cols);
  for (Index r = 0; r < rows; ++r) {
    if (!std::getline(in, line)) throw DataError(path + ": truncated at row " + std::to_string(r));
    std::istringstream ss(line);
    std::string cell;
    for (Index c = 0; c < cols; ++c) {
      if (!std::getline(ss, cell, ',')) throw DataError(path + ": short row " + std::to_string(r));
      m(r, c) = std::stod(cell);
    }
  }
  return m;
}

enum class EmbeddingFormat { Csv, Binary };

inline void save_embeddings(const Matrix<double>& m, const std::string& path, EmbeddingFormat fmt) {
  if (fmt == EmbeddingFormat::Csv)
    save_embeddings_csv(m, path);
  else
    save_embeddings_binary(m, path);
}

inline Matrix<double> load_embeddings(const std::string& path) {
  std::ifstream probe(path, std::ios::binary);
  if (!probe) throw DataError("cannot open file: " + path);
  char magic[4] = {0, 0, 0, 0};
  probe.read(magic, 4);
  probe.close();
  if (std::memcmp(magic, kEmbeddingMagic, 4) == 0) return load_embeddings_binary(path);
  return load_embeddings_csv(path);
}

// --- splits ---

inline void save_split(const Split& s, std::uint64_t seed, const std::string& path) {
  io::json j;
  j["seed"] = seed;
  j["train"] = s.train;
  j["valid"] = s.valid;
  j["test"] = s.test;
  io::write_json_file(path, j);
}

struct LoadedSplit {
  Split split;
  std::uint64_t seed = 0;
};

inline LoadedSplit load_split(const std::string& path) {
  const io::json j = io::read_json_file(path);
  io::reject_unknown_keys(j, {"seed", "train", "valid", "test"}, path);
  for (const char* key : {"train", "valid", "test"})
    if (!j.contains(key)) throw DataError(path + ": missing field '" + std::string(key) + "'");
  LoadedSplit out;
  if (j.contains("seed")) out.seed = j["seed"].get<std::uint64_t>();
  out.split.train = j["train"].get<std::vector<Index>>();
  out.split.valid = j["valid"].get<std::vector<Index>>();
  out.split.test = j["test"].get<std::vector<Index>>();
  std::vector<Index> all;
  for (const auto* part : {&out.split.train, &out.split.valid, &out.split.test})
    all.insert(all.end(), part->begin(), part->end());
  std::sort(all.begin(), all.end());
  if (std::adjacent_find(all.begin(), all.end()) != all.end())
    throw DataError(path + ": split parts are not disjoint");
  return out;
}

// --- run config ---

// Every config field by name; unknown keys are rejected, missing keys take
// the documented defaults.
struct RunConfig {
  TrainConfig train;
  ProbeConfig probe;
};

inline io::json config_to_json(const RunConfig& rc) {
  io::json j;
  j["p_f"] = rc.train.augment.p_f;
  j["p_m"] = rc.train.augment.p_m;
  j["p_n"] = rc.train.augment.p_n;
  j["p_e"] = rc.train.augment.p_e;
  j["tau_n"] = rc.train.loss.tau_n;
  j["tau_g"] = rc.train.loss.tau_g;
  j["tau_m"] = rc.train.loss.tau_m;
  j["omega_g"] = rc.train.loss.omega_g;
  j["omega_m"] = rc.train.loss.omega_m;
  j["use_node_loss"] = rc.train.loss.use_node;
  j["use_group_loss"] = rc.train.loss.use_group;
  j["use_membership_loss"] = rc.train.loss.use_membership;
  if (rc.train.loss.negatives_k) j["negatives_k"] = *rc.train.loss.negatives_k;
  j["membership_full_denominator"] = rc.train.loss.membership_full_denominator;
  j["learning_rate"] = rc.train.learning_rate;
  j["weight_decay"] = rc.train.weight_decay;
  j["epochs"] = rc.train.epochs;
  j["node_emb_dim"] = rc.train.node_emb_dim;
  j["hyperedge_emb_dim"] = rc.train.hyperedge_emb_dim;
  j["projection_hidden_dim"] = rc.train.projection_hidden_dim;
  j["encoder_kind"] = rc.train.encoder_kind == EncoderKind::MeanPool ? "mean_pool" : "hgnn";
  j["encoder_layers"] = rc.train.encoder_layers;
  j["add_self_loops"] = rc.train.add_self_loops;
  j["seed"] = rc.train.seed;
  j["precision"] = rc.train.precision;
  if (rc.train.membership_batch) j["membership_batch"] = *rc.train.membership_batch;
  j["probe_l2"] = rc.probe.l2_coefficient;
  j["probe_lr"] = rc.probe.probe_lr;
  j["probe_epochs"] = rc.probe.probe_epochs;
  return j;
}

inline RunConfig config_from_json(const io::json& j, const std::string& context) {
  io::reject_unknown_keys(
      j, {"p_f", "p_m", "p_n", "p_e", "tau_n", "tau_g", "tau_m", "omega_g", "omega_m",
          "use_node_loss", "use_group_loss", "use_membership_loss", "negatives_k",
          "membership_full_denominator", "learning_rate", "weight_decay", "epochs", "node_emb_dim",
          "hyperedge_emb_dim", "projection_hidden_dim", "encoder_kind", "encoder_layers",
          "add_self_loops", "seed", "precision", "membership_batch", "probe_l2", "probe_lr",
          "probe_epochs"},
      context);
  RunConfig rc;
  auto get = [&](const char* key, auto& field) {
    if (j.contains(key)) field = j[key].template get<std::remove_reference_t<decltype(field)>>();
  };
  get("p_f", rc.train.augment.p_f);
  get("p_m", rc.train.augment.p_m);
  get("p_n", rc.train.augment.p_n);
  get("p_e", rc.train.augment.p_e);
  get("tau_n", rc.train.loss.tau_n);
  get("tau_g", rc.train.loss.tau_g);
  get("tau_m", rc.train.loss.tau_m);
  get("omega_g", rc.train.loss.omega_g);
  get("omega_m", rc.train.loss.omega_m);
  get("use_node_loss", rc.train.loss.use_node);
  get("use_group_loss", rc.train.loss.use_group);
  get("use_membership_loss", rc.train.loss.use_membership);
  if (j.contains("negatives_k")) rc.train.loss.negatives_k = j["negatives_k"].get<Index>();
  get("membership_full_denominator", rc.train.loss.membership_full_denominator);
  get("learning_rate", rc.train.learning_rate);
  get("weight_decay", rc.train.weight_decay);
  get("epochs", rc.train.epochs);
  get("node_emb_dim", rc.train.node_emb_dim);
  get("hyperedge_emb_dim", rc.train.hyperedge_emb_dim);
  get("projection_hidden_dim", rc.train.projection_hidden_dim);
  if (j.contains("encoder_kind")) {
    const std::string kind = j["encoder_kind"].get<std::string>();
    if (kind == "mean_pool")
      rc.train.encoder_kind = EncoderKind::MeanPool;
    else if (kind == "hgnn")
      rc.train.encoder_kind = EncoderKind::Hgnn;
    else
      throw DataError(context + ": encoder_kind must be 'mean_pool' or 'hgnn'");
  }
  get("encoder_layers", rc.train.encoder_layers);
  get("add_self_loops", rc.train.add_self_loops);
  get("seed", rc.train.seed);
  get("precision", rc.train.precision);
  if (j.contains("membership_batch")) rc.train.membership_batch = j["membership_batch"].get<Index>();
  get("probe_l2", rc.probe.l2_coefficient);
  get("probe_lr", rc.probe.probe_lr);
  get("probe_epochs", rc.probe.probe_epochs);
  return rc;
}

inline RunConfig load_config(const std::string& path) {
  return config_from_json(io::read_json_file(path), path);
}

inline void save_config(const RunConfig& rc, const std::string& path) {
  io::write_json_file(path, config_to_json(rc));
}

// --- model persistence ---

inline constexpr char kModelMagic[4] = {'H', 'C', 'M', 'D'};
inline constexpr std::uint8_t kModelVersion = 1;

namespace detail {

inline void write_named_matrix(std::ofstream& out, const std::string& name, const Matrix<double>& m) {
  const std::uint32_t len = static_cast<std::uint32_t>(name.size());
  out.write(reinterpret_cast<const char*>(&len), 4);
  out.write(name.data(), static_cast<std::streamsize>(name.size()));
  const std::uint64_t rows = static_cast<std::uint64_t>(m.rows());
  const std::uint64_t cols = static_cast<std::uint64_t>(m.cols());
  out.write(reinterpret_cast<const char*>(&rows), 8);
  out.write(reinterpret_cast<const char*>(&cols), 8);
  for (Index r = 0; r < m.rows(); ++r)
    for (Index c = 0; c < m.cols(); ++c) {
      const double v = m(r, c);
      out.write(reinterpret_cast<const char*>(&v), 8);
    }
}

inline std::pair<std::string, Matrix<double>> read_named_matrix(std::ifstream& in,
                                                                const std::string& path) {
  std::uint32_t len = 0;
  in.read(reinterpret_cast<char*>(&len), 4);
  std::string name(len, '\0');
  in.read(name.data(), len);
  std::uint64_t rows = 0, cols = 0;
  in.read(reinterpret_cast<char*>(&rows), 8);
  in.read(reinterpret_cast<char*>(&cols), 8);
  if (!in) throw DataError(path + ": truncated model file");
  Matrix<double> m(static_cast<Index>(rows), static_cast<Index>(cols));
  for (std::uint64_t r = 0; r < rows; ++r)
    for (std::uint64_t c = 0; c < cols; ++c) {
      double v;
      in.read(reinterpret_cast<char*>(&v), 8);
      m(static_cast<Index>(r), static_cast<Index>(c)) = v;
    }
  if (!in) throw DataError(path + ": truncated model payload");
  return {std::move(name), std::move(m)};
}

}  // namespace detail

inline void save_model(const TrainedModel& m, const std::string& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw DataError("cannot write file: " + path);
  out.write(kModelMagic, 4);
  out.put(static_cast<char>(kModelVersion));

  RunConfig rc;
  rc.train = m.config;
  io::json header;
  header["config"] = config_to_json(rc);
  io::json trace = io::json::array();
  for (const auto& c : m.loss_trace)
    trace.push_back({{"total", c.total}, {"node", c.node}, {"group", c.group}, {"membership", c.membership}});
  header["loss_trace"] = std::move(trace);
  const std::string header_str = header.dump();
  const std::uint64_t header_len = header_str.size();
  out.write(reinterpret_cast<const char*>(&header_len), 8);
  out.write(header_str.data(), static_cast<std::streamsize>(header_str.size()));

  ModelParams<double> params = m.params;  // registry wants mutable access
  auto registry = parameter_registry(params);
  const std::uint32_t count = static_cast<std::uint32_t>(registry.size());
  out.write(reinterpret_cast<const char*>(&count), 4);
  for (const auto& slot : registry) detail::write_named_matrix(out, slot.name, *slot.value);
  if (!out) throw DataError("write failure: " + path);
}

inline TrainedModel load_model(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError("cannot open file: " + path);
  char magic[4];
  in.read(magic, 4);
  if (!in || std::memcmp(magic, kModelMagic, 4) != 0)
    throw DataError(path + ": not a model file (bad magic)");
  if (in.get() != kModelVersion) throw DataError(path + ": unsupported model version");
  std::uint64_t header_len = 0;
  in.read(reinterpret_cast<char*>(&header_len), 8);
  std::string header_str(header_len, '\0');
  in.read(header_str.data(), static_cast<std::streamsize>(header_len));
  if (!in) throw DataError(path + ": truncated model header");
  io::json header;
  try {
    header = io::json::parse(header_str);
  } catch (const io::json::parse_error& e) {
    throw DataError(path + ": corrupt model header: " + e.what());
  }

  TrainedModel m;
  m.config = config_from_json(header["config"], path).train;
  for (const auto& c : header["loss_trace"])
    m.loss_trace.push_back({c["total"].get<double>(), c["node"].get<double>(),
                            c["group"].get<double>(), c["membership"].get<double>()});

  // rebuild parameter shapes from the config, then overwrite from the file
  m.params = init_model<double>(1, m.config);  // placeholder feature dim; shapes fixed below
  std::uint32_t count = 0;
  in.read(reinterpret_cast<char*>(&count), 4);
  std::map<std::string, Matrix<double>> loaded;
  for (std::uint32_t k = 0; k < count; ++k) {
    auto [name, mat] = detail::read_named_matrix(in, path);
    loaded[name] = std::move(mat);
  }
  // re-init with the true feature dimension taken from the first encoder weight
  Index feature_dim = 1;
  if (m.config.encoder_kind == EncoderKind::MeanPool) {
    const auto it = loaded.find("encoder.layer0.theta_edge");
    if (it == loaded.end()) throw DataError(path + ": missing encoder.layer0.theta_edge");
    feature_dim = it->second.rows();
  } else {
    const auto it = loaded.find("encoder.layer0.theta");
    if (it == loaded.end()) throw DataError(path + ": missing encoder.layer0.theta");
    feature_dim = it->second.rows();
  }
  m.params = init_model<double>(feature_dim, m.config);
  auto registry = parameter_registry(m.params);
  if (registry.size() != loaded.size()) throw DataError(path + ": parameter count mismatch");
  for (auto& slot : registry) {
    const auto it = loaded.find(slot.name);
    if (it == loaded.end()) throw DataError(path + ": missing parameter " + slot.name);
    if (it->second.rows() != slot.value->rows() || it->second.cols() != slot.value->cols())
      throw DataError(path + ": parameter shape mismatch for " + slot.name);
    *slot.value = it->second;
  }
  return m;
}

// --- run summary ---

// One structured record per run. Wall-clock timing sits outside the
// determinism hash so identical seeded runs hash identically.
struct RunSummary {
  RunConfig config;
  std::uint64_t seed = 0;
  std::string variant = "tricl";
  std::vector<LossComponents> loss_trace;
  double mean_epoch_ms = 0;
  std::optional<double> accuracy_mean;
  std::optional<double> accuracy_std;
  std::optional<double> nmi_mean;
  std::optional<double> f1_mean;
  std::optional<double> silhouette_score;
  std::vector<std::string> artifacts;
  Index skipped_membership_terms = 0;
};

inline std::uint64_t fnv1a(const std::string& bytes) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (const char c : bytes) {
    h ^= static_cast<std::uint64_t>(static_cast<unsigned char>(c));
    h *= 0x100000001b3ULL;
  }
  return h;
}

inline io::json summary_to_json(const RunSummary& s) {
  io::json j;
  j["config"] = config_to_json(s.config);
  j["seed"] = s.seed;
  j["variant"] = s.variant;
  io::json trace = io::json::array();
  for (const auto& c : s.loss_trace)
    trace.push_back({{"total", c.total}, {"node", c.node}, {"group", c.group}, {"membership", c.membership}});
  j["loss_trace"] = std::move(trace);
  j["skipped_membership_terms"] = s.skipped_membership_terms;
  if (s.accuracy_mean) j["accuracy_mean"] = *s.accuracy_mean;
  if (s.accuracy_std) j["accuracy_std"] = *s.accuracy_std;
  if (s.nmi_mean) j["nmi_mean"] = *s.nmi_mean;
  if (s.f1_mean) j["f1_mean"] = *s.f1_mean;
  if (s.silhouette_score) j["silhouette"] = *s.silhouette_score;

  // deterministic portion only: config + seed + variant + traces + eval;
  // artifact paths and wall-clock timing stay outside the hash
  j["determinism_hash"] = fnv1a(j.dump());

  if (!s.artifacts.empty()) j["artifacts"] = s.artifacts;
  j["timing"] = {{"mean_epoch_ms", s.mean_epoch_ms}};
  return j;
}

inline void save_summary(const RunSummary& s, const std::string& path) {
  io::write_json_file(path, summary_to_json(s));
}

}  // namespace hycl
