// hypergraph contrastive learning toolchain: preprocess, train, embed,
// evaluate, and report from the command line.

#include <filesystem>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "hycl/dataio.hpp"
#include "hycl/eval.hpp"
#include "hycl/synth.hpp"
#include "hycl/trainer.hpp"

namespace fs = std::filesystem;
using namespace hycl;

namespace {

LabeledDataset load_and_preprocess(const std::string& path, bool report = false) {
  LabeledDataset raw = load_dataset(path);
  auto cleaned = remove_isolated_nodes(raw);
  if (report && cleaned.dataset.hypergraph.num_nodes() != raw.hypergraph.num_nodes())
    std::cout << "removed " << raw.hypergraph.num_nodes() - cleaned.dataset.hypergraph.num_nodes()
              << " isolated nodes\n";
  return std::move(cleaned.dataset);
}

void apply_variant(LossConfig& loss, const std::string& variant) {
  if (variant == "tricl") {
    loss.use_node = loss.use_group = loss.use_membership = true;
  } else if (variant == "tricl-n") {
    loss.use_node = true;
    loss.use_group = loss.use_membership = false;
  } else if (variant == "tricl-ng") {
    loss.use_node = loss.use_group = true;
    loss.use_membership = false;
  } else if (variant.rfind("loss-mask=", 0) == 0) {
    const std::string mask = variant.substr(10);
    unsigned n = 0, g = 0, m = 0;
    if (std::sscanf(mask.c_str(), "%u,%u,%u", &n, &g, &m) != 3 || n > 1 || g > 1 || m > 1)
      throw ConfigError("--variant loss-mask expects three 0/1 flags, e.g. loss-mask=1,0,1");
    loss.use_node = n;
    loss.use_group = g;
    loss.use_membership = m;
  } else {
    throw ConfigError("unknown variant '" + variant +
                      "' (expected tricl, tricl-n, tricl-ng, or loss-mask=n,g,m)");
  }
}

std::vector<Split> load_splits(const std::vector<std::string>& paths, Index num_nodes) {
  check_config(!paths.empty(), "no split files given (use --splits)");
  std::vector<Split> out;
  for (const auto& p : paths) {
    auto loaded = load_split(p);
    for (const auto* part : {&loaded.split.train, &loaded.split.valid, &loaded.split.test})
      for (const Index i : *part)
        if (i < 0 || i >= num_nodes)
          throw DataError(p + ": split index " + std::to_string(i) + " out of range");
    out.push_back(std::move(loaded.split));
  }
  return out;
}

Matrix<double> embeddings_from_flags(const std::string& emb_path, const std::string& model_path,
                                     const LabeledDataset& d) {
  check_config(emb_path.empty() != model_path.empty(),
               "pass exactly one of --embeddings or --model");
  if (!emb_path.empty()) {
    Matrix<double> m = load_embeddings(emb_path);
    check_contract(m.rows() == d.hypergraph.num_nodes(),
                   "embedding row count does not match the dataset");
    return m;
  }
  return embed(load_model(model_path), d);
}

int cmd_stats(const std::string& dataset_path, bool edges_only) {
  Hypergraph h;
  Index num_features = 0;
  int num_classes = 0;
  if (edges_only) {
    h = load_hyperedge_lines(dataset_path);
  } else {
    const LabeledDataset d = load_dataset(dataset_path);
    h = d.hypergraph;
    num_features = d.features.cols();
    num_classes = d.num_classes;
  }
  const DegreeVectors deg = compute_degrees(h);
  Index max_edge = 0, isolated = 0;
  double max_deg = 0;
  for (const Index s : deg.hyperedge_degrees) max_edge = std::max(max_edge, s);
  for (Index i = 0; i < h.num_nodes(); ++i) {
    max_deg = std::max(max_deg, deg.node_degrees[i]);
    if (h.node_degree_count(i) == 0) ++isolated;
  }
  const double k = static_cast<double>(h.num_memberships());
  std::printf("nodes              %ld\n", static_cast<long>(h.num_nodes()));
  std::printf("hyperedges         %ld\n", static_cast<long>(h.num_hyperedges()));
  std::printf("memberships        %ld\n", static_cast<long>(h.num_memberships()));
  std::printf("avg hyperedge size %.2f\n", k / static_cast<double>(h.num_hyperedges()));
  std::printf("max hyperedge size %ld\n", static_cast<long>(max_edge));
  std::printf("avg node degree    %.2f\n", k / static_cast<double>(h.num_nodes()));
  std::printf("max node degree    %.0f\n", max_deg);
  std::printf("isolated nodes     %ld\n", static_cast<long>(isolated));
  if (!edges_only) {
    std::printf("features           %ld\n", static_cast<long>(num_features));
    std::printf("classes            %d\n", num_classes);
  }
  return 0;
}

int cmd_split(const std::string& dataset_path, const std::string& out_dir, double r_train,
              double r_valid, double r_test, std::uint64_t seed, int count) {
  check_config(count >= 1, "--count must be >= 1");
  const LabeledDataset d = load_and_preprocess(dataset_path);
  fs::create_directories(out_dir);
  for (int i = 0; i < count; ++i) {
    const std::uint64_t s = seed + static_cast<std::uint64_t>(i);
    const Split split = random_split(d.hypergraph.num_nodes(), r_train, r_valid, r_test, s);
    const std::string path = (fs::path(out_dir) / ("split_" + std::to_string(i) + ".json")).string();
    save_split(split, s, path);
  }
  std::cout << "wrote " << count << " split files to " << out_dir << "\n";
  return 0;
}

int cmd_train(const std::string& dataset_path, const std::string& config_path,
              std::optional<std::uint64_t> seed, const std::string& variant,
              std::optional<Index> subsample_k, const std::string& out_dir) {
  RunConfig rc = config_path.empty() ? RunConfig{} : load_config(config_path);
  if (seed) rc.train.seed = *seed;
  apply_variant(rc.train.loss, variant);
  if (subsample_k) rc.train.loss.negatives_k = *subsample_k;

  const LabeledDataset d = load_and_preprocess(dataset_path, true);
  const TrainedModel model = train(d, rc.train);

  fs::create_directories(out_dir);
  const std::string model_path = (fs::path(out_dir) / "model.bin").string();
  const std::string summary_path = (fs::path(out_dir) / "summary.json").string();
  save_model(model, model_path);

  RunSummary summary;
  summary.config = rc;
  summary.config.train = model.config;
  summary.seed = model.config.seed;
  summary.variant = variant;
  summary.loss_trace = model.loss_trace;
  summary.mean_epoch_ms = model.mean_epoch_ms();
  summary.skipped_membership_terms = model.skipped_node_anchored + model.skipped_edge_anchored;
  summary.artifacts = {model_path};
  save_summary(summary, summary_path);

  std::cout << "trained " << model.loss_trace.size() << " epochs; final loss "
            << model.loss_trace.back().total << "; mean epoch " << summary.mean_epoch_ms
            << " ms\nmodel:   " << model_path << "\nsummary: " << summary_path << "\n";
  return 0;
}

int cmd_embed(const std::string& dataset_path, const std::string& model_path, bool random_init,
              const std::string& config_path, std::optional<std::uint64_t> seed,
              const std::string& out_path, const std::string& format) {
  const LabeledDataset d = load_and_preprocess(dataset_path);
  Matrix<double> emb;
  if (random_init) {
    RunConfig rc = config_path.empty() ? RunConfig{} : load_config(config_path);
    if (seed) rc.train.seed = *seed;
    emb = embed(random_init_model(d, rc.train), d);
  } else {
    check_config(!model_path.empty(), "embed needs --model or --random-init");
    emb = embed(load_model(model_path), d);
  }
  EmbeddingFormat fmt;
  if (format == "csv")
    fmt = EmbeddingFormat::Csv;
  else if (format == "binary")
    fmt = EmbeddingFormat::Binary;
  else
    throw ConfigError("--format must be csv or binary");
  save_embeddings(emb, out_path, fmt);
  std::cout << "wrote " << emb.rows() << "x" << emb.cols() << " embeddings to " << out_path << "\n";
  return 0;
}

int cmd_eval_classify(const std::string& dataset_path, const std::string& emb_path,
                      const std::string& model_path, const std::vector<std::string>& split_paths,
                      const ProbeConfig& probe, const std::string& summary_path) {
  const LabeledDataset d = load_and_preprocess(dataset_path);
  const Matrix<double> emb = embeddings_from_flags(emb_path, model_path, d);
  const auto splits = load_splits(split_paths, d.hypergraph.num_nodes());
  const auto summary = evaluate_classification(emb, d.labels, d.num_classes, splits, probe);
  std::printf("accuracy %.4f +- %.4f over %zu splits\n", summary.mean_accuracy, summary.std_accuracy,
              summary.per_split.size());
  if (!summary_path.empty()) {
    RunSummary rs;
    rs.variant = "eval-classify";
    rs.accuracy_mean = summary.mean_accuracy;
    rs.accuracy_std = summary.std_accuracy;
    save_summary(rs, summary_path);
  }
  return 0;
}

int cmd_eval_cluster(const std::string& dataset_path, const std::string& emb_path,
                     const std::string& model_path, Index runs, std::uint64_t seed,
                     std::optional<Index> k, bool with_silhouette, const std::string& summary_path) {
  const LabeledDataset d = load_and_preprocess(dataset_path);
  const Matrix<double> emb = embeddings_from_flags(emb_path, model_path, d);
  const Index clusters = k.value_or(d.num_classes);
  const auto summary = evaluate_clustering(emb, d.labels, clusters, runs, seed);
  std::printf("nmi %.4f  f1 %.4f over %ld runs\n", summary.mean_nmi, summary.mean_f1,
              static_cast<long>(runs));
  std::optional<double> sil;
  if (with_silhouette) {
    const ClusterResult c = kmeans(emb, clusters, Rng::derive(seed, "silhouette"));
    sil = silhouette(emb, c.assignments);
    std::printf("silhouette %.4f\n", *sil);
  }
  if (!summary_path.empty()) {
    RunSummary rs;
    rs.variant = "eval-cluster";
    rs.nmi_mean = summary.mean_nmi;
    rs.f1_mean = summary.mean_f1;
    rs.silhouette_score = sil;
    save_summary(rs, summary_path);
  }
  return 0;
}

int cmd_gen_synth(const std::string& preset, std::uint64_t seed, const std::string& out_path) {
  const LabeledDataset d = make_synthetic(synth_preset(preset, seed));
  save_dataset(d, out_path);
  std::cout << "wrote " << preset << " dataset (" << d.hypergraph.num_nodes() << " nodes, "
            << d.hypergraph.num_hyperedges() << " hyperedges) to " << out_path << "\n";
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"hypergraph contrastive representation learning"};
  app.require_subcommand(1);

  // stats
  auto* stats = app.add_subcommand("stats", "print dataset statistics");
  std::string stats_dataset;
  bool stats_edges_only = false;
  stats->add_option("dataset", stats_dataset, "dataset json (or hyperedge-per-line text)")->required();
  stats->add_flag("--edges-only", stats_edges_only, "treat input as hyperedge-per-line text");

  // split
  auto* split = app.add_subcommand("split", "generate train/valid/test split files");
  std::string split_dataset, split_out = "splits";
  std::vector<double> split_ratios{0.1, 0.1, 0.8};
  std::uint64_t split_seed = 0;
  int split_count = 20;
  split->add_option("dataset", split_dataset)->required();
  split->add_option("--out", split_out, "output directory");
  split->add_option("--ratios", split_ratios, "train,valid,test ratios")->expected(3);
  split->add_option("--seed", split_seed, "base seed; file i uses seed+i");
  split->add_option("--count", split_count, "number of split files");

  // train
  auto* train_cmd = app.add_subcommand("train", "self-supervised training");
  std::string train_dataset, train_config, train_variant = "tricl", train_out = "run";
  std::optional<std::uint64_t> train_seed;
  std::optional<Index> train_subsample;
  train_cmd->add_option("dataset", train_dataset)->required();
  train_cmd->add_option("--config", train_config, "run config json");
  train_cmd->add_option("--seed", train_seed, "override the config seed");
  train_cmd->add_option("--variant", train_variant, "tricl | tricl-n | tricl-ng | loss-mask=n,g,m");
  train_cmd->add_option("--subsample-k", train_subsample, "negatives per anchor for node/group contrast");
  train_cmd->add_option("--out", train_out, "output directory");

  // embed
  auto* embed_cmd = app.add_subcommand("embed", "export frozen node embeddings");
  std::string embed_dataset, embed_model, embed_config, embed_out = "embeddings.bin",
                              embed_format = "binary";
  bool embed_random = false;
  std::optional<std::uint64_t> embed_seed;
  embed_cmd->add_option("dataset", embed_dataset)->required();
  embed_cmd->add_option("--model", embed_model, "trained model file");
  embed_cmd->add_flag("--random-init", embed_random, "use an untrained encoder");
  embed_cmd->add_option("--config", embed_config, "config for --random-init dimensions");
  embed_cmd->add_option("--seed", embed_seed, "seed for --random-init");
  embed_cmd->add_option("--out", embed_out);
  embed_cmd->add_option("--format", embed_format, "csv | binary");

  // eval-classify
  auto* evc = app.add_subcommand("eval-classify", "linear probe on frozen embeddings");
  std::string evc_dataset, evc_emb, evc_model, evc_summary;
  std::vector<std::string> evc_splits;
  ProbeConfig probe;
  evc->add_option("dataset", evc_dataset)->required();
  evc->add_option("--embeddings", evc_emb, "embedding file (csv or binary)");
  evc->add_option("--model", evc_model, "trained model file");
  evc->add_option("--splits", evc_splits, "split json files")->expected(-1);
  evc->add_option("--probe-lr", probe.probe_lr);
  evc->add_option("--probe-epochs", probe.probe_epochs);
  evc->add_option("--probe-l2", probe.l2_coefficient);
  evc->add_option("--summary", evc_summary, "write a summary record here");

  // eval-cluster
  auto* evk = app.add_subcommand("eval-cluster", "k-means evaluation of frozen embeddings");
  std::string evk_dataset, evk_emb, evk_model, evk_summary;
  Index evk_runs = 5;
  std::uint64_t evk_seed = 0;
  std::optional<Index> evk_k;
  bool evk_sil = false;
  evk->add_option("dataset", evk_dataset)->required();
  evk->add_option("--embeddings", evk_emb);
  evk->add_option("--model", evk_model);
  evk->add_option("--runs", evk_runs, "independent k-means runs");
  evk->add_option("--seed", evk_seed);
  evk->add_option("--k", evk_k, "cluster count (default: #classes)");
  evk->add_flag("--silhouette", evk_sil, "also report the silhouette score");
  evk->add_option("--summary", evk_summary);

  // gen-synth
  auto* gen = app.add_subcommand("gen-synth", "generate a synthetic benchmark-shaped dataset");
  std::string gen_preset = "homophilous-200", gen_out = "synth.json";
  std::uint64_t gen_seed = 0;
  gen->add_option("--preset", gen_preset, "cora-c | homophilous-200");
  gen->add_option("--seed", gen_seed);
  gen->add_option("--out", gen_out);

  CLI11_PARSE(app, argc, argv);

  try {
    if (*stats) return cmd_stats(stats_dataset, stats_edges_only);
    if (*split)
      return cmd_split(split_dataset, split_out, split_ratios[0], split_ratios[1], split_ratios[2],
                       split_seed, split_count);
    if (*train_cmd)
      return cmd_train(train_dataset, train_config, train_seed, train_variant, train_subsample,
                       train_out);
    if (*embed_cmd)
      return cmd_embed(embed_dataset, embed_model, embed_random, embed_config, embed_seed, embed_out,
                       embed_format);
    if (*evc) return cmd_eval_classify(evc_dataset, evc_emb, evc_model, evc_splits, probe, evc_summary);
    if (*evk)
      return cmd_eval_cluster(evk_dataset, evk_emb, evk_model, evk_runs, evk_seed, evk_k, evk_sil,
                              evk_summary);
    if (*gen) return cmd_gen_synth(gen_preset, gen_seed, gen_out);
  } catch (const Error& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  } catch (const std::exception& e) {
    std::cerr << "error: unexpected: " << e.what() << "\n";
    return 1;
  }
  return 0;
}
