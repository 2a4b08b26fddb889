#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "kgfair/core.hpp"
#include "kgfair/graph.hpp"
#include "kgfair/nn.hpp"

namespace kgfair {

struct LinkExample {
    int u = 0;
    int v = 0;
    int label = 0;
};

struct LinkProbeDataset {
    std::vector<LinkExample> examples;  // balanced 1:1 by construction
    std::vector<std::string> warnings;  // positives dropped for lack of a negative
};

// One tail-replacement negative per positive; the negative pair is resampled
// (bounded) until it is not an edge of `net`, so pass the full graph here even
// when positives come from a held split. Positives with no valid negative are
// dropped with a warning to keep the labels balanced.
LinkProbeDataset build_link_dataset(const Network& net,
                                    const std::vector<std::pair<int, int>>& positives,
                                    uint64_t seed);
// Triple flavor: (head, tail) pairs; negatives avoid any (head, *, tail') triple.
LinkProbeDataset build_link_dataset(const KnowledgeGraph& kg,
                                    const std::vector<Triple>& positives, uint64_t seed);

struct ProbeConfig {
    std::vector<int> hidden_dims = {64};
    double dropout = 0.0;
    TrainConfig train;
};
void validate(const ProbeConfig& cfg);

// Features = concat of the two endpoint vectors; ReLU hidden layers, sigmoid
// output. Training is single-threaded and deterministic under cfg.train.seed.
Mlp train_link_probe(const LinkProbeDataset& dataset, const EmbeddingTable& embeddings,
                     const ProbeConfig& cfg);

// Predicted labels per example (threshold 0.5). The parallel and serial
// versions agree exactly; the probe is frozen.
std::vector<int> link_predictions(const Mlp& probe, const LinkProbeDataset& dataset,
                                  const EmbeddingTable& embeddings);
std::vector<int> link_predictions_serial(const Mlp& probe, const LinkProbeDataset& dataset,
                                         const EmbeddingTable& embeddings);

// Fraction of the node's examples (either endpoint) classified correctly;
// absent if the node appears in none.
std::optional<double> per_node_accuracy(const Mlp& probe, const LinkProbeDataset& dataset,
                                        const EmbeddingTable& embeddings, int node);

struct PerNodeAccuracies {
    std::vector<int> nodes;          // nodes with >= 1 example
    std::vector<double> accuracy;    // aligned with nodes
    std::vector<int> example_count;  // aligned with nodes
};
PerNodeAccuracies per_node_accuracies(const std::vector<int>& predictions,
                                      const LinkProbeDataset& dataset);

enum class BinScheme { log2_width, quantile };

struct Binning {
    int bin_count = 10;
    BinScheme scheme = BinScheme::log2_width;
    int min_occupancy = 1;  // under-occupied bins merge into their right neighbor
};
void validate(const Binning& binning);

struct ReportBin {
    double degree_lo = 0.0;
    double degree_hi = 0.0;
    int n_nodes = 0;
    double mean_accuracy = 0.0;
    double ci_lo = 0.0;
    double ci_hi = 0.0;
};

struct AuditReport {
    std::vector<ReportBin> bins;
    double overall_accuracy = 0.0;  // example-weighted mean of per-node accuracies
    std::map<std::string, std::string> metadata;
};

// accuracies/example_counts/degrees are parallel arrays over nodes. 95% CI by
// normal approximation over the per-node accuracies inside each bin.
AuditReport degree_binned_report(const std::vector<double>& accuracies,
                                 const std::vector<int>& example_counts,
                                 const std::vector<double>& degrees,
                                 const Binning& binning);

// Spearman correlation between bin centers and bin mean accuracies.
double bin_trend_spearman(const AuditReport& report);

struct AttrExample {
    int entity = 0;
    int cls = 0;
};

struct AttrProbeDataset {
    std::vector<AttrExample> examples;  // ascending entity id
    std::string attribute_name;
    int class_count = 0;
};
AttrProbeDataset make_attr_dataset(const AttributeLabels& labels);

struct AttrProbeResult {
    Mlp probe;
    double test_accuracy = 0.0;
    double majority_baseline = 0.0;  // train-majority class measured on test
    std::vector<int> test_entities;
    std::vector<int> test_predictions;
    std::vector<int> test_labels;
    std::vector<std::string> warnings;
};

// Entity vector in, class out; sigmoid head when class_count == 2, softmax
// otherwise. Stratified 80/20 split inside; classes with < 2 members stay in
// train and are flagged.
AttrProbeResult train_attr_probe(const AttrProbeDataset& dataset,
                                 const EmbeddingTable& embeddings,
                                 const ProbeConfig& cfg);

struct CrossValResult {
    std::vector<int> entities;     // every entity that got an out-of-fold prediction
    std::vector<int> predictions;  // aligned
    std::vector<int> labels;       // aligned
    double accuracy = 0.0;
    double majority_baseline = 0.0;
    std::vector<std::string> warnings;
};

// Stratified k-fold cross-prediction: every example is predicted exactly once
// by a probe that never saw it. Gives per-entity predictions over the whole
// dataset, which the degree-binned reports need for statistical power.
CrossValResult crossval_attr_probe(const AttrProbeDataset& dataset,
                                   const EmbeddingTable& embeddings,
                                   const ProbeConfig& cfg, int folds = 5);

// Per-entity correctness (one example each) binned by degree.
AuditReport attr_report_from_predictions(const std::vector<int>& predictions,
                                         const std::vector<int>& labels,
                                         const std::vector<double>& degrees,
                                         const Binning& binning);
AuditReport attr_degree_report(const Mlp& probe, const AttrProbeDataset& dataset,
                               const EmbeddingTable& embeddings,
                               const std::vector<double>& degrees,
                               const Binning& binning);

// CSV (deg_lo,deg_hi,n,acc,ci_lo,ci_hi) plus a key=value sidecar at
// path + ".meta" carrying overall_accuracy and the metadata map. Exact
// round-trip at 17 significant digits.
void save_report(const AuditReport& report, const std::string& csv_path);
AuditReport load_report(const std::string& csv_path);

}  // namespace kgfair
