#include "kgfair/probe.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <numeric>
#include <sstream>
#include <stdexcept>
#include <unordered_map>
#include <unordered_set>

#include "kgfair/rng.hpp"
#include "kgfair/stats.hpp"

namespace kgfair {

namespace {

constexpr int kNegativeRetries = 200;

Vec link_features(const EmbeddingTable& emb, int u, int v) {
    if (u < 0 || u >= emb.count || v < 0 || v >= emb.count)
        throw std::out_of_range("link probe: node without embedding");
    Vec x(static_cast<size_t>(2 * emb.dim));
    std::copy_n(emb.row(u), emb.dim, x.data());
    std::copy_n(emb.row(v), emb.dim, x.data() + emb.dim);
    return x;
}

}  // namespace

LinkProbeDataset build_link_dataset(const Network& net,
                                    const std::vector<std::pair<int, int>>& positives,
                                    uint64_t seed) {
    if (net.node_count < 2)
        throw std::invalid_argument("build_link_dataset: need at least two nodes");
    LinkProbeDataset ds;
    auto rng = make_rng(derive_seed(seed, 0x11ull));
    std::uniform_int_distribution<int> pick(0, net.node_count - 1);
    for (const auto& [u, v] : positives) {
        bool found = false;
        for (int attempt = 0; attempt < kNegativeRetries && !found; ++attempt) {
            const int t = pick(rng);
            if (t == u || t == v || net.has_edge(u, t)) continue;
            ds.examples.push_back({u, v, 1});
            ds.examples.push_back({u, t, 0});
            found = true;
        }
        if (!found)
            ds.warnings.push_back("no valid negative for edge " + std::to_string(u) + "-" +
                                  std::to_string(v) + "; pair dropped");
    }
    return ds;
}

LinkProbeDataset build_link_dataset(const KnowledgeGraph& kg,
                                    const std::vector<Triple>& positives, uint64_t seed) {
    const int n = kg.entity_vocab.size();
    if (n < 2) throw std::invalid_argument("build_link_dataset: need at least two entities");
    std::unordered_set<uint64_t> pairs;
    pairs.reserve(kg.triples.size() * 2);
    auto pair_key = [](int h, int t) {
        return (static_cast<uint64_t>(static_cast<uint32_t>(h)) << 32) |
               static_cast<uint32_t>(t);
    };
    for (const Triple& tr : kg.triples) pairs.insert(pair_key(tr.head, tr.tail));

    LinkProbeDataset ds;
    auto rng = make_rng(derive_seed(seed, 0x12ull));
    std::uniform_int_distribution<int> pick(0, n - 1);
    for (const Triple& tr : positives) {
        bool found = false;
        for (int attempt = 0; attempt < kNegativeRetries && !found; ++attempt) {
            const int t = pick(rng);
            if (t == tr.tail || t == tr.head || pairs.count(pair_key(tr.head, t))) continue;
            ds.examples.push_back({tr.head, tr.tail, 1});
            ds.examples.push_back({tr.head, t, 0});
            found = true;
        }
        if (!found)
            ds.warnings.push_back("no valid negative for triple head " +
                                  std::to_string(tr.head) + "; pair dropped");
    }
    return ds;
}

void validate(const ProbeConfig& cfg) {
    for (int h : cfg.hidden_dims)
        if (h <= 0) throw std::invalid_argument("probe hidden dims must be positive");
    if (cfg.dropout < 0.0 || cfg.dropout >= 1.0)
        throw std::invalid_argument("probe dropout must be in [0,1)");
    validate(cfg.train);
}

Mlp train_link_probe(const LinkProbeDataset& dataset, const EmbeddingTable& embeddings,
                     const ProbeConfig& cfg) {
    validate(cfg);
    if (dataset.examples.empty())
        throw std::invalid_argument("train_link_probe: empty dataset");
    std::vector<Vec> inputs;
    std::vector<int> labels;
    inputs.reserve(dataset.examples.size());
    labels.reserve(dataset.examples.size());
    for (const LinkExample& ex : dataset.examples) {
        inputs.push_back(link_features(embeddings, ex.u, ex.v));
        labels.push_back(ex.label);
    }
    std::vector<int> dims;
    dims.push_back(2 * embeddings.dim);
    dims.insert(dims.end(), cfg.hidden_dims.begin(), cfg.hidden_dims.end());
    dims.push_back(1);
    Mlp probe = make_mlp(dims, Activation::relu, Head::sigmoid, cfg.dropout,
                         derive_seed(cfg.train.seed, 0x9b0beull));
    train_classifier(probe, inputs, labels, cfg.train);
    return probe;
}

namespace {

std::vector<int> link_predictions_impl(const Mlp& probe, const LinkProbeDataset& dataset,
                                       const EmbeddingTable& embeddings, bool parallel) {
    const int n = static_cast<int>(dataset.examples.size());
    std::vector<int> out(static_cast<size_t>(n));
#pragma omp parallel for schedule(static) if (parallel)
    for (int i = 0; i < n; ++i) {
        const LinkExample& ex = dataset.examples[static_cast<size_t>(i)];
        const Vec x = link_features(embeddings, ex.u, ex.v);
        out[static_cast<size_t>(i)] = predict_class(probe, x.data());
    }
    return out;
}

}  // namespace

std::vector<int> link_predictions(const Mlp& probe, const LinkProbeDataset& dataset,
                                  const EmbeddingTable& embeddings) {
    return link_predictions_impl(probe, dataset, embeddings, true);
}

std::vector<int> link_predictions_serial(const Mlp& probe, const LinkProbeDataset& dataset,
                                         const EmbeddingTable& embeddings) {
    return link_predictions_impl(probe, dataset, embeddings, false);
}

std::optional<double> per_node_accuracy(const Mlp& probe, const LinkProbeDataset& dataset,
                                        const EmbeddingTable& embeddings, int node) {
    long correct = 0, total = 0;
    for (const LinkExample& ex : dataset.examples) {
        if (ex.u != node && ex.v != node) continue;
        const Vec x = link_features(embeddings, ex.u, ex.v);
        ++total;
        if (predict_class(probe, x.data()) == ex.label) ++correct;
    }
    if (total == 0) return std::nullopt;
    return static_cast<double>(correct) / static_cast<double>(total);
}

PerNodeAccuracies per_node_accuracies(const std::vector<int>& predictions,
                                      const LinkProbeDataset& dataset) {
    if (predictions.size() != dataset.examples.size())
        throw std::invalid_argument("per_node_accuracies: prediction count mismatch");
    std::unordered_map<int, std::pair<int, int>> tally;  // node -> (correct, total)
    for (size_t i = 0; i < dataset.examples.size(); ++i) {
        const LinkExample& ex = dataset.examples[i];
        const int hit = predictions[i] == ex.label ? 1 : 0;
        for (int node : {ex.u, ex.v}) {
            auto& [correct, total] = tally[node];
            correct += hit;
            ++total;
        }
    }
    std::vector<int> nodes;
    nodes.reserve(tally.size());
    for (const auto& [node, _] : tally) nodes.push_back(node);
    std::sort(nodes.begin(), nodes.end());
    PerNodeAccuracies out;
    out.nodes = std::move(nodes);
    for (int node : out.nodes) {
        const auto& [correct, total] = tally[node];
        out.accuracy.push_back(static_cast<double>(correct) / static_cast<double>(total));
        out.example_count.push_back(total);
    }
    return out;
}

void validate(const Binning& binning) {
    if (binning.bin_count <= 0) throw std::invalid_argument("bin_count must be > 0");
    if (binning.min_occupancy < 1) throw std::invalid_argument("min_occupancy must be >= 1");
}

namespace {

struct RawBin {
    double lo, hi;  // log2(degree+1) bounds
    std::vector<double> accs;
};

}  // namespace

AuditReport degree_binned_report(const std::vector<double>& accuracies,
                                 const std::vector<int>& example_counts,
                                 const std::vector<double>& degrees,
                                 const Binning& binning) {
    validate(binning);
    if (accuracies.empty()) throw std::invalid_argument("degree_binned_report: empty input");
    if (accuracies.size() != degrees.size() || accuracies.size() != example_counts.size())
        throw std::invalid_argument("degree_binned_report: array length mismatch");

    const size_t n = accuracies.size();
    std::vector<double> logdeg(n);
    for (size_t i = 0; i < n; ++i) logdeg[i] = std::log2(degrees[i] + 1.0);

    // bin edges in transformed space
    std::vector<double> edges;
    if (binning.scheme == BinScheme::log2_width) {
        const auto [mn, mx] = std::minmax_element(logdeg.begin(), logdeg.end());
        double lo = *mn, hi = *mx;
        if (hi <= lo) hi = lo + 1e-9;
        for (int b = 0; b <= binning.bin_count; ++b)
            edges.push_back(lo + (hi - lo) * static_cast<double>(b) /
                                     static_cast<double>(binning.bin_count));
    } else {
        std::vector<double> sorted = logdeg;
        std::sort(sorted.begin(), sorted.end());
        for (int b = 0; b <= binning.bin_count; ++b) {
            const double rank = static_cast<double>(b) / binning.bin_count *
                                static_cast<double>(sorted.size() - 1);
            edges.push_back(sorted[static_cast<size_t>(std::llround(rank))]);
        }
        edges.back() += 1e-9;
    }

    std::vector<RawBin> raw;
    for (size_t b = 0; b + 1 < edges.size(); ++b) {
        if (b > 0 && edges[b + 1] <= edges[b]) continue;  // degenerate quantile edge
        raw.push_back({edges[b], edges[b + 1], {}});
    }
    for (size_t i = 0; i < n; ++i) {
        size_t b = raw.size() - 1;
        for (size_t j = 0; j < raw.size(); ++j) {
            const bool last = j + 1 == raw.size();
            if (logdeg[i] >= raw[j].lo && (logdeg[i] < raw[j].hi || last)) {
                b = j;
                break;
            }
        }
        raw[b].accs.push_back(accuracies[i]);
    }

    // merge under-occupied bins into their right neighbor (last merges left)
    for (size_t j = 0; j < raw.size();) {
        if (static_cast<int>(raw[j].accs.size()) >= binning.min_occupancy ||
            raw.size() == 1) {
            ++j;
            continue;
        }
        const size_t into = j + 1 < raw.size() ? j + 1 : j - 1;
        auto& dst = raw[into];
        dst.accs.insert(dst.accs.end(), raw[j].accs.begin(), raw[j].accs.end());
        dst.lo = std::min(dst.lo, raw[j].lo);
        dst.hi = std::max(dst.hi, raw[j].hi);
        raw.erase(raw.begin() + static_cast<std::ptrdiff_t>(j));
        if (into < j) j = into;
    }

    AuditReport report;
    for (const RawBin& rb : raw) {
        if (rb.accs.empty()) continue;
        ReportBin bin;
        bin.degree_lo = std::exp2(rb.lo) - 1.0;
        bin.degree_hi = std::exp2(rb.hi) - 1.0;
        bin.n_nodes = static_cast<int>(rb.accs.size());
        bin.mean_accuracy = mean(rb.accs);
        const Ci95 ci = normal_ci95(rb.accs);
        bin.ci_lo = ci.lo;
        bin.ci_hi = ci.hi;
        report.bins.push_back(bin);
    }

    double weighted = 0.0;
    long total = 0;
    for (size_t i = 0; i < n; ++i) {
        weighted += accuracies[i] * example_counts[i];
        total += example_counts[i];
    }
    report.overall_accuracy = total > 0 ? weighted / static_cast<double>(total) : 0.0;
    return report;
}

double bin_trend_spearman(const AuditReport& report) {
    std::vector<double> centers, accs;
    for (const ReportBin& b : report.bins) {
        centers.push_back(0.5 * (b.degree_lo + b.degree_hi));
        accs.push_back(b.mean_accuracy);
    }
    return spearman(centers, accs);
}

AttrProbeDataset make_attr_dataset(const AttributeLabels& labels) {
    AttrProbeDataset ds;
    ds.attribute_name = labels.attribute_name;
    ds.class_count = labels.class_count();
    ds.examples.reserve(labels.labels.size());
    for (const auto& [entity, cls] : labels.labels) ds.examples.push_back({entity, cls});
    std::sort(ds.examples.begin(), ds.examples.end(),
              [](const AttrExample& a, const AttrExample& b) { return a.entity < b.entity; });
    return ds;
}

namespace {

Vec attr_features(const EmbeddingTable& emb, int entity) {
    if (entity < 0 || entity >= emb.count)
        throw std::out_of_range("attr probe: entity without embedding");
    return Vec(emb.row(entity), emb.row(entity) + emb.dim);
}

Mlp make_attr_probe_net(const AttrProbeDataset& ds, const EmbeddingTable& emb,
                        const ProbeConfig& cfg, uint64_t salt) {
    std::vector<int> dims;
    dims.push_back(emb.dim);
    dims.insert(dims.end(), cfg.hidden_dims.begin(), cfg.hidden_dims.end());
    const bool binary = ds.class_count == 2;
    dims.push_back(binary ? 1 : ds.class_count);
    // multiclass nets train on logits (linear head) and switch to softmax after
    return make_mlp(dims, Activation::relu, binary ? Head::sigmoid : Head::linear,
                    cfg.dropout, derive_seed(cfg.train.seed, salt));
}

// indices grouped by class, each group in dataset order
std::vector<std::vector<size_t>> group_by_class(const AttrProbeDataset& ds) {
    std::vector<std::vector<size_t>> groups(static_cast<size_t>(ds.class_count));
    for (size_t i = 0; i < ds.examples.size(); ++i) {
        const int c = ds.examples[i].cls;
        if (c < 0 || c >= ds.class_count)
            throw std::invalid_argument("attr probe: class id out of range");
        groups[static_cast<size_t>(c)].push_back(i);
    }
    return groups;
}

int majority_class(const std::vector<int>& labels, int class_count) {
    std::vector<long> counts(static_cast<size_t>(class_count), 0);
    for (int y : labels) ++counts[static_cast<size_t>(y)];
    return static_cast<int>(std::max_element(counts.begin(), counts.end()) -
                            counts.begin());
}

}  // namespace

AttrProbeResult train_attr_probe(const AttrProbeDataset& dataset,
                                 const EmbeddingTable& embeddings,
                                 const ProbeConfig& cfg) {
    validate(cfg);
    if (dataset.examples.empty())
        throw std::invalid_argument("train_attr_probe: empty dataset");
    if (dataset.class_count < 2)
        throw std::invalid_argument("train_attr_probe: need >= 2 classes");

    AttrProbeResult result;
    auto rng = make_rng(derive_seed(cfg.train.seed, 0x591ull));
    auto groups = group_by_class(dataset);
    std::vector<size_t> train_idx, test_idx;
    for (size_t c = 0; c < groups.size(); ++c) {
        auto& g = groups[c];
        if (g.size() < 2) {
            if (!g.empty())
                result.warnings.push_back("class " + std::to_string(c) +
                                          " has < 2 members; kept in train, not stratifiable");
            train_idx.insert(train_idx.end(), g.begin(), g.end());
            continue;
        }
        std::shuffle(g.begin(), g.end(), rng);
        size_t n_test = static_cast<size_t>(std::llround(0.2 * static_cast<double>(g.size())));
        n_test = std::max<size_t>(1, std::min(n_test, g.size() - 1));
        test_idx.insert(test_idx.end(), g.begin(), g.begin() + static_cast<std::ptrdiff_t>(n_test));
        train_idx.insert(train_idx.end(), g.begin() + static_cast<std::ptrdiff_t>(n_test), g.end());
    }
    if (test_idx.empty())
        throw std::invalid_argument("train_attr_probe: no class is stratifiable");
    std::sort(train_idx.begin(), train_idx.end());
    std::sort(test_idx.begin(), test_idx.end());

    std::vector<Vec> inputs;
    std::vector<int> labels;
    for (size_t i : train_idx) {
        inputs.push_back(attr_features(embeddings, dataset.examples[i].entity));
        labels.push_back(dataset.examples[i].cls);
    }
    result.probe = make_attr_probe_net(dataset, embeddings, cfg, 0xa77ull);
    train_classifier(result.probe, inputs, labels, cfg.train);
    if (dataset.class_count > 2) result.probe.output_head = Head::softmax;

    const int majority = majority_class(labels, dataset.class_count);
    long correct = 0, base = 0;
    for (size_t i : test_idx) {
        const AttrExample& ex = dataset.examples[i];
        const Vec x = attr_features(embeddings, ex.entity);
        const int pred = predict_class(result.probe, x.data());
        result.test_entities.push_back(ex.entity);
        result.test_predictions.push_back(pred);
        result.test_labels.push_back(ex.cls);
        if (pred == ex.cls) ++correct;
        if (majority == ex.cls) ++base;
    }
    result.test_accuracy = static_cast<double>(correct) / static_cast<double>(test_idx.size());
    result.majority_baseline = static_cast<double>(base) / static_cast<double>(test_idx.size());
    return result;
}

CrossValResult crossval_attr_probe(const AttrProbeDataset& dataset,
                                   const EmbeddingTable& embeddings,
                                   const ProbeConfig& cfg, int folds) {
    validate(cfg);
    if (folds < 2) throw std::invalid_argument("crossval_attr_probe: folds must be >= 2");
    if (dataset.examples.empty())
        throw std::invalid_argument("crossval_attr_probe: empty dataset");

    CrossValResult result;
    auto rng = make_rng(derive_seed(cfg.train.seed, 0xcf01ull));
    auto groups = group_by_class(dataset);
    std::vector<int> fold_of(dataset.examples.size(), -1);
    for (size_t c = 0; c < groups.size(); ++c) {
        auto& g = groups[c];
        if (g.empty()) continue;
        if (g.size() < static_cast<size_t>(folds))
            result.warnings.push_back("class " + std::to_string(c) +
                                      " has fewer members than folds");
        std::shuffle(g.begin(), g.end(), rng);
        for (size_t k = 0; k < g.size(); ++k)
            fold_of[g[k]] = static_cast<int>(k % static_cast<size_t>(folds));
    }

    std::vector<int> all_predictions(dataset.examples.size(), -1);
    for (int fold = 0; fold < folds; ++fold) {
        std::vector<Vec> inputs;
        std::vector<int> labels;
        std::vector<size_t> held;
        for (size_t i = 0; i < dataset.examples.size(); ++i) {
            if (fold_of[i] == fold) {
                held.push_back(i);
            } else {
                inputs.push_back(attr_features(embeddings, dataset.examples[i].entity));
                labels.push_back(dataset.examples[i].cls);
            }
        }
        if (held.empty() || inputs.empty()) continue;
        ProbeConfig fold_cfg = cfg;
        fold_cfg.train.seed = derive_seed(cfg.train.seed, 0xf01dull,
                                          static_cast<uint64_t>(fold));
        Mlp probe = make_attr_probe_net(dataset, embeddings, fold_cfg,
                                        0xa77ull + static_cast<uint64_t>(fold));
        train_classifier(probe, inputs, labels, fold_cfg.train);
        if (dataset.class_count > 2) probe.output_head = Head::softmax;
        for (size_t i : held) {
            const Vec x = attr_features(embeddings, dataset.examples[i].entity);
            all_predictions[i] = predict_class(probe, x.data());
        }
    }

    std::vector<int> all_labels;
    for (size_t i = 0; i < dataset.examples.size(); ++i) {
        if (all_predictions[i] < 0) continue;
        result.entities.push_back(dataset.examples[i].entity);
        result.predictions.push_back(all_predictions[i]);
        result.labels.push_back(dataset.examples[i].cls);
        all_labels.push_back(dataset.examples[i].cls);
    }
    if (result.labels.empty())
        throw std::invalid_argument("crossval_attr_probe: no out-of-fold predictions");
    long correct = 0, base = 0;
    const int majority = majority_class(all_labels, dataset.class_count);
    for (size_t i = 0; i < result.labels.size(); ++i) {
        if (result.predictions[i] == result.labels[i]) ++correct;
        if (majority == result.labels[i]) ++base;
    }
    result.accuracy = static_cast<double>(correct) / static_cast<double>(result.labels.size());
    result.majority_baseline =
        static_cast<double>(base) / static_cast<double>(result.labels.size());
    return result;
}

AuditReport attr_report_from_predictions(const std::vector<int>& predictions,
                                         const std::vector<int>& labels,
                                         const std::vector<double>& degrees,
                                         const Binning& binning) {
    if (predictions.size() != labels.size() || predictions.size() != degrees.size())
        throw std::invalid_argument("attr_report_from_predictions: length mismatch");
    std::vector<double> accuracies(predictions.size());
    std::vector<int> counts(predictions.size(), 1);
    for (size_t i = 0; i < predictions.size(); ++i)
        accuracies[i] = predictions[i] == labels[i] ? 1.0 : 0.0;
    return degree_binned_report(accuracies, counts, degrees, binning);
}

AuditReport attr_degree_report(const Mlp& probe, const AttrProbeDataset& dataset,
                               const EmbeddingTable& embeddings,
                               const std::vector<double>& degrees,
                               const Binning& binning) {
    if (degrees.size() != dataset.examples.size())
        throw std::invalid_argument("attr_degree_report: degree per example required");
    std::vector<int> predictions, labels;
    for (const AttrExample& ex : dataset.examples) {
        const Vec x = attr_features(embeddings, ex.entity);
        predictions.push_back(predict_class(probe, x.data()));
        labels.push_back(ex.cls);
    }
    return attr_report_from_predictions(predictions, labels, degrees, binning);
}

void save_report(const AuditReport& report, const std::string& csv_path) {
    std::ofstream out(csv_path);
    if (!out) throw std::runtime_error("cannot open for writing: " + csv_path);
    out << "deg_lo,deg_hi,n,acc,ci_lo,ci_hi\n";
    for (const ReportBin& b : report.bins)
        out << format_g17(b.degree_lo) << "," << format_g17(b.degree_hi) << "," << b.n_nodes
            << "," << format_g17(b.mean_accuracy) << "," << format_g17(b.ci_lo) << ","
            << format_g17(b.ci_hi) << "\n";
    if (!out) throw std::runtime_error("write failed: " + csv_path);

    std::ofstream meta(csv_path + ".meta");
    if (!meta) throw std::runtime_error("cannot open for writing: " + csv_path + ".meta");
    meta << "overall_accuracy=" << format_g17(report.overall_accuracy) << "\n";
    for (const auto& [k, v] : report.metadata) meta << k << "=" << v << "\n";
    if (!meta) throw std::runtime_error("write failed: " + csv_path + ".meta");
}

AuditReport load_report(const std::string& csv_path) {
    std::ifstream in(csv_path);
    if (!in) throw std::runtime_error("cannot open: " + csv_path);
    AuditReport report;
    std::string line;
    if (!std::getline(in, line) || line != "deg_lo,deg_hi,n,acc,ci_lo,ci_hi")
        throw std::runtime_error(csv_path + ": bad report header");
    int line_no = 1;
    while (std::getline(in, line)) {
        ++line_no;
        if (line.empty()) continue;
        std::istringstream ss(line);
        ReportBin b;
        char comma;
        if (!(ss >> b.degree_lo >> comma >> b.degree_hi >> comma >> b.n_nodes >> comma >>
              b.mean_accuracy >> comma >> b.ci_lo >> comma >> b.ci_hi))
            throw std::runtime_error(csv_path + ":" + std::to_string(line_no) +
                                     ": bad report row");
        report.bins.push_back(b);
    }

    std::ifstream meta(csv_path + ".meta");
    if (!meta) throw std::runtime_error("cannot open: " + csv_path + ".meta");
    while (std::getline(meta, line)) {
        if (line.empty()) continue;
        const size_t eq = line.find('=');
        if (eq == std::string::npos)
            throw std::runtime_error(csv_path + ".meta: bad key=value line");
        const std::string key = line.substr(0, eq);
        const std::string value = line.substr(eq + 1);
        if (key == "overall_accuracy")
            report.overall_accuracy = std::stod(value);
        else
            report.metadata[key] = value;
    }
    return report;
}

}  // namespace kgfair
