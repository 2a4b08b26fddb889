// Pipeline driver: generate synthetic data, train embeddings, audit them for
// leakage and popularity bias, strip a sensitive attribute, consolidate.
#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>
#include <sstream>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "kgfair/config.hpp"
#include "kgfair/core.hpp"
#include "kgfair/datagen.hpp"
#include "kgfair/fan.hpp"
#include "kgfair/graph.hpp"
#include "kgfair/kge.hpp"
#include "kgfair/probe.hpp"
#include "kgfair/rng.hpp"
#include "kgfair/sgns.hpp"
#include "kgfair/walks.hpp"

namespace fs = std::filesystem;
using namespace kgfair;

namespace {

struct CommonArgs {
    std::string config_path;
    uint64_t seed = 0;
    bool seed_given = false;
    std::string out = ".";
    bool quiet = false;
};

struct Log {
    bool quiet;
    template <class... Ts>
    void operator()(const Ts&... parts) const {
        if (quiet) return;
        (std::cout << ... << parts) << "\n";
    }
};

std::string format_g(double v) {
    char buf[64];
    std::snprintf(buf, sizeof buf, "%g", v);
    return buf;
}

std::string join_path(const std::string& dir, const std::string& name) {
    return (fs::path(dir) / name).string();
}

void snapshot_config(Manifest& manifest, const ConfigFile& cfg) {
    for (const auto& [k, v] : cfg.flattened()) manifest.set("config." + k, v);
}

uint64_t resolve_seed(const CommonArgs& args, const ConfigFile& cfg) {
    if (args.seed_given) return args.seed;
    return cfg.get_u64("run", "seed", 0);
}

using Meta = std::map<std::string, std::string>;

void write_meta(const std::string& path, const Meta& kv) {
    std::ofstream out(path);
    if (!out) throw std::runtime_error("cannot open for writing: " + path);
    for (const auto& [k, v] : kv) out << k << "=" << v << "\n";
    if (!out) throw std::runtime_error("write failed: " + path);
}

Meta read_meta(const std::string& path) {
    Meta kv;
    std::ifstream in(path);
    if (!in) return kv;
    std::string line;
    while (std::getline(in, line)) {
        if (line.empty()) continue;
        const size_t eq = line.find('=');
        if (eq == std::string::npos) continue;
        kv[line.substr(0, eq)] = line.substr(eq + 1);
    }
    return kv;
}

// ingestion rules shared by embed (from config) and audit/debias (from the
// embedding sidecar, so entity ids line up with the trained table)
struct IngestSpec {
    std::string triples_path;
    int min_relation_count = 0;
    std::string blacklist_csv;
    std::string remove_rel;
};

IngestSpec ingest_from_config(const ConfigFile& cfg, const std::string& section) {
    IngestSpec spec;
    spec.triples_path = cfg.get_string(section, "triples");
    spec.min_relation_count =
        static_cast<int>(cfg.get_int(section, "min_relation_count", 0));
    spec.blacklist_csv = cfg.get_string(section, "relation_blacklist", "");
    spec.remove_rel = cfg.get_string(section, "remove_relation", "");
    return spec;
}

IngestSpec ingest_from_meta(const Meta& meta, const std::string& triples_path) {
    IngestSpec spec;
    spec.triples_path = triples_path;
    if (meta.count("min_relation_count"))
        spec.min_relation_count = std::stoi(meta.at("min_relation_count"));
    if (meta.count("relation_blacklist")) spec.blacklist_csv = meta.at("relation_blacklist");
    if (meta.count("remove_relation")) spec.remove_rel = meta.at("remove_relation");
    return spec;
}

KnowledgeGraph ingest(const IngestSpec& spec, const Log& log) {
    RelationFilter filter;
    filter.min_relation_count = spec.min_relation_count;
    std::string item;
    std::istringstream blacklist(spec.blacklist_csv);
    while (std::getline(blacklist, item, ','))
        if (!item.empty()) filter.blacklist.insert(item);
    KnowledgeGraph kg = load_triples(spec.triples_path, filter);
    if (!spec.remove_rel.empty()) {
        const auto rel = kg.relation_vocab.find(spec.remove_rel);
        if (!rel)
            throw std::invalid_argument("remove_relation: unknown relation '" +
                                        spec.remove_rel + "'");
        kg = remove_relation(kg, *rel);
        log("removed relation ", spec.remove_rel, "; ", kg.triples.size(),
            " triples remain");
    }
    return kg;
}

void meta_from_ingest(Meta& meta, const IngestSpec& spec) {
    meta["triples"] = spec.triples_path;
    meta["min_relation_count"] = std::to_string(spec.min_relation_count);
    meta["relation_blacklist"] = spec.blacklist_csv;
    meta["remove_relation"] = spec.remove_rel;
}

void write_loss_csv(const std::vector<double>& losses, const std::string& path) {
    std::ofstream out(path);
    if (!out) throw std::runtime_error("cannot open for writing: " + path);
    out << "epoch,loss\n";
    for (size_t i = 0; i < losses.size(); ++i)
        out << i << "," << format_g17(losses[i]) << "\n";
    if (!out) throw std::runtime_error("write failed: " + path);
}

int run_generate(const CommonArgs& args) {
    const auto started = std::chrono::steady_clock::now();
    const Log log{args.quiet};
    const ConfigFile cfg = ConfigFile::parse_file(args.config_path);
    const uint64_t seed = resolve_seed(args, cfg);
    fs::create_directories(args.out);

    Manifest manifest;
    manifest.set("stage", "generate");
    manifest.set("version", kVersion);
    manifest.set("seed", std::to_string(seed));
    snapshot_config(manifest, cfg);

    const std::string kind = cfg.get_string("generate", "kind", "kg");
    if (kind == "kg") {
        SyntheticKgSpec spec;
        spec.n_persons = static_cast<int>(cfg.get_int("kg", "n_persons", spec.n_persons));
        spec.n_occupations =
            static_cast<int>(cfg.get_int("kg", "n_occupations", spec.n_occupations));
        spec.gender_balance = cfg.get_real("kg", "gender_balance", spec.gender_balance);
        spec.structural_leak = cfg.get_real("kg", "structural_leak", spec.structural_leak);
        spec.occupation_gender_correlation = cfg.get_real(
            "kg", "occupation_gender_correlation", spec.occupation_gender_correlation);
        spec.extra_relations =
            static_cast<int>(cfg.get_int("kg", "extra_relations", spec.extra_relations));
        spec.seed = stage_seed(seed, "generate");

        const SyntheticKg data = gen_kg(spec);
        const std::string triples = join_path(args.out, "triples.tsv");
        const std::string gender = join_path(args.out, "gender.tsv");
        const std::string occupation = join_path(args.out, "occupation.tsv");
        save_triples(data.kg, triples);
        save_labels(data.gender, data.kg, gender);
        save_labels(data.occupation, data.kg, occupation);
        manifest.add_checksum("triples.tsv", file_checksum(triples));
        manifest.add_checksum("gender.tsv", file_checksum(gender));
        manifest.add_checksum("occupation.tsv", file_checksum(occupation));
        manifest.set("oracle_gender_accuracy",
                     format_g(oracle_gender_accuracy(data.kg, data.gender)));
        log("generated kg: ", data.kg.triples.size(), " triples, ",
            data.kg.entity_vocab.size(), " entities");
    } else if (kind == "network") {
        SyntheticNetSpec spec;
        spec.n_nodes = static_cast<int>(cfg.get_int("network", "n_nodes", spec.n_nodes));
        spec.attachment_m =
            static_cast<int>(cfg.get_int("network", "attachment_m", spec.attachment_m));
        spec.seed = stage_seed(seed, "generate");

        const Network net = gen_network(spec);
        const std::string edges = join_path(args.out, "edges.tsv");
        save_edge_list(net, edges);
        manifest.add_checksum("edges.tsv", file_checksum(edges));
        log("generated network: ", net.node_count, " nodes, ", net.edges.size(),
            " edges");
    } else {
        throw std::invalid_argument("config: generate.kind must be kg or network, got '" +
                                    kind + "'");
    }

    const double elapsed =
        std::chrono::duration<double>(std::chrono::steady_clock::now() - started).count();
    manifest.write(join_path(args.out, "manifest-generate.txt"), elapsed);
    return 0;
}

int run_embed(const CommonArgs& args) {
    const auto started = std::chrono::steady_clock::now();
    const Log log{args.quiet};
    const ConfigFile cfg = ConfigFile::parse_file(args.config_path);
    const uint64_t seed = resolve_seed(args, cfg);
    fs::create_directories(args.out);

    Manifest manifest;
    manifest.set("stage", "embed");
    manifest.set("version", kVersion);
    manifest.set("seed", std::to_string(seed));
    snapshot_config(manifest, cfg);

    const std::string kind = cfg.get_string("embed", "kind");
    if (kind == "transE" || kind == "transH" || kind == "transD") {
        const IngestSpec ingest_spec = ingest_from_config(cfg, "embed");
        const KnowledgeGraph kg = ingest(ingest_spec, log);

        KgeTrainConfig tc;
        tc.dim = static_cast<int>(cfg.get_int("embed", "dim", tc.dim));
        tc.margin = cfg.get_real("embed", "margin", tc.margin);
        tc.learning_rate = cfg.get_real("embed", "learning_rate", tc.learning_rate);
        tc.epochs = static_cast<int>(cfg.get_int("embed", "epochs", tc.epochs));
        tc.batch_size = static_cast<int>(cfg.get_int("embed", "batch_size", tc.batch_size));
        tc.seed = stage_seed(seed, "embed");

        log("training ", kind, ": ", kg.triples.size(), " triples, dim ", tc.dim, ", ",
            tc.epochs, " epochs");
        const KgeTrainResult result = train_kge(kg, kge_kind_from_name(kind), tc);

        const std::string model_path = join_path(args.out, kind + ".model");
        const std::string emb_path = join_path(args.out, "entities.emb");
        const std::string loss_path = join_path(args.out, "loss.csv");
        save_kge_model(result.model, model_path,
                       cfg.get_bool("embed", "binary_model", false));
        save_embeddings(result.model.entity_vecs, emb_path);
        write_loss_csv(result.epoch_losses, loss_path);

        Meta meta;
        meta["kind"] = kind;
        meta["dim"] = std::to_string(tc.dim);
        meta["filtered"] = "false";
        meta_from_ingest(meta, ingest_spec);
        write_meta(emb_path + ".meta", meta);

        manifest.add_checksum(kind + ".model", file_checksum(model_path));
        manifest.add_checksum("entities.emb", file_checksum(emb_path));
        manifest.add_checksum("loss.csv", file_checksum(loss_path));
        manifest.set("final_loss", format_g(result.epoch_losses.back()));
    } else if (kind == "node2vec" || kind == "deepwalk") {
        const Network net = load_edge_list(cfg.get_string("embed", "edges"));

        WalkConfig wc;
        wc.walks_per_node =
            static_cast<int>(cfg.get_int("embed", "walks_per_node", wc.walks_per_node));
        wc.walk_length =
            static_cast<int>(cfg.get_int("embed", "walk_length", wc.walk_length));
        wc.p = cfg.get_real("embed", "p", kind == "deepwalk" ? 1.0 : wc.p);
        wc.q = cfg.get_real("embed", "q", kind == "deepwalk" ? 1.0 : wc.q);
        wc.seed = stage_seed(seed, "embed-walks");

        SgnsConfig sc;
        sc.dim = static_cast<int>(cfg.get_int("embed", "dim", 64));
        sc.window = static_cast<int>(cfg.get_int("embed", "window", sc.window));
        sc.negatives_per_positive = static_cast<int>(
            cfg.get_int("embed", "negatives", sc.negatives_per_positive));
        sc.epochs = static_cast<int>(cfg.get_int("embed", "epochs", 3));
        sc.learning_rate = cfg.get_real("embed", "learning_rate", sc.learning_rate);
        sc.seed = stage_seed(seed, "embed-sgns");

        log("walking: ", net.node_count, " nodes x ", wc.walks_per_node, " walks x ",
            wc.walk_length, " steps");
        const Corpus corpus = generate_walks(net, wc);
        if (cfg.get_bool("embed", "save_corpus", false)) {
            const std::string corpus_path = join_path(args.out, "corpus.txt");
            save_corpus(corpus, corpus_path);
            manifest.add_checksum("corpus.txt", file_checksum(corpus_path));
        }
        log("skip-gram: dim ", sc.dim, ", ", sc.epochs, " epochs");
        std::vector<double> losses;
        const NodeEmbedding emb = train_sgns(corpus, net.node_count, sc, &losses);

        const std::string emb_path = join_path(args.out, "nodes.emb");
        const std::string loss_path = join_path(args.out, "loss.csv");
        save_embeddings(emb.vectors, emb_path);
        write_loss_csv(losses, loss_path);

        Meta meta;
        meta["kind"] = wc.p == 1.0 && wc.q == 1.0 ? "node2vec (deepwalk-equivalent)"
                                                  : "node2vec";
        meta["dim"] = std::to_string(sc.dim);
        meta["filtered"] = "false";
        write_meta(emb_path + ".meta", meta);
        manifest.set("walk_bias", meta["kind"]);

        manifest.add_checksum("nodes.emb", file_checksum(emb_path));
        manifest.add_checksum("loss.csv", file_checksum(loss_path));
        manifest.set("final_loss", format_g(losses.back()));
    } else {
        throw std::invalid_argument(
            "config: embed.kind must be transE, transH, transD, node2vec or deepwalk; "
            "got '" +
            kind + "'");
    }

    const double elapsed =
        std::chrono::duration<double>(std::chrono::steady_clock::now() - started).count();
    manifest.write(join_path(args.out, "manifest-embed.txt"), elapsed);
    return 0;
}

Binning binning_from_config(const ConfigFile& cfg, const std::string& section) {
    Binning binning;
    binning.bin_count = static_cast<int>(cfg.get_int(section, "bins", 10));
    binning.min_occupancy =
        static_cast<int>(cfg.get_int(section, "min_occupancy", 20));
    const std::string scheme = cfg.get_string(section, "bin_scheme", "log2_width");
    if (scheme == "log2_width")
        binning.scheme = BinScheme::log2_width;
    else if (scheme == "quantile")
        binning.scheme = BinScheme::quantile;
    else
        throw std::invalid_argument(
            "config: " + section + ".bin_scheme must be log2_width or quantile");
    return binning;
}

ProbeConfig probe_from_config(const ConfigFile& cfg, const std::string& section,
                              uint64_t seed) {
    ProbeConfig pc;
    pc.hidden_dims = {static_cast<int>(cfg.get_int(section, "hidden", 64))};
    pc.dropout = cfg.get_real(section, "dropout", 0.0);
    pc.train.learning_rate = cfg.get_real(section, "probe_learning_rate", 1e-3);
    pc.train.batch_size = static_cast<int>(cfg.get_int(section, "probe_batch_size", 32));
    pc.train.epochs = static_cast<int>(cfg.get_int(section, "probe_epochs", 30));
    pc.train.seed = seed;
    return pc;
}

int run_audit(const CommonArgs& args) {
    const auto started = std::chrono::steady_clock::now();
    const Log log{args.quiet};
    const ConfigFile cfg = ConfigFile::parse_file(args.config_path);
    const uint64_t seed = resolve_seed(args, cfg);
    fs::create_directories(args.out);

    Manifest manifest;
    manifest.set("stage", "audit");
    manifest.set("version", kVersion);
    manifest.set("seed", std::to_string(seed));
    snapshot_config(manifest, cfg);

    const std::string kind = cfg.get_string("audit", "kind", "attr");
    const std::string emb_path = cfg.get_string("audit", "embeddings");
    const EmbeddingTable embeddings = load_embeddings(emb_path);
    const Meta emb_meta = read_meta(emb_path + ".meta");
    const bool filtered =
        emb_meta.count("filtered") && emb_meta.at("filtered") == "true";
    const std::string lambda_str =
        emb_meta.count("lambda") ? emb_meta.at("lambda") : "";
    const std::string tag = filtered ? "lambda" + lambda_str : "unfiltered";

    const Binning binning = binning_from_config(cfg, "audit");
    const ProbeConfig pc = probe_from_config(cfg, "audit", stage_seed(seed, "audit"));

    if (kind == "attr") {
        const IngestSpec ingest_spec =
            ingest_from_meta(emb_meta, cfg.get_string("audit", "triples"));
        const KnowledgeGraph kg = ingest(ingest_spec, log);
        const std::string attribute = cfg.get_string("audit", "attribute");
        std::vector<std::string> warnings;
        const AttributeLabels labels =
            load_labels(cfg.get_string("audit", "labels"), kg, attribute, &warnings);
        for (const std::string& w : warnings) log("warning: ", w);

        const AttrProbeDataset dataset = make_attr_dataset(labels);
        const int folds = static_cast<int>(cfg.get_int("audit", "folds", 5));
        log("auditing ", attribute, " (", tag, "): ", dataset.examples.size(),
            " entities, ", dataset.class_count, " classes, ", folds, " folds");
        const CrossValResult cv = crossval_attr_probe(dataset, embeddings, pc, folds);
        for (const std::string& w : cv.warnings) log("warning: ", w);

        std::vector<double> degrees;
        degrees.reserve(cv.entities.size());
        for (int e : cv.entities) degrees.push_back(static_cast<double>(degree(kg, e)));
        AuditReport report =
            attr_report_from_predictions(cv.predictions, cv.labels, degrees, binning);
        report.metadata["attribute"] = attribute;
        report.metadata["filtered"] = filtered ? "true" : "false";
        if (!lambda_str.empty()) report.metadata["lambda"] = lambda_str;
        if (emb_meta.count("kind")) report.metadata["model"] = emb_meta.at("kind");
        report.metadata["folds"] = std::to_string(folds);

        const std::string base = attribute + "-" + tag;
        const std::string report_path = join_path(args.out, base + "-report.csv");
        save_report(report, report_path);

        const std::string summary_path = join_path(args.out, base + "-summary.csv");
        {
            std::ofstream out(summary_path);
            if (!out) throw std::runtime_error("cannot open for writing: " + summary_path);
            out << "attribute,tag,filtered,lambda,accuracy,baseline\n";
            out << attribute << "," << tag << "," << (filtered ? "true" : "false") << ","
                << lambda_str << "," << format_g17(cv.accuracy) << ","
                << format_g17(cv.majority_baseline) << "\n";
        }
        manifest.add_checksum(base + "-report.csv", file_checksum(report_path));
        manifest.add_checksum(base + "-report.csv.meta",
                              file_checksum(report_path + ".meta"));
        manifest.add_checksum(base + "-summary.csv", file_checksum(summary_path));
        manifest.set("accuracy", format_g(cv.accuracy));
        manifest.set("baseline", format_g(cv.majority_baseline));
        log(attribute, " accuracy ", format_g(cv.accuracy), " (baseline ",
            format_g(cv.majority_baseline), ")");
    } else if (kind == "link") {
        const Network net = load_edge_list(cfg.get_string("audit", "edges"));
        const double test_fraction = cfg.get_real("audit", "test_fraction", 0.2);
        if (test_fraction <= 0.0 || test_fraction >= 1.0)
            throw std::invalid_argument("config: audit.test_fraction must be in (0,1)");

        LinkProbeDataset dataset =
            build_link_dataset(net, net.edges, stage_seed(seed, "audit-negatives"));
        for (const std::string& w : dataset.warnings) log("warning: ", w);

        // held-out probe evaluation: split examples, keeping labels balanced
        auto rng = make_rng(stage_seed(seed, "audit-split"));
        std::vector<size_t> pos_idx, neg_idx;
        for (size_t i = 0; i < dataset.examples.size(); ++i)
            (dataset.examples[i].label ? pos_idx : neg_idx).push_back(i);
        std::shuffle(pos_idx.begin(), pos_idx.end(), rng);
        std::shuffle(neg_idx.begin(), neg_idx.end(), rng);
        const auto take = [&](const std::vector<size_t>& idx) {
            return static_cast<size_t>(
                std::llround(test_fraction * static_cast<double>(idx.size())));
        };
        std::vector<size_t> test_idx(pos_idx.begin(),
                                     pos_idx.begin() + static_cast<std::ptrdiff_t>(take(pos_idx)));
        test_idx.insert(test_idx.end(), neg_idx.begin(),
                        neg_idx.begin() + static_cast<std::ptrdiff_t>(take(neg_idx)));
        std::sort(test_idx.begin(), test_idx.end());
        LinkProbeDataset train_ds, test_ds;
        {
            size_t t = 0;
            for (size_t i = 0; i < dataset.examples.size(); ++i) {
                if (t < test_idx.size() && test_idx[t] == i) {
                    test_ds.examples.push_back(dataset.examples[i]);
                    ++t;
                } else {
                    train_ds.examples.push_back(dataset.examples[i]);
                }
            }
        }

        log("link audit: ", train_ds.examples.size(), " train / ",
            test_ds.examples.size(), " test examples");
        const Mlp probe = train_link_probe(train_ds, embeddings, pc);
        const std::vector<int> predictions = link_predictions(probe, test_ds, embeddings);
        const PerNodeAccuracies per_node = per_node_accuracies(predictions, test_ds);

        std::vector<double> degrees;
        degrees.reserve(per_node.nodes.size());
        for (int node : per_node.nodes)
            degrees.push_back(static_cast<double>(degree(net, node)));
        AuditReport report = degree_binned_report(per_node.accuracy,
                                                  per_node.example_count, degrees, binning);
        report.metadata["kind"] = "link";
        if (emb_meta.count("kind")) report.metadata["model"] = emb_meta.at("kind");
        report.metadata["trend_spearman"] = format_g(bin_trend_spearman(report));

        const std::string report_path = join_path(args.out, "link-report.csv");
        save_report(report, report_path);
        manifest.add_checksum("link-report.csv", file_checksum(report_path));
        manifest.add_checksum("link-report.csv.meta",
                              file_checksum(report_path + ".meta"));
        manifest.set("overall_accuracy", format_g(report.overall_accuracy));
        manifest.set("trend_spearman", report.metadata["trend_spearman"]);
        log("link accuracy ", format_g(report.overall_accuracy), ", degree trend ",
            report.metadata["trend_spearman"]);
    } else {
        throw std::invalid_argument("config: audit.kind must be attr or link, got '" +
                                    kind + "'");
    }

    const double elapsed =
        std::chrono::duration<double>(std::chrono::steady_clock::now() - started).count();
    manifest.write(join_path(args.out, "manifest-audit.txt"), elapsed);
    return 0;
}

int run_debias(const CommonArgs& args) {
    const auto started = std::chrono::steady_clock::now();
    const Log log{args.quiet};
    const ConfigFile cfg = ConfigFile::parse_file(args.config_path);
    const uint64_t seed = resolve_seed(args, cfg);
    fs::create_directories(args.out);

    Manifest manifest;
    manifest.set("stage", "debias");
    manifest.set("version", kVersion);
    manifest.set("seed", std::to_string(seed));
    snapshot_config(manifest, cfg);

    const std::string emb_path = cfg.get_string("debias", "embeddings");
    const EmbeddingTable embeddings = load_embeddings(emb_path);
    const Meta emb_meta = read_meta(emb_path + ".meta");
    const IngestSpec ingest_spec =
        ingest_from_meta(emb_meta, cfg.get_string("debias", "triples"));
    const KnowledgeGraph kg = ingest(ingest_spec, log);

    const std::string attribute = cfg.get_string("debias", "attribute", "gender");
    std::vector<std::string> warnings;
    const AttributeLabels labels =
        load_labels(cfg.get_string("debias", "labels"), kg, attribute, &warnings);
    for (const std::string& w : warnings) log("warning: ", w);
    if (labels.class_count() != 2)
        throw std::invalid_argument("debias: sensitive attribute must be binary; '" +
                                    attribute + "' has " +
                                    std::to_string(labels.class_count()) + " classes");

    const double lambda = cfg.get_real("debias", "lambda", 0.5);
    const double dropout = cfg.get_real("debias", "dropout", 0.5);
    FanTrainConfig fc;
    fc.pretrain_epochs =
        static_cast<int>(cfg.get_int("debias", "pretrain_epochs", fc.pretrain_epochs));
    fc.disc_steps_per_filter_step = static_cast<int>(
        cfg.get_int("debias", "disc_steps", fc.disc_steps_per_filter_step));
    fc.epochs = static_cast<int>(cfg.get_int("debias", "epochs", fc.epochs));
    fc.batch_size = static_cast<int>(cfg.get_int("debias", "batch_size", fc.batch_size));
    fc.learning_rate = cfg.get_real("debias", "learning_rate", fc.learning_rate);
    fc.seed = stage_seed(seed, "debias");

    const FanDataset dataset = make_fan_dataset(embeddings, labels);
    log("fan: ", dataset.embeddings.count, " labeled entities, lambda ", format_g(lambda));
    FanModel model = make_fan_model(embeddings.dim, lambda, dropout,
                                    derive_seed(fc.seed, 0x0deull));
    pretrain(model, dataset, fc);
    const std::vector<FanTraceRow> trace = adversarial_train(model, dataset, fc);

    const EmbeddingTable filtered = apply_filter(model, embeddings);
    const std::string out_emb = join_path(args.out, "filtered.emb");
    const std::string ckpt = join_path(args.out, "fan.ckpt");
    const std::string trace_path = join_path(args.out, "fan-trace.csv");
    save_embeddings(filtered, out_emb);
    save_fan(model, ckpt);
    save_fan_trace(trace, trace_path);

    Meta meta = emb_meta;  // carry ingestion keys through for later audits
    meta["filtered"] = "true";
    meta["lambda"] = format_g(lambda);
    meta["source_embeddings"] = emb_path;
    meta["sensitive_attribute"] = attribute;
    write_meta(out_emb + ".meta", meta);

    manifest.add_checksum("filtered.emb", file_checksum(out_emb));
    manifest.add_checksum("fan.ckpt", file_checksum(ckpt));
    manifest.add_checksum("fan-trace.csv", file_checksum(trace_path));
    if (!trace.empty()) {
        manifest.set("final_recon", format_g(trace.back().recon));
        manifest.set("final_disc_acc", format_g(trace.back().disc_acc));
    }
    log("filtered ", filtered.count, " embeddings; final recon ",
        trace.empty() ? "n/a" : format_g(trace.back().recon));

    const double elapsed =
        std::chrono::duration<double>(std::chrono::steady_clock::now() - started).count();
    manifest.write(join_path(args.out, "manifest-debias.txt"), elapsed);
    return 0;
}

int run_report(const CommonArgs& args) {
    const auto started = std::chrono::steady_clock::now();
    const Log log{args.quiet};
    fs::create_directories(args.out);

    // collect per-audit summaries from the run directory
    std::vector<std::string> files;
    for (const auto& entry : fs::directory_iterator(args.out)) {
        const std::string name = entry.path().filename().string();
        if (name.size() > 12 && name.ends_with("-summary.csv"))
            files.push_back(entry.path().string());
    }
    std::sort(files.begin(), files.end());
    if (files.empty())
        throw std::invalid_argument("report: no *-summary.csv files in " + args.out);

    struct Row {
        bool filtered = false;
        double lambda = 0.0;
        std::map<std::string, std::string> cells;  // attribute -> accuracy
    };
    std::map<std::string, Row> rows;  // keyed by tag
    std::vector<std::string> attributes;
    for (const std::string& file : files) {
        std::ifstream in(file);
        if (!in) throw std::runtime_error("cannot open: " + file);
        std::string header, line;
        if (!std::getline(in, header) ||
            header != "attribute,tag,filtered,lambda,accuracy,baseline")
            throw std::runtime_error(file + ": unexpected summary header");
        while (std::getline(in, line)) {
            if (line.empty()) continue;
            std::vector<std::string> cols;
            std::istringstream ss(line);
            std::string col;
            while (std::getline(ss, col, ',')) cols.push_back(col);
            if (cols.size() != 6) throw std::runtime_error(file + ": bad summary row");
            Row& row = rows[cols[1]];
            row.filtered = cols[2] == "true";
            row.lambda = cols[3].empty() ? 0.0 : std::stod(cols[3]);
            row.cells[cols[0]] = cols[4];
            if (std::find(attributes.begin(), attributes.end(), cols[0]) ==
                attributes.end())
                attributes.push_back(cols[0]);
        }
    }

    // columns: gender, occupation first (Table-1 order), the rest alphabetical
    std::sort(attributes.begin(), attributes.end(), [](const auto& a, const auto& b) {
        auto key = [](const std::string& s) {
            if (s == "gender") return std::pair<int, std::string>{0, s};
            if (s == "occupation") return std::pair<int, std::string>{1, s};
            return std::pair<int, std::string>{2, s};
        };
        return key(a) < key(b);
    });
    // rows: unfiltered first, then lambda descending
    std::vector<std::pair<std::string, const Row*>> ordered;
    for (const auto& [tag, row] : rows) ordered.emplace_back(tag, &row);
    std::sort(ordered.begin(), ordered.end(), [](const auto& a, const auto& b) {
        if (a.second->filtered != b.second->filtered) return !a.second->filtered;
        if (a.second->lambda != b.second->lambda) return a.second->lambda > b.second->lambda;
        return a.first < b.first;
    });

    const std::string csv_path = join_path(args.out, "report.csv");
    const std::string txt_path = join_path(args.out, "report.txt");
    {
        std::ofstream out(csv_path);
        if (!out) throw std::runtime_error("cannot open for writing: " + csv_path);
        out << "variant";
        for (const std::string& a : attributes) out << "," << a;
        out << "\n";
        for (const auto& [tag, row] : ordered) {
            out << (row->filtered ? "lambda=" + format_g(row->lambda) : "unfiltered");
            for (const std::string& a : attributes) {
                const auto it = row->cells.find(a);
                out << "," << (it == row->cells.end() ? "-" : it->second);
            }
            out << "\n";
        }
    }
    {
        std::vector<std::vector<std::string>> table;
        std::vector<std::string> head{"variant"};
        head.insert(head.end(), attributes.begin(), attributes.end());
        table.push_back(head);
        for (const auto& [tag, row] : ordered) {
            std::vector<std::string> r{row->filtered ? "lambda=" + format_g(row->lambda)
                                                     : "unfiltered"};
            for (const std::string& a : attributes) {
                const auto it = row->cells.find(a);
                if (it == row->cells.end()) {
                    r.push_back("-");
                } else {
                    char buf[32];
                    std::snprintf(buf, sizeof buf, "%.4f", std::stod(it->second));
                    r.push_back(buf);
                }
            }
            table.push_back(std::move(r));
        }
        std::vector<size_t> width(table[0].size(), 0);
        for (const auto& r : table)
            for (size_t c = 0; c < r.size(); ++c) width[c] = std::max(width[c], r[c].size());
        std::ofstream out(txt_path);
        if (!out) throw std::runtime_error("cannot open for writing: " + txt_path);
        for (const auto& r : table) {
            for (size_t c = 0; c < r.size(); ++c) {
                out << r[c];
                if (c + 1 < r.size())
                    out << std::string(width[c] - r[c].size() + 2, ' ');
            }
            out << "\n";
        }
    }
    log("report over ", ordered.size(), " variants, ", attributes.size(), " attributes");

    Manifest manifest;
    manifest.set("stage", "report");
    manifest.set("version", kVersion);
    manifest.add_checksum("report.csv", file_checksum(csv_path));
    manifest.add_checksum("report.txt", file_checksum(txt_path));
    const double elapsed =
        std::chrono::duration<double>(std::chrono::steady_clock::now() - started).count();
    manifest.write(join_path(args.out, "manifest-report.txt"), elapsed);
    return 0;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"graph embedding fairness toolkit"};
    app.require_subcommand(1);

    CommonArgs args;
    auto add_common = [&](CLI::App* cmd, bool config_required) {
        auto* config = cmd->add_option("--config", args.config_path, "config file path");
        if (config_required) config->required();
        cmd->add_option("--seed", args.seed, "global seed (overrides run.seed)");
        cmd->add_option("--out", args.out, "output directory (default .)");
        cmd->add_flag("--quiet", args.quiet, "suppress progress output");
    };

    CLI::App* generate = app.add_subcommand("generate", "synthesize datasets");
    CLI::App* embed = app.add_subcommand("embed", "train embeddings");
    CLI::App* audit = app.add_subcommand("audit", "probe embeddings for leakage/bias");
    CLI::App* debias = app.add_subcommand("debias", "adversarially filter embeddings");
    CLI::App* report = app.add_subcommand("report", "consolidate audit summaries");
    add_common(generate, true);
    add_common(embed, true);
    add_common(audit, true);
    add_common(debias, true);
    add_common(report, false);

    CLI11_PARSE(app, argc, argv);

    try {
        for (CLI::App* cmd : {generate, embed, audit, debias, report})
            if (cmd->parsed()) args.seed_given = cmd->count("--seed") > 0;

        if (generate->parsed()) return run_generate(args);
        if (embed->parsed()) return run_embed(args);
        if (audit->parsed()) return run_audit(args);
        if (debias->parsed()) return run_debias(args);
        if (report->parsed()) return run_report(args);
    } catch (const DivergenceError& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 3;
    } catch (const std::invalid_argument& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 2;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    }
    return 1;
}
