#include "kgfair/walks.hpp"

#include <fstream>
#include <sstream>
#include <stdexcept>

#include "kgfair/rng.hpp"

namespace kgfair {

void validate(const WalkConfig& cfg) {
    if (cfg.walks_per_node <= 0) throw std::invalid_argument("walks_per_node must be > 0");
    if (cfg.walk_length < 2) throw std::invalid_argument("walk_length must be >= 2");
    if (cfg.p <= 0.0 || cfg.q <= 0.0) throw std::invalid_argument("p and q must be > 0");
}

double node2vec_weight(const Network& net, int t, int x, double p, double q) {
    if (x == t) return 1.0 / p;
    if (net.has_edge(t, x)) return 1.0;
    return 1.0 / q;
}

namespace {

std::vector<int> one_walk(const Network& net, const WalkConfig& cfg, int start,
                          std::mt19937_64& rng) {
    std::vector<int> walk;
    walk.reserve(static_cast<size_t>(cfg.walk_length));
    walk.push_back(start);
    const auto& first_nbrs = net.adjacency[static_cast<size_t>(start)];
    if (first_nbrs.empty()) return walk;
    std::uniform_int_distribution<size_t> uni(0, first_nbrs.size() - 1);
    walk.push_back(first_nbrs[uni(rng)]);

    std::vector<double> weights;
    while (static_cast<int>(walk.size()) < cfg.walk_length) {
        const int v = walk.back();
        const int t = walk[walk.size() - 2];
        const auto& nbrs = net.adjacency[static_cast<size_t>(v)];
        weights.resize(nbrs.size());
        double total = 0.0;
        for (size_t i = 0; i < nbrs.size(); ++i) {
            weights[i] = node2vec_weight(net, t, nbrs[i], cfg.p, cfg.q);
            total += weights[i];
        }
        std::uniform_real_distribution<double> dist(0.0, total);
        const double r = dist(rng);
        double acc = 0.0;
        size_t pick = nbrs.size() - 1;
        for (size_t i = 0; i < nbrs.size(); ++i) {
            acc += weights[i];
            if (r < acc) {
                pick = i;
                break;
            }
        }
        walk.push_back(nbrs[pick]);
    }
    return walk;
}

Corpus generate_impl(const Network& net, const WalkConfig& cfg, bool parallel) {
    validate(cfg);
    if (net.node_count <= 0) throw std::invalid_argument("generate_walks: empty network");
    Corpus corpus(static_cast<size_t>(net.node_count) *
                  static_cast<size_t>(cfg.walks_per_node));
#pragma omp parallel for schedule(dynamic, 16) if (parallel)
    for (int node = 0; node < net.node_count; ++node) {
        for (int w = 0; w < cfg.walks_per_node; ++w) {
            auto rng = make_rng(derive_seed(cfg.seed, static_cast<uint64_t>(node),
                                            static_cast<uint64_t>(w)));
            corpus[static_cast<size_t>(node) * static_cast<size_t>(cfg.walks_per_node) +
                   static_cast<size_t>(w)] = one_walk(net, cfg, node, rng);
        }
    }
    return corpus;
}

}  // namespace

Corpus generate_walks(const Network& net, const WalkConfig& cfg) {
    return generate_impl(net, cfg, true);
}

Corpus generate_walks_serial(const Network& net, const WalkConfig& cfg) {
    return generate_impl(net, cfg, false);
}

void save_corpus(const Corpus& corpus, const std::string& path) {
    std::ofstream out(path);
    if (!out) throw std::runtime_error("cannot open for writing: " + path);
    for (const auto& walk : corpus) {
        for (size_t i = 0; i < walk.size(); ++i) out << (i ? " " : "") << walk[i];
        out << "\n";
    }
    if (!out) throw std::runtime_error("write failed: " + path);
}

Corpus load_corpus(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw std::runtime_error("cannot open: " + path);
    Corpus corpus;
    std::string line;
    int line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        std::istringstream ss(line);
        std::vector<int> walk;
        long long id;
        while (ss >> id) {
            if (id < 0)
                throw std::runtime_error(path + ":" + std::to_string(line_no) +
                                         ": negative node id");
            walk.push_back(static_cast<int>(id));
        }
        if (!walk.empty()) corpus.push_back(std::move(walk));
    }
    return corpus;
}

}  // namespace kgfair
