#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "kgfair/graph.hpp"

namespace kgfair {

// Biased second-order random walks (node2vec). p = return parameter,
// q = in-out parameter; p = q = 1 reduces to uniform (DeepWalk) walks.
struct WalkConfig {
    int walks_per_node = 10;
    int walk_length = 40;
    double p = 1.0;
    double q = 1.0;
    uint64_t seed = 0;
};
void validate(const WalkConfig& cfg);

using Corpus = std::vector<std::vector<int>>;

// Walk w of node v sits at index v * walks_per_node + w. Each walk draws from
// its own rng stream keyed on (seed, node, w), so the parallel and serial
// versions produce identical corpora. Isolated nodes yield length-1 walks.
Corpus generate_walks(const Network& net, const WalkConfig& cfg);
Corpus generate_walks_serial(const Network& net, const WalkConfig& cfg);

// Unnormalized node2vec weight from previous node t to candidate x at the
// current node. Exposed for the transition-distribution tests.
double node2vec_weight(const Network& net, int t, int x, double p, double q);

// One walk per line, space-separated node ids.
void save_corpus(const Corpus& corpus, const std::string& path);
Corpus load_corpus(const std::string& path);

}  // namespace kgfair
