#pragma once

#include <cstdint>
#include <utility>
#include <vector>

#include "kgfair/core.hpp"
#include "kgfair/walks.hpp"

namespace kgfair {

struct SgnsConfig {
    int dim = 64;
    int window = 5;
    int negatives_per_positive = 5;
    int epochs = 5;
    double learning_rate = 0.025;
    uint64_t seed = 0;
};
void validate(const SgnsConfig& cfg);

// Center ("input") vectors are the node representation; context vectors are
// kept because the probe tests inspect both tables.
struct NodeEmbedding {
    EmbeddingTable vectors;
    EmbeddingTable context_vectors;
};

// All (center, context) pairs within a fixed symmetric window, in scan order.
std::vector<std::pair<int, int>> sgns_training_pairs(const std::vector<int>& walk,
                                                     int window);

// -log sigmoid(ctx . ctr) - sum_k log sigmoid(-neg_k . ctr)
double sgns_pair_loss(const double* center, const double* ctx,
                      const std::vector<const double*>& negs, int dim);
// Gradients of the pair loss. d_negs is resized to negs.size().
void sgns_pair_grads(const double* center, const double* ctx,
                     const std::vector<const double*>& negs, int dim, Vec& d_center,
                     Vec& d_ctx, std::vector<Vec>& d_negs);

// Per-pair SGD on both tables; negatives drawn from the unigram^(3/4)
// distribution over corpus tokens. Single-threaded, deterministic under seed.
// epoch_losses, when given, receives the mean pair loss of each epoch.
NodeEmbedding train_sgns(const Corpus& corpus, int vocab_size, const SgnsConfig& cfg,
                         std::vector<double>* epoch_losses = nullptr);

}  // namespace kgfair
