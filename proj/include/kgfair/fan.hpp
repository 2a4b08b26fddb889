#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "kgfair/core.hpp"
#include "kgfair/graph.hpp"
#include "kgfair/nn.hpp"

namespace kgfair {

// Filter + discriminator pair for adversarial attribute removal. The filter
// maps d -> d with one hidden layer; the discriminator maps d -> (0,1) with
// two. Leaky ReLU, dropout on non-output layers.
struct FanModel {
    Mlp filter;
    Mlp discriminator;
    double lambda = 0.5;
    int dim = 0;
};

FanModel make_fan_model(int dim, double lambda, double dropout, uint64_t seed,
                        double leaky_slope = 0.01);

struct FanTrainConfig {
    int pretrain_epochs = 10;
    int disc_steps_per_filter_step = 5;
    int epochs = 50;  // adversarial passes over the dataset
    int batch_size = 32;
    double learning_rate = 1e-3;
    uint64_t seed = 0;
};
void validate(const FanTrainConfig& cfg);

// Embeddings of the labeled entities only, with their binary labels.
struct FanDataset {
    EmbeddingTable embeddings;
    std::vector<int> labels;
    std::vector<int> entities;  // source entity ids, aligned with rows
};
FanDataset make_fan_dataset(const EmbeddingTable& all_embeddings,
                            const AttributeLabels& labels);

// recon is the unweighted squared reconstruction error; ce is the label
// log-likelihood of the discriminator on the filtered vector (<= 0, the term
// the filter minimizes and the discriminator maximizes);
// total = lambda * recon + ce. Dropout off (eval-mode forward).
struct FanLoss {
    double total = 0.0;
    double recon = 0.0;
    double ce = 0.0;
};
FanLoss fan_loss(const FanModel& model, const double* h, int y);

// Gradient of fan_loss().total w.r.t. the filter parameters, flowing through
// the frozen discriminator. Oracle surface for the finite-difference check.
MlpGrads fan_filter_gradients(const FanModel& model, const double* h, int y);

// Filter learns the identity map (reconstruction loss alone, dropout off);
// discriminator learns label cross-entropy on the unfiltered embeddings with
// its configured dropout. The two pretrainings are independent.
void pretrain(FanModel& model, const FanDataset& data, const FanTrainConfig& cfg);

struct FanTraceRow {
    long step = 0;
    std::string phase;      // "disc" or "filter"
    double recon = 0.0;     // mean unweighted reconstruction error of the batch
    double ce = 0.0;        // mean standard (non-negative) cross-entropy
    double disc_acc = 0.0;  // discriminator batch accuracy
};

// 5:1 alternation (disc_steps_per_filter_step discriminator ascent steps per
// filter descent step). Discriminator steps see eval-mode filter outputs;
// filter steps backpropagate through the frozen eval-mode discriminator.
// Throws DivergenceError when the batch reconstruction error exceeds 10x the
// mean squared input norm.
std::vector<FanTraceRow> adversarial_train(FanModel& model, const FanDataset& data,
                                           const FanTrainConfig& cfg);

// Eval-mode filter pass over every row. Parallel and serial agree exactly.
// Training only ever sees the labeled entities, so rows outside that set are
// extrapolation: valid input, but nothing was optimized for them. Feeding an
// already-filtered table back in is likewise well-defined and not an error,
// though the filter is not trained to be idempotent.
EmbeddingTable apply_filter(const FanModel& model, const EmbeddingTable& embeddings);
EmbeddingTable apply_filter_serial(const FanModel& model,
                                   const EmbeddingTable& embeddings);

void save_fan(const FanModel& model, const std::string& path);
FanModel load_fan(const std::string& path);

void save_fan_trace(const std::vector<FanTraceRow>& trace, const std::string& path);

}  // namespace kgfair
