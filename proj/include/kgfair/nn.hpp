#pragma once

#include <cstdint>
#include <functional>
#include <random>
#include <string>
#include <utility>
#include <vector>

#include "kgfair/core.hpp"

namespace kgfair {

enum class Activation { relu, leaky_relu };
enum class Head { linear, sigmoid, softmax };

Activation activation_from_name(const std::string& name);
const char* activation_name(Activation a);
Head head_from_name(const std::string& name);
const char* head_name(Head h);

// Dense feed-forward network with explicit forward/backward passes.
// weights[l] has shape (layer_dims[l+1], layer_dims[l]). Dropout (inverted)
// is applied to hidden activations in train mode only.
struct Mlp {
    std::vector<int> layer_dims;
    std::vector<Matrix> weights;
    std::vector<Vec> biases;
    Activation hidden_activation = Activation::relu;
    double leaky_slope = 0.01;
    Head output_head = Head::linear;
    double dropout_rate = 0.0;

    int input_dim() const { return layer_dims.front(); }
    int output_dim() const { return layer_dims.back(); }
    int layer_count() const { return static_cast<int>(weights.size()); }
};

// Glorot-uniform initialization, deterministic under seed.
Mlp make_mlp(std::vector<int> layer_dims, Activation hidden, Head head,
             double dropout_rate, uint64_t seed, double leaky_slope = 0.01);

enum class Mode { train, eval };

struct ForwardCache {
    Vec input;
    std::vector<Vec> pre;           // pre-activations per layer
    std::vector<Vec> act;           // post-activation (and post-dropout) per layer
    std::vector<Vec> dropout_mask;  // inverted-dropout masks for hidden layers
    Mode mode = Mode::eval;
};

// In train mode with dropout_rate > 0 an rng is required.
Vec forward(const Mlp& net, const double* x, Mode mode, std::mt19937_64* rng = nullptr,
            ForwardCache* cache = nullptr);

struct MlpGrads {
    std::vector<Matrix> dW;
    std::vector<Vec> db;
    Vec dx;  // gradient w.r.t. the input, for composing networks
};

MlpGrads make_zero_grads(const Mlp& net);

// upstream is the loss gradient w.r.t. the network OUTPUT (post-head).
MlpGrads backward(const Mlp& net, const ForwardCache& cache, const Vec& upstream);
// Accumulating variant used by minibatch trainers (dx is not accumulated).
void backward_accumulate(const Mlp& net, const ForwardCache& cache, const Vec& upstream,
                         MlpGrads& acc);

// -[y log p + (1-y) log(1-p)] with p clamped to [1e-7, 1-1e-7].
double binary_cross_entropy(double p, int y);
// d/dp of the above, with the same clamping.
double binary_cross_entropy_grad(double p, int y);

// Numerically stable; grad = softmax(logits) - onehot(y).
std::pair<double, Vec> softmax_cross_entropy(const Vec& logits, int y);

enum class OptimizerKind { sgd, adam };

struct TrainConfig {
    double learning_rate = 1e-3;
    int batch_size = 32;
    int epochs = 50;
    uint64_t seed = 0;
    OptimizerKind optimizer = OptimizerKind::adam;
    double adam_beta1 = 0.9;
    double adam_beta2 = 0.999;
    double adam_eps = 1e-8;
};
void validate(const TrainConfig& cfg);

void sgd_step(double* p, const double* g, int n, double lr);

struct AdamMoments {
    Vec m;
    Vec v;
};
// t is the 1-based step count.
void adam_step(double* p, const double* g, int n, AdamMoments& moments, long t,
               double lr, double beta1, double beta2, double eps);

// Owns optimizer state for one Mlp; applies mean-of-batch gradients.
struct MlpTrainer {
    explicit MlpTrainer(Mlp& net, const TrainConfig& cfg);
    void apply(const MlpGrads& grad_sum, int batch_size);

    Mlp* net;
    TrainConfig cfg;
    std::vector<AdamMoments> weight_moments;
    std::vector<AdamMoments> bias_moments;
    long step_count = 0;
};

// Loss callback: maps the network output to (loss, dloss/doutput).
using LossFn = std::function<std::pair<double, Vec>(const Vec& output)>;

// Central finite differences over every parameter; returns the max relative
// error (|a-n|) / max(|a|,|n|,1e-8). Requires dropout disabled.
double grad_check(const Mlp& net, const LossFn& loss, const double* x, double step = 1e-5);

// Minibatch training of a classifier. Sigmoid-head nets train on binary
// cross-entropy against labels in {0,1}; linear-head nets train on softmax
// cross-entropy over output_dim classes. Returns per-epoch mean losses.
std::vector<double> train_classifier(Mlp& net, const std::vector<Vec>& inputs,
                                     const std::vector<int>& labels, const TrainConfig& cfg);

// Sigmoid head: p >= 0.5; linear/softmax head: argmax.
int predict_class(const Mlp& net, const double* x);

// Versioned text checkpoint; see docs/formats.md.
void save_mlp(const Mlp& net, const std::string& path);
Mlp load_mlp(const std::string& path);
void write_mlp_block(const Mlp& net, std::ostream& out);
Mlp read_mlp_block(std::istream& in);

}  // namespace kgfair
