#include "kgfair/sgns.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <stdexcept>

#include "kgfair/rng.hpp"

namespace kgfair {

void validate(const SgnsConfig& cfg) {
    if (cfg.dim <= 0) throw std::invalid_argument("dim must be > 0");
    if (cfg.window <= 0) throw std::invalid_argument("window must be > 0");
    if (cfg.negatives_per_positive <= 0)
        throw std::invalid_argument("negatives_per_positive must be > 0");
    if (cfg.epochs <= 0) throw std::invalid_argument("epochs must be > 0");
    if (cfg.learning_rate <= 0.0) throw std::invalid_argument("learning_rate must be > 0");
}

std::vector<std::pair<int, int>> sgns_training_pairs(const std::vector<int>& walk,
                                                     int window) {
    std::vector<std::pair<int, int>> pairs;
    const int n = static_cast<int>(walk.size());
    for (int i = 0; i < n; ++i) {
        const int lo = std::max(0, i - window);
        const int hi = std::min(n - 1, i + window);
        for (int j = lo; j <= hi; ++j) {
            if (j == i) continue;
            pairs.emplace_back(walk[static_cast<size_t>(i)], walk[static_cast<size_t>(j)]);
        }
    }
    return pairs;
}

namespace {

double sigmoid(double x) { return 1.0 / (1.0 + std::exp(-x)); }

double log_sigmoid(double x) {
    // log(1/(1+e^-x)) = -log1p(e^-x), stable on both tails
    if (x >= 0.0) return -std::log1p(std::exp(-x));
    return x - std::log1p(std::exp(x));
}

// Cumulative unigram^(3/4) table; sample by binary search.
struct NegativeSampler {
    std::vector<double> cumulative;
    std::vector<int> ids;

    NegativeSampler(const Corpus& corpus, int vocab_size) {
        std::vector<long long> counts(static_cast<size_t>(vocab_size), 0);
        for (const auto& walk : corpus)
            for (int id : walk) ++counts[static_cast<size_t>(id)];
        double running = 0.0;
        for (int id = 0; id < vocab_size; ++id) {
            if (counts[static_cast<size_t>(id)] == 0) continue;
            running += std::pow(static_cast<double>(counts[static_cast<size_t>(id)]), 0.75);
            cumulative.push_back(running);
            ids.push_back(id);
        }
        if (cumulative.empty()) throw std::invalid_argument("empty corpus");
    }

    int draw(std::mt19937_64& rng) const {
        std::uniform_real_distribution<double> dist(0.0, cumulative.back());
        const double r = dist(rng);
        const auto it = std::upper_bound(cumulative.begin(), cumulative.end(), r);
        size_t idx = static_cast<size_t>(it - cumulative.begin());
        if (idx >= ids.size()) idx = ids.size() - 1;
        return ids[idx];
    }

    // Negatives equal to the positive context are redrawn (bounded), matching
    // the usual skip-gram practice of not contradicting the positive example.
    int draw_avoiding(std::mt19937_64& rng, int avoid) const {
        int id = draw(rng);
        for (int tries = 0; id == avoid && ids.size() > 1 && tries < 100; ++tries)
            id = draw(rng);
        return id;
    }
};

}  // namespace

double sgns_pair_loss(const double* center, const double* ctx,
                      const std::vector<const double*>& negs, int dim) {
    double loss = -log_sigmoid(dot(ctx, center, dim));
    for (const double* neg : negs) loss -= log_sigmoid(-dot(neg, center, dim));
    return loss;
}

void sgns_pair_grads(const double* center, const double* ctx,
                     const std::vector<const double*>& negs, int dim, Vec& d_center,
                     Vec& d_ctx, std::vector<Vec>& d_negs) {
    d_center.assign(static_cast<size_t>(dim), 0.0);
    d_ctx.assign(static_cast<size_t>(dim), 0.0);
    d_negs.assign(negs.size(), Vec(static_cast<size_t>(dim), 0.0));

    const double gpos = sigmoid(dot(ctx, center, dim)) - 1.0;
    axpy(gpos, ctx, d_center.data(), dim);
    axpy(gpos, center, d_ctx.data(), dim);
    for (size_t k = 0; k < negs.size(); ++k) {
        const double gneg = sigmoid(dot(negs[k], center, dim));
        axpy(gneg, negs[k], d_center.data(), dim);
        axpy(gneg, center, d_negs[k].data(), dim);
    }
}

NodeEmbedding train_sgns(const Corpus& corpus, int vocab_size, const SgnsConfig& cfg,
                         std::vector<double>* epoch_losses) {
    validate(cfg);
    if (corpus.empty()) throw std::invalid_argument("train_sgns: empty corpus");
    for (const auto& walk : corpus)
        for (int id : walk)
            if (id < 0 || id >= vocab_size)
                throw std::invalid_argument("train_sgns: node id out of vocab range");

    NodeEmbedding emb;
    emb.vectors = EmbeddingTable(vocab_size, cfg.dim);
    emb.context_vectors = EmbeddingTable(vocab_size, cfg.dim);
    auto rng = make_rng(derive_seed(cfg.seed, 0x5a15ull));
    {
        // word2vec-style init: center uniform in +-0.5/dim, context zero
        std::uniform_real_distribution<double> dist(-0.5 / cfg.dim, 0.5 / cfg.dim);
        for (double& v : emb.vectors.data) v = dist(rng);
    }

    NegativeSampler sampler(corpus, vocab_size);
    std::vector<size_t> walk_order(corpus.size());
    std::iota(walk_order.begin(), walk_order.end(), size_t{0});

    Vec center_update(static_cast<size_t>(cfg.dim));
    for (int epoch = 0; epoch < cfg.epochs; ++epoch) {
        std::shuffle(walk_order.begin(), walk_order.end(), rng);
        double total_loss = 0.0;
        long long pair_count = 0;
        for (size_t wi : walk_order) {
            const auto pairs = sgns_training_pairs(corpus[wi], cfg.window);
            for (const auto& [ctr, ctx] : pairs) {
                double* v = emb.vectors.row(ctr);
                double* u = emb.context_vectors.row(ctx);
                std::fill(center_update.begin(), center_update.end(), 0.0);

                const double pos_dot = dot(u, v, cfg.dim);
                total_loss += -log_sigmoid(pos_dot);
                const double g = cfg.learning_rate * (1.0 - sigmoid(pos_dot));
                axpy(g, u, center_update.data(), cfg.dim);
                axpy(g, v, u, cfg.dim);

                for (int k = 0; k < cfg.negatives_per_positive; ++k) {
                    const int neg = sampler.draw_avoiding(rng, ctx);
                    double* un = emb.context_vectors.row(neg);
                    const double neg_dot = dot(un, v, cfg.dim);
                    total_loss += -log_sigmoid(-neg_dot);
                    const double gn = -cfg.learning_rate * sigmoid(neg_dot);
                    axpy(gn, un, center_update.data(), cfg.dim);
                    axpy(gn, v, un, cfg.dim);
                }
                // center vector updated last, word2vec order
                axpy(1.0, center_update.data(), v, cfg.dim);
                ++pair_count;
            }
        }
        if (epoch_losses && pair_count > 0)
            epoch_losses->push_back(total_loss / static_cast<double>(pair_count));
    }
    for (double v : emb.vectors.data)
        if (!std::isfinite(v)) throw DivergenceError("sgns training diverged");
    return emb;
}

}  // namespace kgfair
