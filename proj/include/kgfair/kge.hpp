#pragma once

#include <cstdint>
#include <functional>
#include <random>
#include <string>
#include <unordered_set>
#include <vector>

#include "kgfair/core.hpp"
#include "kgfair/graph.hpp"

namespace kgfair {

enum class KgeKind { transE, transH, transD };
KgeKind kge_kind_from_name(const std::string& name);
const char* kge_kind_name(KgeKind kind);

// Translational model. relation_normals is populated for transH only;
// entity_proj/relation_proj for transD only (count 0 otherwise).
struct KgeModel {
    KgeKind kind = KgeKind::transE;
    int dim = 0;
    EmbeddingTable entity_vecs;
    EmbeddingTable relation_vecs;
    EmbeddingTable relation_normals;
    EmbeddingTable entity_proj;
    EmbeddingTable relation_proj;

    int entity_count() const { return entity_vecs.count; }
    int relation_count() const { return relation_vecs.count; }
};

KgeModel make_kge_model(KgeKind kind, int entity_count, int relation_count, int dim,
                        uint64_t seed);

// L2 distance after the kind-specific projection; lower = more plausible.
double score(const KgeModel& model, int h, int r, int t);

// Gradients of score(h,r,t) w.r.t. every participating vector, written into
// rows of a gradient accumulator. Exposed for the finite-difference oracle.
struct ScoreGrads {
    Vec d_head, d_tail, d_rel;
    Vec d_normal;                              // transH w_r
    Vec d_head_proj, d_tail_proj, d_rel_proj;  // transD w_h, w_t, w_r
};
ScoreGrads score_gradients(const KgeModel& model, int h, int r, int t);

struct TripleHash {
    size_t operator()(const Triple& t) const;
};

// Membership set over triples; used to filter corruptions.
struct TripleSet {
    TripleSet() = default;
    explicit TripleSet(const std::vector<Triple>& triples);
    void insert(const Triple& t) { set_.insert(t); }
    bool contains(const Triple& t) const { return set_.count(t) > 0; }

  private:
    std::unordered_set<Triple, TripleHash> set_;
};

struct CorruptedTriple {
    Triple triple;
    bool retries_exhausted = false;
};

// Replaces head or tail (fair coin) with a uniform entity; resamples while the
// corruption is a known true triple, up to a bounded number of retries.
CorruptedTriple corrupt_triple(const TripleSet& known, int entity_count,
                               const Triple& triple, std::mt19937_64& rng);
CorruptedTriple corrupt_triple(const KnowledgeGraph& kg, const Triple& triple,
                               std::mt19937_64& rng);

struct KgeTrainConfig {
    int dim = 50;
    double margin = 1.0;
    double learning_rate = 0.01;
    int epochs = 100;
    int batch_size = 64;
    uint64_t seed = 0;
};
void validate(const KgeTrainConfig& cfg);

struct KgeTrainResult {
    KgeModel model;
    std::vector<double> epoch_losses;  // mean hinge loss per epoch
};

// Called after every optimizer step (batch update + norm constraints).
using KgeStepObserver = std::function<void(const KgeModel&, int epoch, long step)>;

// Margin-ranking SGD, one corrupted triple per positive, minibatch mean
// gradients; entity norms clipped to <= 1 and transH normals renormalized
// after every step. Throws DivergenceError on non-finite loss.
KgeTrainResult train_kge(const KnowledgeGraph& kg, KgeKind kind,
                         const KgeTrainConfig& cfg,
                         const KgeStepObserver& observer = nullptr);

struct RankPair {
    long rank_head = 0;
    long rank_tail = 0;
};

// Filtered entity ranking: rank = 1 + number of strictly better corruptions
// that are not themselves true triples (filter = kg plus test set).
std::vector<RankPair> filtered_ranks(const KgeModel& model, const KnowledgeGraph& kg,
                                     const std::vector<Triple>& test);
std::vector<RankPair> filtered_ranks_serial(const KgeModel& model,
                                            const KnowledgeGraph& kg,
                                            const std::vector<Triple>& test);

double mean_rank(const std::vector<RankPair>& ranks);
double hits_at(const std::vector<RankPair>& ranks, long k);

// Text checkpoint (17 significant digits, round-trip exact) or binary; load
// detects the variant by magic.
void save_kge_model(const KgeModel& model, const std::string& path, bool binary = false);
KgeModel load_kge_model(const std::string& path);

}  // namespace kgfair
