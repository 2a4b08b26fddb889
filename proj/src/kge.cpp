#include "kgfair/kge.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>
#include <fstream>
#include <numeric>
#include <sstream>
#include <stdexcept>
#include <unordered_map>

#include "kgfair/rng.hpp"

namespace kgfair {

KgeKind kge_kind_from_name(const std::string& name) {
    if (name == "transE") return KgeKind::transE;
    if (name == "transH") return KgeKind::transH;
    if (name == "transD") return KgeKind::transD;
    throw std::invalid_argument("unknown kge kind: " + name);
}

const char* kge_kind_name(KgeKind kind) {
    switch (kind) {
        case KgeKind::transE: return "transE";
        case KgeKind::transH: return "transH";
        case KgeKind::transD: return "transD";
    }
    return "transE";
}

namespace {

void clip_to_unit_ball(double* v, int d) {
    const double n2 = squared_norm(v, d);
    if (n2 > 1.0) scale(1.0 / std::sqrt(n2), v, d);
}

void renormalize(double* v, int d) {
    const double n = norm(v, d);
    if (n > 0.0) scale(1.0 / n, v, d);
}

// g = projected translation residual; score = ||g||.
void residual(const KgeModel& m, int h, int r, int t, Vec& g) {
    const int d = m.dim;
    g.resize(static_cast<size_t>(d));
    const double* hv = m.entity_vecs.row(h);
    const double* tv = m.entity_vecs.row(t);
    const double* rv = m.relation_vecs.row(r);
    for (int i = 0; i < d; ++i) g[static_cast<size_t>(i)] = hv[i] - tv[i] + rv[i];
    switch (m.kind) {
        case KgeKind::transE:
            break;
        case KgeKind::transH: {
            const double* w = m.relation_normals.row(r);
            const double s = dot(w, hv, d) - dot(w, tv, d);
            axpy(-s, w, g.data(), d);
            break;
        }
        case KgeKind::transD: {
            const double* wh = m.entity_proj.row(h);
            const double* wt = m.entity_proj.row(t);
            const double* wr = m.relation_proj.row(r);
            const double s = dot(wh, hv, d) - dot(wt, tv, d);
            axpy(s, wr, g.data(), d);
            break;
        }
    }
}

void check_ids(const KgeModel& m, int h, int r, int t) {
    if (h < 0 || h >= m.entity_count() || t < 0 || t >= m.entity_count())
        throw std::out_of_range("kge: entity id out of range");
    if (r < 0 || r >= m.relation_count())
        throw std::out_of_range("kge: relation id out of range");
}

}  // namespace

KgeModel make_kge_model(KgeKind kind, int entity_count, int relation_count, int dim,
                        uint64_t seed) {
    if (entity_count <= 0 || relation_count <= 0 || dim <= 0)
        throw std::invalid_argument("make_kge_model: counts and dim must be positive");
    KgeModel m;
    m.kind = kind;
    m.dim = dim;
    m.entity_vecs = EmbeddingTable(entity_count, dim);
    m.relation_vecs = EmbeddingTable(relation_count, dim);

    auto rng = make_rng(derive_seed(seed, 0x1e17ull));
    const double bound = 6.0 / std::sqrt(static_cast<double>(dim));
    std::uniform_real_distribution<double> dist(-bound, bound);
    for (double& v : m.entity_vecs.data) v = dist(rng);
    for (double& v : m.relation_vecs.data) v = dist(rng);
    for (int e = 0; e < entity_count; ++e) clip_to_unit_ball(m.entity_vecs.row(e), dim);
    for (int r = 0; r < relation_count; ++r) renormalize(m.relation_vecs.row(r), dim);

    if (kind == KgeKind::transH) {
        m.relation_normals = EmbeddingTable(relation_count, dim);
        for (double& v : m.relation_normals.data) v = dist(rng);
        for (int r = 0; r < relation_count; ++r)
            renormalize(m.relation_normals.row(r), dim);
    } else if (kind == KgeKind::transD) {
        m.entity_proj = EmbeddingTable(entity_count, dim);
        m.relation_proj = EmbeddingTable(relation_count, dim);
        // Small nonzero init: all-zero projection vectors are a saddle point
        // (their gradients vanish together), so training would never use them.
        std::uniform_real_distribution<double> pdist(-0.1 * bound, 0.1 * bound);
        for (double& v : m.entity_proj.data) v = pdist(rng);
        for (double& v : m.relation_proj.data) v = pdist(rng);
    }
    return m;
}

double score(const KgeModel& model, int h, int r, int t) {
    check_ids(model, h, r, t);
    Vec g;
    residual(model, h, r, t, g);
    return norm(g.data(), model.dim);
}

ScoreGrads score_gradients(const KgeModel& model, int h, int r, int t) {
    check_ids(model, h, r, t);
    const int d = model.dim;
    Vec g;
    residual(model, h, r, t, g);
    const double f = norm(g.data(), d);
    Vec u(static_cast<size_t>(d), 0.0);
    if (f > 0.0)
        for (int i = 0; i < d; ++i) u[static_cast<size_t>(i)] = g[static_cast<size_t>(i)] / f;

    ScoreGrads out;
    out.d_head = u;
    out.d_rel = u;
    out.d_tail.assign(static_cast<size_t>(d), 0.0);
    axpy(-1.0, u.data(), out.d_tail.data(), d);

    switch (model.kind) {
        case KgeKind::transE:
            break;
        case KgeKind::transH: {
            const double* w = model.relation_normals.row(r);
            const double* hv = model.entity_vecs.row(h);
            const double* tv = model.entity_vecs.row(t);
            const double wu = dot(w, u.data(), d);
            const double s = dot(w, hv, d) - dot(w, tv, d);
            axpy(-wu, w, out.d_head.data(), d);
            axpy(wu, w, out.d_tail.data(), d);
            out.d_normal.assign(static_cast<size_t>(d), 0.0);
            for (int i = 0; i < d; ++i)
                out.d_normal[static_cast<size_t>(i)] =
                    -wu * (hv[i] - tv[i]) - s * u[static_cast<size_t>(i)];
            break;
        }
        case KgeKind::transD: {
            const double* wh = model.entity_proj.row(h);
            const double* wt = model.entity_proj.row(t);
            const double* wr = model.relation_proj.row(r);
            const double* hv = model.entity_vecs.row(h);
            const double* tv = model.entity_vecs.row(t);
            const double wru = dot(wr, u.data(), d);
            const double a = dot(wh, hv, d);
            const double b = dot(wt, tv, d);
            axpy(wru, wh, out.d_head.data(), d);
            axpy(-wru, wt, out.d_tail.data(), d);
            out.d_head_proj.assign(static_cast<size_t>(d), 0.0);
            out.d_tail_proj.assign(static_cast<size_t>(d), 0.0);
            out.d_rel_proj.assign(static_cast<size_t>(d), 0.0);
            axpy(wru, hv, out.d_head_proj.data(), d);
            axpy(-wru, tv, out.d_tail_proj.data(), d);
            axpy(a - b, u.data(), out.d_rel_proj.data(), d);
            break;
        }
    }
    return out;
}

size_t TripleHash::operator()(const Triple& t) const {
    uint64_t x = splitmix64(static_cast<uint64_t>(t.head));
    x = splitmix64(x ^ static_cast<uint64_t>(t.relation) << 1);
    x = splitmix64(x ^ static_cast<uint64_t>(t.tail) << 2);
    return static_cast<size_t>(x);
}

TripleSet::TripleSet(const std::vector<Triple>& triples) {
    set_.reserve(triples.size() * 2);
    for (const Triple& t : triples) set_.insert(t);
}

CorruptedTriple corrupt_triple(const TripleSet& known, int entity_count,
                               const Triple& triple, std::mt19937_64& rng) {
    std::uniform_int_distribution<int> ent(0, entity_count - 1);
    std::bernoulli_distribution head_side(0.5);
    constexpr int kMaxRetries = 100;
    CorruptedTriple out{triple, true};
    for (int attempt = 0; attempt < kMaxRetries; ++attempt) {
        Triple cand = triple;
        if (head_side(rng))
            cand.head = ent(rng);
        else
            cand.tail = ent(rng);
        if (cand == triple) continue;
        out.triple = cand;
        if (!known.contains(cand)) {
            out.retries_exhausted = false;
            return out;
        }
    }
    return out;  // best effort, flagged
}

CorruptedTriple corrupt_triple(const KnowledgeGraph& kg, const Triple& triple,
                               std::mt19937_64& rng) {
    TripleSet known(kg.triples);
    return corrupt_triple(known, static_cast<int>(kg.entity_vocab.size()), triple, rng);
}

void validate(const KgeTrainConfig& cfg) {
    if (cfg.dim <= 0) throw std::invalid_argument("dim must be > 0");
    if (cfg.margin <= 0.0) throw std::invalid_argument("margin must be > 0");
    if (cfg.learning_rate < 0.0) throw std::invalid_argument("learning_rate must be >= 0");
    if (cfg.epochs <= 0) throw std::invalid_argument("epochs must be > 0");
    if (cfg.batch_size <= 0) throw std::invalid_argument("batch_size must be > 0");
}

namespace {

// Gradient accumulator keyed by (table, row).
enum class Table : uint32_t { entity, relation, normal, ent_proj, rel_proj };

struct Accum {
    std::unordered_map<uint64_t, Vec> grads;
    int dim;

    explicit Accum(int d) : dim(d) {}

    static uint64_t key(Table t, int row) {
        return (static_cast<uint64_t>(t) << 32) | static_cast<uint32_t>(row);
    }
    void add(Table t, int row, const Vec& g, double sign) {
        auto it = grads.try_emplace(key(t, row), static_cast<size_t>(dim), 0.0).first;
        axpy(sign, g.data(), it->second.data(), dim);
    }
    void clear() { grads.clear(); }
};

void add_score_grads(Accum& acc, const KgeModel& m, const Triple& tr,
                     const ScoreGrads& g, double sign) {
    acc.add(Table::entity, tr.head, g.d_head, sign);
    acc.add(Table::entity, tr.tail, g.d_tail, sign);
    acc.add(Table::relation, tr.relation, g.d_rel, sign);
    if (m.kind == KgeKind::transH) {
        acc.add(Table::normal, tr.relation, g.d_normal, sign);
    } else if (m.kind == KgeKind::transD) {
        acc.add(Table::ent_proj, tr.head, g.d_head_proj, sign);
        acc.add(Table::ent_proj, tr.tail, g.d_tail_proj, sign);
        acc.add(Table::rel_proj, tr.relation, g.d_rel_proj, sign);
    }
}

double* table_row(KgeModel& m, Table t, int row) {
    switch (t) {
        case Table::entity: return m.entity_vecs.row(row);
        case Table::relation: return m.relation_vecs.row(row);
        case Table::normal: return m.relation_normals.row(row);
        case Table::ent_proj: return m.entity_proj.row(row);
        case Table::rel_proj: return m.relation_proj.row(row);
    }
    return nullptr;
}

}  // namespace

KgeTrainResult train_kge(const KnowledgeGraph& kg, KgeKind kind,
                         const KgeTrainConfig& cfg, const KgeStepObserver& observer) {
    validate(cfg);
    if (kg.triples.empty()) throw std::invalid_argument("train_kge: empty knowledge graph");

    KgeTrainResult result;
    result.model = make_kge_model(kind, static_cast<int>(kg.entity_vocab.size()),
                                  static_cast<int>(kg.relation_vocab.size()), cfg.dim,
                                  derive_seed(cfg.seed, 0x1417ull));
    KgeModel& m = result.model;
    const int entity_count = m.entity_count();

    TripleSet known(kg.triples);
    auto rng = make_rng(derive_seed(cfg.seed, 0x7214ull));
    std::vector<size_t> order(kg.triples.size());
    std::iota(order.begin(), order.end(), size_t{0});

    Accum acc(cfg.dim);
    long step = 0;
    for (int epoch = 0; epoch < cfg.epochs; ++epoch) {
        std::shuffle(order.begin(), order.end(), rng);
        double epoch_loss = 0.0;
        size_t pos = 0;
        while (pos < order.size()) {
            const size_t end = std::min(order.size(), pos + static_cast<size_t>(cfg.batch_size));
            acc.clear();
            for (size_t k = pos; k < end; ++k) {
                const Triple& positive = kg.triples[order[k]];
                const Triple negative = corrupt_triple(known, entity_count, positive, rng).triple;
                const double loss =
                    cfg.margin + score(m, positive.head, positive.relation, positive.tail) -
                    score(m, negative.head, negative.relation, negative.tail);
                if (loss <= 0.0) continue;
                epoch_loss += loss;
                add_score_grads(acc, m, positive,
                                score_gradients(m, positive.head, positive.relation,
                                                positive.tail),
                                1.0);
                add_score_grads(acc, m, negative,
                                score_gradients(m, negative.head, negative.relation,
                                                negative.tail),
                                -1.0);
            }
            const double inv = 1.0 / static_cast<double>(end - pos);
            for (const auto& [key, grad] : acc.grads) {
                const Table table = static_cast<Table>(key >> 32);
                const int row = static_cast<int>(key & 0xffffffffu);
                axpy(-cfg.learning_rate * inv, grad.data(), table_row(m, table, row),
                     cfg.dim);
            }
            // constraints on the rows this step touched
            for (const auto& [key, grad] : acc.grads) {
                const Table table = static_cast<Table>(key >> 32);
                const int row = static_cast<int>(key & 0xffffffffu);
                if (table == Table::entity)
                    clip_to_unit_ball(m.entity_vecs.row(row), cfg.dim);
                else if (table == Table::normal)
                    renormalize(m.relation_normals.row(row), cfg.dim);
            }
            ++step;
            if (observer) observer(m, epoch, step);
            pos = end;
        }
        const double mean_loss = epoch_loss / static_cast<double>(kg.triples.size());
        if (!std::isfinite(mean_loss))
            throw DivergenceError(
                "kge training diverged (non-finite loss; lower the learning rate)");
        result.epoch_losses.push_back(mean_loss);
    }
    return result;
}

namespace {

std::vector<RankPair> ranks_impl(const KgeModel& model, const KnowledgeGraph& kg,
                                 const std::vector<Triple>& test, bool parallel) {
    TripleSet filter(kg.triples);
    for (const Triple& t : test) filter.insert(t);
    const int n = static_cast<int>(test.size());
    const int entity_count = model.entity_count();
    std::vector<RankPair> out(static_cast<size_t>(n));
#pragma omp parallel for schedule(dynamic, 4) if (parallel)
    for (int i = 0; i < n; ++i) {
        const Triple& t = test[static_cast<size_t>(i)];
        const double true_score = score(model, t.head, t.relation, t.tail);
        long better_head = 0, better_tail = 0;
        for (int e = 0; e < entity_count; ++e) {
            if (e != t.head && !filter.contains({e, t.relation, t.tail}) &&
                score(model, e, t.relation, t.tail) < true_score)
                ++better_head;
            if (e != t.tail && !filter.contains({t.head, t.relation, e}) &&
                score(model, t.head, t.relation, e) < true_score)
                ++better_tail;
        }
        out[static_cast<size_t>(i)] = {better_head + 1, better_tail + 1};
    }
    return out;
}

}  // namespace

std::vector<RankPair> filtered_ranks(const KgeModel& model, const KnowledgeGraph& kg,
                                     const std::vector<Triple>& test) {
    return ranks_impl(model, kg, test, true);
}

std::vector<RankPair> filtered_ranks_serial(const KgeModel& model,
                                            const KnowledgeGraph& kg,
                                            const std::vector<Triple>& test) {
    return ranks_impl(model, kg, test, false);
}

double mean_rank(const std::vector<RankPair>& ranks) {
    if (ranks.empty()) return 0.0;
    double total = 0.0;
    for (const RankPair& r : ranks)
        total += 0.5 * (static_cast<double>(r.rank_head) + static_cast<double>(r.rank_tail));
    return total / static_cast<double>(ranks.size());
}

double hits_at(const std::vector<RankPair>& ranks, long k) {
    if (ranks.empty()) return 0.0;
    long hits = 0;
    for (const RankPair& r : ranks) {
        if (r.rank_head <= k) ++hits;
        if (r.rank_tail <= k) ++hits;
    }
    return static_cast<double>(hits) / (2.0 * static_cast<double>(ranks.size()));
}

namespace {

void write_table(std::ostream& out, const char* name, const EmbeddingTable& t) {
    out << "table " << name << " " << t.count << " " << t.dim << "\n";
    for (int i = 0; i < t.count; ++i) {
        const double* r = t.row(i);
        for (int j = 0; j < t.dim; ++j) out << (j ? " " : "") << format_g17(r[j]);
        out << "\n";
    }
}

EmbeddingTable read_table(std::istream& in, const std::string& expect_name) {
    std::string tag, name;
    int count = 0, dim = 0;
    if (!(in >> tag >> name >> count >> dim) || tag != "table" || name != expect_name)
        throw std::runtime_error("kge checkpoint: expected table " + expect_name);
    EmbeddingTable t(count, dim);
    for (double& v : t.data)
        if (!(in >> v)) throw std::runtime_error("kge checkpoint: truncated table " + name);
    return t;
}

constexpr char kBinaryMagic[4] = {'K', 'G', 'E', 'B'};

void write_binary_table(std::ostream& out, const EmbeddingTable& t) {
    const uint64_t count = static_cast<uint64_t>(t.count);
    const uint64_t dim = static_cast<uint64_t>(t.dim);
    out.write(reinterpret_cast<const char*>(&count), sizeof(count));
    out.write(reinterpret_cast<const char*>(&dim), sizeof(dim));
    out.write(reinterpret_cast<const char*>(t.data.data()),
              static_cast<std::streamsize>(t.data.size() * sizeof(double)));
}

EmbeddingTable read_binary_table(std::istream& in) {
    uint64_t count = 0, dim = 0;
    in.read(reinterpret_cast<char*>(&count), sizeof(count));
    in.read(reinterpret_cast<char*>(&dim), sizeof(dim));
    if (!in) throw std::runtime_error("kge checkpoint: truncated binary table header");
    EmbeddingTable t(static_cast<int>(count), static_cast<int>(dim));
    in.read(reinterpret_cast<char*>(t.data.data()),
            static_cast<std::streamsize>(t.data.size() * sizeof(double)));
    if (!in) throw std::runtime_error("kge checkpoint: truncated binary table");
    return t;
}

}  // namespace

void save_kge_model(const KgeModel& model, const std::string& path, bool binary) {
    if (binary) {
        std::ofstream out(path, std::ios::binary);
        if (!out) throw std::runtime_error("cannot open for writing: " + path);
        out.write(kBinaryMagic, 4);
        const uint32_t version = 1;
        const uint32_t kind = static_cast<uint32_t>(model.kind);
        const uint32_t dim = static_cast<uint32_t>(model.dim);
        out.write(reinterpret_cast<const char*>(&version), sizeof(version));
        out.write(reinterpret_cast<const char*>(&kind), sizeof(kind));
        out.write(reinterpret_cast<const char*>(&dim), sizeof(dim));
        write_binary_table(out, model.entity_vecs);
        write_binary_table(out, model.relation_vecs);
        if (model.kind == KgeKind::transH) write_binary_table(out, model.relation_normals);
        if (model.kind == KgeKind::transD) {
            write_binary_table(out, model.entity_proj);
            write_binary_table(out, model.relation_proj);
        }
        if (!out) throw std::runtime_error("write failed: " + path);
        return;
    }
    std::ofstream out(path);
    if (!out) throw std::runtime_error("cannot open for writing: " + path);
    out << "kge 1\n";
    out << "kind " << kge_kind_name(model.kind) << "\n";
    out << "dim " << model.dim << "\n";
    write_table(out, "entity_vecs", model.entity_vecs);
    write_table(out, "relation_vecs", model.relation_vecs);
    if (model.kind == KgeKind::transH)
        write_table(out, "relation_normals", model.relation_normals);
    if (model.kind == KgeKind::transD) {
        write_table(out, "entity_proj", model.entity_proj);
        write_table(out, "relation_proj", model.relation_proj);
    }
    out << "end\n";
    if (!out) throw std::runtime_error("write failed: " + path);
}

KgeModel load_kge_model(const std::string& path) {
    std::ifstream probe(path, std::ios::binary);
    if (!probe) throw std::runtime_error("cannot open: " + path);
    char magic[4] = {};
    probe.read(magic, 4);
    const bool binary = probe.gcount() == 4 && std::memcmp(magic, kBinaryMagic, 4) == 0;

    KgeModel m;
    if (binary) {
        uint32_t version = 0, kind = 0, dim = 0;
        probe.read(reinterpret_cast<char*>(&version), sizeof(version));
        probe.read(reinterpret_cast<char*>(&kind), sizeof(kind));
        probe.read(reinterpret_cast<char*>(&dim), sizeof(dim));
        if (!probe || version != 1 || kind > 2)
            throw std::runtime_error("bad kge binary checkpoint header: " + path);
        m.kind = static_cast<KgeKind>(kind);
        m.dim = static_cast<int>(dim);
        m.entity_vecs = read_binary_table(probe);
        m.relation_vecs = read_binary_table(probe);
        if (m.kind == KgeKind::transH) m.relation_normals = read_binary_table(probe);
        if (m.kind == KgeKind::transD) {
            m.entity_proj = read_binary_table(probe);
            m.relation_proj = read_binary_table(probe);
        }
        return m;
    }
    std::ifstream in(path);
    std::string tag;
    int version = 0;
    if (!(in >> tag >> version) || tag != "kge" || version != 1)
        throw std::runtime_error("bad kge checkpoint header: " + path);
    std::string key, kind_name;
    if (!(in >> key >> kind_name) || key != "kind")
        throw std::runtime_error("kge checkpoint: expected kind");
    m.kind = kge_kind_from_name(kind_name);
    if (!(in >> key >> m.dim) || key != "dim")
        throw std::runtime_error("kge checkpoint: expected dim");
    m.entity_vecs = read_table(in, "entity_vecs");
    m.relation_vecs = read_table(in, "relation_vecs");
    if (m.kind == KgeKind::transH) m.relation_normals = read_table(in, "relation_normals");
    if (m.kind == KgeKind::transD) {
        m.entity_proj = read_table(in, "entity_proj");
        m.relation_proj = read_table(in, "relation_proj");
    }
    if (!(in >> tag) || tag != "end")
        throw std::runtime_error("kge checkpoint: missing end marker");
    return m;
}

}  // namespace kgfair
