#include <cmath>
#include <random>
#include <vector>

#include "doctest.h"
#include "kgfair/core.hpp"
#include "kgfair/graph.hpp"
#include "kgfair/kge.hpp"
#include "kgfair/rng.hpp"
#include "util.hpp"

using namespace kgfair;

namespace {

KnowledgeGraph chain_kg() {
    // A -r-> B -r-> C
    KnowledgeGraph kg;
    const int a = kg.entity_vocab.intern("A");
    const int b = kg.entity_vocab.intern("B");
    const int c = kg.entity_vocab.intern("C");
    const int r = kg.relation_vocab.intern("r");
    kg.triples = {{a, r, b}, {b, r, c}};
    kg.entity_degree = {1, 2, 1};
    return kg;
}

double max_abs_diff(const EmbeddingTable& a, const EmbeddingTable& b) {
    double m = 0.0;
    for (size_t i = 0; i < a.data.size(); ++i)
        m = std::max(m, std::fabs(a.data[i] - b.data[i]));
    return m;
}

}  // namespace

TEST_CASE("transE closed-form scores") {
    KgeModel m;
    m.kind = KgeKind::transE;
    m.dim = 2;
    m.entity_vecs = EmbeddingTable(3, 2);
    m.relation_vecs = EmbeddingTable(1, 2);
    m.entity_vecs.row(0)[0] = 1.0;  // h = (1, 0)
    m.relation_vecs.row(0)[1] = 1.0;  // r = (0, 1)
    // t = (0, 0): ||h + r - t|| = sqrt(2)
    CHECK(score(m, 0, 0, 1) == doctest::Approx(std::sqrt(2.0)));
    // t = h + r scores zero
    m.entity_vecs.row(2)[0] = 1.0;
    m.entity_vecs.row(2)[1] = 1.0;
    CHECK(score(m, 0, 0, 2) == doctest::Approx(0.0));
}

TEST_CASE("transH projects onto the hyperplane") {
    KgeModel m;
    m.kind = KgeKind::transH;
    m.dim = 2;
    m.entity_vecs = EmbeddingTable(3, 2);
    m.relation_vecs = EmbeddingTable(1, 2);
    m.relation_normals = EmbeddingTable(1, 2);
    m.relation_normals.row(0)[0] = 1.0;  // w = e1
    m.entity_vecs.row(0)[0] = 3.0;
    m.entity_vecs.row(0)[1] = 4.0;  // h = (3, 4) projects to (0, 4)
    m.entity_vecs.row(1)[1] = 4.0;  // t = (0, 4)
    CHECK(score(m, 0, 0, 1) == doctest::Approx(0.0));

    SUBCASE("projection is idempotent") {
        // entity 2 = the projection of entity 0; distance must vanish
        m.entity_vecs.row(2)[0] = 0.0;
        m.entity_vecs.row(2)[1] = 4.0;
        CHECK(score(m, 0, 0, 2) <= 1e-12);
    }

    SUBCASE("projection lands orthogonal to w") {
        // against the zero entity: ||proj(h) + w||^2 = ||proj(h)||^2 + ||w||^2
        // exactly when proj(h) . w = 0
        const double plain = score(m, 0, 0, 2);  // r = 0, t = 0: ||proj(h)||
        m.relation_vecs.row(0)[0] = 1.0;         // r = w
        const double shifted = score(m, 0, 0, 2);
        CHECK(std::fabs(shifted * shifted - (plain * plain + 1.0)) <= 1e-12);
    }
}

TEST_CASE("transD with zero projection vectors reduces to transE") {
    const int dim = 6;
    KgeModel d = make_kge_model(KgeKind::transD, 5, 2, dim, 77);
    for (double& x : d.entity_proj.data) x = 0.0;
    for (double& x : d.relation_proj.data) x = 0.0;

    KgeModel e;
    e.kind = KgeKind::transE;
    e.dim = dim;
    e.entity_vecs = d.entity_vecs;
    e.relation_vecs = d.relation_vecs;

    for (int h = 0; h < 5; ++h)
        for (int r = 0; r < 2; ++r)
            for (int t = 0; t < 5; ++t)
                CHECK(std::fabs(score(d, h, r, t) - score(e, h, r, t)) <= 1e-12);
}

TEST_CASE("model init respects norm conventions") {
    for (KgeKind kind : {KgeKind::transE, KgeKind::transH, KgeKind::transD}) {
        const KgeModel m = make_kge_model(kind, 20, 4, 10, 5);
        for (int e = 0; e < 20; ++e)
            CHECK(norm(m.entity_vecs.row(e), m.dim) <= 1.0 + 1e-9);
        for (int r = 0; r < 4; ++r)
            CHECK(norm(m.relation_vecs.row(r), m.dim) == doctest::Approx(1.0));
        if (kind == KgeKind::transH) {
            REQUIRE(m.relation_normals.count == 4);
            for (int r = 0; r < 4; ++r)
                CHECK(norm(m.relation_normals.row(r), m.dim) == doctest::Approx(1.0));
        }
        if (kind == KgeKind::transD) {
            CHECK(m.entity_proj.count == 20);
            CHECK(m.relation_proj.count == 4);
            // nonzero so training can move them
            CHECK(squared_norm(m.entity_proj.row(0), m.dim) > 0.0);
        }
    }
}

TEST_CASE("score gradients match finite differences") {
    auto run = [](KgeKind kind) {
        KgeModel m = make_kge_model(kind, 6, 3, 7, 2025);
        const int h = 1, r = 2, t = 4;
        const ScoreGrads g = score_gradients(m, h, r, t);

        const double step = 1e-5;
        auto fd = [&](double& slot) {
            const double saved = slot;
            slot = saved + step;
            const double up = score(m, h, r, t);
            slot = saved - step;
            const double dn = score(m, h, r, t);
            slot = saved;
            return (up - dn) / (2.0 * step);
        };
        auto rel = [](double a, double n) {
            return std::fabs(a - n) / std::max({std::fabs(a), std::fabs(n), 1e-8});
        };
        for (int i = 0; i < m.dim; ++i) {
            CHECK(rel(g.d_head[i], fd(m.entity_vecs.row(h)[i])) < 1e-4);
            CHECK(rel(g.d_tail[i], fd(m.entity_vecs.row(t)[i])) < 1e-4);
            CHECK(rel(g.d_rel[i], fd(m.relation_vecs.row(r)[i])) < 1e-4);
            if (kind == KgeKind::transH)
                CHECK(rel(g.d_normal[i], fd(m.relation_normals.row(r)[i])) < 1e-4);
            if (kind == KgeKind::transD) {
                CHECK(rel(g.d_head_proj[i], fd(m.entity_proj.row(h)[i])) < 1e-4);
                CHECK(rel(g.d_tail_proj[i], fd(m.entity_proj.row(t)[i])) < 1e-4);
                CHECK(rel(g.d_rel_proj[i], fd(m.relation_proj.row(r)[i])) < 1e-4);
            }
        }
    };
    run(KgeKind::transE);
    run(KgeKind::transH);
    run(KgeKind::transD);
}

TEST_CASE("triple corruption") {
    KnowledgeGraph kg;
    for (int i = 0; i < 50; ++i) kg.entity_vocab.intern("e" + std::to_string(i));
    kg.relation_vocab.intern("r");
    kg.triples = {{0, 0, 1}, {1, 0, 2}, {2, 0, 3}};
    kg.entity_degree.assign(50, 0);

    const TripleSet known(kg.triples);
    const Triple target{0, 0, 1};
    auto rng = make_rng(321);

    int head_changed = 0;
    const int trials = 10000;
    for (int i = 0; i < trials; ++i) {
        const CorruptedTriple c = corrupt_triple(known, 50, target, rng);
        CHECK_FALSE(c.retries_exhausted);
        CHECK_FALSE(known.contains(c.triple));
        const bool h_diff = c.triple.head != target.head;
        const bool t_diff = c.triple.tail != target.tail;
        CHECK(h_diff != t_diff);  // exactly one slot replaced
        CHECK(c.triple.relation == target.relation);
        head_changed += h_diff;
    }
    // fair coin, 3 sigma
    const double sigma = std::sqrt(trials * 0.25);
    CHECK(std::fabs(head_changed - trials / 2.0) < 3.0 * sigma);

    SUBCASE("exhaustion is flagged, not fatal") {
        KnowledgeGraph lonely;
        lonely.entity_vocab.intern("only");
        lonely.relation_vocab.intern("r");
        lonely.triples = {{0, 0, 0}};
        lonely.entity_degree = {2};
        auto rng2 = make_rng(5);
        const CorruptedTriple c = corrupt_triple(lonely, lonely.triples[0], rng2);
        CHECK(c.retries_exhausted);
    }
}

TEST_CASE("zero learning rate leaves the model at its initialization") {
    const KnowledgeGraph kg = chain_kg();
    for (KgeKind kind : {KgeKind::transE, KgeKind::transH, KgeKind::transD}) {
        KgeTrainConfig cfg;
        cfg.dim = 4;
        cfg.margin = 8.0;  // hinge active on every pair
        cfg.learning_rate = 0.0;
        cfg.epochs = 3;
        cfg.batch_size = 2;
        cfg.seed = 61;
        const KgeTrainResult out = train_kge(kg, kind, cfg);
        const KgeModel init = make_kge_model(kind, kg.entity_vocab.size(),
                                             kg.relation_vocab.size(), cfg.dim,
                                             derive_seed(cfg.seed, 0x1417ull));
        // post-step constraints may renormalize already-normalized rows
        CHECK(max_abs_diff(out.model.entity_vecs, init.entity_vecs) <= 1e-14);
        CHECK(max_abs_diff(out.model.relation_vecs, init.relation_vecs) <= 1e-14);
        if (kind == KgeKind::transH)
            CHECK(max_abs_diff(out.model.relation_normals, init.relation_normals) <= 1e-14);
        if (kind == KgeKind::transD) {
            CHECK(max_abs_diff(out.model.entity_proj, init.entity_proj) <= 1e-14);
            CHECK(max_abs_diff(out.model.relation_proj, init.relation_proj) <= 1e-14);
        }
    }
}

TEST_CASE("training orders true triples above corrupted ones") {
    const KnowledgeGraph kg = chain_kg();
    int wins = 0;
    for (uint64_t seed = 0; seed < 20; ++seed) {
        KgeTrainConfig cfg;
        cfg.dim = 8;
        cfg.learning_rate = 0.1;
        cfg.epochs = 150;
        cfg.batch_size = 2;
        cfg.seed = seed;
        const KgeTrainResult out = train_kge(kg, KgeKind::transE, cfg);

        double true_sum = 0.0;
        for (const Triple& tr : kg.triples)
            true_sum += score(out.model, tr.head, tr.relation, tr.tail);
        double false_sum = 0.0;
        int false_count = 0;
        const TripleSet known(kg.triples);
        for (int h = 0; h < 3; ++h) {
            for (int t = 0; t < 3; ++t) {
                if (h == t || known.contains({h, 0, t})) continue;
                false_sum += score(out.model, h, 0, t);
                ++false_count;
            }
        }
        wins += true_sum / 2.0 < false_sum / false_count;
    }
    CHECK(wins >= 18);
}

TEST_CASE("constraints hold after every training step") {
    const KnowledgeGraph kg = chain_kg();
    KgeTrainConfig cfg;
    cfg.dim = 5;
    cfg.learning_rate = 0.5;  // aggressive on purpose
    cfg.epochs = 20;
    cfg.batch_size = 1;
    cfg.seed = 13;
    long steps = 0;
    const auto observer = [&](const KgeModel& m, int, long) {
        ++steps;
        for (int e = 0; e < m.entity_count(); ++e)
            CHECK(norm(m.entity_vecs.row(e), m.dim) <= 1.0 + 1e-9);
        if (m.kind == KgeKind::transH)
            for (int r = 0; r < m.relation_count(); ++r)
                CHECK(std::fabs(norm(m.relation_normals.row(r), m.dim) - 1.0) <= 1e-9);
    };
    train_kge(kg, KgeKind::transH, cfg, observer);
    CHECK(steps == 20 * 2);
}

TEST_CASE("filtered ranking") {
    // entities A, B, C at fixed positions; r translates A exactly onto B
    KgeModel m;
    m.kind = KgeKind::transE;
    m.dim = 2;
    m.entity_vecs = EmbeddingTable(3, 2);
    m.relation_vecs = EmbeddingTable(1, 2);
    m.entity_vecs.row(0)[0] = 0.0;    // A = (0, 0)
    m.entity_vecs.row(1)[0] = 0.8;    // B = (0.8, 0)
    m.entity_vecs.row(2)[0] = 0.9;
    m.entity_vecs.row(2)[1] = 0.1;    // C = (0.9, 0.1), near B
    m.relation_vecs.row(0)[0] = 0.8;  // r = (0.8, 0)

    KnowledgeGraph kg;
    kg.entity_vocab.intern("A");
    kg.entity_vocab.intern("B");
    kg.entity_vocab.intern("C");
    kg.relation_vocab.intern("r");
    kg.entity_degree = {1, 1, 0};

    SUBCASE("perfect fit ranks first") {
        const std::vector<Triple> test = {{0, 0, 1}};
        const auto ranks = filtered_ranks(m, kg, test);
        REQUIRE(ranks.size() == 1);
        CHECK(ranks[0].rank_head == 1);
        CHECK(ranks[0].rank_tail == 1);
        CHECK(mean_rank(ranks) == doctest::Approx(1.0));
        CHECK(hits_at(ranks, 1) == doctest::Approx(1.0));
    }

    SUBCASE("known triples are filtered out of the ranking") {
        // (A, r, B) is a better tail fit than (A, r, C); once it is a known
        // train triple it must not count against the test triple
        kg.triples = {{0, 0, 1}};
        const std::vector<Triple> test = {{0, 0, 2}};
        const auto unfiltered_rank = [&] {
            KnowledgeGraph empty = kg;
            empty.triples.clear();
            return filtered_ranks(m, empty, test)[0].rank_tail;
        }();
        CHECK(unfiltered_rank == 2);
        const auto ranks = filtered_ranks(m, kg, test);
        CHECK(ranks[0].rank_tail == 1);
    }

    SUBCASE("parallel matches serial") {
        kg.triples = {{0, 0, 1}};
        const std::vector<Triple> test = {{0, 0, 2}, {1, 0, 2}};
        const auto par = filtered_ranks(m, kg, test);
        const auto ser = filtered_ranks_serial(m, kg, test);
        REQUIRE(par.size() == ser.size());
        for (size_t i = 0; i < par.size(); ++i) {
            CHECK(par[i].rank_head == ser[i].rank_head);
            CHECK(par[i].rank_tail == ser[i].rank_tail);
        }
    }
}

TEST_CASE("random model ranks near the middle") {
    const int n_entities = 60;
    KnowledgeGraph kg;
    for (int i = 0; i < n_entities; ++i) kg.entity_vocab.intern("e" + std::to_string(i));
    kg.relation_vocab.intern("r");
    kg.entity_degree.assign(n_entities, 0);

    const KgeModel m = make_kge_model(KgeKind::transE, n_entities, 1, 8, 404);
    std::vector<Triple> test;
    auto rng = make_rng(7);
    std::uniform_int_distribution<int> pick(0, n_entities - 1);
    for (int i = 0; i < 200; ++i) {
        const int h = pick(rng);
        int t = pick(rng);
        while (t == h) t = pick(rng);
        test.push_back({h, 0, t});
    }
    const auto ranks = filtered_ranks(m, kg, test);
    for (const RankPair& rp : ranks) {
        CHECK(rp.rank_head >= 1);
        CHECK(rp.rank_tail >= 1);
        CHECK(rp.rank_head <= n_entities);
        CHECK(rp.rank_tail <= n_entities);
    }
    const double mr = mean_rank(ranks);
    // untrained scores are arbitrary: expect roughly the middle of 1..60
    CHECK(mr > 0.5 * (n_entities + 1) / 2.0);
    CHECK(mr < 1.5 * (n_entities + 1) / 2.0);
}

TEST_CASE("rank statistics") {
    const std::vector<RankPair> ranks = {{1, 3}, {2, 10}};
    CHECK(mean_rank(ranks) == doctest::Approx((1 + 3 + 2 + 10) / 4.0));
    CHECK(hits_at(ranks, 3) == doctest::Approx(3.0 / 4.0));
    CHECK(hits_at(ranks, 1) == doctest::Approx(1.0 / 4.0));
}

TEST_CASE("kge checkpoints round trip") {
    testutil::TempDir dir("kge");
    for (KgeKind kind : {KgeKind::transE, KgeKind::transH, KgeKind::transD}) {
        const KgeModel m = make_kge_model(kind, 7, 3, 5, 88);
        for (bool binary : {false, true}) {
            const std::string path =
                dir.file(std::string(kge_kind_name(kind)) + (binary ? ".bin" : ".txt"));
            save_kge_model(m, path, binary);
            const KgeModel back = load_kge_model(path);
            CHECK(back.kind == kind);
            CHECK(back.dim == 5);
            CHECK(back.entity_vecs.data == m.entity_vecs.data);
            CHECK(back.relation_vecs.data == m.relation_vecs.data);
            CHECK(back.relation_normals.data == m.relation_normals.data);
            CHECK(back.entity_proj.data == m.entity_proj.data);
            CHECK(back.relation_proj.data == m.relation_proj.data);
        }
    }
    CHECK_THROWS(load_kge_model(dir.file("missing.model")));
}

TEST_CASE("divergent training raises") {
    const KnowledgeGraph kg = chain_kg();
    KgeTrainConfig cfg;
    cfg.dim = 4;
    cfg.learning_rate = 1e300;
    cfg.epochs = 4;
    cfg.batch_size = 2;
    cfg.seed = 3;
    CHECK_THROWS_AS(train_kge(kg, KgeKind::transE, cfg), DivergenceError);
}

TEST_CASE("kind names round trip") {
    for (KgeKind k : {KgeKind::transE, KgeKind::transH, KgeKind::transD})
        CHECK(kge_kind_from_name(kge_kind_name(k)) == k);
    CHECK_THROWS(kge_kind_from_name("rotatE"));
}
