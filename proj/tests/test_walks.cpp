#include <cmath>
#include <map>
#include <vector>

#include "doctest.h"
#include "kgfair/walks.hpp"
#include "util.hpp"

using namespace kgfair;

namespace {

// triangle 0-1-2 plus pendant 3 hanging off 2
Network triangle_pendant() {
    return make_network(4, {{0, 1}, {0, 2}, {1, 2}, {2, 3}});
}

}  // namespace

TEST_CASE("walk config validation") {
    WalkConfig bad;
    bad.walk_length = 1;
    CHECK_THROWS_AS(validate(bad), std::invalid_argument);
    bad.walk_length = 10;
    bad.p = 0.0;
    CHECK_THROWS_AS(validate(bad), std::invalid_argument);
    bad.p = 1.0;
    bad.q = -2.0;
    CHECK_THROWS_AS(validate(bad), std::invalid_argument);
    bad.q = 1.0;
    bad.walks_per_node = 0;
    CHECK_THROWS_AS(validate(bad), std::invalid_argument);
}

TEST_CASE("node2vec transition weights") {
    const Network net = triangle_pendant();
    const double p = 3.0, q = 0.25;
    // previous node 0, current node 2: 0 is the return, 1 shares an edge with
    // 0, 3 does not
    CHECK(node2vec_weight(net, 0, 0, p, q) == doctest::Approx(1.0 / p));
    CHECK(node2vec_weight(net, 0, 1, p, q) == doctest::Approx(1.0));
    CHECK(node2vec_weight(net, 0, 3, p, q) == doctest::Approx(1.0 / q));
}

TEST_CASE("corpus layout") {
    const Network net = make_network(5, {{0, 1}, {0, 2}, {1, 2}, {2, 3}});  // 4 isolated
    WalkConfig cfg;
    cfg.walks_per_node = 3;
    cfg.walk_length = 8;
    cfg.seed = 17;
    const Corpus corpus = generate_walks(net, cfg);
    REQUIRE(corpus.size() == 15);
    for (int v = 0; v < 5; ++v) {
        for (int w = 0; w < 3; ++w) {
            const auto& walk = corpus[static_cast<size_t>(v * 3 + w)];
            REQUIRE(!walk.empty());
            CHECK(walk[0] == v);
            CHECK(walk.size() <= 8);
            // consecutive nodes are connected
            for (size_t i = 1; i < walk.size(); ++i)
                CHECK(net.has_edge(walk[i - 1], walk[i]));
        }
    }
    // isolated node cannot move
    CHECK(corpus[4 * 3].size() == 1);
    CHECK(corpus[4 * 3 + 1] == std::vector<int>{4});
}

TEST_CASE("first step is uniform over neighbors") {
    const Network net = triangle_pendant();
    WalkConfig cfg;
    cfg.walks_per_node = 9000;
    cfg.walk_length = 2;
    cfg.seed = 23;
    const Corpus corpus = generate_walks(net, cfg);
    std::map<int, int> counts;
    for (int w = 0; w < cfg.walks_per_node; ++w)
        ++counts[corpus[static_cast<size_t>(2 * cfg.walks_per_node + w)][1]];
    // node 2 has neighbors {0, 1, 3}; binomial 3-sigma around 3000
    const double sigma = std::sqrt(9000.0 * (1.0 / 3.0) * (2.0 / 3.0));
    for (int nb : {0, 1, 3}) {
        CHECK(std::fabs(counts[nb] - 3000.0) < 3.0 * sigma);
    }
}

TEST_CASE("biased transitions match enumerated weights") {
    const Network net = triangle_pendant();
    WalkConfig cfg;
    cfg.walks_per_node = 300;
    cfg.walk_length = 60;
    cfg.p = 2.0;
    cfg.q = 0.5;
    cfg.seed = 31;
    const Corpus corpus = generate_walks(net, cfg);

    // conditional next-step distribution for (prev=0, cur=2)
    std::map<int, long> counts;
    long total = 0;
    for (const auto& walk : corpus) {
        for (size_t i = 2; i < walk.size(); ++i) {
            if (walk[i - 2] == 0 && walk[i - 1] == 2) {
                ++counts[walk[i]];
                ++total;
            }
        }
    }
    REQUIRE(total > 1000);
    // weights: back to 0 = 1/p, common neighbor 1 = 1, pendant 3 = 1/q
    const double wsum = 1.0 / cfg.p + 1.0 + 1.0 / cfg.q;
    const std::map<int, double> expect = {
        {0, (1.0 / cfg.p) / wsum}, {1, 1.0 / wsum}, {3, (1.0 / cfg.q) / wsum}};
    for (const auto& [node, prob] : expect) {
        const double sigma = std::sqrt(static_cast<double>(total) * prob * (1.0 - prob));
        CHECK(std::fabs(static_cast<double>(counts[node]) -
                        static_cast<double>(total) * prob) < 3.0 * sigma);
    }
}

TEST_CASE("parallel and serial walks agree exactly") {
    const Network net = triangle_pendant();
    WalkConfig cfg;
    cfg.walks_per_node = 40;
    cfg.walk_length = 20;
    cfg.p = 0.5;
    cfg.q = 2.0;
    cfg.seed = 37;
    CHECK(generate_walks(net, cfg) == generate_walks_serial(net, cfg));
}

TEST_CASE("walks are deterministic in the seed") {
    const Network net = triangle_pendant();
    WalkConfig cfg;
    cfg.walks_per_node = 10;
    cfg.walk_length = 12;
    cfg.seed = 41;
    const Corpus a = generate_walks(net, cfg);
    const Corpus b = generate_walks(net, cfg);
    CHECK(a == b);
    cfg.seed = 42;
    CHECK(a != generate_walks(net, cfg));
}

TEST_CASE("corpus io") {
    testutil::TempDir dir("corpus");
    const Corpus corpus = {{0, 1, 2}, {3}, {2, 2, 1, 0}};
    const std::string path = dir.file("c.txt");
    save_corpus(corpus, path);
    CHECK(load_corpus(path) == corpus);

    testutil::spit(dir.file("blank.txt"), "0 1\n\n2 3\n");
    CHECK(load_corpus(dir.file("blank.txt")).size() == 2);

    testutil::spit(dir.file("bad.txt"), "0 1\n2 -7\n");
    CHECK_THROWS_WITH_AS(load_corpus(dir.file("bad.txt")), doctest::Contains(":2"),
                         std::runtime_error);
}
