#include "kgfair/datagen.hpp"

#include <algorithm>
#include <cmath>
#include <set>
#include <stdexcept>
#include <vector>

#include "kgfair/rng.hpp"

namespace kgfair {

void validate(const SyntheticNetSpec& spec) {
    if (spec.attachment_m < 1)
        throw std::invalid_argument("attachment_m must be >= 1");
    if (spec.n_nodes <= spec.attachment_m)
        throw std::invalid_argument("n_nodes must exceed attachment_m");
}

Network gen_network(const SyntheticNetSpec& spec) {
    validate(spec);
    const int m = spec.attachment_m;
    auto rng = make_rng(derive_seed(spec.seed, 0xba5eull));

    std::vector<std::pair<int, int>> edges;
    std::vector<int> endpoints;  // each edge contributes both ends; sampling
                                 // uniformly from this list is degree-proportional
    for (int i = 0; i <= m; ++i) {
        for (int j = i + 1; j <= m; ++j) {
            edges.emplace_back(i, j);
            endpoints.push_back(i);
            endpoints.push_back(j);
        }
    }
    std::vector<int> targets;
    for (int v = m + 1; v < spec.n_nodes; ++v) {
        targets.clear();
        while (static_cast<int>(targets.size()) < m) {
            std::uniform_int_distribution<size_t> pick(0, endpoints.size() - 1);
            const int t = endpoints[pick(rng)];
            if (std::find(targets.begin(), targets.end(), t) == targets.end())
                targets.push_back(t);
        }
        for (int t : targets) {
            edges.emplace_back(v, t);
            endpoints.push_back(v);
            endpoints.push_back(t);
        }
    }
    return make_network(spec.n_nodes, std::move(edges));
}

void validate(const SyntheticKgSpec& spec) {
    if (spec.n_persons <= 0) throw std::invalid_argument("n_persons must be > 0");
    if (spec.n_occupations < 2) throw std::invalid_argument("n_occupations must be >= 2");
    if (spec.gender_balance <= 0.0 || spec.gender_balance >= 1.0)
        throw std::invalid_argument("gender_balance must be in (0,1)");
    if (spec.structural_leak < 0.0 || spec.structural_leak > 1.0)
        throw std::invalid_argument("structural_leak must be in [0,1]");
    if (spec.occupation_gender_correlation < 0.0 ||
        spec.occupation_gender_correlation > 1.0)
        throw std::invalid_argument("occupation_gender_correlation must be in [0,1]");
    if (spec.extra_relations < 1)
        throw std::invalid_argument("extra_relations must be >= 1");
}

namespace {

constexpr int kGenderedPoolSize = 8;
constexpr int kSharedPoolSize = 16;
constexpr int kMaxExtraTriples = 60;
constexpr double kParetoAlpha = 1.3;

std::string person_name(int i) { return "p" + std::to_string(i); }

std::string pool_name(int rel, char kind, int i) {
    return "aff" + std::to_string(rel) + "_" + kind + std::to_string(i);
}

}  // namespace

SyntheticKg gen_kg(const SyntheticKgSpec& spec) {
    validate(spec);
    auto rng = make_rng(derive_seed(spec.seed, 0x96ull));
    std::bernoulli_distribution is_female(spec.gender_balance);
    std::bernoulli_distribution leak(spec.structural_leak);
    std::bernoulli_distribution corr(spec.occupation_gender_correlation);
    std::uniform_real_distribution<double> unit(0.0, 1.0);
    std::uniform_int_distribution<int> any_occ(0, spec.n_occupations - 1);
    std::uniform_int_distribution<int> any_rel(0, spec.extra_relations - 1);
    std::uniform_int_distribution<int> gendered_slot(0, kGenderedPoolSize - 1);
    std::uniform_int_distribution<int> shared_slot(0, kSharedPoolSize - 1);

    SyntheticKg out;
    KnowledgeGraph& kg = out.kg;
    const int rel_gender = kg.relation_vocab.intern("hasGender");
    const int rel_occupation = kg.relation_vocab.intern("hasOccupation");
    std::vector<int> extra_rel_ids;
    for (int r = 0; r < spec.extra_relations; ++r)
        extra_rel_ids.push_back(kg.relation_vocab.intern("aff" + std::to_string(r)));

    const int ent_male = kg.entity_vocab.intern("male");
    const int ent_female = kg.entity_vocab.intern("female");
    std::vector<int> occ_ids;
    for (int o = 0; o < spec.n_occupations; ++o)
        occ_ids.push_back(kg.entity_vocab.intern("occ" + std::to_string(o)));
    // pool layout per relation: [male x8][female x8][shared x16]
    std::vector<std::vector<int>> male_pool(static_cast<size_t>(spec.extra_relations));
    std::vector<std::vector<int>> female_pool(static_cast<size_t>(spec.extra_relations));
    std::vector<std::vector<int>> shared_pool(static_cast<size_t>(spec.extra_relations));
    for (int r = 0; r < spec.extra_relations; ++r) {
        for (int i = 0; i < kGenderedPoolSize; ++i)
            male_pool[static_cast<size_t>(r)].push_back(
                kg.entity_vocab.intern(pool_name(r, 'm', i)));
        for (int i = 0; i < kGenderedPoolSize; ++i)
            female_pool[static_cast<size_t>(r)].push_back(
                kg.entity_vocab.intern(pool_name(r, 'f', i)));
        for (int i = 0; i < kSharedPoolSize; ++i)
            shared_pool[static_cast<size_t>(r)].push_back(
                kg.entity_vocab.intern(pool_name(r, 's', i)));
    }

    out.gender.attribute_name = "gender";
    out.gender.class_names = {"male", "female"};
    out.occupation.attribute_name = "occupation";
    for (int o = 0; o < spec.n_occupations; ++o)
        out.occupation.class_names.push_back("occ" + std::to_string(o));

    const int half = spec.n_occupations / 2;
    std::uniform_int_distribution<int> male_occ(0, half - 1);
    std::uniform_int_distribution<int> female_occ(half, spec.n_occupations - 1);

    for (int p = 0; p < spec.n_persons; ++p) {
        const int person = kg.entity_vocab.intern(person_name(p));
        const bool female = is_female(rng);
        out.gender.labels[person] = female ? 1 : 0;
        kg.triples.push_back({person, rel_gender, female ? ent_female : ent_male});

        int occ;
        if (corr(rng))
            occ = female ? female_occ(rng) : male_occ(rng);
        else
            occ = any_occ(rng);
        out.occupation.labels[person] = occ;
        kg.triples.push_back({person, rel_occupation, occ_ids[static_cast<size_t>(occ)]});

        // heavy-tailed extra-edge count: capped Pareto
        const double pareto = std::pow(1.0 - unit(rng), -1.0 / kParetoAlpha);
        const int n_extra =
            std::min(kMaxExtraTriples, static_cast<int>(std::floor(pareto)));
        std::set<std::pair<int, int>> used;  // (relation, tail), skip duplicates
        for (int k = 0; k < n_extra; ++k) {
            bool placed = false;
            for (int attempt = 0; attempt < 20 && !placed; ++attempt) {
                const int r = any_rel(rng);
                int tail;
                if (leak(rng)) {
                    const auto& pool = female ? female_pool[static_cast<size_t>(r)]
                                              : male_pool[static_cast<size_t>(r)];
                    tail = pool[static_cast<size_t>(gendered_slot(rng))];
                } else {
                    tail = shared_pool[static_cast<size_t>(r)][static_cast<size_t>(
                        shared_slot(rng))];
                }
                if (used.emplace(r, tail).second) {
                    kg.triples.push_back({person, extra_rel_ids[static_cast<size_t>(r)], tail});
                    placed = true;
                }
            }
        }
    }

    kg.entity_degree.assign(static_cast<size_t>(kg.entity_vocab.size()), 0);
    for (const Triple& t : kg.triples) {
        ++kg.entity_degree[static_cast<size_t>(t.head)];
        ++kg.entity_degree[static_cast<size_t>(t.tail)];
    }
    return out;
}

double oracle_gender_accuracy(const KnowledgeGraph& kg, const AttributeLabels& gender) {
    if (gender.labels.empty())
        throw std::invalid_argument("oracle_gender_accuracy: no labels");

    // tail classification by generated pool-entity name
    const int n_entities = kg.entity_vocab.size();
    std::vector<int> pool_kind(static_cast<size_t>(n_entities), -1);  // 0 male, 1 female
    for (int e = 0; e < n_entities; ++e) {
        const std::string& name = kg.entity_vocab.name(e);
        const size_t us = name.find('_');
        if (name.rfind("aff", 0) != 0 || us == std::string::npos || us + 1 >= name.size())
            continue;
        if (name[us + 1] == 'm') pool_kind[static_cast<size_t>(e)] = 0;
        if (name[us + 1] == 'f') pool_kind[static_cast<size_t>(e)] = 1;
    }

    std::vector<int> male_hits(static_cast<size_t>(n_entities), 0);
    std::vector<int> female_hits(static_cast<size_t>(n_entities), 0);
    for (const Triple& t : kg.triples) {
        const int kind = pool_kind[static_cast<size_t>(t.tail)];
        if (kind == 0) ++male_hits[static_cast<size_t>(t.head)];
        if (kind == 1) ++female_hits[static_cast<size_t>(t.head)];
    }

    long n_female = 0;
    for (const auto& [entity, cls] : gender.labels) {
        (void)entity;
        if (cls == 1) ++n_female;
    }
    const int majority =
        2 * n_female >= static_cast<long>(gender.labels.size()) ? 1 : 0;

    long correct = 0;
    for (const auto& [entity, cls] : gender.labels) {
        const int mh = male_hits[static_cast<size_t>(entity)];
        const int fh = female_hits[static_cast<size_t>(entity)];
        int pred = majority;
        if (mh > fh) pred = 0;
        if (fh > mh) pred = 1;
        if (pred == cls) ++correct;
    }
    return static_cast<double>(correct) / static_cast<double>(gender.labels.size());
}

}  // namespace kgfair
