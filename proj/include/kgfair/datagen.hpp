#pragma once

#include <cstdint>
#include <string>

#include "kgfair/graph.hpp"

namespace kgfair {

// Preferential-attachment network: a seed clique of attachment_m + 1 nodes,
// then every new node attaches to attachment_m distinct existing nodes chosen
// proportionally to degree. Edge count is exactly
// C(m+1, 2) + m * (n - m - 1).
struct SyntheticNetSpec {
    int n_nodes = 1000;
    int attachment_m = 2;
    uint64_t seed = 0;
};
void validate(const SyntheticNetSpec& spec);

Network gen_network(const SyntheticNetSpec& spec);

// Synthetic person KG with planted, controllable gender signals.
//
// Every person gets one hasGender triple, one hasOccupation triple, and a
// heavy-tailed number of extra triples. Each extra relation owns three tail
// pools (male, female, shared); with probability structural_leak the tail is
// drawn from the person's own-gender pool, otherwise from the shared pool.
// Occupations are split into two halves; with probability
// occupation_gender_correlation a person draws from their gender's half.
struct SyntheticKgSpec {
    int n_persons = 2000;
    int n_occupations = 10;
    double gender_balance = 0.5;  // P(female)
    double structural_leak = 0.8;
    double occupation_gender_correlation = 0.0;
    int extra_relations = 3;
    uint64_t seed = 0;
};
void validate(const SyntheticKgSpec& spec);

struct SyntheticKg {
    KnowledgeGraph kg;
    AttributeLabels gender;      // classes {male, female}
    AttributeLabels occupation;  // one class per occupation
};

SyntheticKg gen_kg(const SyntheticKgSpec& spec);

// Ground-truth leakage reference: classifies each labeled person by counting
// gendered-pool tails among their extra triples (majority class on ties) and
// returns the accuracy. Ignores hasGender triples entirely, so it measures
// exactly the signal that survives relation removal. Only meaningful on KGs
// produced by gen_kg (it reads the generated pool-entity names).
double oracle_gender_accuracy(const KnowledgeGraph& kg, const AttributeLabels& gender);

}  // namespace kgfair
