#pragma once

#include <cstdint>
#include <optional>
#include <set>
#include <string>
#include <unordered_map>
#include <utility>
#include <vector>

namespace kgfair {

// Simple undirected network: no self-loops, no duplicate edges, all
// endpoints < node_count. Edges are stored normalized (u < v) and sorted.
struct Network {
    int node_count = 0;
    std::vector<std::pair<int, int>> edges;
    std::vector<std::vector<int>> adjacency;  // sorted neighbor lists

    bool has_edge(int u, int v) const;
};

// Normalizes, deduplicates and drops self-loops; builds adjacency.
Network make_network(int node_count, std::vector<std::pair<int, int>> edges);

// One `u<TAB>v` pair per line, `#` comments. node_count = max id + 1.
Network load_edge_list(const std::string& path);
void save_edge_list(const Network& net, const std::string& path);

struct Triple {
    int head = 0;
    int relation = 0;
    int tail = 0;

    friend bool operator==(const Triple& a, const Triple& b) {
        return a.head == b.head && a.relation == b.relation && a.tail == b.tail;
    }
};

// Bidirectional string<->id map; ids assigned in first-appearance order.
struct Vocab {
    std::vector<std::string> names;
    std::unordered_map<std::string, int> ids;

    int intern(const std::string& name);
    std::optional<int> find(const std::string& name) const;
    int size() const { return static_cast<int>(names.size()); }
    const std::string& name(int id) const { return names.at(static_cast<size_t>(id)); }
};

struct KnowledgeGraph {
    Vocab entity_vocab;
    Vocab relation_vocab;
    std::vector<Triple> triples;
    std::vector<int> entity_degree;  // incident triples, head or tail slot
};

// Ingestion rules applied while loading a triple file: relations appearing
// fewer than min_relation_count times in the raw file are dropped, as are
// blacklisted relations.
struct RelationFilter {
    int min_relation_count = 0;
    std::set<std::string> blacklist;
};

// One `head<TAB>relation<TAB>tail` per line, `#` comments. Duplicate triples
// are stored once; vocabularies cover the surviving triples only.
KnowledgeGraph load_triples(const std::string& path, const RelationFilter& filters = {});
void save_triples(const KnowledgeGraph& kg, const std::string& path);

struct AttributeLabels {
    std::string attribute_name;
    std::unordered_map<int, int> labels;  // entity_id -> class_id
    std::vector<std::string> class_names;

    int class_count() const { return static_cast<int>(class_names.size()); }
};

// One `entity<TAB>class_name` per line. Lines naming entities absent from the
// graph are skipped and reported in *warnings.
AttributeLabels load_labels(const std::string& path, const KnowledgeGraph& kg,
                            const std::string& attribute_name,
                            std::vector<std::string>* warnings = nullptr);
void save_labels(const AttributeLabels& labels, const KnowledgeGraph& kg,
                 const std::string& path);

struct SplitSpec {
    double test_fraction = 0.1;
    uint64_t seed = 0;
};
void validate(const SplitSpec& spec);

struct EdgeSplit {
    Network train;
    std::vector<std::pair<int, int>> test_edges;
    std::vector<std::string> warnings;  // nodes that lost all their edges
};
EdgeSplit split_edges(const Network& net, const SplitSpec& spec);

struct TripleSplit {
    KnowledgeGraph train;
    std::vector<Triple> test;
    std::vector<std::string> warnings;
};
TripleSplit split_triples(const KnowledgeGraph& kg, const SplitSpec& spec);

int degree(const Network& net, int node);
int degree(const KnowledgeGraph& kg, int entity);

// Drops every triple of the given relation; vocabularies (and ids) stay put.
KnowledgeGraph remove_relation(const KnowledgeGraph& kg, int relation_id);

}  // namespace kgfair
