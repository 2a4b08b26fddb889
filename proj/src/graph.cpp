#include "kgfair/graph.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <random>
#include <sstream>
#include <stdexcept>
#include <unordered_set>

#include "kgfair/rng.hpp"

namespace kgfair {

namespace {

bool is_comment_or_blank(const std::string& line) {
    for (char c : line) {
        if (c == '#') return true;
        if (!std::isspace(static_cast<unsigned char>(c))) return false;
    }
    return true;
}

[[noreturn]] void parse_fail(const std::string& path, int line_no, const std::string& what) {
    throw std::runtime_error(path + ":" + std::to_string(line_no) + ": " + what);
}

bool parse_node_id(const std::string& tok, int& out) {
    if (tok.empty()) return false;
    long long v = 0;
    for (char c : tok) {
        if (c < '0' || c > '9') return false;
        v = v * 10 + (c - '0');
        if (v > 2'000'000'000) return false;
    }
    out = static_cast<int>(v);
    return true;
}

// Packs a triple into a set key; entity/relation counts must stay below 2^21.
uint64_t triple_key(const Triple& t) {
    if (t.head >= (1 << 21) || t.relation >= (1 << 21) || t.tail >= (1 << 21))
        throw std::invalid_argument("graph too large for triple keys (>= 2^21 ids)");
    return (static_cast<uint64_t>(t.head) << 42) |
           (static_cast<uint64_t>(t.relation) << 21) |
           static_cast<uint64_t>(t.tail);
}

void recompute_degrees(KnowledgeGraph& kg) {
    kg.entity_degree.assign(static_cast<size_t>(kg.entity_vocab.size()), 0);
    for (const Triple& t : kg.triples) {
        ++kg.entity_degree[static_cast<size_t>(t.head)];
        ++kg.entity_degree[static_cast<size_t>(t.tail)];
    }
}

}  // namespace

bool Network::has_edge(int u, int v) const {
    if (u < 0 || u >= node_count || v < 0 || v >= node_count) return false;
    const auto& adj = adjacency[static_cast<size_t>(u)];
    return std::binary_search(adj.begin(), adj.end(), v);
}

Network make_network(int node_count, std::vector<std::pair<int, int>> edges) {
    for (auto& [u, v] : edges) {
        if (u < 0 || v < 0 || u >= node_count || v >= node_count)
            throw std::invalid_argument("edge endpoint out of range");
        if (u > v) std::swap(u, v);
    }
    edges.erase(std::remove_if(edges.begin(), edges.end(),
                               [](const auto& e) { return e.first == e.second; }),
                edges.end());
    std::sort(edges.begin(), edges.end());
    edges.erase(std::unique(edges.begin(), edges.end()), edges.end());

    Network net;
    net.node_count = node_count;
    net.edges = std::move(edges);
    net.adjacency.assign(static_cast<size_t>(node_count), {});
    for (const auto& [u, v] : net.edges) {
        net.adjacency[static_cast<size_t>(u)].push_back(v);
        net.adjacency[static_cast<size_t>(v)].push_back(u);
    }
    for (auto& adj : net.adjacency) std::sort(adj.begin(), adj.end());
    return net;
}

Network load_edge_list(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw std::runtime_error("cannot open: " + path);

    std::vector<std::pair<int, int>> edges;
    int max_id = -1;
    std::string line;
    int line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        if (is_comment_or_blank(line)) continue;
        std::istringstream ss(line);
        std::string a, b, extra;
        if (!(ss >> a >> b) || (ss >> extra))
            parse_fail(path, line_no, "expected `u<TAB>v`");
        int u = 0, v = 0;
        if (!parse_node_id(a, u) || !parse_node_id(b, v))
            parse_fail(path, line_no, "node ids must be non-negative integers");
        max_id = std::max({max_id, u, v});
        if (u != v) edges.emplace_back(u, v);
    }
    if (max_id < 0) throw std::runtime_error(path + ": empty graph");
    return make_network(max_id + 1, std::move(edges));
}

void save_edge_list(const Network& net, const std::string& path) {
    std::ofstream out(path);
    if (!out) throw std::runtime_error("cannot open for writing: " + path);
    for (const auto& [u, v] : net.edges) out << u << "\t" << v << "\n";
    if (!out) throw std::runtime_error("write failed: " + path);
}

int Vocab::intern(const std::string& name) {
    auto it = ids.find(name);
    if (it != ids.end()) return it->second;
    const int id = static_cast<int>(names.size());
    names.push_back(name);
    ids.emplace(name, id);
    return id;
}

std::optional<int> Vocab::find(const std::string& name) const {
    auto it = ids.find(name);
    if (it == ids.end()) return std::nullopt;
    return it->second;
}

KnowledgeGraph load_triples(const std::string& path, const RelationFilter& filters) {
    std::ifstream in(path);
    if (!in) throw std::runtime_error("cannot open: " + path);

    struct RawTriple {
        std::string head, relation, tail;
    };
    std::vector<RawTriple> raw;
    std::unordered_map<std::string, int> relation_count;

    std::string line;
    int line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        if (is_comment_or_blank(line)) continue;
        RawTriple t;
        if (line.find('\t') != std::string::npos) {
            std::istringstream ss(line);
            std::string extra;
            if (!std::getline(ss, t.head, '\t') || !std::getline(ss, t.relation, '\t') ||
                !std::getline(ss, t.tail, '\t') || std::getline(ss, extra, '\t'))
                parse_fail(path, line_no, "expected `head<TAB>relation<TAB>tail`");
        } else {
            std::istringstream ss(line);
            std::string extra;
            if (!(ss >> t.head >> t.relation >> t.tail) || (ss >> extra))
                parse_fail(path, line_no, "expected `head<TAB>relation<TAB>tail`");
        }
        if (t.head.empty() || t.relation.empty() || t.tail.empty())
            parse_fail(path, line_no, "empty field");
        ++relation_count[t.relation];
        raw.push_back(std::move(t));
    }

    KnowledgeGraph kg;
    std::unordered_set<uint64_t> seen;
    for (const RawTriple& t : raw) {
        if (filters.blacklist.count(t.relation)) continue;
        if (relation_count[t.relation] < filters.min_relation_count) continue;
        Triple triple;
        triple.head = kg.entity_vocab.intern(t.head);
        triple.relation = kg.relation_vocab.intern(t.relation);
        triple.tail = kg.entity_vocab.intern(t.tail);
        if (seen.insert(triple_key(triple)).second) kg.triples.push_back(triple);
    }
    if (kg.triples.empty()) throw std::runtime_error(path + ": graph empty after filtering");
    recompute_degrees(kg);
    return kg;
}

void save_triples(const KnowledgeGraph& kg, const std::string& path) {
    std::ofstream out(path);
    if (!out) throw std::runtime_error("cannot open for writing: " + path);
    for (const Triple& t : kg.triples) {
        out << kg.entity_vocab.name(t.head) << "\t" << kg.relation_vocab.name(t.relation)
            << "\t" << kg.entity_vocab.name(t.tail) << "\n";
    }
    if (!out) throw std::runtime_error("write failed: " + path);
}

AttributeLabels load_labels(const std::string& path, const KnowledgeGraph& kg,
                            const std::string& attribute_name,
                            std::vector<std::string>* warnings) {
    std::ifstream in(path);
    if (!in) throw std::runtime_error("cannot open: " + path);

    AttributeLabels labels;
    labels.attribute_name = attribute_name;
    Vocab classes;

    std::string line;
    int line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        if (is_comment_or_blank(line)) continue;
        std::string entity, cls;
        if (line.find('\t') != std::string::npos) {
            std::istringstream ss(line);
            std::string extra;
            if (!std::getline(ss, entity, '\t') || !std::getline(ss, cls, '\t') ||
                std::getline(ss, extra, '\t'))
                parse_fail(path, line_no, "expected `entity<TAB>class_name`");
        } else {
            std::istringstream ss(line);
            std::string extra;
            if (!(ss >> entity >> cls) || (ss >> extra))
                parse_fail(path, line_no, "expected `entity<TAB>class_name`");
        }
        auto id = kg.entity_vocab.find(entity);
        if (!id) {
            if (warnings)
                warnings->push_back("label line " + std::to_string(line_no) +
                                    " names unknown entity `" + entity + "`; skipped");
            continue;
        }
        labels.labels[*id] = classes.intern(cls);
    }
    labels.class_names = classes.names;
    return labels;
}

void save_labels(const AttributeLabels& labels, const KnowledgeGraph& kg,
                 const std::string& path) {
    std::ofstream out(path);
    if (!out) throw std::runtime_error("cannot open for writing: " + path);
    std::vector<std::pair<int, int>> rows(labels.labels.begin(), labels.labels.end());
    std::sort(rows.begin(), rows.end());
    for (const auto& [entity, cls] : rows) {
        out << kg.entity_vocab.name(entity) << "\t"
            << labels.class_names.at(static_cast<size_t>(cls)) << "\n";
    }
    if (!out) throw std::runtime_error("write failed: " + path);
}

void validate(const SplitSpec& spec) {
    if (!(spec.test_fraction > 0.0 && spec.test_fraction < 1.0))
        throw std::invalid_argument("test_fraction must be strictly between 0 and 1");
}

EdgeSplit split_edges(const Network& net, const SplitSpec& spec) {
    validate(spec);
    const size_t n_edges = net.edges.size();
    const auto n_test = static_cast<size_t>(
        std::llround(spec.test_fraction * static_cast<double>(n_edges)));

    std::vector<size_t> order(n_edges);
    for (size_t i = 0; i < n_edges; ++i) order[i] = i;
    auto rng = make_rng(spec.seed);
    std::shuffle(order.begin(), order.end(), rng);

    EdgeSplit split;
    std::vector<std::pair<int, int>> train_edges;
    train_edges.reserve(n_edges - n_test);
    for (size_t i = 0; i < n_edges; ++i) {
        if (i < n_test)
            split.test_edges.push_back(net.edges[order[i]]);
        else
            train_edges.push_back(net.edges[order[i]]);
    }
    std::sort(split.test_edges.begin(), split.test_edges.end());
    split.train = make_network(net.node_count, std::move(train_edges));
    for (int v = 0; v < net.node_count; ++v) {
        if (!net.adjacency[static_cast<size_t>(v)].empty() &&
            split.train.adjacency[static_cast<size_t>(v)].empty())
            split.warnings.push_back("node " + std::to_string(v) +
                                     " has no training edges left");
    }
    return split;
}

TripleSplit split_triples(const KnowledgeGraph& kg, const SplitSpec& spec) {
    validate(spec);
    const size_t n = kg.triples.size();
    const auto n_test =
        static_cast<size_t>(std::llround(spec.test_fraction * static_cast<double>(n)));

    std::vector<size_t> order(n);
    for (size_t i = 0; i < n; ++i) order[i] = i;
    auto rng = make_rng(spec.seed);
    std::shuffle(order.begin(), order.end(), rng);
    std::vector<bool> is_test(n, false);
    for (size_t i = 0; i < n_test; ++i) is_test[order[i]] = true;

    TripleSplit split;
    split.train.entity_vocab = kg.entity_vocab;
    split.train.relation_vocab = kg.relation_vocab;
    for (size_t i = 0; i < n; ++i) {
        if (is_test[i])
            split.test.push_back(kg.triples[i]);
        else
            split.train.triples.push_back(kg.triples[i]);
    }
    recompute_degrees(split.train);
    for (int e = 0; e < kg.entity_vocab.size(); ++e) {
        if (kg.entity_degree[static_cast<size_t>(e)] > 0 &&
            split.train.entity_degree[static_cast<size_t>(e)] == 0)
            split.warnings.push_back("entity `" + kg.entity_vocab.name(e) +
                                     "` appears only in test triples");
    }
    return split;
}

int degree(const Network& net, int node) {
    if (node < 0 || node >= net.node_count) throw std::out_of_range("node id out of range");
    return static_cast<int>(net.adjacency[static_cast<size_t>(node)].size());
}

int degree(const KnowledgeGraph& kg, int entity) {
    if (entity < 0 || entity >= kg.entity_vocab.size())
        throw std::out_of_range("entity id out of range");
    return kg.entity_degree[static_cast<size_t>(entity)];
}

KnowledgeGraph remove_relation(const KnowledgeGraph& kg, int relation_id) {
    if (relation_id < 0 || relation_id >= kg.relation_vocab.size())
        throw std::out_of_range("unknown relation id");
    KnowledgeGraph out;
    out.entity_vocab = kg.entity_vocab;
    out.relation_vocab = kg.relation_vocab;
    for (const Triple& t : kg.triples)
        if (t.relation != relation_id) out.triples.push_back(t);
    recompute_degrees(out);
    return out;
}

}  // namespace kgfair
