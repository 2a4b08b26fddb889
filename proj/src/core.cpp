#include "kgfair/core.hpp"

#include <cmath>
#include <cstdio>
#include <fstream>
#include <sstream>

namespace kgfair {

double dot(const double* a, const double* b, int n) {
    double s = 0.0;
    for (int i = 0; i < n; ++i) s += a[i] * b[i];
    return s;
}

void axpy(double alpha, const double* x, double* y, int n) {
    for (int i = 0; i < n; ++i) y[i] += alpha * x[i];
}

double squared_norm(const double* x, int n) {
    return dot(x, x, n);
}

double norm(const double* x, int n) {
    return std::sqrt(squared_norm(x, n));
}

void scale(double alpha, double* x, int n) {
    for (int i = 0; i < n; ++i) x[i] *= alpha;
}

std::string format_g17(double v) {
    char buf[40];
    std::snprintf(buf, sizeof(buf), "%.17g", v);
    return buf;
}

void save_embeddings(const EmbeddingTable& table, const std::string& path) {
    std::ofstream out(path);
    if (!out) throw std::runtime_error("cannot open for writing: " + path);
    out << table.count << " " << table.dim << "\n";
    for (int i = 0; i < table.count; ++i) {
        out << i;
        const double* r = table.row(i);
        for (int j = 0; j < table.dim; ++j) out << " " << format_g17(r[j]);
        out << "\n";
    }
    if (!out) throw std::runtime_error("write failed: " + path);
}

EmbeddingTable load_embeddings(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw std::runtime_error("cannot open: " + path);
    int n = 0, d = 0;
    if (!(in >> n >> d) || n <= 0 || d <= 0)
        throw std::runtime_error("bad embedding header in " + path);
    EmbeddingTable table(n, d);
    for (int i = 0; i < n; ++i) {
        int id = -1;
        if (!(in >> id) || id < 0 || id >= n)
            throw std::runtime_error("bad row id in " + path);
        double* r = table.row(id);
        for (int j = 0; j < d; ++j) {
            if (!(in >> r[j])) throw std::runtime_error("truncated embedding row in " + path);
        }
    }
    return table;
}

uint64_t fnv1a64(const void* data, size_t len) {
    const auto* p = static_cast<const unsigned char*>(data);
    uint64_t h = 0xcbf29ce484222325ull;
    for (size_t i = 0; i < len; ++i) {
        h ^= p[i];
        h *= 0x100000001b3ull;
    }
    return h;
}

uint64_t fnv1a64(const std::string& s) {
    return fnv1a64(s.data(), s.size());
}

uint64_t file_checksum(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw std::runtime_error("cannot open: " + path);
    std::ostringstream ss;
    ss << in.rdbuf();
    const std::string s = ss.str();
    return fnv1a64(s.data(), s.size());
}

std::string read_text_file(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw std::runtime_error("cannot open: " + path);
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

}  // namespace kgfair
