#pragma once

#include <cstddef>
#include <cstdint>
#include <stdexcept>
#include <string>
#include <vector>

namespace kgfair {

using Vec = std::vector<double>;

// Thrown when a training loop produces non-finite losses or blows up.
struct DivergenceError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

// Dense row-major matrix.
struct Matrix {
    int rows = 0;
    int cols = 0;
    std::vector<double> data;

    Matrix() = default;
    Matrix(int r, int c) : rows(r), cols(c), data(static_cast<size_t>(r) * c, 0.0) {}

    double* row(int i) { return data.data() + static_cast<size_t>(i) * cols; }
    const double* row(int i) const { return data.data() + static_cast<size_t>(i) * cols; }
    double& at(int i, int j) { return data[static_cast<size_t>(i) * cols + j]; }
    double at(int i, int j) const { return data[static_cast<size_t>(i) * cols + j]; }
};

// One real vector per node/entity, stored contiguously.
struct EmbeddingTable {
    int count = 0;
    int dim = 0;
    std::vector<double> data;

    EmbeddingTable() = default;
    EmbeddingTable(int n, int d) : count(n), dim(d), data(static_cast<size_t>(n) * d, 0.0) {}

    double* row(int i) { return data.data() + static_cast<size_t>(i) * dim; }
    const double* row(int i) const { return data.data() + static_cast<size_t>(i) * dim; }
};

double dot(const double* a, const double* b, int n);
void axpy(double alpha, const double* x, double* y, int n);  // y += alpha * x
double squared_norm(const double* x, int n);
double norm(const double* x, int n);
void scale(double alpha, double* x, int n);

// Text format: first line "n d", then one "id v1 ... vd" line per row.
void save_embeddings(const EmbeddingTable& table, const std::string& path);
EmbeddingTable load_embeddings(const std::string& path);

// 17 significant digits; round-trips IEEE doubles exactly.
std::string format_g17(double v);

uint64_t fnv1a64(const void* data, size_t len);
uint64_t fnv1a64(const std::string& s);
uint64_t file_checksum(const std::string& path);

std::string read_text_file(const std::string& path);

}  // namespace kgfair
