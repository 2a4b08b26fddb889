#pragma once

#include <vector>

namespace kgfair {

double mean(const std::vector<double>& xs);

// Sample standard deviation (n-1 denominator); 0 for fewer than two values.
double sample_std(const std::vector<double>& xs);

// 95% normal-approximation confidence interval for the mean.
struct Ci95 {
    double lo = 0.0;
    double hi = 0.0;
};
Ci95 normal_ci95(const std::vector<double>& xs);

// Spearman rank correlation with average ranks for ties. Returns 0 when
// either side is constant or fewer than two points are given.
double spearman(const std::vector<double>& xs, const std::vector<double>& ys);

}  // namespace kgfair
