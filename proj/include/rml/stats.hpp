#pragma once

#include <cstddef>
#include <vector>

namespace rml::stats {

struct EquivalenceResult {
    double mean_diff = 0.0;
    double p_lower = 1.0;  // H0: mean(d) <= -epsilon_L
    double p_upper = 1.0;  // H0: mean(d) >= +epsilon_L
    double p_tost = 1.0;
    bool equivalent = false;
    std::size_t n = 0;
    double epsilon_L = 0.05;
};

// Regularized incomplete beta function I_x(a, b).
double incomplete_beta(double a, double b, double x);

// Student-t CDF with nu degrees of freedom.
double student_t_cdf(double t, double nu);

// Paired two-one-sided-tests equivalence test on aligned score vectors.
EquivalenceResult paired_tost(const std::vector<double>& x, const std::vector<double>& y,
                              double epsilon_L = 0.05, double alpha = 0.05);

// min(1, p * m) for a declared family size m.
std::vector<double> bonferroni(const std::vector<double>& p_values, std::size_t m);

}  // namespace rml::stats
