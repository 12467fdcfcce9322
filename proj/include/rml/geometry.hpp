#pragma once

#include <string>
#include <utility>
#include <vector>

namespace rml::geometry {

using Vector = std::vector<double>;

// Dense B x C matrix of cosine similarities with role labels for its axes.
struct SimMatrix {
    std::size_t rows = 0;
    std::size_t cols = 0;
    std::vector<double> entries;  // row-major
    std::string row_role;
    std::string col_role;

    double at(std::size_t i, std::size_t j) const { return entries[i * cols + j]; }
    double& at(std::size_t i, std::size_t j) { return entries[i * cols + j]; }
};

struct SimStats {
    double mean = 0.0;
    double min = 0.0;
    double max = 0.0;
};

double norm(const Vector& v);
double dot(const Vector& a, const Vector& b);

// cos(a, b) = a.b / (|a||b|). Zero-norm input throws DegenerateVectorError.
double cosine(const Vector& a, const Vector& b);

// Analytic partials of cosine(a, b) w.r.t. a and b:
//   d/da = b/(|a||b|) - cos * a/|a|^2   and symmetrically for b.
std::pair<Vector, Vector> cosine_grad(const Vector& a, const Vector& b);

SimMatrix pairwise_sim(const std::vector<Vector>& rows, const std::vector<Vector>& cols,
                       std::string row_role = "", std::string col_role = "");

SimStats sim_stats(const SimMatrix& m);

}  // namespace rml::geometry
