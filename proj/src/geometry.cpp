#include "rml/geometry.hpp"

#include <cmath>
#include <limits>

#include "rml/errors.hpp"

namespace rml::geometry {

double dot(const Vector& a, const Vector& b) {
    if (a.size() != b.size()) {
        throw DataError("vector dimension mismatch: " + std::to_string(a.size()) + " vs " +
                        std::to_string(b.size()));
    }
    double acc = 0.0;  // sequential order is the canonical result
    for (std::size_t i = 0; i < a.size(); ++i) acc += a[i] * b[i];
    return acc;
}

double norm(const Vector& v) { return std::sqrt(dot(v, v)); }

double cosine(const Vector& a, const Vector& b) {
    const double na = norm(a);
    const double nb = norm(b);
    if (na == 0.0 || nb == 0.0) {
        throw DegenerateVectorError("cosine of a zero-norm vector");
    }
    return dot(a, b) / (na * nb);
}

std::pair<Vector, Vector> cosine_grad(const Vector& a, const Vector& b) {
    const double na = norm(a);
    const double nb = norm(b);
    if (na == 0.0 || nb == 0.0) {
        throw DegenerateVectorError("cosine_grad of a zero-norm vector");
    }
    const double phi = dot(a, b) / (na * nb);
    const double inv_ab = 1.0 / (na * nb);
    const double inv_a2 = 1.0 / (na * na);
    const double inv_b2 = 1.0 / (nb * nb);
    Vector da(a.size()), db(b.size());
    for (std::size_t i = 0; i < a.size(); ++i) {
        da[i] = b[i] * inv_ab - phi * a[i] * inv_a2;
        db[i] = a[i] * inv_ab - phi * b[i] * inv_b2;
    }
    return {std::move(da), std::move(db)};
}

SimMatrix pairwise_sim(const std::vector<Vector>& rows, const std::vector<Vector>& cols,
                       std::string row_role, std::string col_role) {
    SimMatrix m;
    m.rows = rows.size();
    m.cols = cols.size();
    m.row_role = std::move(row_role);
    m.col_role = std::move(col_role);
    m.entries.resize(m.rows * m.cols);
    for (std::size_t i = 0; i < m.rows; ++i) {
        for (std::size_t j = 0; j < m.cols; ++j) {
            m.at(i, j) = cosine(rows[i], cols[j]);
        }
    }
    return m;
}

SimStats sim_stats(const SimMatrix& m) {
    if (m.entries.empty()) throw DataError("sim_stats of an empty matrix");
    SimStats s;
    s.min = std::numeric_limits<double>::infinity();
    s.max = -std::numeric_limits<double>::infinity();
    double acc = 0.0;
    for (double v : m.entries) {
        acc += v;
        if (v < s.min) s.min = v;
        if (v > s.max) s.max = v;
    }
    s.mean = acc / static_cast<double>(m.entries.size());
    return s;
}

}  // namespace rml::geometry
