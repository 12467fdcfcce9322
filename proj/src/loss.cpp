#include "rml/loss.hpp"

#include <cmath>
#include <limits>

#include "rml/errors.hpp"

namespace rml::loss {

using geometry::cosine;
using geometry::cosine_grad;
using geometry::norm;

Variant variant_from_string(const std::string& name) {
    if (name == "static") return Variant::Static;
    if (name == "adaptive") return Variant::Adaptive;
    if (name == "distributed") return Variant::Distributed;
    throw UsageError("unknown loss variant: " + name);
}

std::string to_string(Variant v) {
    switch (v) {
        case Variant::Static: return "static";
        case Variant::Adaptive: return "adaptive";
        case Variant::Distributed: return "distributed";
    }
    return "?";
}

LossSpec LossSpec::make(Variant v, std::optional<double> epsilon, std::optional<bool> in_batch) {
    if (epsilon && v != Variant::Static) {
        throw UsageError("epsilon is only valid for the static loss");
    }
    if (v == Variant::Distributed) {
        if (in_batch && !*in_batch) {
            throw UsageError("the distributed loss always uses in-batch targets");
        }
        return LossSpec{v, std::nullopt, true};
    }
    return LossSpec{v, v == Variant::Static ? epsilon : std::nullopt, in_batch.value_or(false)};
}

void TripletBatch::validate() const {
    const std::size_t b = queries.size();
    if (b == 0) throw DataError("empty triplet batch");
    if (positives.size() != b || negatives.size() != b) {
        throw DataError("triplet batch lists are not aligned");
    }
    const std::size_t d = queries.front().size();
    auto check = [&](const std::vector<Vector>& vs, const char* role) {
        for (const auto& v : vs) {
            if (v.size() != d) throw DataError(std::string("dimension mismatch in ") + role);
            if (norm(v) == 0.0) {
                throw DegenerateVectorError(std::string("zero-norm ") + role + " embedding");
            }
        }
    };
    check(queries, "query");
    check(positives, "positive");
    check(negatives, "negative");
}

double inner_static(double phi_qp, double phi_qn, double epsilon) {
    return (phi_qp - phi_qn) - epsilon;
}

double inner_adaptive(double phi_qp, double phi_qn, double phi_pn) {
    return (phi_qp - phi_qn) - (1.0 + phi_pn) / 2.0;
}

double inner_distributed(double phi_qp_i, double phi_qn_ii, double phi_pn_ij) {
    return (phi_qp_i - phi_qn_ii) - (1.0 + phi_pn_ij) / 2.0;
}

namespace {

struct BatchSims {
    std::vector<double> qp;     // phi(q_i, d+_i)
    std::vector<double> qn;     // phi(q_i, d-_j), row-major BxB (or diagonal only)
    std::vector<double> pn;     // phi(d+_i, d-_j), row-major BxB (or diagonal only)
    bool full_qn = false;
    bool full_pn = false;
    std::size_t b = 0;

    double qn_at(std::size_t i, std::size_t j) const { return full_qn ? qn[i * b + j] : qn[i]; }
    double pn_at(std::size_t i, std::size_t j) const { return full_pn ? pn[i * b + j] : pn[i]; }
};

BatchSims compute_sims(const LossSpec& spec, const TripletBatch& batch) {
    BatchSims s;
    s.b = batch.size();
    const bool naive = spec.uses_in_batch() && spec.variant != Variant::Distributed;
    s.full_qn = naive;  // distributed keeps the margin at the triplet's own negative
    s.full_pn = spec.uses_in_batch() && spec.variant != Variant::Static;

    s.qp.resize(s.b);
    for (std::size_t i = 0; i < s.b; ++i) s.qp[i] = cosine(batch.queries[i], batch.positives[i]);

    if (s.full_qn) {
        s.qn.resize(s.b * s.b);
        for (std::size_t i = 0; i < s.b; ++i)
            for (std::size_t j = 0; j < s.b; ++j)
                s.qn[i * s.b + j] = cosine(batch.queries[i], batch.negatives[j]);
    } else {
        s.qn.resize(s.b);
        for (std::size_t i = 0; i < s.b; ++i) s.qn[i] = cosine(batch.queries[i], batch.negatives[i]);
    }

    if (spec.variant != Variant::Static) {
        if (s.full_pn) {
            s.pn.resize(s.b * s.b);
            for (std::size_t i = 0; i < s.b; ++i)
                for (std::size_t j = 0; j < s.b; ++j)
                    s.pn[i * s.b + j] = cosine(batch.positives[i], batch.negatives[j]);
        } else {
            s.pn.resize(s.b);
            for (std::size_t i = 0; i < s.b; ++i)
                s.pn[i] = cosine(batch.positives[i], batch.negatives[i]);
        }
    }
    return s;
}

// (margin negative index, target) for cell (i, j); j == i for non-in-batch variants.
struct Cell {
    std::size_t neg_index;
    double target;
};

Cell cell_of(const LossSpec& spec, const BatchSims& s, std::size_t i, std::size_t j) {
    switch (spec.variant) {
        case Variant::Static:
            return {j, spec.static_epsilon()};
        case Variant::Adaptive:
            return {j, (1.0 + s.pn_at(i, j)) / 2.0};
        case Variant::Distributed:
            return {i, (1.0 + s.pn_at(i, j)) / 2.0};
    }
    return {j, 0.0};
}

}  // namespace

LossReport batch_loss(const LossSpec& spec, const TripletBatch& batch) {
    batch.validate();
    const BatchSims s = compute_sims(spec, batch);
    const std::size_t b = s.b;
    const bool ib = spec.uses_in_batch();

    LossReport report;
    report.target_stats.min = std::numeric_limits<double>::infinity();
    report.target_stats.max = -std::numeric_limits<double>::infinity();
    double sq_sum = 0.0;
    double target_sum = 0.0;

    for (std::size_t i = 0; i < b; ++i) {
        for (std::size_t j = ib ? 0 : i; j < (ib ? b : i + 1); ++j) {
            const Cell c = cell_of(spec, s, i, j);
            const double margin = s.qp[i] - s.qn_at(i, c.neg_index);
            const double l = margin - c.target;
            report.per_instance.push_back({i, j, margin, c.target, l * l});
            sq_sum += l * l;
            target_sum += c.target;
            report.target_stats.min = std::min(report.target_stats.min, c.target);
            report.target_stats.max = std::max(report.target_stats.max, c.target);
        }
    }
    const double count = static_cast<double>(report.per_instance.size());
    report.total = sq_sum / count;  // 1/B or 1/B^2 via the cell count
    report.target_stats.mean = target_sum / count;
    return report;
}

BatchGradients batch_loss_grad(const LossSpec& spec, const TripletBatch& batch) {
    batch.validate();
    const BatchSims s = compute_sims(spec, batch);
    const std::size_t b = s.b;
    const bool ib = spec.uses_in_batch();
    const double inv_count = ib ? 1.0 / static_cast<double>(b * b) : 1.0 / static_cast<double>(b);

    // Coefficients dL/dphi for each similarity pair actually used.
    std::vector<double> c_qp(b, 0.0);
    std::vector<double> c_qn(s.full_qn ? b * b : b, 0.0);
    std::vector<double> c_pn(s.full_pn ? b * b : b, 0.0);

    for (std::size_t i = 0; i < b; ++i) {
        for (std::size_t j = ib ? 0 : i; j < (ib ? b : i + 1); ++j) {
            const Cell c = cell_of(spec, s, i, j);
            const double l = (s.qp[i] - s.qn_at(i, c.neg_index)) - c.target;
            const double w = 2.0 * l * inv_count;
            c_qp[i] += w;
            c_qn[s.full_qn ? i * b + c.neg_index : i] -= w;
            if (spec.variant != Variant::Static) {
                c_pn[s.full_pn ? i * b + j : i] -= w / 2.0;
            }
        }
    }

    const std::size_t d = batch.dim();
    BatchGradients g;
    g.queries.assign(b, Vector(d, 0.0));
    g.positives.assign(b, Vector(d, 0.0));
    g.negatives.assign(b, Vector(d, 0.0));

    auto add_pair = [&](double coeff, const Vector& x, const Vector& y, Vector& gx, Vector& gy) {
        if (coeff == 0.0) return;
        auto [dx, dy] = cosine_grad(x, y);
        for (std::size_t k = 0; k < d; ++k) {
            gx[k] += coeff * dx[k];
            gy[k] += coeff * dy[k];
        }
    };

    for (std::size_t i = 0; i < b; ++i) {
        add_pair(c_qp[i], batch.queries[i], batch.positives[i], g.queries[i], g.positives[i]);
        if (s.full_qn) {
            for (std::size_t j = 0; j < b; ++j)
                add_pair(c_qn[i * b + j], batch.queries[i], batch.negatives[j], g.queries[i],
                         g.negatives[j]);
        } else {
            add_pair(c_qn[i], batch.queries[i], batch.negatives[i], g.queries[i], g.negatives[i]);
        }
        if (spec.variant != Variant::Static) {
            if (s.full_pn) {
                for (std::size_t j = 0; j < b; ++j)
                    add_pair(c_pn[i * b + j], batch.positives[i], batch.negatives[j],
                             g.positives[i], g.negatives[j]);
            } else {
                add_pair(c_pn[i], batch.positives[i], batch.negatives[i], g.positives[i],
                         g.negatives[i]);
            }
        }
    }
    return g;
}

}  // namespace rml::loss
