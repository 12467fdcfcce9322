#pragma once

#include <optional>
#include <string>
#include <vector>

#include "rml/geometry.hpp"

namespace rml::loss {

using geometry::SimStats;
using geometry::Vector;

enum class Variant { Static, Adaptive, Distributed };

Variant variant_from_string(const std::string& name);
std::string to_string(Variant v);

// Which inner term to use and whether the naive in-batch expansion applies.
// Distributed always uses in-batch information; epsilon only exists for Static.
struct LossSpec {
    Variant variant = Variant::Static;
    std::optional<double> epsilon;  // Static only, defaults to 1.0
    bool in_batch = false;

    static LossSpec make(Variant v, std::optional<double> epsilon, std::optional<bool> in_batch);

    double static_epsilon() const { return epsilon.value_or(1.0); }
    bool uses_in_batch() const { return variant == Variant::Distributed || in_batch; }
};

// B aligned (query, positive, negative) embedding triples.
struct TripletBatch {
    std::vector<std::string> query_ids, pos_ids, neg_ids;
    std::vector<Vector> queries, positives, negatives;

    std::size_t size() const { return queries.size(); }
    std::size_t dim() const { return queries.empty() ? 0 : queries.front().size(); }
    void validate() const;  // throws DataError / DegenerateVectorError
};

struct InstanceLoss {
    std::size_t i = 0;
    std::size_t j = 0;
    double margin = 0.0;    // phi(q, d+) - phi(q, d-)
    double target = 0.0;    // epsilon or (1 + phi(d+, d-)) / 2
    double squared = 0.0;   // (margin - target)^2
};

struct LossReport {
    double total = 0.0;
    std::vector<InstanceLoss> per_instance;
    SimStats target_stats;  // over the scaled targets actually used
};

struct BatchGradients {
    std::vector<Vector> queries, positives, negatives;
};

// Inner terms of the three variants.
double inner_static(double phi_qp, double phi_qn, double epsilon);
double inner_adaptive(double phi_qp, double phi_qn, double phi_pn);
double inner_distributed(double phi_qp_i, double phi_qn_ii, double phi_pn_ij);

LossReport batch_loss(const LossSpec& spec, const TripletBatch& batch);
BatchGradients batch_loss_grad(const LossSpec& spec, const TripletBatch& batch);

}  // namespace rml::loss
