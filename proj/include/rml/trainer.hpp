#pragma once

#include <cstdint>
#include <functional>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "rml/loss.hpp"

namespace rml::trainer {

using geometry::Vector;
using loss::LossSpec;

// Trainable parameters: one free vector per query/document id.
struct EmbeddingTable {
    std::size_t dim = 0;
    std::uint64_t seed = 0;
    std::map<std::string, Vector> entries;

    const Vector& at(const std::string& id) const;
    bool contains(const std::string& id) const { return entries.count(id) != 0; }
};

enum class InitScheme { Gaussian, Anisotropic };

EmbeddingTable init_table(const std::vector<std::string>& ids, std::size_t dim,
                          std::uint64_t seed, InitScheme scheme = InitScheme::Gaussian);

struct TrainConfig {
    std::size_t batch_size = 64;
    std::optional<double> base_lr;  // default 5e-6 / batch_size
    double weight_decay = 1e-6;
    double lr_gamma = 0.99999;
    double adam_beta1 = 0.9;
    double adam_beta2 = 0.999;
    double adam_eps = 1e-8;
    std::size_t eval_every = 500;
    std::size_t patience = 16;
    std::size_t max_epochs = 1;
    std::uint64_t seed = 0;

    double lr() const { return base_lr.value_or(5e-6 / static_cast<double>(batch_size)); }
    void validate() const;
};

// Per-parameter ADAM moments; step count is per slot so sparse updates stay
// correctly bias-corrected.
struct AdamSlot {
    Vector m, v;
    std::uint64_t t = 0;
};

void adam_step(Vector& params, const Vector& grads, AdamSlot& state, double lr,
               double weight_decay, const TrainConfig& cfg);

double lr_at(std::uint64_t step, double base_lr, double gamma);

// True iff the trailing `patience` scores each failed to improve on the best
// score seen before them.
bool early_stop(const std::vector<double>& history, std::size_t patience);

std::vector<double> rolling_mean(const std::vector<double>& series, std::size_t window = 32);

struct TelemetryRecord {
    std::uint64_t step = 0;
    double loss = 0.0;
    double lr = 0.0;
    double target_mean = 0.0;  // raw cosine stats of the D+ x D- matrix
    double target_min = 0.0;
    double target_max = 0.0;
    std::optional<double> eval_metric;
};

struct TripletRef {
    std::string query_id, pos_id, neg_id;
};

using EvalHook = std::function<double(const EmbeddingTable&)>;

struct TrainResult {
    EmbeddingTable table;  // best checkpoint when an eval hook ran, else final
    std::vector<TelemetryRecord> telemetry;
    std::uint64_t steps = 0;
    bool stopped_early = false;
};

TrainResult train(const TrainConfig& config, const LossSpec& spec,
                  const std::vector<TripletRef>& dataset, EmbeddingTable table,
                  const EvalHook& eval_hook = nullptr);

// CSV: step,loss,lr,target_mean,target_min,target_max,eval_metric
void write_telemetry(const std::vector<TelemetryRecord>& records, const std::string& path);

// TSV checkpoint with a one-line "#dim=D seed=S" header.
void write_checkpoint(const EmbeddingTable& table, const std::string& path);
EmbeddingTable read_checkpoint(const std::string& path);

}  // namespace rml::trainer
