#include "rml/trainer.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <random>
#include <set>
#include <sstream>

#include "rml/errors.hpp"

namespace rml::trainer {

using loss::TripletBatch;

const Vector& EmbeddingTable::at(const std::string& id) const {
    auto it = entries.find(id);
    if (it == entries.end()) throw DataError("unknown id: " + id);
    return it->second;
}

EmbeddingTable init_table(const std::vector<std::string>& ids, std::size_t dim,
                          std::uint64_t seed, InitScheme scheme) {
    if (ids.empty()) throw DataError("init_table: empty id set");
    if (dim < 2) throw DataError("init_table: dimension must be at least 2");
    std::set<std::string> sorted(ids.begin(), ids.end());
    if (sorted.size() != ids.size()) throw DataError("init_table: duplicate ids");

    EmbeddingTable table;
    table.dim = dim;
    table.seed = seed;
    std::mt19937_64 rng(seed);
    std::normal_distribution<double> gauss(0.0, 1.0 / std::sqrt(static_cast<double>(dim)));
    // anisotropic: a shared bias direction inflates all pairwise cosines to
    // ~0.4, mimicking the similarity floor of pretrained text encoders
    const double bias = scheme == InitScheme::Anisotropic ? 0.8 : 0.0;
    for (const auto& id : sorted) {
        Vector v(dim);
        for (auto& x : v) x = gauss(rng);
        v[0] += bias;
        table.entries.emplace(id, std::move(v));
    }
    return table;
}

void TrainConfig::validate() const {
    if (batch_size < 1) throw UsageError("batch_size must be >= 1");
    if (lr_gamma <= 0.0 || lr_gamma > 1.0) throw UsageError("lr_gamma must be in (0, 1]");
    if (patience < 1) throw UsageError("patience must be >= 1");
    if (eval_every < 1) throw UsageError("eval_every must be >= 1");
}

void adam_step(Vector& params, const Vector& grads, AdamSlot& state, double lr,
               double weight_decay, const TrainConfig& cfg) {
    if (params.size() != grads.size()) throw DataError("adam_step: shape mismatch");
    if (state.m.empty()) {
        state.m.assign(params.size(), 0.0);
        state.v.assign(params.size(), 0.0);
    }
    if (state.m.size() != params.size()) throw DataError("adam_step: stale optimizer state");
    ++state.t;
    const double bc1 = 1.0 - std::pow(cfg.adam_beta1, static_cast<double>(state.t));
    const double bc2 = 1.0 - std::pow(cfg.adam_beta2, static_cast<double>(state.t));
    for (std::size_t k = 0; k < params.size(); ++k) {
        state.m[k] = cfg.adam_beta1 * state.m[k] + (1.0 - cfg.adam_beta1) * grads[k];
        state.v[k] = cfg.adam_beta2 * state.v[k] + (1.0 - cfg.adam_beta2) * grads[k] * grads[k];
        const double m_hat = state.m[k] / bc1;
        const double v_hat = state.v[k] / bc2;
        params[k] -= lr * m_hat / (std::sqrt(v_hat) + cfg.adam_eps);
        // decoupled weight decay, applied after the moment update
        params[k] -= lr * weight_decay * params[k];
    }
}

double lr_at(std::uint64_t step, double base_lr, double gamma) {
    return base_lr * std::pow(gamma, static_cast<double>(step));
}

bool early_stop(const std::vector<double>& history, std::size_t patience) {
    double best = -std::numeric_limits<double>::infinity();
    std::size_t stale = 0;
    for (double score : history) {
        if (score > best) {
            best = score;
            stale = 0;
        } else {
            ++stale;
        }
    }
    return stale >= patience;
}

std::vector<double> rolling_mean(const std::vector<double>& series, std::size_t window) {
    if (window < 1) throw UsageError("rolling_mean: window must be >= 1");
    std::vector<double> out(series.size());
    double acc = 0.0;
    for (std::size_t k = 0; k < series.size(); ++k) {
        acc += series[k];
        if (k >= window) acc -= series[k - window];
        out[k] = acc / static_cast<double>(std::min(k + 1, window));
    }
    return out;
}

TrainResult train(const TrainConfig& config, const LossSpec& spec,
                  const std::vector<TripletRef>& dataset, EmbeddingTable table,
                  const EvalHook& eval_hook) {
    config.validate();
    if (dataset.empty()) throw DataError("train: empty dataset");
    for (const auto& t : dataset) {
        if (!table.contains(t.query_id) || !table.contains(t.pos_id) || !table.contains(t.neg_id))
            throw DataError("train: dataset id missing from embedding table");
    }

    TrainResult result;
    std::map<std::string, AdamSlot> adam_state;
    std::vector<double> eval_history;
    EmbeddingTable best_table = table;
    double best_score = -std::numeric_limits<double>::infinity();
    bool have_eval = false;

    const double base_lr = config.lr();
    std::uint64_t step = 0;
    bool stop = false;

    for (std::size_t epoch = 0; epoch < config.max_epochs && !stop; ++epoch) {
        for (std::size_t begin = 0; begin < dataset.size() && !stop; begin += config.batch_size) {
            const std::size_t end = std::min(begin + config.batch_size, dataset.size());

            TripletBatch batch;
            for (std::size_t k = begin; k < end; ++k) {
                const auto& t = dataset[k];
                batch.query_ids.push_back(t.query_id);
                batch.pos_ids.push_back(t.pos_id);
                batch.neg_ids.push_back(t.neg_id);
                batch.queries.push_back(table.at(t.query_id));
                batch.positives.push_back(table.at(t.pos_id));
                batch.negatives.push_back(table.at(t.neg_id));
            }

            const auto report = loss::batch_loss(spec, batch);
            const auto grads = loss::batch_loss_grad(spec, batch);
            const auto raw = geometry::sim_stats(
                geometry::pairwise_sim(batch.positives, batch.negatives, "positive", "negative"));
            const double lr = lr_at(step, base_lr, config.lr_gamma);

            TelemetryRecord rec;
            rec.step = step + 1;
            rec.loss = report.total;
            rec.lr = lr;
            rec.target_mean = raw.mean;
            rec.target_min = raw.min;
            rec.target_max = raw.max;

            if (!std::isfinite(report.total)) {
                result.telemetry.push_back(rec);
                throw DivergenceError("non-finite loss at step " + std::to_string(rec.step));
            }

            // Sum gradients per id; an id can appear in several triplet slots.
            std::map<std::string, Vector> grad_by_id;
            auto accumulate = [&](const std::string& id, const Vector& g) {
                auto [it, fresh] = grad_by_id.try_emplace(id, g);
                if (!fresh)
                    for (std::size_t k = 0; k < g.size(); ++k) it->second[k] += g[k];
            };
            for (std::size_t k = 0; k < batch.size(); ++k) {
                accumulate(batch.query_ids[k], grads.queries[k]);
                accumulate(batch.pos_ids[k], grads.positives[k]);
                accumulate(batch.neg_ids[k], grads.negatives[k]);
            }
            for (auto& [id, g] : grad_by_id) {
                adam_step(table.entries.at(id), g, adam_state[id], lr, config.weight_decay,
                          config);
            }
            ++step;

            if (eval_hook && step % config.eval_every == 0) {
                const double score = eval_hook(table);
                rec.eval_metric = score;
                eval_history.push_back(score);
                have_eval = true;
                if (score > best_score) {
                    best_score = score;
                    best_table = table;
                }
                if (early_stop(eval_history, config.patience)) {
                    result.stopped_early = true;
                    stop = true;
                }
            }
            result.telemetry.push_back(rec);
        }
    }

    result.steps = step;
    result.table = have_eval ? std::move(best_table) : std::move(table);
    return result;
}

namespace {

std::string fmt_double(double v) {
    char buf[40];
    std::snprintf(buf, sizeof buf, "%.17g", v);
    return buf;
}

}  // namespace

void write_telemetry(const std::vector<TelemetryRecord>& records, const std::string& path) {
    std::ofstream out(path);
    if (!out) throw DataError("cannot write telemetry file: " + path);
    out << "step,loss,lr,target_mean,target_min,target_max,eval_metric\n";
    for (const auto& r : records) {
        out << r.step << ',' << fmt_double(r.loss) << ',' << fmt_double(r.lr) << ','
            << fmt_double(r.target_mean) << ',' << fmt_double(r.target_min) << ','
            << fmt_double(r.target_max) << ',';
        if (r.eval_metric) out << fmt_double(*r.eval_metric);
        out << '\n';
    }
}

void write_checkpoint(const EmbeddingTable& table, const std::string& path) {
    std::ofstream out(path);
    if (!out) throw DataError("cannot write checkpoint file: " + path);
    out << "#dim=" << table.dim << " seed=" << table.seed << '\n';
    for (const auto& [id, vec] : table.entries) {
        out << id;
        for (double v : vec) out << '\t' << fmt_double(v);
        out << '\n';
    }
}

EmbeddingTable read_checkpoint(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw DataError("cannot read checkpoint file: " + path);
    std::string header;
    if (!std::getline(in, header)) throw DataError("empty checkpoint file: " + path);
    EmbeddingTable table;
    if (std::sscanf(header.c_str(), "#dim=%zu seed=%llu", &table.dim,
                    reinterpret_cast<unsigned long long*>(&table.seed)) != 2) {
        throw DataError("malformed checkpoint header: " + header);
    }
    std::string line;
    std::size_t lineno = 1;
    while (std::getline(in, line)) {
        ++lineno;
        if (line.empty()) continue;
        std::istringstream row(line);
        std::string id;
        if (!std::getline(row, id, '\t')) {
            throw DataError("malformed checkpoint row at line " + std::to_string(lineno));
        }
        Vector vec;
        std::string field;
        while (std::getline(row, field, '\t')) vec.push_back(std::stod(field));
        if (vec.size() != table.dim) {
            throw DataError("checkpoint row dimension mismatch at line " + std::to_string(lineno));
        }
        if (!table.entries.emplace(id, std::move(vec)).second) {
            throw DataError("duplicate checkpoint id at line " + std::to_string(lineno));
        }
    }
    return table;
}

}  // namespace rml::trainer
