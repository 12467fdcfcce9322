#include "rml/data.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <iostream>
#include <random>
#include <set>
#include <sstream>

#include "rml/errors.hpp"

namespace rml::data {

using geometry::cosine;

namespace {

bool valid_id(const std::string& id) {
    if (id.empty()) return false;
    for (char c : id)
        if (std::isspace(static_cast<unsigned char>(c))) return false;
    return true;
}

std::string fmt_double(double v) {
    char buf[40];
    std::snprintf(buf, sizeof buf, "%.17g", v);
    return buf;
}

}  // namespace

int QrelsTable::grade(const std::string& qid, const std::string& docid) const {
    auto it = judgments.find({qid, docid});
    return it == judgments.end() ? 0 : it->second;
}

std::vector<std::string> QrelsTable::query_ids() const {
    std::vector<std::string> out;
    for (const auto& [key, grade] : judgments) {
        if (out.empty() || out.back() != key.first) out.push_back(key.first);
    }
    return out;
}

std::vector<std::string> RunFile::query_ids() const {
    std::vector<std::string> out;
    for (const auto& r : rows) {
        if (std::find(out.begin(), out.end(), r.query_id) == out.end()) out.push_back(r.query_id);
    }
    return out;
}

std::vector<RunRow> RunFile::rows_for(const std::string& qid) const {
    std::vector<RunRow> out;
    for (const auto& r : rows)
        if (r.query_id == qid) out.push_back(r);
    return out;
}

TripletDataset load_triplets(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw DataError("cannot open triplet file: " + path);
    TripletDataset ds;
    std::string line;
    std::size_t lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        if (line.empty()) continue;
        std::istringstream row(line);
        std::string qid, pos, neg, extra;
        if (!std::getline(row, qid, '\t') || !std::getline(row, pos, '\t') ||
            !std::getline(row, neg, '\t') || std::getline(row, extra, '\t')) {
            throw DataError("malformed triplet row at line " + std::to_string(lineno));
        }
        if (!valid_id(qid) || !valid_id(pos) || !valid_id(neg)) {
            throw DataError("invalid id in triplet row at line " + std::to_string(lineno));
        }
        if (pos == neg) {
            throw DataError("positive equals negative at line " + std::to_string(lineno));
        }
        ds.triples.push_back({qid, pos, neg});
    }
    return ds;
}

QrelsTable parse_qrels(const std::string& path, int max_grade) {
    std::ifstream in(path);
    if (!in) throw DataError("cannot open qrels file: " + path);
    QrelsTable qrels;
    qrels.max_grade = max_grade;
    std::string line;
    std::size_t lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        if (line.empty()) continue;
        std::istringstream row(line);
        std::string qid, iter, docid;
        int grade;
        if (!(row >> qid >> iter >> docid >> grade)) {
            throw DataError("malformed qrels row at line " + std::to_string(lineno));
        }
        if (grade < 0 || grade > max_grade) {
            throw DataError("qrels grade out of range at line " + std::to_string(lineno));
        }
        if (!qrels.judgments.emplace(std::make_pair(qid, docid), grade).second) {
            throw DataError("duplicate qrels judgment at line " + std::to_string(lineno));
        }
    }
    return qrels;
}

QrelsTable restrict_qrels(const QrelsTable& qrels, const std::vector<std::string>& query_ids) {
    const std::set<std::string> keep(query_ids.begin(), query_ids.end());
    QrelsTable out;
    out.max_grade = qrels.max_grade;
    for (const auto& [key, grade] : qrels.judgments) {
        if (keep.count(key.first)) out.judgments.emplace(key, grade);
    }
    return out;
}

void write_qrels(const QrelsTable& qrels, const std::string& path) {
    std::ofstream out(path);
    if (!out) throw DataError("cannot write qrels file: " + path);
    for (const auto& [key, grade] : qrels.judgments) {
        out << key.first << " 0 " << key.second << ' ' << grade << '\n';
    }
}

RunFile canonicalize(RunFile run) {
    std::stable_sort(run.rows.begin(), run.rows.end(), [](const RunRow& a, const RunRow& b) {
        if (a.query_id != b.query_id) return a.query_id < b.query_id;
        if (a.score != b.score) return a.score > b.score;
        return a.doc_id < b.doc_id;
    });
    std::size_t rank = 0;
    std::string current;
    for (auto& r : run.rows) {
        if (r.query_id != current) {
            current = r.query_id;
            rank = 0;
        }
        r.rank = ++rank;
    }
    return run;
}

RunFile parse_run(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw DataError("cannot open run file: " + path);
    RunFile run;
    std::string line;
    std::size_t lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        if (line.empty()) continue;
        std::istringstream row(line);
        RunRow r;
        std::string q0;
        if (!(row >> r.query_id >> q0 >> r.doc_id >> r.rank >> r.score >> r.tag)) {
            throw DataError("malformed run row at line " + std::to_string(lineno));
        }
        run.rows.push_back(std::move(r));
    }
    // validate per-query ordering; violations are repaired canonically
    bool violation = false;
    std::map<std::string, std::size_t> last_rank;
    std::map<std::string, double> last_score;
    std::map<std::pair<std::string, std::string>, bool> seen;
    for (const auto& r : run.rows) {
        if (!seen.emplace(std::make_pair(r.query_id, r.doc_id), true).second) {
            throw DataError("duplicate document " + r.doc_id + " for query " + r.query_id);
        }
        auto it = last_rank.find(r.query_id);
        if (it == last_rank.end()) {
            if (r.rank != 1) violation = true;
        } else {
            if (r.rank != it->second + 1) violation = true;
            if (r.score > last_score[r.query_id]) violation = true;
        }
        last_rank[r.query_id] = r.rank;
        last_score[r.query_id] = r.score;
    }
    if (violation) {
        std::cerr << "warning: non-canonical run file " << path << ", re-sorting by score\n";
        return canonicalize(std::move(run));
    }
    return run;
}

void write_run(const RunFile& run, const std::string& path) {
    std::ofstream out(path);
    if (!out) throw DataError("cannot write run file: " + path);
    for (const auto& r : run.rows) {
        out << r.query_id << " Q0 " << r.doc_id << ' ' << r.rank << ' ' << fmt_double(r.score)
            << ' ' << r.tag << '\n';
    }
}

void SyntheticSpec::validate() const {
    if (n_topics < 2) throw DataError("synthetic corpus needs at least 2 topics");
    if (docs_per_topic < 1 || queries_per_topic < 1) {
        throw DataError("docs_per_topic and queries_per_topic must be >= 1");
    }
    if (dim < 2) throw DataError("dimension must be >= 2");
    if (hardness < 0.0 || hardness > 1.0) throw DataError("hardness must be in [0, 1]");
    if (noise <= 0.0) throw DataError("noise must be positive");
}

SyntheticCorpus generate_synthetic(const SyntheticSpec& spec) {
    spec.validate();
    std::mt19937_64 rng(spec.seed);
    std::normal_distribution<double> gauss(0.0, 1.0);
    std::uniform_real_distribution<double> unit(0.0, 1.0);

    auto sample_sphere = [&]() {
        Vector v(spec.dim);
        double n;
        do {
            for (auto& x : v) x = gauss(rng);
            n = geometry::norm(v);
        } while (n == 0.0);
        for (auto& x : v) x /= n;
        return v;
    };
    auto noisy_copy = [&](const Vector& center, double* radius = nullptr) {
        Vector v(spec.dim);
        double r2 = 0.0;
        for (std::size_t k = 0; k < spec.dim; ++k) {
            const double eps = spec.noise * gauss(rng);
            v[k] = center[k] + eps;
            r2 += eps * eps;
        }
        if (radius) *radius = std::sqrt(r2);
        return v;
    };
    auto pad = [](std::size_t n) {
        char buf[24];
        std::snprintf(buf, sizeof buf, "%03zu", n);
        return std::string(buf);
    };

    SyntheticCorpus corpus;
    std::vector<Vector> centers(spec.n_topics);
    for (std::size_t t = 0; t < spec.n_topics; ++t) {
        centers[t] = sample_sphere();
        corpus.centers.emplace("topic" + pad(t), centers[t]);
    }

    std::vector<std::vector<std::string>> topic_docs(spec.n_topics);
    std::vector<std::vector<double>> topic_radii(spec.n_topics);
    for (std::size_t t = 0; t < spec.n_topics; ++t) {
        for (std::size_t k = 0; k < spec.docs_per_topic; ++k) {
            const std::string id = "d" + pad(t) + "_" + pad(k);
            double radius = 0.0;
            corpus.features.emplace(id, noisy_copy(centers[t], &radius));
            topic_docs[t].push_back(id);
            topic_radii[t].push_back(radius);
            corpus.doc_ids.push_back(id);
        }
    }

    std::vector<std::vector<std::string>> topic_queries(spec.n_topics);
    for (std::size_t t = 0; t < spec.n_topics; ++t) {
        for (std::size_t k = 0; k < spec.queries_per_topic; ++k) {
            const std::string id = "q" + pad(t) + "_" + pad(k);
            corpus.features.emplace(id, noisy_copy(centers[t]));
            topic_queries[t].push_back(id);
        }
    }

    // qrels: same-topic docs are relevant; graded mode tiers by noise radius
    for (std::size_t t = 0; t < spec.n_topics; ++t) {
        std::vector<std::size_t> order(spec.docs_per_topic);
        for (std::size_t k = 0; k < order.size(); ++k) order[k] = k;
        std::sort(order.begin(), order.end(),
                  [&](std::size_t a, std::size_t b) { return topic_radii[t][a] < topic_radii[t][b]; });
        std::vector<int> grade(spec.docs_per_topic, 3);
        if (spec.graded) {
            for (std::size_t pos = 0; pos < order.size(); ++pos) {
                const std::size_t tier = pos * 3 / std::max<std::size_t>(order.size(), 1);
                grade[order[pos]] = 3 - static_cast<int>(tier);  // closest third: 3, then 2, then 1
            }
        }
        for (const auto& qid : topic_queries[t]) {
            for (std::size_t k = 0; k < spec.docs_per_topic; ++k) {
                corpus.qrels.judgments.emplace(std::make_pair(qid, topic_docs[t][k]), grade[k]);
            }
        }
    }

    // train/validation split: the last quarter of each topic's queries (at
    // least one when there are two or more) is held out for evaluation
    for (std::size_t t = 0; t < spec.n_topics; ++t) {
        const std::size_t n_val =
            spec.queries_per_topic >= 2 ? std::max<std::size_t>(1, spec.queries_per_topic / 4) : 0;
        for (std::size_t k = 0; k < spec.queries_per_topic; ++k) {
            if (k + n_val >= spec.queries_per_topic)
                corpus.validation_queries.push_back(topic_queries[t][k]);
            else
                corpus.train_queries.push_back(topic_queries[t][k]);
        }
    }

    // candidates for negatives, per topic: all docs of other topics, ranked by
    // similarity to this topic's center (most similar first)
    std::vector<std::vector<std::string>> neg_pool(spec.n_topics);
    for (std::size_t t = 0; t < spec.n_topics; ++t) {
        std::vector<std::pair<double, std::string>> ranked;
        for (std::size_t u = 0; u < spec.n_topics; ++u) {
            if (u == t) continue;
            for (const auto& id : topic_docs[u]) {
                ranked.emplace_back(-cosine(corpus.features.at(id), centers[t]), id);
            }
        }
        std::sort(ranked.begin(), ranked.end());
        for (auto& [key, id] : ranked) neg_pool[t].push_back(id);
    }
    auto pick_negative = [&](std::size_t topic) -> const std::string& {
        const auto& pool = neg_pool[topic];
        if (spec.hardness >= 1.0) return pool.front();
        const double u = unit(rng);
        // hardness biases the draw toward the most center-similar candidates
        const double biased = std::pow(u, 1.0 / (1.0 - spec.hardness));
        auto idx = static_cast<std::size_t>(biased * static_cast<double>(pool.size()));
        return pool[std::min(idx, pool.size() - 1)];
    };

    // triples cover every query (embeddings are free parameters, so held-out
    // queries still need gradient signal); the split governs evaluation only
    const std::size_t reps =
        spec.triples_per_query > 0 ? spec.triples_per_query : spec.docs_per_topic;
    for (std::size_t rep = 0; rep < reps; ++rep) {
        for (std::size_t t = 0; t < spec.n_topics; ++t) {
            for (std::size_t k = 0; k < spec.queries_per_topic; ++k) {
                const auto& qid = topic_queries[t][k];
                const auto& pos = topic_docs[t][(rep + k) % spec.docs_per_topic];
                corpus.triples.triples.push_back({qid, pos, pick_negative(t)});
            }
        }
    }
    std::shuffle(corpus.triples.triples.begin(), corpus.triples.triples.end(), rng);
    return corpus;
}

void write_features(const std::map<std::string, Vector>& features, std::size_t dim,
                    std::uint64_t seed, const std::string& path) {
    trainer::EmbeddingTable table;
    table.dim = dim;
    table.seed = seed;
    table.entries = features;
    trainer::write_checkpoint(table, path);
}

void write_triplets(const TripletDataset& ds, const std::string& path) {
    std::ofstream out(path);
    if (!out) throw DataError("cannot write triplet file: " + path);
    for (const auto& t : ds.triples) {
        out << t.query_id << '\t' << t.pos_id << '\t' << t.neg_id << '\n';
    }
}

}  // namespace rml::data
