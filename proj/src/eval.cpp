#include "rml/eval.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <iostream>
#include <set>

#include "rml/errors.hpp"

namespace rml::eval {

using geometry::cosine;

Metric metric_from_string(const std::string& name) {
    if (name == "ndcg" || name == "nDCG") return Metric::nDCG;
    if (name == "recall" || name == "Recall") return Metric::Recall;
    if (name == "hits" || name == "Hits") return Metric::Hits;
    throw UsageError("unknown metric: " + name);
}

std::string to_string(Metric m) {
    switch (m) {
        case Metric::nDCG: return "nDCG";
        case Metric::Recall: return "Recall";
        case Metric::Hits: return "Hits";
    }
    return "?";
}

bool binarize(int grade, int threshold) { return grade > threshold; }

namespace {

void check_no_duplicates(const std::vector<std::string>& ranked) {
    std::set<std::string> seen;
    for (const auto& id : ranked) {
        if (!seen.insert(id).second) throw DataError("duplicate document in ranking: " + id);
    }
}

std::vector<int> judged_grades(const QrelsTable& qrels, const std::string& query_id) {
    std::vector<int> grades;
    auto it = qrels.judgments.lower_bound({query_id, ""});
    for (; it != qrels.judgments.end() && it->first.first == query_id; ++it) {
        grades.push_back(it->second);
    }
    return grades;
}

double gain(int grade) { return std::pow(2.0, grade) - 1.0; }
double discount(std::size_t rank) { return 1.0 / std::log2(static_cast<double>(rank) + 1.0); }

std::size_t count_relevant(const QrelsTable& qrels, const std::string& query_id, int threshold) {
    std::size_t n = 0;
    for (int g : judged_grades(qrels, query_id))
        if (binarize(g, threshold)) ++n;
    return n;
}

}  // namespace

double ndcg_at_k(const std::vector<std::string>& ranked, const QrelsTable& qrels,
                 const std::string& query_id, std::size_t k) {
    check_no_duplicates(ranked);
    double dcg = 0.0;
    for (std::size_t r = 0; r < std::min(k, ranked.size()); ++r) {
        dcg += gain(qrels.grade(query_id, ranked[r])) * discount(r + 1);
    }
    std::vector<int> grades = judged_grades(qrels, query_id);
    std::sort(grades.rbegin(), grades.rend());
    double idcg = 0.0;
    for (std::size_t r = 0; r < std::min(k, grades.size()); ++r) {
        idcg += gain(grades[r]) * discount(r + 1);
    }
    return idcg == 0.0 ? 0.0 : dcg / idcg;
}

double recall_at_k(const std::vector<std::string>& ranked, const QrelsTable& qrels,
                   const std::string& query_id, std::size_t k, int threshold) {
    check_no_duplicates(ranked);
    const std::size_t relevant = count_relevant(qrels, query_id, threshold);
    if (relevant == 0) return 0.0;
    std::size_t hit = 0;
    for (std::size_t r = 0; r < std::min(k, ranked.size()); ++r) {
        if (binarize(qrels.grade(query_id, ranked[r]), threshold)) ++hit;
    }
    return static_cast<double>(hit) / static_cast<double>(relevant);
}

double hits_at_k(const std::vector<std::string>& ranked, const QrelsTable& qrels,
                 const std::string& query_id, std::size_t k, int threshold) {
    check_no_duplicates(ranked);
    std::size_t hit = 0;
    for (std::size_t r = 0; r < std::min(k, ranked.size()); ++r) {
        if (binarize(qrels.grade(query_id, ranked[r]), threshold)) ++hit;
    }
    return static_cast<double>(hit);
}

RunFile full_rank(const EmbeddingTable& table, const std::vector<std::string>& query_ids,
                  const std::vector<std::string>& doc_ids, std::size_t k,
                  const std::string& tag) {
    RunFile run;
    for (const auto& qid : query_ids) {
        const auto& q = table.at(qid);
        std::vector<std::pair<double, std::string>> scored;
        scored.reserve(doc_ids.size());
        for (const auto& did : doc_ids) scored.emplace_back(cosine(q, table.at(did)), did);
        std::sort(scored.begin(), scored.end(), [](const auto& a, const auto& b) {
            if (a.first != b.first) return a.first > b.first;
            return a.second < b.second;
        });
        const std::size_t top = std::min(k, scored.size());
        for (std::size_t r = 0; r < top; ++r) {
            run.rows.push_back({qid, scored[r].second, r + 1, scored[r].first, tag});
        }
    }
    return data::canonicalize(std::move(run));
}

RunFile rerank(const RunFile& baseline, const EmbeddingTable& table, std::size_t depth,
               const std::string& tag) {
    RunFile out;
    for (const auto& qid : baseline.query_ids()) {
        auto rows = baseline.rows_for(qid);
        std::sort(rows.begin(), rows.end(),
                  [](const data::RunRow& a, const data::RunRow& b) { return a.rank < b.rank; });
        const std::size_t head = std::min(depth, rows.size());
        const auto& q = table.at(qid);
        std::vector<std::pair<double, std::string>> scored;
        for (std::size_t r = 0; r < head; ++r) {
            scored.emplace_back(cosine(q, table.at(rows[r].doc_id)), rows[r].doc_id);
        }
        std::sort(scored.begin(), scored.end(), [](const auto& a, const auto& b) {
            if (a.first != b.first) return a.first > b.first;
            return a.second < b.second;
        });
        for (std::size_t r = 0; r < scored.size(); ++r) {
            out.rows.push_back({qid, scored[r].second, r + 1, scored[r].first, tag});
        }
        // unscored tail keeps its baseline order, pushed below every head score
        if (head < rows.size()) {
            const double floor_score = (scored.empty() ? 0.0 : scored.back().first) - 1.0;
            for (std::size_t r = head; r < rows.size(); ++r) {
                out.rows.push_back({qid, rows[r].doc_id, r + 1,
                                    floor_score - 1e-9 * static_cast<double>(r - head), tag});
            }
        }
    }
    return data::canonicalize(std::move(out));
}

EvalResult evaluate_run(const RunFile& run, const QrelsTable& qrels,
                        const std::vector<MetricSpec>& specs) {
    EvalResult result;
    const auto judged_queries = qrels.query_ids();
    const std::set<std::string> judged_set(judged_queries.begin(), judged_queries.end());
    for (const auto& qid : run.query_ids()) {
        if (!judged_set.count(qid)) {
            std::cerr << "warning: query " << qid << " has no judgments, skipping\n";
            result.skipped_queries.push_back(qid);
        }
    }

    std::set<std::string> excluded_union;
    for (const auto& spec : specs) {
        const std::string label = spec.label();
        double sum = 0.0;
        std::size_t n = 0;
        for (const auto& qid : judged_queries) {
            bool excluded;
            if (spec.name == Metric::nDCG) {
                auto grades = judged_grades(qrels, qid);
                excluded = std::all_of(grades.begin(), grades.end(), [](int g) { return g == 0; });
            } else {
                excluded = count_relevant(qrels, qid, spec.binarization_threshold) == 0;
            }
            if (excluded) {
                excluded_union.insert(qid);
                continue;
            }
            std::vector<std::string> ranked;
            for (const auto& r : run.rows_for(qid)) ranked.push_back(r.doc_id);
            double score = 0.0;
            switch (spec.name) {
                case Metric::nDCG: score = ndcg_at_k(ranked, qrels, qid, spec.k); break;
                case Metric::Recall:
                    score = recall_at_k(ranked, qrels, qid, spec.k, spec.binarization_threshold);
                    break;
                case Metric::Hits:
                    score = hits_at_k(ranked, qrels, qid, spec.k, spec.binarization_threshold);
                    break;
            }
            result.per_query[label][qid] = score;
            sum += score;
            ++n;
        }
        result.mean[label] = n == 0 ? 0.0 : sum / static_cast<double>(n);
    }
    result.excluded_queries.assign(excluded_union.begin(), excluded_union.end());
    return result;
}

void write_metrics_csv(const EvalResult& result, const std::vector<MetricSpec>& specs,
                       const std::string& path) {
    std::ofstream out(path);
    if (!out) throw DataError("cannot write metrics file: " + path);
    out << "query_id,metric,k,score\n";
    char buf[40];
    for (const auto& spec : specs) {
        const std::string label = spec.label();
        auto it = result.per_query.find(label);
        if (it != result.per_query.end()) {
            for (const auto& [qid, score] : it->second) {
                std::snprintf(buf, sizeof buf, "%.17g", score);
                out << qid << ',' << to_string(spec.name) << ',' << spec.k << ',' << buf << '\n';
            }
        }
        std::snprintf(buf, sizeof buf, "%.17g", result.mean.at(label));
        out << "ALL," << to_string(spec.name) << ',' << spec.k << ',' << buf << '\n';
    }
}

}  // namespace rml::eval
