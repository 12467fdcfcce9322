#pragma once

#include <map>
#include <string>
#include <vector>

#include "rml/data.hpp"
#include "rml/trainer.hpp"

namespace rml::eval {

using data::QrelsTable;
using data::RunFile;
using trainer::EmbeddingTable;

enum class Metric { nDCG, Recall, Hits };

Metric metric_from_string(const std::string& name);
std::string to_string(Metric m);

struct MetricSpec {
    Metric name = Metric::nDCG;
    std::size_t k = 10;
    int binarization_threshold = 1;  // grade > threshold => relevant (Recall/Hits)

    std::string label() const { return to_string(name) + "@" + std::to_string(k); }
};

bool binarize(int grade, int threshold = 1);

// Exponential-gain DCG: gain 2^grade - 1, discount 1/log2(rank + 1),
// normalized by the ideal DCG over all judged documents.
double ndcg_at_k(const std::vector<std::string>& ranked, const QrelsTable& qrels,
                 const std::string& query_id, std::size_t k);
double recall_at_k(const std::vector<std::string>& ranked, const QrelsTable& qrels,
                   const std::string& query_id, std::size_t k, int threshold = 1);
double hits_at_k(const std::vector<std::string>& ranked, const QrelsTable& qrels,
                 const std::string& query_id, std::size_t k, int threshold = 1);

RunFile full_rank(const EmbeddingTable& table, const std::vector<std::string>& query_ids,
                  const std::vector<std::string>& doc_ids, std::size_t k,
                  const std::string& tag = "rml");

RunFile rerank(const RunFile& baseline, const EmbeddingTable& table, std::size_t depth = 1000,
               const std::string& tag = "rml-rerank");

struct EvalResult {
    // per metric label: query id -> score, plus the mean over evaluated queries
    std::map<std::string, std::map<std::string, double>> per_query;
    std::map<std::string, double> mean;
    std::vector<std::string> skipped_queries;   // in the run but not judged
    std::vector<std::string> excluded_queries;  // judged but nothing relevant
};

EvalResult evaluate_run(const RunFile& run, const QrelsTable& qrels,
                        const std::vector<MetricSpec>& specs);

void write_metrics_csv(const EvalResult& result, const std::vector<MetricSpec>& specs,
                       const std::string& path);

}  // namespace rml::eval
