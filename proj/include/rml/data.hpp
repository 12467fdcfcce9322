#pragma once

#include <cstdint>
#include <map>
#include <string>
#include <vector>

#include "rml/trainer.hpp"

namespace rml::data {

using geometry::Vector;
using trainer::TripletRef;

struct TripletDataset {
    std::vector<TripletRef> triples;
};

struct QrelsTable {
    std::map<std::pair<std::string, std::string>, int> judgments;  // (qid, docid) -> grade
    int max_grade = 3;

    int grade(const std::string& qid, const std::string& docid) const;
    std::vector<std::string> query_ids() const;
};

struct RunRow {
    std::string query_id;
    std::string doc_id;
    std::size_t rank = 0;
    double score = 0.0;
    std::string tag;
};

// Rows grouped per query; within a query ranks are contiguous from 1 and
// scores non-increasing (ties broken by ascending doc id).
struct RunFile {
    std::vector<RunRow> rows;

    std::vector<std::string> query_ids() const;
    std::vector<RunRow> rows_for(const std::string& qid) const;
};

TripletDataset load_triplets(const std::string& path);

QrelsTable parse_qrels(const std::string& path, int max_grade = 3);
// Keep only the judgments of the given queries (e.g. a validation split).
QrelsTable restrict_qrels(const QrelsTable& qrels, const std::vector<std::string>& query_ids);
void write_qrels(const QrelsTable& qrels, const std::string& path);

// Re-sorts each query by (score desc, doc_id asc) and rewrites ranks.
RunFile canonicalize(RunFile run);
RunFile parse_run(const std::string& path);
void write_run(const RunFile& run, const std::string& path);

struct SyntheticSpec {
    std::size_t n_topics = 8;
    std::size_t docs_per_topic = 8;
    std::size_t queries_per_topic = 4;
    std::size_t dim = 16;
    double hardness = 0.0;  // 0: uniform other-topic negatives; 1: nearest to positive's cluster
    std::size_t triples_per_query = 0;  // 0: one per doc of the query's topic
    double noise = 0.1;
    bool graded = false;  // emit grades {3,2,1} by noise radius instead of flat 3
    std::uint64_t seed = 0;

    void validate() const;
};

struct SyntheticCorpus {
    std::map<std::string, Vector> features;  // ids -> generating vectors (docs, queries, centers)
    TripletDataset triples;
    QrelsTable qrels;
    std::vector<std::string> train_queries;
    std::vector<std::string> validation_queries;
    std::vector<std::string> doc_ids;
    std::map<std::string, Vector> centers;  // topic id -> center, for oracle rankings
};

SyntheticCorpus generate_synthetic(const SyntheticSpec& spec);

void write_features(const std::map<std::string, Vector>& features, std::size_t dim,
                    std::uint64_t seed, const std::string& path);
void write_triplets(const TripletDataset& ds, const std::string& path);

}  // namespace rml::data
