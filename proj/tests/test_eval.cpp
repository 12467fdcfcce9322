#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <random>

#include "rml/errors.hpp"
#include "rml/eval.hpp"
#include "testutil.hpp"

using namespace rml::eval;
using rml::data::QrelsTable;
using rml::data::RunFile;
using rml::data::RunRow;
using rml::trainer::EmbeddingTable;
using rml::geometry::cosine;

namespace {

QrelsTable make_qrels(const std::vector<std::tuple<std::string, std::string, int>>& rows) {
    QrelsTable q;
    for (const auto& [qid, did, grade] : rows) q.judgments[{qid, did}] = grade;
    return q;
}

}  // namespace

TEST_CASE("binarize") {
    CHECK(binarize(2, 1));
    CHECK_FALSE(binarize(1, 1));
    CHECK_FALSE(binarize(0, 0));
    CHECK_FALSE(binarize(0, 3));
    CHECK(binarize(3, 1));
}

TEST_CASE("ndcg_at_k") {
    auto qrels = make_qrels({{"q", "a", 3}, {"q", "b", 2}, {"q", "c", 0}});

    // ideal ordering scores 1
    CHECK(ndcg_at_k({"a", "b", "c"}, qrels, "q", 3) == doctest::Approx(1.0));
    // all retrieved docs non-relevant
    CHECK(ndcg_at_k({"c", "x", "y"}, qrels, "q", 3) == doctest::Approx(0.0));

    // hand-computed fixture: grades in rank order [3, 0, 2]
    const double dcg = 7.0 / 1.0 + 0.0 + 3.0 / std::log2(4.0);
    const double idcg = 7.0 + 3.0 / std::log2(3.0);
    const double expected = dcg / idcg;
    CHECK(expected == doctest::Approx(8.5 / 8.8928).epsilon(1e-4));
    CHECK(ndcg_at_k({"a", "c", "b"}, qrels, "q", 3) == doctest::Approx(expected).epsilon(1e-12));

    CHECK_THROWS_AS((void)ndcg_at_k({"a", "a"}, qrels, "q", 2), rml::DataError);
}

TEST_CASE("recall and hits") {
    auto qrels = make_qrels(
        {{"q", "a", 3}, {"q", "b", 2}, {"q", "c", 2}, {"q", "d", 3}, {"q", "e", 1}});

    CHECK(recall_at_k({"a", "b", "c", "d"}, qrels, "q", 4, 1) == doctest::Approx(1.0));
    CHECK(recall_at_k({"x", "y"}, qrels, "q", 2, 1) == doctest::Approx(0.0));
    CHECK(recall_at_k({"a", "b", "x", "y"}, qrels, "q", 4, 1) == doctest::Approx(0.5));

    CHECK(hits_at_k({"x", "y"}, qrels, "q", 100, 1) == doctest::Approx(0.0));
    CHECK(hits_at_k({"a"}, qrels, "q", 1, 1) == doctest::Approx(1.0));
    CHECK(hits_at_k({"a", "x", "b", "y", "c"}, qrels, "q", 100, 1) == doctest::Approx(3.0));

    // hits = recall * |relevant| when all relevant docs are judged
    const double recall = recall_at_k({"a", "b", "x"}, qrels, "q", 3, 1);
    const double hits = hits_at_k({"a", "b", "x"}, qrels, "q", 3, 1);
    CHECK(hits == doctest::Approx(recall * 4.0));
}

TEST_CASE("ndcg never decreases when promoting a higher-graded document") {
    // brute force over all adjacent-and-distant swaps on a small ranking
    auto qrels = make_qrels({{"q", "a", 3}, {"q", "b", 2}, {"q", "c", 1}, {"q", "d", 0}});
    std::vector<std::string> ranked{"d", "c", "b", "a"};
    for (std::size_t lo = 0; lo < ranked.size(); ++lo) {
        for (std::size_t hi = lo + 1; hi < ranked.size(); ++hi) {
            auto swapped = ranked;
            std::swap(swapped[lo], swapped[hi]);
            if (qrels.grade("q", swapped[lo]) > qrels.grade("q", ranked[lo])) {
                CHECK(ndcg_at_k(swapped, qrels, "q", 4) >=
                      ndcg_at_k(ranked, qrels, "q", 4) - 1e-15);
            }
        }
    }
}

TEST_CASE("full_rank") {
    EmbeddingTable table;
    table.dim = 3;
    table.entries = {
        {"q1", {1.0, 0.0, 0.0}}, {"q2", {0.0, 1.0, 0.0}},
        {"d1", {0.9, 0.1, 0.0}}, {"d2", {0.1, 0.9, 0.0}}, {"d3", {0.0, 0.0, 1.0}},
    };

    SUBCASE("single-doc corpus puts that doc first for every query") {
        auto run = full_rank(table, {"q1", "q2"}, {"d3"}, 5);
        REQUIRE(run.rows.size() == 2);
        for (const auto& r : run.rows) {
            CHECK(r.doc_id == "d3");
            CHECK(r.rank == 1);
        }
    }

    SUBCASE("scores match the exhaustive loop and query-vector match ranks first") {
        auto run = full_rank(table, {"q1", "q2"}, {"d1", "d2", "d3"}, 3);
        for (const auto& r : run.rows) {
            CHECK(r.score == cosine(table.at(r.query_id), table.at(r.doc_id)));
        }
        auto top = run.rows_for("q1");
        CHECK(top[0].doc_id == "d1");

        // truncation consistency: full depth then cut equals direct k'
        auto narrow = full_rank(table, {"q1", "q2"}, {"d1", "d2", "d3"}, 2);
        for (const auto& qid : {"q1", "q2"}) {
            auto full = run.rows_for(qid);
            auto cut = narrow.rows_for(qid);
            REQUIRE(cut.size() == 2);
            for (std::size_t i = 0; i < 2; ++i) CHECK(full[i].doc_id == cut[i].doc_id);
        }
    }

    SUBCASE("unknown id") {
        CHECK_THROWS_AS((void)full_rank(table, {"qx"}, {"d1"}, 3), rml::DataError);
    }
}

TEST_CASE("rerank") {
    EmbeddingTable table;
    table.dim = 2;
    table.entries = {
        {"q1", {1.0, 0.0}}, {"a", {1.0, 0.1}}, {"b", {0.5, 0.5}}, {"c", {0.0, 1.0}},
    };
    RunFile baseline = rml::data::canonicalize(RunFile{{
        {"q1", "c", 0, 3.0, "bm25"}, {"q1", "a", 0, 2.0, "bm25"}, {"q1", "b", 0, 1.0, "bm25"},
    }});

    auto out = rerank(baseline, table, 1000);
    auto rows = out.rows_for("q1");
    REQUIRE(rows.size() == 3);
    CHECK(rows[0].doc_id == "a");
    CHECK(rows[1].doc_id == "b");
    CHECK(rows[2].doc_id == "c");

    // candidate set unchanged, idempotent on an already cosine-ordered run
    auto again = rerank(out, table, 1000);
    for (std::size_t i = 0; i < rows.size(); ++i) {
        CHECK(again.rows_for("q1")[i].doc_id == rows[i].doc_id);
    }

    // depth 1: only the head is re-scored; the tail keeps baseline order below it
    auto shallow = rerank(baseline, table, 1);
    auto srows = shallow.rows_for("q1");
    REQUIRE(srows.size() == 3);
    CHECK(srows[0].doc_id == "c");
    CHECK(srows[0].score == cosine(table.at("q1"), table.at("c")));
    CHECK(srows[1].doc_id == "a");
    CHECK(srows[2].doc_id == "b");
}

TEST_CASE("evaluate_run") {
    auto qrels = make_qrels({{"q1", "a", 3}, {"q1", "b", 0}, {"q2", "c", 2}, {"q3", "z", 0}});
    RunFile run = rml::data::canonicalize(RunFile{{
        {"q1", "a", 0, 0.9, "s"}, {"q1", "b", 0, 0.8, "s"},
        {"q2", "c", 0, 0.9, "s"},
        {"q9", "a", 0, 0.9, "s"},  // not judged: skipped
    }});

    std::vector<MetricSpec> specs{MetricSpec{Metric::nDCG, 10, 1}};
    auto res = evaluate_run(run, qrels, specs);
    CHECK(res.per_query.at("nDCG@10").size() == 2);  // q3 excluded (nothing relevant)
    CHECK(res.mean.at("nDCG@10") == doctest::Approx(1.0));
    CHECK(res.skipped_queries == std::vector<std::string>{"q9"});
    CHECK(res.excluded_queries == std::vector<std::string>{"q3"});

    // mean equals the hand average of per-query scores
    double hand = 0.0;
    for (const auto& [qid, score] : res.per_query.at("nDCG@10")) hand += score;
    CHECK(res.mean.at("nDCG@10") == doctest::Approx(hand / 2.0));

    // empty run scores zero over the qrels queries
    auto zero = evaluate_run(RunFile{}, qrels, specs);
    CHECK(zero.mean.at("nDCG@10") == doctest::Approx(0.0));
    for (const auto& [qid, score] : zero.per_query.at("nDCG@10")) CHECK(score == 0.0);
}

TEST_CASE("metrics are invariant under positive score scaling") {
    std::mt19937_64 rng(101);
    std::uniform_real_distribution<double> unif(0.0, 1.0);
    for (int trial = 0; trial < 100; ++trial) {
        QrelsTable qrels;
        RunFile run;
        for (int q = 0; q < 3; ++q) {
            const std::string qid = "q" + std::to_string(q);
            for (int d = 0; d < 8; ++d) {
                const std::string did = "d" + std::to_string(d);
                qrels.judgments[{qid, did}] = static_cast<int>(rng() % 4);
                run.rows.push_back({qid, did, 0, unif(rng), "s"});
            }
        }
        run = rml::data::canonicalize(run);
        RunFile scaled = run;
        const double factor = 0.1 + 10.0 * unif(rng);
        for (auto& r : scaled.rows) r.score *= factor;
        scaled = rml::data::canonicalize(scaled);

        std::vector<MetricSpec> specs{
            MetricSpec{Metric::nDCG, 5, 1},
            MetricSpec{Metric::Recall, 5, 1},
            MetricSpec{Metric::Hits, 5, 1},
        };
        auto a = evaluate_run(run, qrels, specs);
        auto b = evaluate_run(scaled, qrels, specs);
        for (const auto& spec : specs) {
            CHECK(a.mean.at(spec.label()) == doctest::Approx(b.mean.at(spec.label())));
        }
    }
}
