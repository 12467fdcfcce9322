#include <CLI11.hpp>
#include <algorithm>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>
#include <optional>
#include <set>
#include <sstream>
#include <string>

#include "rml/data.hpp"
#include "rml/errors.hpp"
#include "rml/eval.hpp"
#include "rml/loss.hpp"
#include "rml/stats.hpp"
#include "rml/trainer.hpp"

namespace fs = std::filesystem;
using namespace rml;

namespace {

// Flat key=value experiment config. Unknown keys are rejected; CLI flags
// override file values.
const std::set<std::string> kConfigKeys = {
    "n_topics", "docs_per_topic", "queries_per_topic", "dim", "hardness", "noise", "graded",
    "triples_per_query", "seed", "batch_size", "lr", "weight_decay", "lr_gamma", "adam_beta1",
    "adam_beta2", "adam_eps", "eval_every", "patience", "max_epochs", "loss", "epsilon",
    "in_batch", "init", "mode", "depth", "k", "binarize_threshold",
};

std::map<std::string, std::string> load_config(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw UsageError("cannot open config file: " + path);
    std::map<std::string, std::string> cfg;
    std::string line;
    std::size_t lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        if (line.empty() || line[0] == '#') continue;
        const auto eq = line.find('=');
        if (eq == std::string::npos) {
            throw UsageError("config line " + std::to_string(lineno) + " is not key=value");
        }
        const std::string key = line.substr(0, eq);
        if (!kConfigKeys.count(key)) {
            throw UsageError("unknown config key '" + key + "' at line " + std::to_string(lineno));
        }
        cfg[key] = line.substr(eq + 1);
    }
    return cfg;
}

template <typename T>
void apply(const std::map<std::string, std::string>& cfg, const std::string& key, T& out) {
    auto it = cfg.find(key);
    if (it == cfg.end()) return;
    std::istringstream in(it->second);
    T value;
    if (!(in >> value)) throw UsageError("config value for '" + key + "' is malformed");
    out = value;
}

void apply(const std::map<std::string, std::string>& cfg, const std::string& key, bool& out) {
    auto it = cfg.find(key);
    if (it == cfg.end()) return;
    if (it->second == "true" || it->second == "1") out = true;
    else if (it->second == "false" || it->second == "0") out = false;
    else throw UsageError("config value for '" + key + "' must be true/false");
}

void apply(const std::map<std::string, std::string>& cfg, const std::string& key,
           std::string& out) {
    auto it = cfg.find(key);
    if (it != cfg.end()) out = it->second;
}

struct GlobalOpts {
    std::string config_path;
    std::uint64_t seed = 0;
    bool seed_set = false;
    std::string out_dir = ".";
};

data::SyntheticSpec synthetic_from(const std::map<std::string, std::string>& cfg) {
    data::SyntheticSpec spec;
    apply(cfg, "n_topics", spec.n_topics);
    apply(cfg, "docs_per_topic", spec.docs_per_topic);
    apply(cfg, "queries_per_topic", spec.queries_per_topic);
    apply(cfg, "dim", spec.dim);
    apply(cfg, "hardness", spec.hardness);
    apply(cfg, "noise", spec.noise);
    apply(cfg, "graded", spec.graded);
    apply(cfg, "triples_per_query", spec.triples_per_query);
    apply(cfg, "seed", spec.seed);
    return spec;
}

trainer::TrainConfig train_from(const std::map<std::string, std::string>& cfg) {
    trainer::TrainConfig tc;
    apply(cfg, "batch_size", tc.batch_size);
    double lr = -1.0;
    apply(cfg, "lr", lr);
    if (lr > 0.0) tc.base_lr = lr;
    apply(cfg, "weight_decay", tc.weight_decay);
    apply(cfg, "lr_gamma", tc.lr_gamma);
    apply(cfg, "adam_beta1", tc.adam_beta1);
    apply(cfg, "adam_beta2", tc.adam_beta2);
    apply(cfg, "adam_eps", tc.adam_eps);
    apply(cfg, "eval_every", tc.eval_every);
    apply(cfg, "patience", tc.patience);
    apply(cfg, "max_epochs", tc.max_epochs);
    apply(cfg, "seed", tc.seed);
    return tc;
}

std::string fmt(double v) {
    char buf[40];
    std::snprintf(buf, sizeof buf, "%.17g", v);
    return buf;
}

std::vector<std::string> split_ids(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw DataError("cannot open split manifest: " + path);
    std::vector<std::string> ids;
    std::string line;
    while (std::getline(in, line)) {
        if (!line.empty()) ids.push_back(line);
    }
    return ids;
}

int run_cli(int argc, char** argv) {
    CLI::App app{"Relevance-margin embedding training lab"};
    app.require_subcommand(1);

    GlobalOpts g;
    app.add_option("--config", g.config_path, "flat key=value experiment config");
    app.add_option("--seed", g.seed, "master RNG seed")->each([&](const std::string&) {
        g.seed_set = true;
    });
    app.add_option("--out", g.out_dir, "output directory");

    // generate
    auto* gen = app.add_subcommand("generate", "write a synthetic corpus");
    std::size_t gen_topics = 8, gen_docs = 8, gen_queries = 4, gen_dim = 16;
    double gen_hardness = 0.0, gen_noise = 0.1;
    bool gen_graded = false;
    gen->add_option("--n-topics", gen_topics, "number of topics")->capture_default_str();
    gen->add_option("--docs-per-topic", gen_docs, "documents per topic")->capture_default_str();
    gen->add_option("--queries-per-topic", gen_queries, "queries per topic")
        ->capture_default_str();
    gen->add_option("--dim", gen_dim, "embedding dimension")->capture_default_str();
    gen->add_option("--hardness", gen_hardness, "negative hardness in [0,1]")
        ->capture_default_str();
    gen->add_option("--noise", gen_noise, "cluster noise scale")->capture_default_str();
    gen->add_flag("--graded", gen_graded, "emit graded qrels {3,2,1} instead of flat 3");
    std::size_t gen_tpq = 0;
    gen->add_option("--triples-per-query", gen_tpq,
                    "triples sampled per query (default: docs per topic)");

    // train
    auto* tr = app.add_subcommand("train", "train an embedding table");
    std::string tr_loss = "static", tr_triplets, tr_qrels, tr_split;
    std::optional<double> tr_epsilon;
    std::optional<bool> tr_in_batch;
    trainer::TrainConfig tr_cfg;
    double tr_lr = -1.0;
    tr->add_option("--loss", tr_loss, "static|adaptive|distributed")->capture_default_str();
    tr->add_option("--epsilon", [&tr_epsilon](const std::vector<std::string>& v) {
        tr_epsilon = std::stod(v.front());
        return true;
    }, "static target value (default 1.0)");
    tr->add_flag("--in-batch,!--no-in-batch", [&tr_in_batch](std::int64_t count) {
        tr_in_batch = count > 0;
    }, "use naive in-batch expansion");
    tr->add_option("--triplets", tr_triplets, "training triplet TSV")->required();
    tr->add_option("--qrels", tr_qrels, "qrels for the eval hook");
    tr->add_option("--validation", tr_split, "validation query manifest");
    tr->add_option("--batch-size", tr_cfg.batch_size, "batch size")->capture_default_str();
    tr->add_option("--lr", tr_lr, "base learning rate (default 5e-6/B)");
    tr->add_option("--weight-decay", tr_cfg.weight_decay, "decoupled weight decay")
        ->capture_default_str();
    tr->add_option("--lr-gamma", tr_cfg.lr_gamma, "exponential lr decay factor")
        ->capture_default_str();
    tr->add_option("--eval-every", tr_cfg.eval_every, "steps between eval checks")
        ->capture_default_str();
    tr->add_option("--patience", tr_cfg.patience, "non-improving checks before stopping")
        ->capture_default_str();
    tr->add_option("--max-epochs", tr_cfg.max_epochs, "maximum passes over the data")
        ->capture_default_str();
    std::string tr_init = "gaussian";
    tr->add_option("--init", tr_init, "gaussian|anisotropic embedding init")
        ->capture_default_str();

    // evaluate
    auto* ev = app.add_subcommand("evaluate", "score a checkpoint against qrels");
    std::string ev_mode = "full", ev_checkpoint, ev_qrels, ev_baseline, ev_queries;
    std::size_t ev_depth = 1000, ev_k = 1000;
    int ev_threshold = 1;
    std::vector<std::string> ev_metrics;
    ev->add_option("--mode", ev_mode, "full|rerank")->capture_default_str();
    ev->add_option("--checkpoint", ev_checkpoint, "embedding table TSV")->required();
    ev->add_option("--qrels", ev_qrels, "qrels file")->required();
    ev->add_option("--baseline", ev_baseline, "baseline run for rerank mode");
    ev->add_option("--queries", ev_queries, "query manifest (default: qrels queries)");
    ev->add_option("--depth", ev_depth, "rerank depth")->capture_default_str();
    ev->add_option("--k", ev_k, "full-rank retrieval depth")->capture_default_str();
    ev->add_option("--metric", ev_metrics, "metric as name@k, repeatable (default nDCG@10)");
    ev->add_option("--binarize-threshold", ev_threshold, "grade > threshold is relevant")
        ->capture_default_str();

    // compare
    auto* cmp = app.add_subcommand("compare", "TOST equivalence between two runs");
    std::string cmp_a, cmp_b, cmp_qrels, cmp_metric = "nDCG@10";
    double cmp_eps = 0.05, cmp_alpha = 0.05;
    std::size_t cmp_family = 1;
    int cmp_threshold = 1;
    cmp->add_option("--run-a", cmp_a, "first run file")->required();
    cmp->add_option("--run-b", cmp_b, "second run file")->required();
    cmp->add_option("--qrels", cmp_qrels, "qrels file")->required();
    cmp->add_option("--metric", cmp_metric, "metric as name@k")->capture_default_str();
    cmp->add_option("--epsilon-l", cmp_eps, "equivalence bound")->capture_default_str();
    cmp->add_option("--alpha", cmp_alpha, "significance level")->capture_default_str();
    cmp->add_option("--family", cmp_family, "Bonferroni family size")->capture_default_str();
    cmp->add_option("--binarize-threshold", cmp_threshold, "grade > threshold is relevant")
        ->capture_default_str();

    // inspect-loss
    auto* ins = app.add_subcommand("inspect-loss", "per-negative loss table for one query");
    std::string ins_checkpoint, ins_triplets, ins_query, ins_loss = "adaptive";
    std::optional<double> ins_epsilon;
    std::size_t ins_batch = 64;
    ins->add_option("--checkpoint", ins_checkpoint, "embedding table TSV")->required();
    ins->add_option("--triplets", ins_triplets, "triplet TSV")->required();
    ins->add_option("--query", ins_query, "query id")->required();
    ins->add_option("--loss", ins_loss, "static|adaptive|distributed")->capture_default_str();
    ins->add_option("--epsilon", [&ins_epsilon](const std::vector<std::string>& v) {
        ins_epsilon = std::stod(v.front());
        return true;
    }, "static target value");
    ins->add_option("--batch-size", ins_batch, "batch window size")->capture_default_str();

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e);
        return code == 0 ? 0 : 1;
    }

    std::map<std::string, std::string> cfg;
    if (!g.config_path.empty()) cfg = load_config(g.config_path);
    fs::create_directories(g.out_dir);

    auto parse_metric = [&](const std::string& text, int threshold) {
        eval::MetricSpec spec;
        const auto at = text.find('@');
        const std::string name = at == std::string::npos ? text : text.substr(0, at);
        spec.name = eval::metric_from_string(name);
        if (at != std::string::npos) spec.k = std::stoul(text.substr(at + 1));
        spec.binarization_threshold = threshold;
        return spec;
    };

    if (*gen) {
        auto spec = synthetic_from(cfg);
        if (gen->count("--n-topics")) spec.n_topics = gen_topics;
        if (gen->count("--docs-per-topic")) spec.docs_per_topic = gen_docs;
        if (gen->count("--queries-per-topic")) spec.queries_per_topic = gen_queries;
        if (gen->count("--dim")) spec.dim = gen_dim;
        if (gen->count("--hardness")) spec.hardness = gen_hardness;
        if (gen->count("--noise")) spec.noise = gen_noise;
        if (gen->count("--graded")) spec.graded = gen_graded;
        if (g.seed_set) spec.seed = g.seed;

        auto corpus = data::generate_synthetic(spec);
        data::write_features(corpus.features, spec.dim, spec.seed,
                             (fs::path(g.out_dir) / "features.tsv").string());
        data::write_triplets(corpus.triples, (fs::path(g.out_dir) / "triplets.tsv").string());
        data::write_qrels(corpus.qrels, (fs::path(g.out_dir) / "qrels.txt").string());
        std::ofstream split(fs::path(g.out_dir) / "split.txt");
        for (const auto& q : corpus.train_queries) split << "train " << q << '\n';
        for (const auto& q : corpus.validation_queries) split << "validation " << q << '\n';
        std::ofstream val(fs::path(g.out_dir) / "validation_queries.txt");
        for (const auto& q : corpus.validation_queries) val << q << '\n';
        std::cout << "wrote " << corpus.features.size() << " features, "
                  << corpus.triples.triples.size() << " triplets to " << g.out_dir << '\n';
        return 0;
    }

    if (*tr) {
        auto tc = train_from(cfg);
        if (tr_lr > 0.0) tc.base_lr = tr_lr;
        if (tr->count("--weight-decay")) tc.weight_decay = tr_cfg.weight_decay;
        if (tr->count("--lr-gamma")) tc.lr_gamma = tr_cfg.lr_gamma;
        if (tr->count("--eval-every")) tc.eval_every = tr_cfg.eval_every;
        if (tr->count("--patience")) tc.patience = tr_cfg.patience;
        if (tr->count("--max-epochs")) tc.max_epochs = tr_cfg.max_epochs;
        if (tr->count("--batch-size")) tc.batch_size = tr_cfg.batch_size;
        if (g.seed_set) tc.seed = g.seed;

        std::string loss_name = tr_loss;
        apply(cfg, "loss", loss_name);
        if (tr->count("--loss")) loss_name = tr_loss;
        if (!tr_epsilon) {
            double eps = -1.0;
            apply(cfg, "epsilon", eps);
            if (eps >= 0.0) tr_epsilon = eps;
        }
        if (!tr_in_batch) {
            bool ib = false;
            if (cfg.count("in_batch")) {
                apply(cfg, "in_batch", ib);
                tr_in_batch = ib;
            }
        }
        const auto spec =
            loss::LossSpec::make(loss::variant_from_string(loss_name), tr_epsilon, tr_in_batch);

        auto dataset = data::load_triplets(tr_triplets);
        std::set<std::string> ids;
        for (const auto& t : dataset.triples) {
            ids.insert(t.query_id);
            ids.insert(t.pos_id);
            ids.insert(t.neg_id);
        }
        std::size_t dim = 16;
        apply(cfg, "dim", dim);
        std::string init_name = tr_init;
        apply(cfg, "init", init_name);
        if (tr->count("--init")) init_name = tr_init;
        trainer::InitScheme scheme;
        if (init_name == "gaussian") scheme = trainer::InitScheme::Gaussian;
        else if (init_name == "anisotropic") scheme = trainer::InitScheme::Anisotropic;
        else throw UsageError("unknown init scheme: " + init_name);
        auto table = trainer::init_table({ids.begin(), ids.end()}, dim, tc.seed, scheme);

        trainer::EvalHook hook;
        std::vector<std::string> doc_ids, val_queries;
        data::QrelsTable qrels;
        if (!tr_qrels.empty()) {
            qrels = data::parse_qrels(tr_qrels);
            for (const auto& id : ids)
                if (!id.empty() && id[0] == 'd') doc_ids.push_back(id);
            val_queries = tr_split.empty() ? qrels.query_ids() : split_ids(tr_split);
            qrels = data::restrict_qrels(qrels, val_queries);
            hook = [&](const trainer::EmbeddingTable& t) {
                auto run = eval::full_rank(t, val_queries, doc_ids, 100);
                auto res = eval::evaluate_run(run, qrels, {eval::MetricSpec{}});
                return res.mean.at("nDCG@10");
            };
        }

        auto result = trainer::train(tc, spec, dataset.triples, std::move(table), hook);
        trainer::write_telemetry(result.telemetry,
                                 (fs::path(g.out_dir) / "telemetry.csv").string());
        trainer::write_checkpoint(result.table,
                                  (fs::path(g.out_dir) / "checkpoint.tsv").string());
        std::cout << "trained " << result.steps << " steps"
                  << (result.stopped_early ? " (early stop)" : "") << ", wrote " << g.out_dir
                  << "/checkpoint.tsv\n";
        return 0;
    }

    if (*ev) {
        auto table = trainer::read_checkpoint(ev_checkpoint);
        auto qrels = data::parse_qrels(ev_qrels);
        if (ev_metrics.empty()) ev_metrics = {"nDCG@10"};
        std::vector<eval::MetricSpec> specs;
        for (const auto& m : ev_metrics) specs.push_back(parse_metric(m, ev_threshold));

        data::RunFile run;
        if (ev_mode == "full") {
            std::vector<std::string> queries =
                ev_queries.empty() ? qrels.query_ids() : split_ids(ev_queries);
            std::vector<std::string> docs;
            for (const auto& [id, vec] : table.entries)
                if (!id.empty() && id[0] == 'd') docs.push_back(id);
            run = eval::full_rank(table, queries, docs, ev_k);
        } else if (ev_mode == "rerank") {
            if (ev_baseline.empty()) throw UsageError("rerank mode requires --baseline");
            run = eval::rerank(data::parse_run(ev_baseline), table, ev_depth);
        } else {
            throw UsageError("unknown evaluate mode: " + ev_mode);
        }
        data::write_run(run, (fs::path(g.out_dir) / "run.txt").string());
        auto result = eval::evaluate_run(run, qrels, specs);
        eval::write_metrics_csv(result, specs, (fs::path(g.out_dir) / "metrics.csv").string());
        for (const auto& spec : specs) {
            std::cout << spec.label() << " mean " << fmt(result.mean.at(spec.label())) << '\n';
        }
        return 0;
    }

    if (*cmp) {
        auto run_a = data::parse_run(cmp_a);
        auto run_b = data::parse_run(cmp_b);
        auto qrels = data::parse_qrels(cmp_qrels);
        auto spec = parse_metric(cmp_metric, cmp_threshold);

        auto res_a = eval::evaluate_run(run_a, qrels, {spec});
        auto res_b = eval::evaluate_run(run_b, qrels, {spec});
        const auto& pa = res_a.per_query.at(spec.label());
        const auto& pb = res_b.per_query.at(spec.label());
        std::vector<std::string> missing;
        for (const auto& [qid, score] : pa)
            if (!pb.count(qid)) missing.push_back(qid);
        for (const auto& [qid, score] : pb)
            if (!pa.count(qid)) missing.push_back(qid);
        if (!missing.empty()) {
            std::string msg = "query coverage mismatch:";
            for (const auto& q : missing) msg += " " + q;
            throw DataError(msg);
        }
        std::vector<double> x, y;
        for (const auto& [qid, score] : pa) {
            x.push_back(score);
            y.push_back(pb.at(qid));
        }
        auto result = rml::stats::paired_tost(x, y, cmp_eps, cmp_alpha);
        const double p_adj = rml::stats::bonferroni({result.p_tost}, cmp_family).front();
        const bool equivalent = result.equivalent && p_adj < cmp_alpha;

        std::ofstream out(fs::path(g.out_dir) / "compare.csv");
        out << "system_a,system_b,metric,n,mean_diff,p_tost,p_adjusted,equivalent\n";
        out << cmp_a << ',' << cmp_b << ',' << spec.label() << ',' << result.n << ','
            << fmt(result.mean_diff) << ',' << fmt(result.p_tost) << ',' << fmt(p_adj) << ','
            << (equivalent ? "true" : "false") << '\n';
        std::cout << spec.label() << " mean_diff " << fmt(result.mean_diff) << " p_tost "
                  << fmt(result.p_tost) << " p_adjusted " << fmt(p_adj)
                  << (equivalent ? " equivalent" : " not-equivalent") << '\n';
        return 0;
    }

    if (*ins) {
        auto table = trainer::read_checkpoint(ins_checkpoint);
        auto dataset = data::load_triplets(ins_triplets);
        const auto spec = loss::LossSpec::make(loss::variant_from_string(ins_loss), ins_epsilon,
                                               ins_loss == "static" ? std::optional<bool>{}
                                                                    : std::optional<bool>{true});
        std::size_t index = dataset.triples.size();
        for (std::size_t i = 0; i < dataset.triples.size(); ++i) {
            if (dataset.triples[i].query_id == ins_query) {
                index = i;
                break;
            }
        }
        if (index == dataset.triples.size()) throw DataError("unknown query id: " + ins_query);

        const std::size_t begin = (index / ins_batch) * ins_batch;
        const std::size_t end = std::min(begin + ins_batch, dataset.triples.size());
        loss::TripletBatch batch;
        for (std::size_t i = begin; i < end; ++i) {
            const auto& t = dataset.triples[i];
            batch.query_ids.push_back(t.query_id);
            batch.pos_ids.push_back(t.pos_id);
            batch.neg_ids.push_back(t.neg_id);
            batch.queries.push_back(table.at(t.query_id));
            batch.positives.push_back(table.at(t.pos_id));
            batch.negatives.push_back(table.at(t.neg_id));
        }
        const std::size_t row = index - begin;
        auto report = loss::batch_loss(spec, batch);

        struct Line {
            std::string neg_id;
            double rho, target, sq;
        };
        std::vector<Line> lines;
        for (const auto& inst : report.per_instance) {
            if (inst.i != row) continue;
            const double rho =
                geometry::cosine(batch.queries[row],
                                 batch.negatives[spec.variant == loss::Variant::Distributed
                                                     ? row
                                                     : inst.j]);
            lines.push_back({batch.neg_ids[inst.j], rho, inst.target, inst.squared});
        }
        std::sort(lines.begin(), lines.end(),
                  [](const Line& a, const Line& b) { return a.target > b.target; });
        const double rho_pos = geometry::cosine(batch.queries[row], batch.positives[row]);
        std::cout << "query " << ins_query << "  positive " << batch.pos_ids[row] << "  rho+ "
                  << fmt(rho_pos) << '\n';
        std::cout << "negative,rho,target,sq_loss,mark\n";
        for (std::size_t i = 0; i < lines.size(); ++i) {
            const char* mark = i == 0                  ? "max"
                               : i == lines.size() - 1 ? "min"
                               : i == lines.size() / 2 ? "mid"
                                                       : "";
            std::cout << lines[i].neg_id << ',' << fmt(lines[i].rho) << ','
                      << fmt(lines[i].target) << ',' << fmt(lines[i].sq) << ',' << mark << '\n';
        }
        return 0;
    }
    return 0;
}

}  // namespace

int main(int argc, char** argv) {
    try {
        return run_cli(argc, argv);
    } catch (const UsageError& e) {
        std::cerr << "error: " << e.what() << '\n';
        return 1;
    } catch (const DivergenceError& e) {
        std::cerr << "error: " << e.what() << '\n';
        return 3;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << '\n';
        return 2;
    }
}
