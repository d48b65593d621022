// malscan: package scanner CLI covering the whole pipeline, from call-graph
// construction through centrality features, feature-set extraction, model
// training, scanning with explanations, and the adversarial harness.

#include <algorithm>
#include <atomic>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <thread>

#include <CLI11.hpp>
#include <json.hpp>

#include "malscan/attack.hpp"
#include "malscan/callgraph.hpp"
#include "malscan/centrality.hpp"
#include "malscan/explain.hpp"
#include "malscan/featureset.hpp"
#include "malscan/ingest.hpp"
#include "malscan/llm.hpp"
#include "malscan/model.hpp"

namespace fs = std::filesystem;
using namespace malscan;

namespace {

void emit(const std::string& text, const std::string& out_path) {
    if (out_path.empty()) {
        std::cout << text;
        if (text.empty() || text.back() != '\n') std::cout << '\n';
        return;
    }
    std::ofstream out(out_path);
    if (!out) throw ScanError(ErrorCode::IoError, "cannot write " + out_path);
    out << text;
    if (text.empty() || text.back() != '\n') out << '\n';
}

void print_warnings(const WarningLog& warnings) {
    for (const std::string& message : warnings.messages) {
        std::cerr << "warning: " << message << '\n';
    }
}

bool looks_like_package(const fs::directory_entry& entry) {
    if (entry.is_directory()) return true;
    std::string name = entry.path().filename().string();
    std::transform(name.begin(), name.end(), name.begin(),
                   [](unsigned char c) { return std::tolower(c); });
    return name.ends_with(".tar.gz") || name.ends_with(".tgz") || name.ends_with(".zip") ||
           name.ends_with(".whl");
}

std::vector<fs::path> list_packages(const fs::path& dir) {
    if (!fs::is_directory(dir)) {
        throw ScanError(ErrorCode::IoError, "not a directory: " + dir.string());
    }
    std::vector<fs::path> paths;
    for (const auto& entry : fs::directory_iterator(dir)) {
        if (looks_like_package(entry)) paths.push_back(entry.path());
    }
    std::sort(paths.begin(), paths.end());
    return paths;
}

struct LlmFlags {
    std::string provider = "mock";
    std::string rules_path;
    std::string prompt_path;
    int concurrency = 4;
};

LlmClientConfig resolve_llm_config(const LlmFlags& flags) {
    LlmClientConfig cfg = LlmClientConfig::from_environment();
    cfg.provider = flags.provider == "remote" ? LlmProvider::remote : LlmProvider::mock;
    cfg.mock_rules_path = flags.rules_path;
    if (!flags.prompt_path.empty()) {
        std::ifstream in(flags.prompt_path);
        if (!in) throw ScanError(ErrorCode::IoError, "cannot open prompt " + flags.prompt_path);
        cfg.prompt_template.assign(std::istreambuf_iterator<char>(in),
                                   std::istreambuf_iterator<char>());
    }
    return cfg;
}

nlohmann::json metrics_to_json(const Metrics& m) {
    return {{"precision", m.precision}, {"recall", m.recall}, {"f1", m.f1},
            {"tp", m.tp},               {"fp", m.fp},         {"fn", m.fn},
            {"tn", m.tn}};
}

std::string metrics_to_text(const Metrics& m) {
    char buf[160];
    std::snprintf(buf, sizeof buf,
                  "precision %.4f  recall %.4f  f1 %.4f  (tp %lld fp %lld fn %lld tn %lld)",
                  m.precision, m.recall, m.f1, m.tp, m.fp, m.fn, m.tn);
    return buf;
}

void check_model_binding(const TrainedClassifier& model, const SensitiveFeatureSet& featureset) {
    if (model.featureset_fingerprint != featureset.fingerprint()) {
        throw ScanError(ErrorCode::FingerprintMismatch,
                        "model was trained against a different feature set");
    }
    if (model.dimension != featureset.dimension()) {
        throw ScanError(ErrorCode::DimensionMismatch, "model/feature-set dimension mismatch");
    }
}

struct ScanOutcome {
    std::string package_id;
    Verdict verdict;
    ExplanationReport report;
};

ScanOutcome scan_one(const fs::path& path, const TrainedClassifier& model,
                     const SensitiveFeatureSet& featureset, const GroundTruth& gt, bool have_gt,
                     std::uint64_t seed, int lime_samples, WarningLog* warnings) {
    const PackageArtifact artifact = unpack_package(path, {}, warnings);
    const ApiCallGraph graph = build_call_graph(artifact, warnings);
    const FeatureVector vector = vectorize_graph(graph, artifact.id(), featureset);

    ScanOutcome outcome;
    outcome.package_id = artifact.id();
    const Prediction pred = predict(model, vector);
    outcome.verdict = Verdict{pred.label, pred.score};

    std::optional<LimeExplanation> lime;
    if (pred.label == Label::malicious) {
        const bool any_nonzero = std::any_of(vector.values.begin(), vector.values.end(),
                                             [](double v) { return v != 0.0; });
        if (any_nonzero) {
            LimeOptions opts;
            opts.seed = seed;
            opts.n_samples = lime_samples;
            lime = lime_explain(model, vector, featureset, opts);
        }
    }
    ReportOptions report_opts;
    report_opts.require_ground_truth = have_gt;
    outcome.report =
        build_report(graph, artifact.id(), outcome.verdict, lime, gt, report_opts, warnings);

    // Archive extraction lands in a temp dir; clean it up.
    if (artifact.archive_kind != ArchiveKind::directory) {
        std::error_code ec;
        fs::remove_all(artifact.root_path, ec);
    }
    return outcome;
}

int run(int argc, char** argv) {
    CLI::App app{"malscan: call-graph centrality scanner for Python package archives"};
    app.require_subcommand(1);
    app.set_config("--config", "", "Key-value configuration file (flags take precedence)");

    // ---- build-graph ----
    auto* cmd_graph = app.add_subcommand("build-graph", "Emit a package's API call graph as JSON");
    std::string graph_archive;
    std::string graph_out;
    cmd_graph->add_option("archive", graph_archive, "Package archive or directory")->required();
    cmd_graph->add_option("--out", graph_out, "Write JSON here instead of stdout");

    // ---- centrality ----
    auto* cmd_centrality =
        app.add_subcommand("centrality", "Print adjusted centrality scores for one package");
    std::string centrality_archive;
    std::string centrality_metric = "closeness";
    std::string centrality_out;
    KatzParams centrality_katz;
    bool centrality_undirected = false;
    cmd_centrality->add_option("archive", centrality_archive)->required();
    cmd_centrality->add_option("--metric", centrality_metric)
        ->check(CLI::IsMember({"closeness", "degree", "katz", "harmonic"}));
    cmd_centrality->add_option("--katz-alpha", centrality_katz.alpha);
    cmd_centrality->add_option("--katz-beta", centrality_katz.beta);
    cmd_centrality->add_option("--katz-tolerance", centrality_katz.tolerance);
    cmd_centrality->add_option("--katz-max-iterations", centrality_katz.max_iterations);
    cmd_centrality->add_flag("--undirected", centrality_undirected,
                             "Symmetrize edges before computing");
    cmd_centrality->add_option("--out", centrality_out);

    // ---- extract-featureset ----
    auto* cmd_extract = app.add_subcommand(
        "extract-featureset", "Rank corpus APIs by mean centrality and filter via the LLM");
    std::string extract_dir;
    std::string extract_metric = "closeness";
    int extract_top_k = 500;
    bool extract_no_filter = false;
    std::string extract_out = "featureset.json";
    std::string extract_gt_out = "ground_truth.json";
    std::string extract_cache;
    KatzParams extract_katz;
    LlmFlags extract_llm;
    cmd_extract->add_option("malicious-dir", extract_dir, "Directory of malicious packages")
        ->required();
    cmd_extract->add_option("--metric", extract_metric)
        ->check(CLI::IsMember({"closeness", "degree", "katz", "harmonic"}));
    cmd_extract->add_option("--top-k", extract_top_k);
    cmd_extract->add_flag("--no-llm-filter", extract_no_filter,
                          "Keep the raw top-K set (ablation arm)");
    cmd_extract->add_option("--out", extract_out);
    cmd_extract->add_option("--ground-truth-out", extract_gt_out);
    cmd_extract->add_option("--cache", extract_cache, "Verdict cache file (resumable)");
    cmd_extract->add_option("--katz-alpha", extract_katz.alpha);
    cmd_extract->add_option("--katz-beta", extract_katz.beta);
    cmd_extract->add_option("--llm-provider", extract_llm.provider)
        ->check(CLI::IsMember({"mock", "remote"}));
    cmd_extract->add_option("--llm-rules", extract_llm.rules_path, "Mock ruleset JSON");
    cmd_extract->add_option("--llm-prompt", extract_llm.prompt_path, "Prompt template file");
    cmd_extract->add_option("--llm-concurrency", extract_llm.concurrency);

    // ---- vectorize ----
    auto* cmd_vectorize =
        app.add_subcommand("vectorize", "Extract feature vectors for packages into CSV");
    std::vector<std::string> vec_paths;
    std::string vec_featureset;
    std::string vec_label;
    std::string vec_out = "vectors.csv";
    bool vec_append = false;
    cmd_vectorize->add_option("packages", vec_paths, "Package archives or directories")
        ->required();
    cmd_vectorize->add_option("--featureset", vec_featureset)->required();
    cmd_vectorize->add_option("--label", vec_label)
        ->check(CLI::IsMember({"benign", "malicious"}));
    cmd_vectorize->add_option("--out", vec_out);
    cmd_vectorize->add_flag("--append", vec_append, "Append rows to an existing CSV");

    // ---- train ----
    auto* cmd_train = app.add_subcommand("train", "Train the random-forest classifier");
    std::string train_vectors;
    std::string train_featureset;
    std::string train_out = "model.json";
    ForestConfig train_cfg;
    cmd_train->add_option("--vectors", train_vectors, "Labeled CSV")->required();
    cmd_train->add_option("--featureset", train_featureset)->required();
    cmd_train->add_option("--out", train_out);
    cmd_train->add_option("--seed", train_cfg.seed);
    cmd_train->add_option("--trees", train_cfg.tree_count);
    cmd_train->add_option("--threshold", train_cfg.threshold);

    // ---- eval ----
    auto* cmd_eval = app.add_subcommand("eval", "Evaluate a model on a labeled CSV");
    std::string eval_model;
    std::string eval_vectors;
    bool eval_json = false;
    cmd_eval->add_option("--model", eval_model)->required();
    cmd_eval->add_option("--vectors", eval_vectors)->required();
    cmd_eval->add_flag("--json", eval_json);

    // ---- scan ----
    auto* cmd_scan = app.add_subcommand("scan", "Scan one package and explain the verdict");
    std::string scan_archive;
    std::string scan_model;
    std::string scan_featureset;
    std::string scan_gt;
    std::uint64_t scan_seed = 0;
    int scan_samples = 5000;
    bool scan_json = false;
    cmd_scan->add_option("archive", scan_archive)->required();
    cmd_scan->add_option("--model", scan_model)->required();
    cmd_scan->add_option("--featureset", scan_featureset)->required();
    cmd_scan->add_option("--ground-truth", scan_gt);
    cmd_scan->add_option("--seed", scan_seed);
    cmd_scan->add_option("--lime-samples", scan_samples);
    cmd_scan->add_flag("--json", scan_json);

    // ---- explain ----
    auto* cmd_explain =
        app.add_subcommand("explain", "Emit the full explanation report for one package");
    std::string explain_archive;
    std::string explain_model;
    std::string explain_featureset;
    std::string explain_gt;
    std::uint64_t explain_seed = 0;
    int explain_samples = 5000;
    bool explain_json = false;
    cmd_explain->add_option("archive", explain_archive)->required();
    cmd_explain->add_option("--model", explain_model)->required();
    cmd_explain->add_option("--featureset", explain_featureset)->required();
    cmd_explain->add_option("--ground-truth", explain_gt)->required();
    cmd_explain->add_option("--seed", explain_seed);
    cmd_explain->add_option("--lime-samples", explain_samples);
    cmd_explain->add_flag("--json", explain_json);

    // ---- attack ----
    auto* cmd_attack = app.add_subcommand("attack", "Adversarial transformations");
    cmd_attack->require_subcommand(1);
    auto* cmd_noise = cmd_attack->add_subcommand("noise", "Gaussian noise on a vector CSV");
    std::string noise_vectors, noise_out;
    double noise_sigma = 0.5;
    std::uint64_t noise_seed = 0;
    cmd_noise->add_option("--vectors", noise_vectors)->required();
    cmd_noise->add_option("--out", noise_out)->required();
    cmd_noise->add_option("--sigma", noise_sigma);
    cmd_noise->add_option("--seed", noise_seed);

    auto* cmd_binarize = cmd_attack->add_subcommand("binarize", "Presence-only vector CSV");
    std::string bin_vectors, bin_out;
    cmd_binarize->add_option("--vectors", bin_vectors)->required();
    cmd_binarize->add_option("--out", bin_out)->required();

    auto* cmd_inject =
        cmd_attack->add_subcommand("inject", "Copy benign source files into a package");
    std::string inject_target, inject_donors, inject_out;
    int inject_alpha = 1, inject_beta = 1;
    std::uint64_t inject_seed = 0;
    cmd_inject->add_option("--target", inject_target, "Package archive or directory")->required();
    cmd_inject->add_option("--donors", inject_donors, "Directory of benign donor packages")
        ->required();
    cmd_inject->add_option("--out-dir", inject_out, "Where the injected package is written")
        ->required();
    cmd_inject->add_option("--alpha", inject_alpha, "Donor packages to draw from (1-3)");
    cmd_inject->add_option("--beta", inject_beta, "Files to inject (1-5)");
    cmd_inject->add_option("--seed", inject_seed);

    // ---- scan-dir ----
    auto* cmd_scan_dir =
        app.add_subcommand("scan-dir", "Batch-scan every package in a directory");
    std::string dir_path;
    std::string dir_model;
    std::string dir_featureset;
    std::string dir_gt;
    std::uint64_t dir_seed = 0;
    int dir_jobs = 0;
    bool dir_json = false;
    cmd_scan_dir->add_option("dir", dir_path)->required();
    cmd_scan_dir->add_option("--model", dir_model)->required();
    cmd_scan_dir->add_option("--featureset", dir_featureset)->required();
    cmd_scan_dir->add_option("--ground-truth", dir_gt);
    cmd_scan_dir->add_option("--seed", dir_seed);
    cmd_scan_dir->add_option("--jobs", dir_jobs, "Worker threads (default: CPU count)");
    cmd_scan_dir->add_flag("--json", dir_json);

    try {
        app.parse(argc, argv);
    } catch (const CLI::CallForHelp& e) {
        return app.exit(e);
    } catch (const CLI::CallForAllHelp& e) {
        return app.exit(e);
    } catch (const CLI::ParseError& e) {
        app.exit(e);
        return 2;
    }

    WarningLog warnings;

    if (cmd_graph->parsed()) {
        const PackageArtifact artifact = unpack_package(graph_archive, {}, &warnings);
        const ApiCallGraph graph = build_call_graph(artifact, &warnings);
        print_warnings(warnings);
        emit(graph_to_json(graph).dump(2), graph_out);
        return 0;
    }

    if (cmd_centrality->parsed()) {
        const PackageArtifact artifact = unpack_package(centrality_archive, {}, &warnings);
        ApiCallGraph graph = build_call_graph(artifact, &warnings);
        if (centrality_undirected) graph = symmetrized(graph);
        const CentralityTable table = adjust_offset(
            compute_centrality(graph, metric_from_name(centrality_metric), centrality_katz));

        std::vector<std::pair<std::string, double>> rows(table.scores.begin(),
                                                         table.scores.end());
        std::sort(rows.begin(), rows.end(), [](const auto& a, const auto& b) {
            if (a.second != b.second) return a.second > b.second;
            return a.first < b.first;
        });
        nlohmann::json scores = nlohmann::json::array();
        for (const auto& [api, score] : rows) {
            scores.push_back({{"api", api}, {"score", score}});
        }
        print_warnings(warnings);
        emit(nlohmann::json{{"metric", centrality_metric},
                            {"adjusted", true},
                            {"scores", std::move(scores)}}
                 .dump(2),
             centrality_out);
        return 0;
    }

    if (cmd_extract->parsed()) {
        const auto paths = list_packages(extract_dir);
        if (paths.empty()) {
            throw ScanError(ErrorCode::EmptyCorpus, "no packages under " + extract_dir);
        }
        const Metric metric = metric_from_name(extract_metric);
        std::vector<CentralityTable> tables;
        for (const fs::path& path : paths) {
            const PackageArtifact artifact = unpack_package(path, {}, &warnings);
            const ApiCallGraph graph = build_call_graph(artifact, &warnings);
            tables.push_back(adjust_offset(compute_centrality(graph, metric, extract_katz)));
            if (artifact.archive_kind != ArchiveKind::directory) {
                std::error_code ec;
                fs::remove_all(artifact.root_path, ec);
            }
        }
        const AggregatedScores agg = aggregate_corpus(tables, static_cast<int>(tables.size()));
        SensitiveFeatureSet featureset = rank_and_select(agg, extract_top_k);

        if (!extract_no_filter) {
            const auto client = make_llm_client(
                resolve_llm_config(extract_llm),
                [](const std::string& line) { std::cerr << "llm: " << line << '\n'; });
            VerdictCache cache;
            if (!extract_cache.empty()) cache.load_file(extract_cache);
            FilterOptions filter_opts;
            filter_opts.concurrency = extract_llm.concurrency;
            try {
                FilterResult result = filter_with_llm(featureset, *client, cache, filter_opts);
                result.featureset.save_file(extract_out);
                result.ground_truth.save_file(extract_gt_out);
                std::cerr << "feature set: " << result.featureset.apis.size() << " of "
                          << featureset.apis.size() << " candidates kept\n";
            } catch (...) {
                if (!extract_cache.empty()) cache.save_file(extract_cache);
                throw;
            }
            if (!extract_cache.empty()) cache.save_file(extract_cache);
        } else {
            featureset.save_file(extract_out);
            std::cerr << "feature set: " << featureset.apis.size()
                      << " candidates kept (unfiltered)\n";
        }
        print_warnings(warnings);
        return 0;
    }

    if (cmd_vectorize->parsed()) {
        const SensitiveFeatureSet featureset = SensitiveFeatureSet::load_file(vec_featureset);
        std::vector<FeatureVector> vectors;
        if (vec_append && fs::exists(vec_out)) {
            auto [existing, header] = load_vectors_csv(vec_out);
            if (header != featureset.apis) {
                throw ScanError(ErrorCode::DimensionMismatch,
                                "existing CSV does not match this feature set");
            }
            vectors = std::move(existing);
        }
        for (const std::string& path : vec_paths) {
            const PackageArtifact artifact = unpack_package(path, {}, &warnings);
            FeatureVector v = vectorize(artifact, featureset, {}, &warnings);
            if (!vec_label.empty()) v.label = label_from_name(vec_label);
            vectors.push_back(std::move(v));
            if (artifact.archive_kind != ArchiveKind::directory) {
                std::error_code ec;
                fs::remove_all(artifact.root_path, ec);
            }
        }
        save_vectors_csv(vectors, featureset.apis, vec_out);
        print_warnings(warnings);
        std::cerr << "wrote " << vectors.size() << " vectors to " << vec_out << '\n';
        return 0;
    }

    if (cmd_train->parsed()) {
        const SensitiveFeatureSet featureset = SensitiveFeatureSet::load_file(train_featureset);
        auto [vectors, header] = load_vectors_csv(train_vectors);
        if (header != featureset.apis) {
            throw ScanError(ErrorCode::DimensionMismatch,
                            "vector CSV does not match the feature set");
        }
        const TrainedClassifier model = train(vectors, train_cfg, featureset.fingerprint());
        model.save_file(train_out);
        std::cerr << "trained " << model.trees.size() << " trees over " << vectors.size()
                  << " samples -> " << train_out << '\n';
        return 0;
    }

    if (cmd_eval->parsed()) {
        const TrainedClassifier model = TrainedClassifier::load_file(eval_model);
        auto [vectors, header] = load_vectors_csv(eval_vectors);
        const Metrics m = evaluate(model, vectors);
        emit(eval_json ? metrics_to_json(m).dump(2) : metrics_to_text(m), "");
        return 0;
    }

    if (cmd_scan->parsed() || cmd_explain->parsed()) {
        const bool is_scan = cmd_scan->parsed();
        const std::string archive = is_scan ? scan_archive : explain_archive;
        const std::string model_path = is_scan ? scan_model : explain_model;
        const std::string fs_path = is_scan ? scan_featureset : explain_featureset;
        const std::string gt_path = is_scan ? scan_gt : explain_gt;
        const std::uint64_t seed = is_scan ? scan_seed : explain_seed;
        const int samples = is_scan ? scan_samples : explain_samples;
        const bool as_json = is_scan ? scan_json : explain_json;

        const TrainedClassifier model = TrainedClassifier::load_file(model_path);
        const SensitiveFeatureSet featureset = SensitiveFeatureSet::load_file(fs_path);
        check_model_binding(model, featureset);
        GroundTruth gt;
        const bool have_gt = !gt_path.empty();
        if (have_gt) gt = GroundTruth::load_file(gt_path);

        const ScanOutcome outcome =
            scan_one(archive, model, featureset, gt, have_gt, seed, samples, &warnings);
        print_warnings(warnings);
        if (!have_gt && outcome.verdict.label == Label::malicious) {
            std::cerr << "note: no --ground-truth file; findings carry no behavior text\n";
        }
        emit(as_json ? report_to_json(outcome.report).dump(2) : report_to_text(outcome.report),
             "");
        return 0;
    }

    if (cmd_noise->parsed()) {
        auto [vectors, header] = load_vectors_csv(noise_vectors);
        save_vectors_csv(add_noise(vectors, noise_sigma, noise_seed), header, noise_out);
        return 0;
    }
    if (cmd_binarize->parsed()) {
        auto [vectors, header] = load_vectors_csv(bin_vectors);
        save_vectors_csv(binarize(vectors), header, bin_out);
        return 0;
    }
    if (cmd_inject->parsed()) {
        const PackageArtifact target = unpack_package(inject_target, {}, &warnings);
        std::vector<PackageArtifact> donors;
        for (const fs::path& path : list_packages(inject_donors)) {
            donors.push_back(unpack_package(path, {}, &warnings));
        }
        const PackageArtifact injected = inject_benign_files(
            target, donors, InjectionParams(inject_alpha, inject_beta, inject_seed));
        for (const SourceFile& file : injected.sources) {
            const fs::path dest = fs::path(inject_out) / file.relative_path;
            fs::create_directories(dest.parent_path());
            std::ofstream out(dest, std::ios::binary);
            if (!out) throw ScanError(ErrorCode::IoError, "cannot write " + dest.string());
            out << file.text;
        }
        print_warnings(warnings);
        std::cerr << "injected package written to " << inject_out << '\n';
        return 0;
    }

    if (cmd_scan_dir->parsed()) {
        const TrainedClassifier model = TrainedClassifier::load_file(dir_model);
        const SensitiveFeatureSet featureset = SensitiveFeatureSet::load_file(dir_featureset);
        check_model_binding(model, featureset);
        GroundTruth gt;
        const bool have_gt = !dir_gt.empty();
        if (have_gt) gt = GroundTruth::load_file(dir_gt);

        const auto paths = list_packages(dir_path);
        struct Row {
            std::string name;
            std::string verdict;
            double score = 0.0;
            std::string error;
        };
        std::vector<Row> rows(paths.size());
        std::atomic<std::size_t> cursor{0};
        const int jobs =
            dir_jobs > 0 ? dir_jobs : std::max(1u, std::thread::hardware_concurrency());
        auto work = [&]() {
            while (true) {
                const std::size_t i = cursor.fetch_add(1);
                if (i >= paths.size()) return;
                Row& row = rows[i];
                row.name = paths[i].filename().string();
                try {
                    WarningLog local;
                    const ScanOutcome outcome = scan_one(paths[i], model, featureset, gt,
                                                         have_gt, dir_seed, 2000, &local);
                    row.name = outcome.package_id;
                    row.verdict = label_name(outcome.verdict.label);
                    row.score = outcome.verdict.score;
                } catch (const std::exception& e) {
                    row.verdict = "error";
                    row.error = e.what();
                }
            }
        };
        std::vector<std::thread> pool;
        for (int j = 0; j < std::min<int>(jobs, static_cast<int>(paths.size())); ++j) {
            pool.emplace_back(work);
        }
        for (std::thread& t : pool) t.join();

        int flagged = 0;
        for (const Row& row : rows) {
            if (row.verdict == "malicious") ++flagged;
        }
        if (dir_json) {
            nlohmann::json out = nlohmann::json::array();
            for (const Row& row : rows) {
                nlohmann::json entry = {{"package", row.name},
                                        {"verdict", row.verdict},
                                        {"score", row.score}};
                if (!row.error.empty()) entry["error"] = row.error;
                out.push_back(std::move(entry));
            }
            emit(nlohmann::json{{"scanned", rows.size()},
                                {"flagged", flagged},
                                {"results", std::move(out)}}
                     .dump(2),
                 "");
        } else {
            std::cout << "package                              verdict    score\n";
            std::cout << "-------                              -------    -----\n";
            for (const Row& row : rows) {
                char line[256];
                std::snprintf(line, sizeof line, "%-36s %-10s %.3f", row.name.c_str(),
                              row.verdict.c_str(), row.score);
                std::cout << line;
                if (!row.error.empty()) std::cout << "  (" << row.error << ")";
                std::cout << '\n';
            }
            std::cout << rows.size() << " scanned, " << flagged << " flagged\n";
        }
        return 0;
    }

    return 2;  // unreachable: require_subcommand guarantees a branch above
}

}  // namespace

int main(int argc, char** argv) {
    try {
        return run(argc, argv);
    } catch (const ScanError& e) {
        std::cerr << "error: " << e.what() << '\n';
        return 1;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << '\n';
        return 1;
    }
}
