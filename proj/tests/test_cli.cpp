#include <doctest.h>

#include <cstdio>
#include <fstream>
#include <sys/wait.h>
#include <unistd.h>

#include <json.hpp>

#include "support/fixtures.hpp"
#include "support/minischema.hpp"
#include "support/synthcorpus.hpp"

using namespace malscan;
using namespace malscan::testing;

namespace {

struct CmdResult {
    int exit_code = -1;
    std::string output;  // stdout only
    std::string errors;  // stderr (warnings, notes)
};

CmdResult run_cli(const std::string& args) {
    static int counter = 0;
    const std::string err_path =
        (std::filesystem::temp_directory_path() /
         ("malscan-cli-err-" + std::to_string(getpid()) + "-" + std::to_string(counter++)))
            .string();
    const std::string cmd = std::string(MALSCAN_CLI_PATH) + " " + args + " 2>" + err_path;
    FILE* pipe = popen(cmd.c_str(), "r");
    REQUIRE(pipe != nullptr);
    CmdResult result;
    char buf[4096];
    std::size_t n = 0;
    while ((n = fread(buf, 1, sizeof buf, pipe)) > 0) {
        result.output.append(buf, n);
    }
    const int status = pclose(pipe);
    result.exit_code = WIFEXITED(status) ? WEXITSTATUS(status) : -1;
    std::ifstream err(err_path);
    result.errors.assign(std::istreambuf_iterator<char>(err), std::istreambuf_iterator<char>());
    std::filesystem::remove(err_path);
    return result;
}

void write_package(const std::filesystem::path& root, const PackageArtifact& artifact) {
    for (const SourceFile& file : artifact.sources) {
        write_file(root / file.relative_path, file.text);
    }
}

std::string q(const std::filesystem::path& p) { return "'" + p.string() + "'"; }

// One CLI workspace shared by the pipeline test cases: a small on-disk corpus,
// feature set, ground truth and model produced through the binary itself.
struct Workspace {
    TempDir dir;
    std::filesystem::path mal_dir;
    std::filesystem::path ben_dir;
    std::filesystem::path fs_path;
    std::filesystem::path gt_path;
    std::filesystem::path model_path;
    std::filesystem::path vectors_path;

    Workspace() {
        mal_dir = dir.path() / "malicious";
        ben_dir = dir.path() / "benign";
        const auto corpus = make_corpus({8, 8, 31});
        for (const auto& pkg : corpus) {
            const auto base = (pkg.malicious ? mal_dir : ben_dir) / pkg.artifact.id();
            write_package(base, pkg.artifact);
        }
        fs_path = dir.path() / "featureset.json";
        gt_path = dir.path() / "ground_truth.json";
        model_path = dir.path() / "model.json";
        vectors_path = dir.path() / "vectors.csv";

        auto extract = run_cli("extract-featureset " + q(mal_dir) +
                               " --metric closeness --top-k 500 --out " + q(fs_path) +
                               " --ground-truth-out " + q(gt_path));
        REQUIRE(extract.exit_code == 0);

        std::string mal_args, ben_args;
        for (const auto& entry : std::filesystem::directory_iterator(mal_dir)) {
            mal_args += " " + q(entry.path());
        }
        for (const auto& entry : std::filesystem::directory_iterator(ben_dir)) {
            ben_args += " " + q(entry.path());
        }
        auto vec_mal = run_cli("vectorize --featureset " + q(fs_path) +
                               " --label malicious --out " + q(vectors_path) + mal_args);
        REQUIRE(vec_mal.exit_code == 0);
        auto vec_ben = run_cli("vectorize --featureset " + q(fs_path) +
                               " --label benign --append --out " + q(vectors_path) + ben_args);
        REQUIRE(vec_ben.exit_code == 0);

        auto trained = run_cli("train --vectors " + q(vectors_path) + " --featureset " +
                               q(fs_path) + " --seed 13 --trees 60 --out " + q(model_path));
        REQUIRE(trained.exit_code == 0);
    }
};

Workspace& workspace() {
    static Workspace ws;
    return ws;
}

}  // namespace

TEST_CASE("unknown subcommands exit with usage code 2") {
    CHECK(run_cli("frobnicate").exit_code == 2);
    CHECK(run_cli("").exit_code == 2);
    CHECK(run_cli("--help").exit_code == 0);
}

TEST_CASE("build-graph emits schema-conforming JSON") {
    TempDir dir;
    const auto archive = dir.path() / "demo-1.0.tar.gz";
    archive::write_tar_gz(archive,
                          {{"setup.py", "import subprocess\ndef run():\n"
                                        "    subprocess.Popen('x')\nrun()\n"}});
    const CmdResult result = run_cli("build-graph " + q(archive));
    REQUIRE(result.exit_code == 0);
    const nlohmann::json graph = nlohmann::json::parse(result.output);
    CHECK(matches_schema(load_schema("graph.schema.json"), graph));
    CHECK(graph["nodes"].size() == 2);
    CHECK(graph["edges"].size() == 1);
}

TEST_CASE("centrality prints adjusted scores in descending order") {
    TempDir dir;
    const auto pkg = dir.path() / "hub-1.0";
    write_file(pkg / "m.py", "def hub():\n    a()\n    b()\n    c()\nhub()\n");
    const CmdResult result = run_cli("centrality " + q(pkg) + " --metric harmonic");
    REQUIRE(result.exit_code == 0);
    const nlohmann::json table = nlohmann::json::parse(result.output);
    CHECK(matches_schema(load_schema("centrality.schema.json"), table));
    const auto& scores = table["scores"];
    REQUIRE(scores.size() == 4);
    CHECK(scores[0]["api"] == "hub");
    for (std::size_t i = 1; i < scores.size(); ++i) {
        CHECK(scores[i - 1]["score"].get<double>() >= scores[i]["score"].get<double>());
        CHECK(scores[i]["score"].get<double>() >= 1.0);  // adjusted
    }
}

TEST_CASE("pipeline artifacts conform to their schemas") {
    Workspace& ws = workspace();
    std::ifstream fs_in(ws.fs_path);
    nlohmann::json fs_json;
    fs_in >> fs_json;
    CHECK(matches_schema(load_schema("featureset.schema.json"), fs_json));
    CHECK(fs_json["filtered"] == true);
    CHECK(fs_json["apis"].size() <= 500);

    std::ifstream gt_in(ws.gt_path);
    nlohmann::json gt_json;
    gt_in >> gt_json;
    CHECK(matches_schema(load_schema("ground_truth.schema.json"), gt_json));
    for (const auto& api : fs_json["apis"]) {
        CHECK(gt_json.contains(api.get<std::string>()));
    }

    std::ifstream model_in(ws.model_path);
    nlohmann::json model_json;
    model_in >> model_json;
    CHECK(matches_schema(load_schema("model.schema.json"), model_json));
}

TEST_CASE("eval reports metrics on the training corpus") {
    Workspace& ws = workspace();
    const CmdResult result = run_cli("eval --model " + q(ws.model_path) + " --vectors " +
                                     q(ws.vectors_path) + " --json");
    REQUIRE(result.exit_code == 0);
    const nlohmann::json metrics = nlohmann::json::parse(result.output);
    CHECK(matches_schema(load_schema("metrics.schema.json"), metrics));
    CHECK(metrics["f1"].get<double>() >= 0.9);
}

TEST_CASE("scan flags a malicious archive and prints the report") {
    Workspace& ws = workspace();
    // Pack one malicious fixture into a tarball to exercise the archive path.
    const auto corpus = make_corpus({8, 0, 31});
    TempDir dir;
    const auto archive = dir.path() / "mal-demo-1.0.tar.gz";
    std::vector<std::pair<std::string, std::string>> entries;
    for (const SourceFile& file : corpus[0].artifact.sources) {
        entries.push_back({file.relative_path, file.text});
    }
    archive::write_tar_gz(archive, entries);

    const CmdResult result =
        run_cli("scan " + q(archive) + " --model " + q(ws.model_path) + " --featureset " +
                q(ws.fs_path) + " --ground-truth " + q(ws.gt_path) + " --seed 7");
    REQUIRE(result.exit_code == 0);
    CHECK(result.output.find("MALICIOUS") != std::string::npos);
    CHECK(result.output.find("subprocess.Popen") != std::string::npos);

    const CmdResult json_result =
        run_cli("scan " + q(archive) + " --model " + q(ws.model_path) + " --featureset " +
                q(ws.fs_path) + " --ground-truth " + q(ws.gt_path) + " --seed 7 --json");
    REQUIRE(json_result.exit_code == 0);
    const nlohmann::json report = nlohmann::json::parse(json_result.output);
    CHECK(matches_schema(load_schema("report.schema.json"), report));
    CHECK(report["verdict"] == "malicious");
    CHECK(!report["findings"].empty());

    // Same seed, same bytes.
    const CmdResult replay =
        run_cli("scan " + q(archive) + " --model " + q(ws.model_path) + " --featureset " +
                q(ws.fs_path) + " --ground-truth " + q(ws.gt_path) + " --seed 7 --json");
    CHECK(replay.output == json_result.output);
}

TEST_CASE("scan passes a benign package") {
    Workspace& ws = workspace();
    std::filesystem::path benign_pkg;
    for (const auto& entry : std::filesystem::directory_iterator(ws.ben_dir)) {
        benign_pkg = entry.path();
        break;
    }
    const CmdResult result = run_cli("scan " + q(benign_pkg) + " --model " + q(ws.model_path) +
                                     " --featureset " + q(ws.fs_path) + " --json");
    REQUIRE(result.exit_code == 0);
    const nlohmann::json report = nlohmann::json::parse(result.output);
    CHECK(report["verdict"] == "benign");
    CHECK(report["findings"].empty());
}

TEST_CASE("scan-dir summarizes a mixed directory") {
    Workspace& ws = workspace();
    TempDir dir;
    const auto mixed = dir.path() / "incoming";
    const auto corpus = make_corpus({2, 3, 77});
    int mal_written = 0;
    for (const auto& pkg : corpus) {
        // 1 malicious + 3 benign packages.
        if (pkg.malicious && ++mal_written > 1) continue;
        write_package(mixed / pkg.artifact.id(), pkg.artifact);
    }
    const CmdResult result =
        run_cli("scan-dir " + q(mixed) + " --model " + q(ws.model_path) + " --featureset " +
                q(ws.fs_path) + " --jobs 2 --json");
    REQUIRE(result.exit_code == 0);
    const nlohmann::json summary = nlohmann::json::parse(result.output);
    CHECK(summary["scanned"] == 4);
    CHECK(summary["flagged"] == 1);
}

TEST_CASE("attack subcommands transform CSVs and packages") {
    Workspace& ws = workspace();
    TempDir dir;
    const auto noisy = dir.path() / "noisy.csv";
    auto noise = run_cli("attack noise --vectors " + q(ws.vectors_path) + " --sigma 0.5 --seed 3 --out " + q(noisy));
    CHECK(noise.exit_code == 0);
    CHECK(std::filesystem::exists(noisy));

    const auto binarized = dir.path() / "bin.csv";
    auto bin = run_cli("attack binarize --vectors " + q(ws.vectors_path) + " --out " + q(binarized));
    CHECK(bin.exit_code == 0);

    std::filesystem::path target;
    for (const auto& entry : std::filesystem::directory_iterator(ws.mal_dir)) {
        target = entry.path();
        break;
    }
    const auto out_dir = dir.path() / "injected";
    auto inject = run_cli("attack inject --target " + q(target) + " --donors " + q(ws.ben_dir) +
                          " --alpha 2 --beta 3 --seed 5 --out-dir " + q(out_dir));
    CHECK(inject.exit_code == 0);
    std::size_t injected_count = 0;
    for (const auto& entry : std::filesystem::recursive_directory_iterator(out_dir)) {
        if (entry.is_regular_file()) ++injected_count;
    }
    std::size_t original_count = 0;
    for (const auto& entry : std::filesystem::recursive_directory_iterator(target)) {
        if (entry.is_regular_file()) ++original_count;
    }
    CHECK(injected_count == original_count + 3);

    // Invalid beta hits the range check and exits with an operational error.
    auto bad = run_cli("attack inject --target " + q(target) + " --donors " + q(ws.ben_dir) +
                       " --alpha 1 --beta 6 --seed 5 --out-dir " + q(dir.path() / "x"));
    CHECK(bad.exit_code == 1);
}

TEST_CASE("scan rejects a model bound to a different feature set") {
    Workspace& ws = workspace();
    TempDir dir;
    // Same APIs, different identity (k differs) -> different fingerprint.
    std::ifstream in(ws.fs_path);
    nlohmann::json fs_json;
    in >> fs_json;
    fs_json["k"] = fs_json["k"].get<int>() + 1;
    const auto other_fs = dir.path() / "other_fs.json";
    std::ofstream out(other_fs);
    out << fs_json.dump();
    out.close();

    std::filesystem::path pkg;
    for (const auto& entry : std::filesystem::directory_iterator(ws.mal_dir)) {
        pkg = entry.path();
        break;
    }
    const CmdResult result = run_cli("scan " + q(pkg) + " --model " + q(ws.model_path) +
                                     " --featureset " + q(other_fs));
    CHECK(result.exit_code == 1);
    CHECK(result.errors.find("FingerprintMismatch") != std::string::npos);
}

TEST_CASE("config file values load and flags override them") {
    TempDir dir;
    const auto pkg = dir.path() / "cfg-demo-1.0";
    write_file(pkg / "m.py", "def hub():\n    leaf()\nhub()\n");

    const auto cfg = dir.path() / "scanner.cfg";
    write_file(cfg, "[centrality]\nmetric=degree\n");

    const CmdResult from_config =
        run_cli("--config " + q(cfg) + " centrality " + q(pkg));
    REQUIRE(from_config.exit_code == 0);
    CHECK(nlohmann::json::parse(from_config.output)["metric"] == "degree");

    const CmdResult overridden =
        run_cli("--config " + q(cfg) + " centrality " + q(pkg) + " --metric harmonic");
    REQUIRE(overridden.exit_code == 0);
    CHECK(nlohmann::json::parse(overridden.output)["metric"] == "harmonic");
}

TEST_CASE("operational failures exit with code 1") {
    const CmdResult result = run_cli("build-graph /nonexistent/path.tar.gz");
    CHECK(result.exit_code == 1);
    CHECK(result.errors.find("error:") != std::string::npos);
}
