#include <doctest.h>

#include <atomic>

#include "malscan/featureset.hpp"
#include "support/fixtures.hpp"

using namespace malscan;

namespace {

CentralityTable adjusted_table(Metric metric, std::map<std::string, double> scores) {
    CentralityTable t;
    t.metric = metric;
    t.scores = std::move(scores);
    t.adjusted = true;
    return t;
}

// Counts every call that reaches the underlying classifier.
class CountingMock : public LlmClient {
public:
    ApiVerdict classify_api(const std::string& name) const override {
        ++calls;
        return inner.classify_api(name);
    }
    mutable std::atomic<int> calls{0};
    MockLlmClient inner;
};

class FailingClient : public LlmClient {
public:
    explicit FailingClient(std::string poison) : poison_(std::move(poison)) {}
    ApiVerdict classify_api(const std::string& name) const override {
        if (name == poison_) {
            throw ScanError(ErrorCode::Timeout, "synthetic outage");
        }
        return MockLlmClient().classify_api(name);
    }

private:
    std::string poison_;
};

}  // namespace

TEST_CASE("aggregate_corpus averages over the full corpus size") {
    const std::vector<CentralityTable> tables = {
        adjusted_table(Metric::closeness, {{"x", 2.0}, {"shared", 1.5}}),
        adjusted_table(Metric::closeness, {{"shared", 2.5}}),
    };
    const AggregatedScores agg = aggregate_corpus(tables, 2);
    CHECK(agg.corpus_size == 2);
    CHECK(agg.mean_scores.at("x") == doctest::Approx(1.0));       // absent counts as 0
    CHECK(agg.mean_scores.at("shared") == doctest::Approx(2.0));
    CHECK(agg.mean_scores.size() == 2);  // APIs absent everywhere never appear
    CHECK(!agg.fingerprint.empty());
}

TEST_CASE("aggregate_corpus rejects bad inputs") {
    CHECK_THROWS_AS(aggregate_corpus({}, 0), ScanError);

    std::vector<CentralityTable> mixed = {adjusted_table(Metric::closeness, {{"a", 1.0}}),
                                          adjusted_table(Metric::degree, {{"a", 1.0}})};
    try {
        aggregate_corpus(mixed, 2);
        FAIL("expected MixedMetrics");
    } catch (const ScanError& e) {
        CHECK(e.code() == ErrorCode::MixedMetrics);
    }

    std::vector<CentralityTable> raw = {CentralityTable{Metric::degree, {{"a", 0.5}}, false}};
    CHECK_THROWS_AS(aggregate_corpus(raw, 1), ScanError);
}

TEST_CASE("rank_and_select orders by mean then name") {
    AggregatedScores agg;
    agg.metric = Metric::degree;
    agg.corpus_size = 1;
    agg.mean_scores = {{"a", 1.0}, {"b", 1.0}, {"c", 2.0}};
    agg.fingerprint = "f00";

    const SensitiveFeatureSet top2 = rank_and_select(agg, 2);
    CHECK(top2.apis == std::vector<std::string>{"c", "a"});
    CHECK(top2.k == 2);
    CHECK(!top2.filtered);
    CHECK(top2.corpus_fingerprint == "f00");

    const SensitiveFeatureSet all = rank_and_select(agg, 10);
    CHECK(all.apis == std::vector<std::string>{"c", "a", "b"});

    CHECK_THROWS_AS(rank_and_select(agg, 0), ScanError);
}

TEST_CASE("ranking a hand-built malicious mini corpus surfaces the classic installers") {
    // Two install-hook style packages: "setup" and "exists" called everywhere,
    // subprocess.Popen central, plus one-off noise names.
    std::vector<CentralityTable> tables = {
        adjusted_table(Metric::closeness,
                       {{"setup", 2.5}, {"exists", 2.2}, {"subprocess.Popen", 2.0}, {"noise_a", 1.0}}),
        adjusted_table(Metric::closeness,
                       {{"setup", 2.4}, {"exists", 2.1}, {"subprocess.Popen", 1.9}, {"noise_b", 1.0}}),
    };
    const SensitiveFeatureSet fs = rank_and_select(aggregate_corpus(tables, 2), 3);
    CHECK(fs.apis == std::vector<std::string>{"setup", "exists", "subprocess.Popen"});
}

TEST_CASE("filter_with_llm keeps suspicious APIs in order and builds ground truth") {
    AggregatedScores agg;
    agg.metric = Metric::closeness;
    agg.corpus_size = 1;
    agg.mean_scores = {{"subprocess.Popen", 5.0}, {"print", 4.0}, {"exists", 3.0},
                       {"len", 2.0},              {"b64decode", 1.5}};
    agg.fingerprint = "abc";
    SensitiveFeatureSet fs = rank_and_select(agg, 500);
    REQUIRE(fs.apis.size() == 5);

    MockLlmClient client;
    VerdictCache cache;
    const FilterResult result = filter_with_llm(fs, client, cache);

    CHECK(result.featureset.filtered);
    CHECK(result.featureset.apis ==
          std::vector<std::string>{"subprocess.Popen", "exists", "b64decode"});
    CHECK(result.featureset.apis.size() <= fs.apis.size());
    for (const std::string& api : result.featureset.apis) {
        REQUIRE(result.ground_truth.entries.contains(api));
        CHECK(!result.ground_truth.entries.at(api).empty());
        CHECK(!result.ground_truth.entries.at(api).front().empty());
    }
    CHECK(!result.ground_truth.entries.contains("print"));

    CHECK_THROWS_AS(filter_with_llm(result.featureset, client, cache), ScanError);
}

TEST_CASE("warm cache issues zero client calls") {
    AggregatedScores agg;
    agg.metric = Metric::degree;
    agg.corpus_size = 1;
    agg.mean_scores = {{"exec", 3.0}, {"print", 2.0}, {"socket.socket", 1.0}};
    agg.fingerprint = "beef";
    const SensitiveFeatureSet fs = rank_and_select(agg, 500);

    CountingMock counting;
    VerdictCache cache;
    filter_with_llm(fs, counting, cache);
    CHECK(counting.calls.load() == 3);
    CHECK(cache.size() == 3);

    const FilterResult again = filter_with_llm(fs, counting, cache);
    CHECK(counting.calls.load() == 3);  // all hits
    CHECK(again.featureset.apis == std::vector<std::string>{"exec", "socket.socket"});
}

TEST_CASE("a failing query aborts atomically but keeps completed verdicts") {
    AggregatedScores agg;
    agg.metric = Metric::degree;
    agg.corpus_size = 1;
    agg.mean_scores = {{"exec", 3.0}, {"doomed", 2.0}, {"print", 1.0}};
    agg.fingerprint = "dead";
    const SensitiveFeatureSet fs = rank_and_select(agg, 500);

    FailingClient failing("doomed");
    VerdictCache cache;
    FilterOptions serial;
    serial.concurrency = 1;
    try {
        filter_with_llm(fs, failing, cache, serial);
        FAIL("expected LlmUnavailable");
    } catch (const ScanError& e) {
        CHECK(e.code() == ErrorCode::LlmUnavailable);
    }
    CHECK(cache.size() == 2);  // exec and print resolved before/after the failure
    CHECK(cache.get("doomed") == std::nullopt);

    // A repaired client resumes from the cache.
    CountingMock counting;
    counting.inner = MockLlmClient();
    const FilterResult result = filter_with_llm(fs, counting, cache);
    CHECK(counting.calls.load() == 1);  // only "doomed"
    CHECK(result.featureset.apis == std::vector<std::string>{"exec"});
}

TEST_CASE("feature set and ground truth files round trip") {
    testing::TempDir dir;
    SensitiveFeatureSet fs;
    fs.metric = Metric::katz;
    fs.k = 42;
    fs.apis = {"exec", "os.getenv"};
    fs.filtered = true;
    fs.created_at = "2025-01-01T00:00:00Z";
    fs.corpus_fingerprint = "0123456789abcdef";
    const std::string fs_path = (dir.path() / "fs.json").string();
    fs.save_file(fs_path);
    const SensitiveFeatureSet fs2 = SensitiveFeatureSet::load_file(fs_path);
    CHECK(fs2.metric == Metric::katz);
    CHECK(fs2.k == 42);
    CHECK(fs2.apis == fs.apis);
    CHECK(fs2.filtered);
    CHECK(fs2.fingerprint() == fs.fingerprint());

    GroundTruth gt;
    gt.entries["exec"] = {"runs generated code"};
    gt.entries["os.getenv"] = {"reads secrets", "fingerprints hosts"};
    const std::string gt_path = (dir.path() / "gt.json").string();
    gt.save_file(gt_path);
    const GroundTruth gt2 = GroundTruth::load_file(gt_path);
    CHECK(gt2.entries == gt.entries);
}

TEST_CASE("aggregate-then-rank is deterministic per fingerprint") {
    const std::vector<CentralityTable> tables = {
        adjusted_table(Metric::harmonic, {{"a", 2.0}, {"b", 1.1}}),
        adjusted_table(Metric::harmonic, {{"a", 1.0}, {"c", 3.0}}),
    };
    const AggregatedScores agg1 = aggregate_corpus(tables, 2);
    const AggregatedScores agg2 = aggregate_corpus(tables, 2);
    CHECK(agg1.fingerprint == agg2.fingerprint);
    CHECK(rank_and_select(agg1, 2).apis == rank_and_select(agg2, 2).apis);
}
