#pragma once

#include <map>
#include <string>
#include <vector>

#include <json.hpp>

#include "malscan/centrality.hpp"
#include "malscan/llm.hpp"

namespace malscan {

// Corpus-wide mean of adjusted centrality scores; APIs absent from a package
// contribute 0 to the sum, so rarity suppresses the mean.
struct AggregatedScores {
    Metric metric = Metric::closeness;
    int corpus_size = 0;
    std::map<std::string, double> mean_scores;
    std::string fingerprint;  // of (metric, corpus_size, mean_scores)
};

// Top-K APIs by mean score (descending, lexicographic tie-break), optionally
// pruned to the LLM-confirmed suspicious subset.
struct SensitiveFeatureSet {
    Metric metric = Metric::closeness;
    int k = 500;
    std::vector<std::string> apis;
    bool filtered = false;
    std::string created_at;  // ISO-8601 UTC
    std::string corpus_fingerprint;

    // Identity used to bind trained models to the exact feature set.
    std::string fingerprint() const;
    std::size_t dimension() const { return apis.size(); }

    nlohmann::json to_json() const;
    static SensitiveFeatureSet from_json(const nlohmann::json& j);
    void save_file(const std::string& path) const;
    static SensitiveFeatureSet load_file(const std::string& path);
};

// {api_name -> potential malicious behaviors}; every API kept by filtering
// has a non-empty entry, and reports quote these strings verbatim.
struct GroundTruth {
    std::map<std::string, std::vector<std::string>> entries;

    nlohmann::json to_json() const;
    static GroundTruth from_json(const nlohmann::json& j);
    void save_file(const std::string& path) const;
    static GroundTruth load_file(const std::string& path);
};

AggregatedScores aggregate_corpus(const std::vector<CentralityTable>& tables, int corpus_size);

SensitiveFeatureSet rank_and_select(const AggregatedScores& aggregated, int k = 500);

struct FilterOptions {
    int concurrency = 4;
};

struct FilterResult {
    SensitiveFeatureSet featureset;
    GroundTruth ground_truth;
};

// One verdict per API (cache hits issue no query); keeps the suspicious APIs
// in their ranked order. A failed query aborts the whole operation but leaves
// completed verdicts in the cache.
FilterResult filter_with_llm(const SensitiveFeatureSet& featureset, const LlmClient& client,
                             VerdictCache& cache, const FilterOptions& options = {});

std::string iso8601_utc_now();
std::string fnv1a_hex(const std::string& payload);

}  // namespace malscan
