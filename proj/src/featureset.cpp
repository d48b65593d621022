#include "malscan/featureset.hpp"

#include <algorithm>
#include <atomic>
#include <cstdint>
#include <cstdio>
#include <cstring>
#include <ctime>
#include <fstream>
#include <mutex>
#include <sstream>
#include <thread>

namespace malscan {

std::string iso8601_utc_now() {
    const std::time_t now = std::time(nullptr);
    std::tm tm_utc{};
    gmtime_r(&now, &tm_utc);
    char buf[32];
    std::strftime(buf, sizeof buf, "%Y-%m-%dT%H:%M:%SZ", &tm_utc);
    return buf;
}

std::string fnv1a_hex(const std::string& payload) {
    std::uint64_t hash = 0xcbf29ce484222325ULL;
    for (unsigned char c : payload) {
        hash ^= c;
        hash *= 0x100000001b3ULL;
    }
    char buf[17];
    std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(hash));
    return buf;
}

namespace {

std::string score_bits(double value) {
    std::uint64_t bits;
    static_assert(sizeof bits == sizeof value);
    std::memcpy(&bits, &value, sizeof bits);
    char buf[17];
    std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(bits));
    return buf;
}

}  // namespace

AggregatedScores aggregate_corpus(const std::vector<CentralityTable>& tables, int corpus_size) {
    if (tables.empty() || corpus_size <= 0) {
        throw ScanError(ErrorCode::EmptyCorpus, "no centrality tables to aggregate");
    }
    if (corpus_size != static_cast<int>(tables.size())) {
        throw ScanError(ErrorCode::InvalidArgument, "corpus_size must equal the table count");
    }
    const Metric metric = tables.front().metric;
    for (const CentralityTable& table : tables) {
        if (table.metric != metric) {
            throw ScanError(ErrorCode::MixedMetrics, "tables mix centrality metrics");
        }
        if (!table.adjusted) {
            throw ScanError(ErrorCode::InvalidArgument, "tables must carry the +1 offset");
        }
    }

    AggregatedScores agg;
    agg.metric = metric;
    agg.corpus_size = corpus_size;
    for (const CentralityTable& table : tables) {
        for (const auto& [api, score] : table.scores) {
            agg.mean_scores[api] += score;
        }
    }
    for (auto& [api, total] : agg.mean_scores) {
        total /= corpus_size;
    }

    std::string payload = std::string(metric_name(metric)) + "|" + std::to_string(corpus_size);
    for (const auto& [api, mean] : agg.mean_scores) {
        payload += "|" + api + "=" + score_bits(mean);
    }
    agg.fingerprint = fnv1a_hex(payload);
    return agg;
}

SensitiveFeatureSet rank_and_select(const AggregatedScores& aggregated, int k) {
    if (k <= 0) throw ScanError(ErrorCode::InvalidArgument, "top-k must be positive");

    std::vector<std::pair<std::string, double>> ranked(aggregated.mean_scores.begin(),
                                                       aggregated.mean_scores.end());
    std::sort(ranked.begin(), ranked.end(), [](const auto& a, const auto& b) {
        if (a.second != b.second) return a.second > b.second;
        return a.first < b.first;
    });

    SensitiveFeatureSet fs;
    fs.metric = aggregated.metric;
    fs.k = k;
    fs.filtered = false;
    fs.created_at = iso8601_utc_now();
    fs.corpus_fingerprint = aggregated.fingerprint;
    const std::size_t keep = std::min<std::size_t>(ranked.size(), static_cast<std::size_t>(k));
    fs.apis.reserve(keep);
    for (std::size_t i = 0; i < keep; ++i) {
        fs.apis.push_back(ranked[i].first);
    }
    return fs;
}

std::string SensitiveFeatureSet::fingerprint() const {
    std::string payload = std::string(metric_name(metric)) + "|" + std::to_string(k) + "|" +
                          (filtered ? "filtered" : "raw") + "|" + corpus_fingerprint;
    for (const std::string& api : apis) {
        payload += "|" + api;
    }
    return fnv1a_hex(payload);
}

nlohmann::json SensitiveFeatureSet::to_json() const {
    return {{"metric", metric_name(metric)}, {"k", k},
            {"filtered", filtered},          {"apis", apis},
            {"corpus_fingerprint", corpus_fingerprint}, {"created_at", created_at}};
}

SensitiveFeatureSet SensitiveFeatureSet::from_json(const nlohmann::json& j) {
    SensitiveFeatureSet fs;
    fs.metric = metric_from_name(j.at("metric").get<std::string>());
    fs.k = j.at("k").get<int>();
    fs.filtered = j.at("filtered").get<bool>();
    fs.apis = j.at("apis").get<std::vector<std::string>>();
    fs.corpus_fingerprint = j.at("corpus_fingerprint").get<std::string>();
    fs.created_at = j.at("created_at").get<std::string>();
    return fs;
}

void SensitiveFeatureSet::save_file(const std::string& path) const {
    std::ofstream out(path);
    if (!out) throw ScanError(ErrorCode::IoError, "cannot write feature set " + path);
    out << to_json().dump(2) << '\n';
}

SensitiveFeatureSet SensitiveFeatureSet::load_file(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw ScanError(ErrorCode::IoError, "cannot open feature set " + path);
    nlohmann::json j;
    try {
        in >> j;
        return from_json(j);
    } catch (const nlohmann::json::exception& e) {
        throw ScanError(ErrorCode::IoError, "bad feature set file: " + std::string(e.what()));
    }
}

nlohmann::json GroundTruth::to_json() const {
    nlohmann::json j = nlohmann::json::object();
    for (const auto& [api, behaviors] : entries) {
        j[api] = behaviors;
    }
    return j;
}

GroundTruth GroundTruth::from_json(const nlohmann::json& j) {
    GroundTruth gt;
    for (const auto& [api, behaviors] : j.items()) {
        gt.entries[api] = behaviors.get<std::vector<std::string>>();
    }
    return gt;
}

void GroundTruth::save_file(const std::string& path) const {
    std::ofstream out(path);
    if (!out) throw ScanError(ErrorCode::IoError, "cannot write ground truth " + path);
    out << to_json().dump(2) << '\n';
}

GroundTruth GroundTruth::load_file(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw ScanError(ErrorCode::IoError, "cannot open ground truth " + path);
    nlohmann::json j;
    try {
        in >> j;
        return from_json(j);
    } catch (const nlohmann::json::exception& e) {
        throw ScanError(ErrorCode::IoError, "bad ground truth file: " + std::string(e.what()));
    }
}

FilterResult filter_with_llm(const SensitiveFeatureSet& featureset, const LlmClient& client,
                             VerdictCache& cache, const FilterOptions& options) {
    if (featureset.filtered) {
        throw ScanError(ErrorCode::InvalidArgument, "feature set is already filtered");
    }

    const std::size_t n = featureset.apis.size();
    std::vector<ApiVerdict> verdicts(n);
    std::vector<char> resolved(n, 0);

    // Cache hits never touch the client.
    std::vector<std::size_t> missing;
    for (std::size_t i = 0; i < n; ++i) {
        if (auto hit = cache.get(featureset.apis[i])) {
            verdicts[i] = std::move(*hit);
            resolved[i] = 1;
        } else {
            missing.push_back(i);
        }
    }

    if (!missing.empty()) {
        const int workers = std::max(1, std::min<int>(options.concurrency,
                                                      static_cast<int>(missing.size())));
        std::atomic<std::size_t> cursor{0};
        std::mutex error_mutex;
        std::string first_error;

        auto work = [&]() {
            while (true) {
                const std::size_t slot = cursor.fetch_add(1);
                if (slot >= missing.size()) return;
                const std::size_t idx = missing[slot];
                try {
                    ApiVerdict verdict = client.classify_api(featureset.apis[idx]);
                    cache.put(verdict);
                    verdicts[idx] = std::move(verdict);
                    resolved[idx] = 1;
                } catch (const std::exception& e) {
                    std::lock_guard lock(error_mutex);
                    if (first_error.empty()) first_error = e.what();
                }
            }
        };
        std::vector<std::thread> pool;
        pool.reserve(static_cast<std::size_t>(workers));
        for (int w = 0; w < workers; ++w) pool.emplace_back(work);
        for (std::thread& t : pool) t.join();

        if (!first_error.empty()) {
            throw ScanError(ErrorCode::LlmUnavailable,
                            "filtering aborted; completed verdicts were cached (" + first_error +
                                ")");
        }
    }

    FilterResult result;
    result.featureset = featureset;
    result.featureset.apis.clear();
    result.featureset.filtered = true;
    result.featureset.created_at = iso8601_utc_now();
    for (std::size_t i = 0; i < n; ++i) {
        if (!resolved[i] || !verdicts[i].is_potentially_malicious) continue;
        result.featureset.apis.push_back(featureset.apis[i]);
        result.ground_truth.entries[featureset.apis[i]] = {verdicts[i].malicious_usage};
    }
    return result;
}

}  // namespace malscan
