#pragma once

#include <functional>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "malscan/errors.hpp"

namespace malscan {

// One per-API maliciousness verdict in the gateway's reply schema.
struct ApiVerdict {
    std::string api_name;
    bool is_potentially_malicious = false;
    std::string malicious_usage;  // empty iff not malicious

    bool operator==(const ApiVerdict&) const = default;
};

nlohmann::json verdict_to_json(const ApiVerdict& verdict);

// Strict schema parse: required keys with the right types, the usage text
// non-empty exactly when the verdict is malicious. Anything else is
// MalformedResponse.
ApiVerdict verdict_from_json(const nlohmann::json& j, const std::string& queried_name);

enum class LlmProvider { mock, remote };

struct LlmClientConfig {
    LlmProvider provider = LlmProvider::mock;
    std::string endpoint_url;  // e.g. http://llm.internal:8080/v1/chat/completions
    std::string api_key;
    std::string model_name;
    double timeout_seconds = 30.0;
    int max_retries = 3;
    int retry_backoff_ms = 100;            // doubled per attempt
    std::optional<double> temperature;     // sent only when set
    std::string prompt_template;           // empty -> built-in template
    std::string mock_rules_path;           // empty -> built-in ruleset

    // SCANNER_LLM_URL / SCANNER_LLM_KEY / SCANNER_LLM_MODEL
    static LlmClientConfig from_environment();
};

using LlmLogger = std::function<void(const std::string&)>;

class LlmClient {
public:
    virtual ~LlmClient() = default;
    virtual ApiVerdict classify_api(const std::string& name) const = 0;
};

// Deterministic offline classifier: first matching category rule wins,
// unmatched names are benign.
struct MockRule {
    std::string category;
    std::vector<std::string> patterns;  // case-insensitive substrings
    std::string usage;
};

class MockRuleset {
public:
    static MockRuleset builtin();
    static MockRuleset load(const std::string& path);
    static MockRuleset from_json(const nlohmann::json& j);

    ApiVerdict classify(const std::string& name) const;
    const std::vector<MockRule>& rules() const { return rules_; }

private:
    std::vector<MockRule> rules_;
};

class MockLlmClient : public LlmClient {
public:
    explicit MockLlmClient(MockRuleset ruleset = MockRuleset::builtin())
        : ruleset_(std::move(ruleset)) {}

    ApiVerdict classify_api(const std::string& name) const override;

private:
    MockRuleset ruleset_;
};

class RemoteLlmClient : public LlmClient {
public:
    explicit RemoteLlmClient(LlmClientConfig config, LlmLogger logger = nullptr);

    ApiVerdict classify_api(const std::string& name) const override;

    // Prompt with the API name interpolated; exposed for wire-format tests.
    std::string render_prompt(const std::string& name) const;

private:
    void log(const std::string& message) const;

    LlmClientConfig config_;
    LlmLogger logger_;
};

std::unique_ptr<LlmClient> make_llm_client(const LlmClientConfig& config,
                                           LlmLogger logger = nullptr);

const std::string& default_prompt_template();

// Thread-safe verdict store keyed by API name; persists as a JSON object so
// interrupted filtering runs resume without re-querying.
class VerdictCache {
public:
    std::optional<ApiVerdict> get(const std::string& name) const;
    void put(const ApiVerdict& verdict);
    std::size_t size() const;

    void load_file(const std::string& path);  // missing file is an empty cache
    void save_file(const std::string& path) const;

    nlohmann::json to_json() const;

private:
    mutable std::mutex mutex_;
    std::map<std::string, ApiVerdict> entries_;
};

}  // namespace malscan
