#include "malscan/llm.hpp"

#include <algorithm>
#include <cctype>
#include <chrono>
#include <cstdlib>
#include <fstream>
#include <thread>

#include <httplib.h>
#include <json.hpp>

namespace malscan {

namespace {

std::string lowercase(const std::string& s) {
    std::string out = s;
    std::transform(out.begin(), out.end(), out.begin(),
                   [](unsigned char c) { return std::tolower(c); });
    return out;
}

constexpr const char* kPromptTemplate = R"(Task:
You are a security API auditor. Your task is to determine whether a given Python API can potentially be used for malicious purposes.

Guidelines:
- Consider common attack techniques such as command execution, code obfuscation, data exfiltration, privilege escalation, etc.
- If the API is not typically used in a malicious context, return a neutral evaluation.
- Output must follow the required JSON format.

Code:
<INSERT CODE HERE>

JSON Response:
{
  "api_name": "The name of the API",
  "is_potentially_malicious": true,
  "malicious_usage": "Malicious purposes."
}
)";

constexpr const char* kPromptPlaceholder = "<INSERT CODE HERE>";

}  // namespace

const std::string& default_prompt_template() {
    static const std::string tmpl = kPromptTemplate;
    return tmpl;
}

nlohmann::json verdict_to_json(const ApiVerdict& verdict) {
    return {{"api_name", verdict.api_name},
            {"is_potentially_malicious", verdict.is_potentially_malicious},
            {"malicious_usage", verdict.malicious_usage}};
}

ApiVerdict verdict_from_json(const nlohmann::json& j, const std::string& queried_name) {
    if (!j.is_object() || !j.contains("api_name") || !j.contains("is_potentially_malicious") ||
        !j.contains("malicious_usage")) {
        throw ScanError(ErrorCode::MalformedResponse, "verdict missing required fields");
    }
    if (!j["api_name"].is_string() || !j["is_potentially_malicious"].is_boolean() ||
        !j["malicious_usage"].is_string()) {
        throw ScanError(ErrorCode::MalformedResponse, "verdict field has wrong type");
    }
    ApiVerdict verdict;
    verdict.api_name = j["api_name"].get<std::string>();
    verdict.is_potentially_malicious = j["is_potentially_malicious"].get<bool>();
    verdict.malicious_usage = j["malicious_usage"].get<std::string>();
    if (verdict.api_name != queried_name) {
        throw ScanError(ErrorCode::MalformedResponse,
                        "verdict names '" + verdict.api_name + "', queried '" + queried_name + "'");
    }
    if (verdict.is_potentially_malicious && verdict.malicious_usage.empty()) {
        throw ScanError(ErrorCode::MalformedResponse, "malicious verdict lacks usage text");
    }
    if (!verdict.is_potentially_malicious) {
        verdict.malicious_usage.clear();
    }
    return verdict;
}

LlmClientConfig LlmClientConfig::from_environment() {
    LlmClientConfig config;
    if (const char* url = std::getenv("SCANNER_LLM_URL")) config.endpoint_url = url;
    if (const char* key = std::getenv("SCANNER_LLM_KEY")) config.api_key = key;
    if (const char* model = std::getenv("SCANNER_LLM_MODEL")) config.model_name = model;
    if (!config.endpoint_url.empty()) config.provider = LlmProvider::remote;
    return config;
}

MockRuleset MockRuleset::builtin() {
    // Mirrors data/mock_llm_rules.json; first match wins.
    static const nlohmann::json kRules = nlohmann::json::parse(R"({
      "rules": [
        {"category": "process creation",
         "patterns": ["subprocess", "popen", "os.system", "os.exec", "spawn", "fork",
                      "multiprocessing", "threading.thread", "pty.", "commands."],
         "usage": "Can start external processes or shells, letting a package execute attacker-chosen commands on the host."},
        {"category": "dynamic code execution",
         "patterns": ["exec", "eval", "compile", "__import__", "importlib", "getattr",
                      "globals", "locals", "marshal", "pickle.loads", "code.interact",
                      "ctypes", "windll"],
         "usage": "Can execute or load code assembled at runtime, a common final stage for obfuscated payloads."},
        {"category": "network access",
         "patterns": ["socket", "urlopen", "urllib", "requests", "httplib", "http.client",
                      "urlretrieve", "ftplib", "smtplib", "telnetlib", "paramiko", "wget"],
         "usage": "Can open network connections to download second-stage payloads or exfiltrate collected data."},
        {"category": "data encoding",
         "patterns": ["b64decode", "b64encode", "base64", "decode", "encode", "unhexlify",
                      "fromhex", "hexlify", "zlib", "codecs", "rot13", "decompress"],
         "usage": "Can encode or decode payloads to hide malicious strings and code from static inspection."},
        {"category": "environment access",
         "patterns": ["getenv", "environ", "getcwd", "gethostname", "getlogin", "getuser",
                      "getpass", "platform.", "uname", "expanduser", "whoami"],
         "usage": "Can read host and user environment details used for fingerprinting, sandbox evasion, or credential theft."},
        {"category": "filesystem access",
         "patterns": ["open", "read", "write", "remove", "unlink", "rmtree", "mkdir",
                      "makedirs", "chmod", "chown", "shutil", "listdir", "walk", "glob",
                      "tempfile", "exists", "copyfile", "symlink"],
         "usage": "Can read, create, or destroy files outside the package, including dropping payloads and harvesting documents."},
        {"category": "install hook",
         "patterns": ["setup", "install.run", "install", "cmdclass", "pip", "easy_install",
                      "setuptools"],
         "usage": "Runs during package installation, the execution point most malicious packages hijack."}
      ]
    })");
    return from_json(kRules);
}

MockRuleset MockRuleset::load(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw ScanError(ErrorCode::IoError, "cannot open mock ruleset " + path);
    nlohmann::json j;
    try {
        in >> j;
    } catch (const nlohmann::json::exception& e) {
        throw ScanError(ErrorCode::InvalidArgument, "bad mock ruleset: " + std::string(e.what()));
    }
    return from_json(j);
}

MockRuleset MockRuleset::from_json(const nlohmann::json& j) {
    MockRuleset ruleset;
    for (const auto& rule : j.at("rules")) {
        MockRule r;
        r.category = rule.at("category").get<std::string>();
        r.usage = rule.at("usage").get<std::string>();
        for (const auto& pattern : rule.at("patterns")) {
            r.patterns.push_back(lowercase(pattern.get<std::string>()));
        }
        ruleset.rules_.push_back(std::move(r));
    }
    return ruleset;
}

ApiVerdict MockRuleset::classify(const std::string& name) const {
    const std::string needle = lowercase(name);
    for (const MockRule& rule : rules_) {
        for (const std::string& pattern : rule.patterns) {
            if (needle.find(pattern) != std::string::npos) {
                return {name, true, rule.usage};
            }
        }
    }
    return {name, false, ""};
}

ApiVerdict MockLlmClient::classify_api(const std::string& name) const {
    if (name.empty()) throw ScanError(ErrorCode::InvalidArgument, "empty API name");
    return ruleset_.classify(name);
}

RemoteLlmClient::RemoteLlmClient(LlmClientConfig config, LlmLogger logger)
    : config_(std::move(config)), logger_(std::move(logger)) {
    if (config_.endpoint_url.empty() || config_.api_key.empty()) {
        throw ScanError(ErrorCode::InvalidArgument,
                        "remote provider requires endpoint_url and api_key");
    }
    if (config_.prompt_template.empty()) {
        config_.prompt_template = default_prompt_template();
    }
}

std::string RemoteLlmClient::render_prompt(const std::string& name) const {
    std::string prompt = config_.prompt_template;
    const std::size_t pos = prompt.find(kPromptPlaceholder);
    if (pos == std::string::npos) {
        throw ScanError(ErrorCode::InvalidArgument, "prompt template lacks placeholder");
    }
    prompt.replace(pos, std::string(kPromptPlaceholder).size(), name);
    return prompt;
}

void RemoteLlmClient::log(const std::string& message) const {
    if (!logger_) return;
    // The key must never reach a log line, even embedded in URLs or errors.
    std::string redacted = message;
    if (!config_.api_key.empty()) {
        std::size_t pos = 0;
        while ((pos = redacted.find(config_.api_key, pos)) != std::string::npos) {
            redacted.replace(pos, config_.api_key.size(), "***");
            pos += 3;
        }
    }
    logger_(redacted);
}

ApiVerdict RemoteLlmClient::classify_api(const std::string& name) const {
    if (name.empty()) throw ScanError(ErrorCode::InvalidArgument, "empty API name");

    std::string url = config_.endpoint_url;
    std::string host_part = url;
    std::string path = "/";
    const std::size_t scheme_end = url.find("://");
    const std::size_t path_start = url.find('/', scheme_end == std::string::npos ? 0 : scheme_end + 3);
    if (path_start != std::string::npos) {
        host_part = url.substr(0, path_start);
        path = url.substr(path_start);
    }

    nlohmann::json body = {
        {"model", config_.model_name},
        {"messages", {{{"role", "system"}, {"content", render_prompt(name)}}}},
    };
    if (config_.temperature) body["temperature"] = *config_.temperature;
    const std::string payload = body.dump();

    httplib::Client client(host_part);
    client.set_connection_timeout(std::chrono::milliseconds(
        static_cast<int>(config_.timeout_seconds * 1000)));
    client.set_read_timeout(std::chrono::milliseconds(
        static_cast<int>(config_.timeout_seconds * 1000)));
    httplib::Headers headers = {{"Authorization", "Bearer " + config_.api_key}};

    std::string last_error = "no attempts made";
    ErrorCode last_code = ErrorCode::Timeout;
    for (int attempt = 0; attempt <= config_.max_retries; ++attempt) {
        if (attempt > 0) {
            const auto delay = std::chrono::milliseconds(
                static_cast<long long>(config_.retry_backoff_ms) << (attempt - 1));
            std::this_thread::sleep_for(delay);
        }
        log("query attempt " + std::to_string(attempt + 1) + " for " + name + " -> " + url);
        auto res = client.Post(path, headers, payload, "application/json");
        if (!res) {
            last_error = "transport failure: " + httplib::to_string(res.error());
            last_code = ErrorCode::Timeout;
            log(last_error);
            continue;
        }
        if (res->status == 401 || res->status == 403) {
            log("authentication rejected with status " + std::to_string(res->status));
            throw ScanError(ErrorCode::AuthFailure,
                            "endpoint rejected credentials (HTTP " +
                                std::to_string(res->status) + ")");
        }
        if (res->status < 200 || res->status >= 300) {
            last_error = "HTTP " + std::to_string(res->status);
            last_code = ErrorCode::Timeout;
            log(last_error);
            continue;
        }
        try {
            const nlohmann::json reply = nlohmann::json::parse(res->body);
            const auto& content = reply.at("choices").at(0).at("message").at("content");
            return verdict_from_json(nlohmann::json::parse(content.get<std::string>()), name);
        } catch (const ScanError& e) {
            last_error = e.what();
            last_code = ErrorCode::MalformedResponse;
        } catch (const nlohmann::json::exception& e) {
            last_error = std::string("unparseable reply: ") + e.what();
            last_code = ErrorCode::MalformedResponse;
        }
        log(last_error);
    }
    throw ScanError(last_code, last_error + " (after " + std::to_string(config_.max_retries + 1) +
                                   " attempts)");
}

std::unique_ptr<LlmClient> make_llm_client(const LlmClientConfig& config, LlmLogger logger) {
    if (config.provider == LlmProvider::mock) {
        MockRuleset rules = config.mock_rules_path.empty() ? MockRuleset::builtin()
                                                           : MockRuleset::load(config.mock_rules_path);
        return std::make_unique<MockLlmClient>(std::move(rules));
    }
    return std::make_unique<RemoteLlmClient>(config, std::move(logger));
}

std::optional<ApiVerdict> VerdictCache::get(const std::string& name) const {
    std::lock_guard lock(mutex_);
    const auto it = entries_.find(name);
    if (it == entries_.end()) return std::nullopt;
    return it->second;
}

void VerdictCache::put(const ApiVerdict& verdict) {
    std::lock_guard lock(mutex_);
    entries_[verdict.api_name] = verdict;
}

std::size_t VerdictCache::size() const {
    std::lock_guard lock(mutex_);
    return entries_.size();
}

void VerdictCache::load_file(const std::string& path) {
    std::ifstream in(path);
    if (!in) return;
    nlohmann::json j;
    try {
        in >> j;
    } catch (const nlohmann::json::exception&) {
        throw ScanError(ErrorCode::IoError, "corrupt verdict cache: " + path);
    }
    std::lock_guard lock(mutex_);
    for (const auto& [name, value] : j.items()) {
        entries_[name] = ApiVerdict{value.at("api_name").get<std::string>(),
                                    value.at("is_potentially_malicious").get<bool>(),
                                    value.at("malicious_usage").get<std::string>()};
    }
}

void VerdictCache::save_file(const std::string& path) const {
    const nlohmann::json j = to_json();
    std::ofstream out(path);
    if (!out) throw ScanError(ErrorCode::IoError, "cannot write verdict cache " + path);
    out << j.dump(2) << '\n';
}

nlohmann::json VerdictCache::to_json() const {
    std::lock_guard lock(mutex_);
    nlohmann::json j = nlohmann::json::object();
    for (const auto& [name, verdict] : entries_) {
        j[name] = verdict_to_json(verdict);
    }
    return j;
}

}  // namespace malscan
