#include "malscan/callgraph.hpp"

#include <algorithm>
#include <optional>

#include <json.hpp>

#include "py_scan.hpp"

namespace malscan {

std::string Scope::serialized() const {
    switch (kind) {
        case ScopeKind::Global: return "global";
        case ScopeKind::Function: return "function:" + name;
        case ScopeKind::Method: return "method:" + name;
    }
    return "global";
}

std::string Scope::display() const {
    switch (kind) {
        case ScopeKind::Global: return "global scope";
        case ScopeKind::Function: return "function " + name;
        case ScopeKind::Method: return "method " + name;
    }
    return "global scope";
}

Scope Scope::parse(const std::string& serialized) {
    if (serialized.starts_with("function:")) return function(serialized.substr(9));
    if (serialized.starts_with("method:")) return method(serialized.substr(7));
    return global();
}

namespace {

using py::Token;
using py::TokenKind;

constexpr std::size_t kNoParen = static_cast<std::size_t>(-1);

struct Block {
    int indent;
    bool is_class;
    std::string name;
};

Scope scope_of(const std::vector<Block>& blocks) {
    for (std::size_t i = blocks.size(); i-- > 0;) {
        if (blocks[i].is_class) continue;
        if (i > 0 && blocks[i - 1].is_class) {
            return Scope::method(blocks[i - 1].name + "." + blocks[i].name);
        }
        return Scope::function(blocks[i].name);
    }
    return Scope::global();
}

bool is_op(const Token& t, char c) {
    return t.kind == TokenKind::Op && t.text.size() == 1 && t.text[0] == c;
}

bool is_keyword(const Token& t, const char* word) {
    return t.kind == TokenKind::Keyword && t.text == word;
}

class CallScanner {
public:
    CallScanner(const SourceFile& source, std::vector<Token> tokens)
        : source_(source), tokens_(std::move(tokens)) {
        line_starts_.push_back(0);
        for (std::size_t i = 0; i < source.text.size(); ++i) {
            if (source.text[i] == '\n') line_starts_.push_back(i + 1);
        }
    }

    std::vector<CallSite> run() {
        std::size_t idx = 0;
        while (idx < tokens_.size()) {
            std::size_t nl = idx;
            while (nl < tokens_.size() && tokens_[nl].kind != TokenKind::Newline) ++nl;
            process_line(idx, nl);
            idx = nl + 1;
        }
        flush_pending();
        std::stable_sort(out_.begin(), out_.end(), [](const CallSite& a, const CallSite& b) {
            if (a.line != b.line) return a.line < b.line;
            return a.col < b.col;
        });
        return std::move(out_);
    }

private:
    void process_line(std::size_t a, std::size_t b) {
        if (a >= b) return;
        const int indent = tokens_[a].col;
        while (!blocks_.empty() && indent <= blocks_.back().indent) blocks_.pop_back();
        const Scope scope = scope_of(blocks_);

        if (is_op(tokens_[a], '@')) {
            scan_decorator_line(a, b, scope);
            return;
        }

        std::size_t h = a;
        if (is_keyword(tokens_[h], "async") && h + 1 < b && is_keyword(tokens_[h + 1], "def")) ++h;
        const bool is_def = is_keyword(tokens_[h], "def");
        const bool is_class = is_keyword(tokens_[h], "class");
        if ((is_def || is_class) && h + 1 < b && tokens_[h + 1].kind == TokenKind::Ident) {
            const std::string name = tokens_[h + 1].text;
            const std::size_t sig_paren =
                h + 2 < b && is_op(tokens_[h + 2], '(') ? h + 2 : kNoParen;
            std::size_t colon = b;
            int depth = 0;
            for (std::size_t k = h + 2; k < b; ++k) {
                if (is_op(tokens_[k], '(') || is_op(tokens_[k], '[') || is_op(tokens_[k], '{')) {
                    ++depth;
                } else if (is_op(tokens_[k], ')') || is_op(tokens_[k], ']') ||
                           is_op(tokens_[k], '}')) {
                    --depth;
                } else if (depth == 0 && is_op(tokens_[k], ':')) {
                    colon = k;
                    break;
                }
            }

            // Decorators attach to this definition's line.
            for (CallSite& site : pending_) {
                site.line = tokens_[a].line;
                out_.push_back(std::move(site));
            }
            pending_.clear();

            // Default arguments and base-class expressions evaluate in the
            // enclosing scope at definition time.
            scan_span(a, colon, scope, sig_paren);

            blocks_.push_back({indent, is_class, name});
            if (colon != b && colon + 1 < b) {
                scan_span(colon + 1, b, scope_of(blocks_), kNoParen);  // inline body
                blocks_.pop_back();
            }
            return;
        }

        flush_pending();
        scan_span(a, b, scope, kNoParen);
    }

    void scan_decorator_line(std::size_t a, std::size_t b, const Scope& scope) {
        // Dotted name after '@'; if it is not itself called, it still counts
        // as a call site (the decorator is applied to the definition).
        std::size_t k = a + 1;
        std::string chain;
        const std::size_t chain_tok = k;
        while (k < b && tokens_[k].kind == TokenKind::Ident) {
            if (!chain.empty()) chain += '.';
            chain += tokens_[k].text;
            if (k + 1 < b && is_op(tokens_[k + 1], '.')) {
                k += 2;
                continue;
            }
            ++k;
            break;
        }
        std::vector<CallSite> found;
        scan_span_into(a + 1, b, scope, kNoParen, found);
        if (!chain.empty() && (k >= b || !is_op(tokens_[k], '('))) {
            found.insert(found.begin(),
                         CallSite{chain, source_.relative_path, tokens_[chain_tok].line,
                                  tokens_[chain_tok].col, scope});
        }
        for (auto& site : found) pending_.push_back(std::move(site));
    }

    void flush_pending() {
        for (CallSite& site : pending_) out_.push_back(std::move(site));
        pending_.clear();
    }

    void scan_span(std::size_t a, std::size_t b, const Scope& scope, std::size_t skip_paren) {
        scan_span_into(a, b, scope, skip_paren, out_);
    }

    void scan_span_into(std::size_t a, std::size_t b, const Scope& scope, std::size_t skip_paren,
                        std::vector<CallSite>& out) {
        for (std::size_t k = a; k < b; ++k) {
            const Token& tok = tokens_[k];
            if (tok.kind == TokenKind::String && tok.is_fstring) {
                scan_fstring(tok, scope, out);
                continue;
            }
            if (!is_op(tok, '(') || k == skip_paren || k == a) continue;

            std::size_t j = k - 1;
            if (tokens_[j].kind != TokenKind::Ident) continue;
            std::size_t chain_start = j;
            while (chain_start >= a + 2 && is_op(tokens_[chain_start - 1], '.') &&
                   tokens_[chain_start - 2].kind == TokenKind::Ident) {
                chain_start -= 2;
            }
            std::string name;
            for (std::size_t t = chain_start; t <= j; t += 2) {
                if (!name.empty()) name += '.';
                name += tokens_[t].text;
            }
            out.push_back(CallSite{std::move(name), source_.relative_path,
                                   tokens_[chain_start].line, tokens_[chain_start].col, scope});
        }
    }

    // Calls inside f-string replacement fields. Fragments that fail to scan
    // (e.g. nested same-quote tricks) are skipped.
    void scan_fstring(const Token& tok, const Scope& scope, std::vector<CallSite>& out) {
        if (depth_ >= 4) return;
        const std::string& text = source_.text;
        std::size_t i = tok.body_begin;
        while (i < tok.body_end) {
            if (text[i] == '{' && i + 1 < tok.body_end && text[i + 1] == '{') {
                i += 2;
                continue;
            }
            if (text[i] == '}' && i + 1 < tok.body_end && text[i + 1] == '}') {
                i += 2;
                continue;
            }
            if (text[i] != '{') {
                ++i;
                continue;
            }
            const std::size_t expr_begin = i + 1;
            int brace_depth = 1;
            char in_quote = 0;
            std::size_t j = expr_begin;
            for (; j < tok.body_end && brace_depth > 0; ++j) {
                const char c = text[j];
                if (in_quote != 0) {
                    if (c == '\\') {
                        ++j;
                    } else if (c == in_quote) {
                        in_quote = 0;
                    }
                    continue;
                }
                if (c == '"' || c == '\'') {
                    in_quote = c;
                } else if (c == '{') {
                    ++brace_depth;
                } else if (c == '}') {
                    --brace_depth;
                }
            }
            if (brace_depth != 0) return;  // malformed; give up on this literal
            const std::size_t expr_end = j - 1;
            scan_fragment(expr_begin, expr_end, scope, out);
            i = j;
        }
    }

    void scan_fragment(std::size_t begin, std::size_t end, const Scope& scope,
                       std::vector<CallSite>& out) {
        std::vector<Token> frag;
        try {
            frag = py::tokenize(source_.text.substr(begin, end - begin));
        } catch (const py::PySyntaxError&) {
            return;
        }
        for (Token& t : frag) {
            const std::size_t abs = begin + t.offset;
            const auto it = std::upper_bound(line_starts_.begin(), line_starts_.end(), abs);
            const std::size_t line_idx = static_cast<std::size_t>(it - line_starts_.begin()) - 1;
            t.line = static_cast<int>(line_idx) + 1;
            t.col = static_cast<int>(abs - line_starts_[line_idx]);
            t.offset = abs;
        }
        CallScanner nested(source_, std::move(frag));
        nested.depth_ = depth_ + 1;
        nested.blocks_ = blocks_;
        std::vector<CallSite> sites = nested.run();
        // Nested scanning re-derives scope from indentation, which is
        // meaningless inside a fragment; pin the enclosing scope instead.
        for (CallSite& site : sites) {
            site.scope = scope;
            out.push_back(std::move(site));
        }
    }

    const SourceFile& source_;
    std::vector<Token> tokens_;
    std::vector<std::size_t> line_starts_;
    std::vector<Block> blocks_;
    std::vector<CallSite> pending_;
    std::vector<CallSite> out_;
    int depth_ = 0;
};

}  // namespace

std::vector<CallSite> extract_calls(const SourceFile& source, WarningLog* warnings) {
    std::vector<Token> tokens;
    try {
        tokens = py::tokenize(source.text);
    } catch (const py::PySyntaxError& e) {
        warn(warnings, source.relative_path + ":" + std::to_string(e.line) +
                           ": syntax error (" + e.message + "); file skipped");
        return {};
    }
    return CallScanner(source, std::move(tokens)).run();
}

ApiCallGraph build_call_graph(const PackageArtifact& artifact, WarningLog* warnings) {
    ApiCallGraph graph;
    for (const SourceFile& source : artifact.sources) {
        for (CallSite& site : extract_calls(source, warnings)) {
            graph.nodes.insert(site.api_name);
            if (site.scope.kind != ScopeKind::Global) {
                graph.nodes.insert(site.scope.name);
                graph.edges.insert({site.scope.name, site.api_name});
            }
            graph.call_sites.push_back(std::move(site));
        }
    }
    return graph;
}

ApiCallGraph symmetrized(const ApiCallGraph& graph) {
    ApiCallGraph out = graph;
    for (const auto& [from, to] : graph.edges) {
        out.edges.insert({to, from});
    }
    return out;
}

nlohmann::json graph_to_json(const ApiCallGraph& graph) {
    nlohmann::json j;
    j["nodes"] = graph.nodes;
    auto& edges = j["edges"] = nlohmann::json::array();
    for (const auto& [from, to] : graph.edges) {
        edges.push_back({from, to});
    }
    auto& sites = j["call_sites"] = nlohmann::json::array();
    for (const CallSite& site : graph.call_sites) {
        sites.push_back({{"api", site.api_name},
                         {"file", site.file},
                         {"line", site.line},
                         {"scope", site.scope.serialized()}});
    }
    return j;
}

ApiCallGraph graph_from_json(const nlohmann::json& j) {
    ApiCallGraph graph;
    for (const auto& node : j.at("nodes")) {
        graph.nodes.insert(node.get<std::string>());
    }
    for (const auto& edge : j.at("edges")) {
        graph.edges.insert({edge.at(0).get<std::string>(), edge.at(1).get<std::string>()});
    }
    for (const auto& site : j.at("call_sites")) {
        graph.call_sites.push_back(CallSite{site.at("api").get<std::string>(),
                                            site.at("file").get<std::string>(),
                                            site.at("line").get<int>(), 0,
                                            Scope::parse(site.at("scope").get<std::string>())});
    }
    return graph;
}

}  // namespace malscan
