#pragma once

#include <compare>
#include <set>
#include <string>
#include <utility>
#include <vector>

#include <json.hpp>

#include "malscan/errors.hpp"
#include "malscan/ingest.hpp"

namespace malscan {

enum class ScopeKind { Global, Function, Method };

struct Scope {
    ScopeKind kind = ScopeKind::Global;
    std::string name;  // "f" for functions, "Class.f" for methods, empty for global

    bool operator==(const Scope&) const = default;

    // "global" | "function:f" | "method:Class.f"
    std::string serialized() const;
    // "global scope" | "function f" | "method Class.f"
    std::string display() const;

    static Scope global() { return {}; }
    static Scope function(std::string fn) { return {ScopeKind::Function, std::move(fn)}; }
    static Scope method(std::string qualified) { return {ScopeKind::Method, std::move(qualified)}; }
    static Scope parse(const std::string& serialized);
};

// One call expression as written: the dotted text of the call target, its
// location, and the innermost enclosing function/method (or global).
struct CallSite {
    std::string api_name;
    std::string file;
    int line = 0;  // 1-based
    int col = 0;   // 0-based; tie-break within a line
    Scope scope;

    bool operator==(const CallSite&) const = default;
};

// Merged per-package graph. Nodes are call-expression names plus enclosing
// function/method names; an edge runs from the enclosing callable to each
// name it calls. Global-scope calls contribute isolated callee nodes.
struct ApiCallGraph {
    std::set<std::string> nodes;
    std::set<std::pair<std::string, std::string>> edges;
    std::vector<CallSite> call_sites;

    bool has_edge(const std::string& from, const std::string& to) const {
        return edges.contains({from, to});
    }
};

// Call expressions of one file in source order (line, then column). A file
// that fails to scan contributes zero call sites and a warning.
std::vector<CallSite> extract_calls(const SourceFile& source, WarningLog* warnings = nullptr);

ApiCallGraph build_call_graph(const PackageArtifact& artifact, WarningLog* warnings = nullptr);

// Adds the reverse of every edge; used by the undirected reading of the
// distance metrics.
ApiCallGraph symmetrized(const ApiCallGraph& graph);

nlohmann::json graph_to_json(const ApiCallGraph& graph);
ApiCallGraph graph_from_json(const nlohmann::json& j);

}  // namespace malscan
