#include "malscan/centrality.hpp"

#include <algorithm>
#include <cmath>
#include <deque>
#include <limits>
#include <vector>

namespace malscan {

const char* metric_name(Metric metric) {
    switch (metric) {
        case Metric::closeness: return "closeness";
        case Metric::degree: return "degree";
        case Metric::katz: return "katz";
        case Metric::harmonic: return "harmonic";
    }
    return "closeness";
}

Metric metric_from_name(const std::string& name) {
    if (name == "closeness") return Metric::closeness;
    if (name == "degree") return Metric::degree;
    if (name == "katz") return Metric::katz;
    if (name == "harmonic") return Metric::harmonic;
    throw ScanError(ErrorCode::InvalidArgument, "unknown centrality metric: " + name);
}

namespace {

// Indexed view of the graph: node ids in sorted-name order, adjacency lists
// with duplicate edges already collapsed by the edge set.
struct IndexedGraph {
    std::vector<std::string> names;
    std::vector<std::vector<int>> out;
    std::vector<std::vector<int>> in;

    explicit IndexedGraph(const ApiCallGraph& graph) {
        names.assign(graph.nodes.begin(), graph.nodes.end());
        std::map<std::string, int> index;
        for (int i = 0; i < static_cast<int>(names.size()); ++i) index[names[i]] = i;
        out.resize(names.size());
        in.resize(names.size());
        for (const auto& [from, to] : graph.edges) {
            const int u = index.at(from);
            const int v = index.at(to);
            out[u].push_back(v);
            in[v].push_back(u);
        }
    }

    int size() const { return static_cast<int>(names.size()); }
};

std::vector<int> bfs_distances(const IndexedGraph& g, int start) {
    std::vector<int> dist(static_cast<std::size_t>(g.size()), -1);
    std::deque<int> queue{start};
    dist[static_cast<std::size_t>(start)] = 0;
    while (!queue.empty()) {
        const int u = queue.front();
        queue.pop_front();
        for (int v : g.out[static_cast<std::size_t>(u)]) {
            if (dist[static_cast<std::size_t>(v)] < 0) {
                dist[static_cast<std::size_t>(v)] = dist[static_cast<std::size_t>(u)] + 1;
                queue.push_back(v);
            }
        }
    }
    return dist;
}

CentralityTable make_table(Metric metric, const IndexedGraph& g, const std::vector<double>& x) {
    CentralityTable table;
    table.metric = metric;
    for (int i = 0; i < g.size(); ++i) {
        table.scores[g.names[static_cast<std::size_t>(i)]] = x[static_cast<std::size_t>(i)];
    }
    return table;
}

}  // namespace

CentralityTable degree_centrality(const ApiCallGraph& graph) {
    const IndexedGraph g(graph);
    const int n = g.size();
    std::vector<double> x(static_cast<std::size_t>(n), 0.0);
    if (n > 1) {
        for (int i = 0; i < n; ++i) {
            const auto deg = g.out[static_cast<std::size_t>(i)].size() +
                             g.in[static_cast<std::size_t>(i)].size();
            x[static_cast<std::size_t>(i)] = static_cast<double>(deg) / (n - 1);
        }
    }
    return make_table(Metric::degree, g, x);
}

CentralityTable closeness_centrality(const ApiCallGraph& graph) {
    const IndexedGraph g(graph);
    const int n = g.size();
    std::vector<double> x(static_cast<std::size_t>(n), 0.0);
    for (int v = 0; v < n; ++v) {
        const auto dist = bfs_distances(g, v);
        long long sum = 0;
        int reachable = 0;
        for (int d : dist) {
            if (d >= 0) {
                ++reachable;
                sum += d;
            }
        }
        if (reachable > 1 && sum > 0) {
            const double r1 = reachable - 1;
            x[static_cast<std::size_t>(v)] =
                (r1 / static_cast<double>(sum)) * (r1 / (n - 1));
        }
    }
    return make_table(Metric::closeness, g, x);
}

CentralityTable harmonic_centrality(const ApiCallGraph& graph) {
    const IndexedGraph g(graph);
    const int n = g.size();
    std::vector<double> x(static_cast<std::size_t>(n), 0.0);
    for (int v = 0; v < n; ++v) {
        const auto dist = bfs_distances(g, v);
        double sum = 0.0;
        for (int i = 0; i < n; ++i) {
            const int d = dist[static_cast<std::size_t>(i)];
            if (i != v && d > 0) sum += 1.0 / d;
        }
        x[static_cast<std::size_t>(v)] = sum;
    }
    return make_table(Metric::harmonic, g, x);
}

CentralityTable katz_centrality(const ApiCallGraph& graph, const KatzParams& params) {
    if (params.alpha <= 0.0 || params.alpha >= 1.0) {
        throw ScanError(ErrorCode::InvalidArgument, "katz alpha must lie in (0,1)");
    }
    if (params.beta <= 0.0 || params.tolerance <= 0.0 || params.max_iterations <= 0) {
        throw ScanError(ErrorCode::InvalidArgument, "invalid katz parameters");
    }
    const IndexedGraph g(graph);
    const std::size_t n = static_cast<std::size_t>(g.size());
    std::vector<double> x(n, params.beta);
    std::vector<double> next(n, 0.0);
    double prev_change = std::numeric_limits<double>::infinity();
    int growth_streak = 0;
    for (int iter = 0; iter < params.max_iterations; ++iter) {
        double change = 0.0;
        for (std::size_t v = 0; v < n; ++v) {
            double acc = 0.0;
            for (int u : g.in[v]) acc += x[static_cast<std::size_t>(u)];
            next[v] = params.alpha * acc + params.beta;
            change = std::max(change, std::abs(next[v] - x[v]));
        }
        x.swap(next);
        if (change < params.tolerance) {
            return make_table(Metric::katz, g, x);
        }
        if (!std::isfinite(change) || change > prev_change) {
            if (++growth_streak >= 10 || !std::isfinite(change)) {
                throw ScanError(ErrorCode::KatzDiverged,
                                "iteration diverging; alpha too large for this graph");
            }
        } else {
            growth_streak = 0;
        }
        prev_change = change;
    }
    throw ScanError(ErrorCode::KatzDiverged, "no convergence within max_iterations");
}

CentralityTable adjust_offset(const CentralityTable& table) {
    if (table.adjusted) {
        throw ScanError(ErrorCode::AlreadyAdjusted, "centrality table already carries the offset");
    }
    CentralityTable out;
    out.metric = table.metric;
    out.adjusted = true;
    for (const auto& [name, score] : table.scores) {
        out.scores[name] = score + 1.0;
    }
    return out;
}

CentralityTable compute_centrality(const ApiCallGraph& graph, Metric metric,
                                   const KatzParams& katz) {
    switch (metric) {
        case Metric::closeness: return closeness_centrality(graph);
        case Metric::degree: return degree_centrality(graph);
        case Metric::katz: return katz_centrality(graph, katz);
        case Metric::harmonic: return harmonic_centrality(graph);
    }
    throw ScanError(ErrorCode::InvalidArgument, "unknown metric");
}

}  // namespace malscan
