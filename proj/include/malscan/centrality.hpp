#pragma once

#include <map>
#include <string>

#include "malscan/callgraph.hpp"
#include "malscan/errors.hpp"

namespace malscan {

enum class Metric { closeness, degree, katz, harmonic };

const char* metric_name(Metric metric);
Metric metric_from_name(const std::string& name);

// Per-node scores of one graph under one metric. Unadjusted scores are ≥ 0;
// after adjust_offset every score is ≥ 1 so presence alone registers.
struct CentralityTable {
    Metric metric = Metric::closeness;
    std::map<std::string, double> scores;
    bool adjusted = false;
};

struct KatzParams {
    double alpha = 0.1;
    double beta = 1.0;
    double tolerance = 1e-6;
    int max_iterations = 1000;
};

// deg(v)/(N-1) with deg = in + out over collapsed edges; 0 when N <= 1.
CentralityTable degree_centrality(const ApiCallGraph& graph);

// Directed hop distances from v, reachability-scaled:
// ((R-1)/sum_d) * ((R-1)/(N-1)) with R = nodes reachable from v incl. v.
CentralityTable closeness_centrality(const ApiCallGraph& graph);

// Sum of 1/d(v,u) over nodes reachable from v.
CentralityTable harmonic_centrality(const ApiCallGraph& graph);

// Fixed point of x = alpha * A^T x + beta * 1 (a node's score grows with its
// callers' scores), solved by damped iteration without normalization.
// Throws KatzDiverged when alpha exceeds what the graph's spectral radius
// admits.
CentralityTable katz_centrality(const ApiCallGraph& graph, const KatzParams& params = {});

// Adds exactly 1.0 to every score so isolated nodes stay visible downstream.
CentralityTable adjust_offset(const CentralityTable& table);

CentralityTable compute_centrality(const ApiCallGraph& graph, Metric metric,
                                   const KatzParams& katz = {});

}  // namespace malscan
