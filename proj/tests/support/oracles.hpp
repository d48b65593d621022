#pragma once

// Brute-force reference implementations the centrality suite is checked
// against. Deliberately independent of the library's BFS/iteration code
// paths: distances come from Floyd-Warshall on a dense matrix, Katz from a
// dense linear solve.

#include <cstdint>
#include <map>
#include <string>
#include <vector>

#include "malscan/callgraph.hpp"

namespace malscan::testing {

struct DenseGraph {
    std::vector<std::string> names;                 // sorted
    std::vector<std::vector<int>> adjacency;        // adjacency[u][v] = 1 iff u->v
};

DenseGraph to_dense(const ApiCallGraph& graph);

// Seeded Erdos-Renyi style directed graph over <= max_nodes nodes.
ApiCallGraph random_graph(std::uint64_t seed, int max_nodes = 12);

// All-pairs hop distances, -1 when unreachable.
std::vector<std::vector<int>> floyd_warshall(const DenseGraph& g);

std::map<std::string, double> ref_degree(const DenseGraph& g);
std::map<std::string, double> ref_closeness(const DenseGraph& g);
std::map<std::string, double> ref_harmonic(const DenseGraph& g);

// Solves (I - alpha * A^T) x = beta * 1 by Gaussian elimination.
std::map<std::string, double> ref_katz(const DenseGraph& g, double alpha, double beta);

}  // namespace malscan::testing
