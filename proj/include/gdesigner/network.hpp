#pragma once

#include <string>
#include <vector>

#include "gdesigner/agents.hpp"
#include "gdesigner/matrix.hpp"
#include "gdesigner/rng.hpp"

namespace gdesigner {

enum class AnchorKind { Chain, Star, Tree, Complete, Random };

AnchorKind anchor_kind_from_string(const std::string& name);
std::string to_string(AnchorKind kind);

/// Square 0/1 adjacency with an empty diagonal.
struct AdjacencyMatrix {
    std::size_t n = 0;
    Matrix entries;

    AdjacencyMatrix() = default;
    explicit AdjacencyMatrix(std::size_t n_) : n(n_), entries(n_, n_) {}

    bool has_edge(std::size_t i, std::size_t j) const { return entries(i, j) != 0.0; }
    void set_edge(std::size_t i, std::size_t j) { entries(i, j) = 1.0; }
    std::size_t edge_count() const;
    void validate() const; // square, zero diagonal, entries in {0,1}
};

/// The encoder input: agent features, the query embedding carried by a
/// virtual task node, and the anchor both with and without that node.
/// The task node sits at index n (last), bidirectionally tied to every agent.
struct TaskGraph {
    Matrix agent_features;            // N x D
    EmbeddingVector task_feature;     // D
    AdjacencyMatrix anchor;           // N x N
    AdjacencyMatrix augmented_anchor; // (N+1) x (N+1)

    std::size_t agent_count() const { return anchor.n; }
    std::size_t task_index() const { return anchor.n; }
};

AdjacencyMatrix make_anchor(AnchorKind kind, std::size_t n, Rng& rng);

TaskGraph build_task_graph(const std::vector<AgentSpec>& agents,
                           const std::string& query, AnchorKind anchor_kind,
                           Embedder& provider, Rng& rng);

} // namespace gdesigner
