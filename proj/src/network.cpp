#include "gdesigner/network.hpp"

#include "gdesigner/errors.hpp"

namespace gdesigner {

AnchorKind anchor_kind_from_string(const std::string& name) {
    if (name == "chain") return AnchorKind::Chain;
    if (name == "star") return AnchorKind::Star;
    if (name == "tree") return AnchorKind::Tree;
    if (name == "complete") return AnchorKind::Complete;
    if (name == "random") return AnchorKind::Random;
    throw ConfigError("unknown anchor kind: " + name);
}

std::string to_string(AnchorKind kind) {
    switch (kind) {
        case AnchorKind::Chain: return "chain";
        case AnchorKind::Star: return "star";
        case AnchorKind::Tree: return "tree";
        case AnchorKind::Complete: return "complete";
        case AnchorKind::Random: return "random";
    }
    return "?";
}

std::size_t AdjacencyMatrix::edge_count() const {
    std::size_t c = 0;
    for (std::size_t i = 0; i < n; ++i)
        for (std::size_t j = 0; j < n; ++j)
            if (entries(i, j) != 0.0) ++c;
    return c;
}

void AdjacencyMatrix::validate() const {
    if (entries.rows() != n || entries.cols() != n)
        throw InvariantError("AdjacencyMatrix: not square n x n");
    for (std::size_t i = 0; i < n; ++i) {
        if (entries(i, i) != 0.0) throw InvariantError("AdjacencyMatrix: self-edge");
        for (std::size_t j = 0; j < n; ++j) {
            const double v = entries(i, j);
            if (v != 0.0 && v != 1.0)
                throw InvariantError("AdjacencyMatrix: entry not in {0,1}");
        }
    }
}

AdjacencyMatrix make_anchor(AnchorKind kind, std::size_t n, Rng& rng) {
    if (n < 1) throw ConfigError("make_anchor: n must be >= 1");
    AdjacencyMatrix a(n);
    switch (kind) {
        case AnchorKind::Chain:
            for (std::size_t i = 0; i + 1 < n; ++i) a.set_edge(i, i + 1);
            break;
        case AnchorKind::Star:
            // Hub directs outward; reporting back happens in aggregation.
            for (std::size_t j = 1; j < n; ++j) a.set_edge(0, j);
            break;
        case AnchorKind::Tree:
            for (std::size_t i = 0; i < n; ++i) {
                if (2 * i + 1 < n) a.set_edge(i, 2 * i + 1);
                if (2 * i + 2 < n) a.set_edge(i, 2 * i + 2);
            }
            break;
        case AnchorKind::Complete:
            for (std::size_t i = 0; i < n; ++i)
                for (std::size_t j = 0; j < n; ++j)
                    if (i != j) a.set_edge(i, j);
            break;
        case AnchorKind::Random:
            for (std::size_t i = 0; i < n; ++i)
                for (std::size_t j = 0; j < n; ++j)
                    if (i != j && rng.bernoulli(0.5)) a.set_edge(i, j);
            break;
    }
    return a;
}

TaskGraph build_task_graph(const std::vector<AgentSpec>& agents,
                           const std::string& query, AnchorKind anchor_kind,
                           Embedder& provider, Rng& rng) {
    if (agents.empty()) throw ConfigError("build_task_graph: no agents");
    const std::size_t n = agents.size();
    const std::size_t d = provider.dim();

    TaskGraph g;
    g.agent_features = Matrix(n, d);
    for (std::size_t i = 0; i < n; ++i) {
        const EmbeddingVector e = encode_agent(agents[i], provider);
        if (e.dim() != d)
            throw ConfigError("build_task_graph: embedding dimension mismatch");
        for (std::size_t j = 0; j < d; ++j) g.agent_features(i, j) = e.values[j];
    }
    g.task_feature = provider.embed(query);
    if (g.task_feature.dim() != d)
        throw ConfigError("build_task_graph: task embedding dimension mismatch");

    g.anchor = make_anchor(anchor_kind, n, rng);
    g.augmented_anchor = AdjacencyMatrix(n + 1);
    for (std::size_t i = 0; i < n; ++i)
        for (std::size_t j = 0; j < n; ++j)
            g.augmented_anchor.entries(i, j) = g.anchor.entries(i, j);
    for (std::size_t i = 0; i < n; ++i) {
        g.augmented_anchor.set_edge(i, n);
        g.augmented_anchor.set_edge(n, i);
    }
    return g;
}

} // namespace gdesigner
