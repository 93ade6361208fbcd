#pragma once

#include <cstddef>
#include <vector>

#include "gdesigner/matrix.hpp"
#include "gdesigner/network.hpp"
#include "gdesigner/rng.hpp"
#include "gdesigner/svd.hpp"

namespace gdesigner {

struct ModelDims {
    std::size_t embed_dim = 384;
    std::size_t d_hidden = 64;
    std::size_t d_latent = 32;
    std::size_t d_ffn = 128;
};

/// Encoder weights (two-layer GCN with a shared first layer feeding separate
/// mean / log-sigma heads) plus the pairwise edge-scoring FFN of the decoder.
struct DesignerParams {
    Matrix w_shared;    // D x d_hidden
    Matrix w_mu;        // d_hidden x d_latent
    Matrix w_logsigma;  // d_hidden x d_latent
    Matrix ffn_w1;      // 3*d_latent x d_ffn
    Matrix ffn_b1;      // 1 x d_ffn
    Matrix ffn_w2;      // d_ffn x 1
    double ffn_b2 = 0.0;

    static DesignerParams init(const ModelDims& dims, std::uint64_t seed);
    void check_dims(const ModelDims& dims) const;
    bool all_finite() const;
};

struct DesignConfig {
    double tau = 1e-2;
    double zeta = 1e-1;
    double threshold = 0.5;
    std::size_t rank = 0; // 0 = auto: ceil(N/2)
    bool deterministic = false;
};

/// GCN forward pass with the intermediates the trainer's backprop needs.
struct GcnForward {
    Matrix a_hat;          // (N+1) x (N+1) normalized propagation matrix
    Matrix t1;             // a_hat * X
    Matrix pre_hidden;     // t1 * w_shared (pre-ReLU)
    Matrix hidden;         // relu(pre_hidden)
    Matrix t2;             // a_hat * hidden
    Matrix mu;             // (N+1) x d_latent
    Matrix log_sigma_raw;  // before clamping
    Matrix log_sigma;      // clamped to [-10, 10]
};

struct LatentState {
    Matrix mu;
    Matrix log_sigma;
    Matrix noise; // recorded gaussian draw (zeros in deterministic mode)
    Matrix h;     // mu + exp(log_sigma) .* noise
    std::size_t task_row_index = 0;
};

struct SketchMatrix {
    Matrix s;      // N x N in [0,1], zero diagonal
    Matrix logits; // the FFN pair scores
    Matrix noise;  // the recorded uniform draws (0.5 in deterministic mode)
};

struct RefinedMatrix {
    Matrix s_tilde; // Z * W * Z^T (unclamped; clamp with clamped01())
    Matrix z;       // N x r, orthonormal columns
    Matrix w;       // r x r
    Matrix y;       // Z^T * (S + A)/2 * Z, the pre-shrinkage core
    std::size_t rank_r = 0;

    Matrix clamped01() const { return clamp(s_tilde, 0.0, 1.0); }
};

struct CommEdge {
    std::size_t from = 0;
    std::size_t to = 0;
    double weight = 0.0;
};

struct CommTopology {
    std::size_t n = 0;
    std::vector<CommEdge> edges; // sorted by (from, to), no duplicates

    bool has_edge(std::size_t from, std::size_t to) const;
    std::vector<std::size_t> in_neighbors(std::size_t node) const;
    std::size_t out_degree(std::size_t node) const;
};

Matrix gcn_propagation_matrix(const AdjacencyMatrix& augmented_anchor);

GcnForward gcn_encode(const TaskGraph& graph, const DesignerParams& params);

LatentState sample_latent(const Matrix& mu, const Matrix& log_sigma, Rng& rng);
LatentState latent_from_noise(const Matrix& mu, const Matrix& log_sigma,
                              const Matrix& noise);

/// Pair scores for every ordered agent pair (i,j), i != j, conditioned on the
/// task latent: logits(i,j) = FFN([h_i, h_j, h_task]). pre_out, when given,
/// receives the pre-ReLU hidden activations (row i*N+j) for backprop.
Matrix pair_logits(const LatentState& latent, const DesignerParams& params,
                   Matrix* pre_out = nullptr);

SketchMatrix sketch_edges(const LatentState& latent, const DesignerParams& params,
                          double tau, Rng& rng, bool deterministic,
                          Matrix* pre_out = nullptr);

/// Sketch with externally supplied uniform draws (0.5 everywhere reproduces
/// deterministic mode). Used to replay an episode at nearby parameters.
SketchMatrix sketch_from_noise(const LatentState& latent, const DesignerParams& params,
                               double tau, const Matrix& noise,
                               Matrix* pre_out = nullptr);

/// Same noise/logit transform applied to one entry.
double gumbel_sigmoid(double logit_value, double eps, double tau);

std::size_t auto_rank(std::size_t n);

RefinedMatrix refine_low_rank(const SketchMatrix& sketch, const AdjacencyMatrix& anchor,
                              std::size_t r, double zeta);

/// Deterministic DAG extraction from weighted candidate edges: repeatedly
/// locate a directed cycle and delete its minimum-weight edge (ties: the
/// lexicographically largest (from, to) pair).
CommTopology break_cycles(std::size_t n, std::vector<CommEdge> candidates);

CommTopology extract_topology(const RefinedMatrix& refined, double threshold);

struct DesignResult {
    GcnForward gcn;
    LatentState latent;
    SketchMatrix sketch;
    Matrix ffn_pre; // N*N x d_ffn
    RefinedMatrix refined;
    CommTopology topology;
};

DesignResult design(const TaskGraph& graph, const DesignerParams& params,
                    const DesignConfig& config, Rng& rng);

} // namespace gdesigner
