#include "gdesigner/designer.hpp"

#include <algorithm>
#include <cmath>

#include "gdesigner/errors.hpp"

namespace gdesigner {

namespace {

Matrix xavier(std::size_t rows, std::size_t cols, Rng& rng) {
    const double bound = std::sqrt(6.0 / static_cast<double>(rows + cols));
    return Matrix::random_uniform(rows, cols, rng, -bound, bound);
}

} // namespace

DesignerParams DesignerParams::init(const ModelDims& dims, std::uint64_t seed) {
    Rng base(seed);
    DesignerParams p;
    Rng r0 = base.child(0);
    p.w_shared = xavier(dims.embed_dim, dims.d_hidden, r0);
    Rng r1 = base.child(1);
    p.w_mu = xavier(dims.d_hidden, dims.d_latent, r1);
    Rng r2 = base.child(2);
    p.w_logsigma = xavier(dims.d_hidden, dims.d_latent, r2);
    Rng r3 = base.child(3);
    p.ffn_w1 = xavier(3 * dims.d_latent, dims.d_ffn, r3);
    p.ffn_b1 = Matrix(1, dims.d_ffn);
    Rng r4 = base.child(4);
    p.ffn_w2 = xavier(dims.d_ffn, 1, r4);
    p.ffn_b2 = 0.0;
    return p;
}

void DesignerParams::check_dims(const ModelDims& dims) const {
    const bool ok = w_shared.rows() == dims.embed_dim && w_shared.cols() == dims.d_hidden &&
                    w_mu.rows() == dims.d_hidden && w_mu.cols() == dims.d_latent &&
                    w_logsigma.rows() == dims.d_hidden &&
                    w_logsigma.cols() == dims.d_latent &&
                    ffn_w1.rows() == 3 * dims.d_latent && ffn_w1.cols() == dims.d_ffn &&
                    ffn_b1.rows() == 1 && ffn_b1.cols() == dims.d_ffn &&
                    ffn_w2.rows() == dims.d_ffn && ffn_w2.cols() == 1;
    if (!ok) throw ConfigError("DesignerParams: dimensions inconsistent with config");
}

bool DesignerParams::all_finite() const {
    return w_shared.all_finite() && w_mu.all_finite() && w_logsigma.all_finite() &&
           ffn_w1.all_finite() && ffn_b1.all_finite() && ffn_w2.all_finite() &&
           std::isfinite(ffn_b2);
}

bool CommTopology::has_edge(std::size_t from, std::size_t to) const {
    for (const auto& e : edges)
        if (e.from == from && e.to == to) return true;
    return false;
}

std::vector<std::size_t> CommTopology::in_neighbors(std::size_t node) const {
    std::vector<std::size_t> in;
    for (const auto& e : edges)
        if (e.to == node) in.push_back(e.from);
    std::sort(in.begin(), in.end());
    return in;
}

std::size_t CommTopology::out_degree(std::size_t node) const {
    std::size_t d = 0;
    for (const auto& e : edges)
        if (e.from == node) ++d;
    return d;
}

Matrix gcn_propagation_matrix(const AdjacencyMatrix& augmented_anchor) {
    const std::size_t n = augmented_anchor.n;
    // Symmetrize, add self-loops, D^{-1/2} (A+I) D^{-1/2}.
    Matrix a(n, n);
    for (std::size_t i = 0; i < n; ++i)
        for (std::size_t j = 0; j < n; ++j)
            a(i, j) = std::max(augmented_anchor.entries(i, j),
                               augmented_anchor.entries(j, i));
    for (std::size_t i = 0; i < n; ++i) a(i, i) = 1.0;
    std::vector<double> inv_sqrt_deg(n, 0.0);
    for (std::size_t i = 0; i < n; ++i) {
        double deg = 0.0;
        for (std::size_t j = 0; j < n; ++j) deg += a(i, j);
        inv_sqrt_deg[i] = 1.0 / std::sqrt(deg);
    }
    for (std::size_t i = 0; i < n; ++i)
        for (std::size_t j = 0; j < n; ++j)
            a(i, j) *= inv_sqrt_deg[i] * inv_sqrt_deg[j];
    return a;
}

GcnForward gcn_encode(const TaskGraph& graph, const DesignerParams& params) {
    const std::size_t n = graph.agent_count();
    const std::size_t d = graph.agent_features.cols();
    if (params.w_shared.rows() != d)
        throw ConfigError("gcn_encode: feature dim " + std::to_string(d) +
                          " does not match w_shared rows " +
                          std::to_string(params.w_shared.rows()));
    if (graph.task_feature.dim() != d)
        throw ConfigError("gcn_encode: task feature dimension mismatch");

    Matrix x(n + 1, d);
    for (std::size_t i = 0; i < n; ++i)
        for (std::size_t j = 0; j < d; ++j) x(i, j) = graph.agent_features(i, j);
    for (std::size_t j = 0; j < d; ++j) x(n, j) = graph.task_feature.values[j];

    GcnForward f;
    f.a_hat = gcn_propagation_matrix(graph.augmented_anchor);
    f.t1 = matmul(f.a_hat, x);
    f.pre_hidden = matmul(f.t1, params.w_shared);
    f.hidden = map(f.pre_hidden, relu);
    f.t2 = matmul(f.a_hat, f.hidden);
    f.mu = matmul(f.t2, params.w_mu);
    f.log_sigma_raw = matmul(f.t2, params.w_logsigma);
    f.log_sigma = clamp(f.log_sigma_raw, -10.0, 10.0);
    return f;
}

LatentState latent_from_noise(const Matrix& mu, const Matrix& log_sigma,
                              const Matrix& noise) {
    if (!mu.same_shape(log_sigma) || !mu.same_shape(noise))
        throw ConfigError("latent_from_noise: shape mismatch");
    LatentState l;
    l.mu = mu;
    l.log_sigma = log_sigma;
    l.noise = noise;
    l.h = mu + hadamard(map(log_sigma, [](double v) { return std::exp(v); }), noise);
    l.task_row_index = mu.rows() - 1;
    return l;
}

LatentState sample_latent(const Matrix& mu, const Matrix& log_sigma, Rng& rng) {
    return latent_from_noise(mu, log_sigma,
                             Matrix::random_gaussian(mu.rows(), mu.cols(), rng));
}

Matrix pair_logits(const LatentState& latent, const DesignerParams& params,
                   Matrix* pre_out) {
    const std::size_t rows = latent.h.rows();
    if (rows < 2) throw ConfigError("pair_logits: need at least one agent + task row");
    const std::size_t n = rows - 1;
    const std::size_t lat = latent.h.cols();
    const std::size_t f = params.ffn_w1.cols();
    if (params.ffn_w1.rows() != 3 * lat)
        throw ConfigError("pair_logits: ffn_w1 rows != 3 * d_latent");

    Matrix logits(n, n);
    Matrix pre(n * n, f);
    const std::ptrdiff_t pairs = static_cast<std::ptrdiff_t>(n * n);
#pragma omp parallel for schedule(static)
    for (std::ptrdiff_t idx = 0; idx < pairs; ++idx) {
        const std::size_t i = static_cast<std::size_t>(idx) / n;
        const std::size_t j = static_cast<std::size_t>(idx) % n;
        if (i == j) continue;
        double score = params.ffn_b2;
        for (std::size_t k = 0; k < f; ++k) {
            double acc = params.ffn_b1(0, k);
            for (std::size_t c = 0; c < lat; ++c) {
                acc += latent.h(i, c) * params.ffn_w1(c, k);
                acc += latent.h(j, c) * params.ffn_w1(lat + c, k);
                acc += latent.h(n, c) * params.ffn_w1(2 * lat + c, k);
            }
            pre(static_cast<std::size_t>(idx), k) = acc;
            if (acc > 0.0) score += acc * params.ffn_w2(k, 0);
        }
        logits(i, j) = score;
    }
    if (pre_out) *pre_out = std::move(pre);
    return logits;
}

double gumbel_sigmoid(double logit_value, double eps, double tau) {
    return sigmoid((logit(eps) + logit_value) / tau);
}

SketchMatrix sketch_from_noise(const LatentState& latent, const DesignerParams& params,
                               double tau, const Matrix& noise, Matrix* pre_out) {
    if (tau <= 0.0) throw ConfigError("sketch_edges: tau must be positive");
    const std::size_t n = latent.h.rows() - 1;
    if (noise.rows() != n || noise.cols() != n)
        throw ConfigError("sketch_from_noise: noise shape mismatch");

    SketchMatrix sk;
    sk.logits = pair_logits(latent, params, pre_out);
    sk.noise = Matrix(n, n);
    sk.s = Matrix(n, n);
    for (std::size_t i = 0; i < n; ++i) {
        for (std::size_t j = 0; j < n; ++j) {
            if (i == j) continue;
            const double eps = std::min(std::max(noise(i, j), 1e-10), 1.0 - 1e-10);
            sk.noise(i, j) = eps;
            sk.s(i, j) = gumbel_sigmoid(sk.logits(i, j), eps, tau);
        }
    }
    return sk;
}

SketchMatrix sketch_edges(const LatentState& latent, const DesignerParams& params,
                          double tau, Rng& rng, bool deterministic, Matrix* pre_out) {
    if (tau <= 0.0) throw ConfigError("sketch_edges: tau must be positive");
    const std::size_t n = latent.h.rows() - 1;
    // Noise is drawn row-major in a fixed order, independent of any
    // parallelism in the logit computation.
    Matrix noise(n, n, 0.5);
    if (!deterministic) {
        for (std::size_t i = 0; i < n; ++i)
            for (std::size_t j = 0; j < n; ++j)
                if (i != j) noise(i, j) = rng.uniform();
    }
    return sketch_from_noise(latent, params, tau, noise, pre_out);
}

std::size_t auto_rank(std::size_t n) { return (n + 1) / 2; }

RefinedMatrix refine_low_rank(const SketchMatrix& sketch, const AdjacencyMatrix& anchor,
                              std::size_t r, double zeta) {
    const std::size_t n = sketch.s.rows();
    if (anchor.n != n) throw ConfigError("refine_low_rank: anchor size mismatch");
    if (r < 1 || r > n) throw ConfigError("refine_low_rank: rank out of range");
    if (zeta < 0.0) throw ConfigError("refine_low_rank: zeta must be >= 0");

    const SvdResult dec = svd(sketch.s);
    RefinedMatrix out;
    out.rank_r = r;
    out.z = Matrix(n, r);
    for (std::size_t i = 0; i < n; ++i)
        for (std::size_t j = 0; j < r; ++j) out.z(i, j) = dec.u(i, j);

    const Matrix m = (sketch.s + anchor.entries) * 0.5;
    out.y = matmul(matmul(out.z.transpose(), m), out.z);
    out.w = svt(out.y, zeta / 2.0);
    out.s_tilde = matmul(matmul(out.z, out.w), out.z.transpose());
    return out;
}

CommTopology break_cycles(std::size_t n, std::vector<CommEdge> candidates) {
    std::sort(candidates.begin(), candidates.end(), [](const CommEdge& a, const CommEdge& b) {
        return a.from != b.from ? a.from < b.from : a.to < b.to;
    });

    // adjacency[i] holds indices into candidates; alive flags mark deletions.
    std::vector<bool> alive(candidates.size(), true);

    auto find_cycle = [&]() -> std::vector<std::size_t> {
        std::vector<std::vector<std::size_t>> adj(n);
        for (std::size_t e = 0; e < candidates.size(); ++e)
            if (alive[e]) adj[candidates[e].from].push_back(e);

        std::vector<int> color(n, 0); // 0 white, 1 on stack, 2 done
        std::vector<std::size_t> edge_stack;

        std::vector<std::size_t> cycle;
        std::function<bool(std::size_t)> dfs = [&](std::size_t u) -> bool {
            color[u] = 1;
            for (std::size_t e : adj[u]) {
                const std::size_t v = candidates[e].to;
                if (color[v] == 1) {
                    // Back edge: collect the stack from v to u, plus e.
                    bool recording = false;
                    for (std::size_t se : edge_stack) {
                        if (candidates[se].from == v) recording = true;
                        if (recording) cycle.push_back(se);
                    }
                    cycle.push_back(e);
                    return true;
                }
                if (color[v] == 0) {
                    edge_stack.push_back(e);
                    if (dfs(v)) return true;
                    edge_stack.pop_back();
                }
            }
            color[u] = 2;
            return false;
        };
        for (std::size_t u = 0; u < n; ++u) {
            if (color[u] == 0) {
                edge_stack.clear();
                if (dfs(u)) return cycle;
            }
        }
        return {};
    };

    while (true) {
        const std::vector<std::size_t> cycle = find_cycle();
        if (cycle.empty()) break;
        std::size_t victim = cycle[0];
        for (std::size_t e : cycle) {
            const CommEdge& a = candidates[e];
            const CommEdge& b = candidates[victim];
            if (a.weight < b.weight ||
                (a.weight == b.weight &&
                 (a.from > b.from || (a.from == b.from && a.to > b.to))))
                victim = e;
        }
        alive[victim] = false;
    }

    CommTopology topo;
    topo.n = n;
    for (std::size_t e = 0; e < candidates.size(); ++e)
        if (alive[e]) topo.edges.push_back(candidates[e]);
    return topo;
}

CommTopology extract_topology(const RefinedMatrix& refined, double threshold) {
    if (threshold <= 0.0 || threshold >= 1.0)
        throw ConfigError("extract_topology: threshold must be in (0,1)");
    const Matrix s = refined.clamped01();
    const std::size_t n = s.rows();
    std::vector<CommEdge> candidates;
    for (std::size_t i = 0; i < n; ++i)
        for (std::size_t j = 0; j < n; ++j)
            if (i != j && s(i, j) > threshold)
                candidates.push_back({i, j, s(i, j)});
    return break_cycles(n, std::move(candidates));
}

DesignResult design(const TaskGraph& graph, const DesignerParams& params,
                    const DesignConfig& config, Rng& rng) {
    DesignResult r;
    r.gcn = gcn_encode(graph, params);
    if (config.deterministic) {
        r.latent = latent_from_noise(r.gcn.mu, r.gcn.log_sigma,
                                     Matrix(r.gcn.mu.rows(), r.gcn.mu.cols()));
    } else {
        r.latent = sample_latent(r.gcn.mu, r.gcn.log_sigma, rng);
    }
    r.sketch = sketch_edges(r.latent, params, config.tau, rng, config.deterministic,
                            &r.ffn_pre);
    const std::size_t n = graph.agent_count();
    const std::size_t rank = config.rank == 0 ? auto_rank(n) : config.rank;
    r.refined = refine_low_rank(r.sketch, graph.anchor, rank, config.zeta);
    r.topology = extract_topology(r.refined, config.threshold);
    return r;
}

} // namespace gdesigner
