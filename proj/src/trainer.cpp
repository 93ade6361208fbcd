#include "gdesigner/trainer.hpp"

#include <cmath>
#include <cstdio>
#include <fstream>
#include <sstream>

#include <nlohmann/json.hpp>

#include "gdesigner/errors.hpp"
#include "gdesigner/svd.hpp"

namespace gdesigner {

void TrainConfig::validate() const {
    if (m_samples < 1) throw ConfigError("train config: m_samples must be >= 1");
    if (k_rounds < 1) throw ConfigError("train config: k_rounds must be >= 1");
    if (tau <= 0.0) throw ConfigError("train config: tau must be positive");
    if (zeta < 0.0) throw ConfigError("train config: zeta must be >= 0");
    if (threshold <= 0.0 || threshold >= 1.0)
        throw ConfigError("train config: threshold must be in (0,1)");
    if (learning_rate <= 0.0) throw ConfigError("train config: learning rate <= 0");
}

std::pair<double, double> compute_losses(const SketchMatrix& sketch,
                                         const RefinedMatrix& refined,
                                         const AdjacencyMatrix& anchor, double zeta) {
    const Matrix ds = sketch.s - refined.s_tilde;
    const Matrix da = anchor.entries - refined.s_tilde;
    const double l_anchor = 0.5 * dot(ds, ds) + 0.5 * dot(da, da);
    const double l_sparse = zeta * nuclear_norm(refined.w);
    return {l_anchor, l_sparse};
}

namespace {

constexpr double kProbClamp = 1e-6;
// Replay temperature of the step surrogate. At the sampling temperature the
// gumbel-sigmoid saturates and its derivative underflows; temperature 1
// keeps the same frozen draws on a smooth path.
constexpr double kReplayTau = 1.0;

struct PassData {
    GcnForward gcn;
    LatentState latent;
    SketchMatrix sketch;
    Matrix ffn_pre;
};

PassData run_pass(const TaskGraph& graph, const DesignerParams& p, double tau,
                  const Matrix& latent_noise, const Matrix& sketch_noise) {
    PassData pass;
    pass.gcn = gcn_encode(graph, p);
    pass.latent = latent_from_noise(pass.gcn.mu, pass.gcn.log_sigma, latent_noise);
    pass.sketch = sketch_from_noise(pass.latent, p, tau, sketch_noise, &pass.ffn_pre);
    return pass;
}

double masked_log_prob(const Matrix& mask, const Matrix& probs) {
    const std::size_t n = mask.rows();
    double lp = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
        for (std::size_t j = 0; j < n; ++j) {
            if (i == j) continue;
            lp += mask(i, j) != 0.0 ? std::log(probs(i, j)) : std::log(1.0 - probs(i, j));
        }
    }
    return lp;
}

ParamGrads zero_grads(const DesignerParams& p) {
    ParamGrads g;
    g.w_shared = Matrix(p.w_shared.rows(), p.w_shared.cols());
    g.w_mu = Matrix(p.w_mu.rows(), p.w_mu.cols());
    g.w_logsigma = Matrix(p.w_logsigma.rows(), p.w_logsigma.cols());
    g.ffn_w1 = Matrix(p.ffn_w1.rows(), p.ffn_w1.cols());
    g.ffn_b1 = Matrix(p.ffn_b1.rows(), p.ffn_b1.cols());
    g.ffn_w2 = Matrix(p.ffn_w2.rows(), p.ffn_w2.cols());
    g.ffn_b2 = 0.0;
    return g;
}

// Backpropagation of dLoss/dS through the sketch sigmoid, the pairwise FFN,
// the reparameterized latent, and both GCN layers. Refinement factors are
// constants of the surrogate, so the chain stops cleanly at S.
void backprop_pass(const TaskGraph& graph, const DesignerParams& p, const PassData& pass,
                   double tau, const Matrix& g_s, ParamGrads& grads) {
    const std::size_t n = graph.agent_count();
    const std::size_t lat = pass.latent.h.cols();
    const std::size_t f = p.ffn_w1.cols();

    Matrix g_h(n + 1, lat);

    for (std::size_t i = 0; i < n; ++i) {
        for (std::size_t j = 0; j < n; ++j) {
            if (i == j) continue;
            const double s = pass.sketch.s(i, j);
            const double g_logit = g_s(i, j) * s * (1.0 - s) / tau;
            if (g_logit == 0.0) continue;
            const std::size_t idx = i * n + j;
            grads.ffn_b2 += g_logit;
            for (std::size_t k = 0; k < f; ++k) {
                const double pre = pass.ffn_pre(idx, k);
                if (pre > 0.0) grads.ffn_w2(k, 0) += g_logit * pre;
                const double gu = pre > 0.0 ? g_logit * p.ffn_w2(k, 0) : 0.0;
                if (gu == 0.0) continue;
                grads.ffn_b1(0, k) += gu;
                for (std::size_t c = 0; c < lat; ++c) {
                    grads.ffn_w1(c, k) += pass.latent.h(i, c) * gu;
                    grads.ffn_w1(lat + c, k) += pass.latent.h(j, c) * gu;
                    grads.ffn_w1(2 * lat + c, k) += pass.latent.h(n, c) * gu;
                    g_h(i, c) += p.ffn_w1(c, k) * gu;
                    g_h(j, c) += p.ffn_w1(lat + c, k) * gu;
                    g_h(n, c) += p.ffn_w1(2 * lat + c, k) * gu;
                }
            }
        }
    }

    // h = mu + exp(log_sigma) .* noise
    const Matrix& g_mu = g_h;
    Matrix g_logsig(n + 1, lat);
    for (std::size_t i = 0; i < n + 1; ++i) {
        for (std::size_t c = 0; c < lat; ++c) {
            const double raw = pass.gcn.log_sigma_raw(i, c);
            const bool pass_through = raw > -10.0 && raw < 10.0;
            g_logsig(i, c) = pass_through
                                 ? g_h(i, c) * pass.latent.noise(i, c) *
                                       std::exp(pass.gcn.log_sigma(i, c))
                                 : 0.0;
        }
    }

    grads.w_mu += matmul(pass.gcn.t2.transpose(), g_mu);
    grads.w_logsigma += matmul(pass.gcn.t2.transpose(), g_logsig);

    Matrix g_t2 = matmul(g_mu, p.w_mu.transpose());
    g_t2 += matmul(g_logsig, p.w_logsigma.transpose());

    // t2 = a_hat * hidden with a_hat symmetric.
    const Matrix g_hidden = matmul(pass.gcn.a_hat, g_t2);
    Matrix g_pre = g_hidden;
    for (std::size_t i = 0; i < g_pre.size(); ++i)
        if (pass.gcn.pre_hidden.data()[i] <= 0.0) g_pre.data()[i] = 0.0;
    grads.w_shared += matmul(pass.gcn.t1.transpose(), g_pre);
}

// Gradient of zeta * ||W||_* at W, restricted to the strictly positive
// singular values (the zero block contributes no descent direction).
Matrix nuclear_norm_subgradient(const Matrix& w, double zeta) {
    const SvdResult dec = svd(w);
    Matrix g(w.rows(), w.cols());
    for (std::size_t k = 0; k < dec.singular_values.size(); ++k) {
        if (dec.singular_values[k] <= 1e-12) continue;
        for (std::size_t i = 0; i < w.rows(); ++i)
            for (std::size_t j = 0; j < w.cols(); ++j)
                g(i, j) += zeta * dec.u(i, k) * dec.v(j, k);
    }
    return g;
}

} // namespace

StepContext::StepContext(const TaskGraph& graph, const TrainConfig& config,
                         const DesignerParams& base_params, const EpisodeBatch& batch)
    : graph_(graph), config_(config), records_(batch.records) {
    if (records_.empty()) throw ConfigError("StepContext: no episodes");
    double mean = 0.0;
    for (const auto& r : records_) mean += r.utility;
    mean /= static_cast<double>(records_.size());
    mean_utility_ = mean;
    for (const auto& r : records_)
        advantages_.push_back(config_.baseline ? r.utility - mean : r.utility);

    // Deterministic-mode design at the base parameters anchors the
    // regularizer terms of this step.
    Rng unused(0);
    DesignResult det = design(graph, base_params, config.design_config(true), unused);
    det_s_tilde0_ = det.refined.s_tilde;
    det_z0_ = det.refined.z;
    det_c0_ = det.refined.y - det.refined.w;
}

StepContext::Components StepContext::components(const DesignerParams& p) const {
    Components out;
    const std::size_t n = graph_.agent_count();
    const double m_count = static_cast<double>(records_.size());

    // One deterministic replay carries both the marginal edge law of the
    // policy term and the regularizers.
    const PassData det = run_pass(graph_, p, kReplayTau, Matrix(n + 1, p.w_mu.cols()),
                                  Matrix(n, n, 0.5));

    const Matrix probs =
        clamp((det.sketch.s + graph_.anchor.entries) * 0.5, kProbClamp, 1.0 - kProbClamp);
    for (std::size_t m = 0; m < records_.size(); ++m)
        out.policy_term += advantages_[m] / m_count *
                           masked_log_prob(records_[m].sampled_edges, probs);

    const Matrix ds = det.sketch.s - det_s_tilde0_;
    const Matrix da = graph_.anchor.entries - det_s_tilde0_;
    out.l_anchor = 0.5 * dot(ds, ds) + 0.5 * dot(da, da);

    Matrix w_lin = matmul(matmul(det_z0_.transpose(),
                                 (det.sketch.s + graph_.anchor.entries) * 0.5),
                          det_z0_);
    w_lin -= det_c0_;
    out.l_sparse = config_.zeta * nuclear_norm(w_lin);
    return out;
}

double StepContext::value(const DesignerParams& p) const {
    const Components c = components(p);
    return c.policy_term + c.l_anchor + c.l_sparse;
}

namespace {

void add_scaled(ParamGrads& dst, const ParamGrads& src, double scale) {
    dst.w_shared += src.w_shared * scale;
    dst.w_mu += src.w_mu * scale;
    dst.w_logsigma += src.w_logsigma * scale;
    dst.ffn_w1 += src.ffn_w1 * scale;
    dst.ffn_b1 += src.ffn_b1 * scale;
    dst.ffn_w2 += src.ffn_w2 * scale;
    dst.ffn_b2 += src.ffn_b2 * scale;
}

bool grads_finite(const ParamGrads& g) { return g.all_finite(); }

} // namespace

void StepContext::accumulate_parts(const DesignerParams& p, ParamGrads& policy_out,
                                   ParamGrads& reg_out) const {
    const std::size_t n = graph_.agent_count();
    const double m_count = static_cast<double>(records_.size());

    const PassData det = run_pass(graph_, p, kReplayTau, Matrix(n + 1, p.w_mu.cols()),
                                  Matrix(n, n, 0.5));

    Matrix g_s_policy(n, n);
    for (std::size_t i = 0; i < n; ++i) {
        for (std::size_t j = 0; j < n; ++j) {
            if (i == j) continue;
            const double raw = (det.sketch.s(i, j) + graph_.anchor.entries(i, j)) * 0.5;
            if (raw <= kProbClamp || raw >= 1.0 - kProbClamp) continue;
            double g = 0.0;
            for (std::size_t m = 0; m < records_.size(); ++m) {
                const double e = records_[m].sampled_edges(i, j);
                g += advantages_[m] / m_count *
                     (e != 0.0 ? 1.0 / raw : -1.0 / (1.0 - raw));
            }
            g_s_policy(i, j) = 0.5 * g;
        }
    }
    backprop_pass(graph_, p, det, kReplayTau, g_s_policy, policy_out);

    // Regularizers through the same deterministic pass.
    Matrix g_s_det = det.sketch.s - det_s_tilde0_;

    Matrix w_lin = matmul(matmul(det_z0_.transpose(),
                                 (det.sketch.s + graph_.anchor.entries) * 0.5),
                          det_z0_);
    w_lin -= det_c0_;
    const Matrix g_w = nuclear_norm_subgradient(w_lin, config_.zeta);
    Matrix g_m = matmul(matmul(det_z0_, g_w), det_z0_.transpose());
    g_m *= 0.5;
    g_s_det += g_m;
    for (std::size_t i = 0; i < n; ++i) g_s_det(i, i) = 0.0;
    backprop_pass(graph_, p, det, kReplayTau, g_s_det, reg_out);
}

ParamGrads StepContext::gradient(const DesignerParams& p) const {
    ParamGrads policy = zero_grads(p);
    ParamGrads reg = zero_grads(p);
    accumulate_parts(p, policy, reg);
    add_scaled(policy, reg, 1.0);
    return policy;
}

ParamGrads StepContext::descent_gradient(const DesignerParams& p) const {
    ParamGrads policy = zero_grads(p);
    ParamGrads reg = zero_grads(p);
    accumulate_parts(p, policy, reg);
    add_scaled(reg, policy, -1.0);
    return reg;
}

EpisodeBatch sample_episodes(const TaskGraph& graph, const DesignerParams& params,
                             const TrainConfig& config, const SyntheticTask& task,
                             const TrainEnv& env, Rng& rng) {
    const std::size_t n = graph.agent_count();
    const std::size_t m_total = config.m_samples;

    std::vector<EpisodeRecord> records(m_total);
    std::vector<std::size_t> edges(m_total, 0);
    std::vector<char> kept(m_total, 0);
    std::vector<std::string> fatal(m_total);

    std::vector<Rng> streams;
    streams.reserve(m_total);
    for (std::size_t m = 0; m < m_total; ++m) streams.push_back(rng.child(m));

    const std::ptrdiff_t count = static_cast<std::ptrdiff_t>(m_total);
#pragma omp parallel for schedule(dynamic) if (count > 1)
    for (std::ptrdiff_t mi = 0; mi < count; ++mi) {
        const std::size_t m = static_cast<std::size_t>(mi);
        Rng ep_rng = streams[m];
        try {
            // Episodes share the deterministic latent (h = mu) and differ in
            // the edge-noise and mask draws. Routing reward through per-episode
            // latent noise would train a path that deterministic-mode
            // inference never exercises.
            DesignResult d;
            d.gcn = gcn_encode(graph, params);
            d.latent = latent_from_noise(d.gcn.mu, d.gcn.log_sigma,
                                         Matrix(d.gcn.mu.rows(), d.gcn.mu.cols()));
            d.sketch = sketch_edges(d.latent, params, config.tau, ep_rng, false,
                                    &d.ffn_pre);
            const std::size_t rank = config.rank == 0 ? auto_rank(n) : config.rank;
            d.refined = refine_low_rank(d.sketch, graph.anchor, rank, config.zeta);
            const Matrix probs = clamp(d.refined.s_tilde, kProbClamp, 1.0 - kProbClamp);

            Matrix mask(n, n);
            for (std::size_t i = 0; i < n; ++i)
                for (std::size_t j = 0; j < n; ++j)
                    if (i != j && ep_rng.bernoulli(probs(i, j))) mask(i, j) = 1.0;

            std::vector<CommEdge> candidates;
            for (std::size_t i = 0; i < n; ++i)
                for (std::size_t j = 0; j < n; ++j)
                    if (mask(i, j) != 0.0) candidates.push_back({i, j, probs(i, j)});
            const CommTopology dag = break_cycles(n, std::move(candidates));

            Rng dlg_rng = ep_rng.child(777);
            const Transcript t = run_dialogue(dag, env.agents, *env.backend, task.query,
                                              config.k_rounds, env.strategy, std::nullopt,
                                              dlg_rng);

            EpisodeRecord rec;
            rec.sampled_edges = mask;
            rec.edge_probs = probs;
            rec.utility = evaluate(t.final_answer, task);
            rec.log_prob = masked_log_prob(mask, probs);
            records[m] = std::move(rec);
            edges[m] = dag.edges.size();
            kept[m] = 1;
        } catch (const ExecutionError&) {
            // Backend failure: the episode is dropped, M is not back-filled.
            kept[m] = 0;
        } catch (const std::exception& e) {
            // Exceptions must not escape the parallel region; rethrown below.
            fatal[m] = e.what();
        }
    }

    for (std::size_t m = 0; m < m_total; ++m)
        if (!fatal[m].empty())
            throw NumericError("sample_episodes: episode " + std::to_string(m) + ": " +
                               fatal[m]);

    EpisodeBatch batch;
    for (std::size_t m = 0; m < m_total; ++m) {
        if (!kept[m]) continue;
        batch.records.push_back(std::move(records[m]));
        batch.dag_edge_counts.push_back(edges[m]);
    }
    return batch;
}

AdamState AdamState::for_params(const DesignerParams& p) {
    AdamState s;
    s.m = zero_grads(p);
    s.v = zero_grads(p);
    return s;
}

void AdamState::apply(DesignerParams& params, const ParamGrads& grads, double lr) {
    ++step_count;
    const double bc1 = 1.0 - std::pow(beta1, static_cast<double>(step_count));
    const double bc2 = 1.0 - std::pow(beta2, static_cast<double>(step_count));

    auto update = [&](Matrix& theta, const Matrix& g, Matrix& m_buf, Matrix& v_buf) {
        for (std::size_t i = 0; i < theta.size(); ++i) {
            const double gi = g.data()[i];
            double& mi = m_buf.data()[i];
            double& vi = v_buf.data()[i];
            mi = beta1 * mi + (1.0 - beta1) * gi;
            vi = beta2 * vi + (1.0 - beta2) * gi * gi;
            theta.data()[i] -= lr * (mi / bc1) / (std::sqrt(vi / bc2) + epsilon);
        }
    };
    update(params.w_shared, grads.w_shared, m.w_shared, v.w_shared);
    update(params.w_mu, grads.w_mu, m.w_mu, v.w_mu);
    update(params.w_logsigma, grads.w_logsigma, m.w_logsigma, v.w_logsigma);
    update(params.ffn_w1, grads.ffn_w1, m.ffn_w1, v.ffn_w1);
    update(params.ffn_b1, grads.ffn_b1, m.ffn_b1, v.ffn_b1);
    update(params.ffn_w2, grads.ffn_w2, m.ffn_w2, v.ffn_w2);
    {
        const double gi = grads.ffn_b2;
        m.ffn_b2 = beta1 * m.ffn_b2 + (1.0 - beta1) * gi;
        v.ffn_b2 = beta2 * v.ffn_b2 + (1.0 - beta2) * gi * gi;
        params.ffn_b2 -= lr * (m.ffn_b2 / bc1) / (std::sqrt(v.ffn_b2 / bc2) + epsilon);
    }
}

StepContext::Components reinforce_step(const EpisodeBatch& batch, const TaskGraph& graph,
                                       DesignerParams& params, const TrainConfig& config,
                                       AdamState& adam) {
    const StepContext ctx(graph, config, params, batch);
    const StepContext::Components comps = ctx.components(params);

    const ParamGrads grads = ctx.descent_gradient(params);
    if (!grads_finite(grads))
        throw NumericError("reinforce_step: non-finite gradient; parameters unchanged");
    adam.apply(params, grads, config.learning_rate);
    if (!params.all_finite())
        throw NumericError("reinforce_step: update produced non-finite parameters");
    return comps;
}

TrainResult train(const std::vector<SyntheticTask>& tasks, const TrainEnv& env,
                  const TrainConfig& config) {
    return train(tasks, env, config, DesignerParams::init(env.dims, config.seed));
}

TrainResult train(const std::vector<SyntheticTask>& tasks, const TrainEnv& env,
                  const TrainConfig& config, DesignerParams initial_params) {
    if (tasks.empty()) throw ConfigError("train: no tasks");
    if (!env.backend || !env.embedder) throw ConfigError("train: backend/embedder unset");
    if (env.embedder->dim() != env.dims.embed_dim)
        throw ConfigError("train: embedder dimension does not match model dims");
    config.validate();
    initial_params.check_dims(env.dims);

    TrainResult result;
    result.params = std::move(initial_params);
    AdamState adam = AdamState::for_params(result.params);
    Rng run_rng(config.seed);

    for (std::size_t qi = 0; qi < config.budget; ++qi) {
        const SyntheticTask& task = tasks[qi % tasks.size()];
        Rng query_rng = run_rng.child(qi);
        Rng anchor_rng = query_rng.child(500000);
        const TaskGraph graph = build_task_graph(env.agents, task.query, env.anchor_kind,
                                                 *env.embedder, anchor_rng);

        const EpisodeBatch batch =
            sample_episodes(graph, result.params, config, task, env, query_rng);
        if (batch.records.empty()) {
            ++result.skipped_steps;
            continue;
        }

        TrainLogEntry entry;
        entry.query_index = qi;
        double mean_u = 0.0, mean_e = 0.0;
        for (std::size_t m = 0; m < batch.records.size(); ++m) {
            mean_u += batch.records[m].utility;
            mean_e += static_cast<double>(batch.dag_edge_counts[m]);
        }
        entry.mean_utility = mean_u / static_cast<double>(batch.records.size());
        entry.mean_edges = mean_e / static_cast<double>(batch.records.size());

        try {
            const StepContext::Components comps =
                reinforce_step(batch, graph, result.params, config, adam);
            entry.l_anchor = comps.l_anchor;
            entry.l_sparse = comps.l_sparse;
        } catch (const NumericError&) {
            ++result.skipped_steps;
            entry.l_anchor = -1.0;
            entry.l_sparse = -1.0;
        }
        result.log.push_back(entry);
        ++result.trained_queries;
    }
    return result;
}

// --- Checkpoint persistence -------------------------------------------------

namespace {

// Decimal serialization with 17 significant digits round-trips 64-bit reals
// bit-exactly through any correct parser.
std::string real_repr(double v) {
    char buf[64];
    std::snprintf(buf, sizeof(buf), "%.17g", v);
    std::string s(buf);
    // Keep JSON happy: inf/nan never occur in valid checkpoints but guard
    // anyway.
    if (s.find("inf") != std::string::npos || s.find("nan") != std::string::npos)
        throw NumericError("checkpoint: non-finite value");
    return s;
}

void emit_matrix(std::ostream& os, const char* name, const Matrix& m, bool trailing_comma) {
    os << "    \"" << name << "\": {\"rows\": " << m.rows() << ", \"cols\": " << m.cols()
       << ", \"data\": [";
    for (std::size_t i = 0; i < m.size(); ++i) {
        if (i) os << ", ";
        os << real_repr(m.data()[i]);
    }
    os << "]}" << (trailing_comma ? "," : "") << "\n";
}

Matrix parse_matrix(const nlohmann::json& j) {
    const std::size_t rows = j.at("rows").get<std::size_t>();
    const std::size_t cols = j.at("cols").get<std::size_t>();
    std::vector<double> data = j.at("data").get<std::vector<double>>();
    return Matrix(rows, cols, std::move(data));
}

} // namespace

void save_checkpoint(const std::string& path, const Checkpoint& checkpoint) {
    std::ostringstream os;
    const TrainConfig& c = checkpoint.config;
    os << "{\n";
    os << "  \"version\": \"" << checkpoint.version << "\",\n";
    os << "  \"config\": {\"m\": " << c.m_samples << ", \"k\": " << c.k_rounds
       << ", \"tau\": " << real_repr(c.tau) << ", \"zeta\": " << real_repr(c.zeta)
       << ", \"threshold\": " << real_repr(c.threshold) << ", \"rank\": " << c.rank
       << ", \"lr\": " << real_repr(c.learning_rate) << ", \"budget\": " << c.budget
       << ", \"seed\": " << c.seed << ", \"baseline\": " << (c.baseline ? "true" : "false")
       << ", \"beta1\": " << real_repr(c.beta1_cost)
       << ", \"beta2\": " << real_repr(c.beta2_robust) << "},\n";
    os << "  \"dims\": {\"embed_dim\": " << checkpoint.dims.embed_dim
       << ", \"d_hidden\": " << checkpoint.dims.d_hidden
       << ", \"d_latent\": " << checkpoint.dims.d_latent
       << ", \"d_ffn\": " << checkpoint.dims.d_ffn << "},\n";
    os << "  \"params\": {\n";
    emit_matrix(os, "w_shared", checkpoint.params.w_shared, true);
    emit_matrix(os, "w_mu", checkpoint.params.w_mu, true);
    emit_matrix(os, "w_logsigma", checkpoint.params.w_logsigma, true);
    emit_matrix(os, "ffn_w1", checkpoint.params.ffn_w1, true);
    emit_matrix(os, "ffn_b1", checkpoint.params.ffn_b1, true);
    emit_matrix(os, "ffn_w2", checkpoint.params.ffn_w2, true);
    os << "    \"ffn_b2\": " << real_repr(checkpoint.params.ffn_b2) << "\n";
    os << "  },\n";
    os << "  \"rng_seed\": " << checkpoint.rng_seed << ",\n";
    os << "  \"trained_queries\": " << checkpoint.trained_queries << "\n";
    os << "}\n";

    std::ofstream out(path, std::ios::binary);
    if (!out) throw ConfigError("save_checkpoint: cannot open " + path);
    out << os.str();
    if (!out) throw ConfigError("save_checkpoint: write failed for " + path);
}

Checkpoint load_checkpoint(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw ConfigError("load_checkpoint: cannot open " + path);
    nlohmann::json j = nlohmann::json::parse(in, nullptr, false);
    if (j.is_discarded()) throw SchemaError("load_checkpoint: invalid JSON in " + path);

    Checkpoint ck;
    const std::string version = j.value("version", std::string("<missing>"));
    if (version != kCheckpointVersion)
        throw SchemaError("load_checkpoint: version \"" + version +
                          "\" but this reader expects \"" +
                          std::string(kCheckpointVersion) + "\"");
    ck.version = version;

    const auto& c = j.at("config");
    ck.config.m_samples = c.at("m").get<std::size_t>();
    ck.config.k_rounds = c.at("k").get<std::size_t>();
    ck.config.tau = c.at("tau").get<double>();
    ck.config.zeta = c.at("zeta").get<double>();
    ck.config.threshold = c.at("threshold").get<double>();
    ck.config.rank = c.at("rank").get<std::size_t>();
    ck.config.learning_rate = c.at("lr").get<double>();
    ck.config.budget = c.at("budget").get<std::size_t>();
    ck.config.seed = c.at("seed").get<std::uint64_t>();
    ck.config.baseline = c.at("baseline").get<bool>();
    ck.config.beta1_cost = c.at("beta1").get<double>();
    ck.config.beta2_robust = c.at("beta2").get<double>();

    const auto& d = j.at("dims");
    ck.dims.embed_dim = d.at("embed_dim").get<std::size_t>();
    ck.dims.d_hidden = d.at("d_hidden").get<std::size_t>();
    ck.dims.d_latent = d.at("d_latent").get<std::size_t>();
    ck.dims.d_ffn = d.at("d_ffn").get<std::size_t>();

    const auto& p = j.at("params");
    ck.params.w_shared = parse_matrix(p.at("w_shared"));
    ck.params.w_mu = parse_matrix(p.at("w_mu"));
    ck.params.w_logsigma = parse_matrix(p.at("w_logsigma"));
    ck.params.ffn_w1 = parse_matrix(p.at("ffn_w1"));
    ck.params.ffn_b1 = parse_matrix(p.at("ffn_b1"));
    ck.params.ffn_w2 = parse_matrix(p.at("ffn_w2"));
    ck.params.ffn_b2 = p.at("ffn_b2").get<double>();
    ck.params.check_dims(ck.dims);

    ck.rng_seed = j.at("rng_seed").get<std::uint64_t>();
    ck.trained_queries = j.at("trained_queries").get<std::size_t>();
    return ck;
}

std::string train_log_to_jsonl(const std::vector<TrainLogEntry>& log) {
    std::ostringstream os;
    for (const auto& e : log) {
        os << "{\"query_index\": " << e.query_index
           << ", \"mean_utility\": " << real_repr(e.mean_utility)
           << ", \"mean_edges\": " << real_repr(e.mean_edges)
           << ", \"l_anchor\": " << real_repr(e.l_anchor)
           << ", \"l_sparse\": " << real_repr(e.l_sparse) << "}\n";
    }
    return os.str();
}

} // namespace gdesigner
