#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>

#include "gdesigner/errors.hpp"
#include "gdesigner/harness.hpp"
#include "gdesigner/trainer.hpp"

using namespace gdesigner;

namespace {

const ModelDims kSmallDims{16, 8, 4, 8};

struct Fixture {
    std::vector<AgentSpec> agents;
    HashEmbedder embedder{16};
    MockBackend backend;
    TrainEnv env;

    explicit Fixture(std::size_t n = 3) {
        for (std::size_t i = 0; i < n; ++i)
            agents.push_back({i, "sim-llm", "calc-" + std::to_string(i), {}, {}});
        env.agents = agents;
        env.backend = &backend;
        env.embedder = &embedder;
        env.strategy = {AggregationKind::MajorityVote, std::nullopt};
        env.anchor_kind = AnchorKind::Chain;
        env.dims = kSmallDims;
    }
};

SyntheticTask hard_task() {
    SyntheticTask t;
    t.query = "Compute ((2 + 3) * 4) - 5.";
    t.category = "arith_hard";
    t.ground_truth = "15";
    t.difficulty = 0.9;
    return t;
}

TaskGraph graph_for(const Fixture& f, const SyntheticTask& task, std::uint64_t seed = 5) {
    Rng rng(seed);
    return build_task_graph(f.env.agents, task.query, f.env.anchor_kind,
                            *const_cast<HashEmbedder*>(&f.embedder), rng);
}

bool params_equal(const DesignerParams& a, const DesignerParams& b) {
    return a.w_shared == b.w_shared && a.w_mu == b.w_mu && a.w_logsigma == b.w_logsigma &&
           a.ffn_w1 == b.ffn_w1 && a.ffn_b1 == b.ffn_b1 && a.ffn_w2 == b.ffn_w2 &&
           a.ffn_b2 == b.ffn_b2;
}

std::string temp_path(const std::string& name) {
    return (std::filesystem::temp_directory_path() / name).string();
}

} // namespace

TEST_CASE("compute_losses: fixed examples") {
    // S = S~ = A: both anchor terms vanish.
    AdjacencyMatrix anchor(3);
    anchor.set_edge(0, 1);
    anchor.set_edge(1, 2);
    SketchMatrix sk;
    sk.s = anchor.entries;
    RefinedMatrix refined;
    refined.s_tilde = anchor.entries;
    refined.w = Matrix::diag({1.0, 2.0});
    const auto [l_anchor, l_sparse] = compute_losses(sk, refined, anchor, 0.1);
    CHECK(l_anchor == 0.0);
    CHECK(l_sparse == doctest::Approx(0.3).epsilon(1e-12));
}

TEST_CASE("sample_episodes: a huge zeta empties the refined matrix and the masks") {
    Fixture f;
    TrainConfig cfg;
    cfg.m_samples = 6;
    cfg.k_rounds = 1;
    cfg.zeta = 100.0; // singular values cannot survive a threshold of 50
    cfg.rank = 3;
    const SyntheticTask task = hard_task();
    const TaskGraph graph = graph_for(f, task);
    const DesignerParams params = DesignerParams::init(kSmallDims, 1);
    Rng rng(2);
    const EpisodeBatch batch = sample_episodes(graph, params, cfg, task, f.env, rng);
    REQUIRE(batch.records.size() == 6);
    for (const auto& rec : batch.records) {
        CHECK(max_abs(rec.sampled_edges) == 0.0);
        CHECK(std::fabs(rec.log_prob) < 1e-3);
        for (std::size_t i = 0; i < 3; ++i)
            for (std::size_t j = 0; j < 3; ++j)
                if (i != j) CHECK(rec.edge_probs(i, j) == 1e-6);
    }
}

TEST_CASE("sample_episodes: reproducible for a fixed stream") {
    Fixture f;
    TrainConfig cfg;
    cfg.m_samples = 4;
    cfg.k_rounds = 1;
    const SyntheticTask task = hard_task();
    const TaskGraph graph = graph_for(f, task);
    const DesignerParams params = DesignerParams::init(kSmallDims, 3);
    Rng r1(7), r2(7);
    const EpisodeBatch a = sample_episodes(graph, params, cfg, task, f.env, r1);
    const EpisodeBatch b = sample_episodes(graph, params, cfg, task, f.env, r2);
    REQUIRE(a.records.size() == b.records.size());
    for (std::size_t m = 0; m < a.records.size(); ++m) {
        CHECK(a.records[m].sampled_edges == b.records[m].sampled_edges);
        CHECK(a.records[m].utility == b.records[m].utility);
        CHECK(a.records[m].log_prob == b.records[m].log_prob);
    }
}

TEST_CASE("log_prob matches its definition over the clamped probabilities") {
    Fixture f;
    TrainConfig cfg;
    cfg.m_samples = 3;
    cfg.k_rounds = 1;
    const SyntheticTask task = hard_task();
    const TaskGraph graph = graph_for(f, task);
    const DesignerParams params = DesignerParams::init(kSmallDims, 11);
    Rng rng(13);
    const EpisodeBatch batch = sample_episodes(graph, params, cfg, task, f.env, rng);
    for (const auto& rec : batch.records) {
        double expect = 0.0;
        for (std::size_t i = 0; i < 3; ++i)
            for (std::size_t j = 0; j < 3; ++j) {
                if (i == j) continue;
                expect += rec.sampled_edges(i, j) != 0.0
                              ? std::log(rec.edge_probs(i, j))
                              : std::log(1.0 - rec.edge_probs(i, j));
            }
        REQUIRE(std::isfinite(rec.log_prob));
        CHECK(rec.log_prob == doctest::Approx(expect).epsilon(1e-12));
    }
}

TEST_CASE("baseline: constant utility shifts do not change the policy gradient") {
    Fixture f;
    TrainConfig cfg;
    cfg.m_samples = 5;
    cfg.k_rounds = 1;
    cfg.baseline = true;
    const SyntheticTask task = hard_task();
    const TaskGraph graph = graph_for(f, task);
    const DesignerParams params = DesignerParams::init(kSmallDims, 17);
    Rng rng(19);
    EpisodeBatch batch = sample_episodes(graph, params, cfg, task, f.env, rng);

    const StepContext ctx_a(graph, cfg, params, batch);
    EpisodeBatch shifted = batch;
    for (auto& rec : shifted.records) rec.utility += 0.5;
    const StepContext ctx_b(graph, cfg, params, shifted);

    CHECK(ctx_a.advantages() == ctx_b.advantages());
    const ParamGrads ga = ctx_a.gradient(params);
    const ParamGrads gb = ctx_b.gradient(params);
    CHECK(ga.w_shared == gb.w_shared);
    CHECK(ga.ffn_w1 == gb.ffn_w1);
    CHECK(ga.ffn_b2 == gb.ffn_b2);
}

TEST_CASE("baseline: equal utilities cancel the policy term exactly") {
    Fixture f;
    TrainConfig cfg;
    cfg.m_samples = 4;
    cfg.k_rounds = 1;
    cfg.baseline = true;
    const SyntheticTask task = hard_task();
    const TaskGraph graph = graph_for(f, task);
    const DesignerParams params = DesignerParams::init(kSmallDims, 23);
    Rng rng(29);
    EpisodeBatch batch = sample_episodes(graph, params, cfg, task, f.env, rng);
    for (auto& rec : batch.records) rec.utility = 0.75;

    const StepContext ctx(graph, cfg, params, batch);
    for (double adv : ctx.advantages()) CHECK(adv == 0.0);
    CHECK(ctx.components(params).policy_term == 0.0);
    // gradient = policy + regs and descent = -policy + regs agree when the
    // policy part is exactly zero.
    const ParamGrads g = ctx.gradient(params);
    const ParamGrads d = ctx.descent_gradient(params);
    CHECK(g.w_shared == d.w_shared);
    CHECK(g.ffn_w1 == d.ffn_w1);
}

TEST_CASE("gradient check: analytic backprop matches central differences") {
    Fixture f;
    TrainConfig cfg;
    cfg.m_samples = 4;
    cfg.k_rounds = 1;
    cfg.tau = 1e-2;
    cfg.zeta = 1e-1;
    cfg.baseline = false; // keep the policy term alive even when all succeed
    const SyntheticTask task = hard_task();

    std::size_t checked_total = 0;
    for (std::uint64_t state_seed : {101u, 202u, 303u}) {
        const TaskGraph graph = graph_for(f, task);
        const DesignerParams params = DesignerParams::init(kSmallDims, state_seed);
        Rng rng(state_seed + 7);
        const EpisodeBatch batch = sample_episodes(graph, params, cfg, task, f.env, rng);
        REQUIRE(!batch.records.empty());
        const StepContext ctx(graph, cfg, params, batch);
        const ParamGrads analytic = ctx.gradient(params);

        auto compare = [&](const char* name, const Matrix& grad_block,
                           Matrix DesignerParams::* field) {
            DesignerParams work = params;
            auto value_of = [&](const Matrix& m) {
                work.*field = m;
                const double v = ctx.value(work);
                work.*field = params.*field;
                return v;
            };
            const Matrix fd = finite_diff_grad(value_of, params.*field, 1e-5);
            for (std::size_t i = 0; i < grad_block.size(); ++i) {
                const double a = grad_block.data()[i];
                const double g = fd.data()[i];
                if (std::fabs(a) < 1e-6) continue; // FD noise dominates tiny entries
                const double rel = std::fabs(a - g) / std::max(std::fabs(a), std::fabs(g));
                if (rel >= 1e-4) {
                    MESSAGE("block ", name, " entry ", i, ": analytic ", a, " fd ", g);
                }
                REQUIRE(rel < 1e-4);
                ++checked_total;
            }
        };
        compare("w_shared", analytic.w_shared, &DesignerParams::w_shared);
        compare("w_mu", analytic.w_mu, &DesignerParams::w_mu);
        compare("w_logsigma", analytic.w_logsigma, &DesignerParams::w_logsigma);
        compare("ffn_w1", analytic.ffn_w1, &DesignerParams::ffn_w1);
        compare("ffn_b1", analytic.ffn_b1, &DesignerParams::ffn_b1);
        compare("ffn_w2", analytic.ffn_w2, &DesignerParams::ffn_w2);
    }
    CHECK(checked_total >= 60); // well past 20 coordinates per state
}

TEST_CASE("reinforce_step: non-finite gradients abort without touching parameters") {
    Fixture f;
    TrainConfig cfg;
    cfg.m_samples = 2;
    cfg.k_rounds = 1;
    const SyntheticTask task = hard_task();
    const TaskGraph graph = graph_for(f, task);
    DesignerParams params = DesignerParams::init(kSmallDims, 31);
    Rng rng(37);
    EpisodeBatch batch = sample_episodes(graph, params, cfg, task, f.env, rng);
    REQUIRE(!batch.records.empty());
    batch.records[0].utility = std::nan(""); // poisoned reward

    const DesignerParams before = params;
    AdamState adam = AdamState::for_params(params);
    CHECK_THROWS_AS(reinforce_step(batch, graph, params, cfg, adam), NumericError);
    CHECK(params_equal(params, before));
}

TEST_CASE("train: zero budget returns the initial parameters") {
    Fixture f;
    TrainConfig cfg;
    cfg.budget = 0;
    const std::vector<SyntheticTask> tasks = {hard_task()};
    const TrainResult r = train(tasks, f.env, cfg);
    CHECK(params_equal(r.params, DesignerParams::init(kSmallDims, cfg.seed)));
    CHECK(r.log.empty());
}

TEST_CASE("train: identical configs give identical parameters") {
    Fixture f;
    TrainConfig cfg;
    cfg.budget = 6;
    cfg.m_samples = 4;
    cfg.k_rounds = 1;
    cfg.seed = 41;
    SuiteCounts counts;
    counts.arith_easy = 2;
    counts.arith_hard = 2;
    const auto tasks = generate_suite(7, counts);
    const TrainResult a = train(tasks, f.env, cfg);
    const TrainResult b = train(tasks, f.env, cfg);
    CHECK(params_equal(a.params, b.params));
    REQUIRE(a.log.size() == b.log.size());
    CHECK(train_log_to_jsonl(a.log) == train_log_to_jsonl(b.log));
}

TEST_CASE("train: the single-edge relay bandit pushes the needed edge up") {
    // Agents: stubborn filler, the specialist, and an adoptive responder.
    // With last-agent aggregation the relay answer only survives when the
    // specialist feeds the responder: utility rides on edge (1, 2).
    std::vector<AgentSpec> agents = {{0, "sim", "bystander", {}, {}},
                                     {1, "sim", "archivist", {}, {}},
                                     {2, "sim", "scribe", {}, {}}};
    MockBackendConfig mock_cfg;
    mock_cfg.adoptive[0] = false;
    MockBackend backend(mock_cfg);
    HashEmbedder embedder(16);
    TrainEnv env;
    env.agents = agents;
    env.backend = &backend;
    env.embedder = &embedder;
    env.strategy = {AggregationKind::LastAgent, std::nullopt};
    env.anchor_kind = AnchorKind::Chain;
    env.dims = kSmallDims;

    SuiteCounts counts;
    counts.relay = 1;
    const auto tasks = generate_suite(11, counts, "archivist");

    TrainConfig cfg;
    cfg.m_samples = 10;
    cfg.k_rounds = 1;
    cfg.learning_rate = 0.05;
    cfg.zeta = 0.0;
    cfg.rank = 3;
    cfg.budget = 120;
    cfg.seed = 5;

    // Probability of the controllable edge before and after training.
    auto edge_prob = [&](const DesignerParams& p) {
        Rng rng(1);
        const TaskGraph graph =
            build_task_graph(agents, tasks[0].query, AnchorKind::Chain, embedder, rng);
        Rng design_rng(2);
        const DesignResult d = design(graph, p, cfg.design_config(true), design_rng);
        return d.refined.clamped01()(1, 2);
    };

    const double before = edge_prob(DesignerParams::init(kSmallDims, cfg.seed));
    const TrainResult r = train(tasks, env, cfg);
    const double after = edge_prob(r.params);
    CHECK(after > before);
    CHECK(after > 0.8);
}

TEST_CASE("checkpoint: bit-exact round-trip") {
    Checkpoint ck;
    ck.config.tau = 0.012345678901234567;
    ck.config.seed = 987654321;
    ck.dims = kSmallDims;
    ck.params = DesignerParams::init(kSmallDims, 55);
    ck.params.ffn_b2 = -1.0 / 3.0;
    ck.rng_seed = 55;
    ck.trained_queries = 12;

    const std::string path = temp_path("gdesigner_ckpt_roundtrip.json");
    save_checkpoint(path, ck);
    const Checkpoint back = load_checkpoint(path);
    CHECK(back.version == kCheckpointVersion);
    CHECK(params_equal(back.params, ck.params));
    CHECK(back.config.tau == ck.config.tau);
    CHECK(back.config.seed == ck.config.seed);
    CHECK(back.dims.d_ffn == ck.dims.d_ffn);
    CHECK(back.trained_queries == 12);
    std::filesystem::remove(path);
}

TEST_CASE("checkpoint: version mismatch is a schema error") {
    Checkpoint ck;
    ck.dims = kSmallDims;
    ck.params = DesignerParams::init(kSmallDims, 1);
    const std::string path = temp_path("gdesigner_ckpt_version.json");
    save_checkpoint(path, ck);

    std::ifstream in(path);
    std::string text((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
    in.close();
    const std::string needle = kCheckpointVersion;
    text.replace(text.find(needle), needle.size(), "gdesigner-ckpt-v0");
    std::ofstream out(path, std::ios::binary);
    out << text;
    out.close();

    CHECK_THROWS_AS(load_checkpoint(path), SchemaError);
    std::filesystem::remove(path);
}

TEST_CASE("checkpoint: loaded parameters design identical topologies") {
    Fixture f;
    TrainConfig cfg;
    cfg.budget = 4;
    cfg.m_samples = 3;
    cfg.k_rounds = 1;
    SuiteCounts counts;
    counts.arith_easy = 2;
    counts.arith_hard = 2;
    const auto tasks = generate_suite(21, counts);
    const TrainResult r = train(tasks, f.env, cfg);

    Checkpoint ck;
    ck.config = cfg;
    ck.dims = kSmallDims;
    ck.params = r.params;
    const std::string path = temp_path("gdesigner_ckpt_behave.json");
    save_checkpoint(path, ck);
    const Checkpoint back = load_checkpoint(path);

    SuiteCounts probe_counts;
    probe_counts.arith_easy = 3;
    probe_counts.arith_hard = 2;
    const auto probes = generate_suite(31, probe_counts);
    for (const auto& probe : probes) {
        Rng r1(3), r2(3);
        const TaskGraph g1 =
            build_task_graph(f.env.agents, probe.query, AnchorKind::Chain, f.embedder, r1);
        const TaskGraph g2 =
            build_task_graph(f.env.agents, probe.query, AnchorKind::Chain, f.embedder, r2);
        Rng d1(4), d2(4);
        const DesignResult a = design(g1, r.params, cfg.design_config(true), d1);
        const DesignResult b = design(g2, back.params, cfg.design_config(true), d2);
        REQUIRE(a.topology.edges.size() == b.topology.edges.size());
        for (std::size_t i = 0; i < a.topology.edges.size(); ++i) {
            CHECK(a.topology.edges[i].from == b.topology.edges[i].from);
            CHECK(a.topology.edges[i].to == b.topology.edges[i].to);
            CHECK(a.topology.edges[i].weight == b.topology.edges[i].weight);
        }
    }
    std::filesystem::remove(path);
}
