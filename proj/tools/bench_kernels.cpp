// Micro-benchmark comparing the OpenMP kernels against their serial reference
// implementations, plus an end-to-end design pass. Run with different
// OMP_NUM_THREADS to see the scaling; results must be bit-identical.
#include <chrono>
#include <cstdio>
#include <string>

#if defined(_OPENMP)
#include <omp.h>
#endif

#include "gdesigner/agents.hpp"
#include "gdesigner/designer.hpp"
#include "gdesigner/matrix.hpp"
#include "gdesigner/network.hpp"
#include "gdesigner/rng.hpp"

using namespace gdesigner;
namespace chrono = std::chrono;

namespace {

double time_ms(const std::function<void()>& f, int reps) {
    const auto t0 = chrono::steady_clock::now();
    for (int i = 0; i < reps; ++i) f();
    const auto t1 = chrono::steady_clock::now();
    return chrono::duration<double, std::milli>(t1 - t0).count() / reps;
}

} // namespace

int main() {
#if defined(_OPENMP)
    std::printf("openmp: %d threads\n", omp_get_max_threads());
#else
    std::printf("openmp: disabled\n");
#endif

    Rng rng(42);
    for (std::size_t n : {64, 128, 256, 512}) {
        Matrix a = Matrix::random_uniform(n, n, rng);
        Matrix b = Matrix::random_uniform(n, n, rng);
        Matrix serial, parallel;
        const double t_serial = time_ms([&] { serial = matmul_serial(a, b); }, 3);
        const double t_parallel = time_ms([&] { parallel = matmul(a, b); }, 3);
        const bool identical = serial == parallel;
        std::printf("matmul %4zux%-4zu  serial %8.3f ms   omp %8.3f ms   speedup %5.2fx   %s\n",
                    n, n, t_serial, t_parallel, t_serial / t_parallel,
                    identical ? "bit-identical" : "MISMATCH");
    }

    // End-to-end deterministic design pass at a few agent counts.
    HashEmbedder embedder(384);
    ModelDims dims;
    for (std::size_t n : {5, 10, 20}) {
        std::vector<AgentSpec> agents;
        for (std::size_t i = 0; i < n; ++i)
            agents.push_back({i, "sim-llm", "role-" + std::to_string(i), {}, {}});
        Rng graph_rng(7);
        TaskGraph graph =
            build_task_graph(agents, "Compute 3 + 4.", AnchorKind::Chain, embedder, graph_rng);
        DesignerParams params = DesignerParams::init(dims, 7);
        DesignConfig cfg;
        cfg.deterministic = true;
        Rng design_rng(7);
        const double t = time_ms([&] { (void)design(graph, params, cfg, design_rng); }, 5);
        std::printf("design pass N=%-3zu %8.3f ms\n", n, t);
    }
    return 0;
}
