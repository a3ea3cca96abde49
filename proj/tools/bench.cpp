// Timing harness comparing the OpenMP kernels against the serial reference
// path on the hot loops: rasterization, stencil assembly, Green-kernel scans
// and the Harnack ratio extremization.

#include <chrono>
#include <cstdio>
#include <functional>

#include "hypolab/discretize.hpp"
#include "hypolab/green.hpp"
#include "hypolab/harnack.hpp"
#include "hypolab/parallel.hpp"

using namespace hypolab;

namespace {

double time_ms(const std::function<void()>& fn, int reps = 3) {
    double best = 1e300;
    for (int r = 0; r < reps; ++r) {
        auto t0 = std::chrono::steady_clock::now();
        fn();
        auto t1 = std::chrono::steady_clock::now();
        best = std::min(best, std::chrono::duration<double, std::milli>(t1 - t0).count());
    }
    return best;
}

void row(const char* name, const std::function<void()>& fn) {
    exec_policy().parallel = false;
    double serial = time_ms(fn);
    exec_policy().parallel = true;
    double parallel = time_ms(fn);
    std::printf("%-28s %10.2f ms %10.2f ms %8.2fx\n", name, serial, parallel,
                serial / parallel);
}

}  // namespace

int main() {
    std::printf("threads: %d\n", thread_count());
    std::printf("%-28s %13s %13s %9s\n", "kernel", "serial", "openmp", "speedup");

    OperatorSpec spec = gallery("grushin_fedii").with_epsilon(0.1);
    Grid grid = build_grid({{-2.0, 2.0}, {-2.0, 2.0}}, {257, 257});
    Eigen::VectorXd x0 = Eigen::VectorXd::Zero(2);
    Eigen::VectorXd h0(2);
    h0 << 1.0, 0.0;

    row("rasterize lens 257x257", [&] { lens_domain(x0, h0, 1.0, grid); });

    auto mask = std::make_shared<DomainMask>(lens_domain(x0, h0, 1.0, grid));
    row("assemble 257x257", [&] { assemble(spec, mask); });

    Grid grid65 = build_grid({{-2.0, 2.0}, {-2.0, 2.0}}, {65, 65});
    auto mask65 = std::make_shared<DomainMask>(lens_domain(x0, h0, 1.0, grid65));
    auto sys65 = std::make_shared<StencilSystem>(assemble(spec, mask65));
    GreenMatrix gm = green_matrix(sys65);
    row("green asymmetry scan", [&] { gm.max_relative_asymmetry(); });

    OperatorSpec lap = gallery("laplace");
    Grid dgrid = build_grid({{-1.05, 1.05}, {-1.05, 1.05}}, {65, 65});
    auto disk = std::make_shared<DomainMask>(ball_domain(Eigen::VectorXd::Zero(2), 1.0, dgrid));
    auto dsys = std::make_shared<StencilSystem>(assemble(lap, disk));
    PoissonKernel pk = poisson_kernel(dsys);
    std::vector<long> K = ball_compact(*disk, Eigen::VectorXd::Zero(2), 0.5);
    row("harnack strong scan", [&] { strong_constant(pk, K); });
    row("harnack chain of balls", [&] { chain_of_balls(pk, K, 0.4); });
    return 0;
}
