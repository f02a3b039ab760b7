// Times the OpenMP kernels against the serial reference at pipeline-relevant
// shapes and checks that both produce identical results.
#include <chrono>
#include <cmath>
#include <cstdio>
#include <vector>

#include "basepose/kernels.hpp"
#include "basepose/kinematics.hpp"
#include "basepose/rng.hpp"
#include "basepose/scene.hpp"

using namespace basepose;

namespace {

double now_s() {
    return std::chrono::duration<double>(std::chrono::steady_clock::now().time_since_epoch())
        .count();
}

template <typename F>
double time_best_of(int reps, F&& fn) {
    double best = 1e30;
    for (int i = 0; i < reps; ++i) {
        const double t0 = now_s();
        fn();
        best = std::min(best, now_s() - t0);
    }
    return best;
}

void fill_random(std::vector<float>& v, Rng& rng) {
    for (auto& x : v) x = static_cast<float>(rng.normal());
}

void bench_conv(int ci, int h, int co, int k) {
    Rng rng(7);
    std::vector<float> x(static_cast<size_t>(ci) * h * h);
    std::vector<float> w(static_cast<size_t>(co) * ci * k * k);
    fill_random(x, rng);
    fill_random(w, rng);
    int oh, ow;
    kernels::conv2d_out_size(h, h, k, k, 1, k / 2, oh, ow);
    std::vector<float> ys(static_cast<size_t>(co) * oh * ow);
    std::vector<float> yp(ys.size());

    const double ts = time_best_of(3, [&] {
        kernels::conv2d_forward_serial(x.data(), ci, h, h, w.data(), co, k, k, 1, k / 2,
                                       ys.data(), oh, ow);
    });
    const double tp = time_best_of(3, [&] {
        kernels::conv2d_forward_parallel(x.data(), ci, h, h, w.data(), co, k, k, 1, k / 2,
                                         yp.data(), oh, ow);
    });
    double max_diff = 0.0;
    for (size_t i = 0; i < ys.size(); ++i)
        max_diff = std::max(max_diff, static_cast<double>(std::fabs(ys[i] - yp[i])));
    const double macs = static_cast<double>(co) * ci * k * k * oh * ow;
    std::printf("conv2d %3dx%3dx%3d k%d co%3d | serial %8.2f ms (%6.2f GMAC/s) | omp %8.2f ms (%6.2f GMAC/s) | x%.2f | max|d| %.1e\n",
                ci, h, h, k, co, ts * 1e3, macs / ts * 1e-9, tp * 1e3, macs / tp * 1e-9, ts / tp,
                max_diff);
}

void bench_irm() {
    SceneConfig scfg;
    RobotModel robot;
    const SceneSpec scene = sample_scene(11, scfg);
    const OrthoProjection proj = rasterize(scene, 64);

    kernels::set_parallel(false);
    const double ts = time_best_of(3, [&] { compute_irm(scene, robot, 8, proj); });
    kernels::set_parallel(true);
    const double tp = time_best_of(3, [&] { compute_irm(scene, robot, 8, proj); });
    std::printf("compute_irm 8x64x64      | serial %8.2f ms                  | omp %8.2f ms                  | x%.2f\n",
                ts * 1e3, tp * 1e3, ts / tp);
}

}  // namespace

int main() {
    std::printf("threads: %d\n", kernels::thread_count());
    bench_conv(6, 64, 32, 3);
    bench_conv(32, 64, 32, 3);
    bench_conv(64, 32, 128, 3);
    bench_conv(128, 16, 256, 3);
    bench_conv(32, 64, 1, 13);  // transporter correlation shape
    bench_irm();
    return 0;
}
