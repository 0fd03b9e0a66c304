// freeq - tools/bench.cpp
// Benchmarks the OpenMP kernels against their serial references and verifies
// the two paths agree bit-for-bit on the benchmark workloads.

#include <chrono>
#include <cstdio>
#include <cstring>
#include <vector>

#include "freeq/eval.hpp"
#include "freeq/kernels.hpp"
#include "freeq/parallel.hpp"
#include "freeq/superpoints.hpp"

using namespace freeq;

namespace {

struct Rng {
    std::uint64_t state;
    explicit Rng(std::uint64_t seed) : state(seed + 1) {}
    std::uint64_t next() {
        state += 0x9E3779B97F4A7C15ULL;
        std::uint64_t z = state;
        z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
        z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
        return z ^ (z >> 31);
    }
    double uniform() { return (next() >> 11) * 0x1.0p-53; }
    double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }
};

template <typename Fn>
double time_ms(Fn&& fn) {
    const auto start = std::chrono::steady_clock::now();
    fn();
    return std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - start)
        .count();
}

void report(const char* name, double serial_ms, double parallel_ms, bool identical) {
    std::printf("%-22s serial %9.2f ms   omp %9.2f ms   speedup %5.2fx   %s\n", name, serial_ms,
                parallel_ms, serial_ms / std::max(parallel_ms, 1e-9),
                identical ? "identical" : "MISMATCH");
}

}  // namespace

int main(int argc, char** argv) {
    int n_points = 60000;
    if (argc > 1) n_points = std::atoi(argv[1]);
    std::printf("threads: %d, points: %d\n\n", parallel::max_threads(), n_points);

    Rng rng(7);
    std::vector<Vec3> points(n_points);
    for (Vec3& p : points)
        p = {rng.uniform(-3, 3), rng.uniform(-3, 3), rng.uniform(0, 3)};

    bool all_ok = true;

    KnnGraph knn_par, knn_ser;
    const double knn_ser_ms = time_ms([&] { knn_ser = ref::knn_neighbors(points, 10); });
    const double knn_par_ms = time_ms([&] { knn_par = kernels::knn_neighbors(points, 10); });
    const bool knn_ok = knn_par.neighbors == knn_ser.neighbors &&
                        knn_par.distances2 == knn_ser.distances2;
    report("knn_neighbors", knn_ser_ms, knn_par_ms, knn_ok);
    all_ok &= knn_ok;

    std::vector<Vec3> normals_par, normals_ser;
    const Vec3 orient{0, 0, 10};
    const double nrm_ser_ms =
        time_ms([&] { normals_ser = ref::estimate_normals(points, knn_par, orient); });
    const double nrm_par_ms =
        time_ms([&] { normals_par = kernels::estimate_normals(points, knn_par, orient); });
    const bool nrm_ok = normals_par == normals_ser;
    report("estimate_normals", nrm_ser_ms, nrm_par_ms, nrm_ok);
    all_ok &= nrm_ok;

    // Raycast workload: a planted scene's boxes through a high-resolution frame.
    const eval::PlantedScene scene = eval::generate_planted_scene(7, {});
    RaycastScene rc;
    for (const auto& o : scene.objects) rc.boxes.push_back(o.box);
    CameraFrame big = scene.capture.frames[0];
    big.depth.clear();
    big.width = big.height = 1024;
    big.cx = big.cy = (1024 - 1) / 2.0;
    big.fx = big.fy = 0.62 * 1024;
    RaycastResult cast_par, cast_ser;
    const double ray_ser_ms = time_ms([&] { cast_ser = ref::raycast_frame(rc, big); });
    const double ray_par_ms = time_ms([&] { cast_par = kernels::raycast_frame(rc, big); });
    const bool ray_ok = cast_par.depth == cast_ser.depth && cast_par.hit == cast_ser.hit;
    report("raycast_frame", ray_ser_ms, ray_par_ms, ray_ok);
    all_ok &= ray_ok;

    // Visibility gates over the planted scene's superpoints.
    MergeConfig merge;
    const Vec3 orient_to = scene.capture.frames[0].camera_center();
    const auto sps = segment_superpoints(scene.capture.cloud, merge, orient_to);
    std::vector<std::uint8_t> gates_par, gates_ser;
    const double gate_ser_ms = time_ms([&] {
        gates_ser = superpoints_ref::build_gate_table(sps, scene.capture.cloud,
                                                      scene.capture.frames,
                                                      scene.capture.masks, merge);
    });
    const double gate_par_ms = time_ms([&] {
        gates_par = build_gate_table(sps, scene.capture.cloud, scene.capture.frames,
                                     scene.capture.masks, merge);
    });
    const bool gate_ok = gates_par == gates_ser;
    report("build_gate_table", gate_ser_ms, gate_par_ms, gate_ok);
    all_ok &= gate_ok;

    std::printf("\n%s\n", all_ok ? "all kernels agree with their serial references"
                                 : "kernel mismatch detected");
    return all_ok ? 0 : 1;
}
