#include <benchmark/benchmark.h>

#include "glowsign/evalkit.hpp"
#include "glowsign/fluor.hpp"
#include "glowsign/geometry.hpp"
#include "glowsign/model.hpp"
#include "glowsign/poison.hpp"
#include "glowsign/rng.hpp"

using namespace glowsign;

namespace {

SignBox bench_box() {
    SignBox box;
    box.u = 20;
    box.v = 30;
    box.w = 60;
    box.h = 64;
    box.shape = SignShape::triangle;
    box.label = "c00";
    return box;
}

void BM_verify_containment(benchmark::State& state) {
    const SignBox box = bench_box();
    const TriggerPlacement placement = plan_placement(box);
    for (auto _ : state) benchmark::DoNotOptimize(verify_containment(box, placement));
}
BENCHMARK(BM_verify_containment);

void BM_render_parametric(benchmark::State& state) {
    EnvironmentCondition cond;
    for (auto _ : state)
        benchmark::DoNotOptimize(render_parametric(cond, static_cast<int>(state.range(0))));
}
BENCHMARK(BM_render_parametric)->Arg(32)->Arg(64)->Arg(128);

void BM_blend_trigger(benchmark::State& state) {
    Image img(128, 128, 3, 90);
    const SignBox box = bench_box();
    EnvironmentCondition cond;
    const TriggerAsset trigger = render_parametric(cond, 64);
    for (auto _ : state) {
        Image copy = img;
        benchmark::DoNotOptimize(blend_trigger(copy, box, trigger, 0.9));
    }
}
BENCHMARK(BM_blend_trigger);

void BM_model_forward(benchmark::State& state) {
    Architecture arch;
    arch.num_classes = 11;
    const ConvNet net(arch, 1);
    Rng rng(2);
    std::vector<double> input(3u * 32 * 32);
    for (auto& x : input) x = rng.uniform();
    for (auto _ : state) benchmark::DoNotOptimize(net.forward(input.data()));
}
BENCHMARK(BM_model_forward);

void BM_batch_gradient(benchmark::State& state) {
    Architecture arch;
    arch.num_classes = 11;
    const ConvNet net(arch, 1);
    Rng rng(3);
    const int n = static_cast<int>(state.range(0));
    std::vector<std::vector<double>> inputs(n);
    BatchView batch;
    for (int i = 0; i < n; ++i) {
        inputs[i].resize(3u * 32 * 32);
        for (auto& x : inputs[i]) x = rng.uniform();
        batch.push(inputs[i].data(), i % 11);
    }
    std::vector<double> grad(net.params().size());
    for (auto _ : state) {
        std::fill(grad.begin(), grad.end(), 0.0);
        benchmark::DoNotOptimize(net.batch_cross_entropy(batch, 1.0, &grad));
    }
}
BENCHMARK(BM_batch_gradient)->Arg(32)->Arg(64);

void BM_compute_map(benchmark::State& state) {
    Rng rng(4);
    std::vector<GroundTruth> gts;
    std::vector<DetectionRecord> dets;
    for (int i = 0; i < 200; ++i) {
        GroundTruth g;
        g.image_id = "img" + std::to_string(i % 40);
        g.box.u = static_cast<int>(rng.below(100));
        g.box.v = static_cast<int>(rng.below(100));
        g.box.w = 10 + static_cast<int>(rng.below(30));
        g.box.h = 10 + static_cast<int>(rng.below(30));
        g.box.label = "c" + std::to_string(i % 5);
        gts.push_back(g);
        DetectionRecord d;
        d.image_id = g.image_id;
        d.box = {g.box.u + rng.uniform(-4, 4), g.box.v + rng.uniform(-4, 4),
                 static_cast<double>(g.box.w), static_cast<double>(g.box.h)};
        d.label = g.box.label;
        d.confidence = rng.uniform();
        dets.push_back(d);
    }
    for (auto _ : state) benchmark::DoNotOptimize(compute_map(dets, gts, 0.5).map);
}
BENCHMARK(BM_compute_map);

}  // namespace

BENCHMARK_MAIN();
