#include <benchmark/benchmark.h>

#include "milpath/metrics.hpp"
#include "milpath/rng.hpp"
#include "milpath/tiling.hpp"
#include "milpath/training.hpp"

using namespace milpath;

namespace {

Eigen::MatrixXd gaussian(Eigen::Index rows, Eigen::Index cols, SplitMix64& rng) {
    Eigen::MatrixXd m(rows, cols);
    for (Eigen::Index i = 0; i < m.size(); ++i) m.data()[i] = rng.normal();
    return m;
}

ModelConfig paper_scale() {
    ModelConfig c;
    c.extractor_names = {"synth_a", "synth_b"};
    c.extractor_dims = {512, 384};
    return c;
}

void BM_Forward(benchmark::State& state) {
    SplitMix64 rng(1);
    const auto model = init_model(paper_scale(), 1);
    const auto x = gaussian(state.range(0), 896, rng);
    for (auto _ : state) benchmark::DoNotOptimize(forward(model, x).probability);
    state.SetItemsProcessed(state.iterations() * state.range(0));
}
BENCHMARK(BM_Forward)->Arg(200)->Arg(800)->Arg(2000);

void BM_Backward(benchmark::State& state) {
    SplitMix64 rng(2);
    const auto model = init_model(paper_scale(), 1);
    const auto x = gaussian(state.range(0), 896, rng);
    for (auto _ : state) benchmark::DoNotOptimize(backward(model, x, 1, ClassWeights{}).loss);
    state.SetItemsProcessed(state.iterations() * state.range(0));
}
BENCHMARK(BM_Backward)->Arg(200)->Arg(800)->Arg(2000);

void BM_Otsu(benchmark::State& state) {
    RasterImage img(1024, 1024);
    SplitMix64 rng(3);
    for (int y = 0; y < 1024; y += 16) {
        for (int x = 0; x < 1024; x += 16) {
            img.fill_rect(x, y, 16, 16, Rgb{static_cast<std::uint8_t>(rng.below(256)),
                                            static_cast<std::uint8_t>(rng.below(256)), 200});
        }
    }
    for (auto _ : state) benchmark::DoNotOptimize(segment_tissue(img).threshold);
}
BENCHMARK(BM_Otsu);

void BM_Auc(benchmark::State& state) {
    SplitMix64 rng(4);
    std::vector<ScoredCase> cases;
    for (int i = 0; i < state.range(0); ++i) {
        cases.push_back({std::to_string(i), rng.uniform(), static_cast<int>(rng.below(2))});
    }
    for (auto _ : state) benchmark::DoNotOptimize(roc_auc(cases));
}
BENCHMARK(BM_Auc)->Arg(152)->Arg(10000);

}  // namespace

BENCHMARK_MAIN();
