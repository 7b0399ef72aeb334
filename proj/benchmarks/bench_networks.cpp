#include <benchmark/benchmark.h>

#include <torch/torch.h>

#include "glyphda/config.hpp"
#include "glyphda/data.hpp"
#include "glyphda/latent.hpp"
#include "glyphda/losses.hpp"
#include "glyphda/networks.hpp"
#include "glyphda/trainer.hpp"

namespace {

using namespace glyphda;

ModelSpec desk_model() {
    ModelSpec m;
    m.backbone = BackboneKind::small_conv;
    m.image_side = 32;
    m.num_classes = 10;
    m.structure_width = 128;
    m.width_multiplier = 0.25;
    return m;
}

PerceptualSpec desk_perceptual() {
    auto p = PerceptualSpec::defaults();
    p.width_multiplier = 0.25;
    return p;
}

Networks desk_networks() { return build_networks(desk_model(), desk_perceptual(), {0, false}); }

void BM_StructureEncoderForwardBackward(benchmark::State& state) {
    torch::manual_seed(0);
    auto nets = desk_networks();
    auto x = torch::rand({16, 3, 32, 32}) * 2 - 1;
    for (auto _ : state) {
        auto loss = nets.structure->forward(x).pooled.sum();
        loss.backward();
        benchmark::DoNotOptimize(loss);
    }
}
BENCHMARK(BM_StructureEncoderForwardBackward)->Unit(benchmark::kMillisecond);

void BM_GeneratorForwardBackward(benchmark::State& state) {
    auto nets = desk_networks();
    auto z = torch::rand({16, 128 + 10, 8, 8});
    for (auto _ : state) {
        auto loss = nets.generator->forward(z).sum();
        loss.backward();
        benchmark::DoNotOptimize(loss);
    }
}
BENCHMARK(BM_GeneratorForwardBackward)->Unit(benchmark::kMillisecond);

void BM_ImageDiscriminatorForwardBackward(benchmark::State& state) {
    auto nets = desk_networks();
    auto x = torch::rand({16, 3, 32, 32});
    for (auto _ : state) {
        auto loss = nets.disc_image_target->forward(x).sum();
        loss.backward();
        benchmark::DoNotOptimize(loss);
    }
}
BENCHMARK(BM_ImageDiscriminatorForwardBackward)->Unit(benchmark::kMillisecond);

void BM_PerceptualTapsForward(benchmark::State& state) {
    auto nets = desk_networks();
    auto x = torch::rand({16, 3, 32, 32});
    const auto taps = required_taps(desk_perceptual());
    torch::NoGradGuard no_grad;
    for (auto _ : state) benchmark::DoNotOptimize(nets.perceptual->forward(x, taps));
}
BENCHMARK(BM_PerceptualTapsForward)->Unit(benchmark::kMillisecond);

void BM_TransformQuadruple(benchmark::State& state) {
    auto nets = desk_networks();
    auto x_s = torch::rand({16, 3, 32, 32}) * 2 - 1;
    auto x_t = torch::rand({16, 3, 32, 32}) * 2 - 1;
    torch::NoGradGuard no_grad;
    for (auto _ : state) benchmark::DoNotOptimize(transform_quadruple(x_s, x_t, nets));
}
BENCHMARK(BM_TransformQuadruple)->Unit(benchmark::kMillisecond);

// One full four-phase iteration per ablation preset.
void BM_TrainStep(benchmark::State& state, const char* preset) {
    ExperimentConfig config;
    config.model = desk_model();
    config.perceptual = desk_perceptual();
    config.trainer.t_max = 1 << 30;
    config.ablation = preset_ablation(preset);
    Trainer trainer(config, desk_networks());
    const auto corpus = synth_glyph_corpus(10, 4, 0, default_degradation(0));
    BatchStream stream(corpus.clean, corpus.degraded.images, 16, 0);
    for (auto _ : state) {
        auto [s, t] = stream.next();
        benchmark::DoNotOptimize(trainer.step(s, t));
    }
}
BENCHMARK_CAPTURE(BM_TrainStep, source_only, "source-only")->Unit(benchmark::kMillisecond);
BENCHMARK_CAPTURE(BM_TrainStep, full, "full")->Unit(benchmark::kMillisecond);

} // namespace

BENCHMARK_MAIN();
