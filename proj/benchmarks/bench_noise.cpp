// Copyright (c) 2026 The expdiff Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//    http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#include <benchmark/benchmark.h>

#include "expdiff/noise.hpp"
#include "expdiff/rng.hpp"

namespace {

void BM_PoissonScalar(benchmark::State& state) {
    const double rate = static_cast<double>(state.range(0));
    expdiff::Rng rng(7, 0);
    for (auto _ : state) benchmark::DoNotOptimize(rng.poisson(rate));
}
BENCHMARK(BM_PoissonScalar)->Arg(1)->Arg(5)->Arg(50)->Arg(5000);

void BM_SynthesizeLowlight(benchmark::State& state) {
    expdiff::Image clean(1, 128, 128, 0.4);
    expdiff::NoiseModel model;
    model.gain = 2e-4;
    model.sigma_read = 2e-4;
    expdiff::Rng rng(3, 0);
    for (auto _ : state) benchmark::DoNotOptimize(expdiff::synthesize_lowlight(clean, 1.0, 1.0 / 250.0, model, rng));
}
BENCHMARK(BM_SynthesizeLowlight);

}  // namespace
