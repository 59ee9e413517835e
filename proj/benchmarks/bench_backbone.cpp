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

#include "expdiff/backbone.hpp"
#include "expdiff/rng.hpp"

namespace {

expdiff::Image random_image(int size, std::uint64_t seed) {
    expdiff::Rng rng(seed, 0);
    expdiff::Image img(1, size, size);
    for (auto& v : img.data) v = rng.uniform();
    return img;
}

void BM_ConvNetForward(benchmark::State& state) {
    const int size = static_cast<int>(state.range(0));
    expdiff::Rng rng(1, 0);
    const auto params = expdiff::ConvNetParams::make(1, true, 16, 4, 3, rng);
    const auto x = random_image(size, 2);
    for (auto _ : state) benchmark::DoNotOptimize(expdiff::convnet_forward(params, x));
    state.SetItemsProcessed(state.iterations() * size * size);
}
BENCHMARK(BM_ConvNetForward)->Arg(32)->Arg(64)->Arg(128);

void BM_ConvNetBackward(benchmark::State& state) {
    const int size = static_cast<int>(state.range(0));
    expdiff::Rng rng(1, 0);
    const auto params = expdiff::ConvNetParams::make(1, true, 16, 4, 3, rng);
    const auto x = random_image(size, 2);
    const auto fwd = expdiff::convnet_forward(params, x);
    const expdiff::ArlOutput grad{expdiff::Image(1, size, size, 1e-3), expdiff::Image(1, size, size, 1e-3),
                                  expdiff::Image(1, size, size, 1e-3)};
    for (auto _ : state) benchmark::DoNotOptimize(expdiff::convnet_backward(params, fwd.cache, grad));
    state.SetItemsProcessed(state.iterations() * size * size);
}
BENCHMARK(BM_ConvNetBackward)->Arg(32)->Arg(64);

}  // namespace
