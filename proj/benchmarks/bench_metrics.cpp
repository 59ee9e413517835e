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

#include "expdiff/eval.hpp"
#include "expdiff/rng.hpp"

namespace {

void BM_Ssim(benchmark::State& state) {
    const int size = static_cast<int>(state.range(0));
    expdiff::Rng rng(5, 0);
    expdiff::Image a(1, size, size);
    expdiff::Image b(1, size, size);
    for (std::size_t i = 0; i < a.size(); ++i) {
        a.data[i] = rng.uniform();
        b.data[i] = 0.5 * a.data[i] + 0.5 * rng.uniform();
    }
    for (auto _ : state) benchmark::DoNotOptimize(expdiff::ssim(a, b));
}
BENCHMARK(BM_Ssim)->Arg(64)->Arg(128);

}  // namespace
