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

#pragma once

#include <cstdint>
#include <functional>
#include <vector>

#include "expdiff/backbone.hpp"
#include "expdiff/data.hpp"
#include "expdiff/optim.hpp"
#include "expdiff/process.hpp"

namespace expdiff {

struct TrainOptions {
    int epochs = 30;
    int patch = 64;
    std::uint64_t seed = 0;
    ProcessConfig process;
    bool baseline = false;  // single-pass objective instead of the progressive one
    bool arl = true;
    int hidden = 16;
    int depth = 4;
    int kernel = 3;
    double learning_rate = 1e-3;
    std::vector<double> ratios;  // empty: every ratio in the manifest
    bool resynthesize = true;    // fresh noise for every visit of a pair
};

struct TrainOutcome {
    ConvNetParams params;
    std::vector<double> epoch_losses;
};

using EpochCallback = std::function<void(int epoch, double mean_loss)>;

/// Epoch loop over the manifest's pairs with batch size 1 and Adam. Fully
/// deterministic given the options. Throws std::runtime_error naming the
/// epoch if the loss stops being finite.
[[nodiscard]] TrainOutcome run_training(const DatasetManifest& manifest, const TrainOptions& options,
                                        const EpochCallback& on_epoch = {});

}  // namespace expdiff
