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

#include "expdiff/training.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <stdexcept>
#include <string>

namespace expdiff {

TrainOutcome run_training(const DatasetManifest& manifest, const TrainOptions& options, const EpochCallback& on_epoch) {
    options.process.validate();
    if (options.epochs < 0) throw std::invalid_argument("training: epochs must be >= 0");

    std::vector<PairSample> pairs;
    for (const auto& item : manifest.items) {
        if (!options.ratios.empty() &&
            std::find(options.ratios.begin(), options.ratios.end(), item.ratio) == options.ratios.end()) {
            continue;
        }
        pairs.push_back(load_pair(manifest, item));
    }
    if (pairs.empty() && options.epochs > 0) throw std::runtime_error("training: no pairs match the requested ratios");

    Rng init_rng(options.seed, 0);
    const int channels = pairs.empty() ? manifest.scene.channels : pairs.front().x_ref.channels;
    DenoiserHandle net = DenoiserHandle::convnet(
        ConvNetParams::make(channels, options.arl, options.hidden, options.depth, options.kernel, init_rng));
    OptimState optim = OptimState::adam(options.learning_rate);

    Rng rng(options.seed, 1);
    TrainOutcome outcome;
    std::vector<std::size_t> order(pairs.size());
    for (int epoch = 1; epoch <= options.epochs; ++epoch) {
        std::iota(order.begin(), order.end(), 0);
        for (std::size_t i = order.size(); i > 1; --i) {
            std::swap(order[i - 1], order[rng.below(static_cast<std::uint32_t>(i))]);
        }
        double sum = 0.0;
        for (std::size_t idx : order) {
            const auto& full = pairs[idx];
            const int patch = std::min({options.patch, full.x_ref.height, full.x_ref.width});
            PairSample pair = patchify(full, patch, rng);
            if (options.resynthesize) {
                pair.x_noisy = synthesize_lowlight(pair.x_ref, pair.meta_ref.lambda, pair.meta_noisy.lambda, pair.noise,
                                                   rng);
            }
            TrainResult step;
            if (options.baseline) {
                step = train_feedforward_baseline(pair, net, options.process, rng);
            } else {
                const auto schedule = linear_schedule(pair.meta_noisy.lambda, pair.meta_noisy.ratio,
                                                      options.process.t_train);
                step = train_on_pair(pair, schedule, net, options.process, rng);
            }
            if (!std::isfinite(step.total_loss)) {
                throw std::runtime_error("training diverged: non-finite loss at epoch " + std::to_string(epoch));
            }
            optimizer_step(optim, net.mutable_params().mutable_values(), step.param_grads);
            sum += step.total_loss;
        }
        const double mean = pairs.empty() ? 0.0 : sum / static_cast<double>(pairs.size());
        outcome.epoch_losses.push_back(mean);
        if (on_epoch) on_epoch(epoch, mean);
    }
    outcome.params = net.params();
    return outcome;
}

}  // namespace expdiff
