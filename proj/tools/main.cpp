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

#include <CLI11.hpp>
#include <cstdint>
#include <string>

#include "commands.hpp"

int main(int argc, char** argv) {
    using namespace expdiff::cli;

    CLI::App app{"expdiff: exposure diffusion for raw low-light enhancement"};
    app.require_subcommand(1);

    CommandContext ctx;
    std::uint64_t seed = 0;
    auto add_common = [&](CLI::App* sub) {
        sub->add_option("--config", ctx.config, "TOML run config")->required();
        sub->add_option("--seed", seed, "override every seed in the config");
        sub->add_option("--jobs", ctx.jobs, "worker threads for synthesis and evaluation")
            ->check(CLI::PositiveNumber);
        sub->add_flag("--quiet", ctx.quiet, "suppress progress logs");
    };

    auto* synth = app.add_subcommand("synth", "generate a synthetic raw dataset");
    auto* train = app.add_subcommand("train", "train a denoiser");
    auto* enhance = app.add_subcommand("enhance", "enhance one low-light EDI image");
    auto* eval = app.add_subcommand("eval", "per-step PSNR/SSIM sweep on a test set");
    auto* ablate = app.add_subcommand("ablate", "ARL on/off highlight and step ablation");
    for (auto* sub : {synth, train, enhance, eval, ablate}) add_common(sub);

    EnhanceArgs enhance_args;
    std::string pgm;
    int steps = 0;
    double ratio = 0.0;
    enhance->add_option("--input", enhance_args.input, "low-light input (.edi)")->required();
    enhance->add_option("--output", enhance_args.output, "enhanced output (.edi)")->required();
    auto* pgm_opt = enhance->add_option("--pgm", pgm, "also write a 16-bit PGM preview");
    auto* steps_opt = enhance->add_option("--steps", steps, "sampling steps (overrides [infer] steps)");
    auto* ratio_opt = enhance->add_option("--ratio", ratio, "amplification ratio (overrides the input's)");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e);
        return code == 0 ? 0 : kExitConfig;
    }
    if (app.get_subcommands().front()->count("--seed") > 0) ctx.seed = seed;

    if (*synth) return cmd_synth(ctx);
    if (*train) return cmd_train(ctx);
    if (*eval) return cmd_eval(ctx);
    if (*ablate) return cmd_ablate(ctx);
    if (*pgm_opt) enhance_args.pgm = pgm;
    if (*steps_opt) enhance_args.steps = steps;
    if (*ratio_opt) enhance_args.ratio = ratio;
    return cmd_enhance(ctx, enhance_args);
}
