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

#include "commands.hpp"

#include <cmath>
#include <fstream>
#include <functional>
#include <iostream>
#include <sstream>
#include <stdexcept>
#include <string>

#include "expdiff/backbone.hpp"
#include "expdiff/data.hpp"
#include "expdiff/edi_io.hpp"
#include "expdiff/eval.hpp"
#include "expdiff/process.hpp"
#include "expdiff/training.hpp"
#include "run_config.hpp"

namespace expdiff::cli {

namespace fs = std::filesystem;

namespace {

class Logger {
public:
    explicit Logger(bool quiet) : quiet_(quiet) {}
    template <typename... Args>
    void operator()(const Args&... args) const {
        if (quiet_) return;
        std::ostringstream os;
        os << "[expdiff] ";
        (os << ... << args);
        os << '\n';
        std::cerr << os.str();
    }

private:
    bool quiet_;
};

std::uint64_t resolve_seed(const CommandContext& ctx, const RunConfig& cfg, const std::string& section,
                           std::uint64_t parsed) {
    if (ctx.seed) return *ctx.seed;
    const auto it = cfg.raw.find(section);
    if (it == cfg.raw.end() || !it->contains("seed")) {
        throw ConfigError("[" + section + "] seed is required (or pass --seed)");
    }
    return parsed;
}

fs::path require_path(const fs::path& p, const char* key) {
    if (p.empty()) throw ConfigError(std::string("[paths] ") + key + " is required");
    return p;
}

void ensure_dir(const fs::path& dir) {
    std::error_code ec;
    fs::create_directories(dir, ec);
    if (ec) throw std::runtime_error("cannot create " + dir.string() + ": " + ec.message());
}

void write_json(const fs::path& path, const nlohmann::json& doc) {
    std::ofstream out(path, std::ios::trunc);
    if (!out) throw std::runtime_error("cannot write " + path.string());
    out << doc.dump(2) << '\n';
}

// Runs `body` and maps exceptions onto the documented exit codes.
int guarded(const CommandContext& ctx, const char* name, const std::function<void(const RunConfig&)>& body) {
    try {
        const RunConfig cfg = load_run_config(ctx.config);
        body(cfg);
        return kExitOk;
    } catch (const ConfigError& e) {
        std::cerr << "expdiff " << name << ": config error: " << e.what() << '\n';
        return kExitConfig;
    } catch (const std::exception& e) {
        std::cerr << "expdiff " << name << ": error: " << e.what() << '\n';
        return kExitRuntime;
    }
}

double resolve_gain(double configured, const WeightsInfo& info, const NoiseModel& fallback) {
    if (configured > 0.0) return configured;
    if (info.sampling_gain > 0.0) return info.sampling_gain;
    return fallback.gain;
}

double amplified_input_psnr(const std::vector<EvalItem>& items) {
    double sum = 0.0;
    for (const auto& item : items) {
        const auto& p = item.pair;
        sum += psnr(clip01(amplify(p.x_noisy, p.meta_noisy.lambda, p.meta_ref.lambda)), p.x_ref);
    }
    return sum / static_cast<double>(items.size());
}

}  // namespace

int cmd_synth(const CommandContext& ctx) {
    return guarded(ctx, "synth", [&](const RunConfig& cfg) {
        const Logger log(ctx.quiet);
        SceneSpec spec = cfg.data.scene;
        spec.seed = resolve_seed(ctx, cfg, "data", spec.seed);
        const fs::path dir = require_path(cfg.paths.manifest, "manifest");
        log("synthesizing ", cfg.data.count, " scenes into ", dir.string());
        const auto manifest = build_dataset(spec, cfg.data.count, cfg.noise, cfg.data.ratios, dir, ctx.jobs);
        std::cout << (dir / "manifest.json").string() << ' ' << manifest.items.size() << '\n';

        if (cfg.data.test_count > 0) {
            SceneSpec test_spec = spec;
            test_spec.seed = cfg.data.test_seed.value_or(spec.seed + 1000003ULL);
            test_spec.highlight_fraction = cfg.data.test_highlight_fraction.value_or(spec.highlight_fraction);
            const fs::path test_dir = require_path(cfg.paths.test_manifest, "test_manifest");
            log("synthesizing ", cfg.data.test_count, " test scenes into ", test_dir.string());
            const auto test = build_dataset(test_spec, cfg.data.test_count, cfg.noise, cfg.data.ratios, test_dir,
                                            ctx.jobs);
            std::cout << (test_dir / "manifest.json").string() << ' ' << test.items.size() << '\n';
        }
    });
}

int cmd_train(const CommandContext& ctx) {
    return guarded(ctx, "train", [&](const RunConfig& cfg) {
        const Logger log(ctx.quiet);
        TrainOptions options = cfg.train;
        options.seed = resolve_seed(ctx, cfg, "train", options.seed);
        const auto manifest = load_manifest(require_path(cfg.paths.manifest, "manifest"));
        options.process.sampling_gain = manifest.noise.gain;
        const fs::path weights = require_path(cfg.paths.weights, "weights");
        ensure_dir(cfg.paths.out_dir);
        if (weights.has_parent_path()) ensure_dir(weights.parent_path());

        const fs::path log_path = cfg.paths.out_dir / "train_log.csv";
        std::ofstream csv(log_path, std::ios::trunc);
        if (!csv) throw std::runtime_error("cannot write " + log_path.string());
        csv << "epoch,mean_loss\n";
        csv.precision(17);

        log("training ", options.baseline ? "baseline" : "exposure-diffusion", " model for ", options.epochs,
            " epochs (T=", options.process.t_train, ", arl=", options.arl ? "on" : "off",
            ", loss=", to_string(options.process.loss), ")");
        const auto outcome = run_training(manifest, options, [&](int epoch, double loss) {
            csv << epoch << ',' << loss << '\n';
            csv.flush();
            log("epoch ", epoch, " loss ", loss);
        });

        WeightsInfo info;
        info.baseline = options.baseline;
        info.config_digest = training_digest(cfg);
        info.sampling_gain = manifest.noise.gain;
        info.ratio = options.ratios.size() == 1 ? options.ratios.front() : 0.0;
        info.note = std::string("loss=") + to_string(options.process.loss) + " T=" +
                    std::to_string(options.process.t_train);
        save_weights(weights, outcome.params, info);
        log("wrote ", weights.string());
    });
}

int cmd_enhance(const CommandContext& ctx, const EnhanceArgs& args) {
    return guarded(ctx, "enhance", [&](const RunConfig& cfg) {
        const Logger log(ctx.quiet);
        if (args.input.empty() || args.output.empty()) throw ConfigError("--input and --output are required");
        const std::uint64_t seed = resolve_seed(ctx, cfg, "infer", cfg.infer.seed);
        const auto wf = load_weights(require_path(cfg.paths.weights, "weights"));
        const auto in = read_edi(args.input);

        double ratio = in.meta.ratio;
        if (cfg.infer.ratio > 0.0) ratio = cfg.infer.ratio;
        if (args.ratio) {
            if (!(*args.ratio >= 1.0)) throw ConfigError("--ratio must be >= 1");
            ratio = *args.ratio;
        }
        if (ratio != in.meta.ratio) {
            std::cerr << "expdiff enhance: warning: ratio " << ratio << " overrides the input's recorded ratio "
                      << in.meta.ratio << '\n';
        }
        ProcessConfig process;
        process.t_infer = args.steps.value_or(cfg.infer.steps);
        if (process.t_infer < 0) throw ConfigError("--steps must be >= 0");
        process.sampling_gain = resolve_gain(cfg.infer.gain, wf.info, cfg.noise);

        const auto net = DenoiserHandle::convnet(wf.params);
        Rng rng(seed, 0);
        const auto result = infer(in.image, in.meta, ratio, net, process, rng);
        write_image(args.output, result.output, {in.meta.lambda * ratio, 1.0}, PayloadType::f64, "enhanced");
        nlohmann::json trace = result.trace;
        write_json(fs::path(args.output.string() + ".trace.json"), trace);
        if (args.pgm) write_pgm16(*args.pgm, result.output);
        log("enhanced ", args.input.string(), " -> ", args.output.string(), " (", process.t_infer, " steps, ratio ",
            ratio, ")");
    });
}

int cmd_eval(const CommandContext& ctx) {
    return guarded(ctx, "eval", [&](const RunConfig& cfg) {
        const Logger log(ctx.quiet);
        const std::uint64_t seed = resolve_seed(ctx, cfg, "eval", cfg.eval.seed);
        const auto wf = load_weights(require_path(cfg.paths.weights, "weights"));
        const auto manifest = load_manifest(require_path(cfg.paths.test_manifest, "test_manifest"));
        const auto items = load_eval_items(manifest, cfg.eval.ratios);
        if (items.empty()) throw std::runtime_error("test set is empty");
        ensure_dir(cfg.paths.out_dir);

        ProcessConfig process;
        process.sampling_gain = resolve_gain(cfg.infer.gain, wf.info, manifest.noise);
        const auto net = DenoiserHandle::convnet(wf.params);
        SweepOptions options;
        options.steps_list = cfg.eval.steps_list;
        options.seed = seed;
        options.jobs = ctx.jobs;
        options.loss_label = wf.info.baseline ? "baseline" : "diffusion";
        log("evaluating ", items.size(), " items at steps ", options.steps_list.size(), " settings");
        const auto report = iteration_sweep(items, net, process, options);

        const fs::path& out = cfg.paths.out_dir;
        write_report_csv(out / "eval_report.csv", report);
        write_timing_csv(out / "eval_timing.csv", report);
        write_curve_csv(out / "eval_curve.csv", report);
        nlohmann::json summary = report_summary(report);
        summary["items"] = items.size();
        summary["input_psnr_mean"] = amplified_input_psnr(items);
        summary["baseline"] = wf.info.baseline;
        summary["arl"] = wf.params.arl_enabled();
        summary["sampling_gain"] = process.sampling_gain;
        write_json(out / "eval_summary.json", summary);
        log("wrote reports to ", out.string());
    });
}

int cmd_ablate(const CommandContext& ctx) {
    return guarded(ctx, "ablate", [&](const RunConfig& cfg) {
        const Logger log(ctx.quiet);
        const std::uint64_t seed = resolve_seed(ctx, cfg, "eval", cfg.eval.seed);
        const auto wf_arl = load_weights(require_path(cfg.ablate.weights_arl, "ablate.weights_arl"));
        const auto wf_plain = load_weights(require_path(cfg.ablate.weights_noarl, "ablate.weights_noarl"));
        const auto manifest = load_manifest(require_path(cfg.paths.test_manifest, "test_manifest"));
        const auto items = load_eval_items(manifest, cfg.eval.ratios);
        if (items.empty()) throw std::runtime_error("test set is empty");
        ensure_dir(cfg.paths.out_dir);
        const fs::path& out = cfg.paths.out_dir;
        const int steps = cfg.ablate.steps;

        struct Arm {
            const char* label;
            const WeightsFile* wf;
            double mae_single = 0.0;
            double mae_multi = 0.0;
            int counted = 0;
        };
        Arm arms[2] = {{"arl", &wf_arl}, {"noarl", &wf_plain}};

        std::ofstream csv(out / "ablate_highlight.csv", std::ios::trunc);
        if (!csv) throw std::runtime_error("cannot write ablate_highlight.csv");
        csv.precision(17);
        csv << "item,scene,arm,mask_pixels,empty_mask,mae_1step,mae_multistep,delta\n";

        nlohmann::json curves = nlohmann::json::object();
        for (auto& arm : arms) {
            ProcessConfig process;
            process.sampling_gain = resolve_gain(cfg.infer.gain, arm.wf->info, manifest.noise);
            const auto net = DenoiserHandle::convnet(arm.wf->params);
            log("ablating ", arm.label, " over ", items.size(), " items");
            for (const auto& item : items) {
                const auto& p = item.pair;
                auto run = [&](int t) {
                    ProcessConfig c = process;
                    c.t_infer = t;
                    Rng rng(seed, static_cast<std::uint64_t>(item.id) * 1024 + static_cast<std::uint64_t>(t));
                    return infer(p.x_noisy, p.meta_noisy, p.meta_noisy.ratio, net, c, rng).output;
                };
                const auto delta = highlight_error_delta(p.x_ref, run(1), run(steps), cfg.eval.threshold);
                csv << item.id << ',' << item.scene << ',' << arm.label << ',' << delta.mask_pixels << ','
                    << (delta.empty_mask ? 1 : 0) << ',' << delta.mae_before << ',' << delta.mae_after << ','
                    << delta.delta << '\n';
                if (!delta.empty_mask) {
                    arm.mae_single += delta.mae_before;
                    arm.mae_multi += delta.mae_after;
                    ++arm.counted;
                }
            }
            std::vector<int> sweep_steps;
            for (int s = 0; s <= steps; ++s) sweep_steps.push_back(s);
            SweepOptions options;
            options.steps_list = sweep_steps;
            options.seed = seed;
            options.jobs = ctx.jobs;
            options.loss_label = arm.label;
            const auto report = iteration_sweep(items, net, process, options);
            write_curve_csv(out / (std::string("ablate_curve_") + arm.label + ".csv"), report);
            curves[arm.label] = report_summary(report)["curve"];
        }

        nlohmann::json summary = {{"steps", steps}, {"threshold", cfg.eval.threshold}, {"items", items.size()}};
        for (const auto& arm : arms) {
            const double n = arm.counted > 0 ? static_cast<double>(arm.counted) : 1.0;
            summary[arm.label] = {{"scenes_with_highlights", arm.counted},
                                  {"mae_1step_mean", arm.mae_single / n},
                                  {"mae_multistep_mean", arm.mae_multi / n},
                                  {"curve", curves[arm.label]}};
        }
        write_json(out / "ablate_summary.json", summary);
        log("wrote ablation reports to ", out.string());
    });
}

}  // namespace expdiff::cli
