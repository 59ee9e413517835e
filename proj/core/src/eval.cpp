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

#include "expdiff/eval.hpp"

#include <algorithm>
#include <atomic>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <exception>
#include <fstream>
#include <map>
#include <mutex>
#include <nlohmann/json.hpp>
#include <stdexcept>
#include <thread>

namespace expdiff {

namespace {

constexpr int kSsimWindow = 11;
constexpr double kSsimSigma = 1.5;
constexpr double kSsimC1 = 0.01 * 0.01;
constexpr double kSsimC2 = 0.03 * 0.03;

std::vector<double> ssim_taps() {
    std::vector<double> taps(kSsimWindow);
    double sum = 0.0;
    for (int i = 0; i < kSsimWindow; ++i) {
        const double d = i - kSsimWindow / 2;
        taps[i] = std::exp(-d * d / (2.0 * kSsimSigma * kSsimSigma));
        sum += taps[i];
    }
    for (double& t : taps) t /= sum;
    return taps;
}

// Separable "valid" filtering of one plane.
std::vector<double> filter_valid(std::span<const double> src, int h, int w, const std::vector<double>& taps) {
    const int k = static_cast<int>(taps.size());
    const int ow = w - k + 1;
    const int oh = h - k + 1;
    std::vector<double> tmp(static_cast<std::size_t>(h) * ow);
    for (int y = 0; y < h; ++y) {
        for (int x = 0; x < ow; ++x) {
            double acc = 0.0;
            for (int t = 0; t < k; ++t) acc += taps[t] * src[static_cast<std::size_t>(y) * w + x + t];
            tmp[static_cast<std::size_t>(y) * ow + x] = acc;
        }
    }
    std::vector<double> out(static_cast<std::size_t>(oh) * ow);
    for (int y = 0; y < oh; ++y) {
        for (int x = 0; x < ow; ++x) {
            double acc = 0.0;
            for (int t = 0; t < k; ++t) acc += taps[t] * tmp[static_cast<std::size_t>(y + t) * ow + x];
            out[static_cast<std::size_t>(y) * ow + x] = acc;
        }
    }
    return out;
}

std::string fmt(double v) {
    if (std::isinf(v)) return v > 0 ? "inf" : "-inf";
    char buf[40];
    std::snprintf(buf, sizeof buf, "%.17g", v);
    return buf;
}

template <typename Fn>
void run_sharded(int count, int jobs, Fn&& fn) {
    std::atomic<int> next{0};
    std::exception_ptr failure;
    std::mutex failure_mutex;
    auto worker = [&] {
        for (int i = next.fetch_add(1); i < count; i = next.fetch_add(1)) {
            try {
                fn(i);
            } catch (...) {
                std::lock_guard lock(failure_mutex);
                if (!failure) failure = std::current_exception();
            }
        }
    };
    const int threads = std::max(1, std::min(jobs, count));
    if (threads == 1) {
        worker();
    } else {
        std::vector<std::jthread> pool;
        for (int t = 0; t < threads; ++t) pool.emplace_back(worker);
    }
    if (failure) std::rethrow_exception(failure);
}

}  // namespace

double psnr(const Image& a, const Image& b, double peak) {
    require_same_shape(a, b, "psnr");
    if (a.empty()) throw std::invalid_argument("psnr: empty images");
    double sse = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) {
        const double d = a.data[i] - b.data[i];
        sse += d * d;
    }
    const double mse = sse / static_cast<double>(a.size());
    if (mse == 0.0) return kPsnrIdentical;
    return 10.0 * std::log10(peak * peak / mse);
}

double ssim(const Image& a, const Image& b) {
    require_same_shape(a, b, "ssim");
    if (a.height < kSsimWindow || a.width < kSsimWindow) {
        throw std::invalid_argument("ssim: image " + a.shape_string() + " smaller than the 11x11 window");
    }
    const auto taps = ssim_taps();
    const int h = a.height;
    const int w = a.width;
    double total = 0.0;
    for (int c = 0; c < a.channels; ++c) {
        const auto pa = a.plane(c);
        const auto pb = b.plane(c);
        std::vector<double> aa(pa.size());
        std::vector<double> bb(pa.size());
        std::vector<double> ab(pa.size());
        for (std::size_t i = 0; i < pa.size(); ++i) {
            aa[i] = pa[i] * pa[i];
            bb[i] = pb[i] * pb[i];
            ab[i] = pa[i] * pb[i];
        }
        const auto mu_a = filter_valid(pa, h, w, taps);
        const auto mu_b = filter_valid(pb, h, w, taps);
        const auto e_aa = filter_valid(aa, h, w, taps);
        const auto e_bb = filter_valid(bb, h, w, taps);
        const auto e_ab = filter_valid(ab, h, w, taps);
        double sum = 0.0;
        for (std::size_t i = 0; i < mu_a.size(); ++i) {
            const double ma = mu_a[i];
            const double mb = mu_b[i];
            const double var_a = e_aa[i] - ma * ma;
            const double var_b = e_bb[i] - mb * mb;
            const double cov = e_ab[i] - ma * mb;
            sum += ((2.0 * ma * mb + kSsimC1) * (2.0 * cov + kSsimC2)) /
                   ((ma * ma + mb * mb + kSsimC1) * (var_a + var_b + kSsimC2));
        }
        total += sum / static_cast<double>(mu_a.size());
    }
    return total / a.channels;
}

std::vector<EvalItem> load_eval_items(const DatasetManifest& manifest, const std::vector<double>& ratio_filter) {
    std::vector<EvalItem> items;
    for (const auto& it : manifest.items) {
        if (!ratio_filter.empty() && std::find(ratio_filter.begin(), ratio_filter.end(), it.ratio) == ratio_filter.end()) {
            continue;
        }
        items.push_back({it.id, it.scene, load_pair(manifest, it)});
    }
    return items;
}

MetricReport iteration_sweep(const std::vector<EvalItem>& items, const DenoiserHandle& backbone,
                             const ProcessConfig& cfg, const SweepOptions& options) {
    if (items.empty()) throw std::invalid_argument("iteration_sweep: empty dataset");
    if (options.steps_list.empty()) throw std::invalid_argument("iteration_sweep: empty steps list");
    for (int s : options.steps_list) {
        if (s < 0) throw std::invalid_argument("iteration_sweep: negative step count");
    }

    const std::string loss_label = options.loss_label.empty() ? to_string(cfg.loss) : options.loss_label;
    std::vector<std::vector<MetricRow>> per_item(items.size());
    run_sharded(static_cast<int>(items.size()), options.jobs, [&](int index) {
        const auto& item = items[static_cast<std::size_t>(index)];
        for (int steps : options.steps_list) {
            ProcessConfig run_cfg = cfg;
            run_cfg.t_infer = steps;
            Rng rng(options.seed, static_cast<std::uint64_t>(item.id) * 1024 + static_cast<std::uint64_t>(steps));
            const auto start = std::chrono::steady_clock::now();
            const auto result = infer(item.pair.x_noisy, item.pair.meta_noisy, item.pair.meta_noisy.ratio, backbone,
                                      run_cfg, rng);
            const double ms =
                std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - start).count();
            for (std::size_t k = 0; k < result.trace.steps.size(); ++k) {
                const auto& estimate = result.trace.steps[k].x_hat_ref;
                MetricRow row;
                row.item = item.id;
                row.scene = item.scene;
                row.ratio = item.pair.meta_noisy.ratio;
                row.steps = steps;
                row.step_index = static_cast<int>(k);
                row.arl = backbone.arl_enabled();
                row.loss = loss_label;
                row.psnr = psnr(estimate, item.pair.x_ref);
                row.ssim = ssim(estimate, item.pair.x_ref);
                row.runtime_ms = ms;
                per_item[static_cast<std::size_t>(index)].push_back(std::move(row));
            }
        }
    });

    MetricReport report;
    for (auto& rows : per_item) {
        for (auto& r : rows) report.rows.push_back(std::move(r));
    }
    for (int steps : options.steps_list) {
        CurvePoint point{steps, 0.0, 0.0};
        int n = 0;
        for (const auto& r : report.rows) {
            if (r.steps == steps && r.step_index == steps) {
                point.psnr_mean += r.psnr;
                point.ssim_mean += r.ssim;
                ++n;
            }
        }
        point.psnr_mean /= n;
        point.ssim_mean /= n;
        report.curve.push_back(point);
    }
    return report;
}

void write_report_csv(const std::filesystem::path& path, const MetricReport& report) {
    std::ofstream out(path, std::ios::trunc);
    if (!out) throw std::runtime_error("cannot write " + path.string());
    out << "item,scene,ratio,steps,step_index,arl,loss,psnr,ssim\n";
    for (const auto& r : report.rows) {
        out << r.item << ',' << r.scene << ',' << fmt(r.ratio) << ',' << r.steps << ',' << r.step_index << ','
            << (r.arl ? 1 : 0) << ',' << r.loss << ',' << fmt(r.psnr) << ',' << fmt(r.ssim) << '\n';
    }
}

void write_timing_csv(const std::filesystem::path& path, const MetricReport& report) {
    std::ofstream out(path, std::ios::trunc);
    if (!out) throw std::runtime_error("cannot write " + path.string());
    out << "item,steps,runtime_ms\n";
    for (const auto& r : report.rows) {
        if (r.step_index == r.steps) out << r.item << ',' << r.steps << ',' << fmt(r.runtime_ms) << '\n';
    }
}

void write_curve_csv(const std::filesystem::path& path, const MetricReport& report) {
    std::ofstream out(path, std::ios::trunc);
    if (!out) throw std::runtime_error("cannot write " + path.string());
    out << "steps,psnr_mean,ssim_mean\n";
    for (const auto& p : report.curve) out << p.steps << ',' << fmt(p.psnr_mean) << ',' << fmt(p.ssim_mean) << '\n';
}

nlohmann::json report_summary(const MetricReport& report) {
    nlohmann::json curve = nlohmann::json::array();
    for (const auto& p : report.curve) {
        curve.push_back({{"steps", p.steps}, {"psnr_mean", p.psnr_mean}, {"ssim_mean", p.ssim_mean}});
    }
    // Per (steps, step_index) means: the estimate quality along each run.
    std::map<std::pair<int, int>, std::pair<double, int>> per_step;
    for (const auto& r : report.rows) {
        auto& acc = per_step[{r.steps, r.step_index}];
        acc.first += r.psnr;
        acc.second += 1;
    }
    nlohmann::json steps = nlohmann::json::array();
    for (const auto& [key, acc] : per_step) {
        steps.push_back({{"steps", key.first}, {"step_index", key.second}, {"psnr_mean", acc.first / acc.second}});
    }
    return {{"rows", report.rows.size()}, {"curve", curve}, {"per_step", steps}};
}

HighlightDelta highlight_error_delta(const Image& x_ref, const Image& result_before, const Image& result_after,
                                     double threshold, const Image& mask_source) {
    require_same_shape(x_ref, result_before, "highlight_error_delta");
    require_same_shape(x_ref, result_after, "highlight_error_delta");
    const Image& source = mask_source.empty() ? x_ref : mask_source;
    require_same_shape(x_ref, source, "highlight_error_delta mask");

    HighlightDelta out;
    out.delta_map = Image(x_ref.channels, x_ref.height, x_ref.width);
    double before = 0.0;
    double after = 0.0;
    for (std::size_t i = 0; i < x_ref.size(); ++i) {
        const double eb = std::fabs(result_before.data[i] - x_ref.data[i]);
        const double ea = std::fabs(result_after.data[i] - x_ref.data[i]);
        out.delta_map.data[i] = ea - eb;
        if (std::clamp(source.data[i], 0.0, 1.0) >= threshold) {
            before += eb;
            after += ea;
            ++out.mask_pixels;
        }
    }
    out.empty_mask = out.mask_pixels == 0;
    if (!out.empty_mask) {
        out.mae_before = before / static_cast<double>(out.mask_pixels);
        out.mae_after = after / static_cast<double>(out.mask_pixels);
        out.delta = out.mae_after - out.mae_before;
    }
    return out;
}

}  // namespace expdiff
