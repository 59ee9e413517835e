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

#include "expdiff/backbone.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <fstream>
#include <iterator>
#include <nlohmann/json.hpp>
#include <stdexcept>

#include "expdiff/edi_io.hpp"

namespace expdiff {

namespace {

std::atomic<std::uint64_t> g_revision{1};

std::uint64_t next_revision() { return g_revision.fetch_add(1, std::memory_order_relaxed); }

// Mirror index without repeating the edge sample (…2 1 | 0 1 2 … n-1 | n-2 …).
int reflect_index(int i, int n) {
    if (n == 1) return 0;
    const int period = 2 * (n - 1);
    i %= period;
    if (i < 0) i += period;
    return i < n ? i : period - i;
}

Image pad_reflect(const Image& img, int pad) {
    if (pad == 0) return img;
    const int hp = img.height + 2 * pad;
    const int wp = img.width + 2 * pad;
    Image out(img.channels, hp, wp);
    for (int c = 0; c < img.channels; ++c) {
        for (int y = 0; y < hp; ++y) {
            const int sy = reflect_index(y - pad, img.height);
            for (int x = 0; x < wp; ++x) {
                out.at(c, y, x) = img.at(c, sy, reflect_index(x - pad, img.width));
            }
        }
    }
    return out;
}

// Adjoint of pad_reflect: fold padded gradients back onto the source grid.
Image unpad_reflect(const Image& grad_padded, int pad, int height, int width) {
    Image out(grad_padded.channels, height, width);
    for (int c = 0; c < grad_padded.channels; ++c) {
        for (int y = 0; y < grad_padded.height; ++y) {
            const int sy = reflect_index(y - pad, height);
            for (int x = 0; x < grad_padded.width; ++x) {
                out.at(c, sy, reflect_index(x - pad, width)) += grad_padded.at(c, y, x);
            }
        }
    }
    return out;
}

Image conv_forward(const LayerSpec& layer, const double* weights, const double* bias, const Image& padded, int height,
                   int width) {
    const int k = layer.kernel;
    const int wp = padded.width;
    Image out(layer.out_channels, height, width);
    for (int o = 0; o < layer.out_channels; ++o) {
        for (int y = 0; y < height; ++y) {
            double* dst = &out.at(o, y, 0);
            std::fill(dst, dst + width, bias[o]);
            for (int i = 0; i < layer.in_channels; ++i) {
                const double* w = weights + (static_cast<std::size_t>(o) * layer.in_channels + i) * k * k;
                for (int ky = 0; ky < k; ++ky) {
                    const double* src = &padded.data[(static_cast<std::size_t>(i) * padded.height + y + ky) * wp];
                    for (int kx = 0; kx < k; ++kx) {
                        const double wv = w[ky * k + kx];
                        const double* s = src + kx;
                        for (int x = 0; x < width; ++x) dst[x] += wv * s[x];
                    }
                }
            }
        }
    }
    return out;
}

// Accumulates weight/bias gradients and returns the gradient w.r.t. the
// padded input.
Image conv_backward(const LayerSpec& layer, const double* weights, const Image& padded, const Image& grad_out,
                    double* grad_w, double* grad_b) {
    const int k = layer.kernel;
    const int wp = padded.width;
    const int height = grad_out.height;
    const int width = grad_out.width;
    Image grad_padded(padded.channels, padded.height, padded.width);
    for (int o = 0; o < layer.out_channels; ++o) {
        double bsum = 0.0;
        for (int y = 0; y < height; ++y) {
            const double* g = &grad_out.at(o, y, 0);
            for (int x = 0; x < width; ++x) bsum += g[x];
            for (int i = 0; i < layer.in_channels; ++i) {
                const std::size_t wbase = (static_cast<std::size_t>(o) * layer.in_channels + i) * k * k;
                for (int ky = 0; ky < k; ++ky) {
                    const std::size_t row = (static_cast<std::size_t>(i) * padded.height + y + ky) * wp;
                    const double* src = &padded.data[row];
                    double* gsrc = &grad_padded.data[row];
                    for (int kx = 0; kx < k; ++kx) {
                        const double wv = weights[wbase + ky * k + kx];
                        const double* s = src + kx;
                        double* gs = gsrc + kx;
                        double acc = 0.0;
                        for (int x = 0; x < width; ++x) {
                            acc += g[x] * s[x];
                            gs[x] += wv * g[x];
                        }
                        grad_w[wbase + ky * k + kx] += acc;
                    }
                }
            }
        }
        grad_b[o] += bsum;
    }
    return grad_padded;
}

double logistic(double z) { return 1.0 / (1.0 + std::exp(-z)); }

bool inside_open_unit(double v) { return v > 0.0 && v < 1.0; }

void check_mask(const ArlOutput& out, const Image& x_t) {
    if (out.m.channels != 1 || out.m.height != x_t.height || out.m.width != x_t.width) {
        throw std::invalid_argument("arl: mask must be single-channel with the input's spatial size");
    }
    for (double v : out.m.data) {
        if (!(v >= 0.0 && v <= 1.0)) throw std::invalid_argument("arl: mask value outside [0,1]");
    }
}

const char* activation_name(Activation a) { return a == Activation::linear ? "linear" : "leaky_relu"; }

Activation activation_from(const std::string& s) {
    if (s == "linear") return Activation::linear;
    if (s == "leaky_relu") return Activation::leaky_relu;
    throw std::invalid_argument("unknown activation '" + s + "'");
}

}  // namespace

Image arl_combine(const ArlOutput& out, const Image& x_t, double lambda_t, double lambda_ref) {
    require_same_shape(out.x_hat, x_t, "arl_combine x_hat");
    require_same_shape(out.r_hat, x_t, "arl_combine r_hat");
    check_mask(out, x_t);
    const double gain = lambda_ref / lambda_t;
    Image f(x_t.channels, x_t.height, x_t.width);
    const std::size_t plane = x_t.plane_size();
    for (int c = 0; c < x_t.channels; ++c) {
        for (std::size_t p = 0; p < plane; ++p) {
            const std::size_t i = c * plane + p;
            const double m = out.m.data[p];
            const double direct = std::clamp(out.x_hat.data[i], 0.0, 1.0);
            const double residual = std::clamp(gain * x_t.data[i] + out.r_hat.data[i], 0.0, 1.0);
            f.data[i] = m * direct + (1.0 - m) * residual;
        }
    }
    return f;
}

ArlOutput arl_backward(const ArlOutput& out, const Image& x_t, double lambda_t, double lambda_ref,
                       const Image& grad_f) {
    require_same_shape(grad_f, x_t, "arl_backward");
    check_mask(out, x_t);
    const double gain = lambda_ref / lambda_t;
    ArlOutput g{Image(x_t.channels, x_t.height, x_t.width), Image(x_t.channels, x_t.height, x_t.width),
                Image(1, x_t.height, x_t.width)};
    const std::size_t plane = x_t.plane_size();
    for (int c = 0; c < x_t.channels; ++c) {
        for (std::size_t p = 0; p < plane; ++p) {
            const std::size_t i = c * plane + p;
            const double m = out.m.data[p];
            const double xh = out.x_hat.data[i];
            const double res = gain * x_t.data[i] + out.r_hat.data[i];
            const double gf = grad_f.data[i];
            g.x_hat.data[i] = inside_open_unit(xh) ? gf * m : 0.0;
            g.r_hat.data[i] = inside_open_unit(res) ? gf * (1.0 - m) : 0.0;
            g.m.data[p] += gf * (std::clamp(xh, 0.0, 1.0) - std::clamp(res, 0.0, 1.0));
        }
    }
    return g;
}

ConvNetParams::ConvNetParams(std::vector<LayerSpec> layers, int image_channels, bool arl_enabled)
    : layers_(std::move(layers)), image_channels_(image_channels), arl_enabled_(arl_enabled),
      revision_(next_revision()) {
    if (layers_.empty()) throw std::invalid_argument("convnet: at least one layer required");
    if (layers_.front().in_channels != image_channels) {
        throw std::invalid_argument("convnet: first layer must consume the image channels");
    }
    if (layers_.back().out_channels != output_channels()) {
        throw std::invalid_argument("convnet: final layer must emit " + std::to_string(output_channels()) +
                                    " channels");
    }
    std::size_t total = 0;
    for (std::size_t l = 0; l < layers_.size(); ++l) {
        const auto& spec = layers_[l];
        if (spec.kernel <= 0 || spec.kernel % 2 == 0) throw std::invalid_argument("convnet: kernel must be odd");
        if (l > 0 && spec.in_channels != layers_[l - 1].out_channels) {
            throw std::invalid_argument("convnet: layer " + std::to_string(l) + " channel mismatch");
        }
        offsets_.push_back(total);
        total += spec.weight_count() + spec.out_channels;
    }
    values_.assign(total, 0.0);
}

ConvNetParams ConvNetParams::make(int image_channels, bool arl_enabled, int hidden, int depth, int kernel, Rng& rng) {
    if (depth < 1 || hidden < 1) throw std::invalid_argument("convnet: depth and hidden width must be >= 1");
    const int out_ch = arl_enabled ? 2 * image_channels + 1 : image_channels;
    std::vector<LayerSpec> layers;
    for (int l = 0; l < depth; ++l) {
        const bool last = l == depth - 1;
        layers.push_back({l == 0 ? image_channels : hidden, last ? out_ch : hidden, kernel,
                          last ? Activation::linear : Activation::leaky_relu});
    }
    ConvNetParams p(std::move(layers), image_channels, arl_enabled);
    for (std::size_t l = 0; l < p.layers_.size(); ++l) {
        const auto& spec = p.layers_[l];
        const double fan_in = static_cast<double>(spec.in_channels) * spec.kernel * spec.kernel;
        const double stddev = spec.activation == Activation::linear ? 0.1 / std::sqrt(fan_in) : std::sqrt(2.0 / fan_in);
        double* w = p.values_.data() + p.offsets_[l];
        for (std::size_t i = 0; i < spec.weight_count(); ++i) w[i] = stddev * rng.normal();
    }
    return p;
}

std::span<double> ConvNetParams::mutable_values() {
    revision_ = next_revision();
    return values_;
}

ConvNetForward convnet_forward(const ConvNetParams& params, const Image& x_in) {
    const auto& layers = params.layers();
    if (x_in.channels != params.image_channels()) {
        throw std::invalid_argument("convnet_forward: expected " + std::to_string(params.image_channels()) +
                                    " input channels, got " + std::to_string(x_in.channels));
    }
    ConvNetForward fw;
    fw.cache.revision = params.revision();
    fw.cache.height = x_in.height;
    fw.cache.width = x_in.width;
    const auto values = params.values();

    Image act = x_in;
    Image last;
    for (std::size_t l = 0; l < layers.size(); ++l) {
        const auto& spec = layers[l];
        fw.cache.padded_inputs.push_back(pad_reflect(act, spec.kernel / 2));
        Image z = conv_forward(spec, values.data() + params.weight_offset(l), values.data() + params.bias_offset(l),
                               fw.cache.padded_inputs.back(), x_in.height, x_in.width);
        if (spec.activation == Activation::leaky_relu) {
            act = z;
            for (double& v : act.data) v = v > 0.0 ? v : kLeakySlope * v;
            fw.cache.preacts.push_back(std::move(z));
        } else {
            act = std::move(z);
        }
    }

    const int c = params.image_channels();
    const std::size_t plane = x_in.plane_size();
    fw.out.x_hat = Image(c, x_in.height, x_in.width);
    std::copy_n(act.data.begin(), c * plane, fw.out.x_hat.data.begin());
    if (params.arl_enabled()) {
        fw.out.r_hat = Image(c, x_in.height, x_in.width);
        std::copy_n(act.data.begin() + static_cast<std::ptrdiff_t>(c * plane), c * plane, fw.out.r_hat.data.begin());
        fw.out.m = Image(1, x_in.height, x_in.width);
        for (std::size_t p = 0; p < plane; ++p) fw.out.m.data[p] = logistic(act.data[2 * c * plane + p]);
        fw.cache.mask = fw.out.m;
    } else {
        fw.out.r_hat = Image(c, x_in.height, x_in.width, 0.0);
        fw.out.m = Image(1, x_in.height, x_in.width, 1.0);
    }
    return fw;
}

ConvNetBackward convnet_backward(const ConvNetParams& params, const ConvNetCache& cache, const ArlOutput& grad_out) {
    if (cache.revision != params.revision() || cache.padded_inputs.size() != params.layers().size()) {
        throw std::logic_error("convnet_backward: stale cache (parameters changed since forward)");
    }
    const auto& layers = params.layers();
    const int c = params.image_channels();
    const int h = cache.height;
    const int w = cache.width;
    const std::size_t plane = static_cast<std::size_t>(h) * w;

    Image grad(params.output_channels(), h, w);
    if (grad_out.x_hat.channels != c || grad_out.x_hat.height != h || grad_out.x_hat.width != w) {
        throw std::invalid_argument("convnet_backward: gradient shape does not match the cached forward");
    }
    std::copy_n(grad_out.x_hat.data.begin(), c * plane, grad.data.begin());
    if (params.arl_enabled()) {
        std::copy_n(grad_out.r_hat.data.begin(), c * plane, grad.data.begin() + static_cast<std::ptrdiff_t>(c * plane));
        for (std::size_t p = 0; p < plane; ++p) {
            const double m = cache.mask.data[p];
            grad.data[2 * c * plane + p] = grad_out.m.data[p] * m * (1.0 - m);
        }
    }

    ConvNetBackward bw;
    bw.param_grads.assign(params.param_count(), 0.0);
    const auto values = params.values();
    for (std::size_t l = layers.size(); l-- > 0;) {
        const auto& spec = layers[l];
        Image grad_padded = conv_backward(spec, values.data() + params.weight_offset(l), cache.padded_inputs[l], grad,
                                          bw.param_grads.data() + params.weight_offset(l),
                                          bw.param_grads.data() + params.bias_offset(l));
        grad = unpad_reflect(grad_padded, spec.kernel / 2, h, w);
        if (l > 0) {
            const Image& z = cache.preacts[l - 1];
            for (std::size_t i = 0; i < grad.size(); ++i) {
                if (!(z.data[i] > 0.0)) grad.data[i] *= kLeakySlope;
            }
        }
    }
    bw.input_grad = std::move(grad);
    return bw;
}

ArlOutput identity_backbone(const Image& x_in) {
    return {x_in, Image(x_in.channels, x_in.height, x_in.width, 0.0), Image(1, x_in.height, x_in.width, 1.0)};
}

std::vector<double> gaussian_taps(double sigma) {
    if (!(sigma > 0.0)) throw std::invalid_argument("gaussian filter: sigma must be > 0");
    const int radius = static_cast<int>(std::ceil(3.0 * sigma));
    std::vector<double> taps(2 * radius + 1);
    double sum = 0.0;
    for (int i = -radius; i <= radius; ++i) {
        taps[i + radius] = std::exp(-0.5 * i * i / (sigma * sigma));
        sum += taps[i + radius];
    }
    for (double& t : taps) t /= sum;
    return taps;
}

ArlOutput gaussian_filter_backbone(const Image& x_in, double sigma) {
    const auto taps = gaussian_taps(sigma);
    const int radius = static_cast<int>(taps.size() / 2);
    Image tmp(x_in.channels, x_in.height, x_in.width);
    Image blurred(x_in.channels, x_in.height, x_in.width);
    for (int c = 0; c < x_in.channels; ++c) {
        for (int y = 0; y < x_in.height; ++y) {
            for (int x = 0; x < x_in.width; ++x) {
                double acc = 0.0;
                for (int t = -radius; t <= radius; ++t) acc += taps[t + radius] * x_in.at(c, y, reflect_index(x + t, x_in.width));
                tmp.at(c, y, x) = acc;
            }
        }
        for (int y = 0; y < x_in.height; ++y) {
            for (int x = 0; x < x_in.width; ++x) {
                double acc = 0.0;
                for (int t = -radius; t <= radius; ++t) acc += taps[t + radius] * tmp.at(c, reflect_index(y + t, x_in.height), x);
                blurred.at(c, y, x) = acc;
            }
        }
    }
    Image residual = blurred;
    for (std::size_t i = 0; i < residual.size(); ++i) residual.data[i] -= x_in.data[i];
    return {std::move(blurred), std::move(residual), Image(1, x_in.height, x_in.width, 1.0)};
}

DenoiserHandle DenoiserHandle::convnet(ConvNetParams params) {
    DenoiserHandle h;
    h.kind_ = BackboneKind::convnet;
    h.params_ = std::move(params);
    return h;
}

DenoiserHandle DenoiserHandle::identity() {
    DenoiserHandle h;
    h.kind_ = BackboneKind::identity;
    return h;
}

DenoiserHandle DenoiserHandle::gaussian_filter(double sigma) {
    if (!(sigma > 0.0)) throw std::invalid_argument("gaussian filter: sigma must be > 0");
    DenoiserHandle h;
    h.kind_ = BackboneKind::gaussian_filter;
    h.sigma_ = sigma;
    return h;
}

bool DenoiserHandle::arl_enabled() const { return kind_ == BackboneKind::convnet && params_.arl_enabled(); }

DenoiserHandle::Evaluation DenoiserHandle::evaluate(const Image& x_t, double lambda_t, double lambda_ref) const {
    Evaluation ev;
    ev.x_t = x_t;
    ev.lambda_t = lambda_t;
    ev.lambda_ref = lambda_ref;
    const Image x_in = amplify(x_t, lambda_t, lambda_ref);
    switch (kind_) {
        case BackboneKind::identity:
            ev.raw = identity_backbone(x_in);
            break;
        case BackboneKind::gaussian_filter:
            ev.raw = gaussian_filter_backbone(x_in, sigma_);
            break;
        case BackboneKind::convnet: {
            auto fw = convnet_forward(params_, x_in);
            ev.raw = std::move(fw.out);
            ev.cache = std::move(fw.cache);
            break;
        }
    }
    ev.f = arl_combine(ev.raw, x_t, lambda_t, lambda_ref);
    return ev;
}

void DenoiserHandle::accumulate_backward(const Evaluation& eval, const Image& grad_f,
                                         std::span<double> param_grads) const {
    if (kind_ != BackboneKind::convnet) return;
    if (param_grads.size() != params_.param_count()) {
        throw std::invalid_argument("accumulate_backward: gradient buffer size mismatch");
    }
    const ArlOutput g = arl_backward(eval.raw, eval.x_t, eval.lambda_t, eval.lambda_ref, grad_f);
    const auto bw = convnet_backward(params_, eval.cache.value(), g);
    for (std::size_t i = 0; i < param_grads.size(); ++i) param_grads[i] += bw.param_grads[i];
}

void save_weights(const std::filesystem::path& path, const ConvNetParams& params, const WeightsInfo& info) {
    nlohmann::json layers = nlohmann::json::array();
    for (const auto& l : params.layers()) {
        layers.push_back({{"in", l.in_channels},
                          {"out", l.out_channels},
                          {"kernel", l.kernel},
                          {"activation", activation_name(l.activation)}});
    }
    const nlohmann::json header = {
        {"layers", layers},
        {"arl_enabled", params.arl_enabled()},
        {"channels", params.image_channels()},
        {"baseline", info.baseline},
        {"config_digest", info.config_digest},
        {"note", info.note},
        {"sampling_gain", info.sampling_gain},
        {"ratio", info.ratio},
        {"count", params.param_count()},
    };
    std::string blob = "EDW1" + header.dump() + "\n";
    for (double v : params.values()) append_le_f64(blob, v);
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw ContainerError(ContainerErrorKind::io, "cannot write " + path.string());
    out.write(blob.data(), static_cast<std::streamsize>(blob.size()));
    if (!out) throw ContainerError(ContainerErrorKind::io, "short write to " + path.string());
}

WeightsFile load_weights(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw ContainerError(ContainerErrorKind::io, "cannot open " + path.string());
    const std::string blob{std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
    if (blob.size() < 4 || blob.compare(0, 4, "EDW1") != 0) {
        throw ContainerError(ContainerErrorKind::not_edi, path.string() + ": not an EDW1 weights file");
    }
    const auto eol = blob.find('\n', 4);
    if (eol == std::string::npos) {
        throw ContainerError(ContainerErrorKind::malformed_header, path.string() + ": header not terminated");
    }
    WeightsFile wf;
    std::size_t count = 0;
    try {
        const auto header = nlohmann::json::parse(blob.begin() + 4, blob.begin() + static_cast<std::ptrdiff_t>(eol));
        std::vector<LayerSpec> layers;
        for (const auto& l : header.at("layers")) {
            layers.push_back({l.at("in").get<int>(), l.at("out").get<int>(), l.at("kernel").get<int>(),
                              activation_from(l.at("activation").get<std::string>())});
        }
        wf.params = ConvNetParams(std::move(layers), header.at("channels").get<int>(),
                                  header.at("arl_enabled").get<bool>());
        wf.info.baseline = header.value("baseline", false);
        wf.info.config_digest = header.value("config_digest", std::string{});
        wf.info.note = header.value("note", std::string{});
        wf.info.sampling_gain = header.value("sampling_gain", 0.0);
        wf.info.ratio = header.value("ratio", 0.0);
        count = header.at("count").get<std::size_t>();
    } catch (const std::exception& e) {
        throw ContainerError(ContainerErrorKind::malformed_header, path.string() + ": malformed header: " + e.what());
    }
    if (count != wf.params.param_count() || blob.size() - eol - 1 != count * 8) {
        throw ContainerError(ContainerErrorKind::payload_mismatch, path.string() + ": payload length mismatch");
    }
    auto values = wf.params.mutable_values();
    for (std::size_t i = 0; i < count; ++i) values[i] = load_le_f64(blob.data() + eol + 1 + 8 * i);
    return wf;
}

}  // namespace expdiff
