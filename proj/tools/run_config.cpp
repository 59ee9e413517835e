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

#include "run_config.hpp"

#include <cstdio>
#include <fstream>
#include <iterator>
#include <set>
#include <sstream>

#include "toml_lite.hpp"

namespace expdiff::cli {

namespace {

const std::set<std::string> kSections{"paths", "data", "noise", "train", "infer", "eval", "ablate"};

class Section {
public:
    Section(const nlohmann::json& root, std::string name) : name_(std::move(name)) {
        if (root.contains(name_)) {
            obj_ = root.at(name_);
            if (!obj_.is_object()) throw ConfigError("[" + name_ + "] must be a table");
        } else {
            obj_ = nlohmann::json::object();
        }
    }

    [[nodiscard]] bool has(const std::string& key) const { return obj_.contains(key); }

    double number(const std::string& key, double fallback) {
        if (!take(key)) return fallback;
        const auto& v = obj_.at(key);
        if (!v.is_number()) bad_type(key, "a number");
        return v.get<double>();
    }

    std::int64_t integer(const std::string& key, std::int64_t fallback) {
        if (!take(key)) return fallback;
        const auto& v = obj_.at(key);
        if (!v.is_number_integer()) bad_type(key, "an integer");
        return v.get<std::int64_t>();
    }

    std::uint64_t seed(const std::string& key, std::uint64_t fallback) {
        const auto v = integer(key, static_cast<std::int64_t>(fallback));
        if (v < 0) throw ConfigError("[" + name_ + "] " + key + " must be a non-negative integer");
        return static_cast<std::uint64_t>(v);
    }

    bool boolean(const std::string& key, bool fallback) {
        if (!take(key)) return fallback;
        const auto& v = obj_.at(key);
        if (!v.is_boolean()) bad_type(key, "a boolean");
        return v.get<bool>();
    }

    std::string string(const std::string& key, const std::string& fallback) {
        if (!take(key)) return fallback;
        const auto& v = obj_.at(key);
        if (!v.is_string()) bad_type(key, "a string");
        return v.get<std::string>();
    }

    std::vector<double> numbers(const std::string& key, const std::vector<double>& fallback) {
        if (!take(key)) return fallback;
        const auto& v = obj_.at(key);
        if (!v.is_array()) bad_type(key, "an array of numbers");
        std::vector<double> out;
        for (const auto& e : v) {
            if (!e.is_number()) bad_type(key, "an array of numbers");
            out.push_back(e.get<double>());
        }
        return out;
    }

    std::vector<int> integers(const std::string& key, const std::vector<int>& fallback) {
        if (!take(key)) return fallback;
        const auto& v = obj_.at(key);
        if (!v.is_array()) bad_type(key, "an array of integers");
        std::vector<int> out;
        for (const auto& e : v) {
            if (!e.is_number_integer()) bad_type(key, "an array of integers");
            out.push_back(e.get<int>());
        }
        return out;
    }

    void finish() const {
        for (const auto& [key, value] : obj_.items()) {
            if (!used_.contains(key)) throw ConfigError("unknown key '" + key + "' in [" + name_ + "]");
        }
    }

    [[noreturn]] void invalid(const std::string& key, const std::string& why) const {
        throw ConfigError("[" + name_ + "] " + key + ": " + why);
    }

private:
    bool take(const std::string& key) {
        used_.insert(key);
        return obj_.contains(key);
    }

    [[noreturn]] void bad_type(const std::string& key, const char* expected) const {
        throw ConfigError("[" + name_ + "] " + key + " must be " + expected);
    }

    std::string name_;
    nlohmann::json obj_;
    std::set<std::string> used_;
};

std::filesystem::path resolve(const std::filesystem::path& base, const std::string& p) {
    if (p.empty()) return {};
    const std::filesystem::path path(p);
    return path.is_absolute() ? path : base / path;
}

void check_ratios(Section& s, const std::string& key, const std::vector<double>& ratios) {
    for (double r : ratios) {
        if (!(r >= 1.0)) s.invalid(key, "ratios must be >= 1, got " + std::to_string(r));
    }
}

}  // namespace

RunConfig parse_run_config(const std::string& text, const std::filesystem::path& base_dir) {
    nlohmann::json root;
    try {
        root = toml::parse(text);
    } catch (const toml::ParseError& e) {
        throw ConfigError(e.what());
    }
    for (const auto& [name, value] : root.items()) {
        if (!kSections.contains(name)) throw ConfigError("unknown section [" + name + "]");
    }

    RunConfig cfg;
    cfg.raw = root;

    Section paths(root, "paths");
    cfg.paths.manifest = resolve(base_dir, paths.string("manifest", ""));
    cfg.paths.test_manifest = resolve(base_dir, paths.string("test_manifest", ""));
    cfg.paths.weights = resolve(base_dir, paths.string("weights", ""));
    cfg.paths.out_dir = resolve(base_dir, paths.string("out_dir", "."));
    paths.finish();

    Section data(root, "data");
    auto& scene = cfg.data.scene;
    cfg.data.count = static_cast<int>(data.integer("count", cfg.data.count));
    scene.channels = static_cast<int>(data.integer("channels", scene.channels));
    scene.height = static_cast<int>(data.integer("height", scene.height));
    scene.width = static_cast<int>(data.integer("width", scene.width));
    scene.weight_smooth = data.number("weight_smooth", scene.weight_smooth);
    scene.weight_shapes = data.number("weight_shapes", scene.weight_shapes);
    scene.weight_texture = data.number("weight_texture", scene.weight_texture);
    scene.highlight_fraction = data.number("highlight_fraction", scene.highlight_fraction);
    scene.seed = data.seed("seed", scene.seed);
    cfg.data.ratios = data.numbers("ratios", cfg.data.ratios);
    cfg.data.test_count = static_cast<int>(data.integer("test_count", cfg.data.test_count));
    if (data.has("test_seed")) cfg.data.test_seed = data.seed("test_seed", 0);
    if (data.has("test_highlight_fraction")) {
        cfg.data.test_highlight_fraction = data.number("test_highlight_fraction", 0.0);
        if (!(*cfg.data.test_highlight_fraction >= 0.0 && *cfg.data.test_highlight_fraction < 1.0)) {
            data.invalid("test_highlight_fraction", "must lie in [0, 1)");
        }
    }
    if (cfg.data.test_count < 0) data.invalid("test_count", "must be >= 0");
    if (cfg.data.count < 0) data.invalid("count", "must be >= 0");
    if (cfg.data.ratios.empty()) data.invalid("ratios", "must not be empty");
    check_ratios(data, "ratios", cfg.data.ratios);
    try {
        scene.validate();
    } catch (const std::invalid_argument& e) {
        throw ConfigError(std::string("[data] ") + e.what());
    }
    data.finish();

    Section noise(root, "noise");
    const auto kind = noise.string("kind", "PG");
    if (kind == "PG") {
        cfg.noise.kind = NoiseKind::pg;
    } else if (kind == "ELDlike") {
        cfg.noise.kind = NoiseKind::eld_like;
    } else {
        noise.invalid("kind", "must be \"PG\" or \"ELDlike\"");
    }
    cfg.noise.gain = noise.number("K", cfg.noise.gain);
    cfg.noise.sigma_read = noise.number("sigma_read", cfg.noise.sigma_read);
    cfg.noise.sigma_row = noise.number("sigma_row", cfg.noise.sigma_row);
    cfg.noise.quant_step = noise.number("quant_step", cfg.noise.quant_step);
    try {
        cfg.noise.validate();
    } catch (const std::invalid_argument& e) {
        throw ConfigError(std::string("[noise] ") + e.what());
    }
    noise.finish();

    Section train(root, "train");
    auto& t = cfg.train;
    t.epochs = static_cast<int>(train.integer("epochs", t.epochs));
    t.patch = static_cast<int>(train.integer("patch", t.patch));
    t.seed = train.seed("seed", t.seed);
    t.process.t_train = static_cast<int>(train.integer("T", t.process.t_train));
    try {
        t.process.loss = loss_kind_from(train.string("loss", to_string(t.process.loss)));
    } catch (const std::invalid_argument&) {
        train.invalid("loss", "must be \"l1\" or \"poisson_kl\"");
    }
    t.process.step_weights = train.numbers("step_weights", {});
    t.arl = train.boolean("arl", t.arl);
    t.baseline = train.boolean("baseline", t.baseline);
    t.learning_rate = train.number("lr", t.learning_rate);
    t.hidden = static_cast<int>(train.integer("hidden", t.hidden));
    t.depth = static_cast<int>(train.integer("depth", t.depth));
    t.kernel = static_cast<int>(train.integer("kernel", t.kernel));
    t.ratios = train.numbers("ratios", {});
    t.resynthesize = train.boolean("resynthesize", t.resynthesize);
    if (t.epochs < 0) train.invalid("epochs", "must be >= 0");
    if (t.patch < 8) train.invalid("patch", "must be >= 8");
    if (t.process.t_train < 0) train.invalid("T", "must be >= 0");
    if (!(t.learning_rate > 0.0)) train.invalid("lr", "must be > 0");
    if (t.hidden < 1 || t.depth < 1) train.invalid("hidden/depth", "must be >= 1");
    if (t.kernel < 1 || t.kernel % 2 == 0) train.invalid("kernel", "must be odd and positive");
    check_ratios(train, "ratios", t.ratios);
    if (!t.process.step_weights.empty()) {
        try {
            t.process.validate();
        } catch (const std::invalid_argument& e) {
            throw ConfigError(std::string("[train] ") + e.what());
        }
        const int expected = (t.baseline ? 0 : t.process.t_train) + 1;
        if (static_cast<int>(t.process.step_weights.size()) != expected) {
            train.invalid("step_weights", "expected " + std::to_string(expected) + " entries");
        }
    }
    train.finish();

    Section infer(root, "infer");
    cfg.infer.steps = static_cast<int>(infer.integer("steps", cfg.infer.steps));
    cfg.infer.ratio = infer.number("ratio", cfg.infer.ratio);
    cfg.infer.seed = infer.seed("seed", cfg.infer.seed);
    cfg.infer.gain = infer.number("gain", cfg.infer.gain);
    if (cfg.infer.steps < 0) infer.invalid("steps", "must be >= 0");
    if (cfg.infer.ratio != 0.0 && !(cfg.infer.ratio >= 1.0)) infer.invalid("ratio", "must be >= 1 (or 0 for auto)");
    if (cfg.infer.gain < 0.0) infer.invalid("gain", "must be >= 0");
    infer.finish();

    Section eval(root, "eval");
    cfg.eval.steps_list = eval.integers("steps_list", cfg.eval.steps_list);
    cfg.eval.threshold = eval.number("threshold", cfg.eval.threshold);
    cfg.eval.seed = eval.seed("seed", cfg.eval.seed);
    cfg.eval.ratios = eval.numbers("ratios", {});
    if (cfg.eval.steps_list.empty()) eval.invalid("steps_list", "must not be empty");
    for (int s : cfg.eval.steps_list) {
        if (s < 0) eval.invalid("steps_list", "step counts must be >= 0");
    }
    if (!(cfg.eval.threshold > 0.0 && cfg.eval.threshold <= 1.0)) eval.invalid("threshold", "must lie in (0, 1]");
    check_ratios(eval, "ratios", cfg.eval.ratios);
    eval.finish();

    Section ablate(root, "ablate");
    cfg.ablate.weights_arl = resolve(base_dir, ablate.string("weights_arl", ""));
    cfg.ablate.weights_noarl = resolve(base_dir, ablate.string("weights_noarl", ""));
    cfg.ablate.steps = static_cast<int>(ablate.integer("steps", cfg.ablate.steps));
    if (cfg.ablate.steps < 1) ablate.invalid("steps", "must be >= 1");
    ablate.finish();

    return cfg;
}

RunConfig load_run_config(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw ConfigError("cannot open config " + path.string());
    const std::string text{std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
    return parse_run_config(text, std::filesystem::absolute(path).parent_path());
}

std::string training_digest(const RunConfig& cfg) {
    nlohmann::json doc = {{"train", cfg.raw.value("train", nlohmann::json::object())},
                          {"noise", cfg.raw.value("noise", nlohmann::json::object())}};
    const std::string text = doc.dump();
    std::uint64_t h = 14695981039346656037ULL;
    for (unsigned char c : text) {
        h ^= c;
        h *= 1099511628211ULL;
    }
    char buf[17];
    std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(h));
    return buf;
}

}  // namespace expdiff::cli
