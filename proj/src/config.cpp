#include "wavesr/config.hpp"

#include <algorithm>
#include <fstream>
#include <functional>
#include <map>
#include <sstream>

#include "wavesr/error.hpp"

namespace wsr {

namespace {

std::string trim(const std::string& s) {
    const auto b = s.find_first_not_of(" \t\r");
    if (b == std::string::npos) return "";
    const auto e = s.find_last_not_of(" \t\r");
    return s.substr(b, e - b + 1);
}

std::vector<std::string> split_list(const std::string& s) {
    std::vector<std::string> out;
    std::stringstream ss(s);
    std::string item;
    while (std::getline(ss, item, ',')) {
        item = trim(item);
        if (!item.empty()) out.push_back(item);
    }
    return out;
}

template <class T>
T parse_number(const std::string& key, const std::string& v) {
    std::istringstream in(v);
    T out{};
    in >> out;
    if (in.fail() || !(in >> std::ws).eof()) {
        throw ConfigError("config key '" + key + "': cannot parse '" + v + "' as a number");
    }
    return out;
}

bool parse_bool(const std::string& key, const std::string& v) {
    if (v == "true" || v == "1" || v == "yes" || v == "on") return true;
    if (v == "false" || v == "0" || v == "no" || v == "off") return false;
    throw ConfigError("config key '" + key + "': expected true/false, got '" + v + "'");
}

using Setter = std::function<void(RunConfig&, const std::string& key, const std::string& value)>;

const std::map<std::string, Setter>& setters() {
    static const std::map<std::string, Setter> table = [] {
        std::map<std::string, Setter> m;
        auto i32 = [](auto field) {
            return Setter([field](RunConfig& c, const std::string& k, const std::string& v) {
                field(c) = parse_number<int>(k, v);
            });
        };
        auto f32 = [](auto field) {
            return Setter([field](RunConfig& c, const std::string& k, const std::string& v) {
                field(c) = parse_number<float>(k, v);
            });
        };
        auto flag = [](auto field) {
            return Setter([field](RunConfig& c, const std::string& k, const std::string& v) {
                field(c) = parse_bool(k, v);
            });
        };
#define WSR_FIELD(expr) [](RunConfig& c) -> auto& { return c.expr; }
        m["run.seed"] = [](RunConfig& c, const std::string& k, const std::string& v) {
            c.seed = parse_number<std::uint64_t>(k, v);
        };
        m["run.out"] = [](RunConfig& c, const std::string&, const std::string& v) { c.out = v; };

        m["data.dir"] = [](RunConfig& c, const std::string&, const std::string& v) { c.data_dir = v; };
        m["data.scenes"] = i32(WSR_FIELD(data.num_scenes));
        m["data.frames"] = i32(WSR_FIELD(data.scene.num_frames));
        m["data.height"] = i32(WSR_FIELD(data.scene.height));
        m["data.width"] = i32(WSR_FIELD(data.scene.width));
        m["data.objects"] = i32(WSR_FIELD(data.scene.num_objects));
        m["data.tex_freq_min"] = f32(WSR_FIELD(data.scene.tex_freq_min));
        m["data.tex_freq_max"] = f32(WSR_FIELD(data.scene.tex_freq_max));
        m["data.camera_speed"] = f32(WSR_FIELD(data.scene.camera_speed));
        m["data.object_speed"] = f32(WSR_FIELD(data.scene.object_speed));
        m["data.light_speed"] = f32(WSR_FIELD(data.scene.light_speed));
        m["data.light_intensity"] = f32(WSR_FIELD(data.scene.light_intensity));
        m["data.train_ratio"] = [](RunConfig& c, const std::string& k, const std::string& v) {
            c.data.train_ratio = parse_number<double>(k, v);
        };
        m["data.val_ratio"] = [](RunConfig& c, const std::string& k, const std::string& v) {
            c.data.val_ratio = parse_number<double>(k, v);
        };

        m["model.wavelet"] = [](RunConfig& c, const std::string&, const std::string& v) {
            c.model.wavelet = v == "none" ? std::nullopt : std::optional(parse_wavelet_spec(v));
        };
        m["model.variant"] = [](RunConfig& c, const std::string&, const std::string& v) {
            c.model.variant = parse_variant(v);
        };
        m["model.base_channels"] = i32(WSR_FIELD(model.base_channels));
        m["model.inr_hidden"] = i32(WSR_FIELD(model.inr_hidden));
        m["model.inr_layers"] = i32(WSR_FIELD(model.inr_layers));
        m["model.freq_channels"] = i32(WSR_FIELD(model.freq_channels));
        m["model.lr_blocks"] = i32(WSR_FIELD(model.lr_blocks));
        m["model.rir_blocks"] = i32(WSR_FIELD(model.rir_blocks));
        m["model.lwgc_layers"] = i32(WSR_FIELD(model.lwgc_layers));
        m["model.scale_min"] = f32(WSR_FIELD(model.scale_min));
        m["model.scale_max"] = f32(WSR_FIELD(model.scale_max));
        m["model.head_init_scale"] = f32(WSR_FIELD(model.head_init_scale));

        m["train.steps"] = i32(WSR_FIELD(train.steps));
        m["train.batch"] = i32(WSR_FIELD(train.batch));
        m["train.lr"] = f32(WSR_FIELD(train.lr));
        m["train.beta1"] = f32(WSR_FIELD(train.beta1));
        m["train.beta2"] = f32(WSR_FIELD(train.beta2));
        m["train.eps"] = f32(WSR_FIELD(train.eps));
        m["train.cosine"] = flag(WSR_FIELD(train.cosine));
        m["train.checkpoint_every"] = i32(WSR_FIELD(train.checkpoint_every));
        m["train.patch"] = i32(WSR_FIELD(train.patch));
        m["train.single_scale"] = flag(WSR_FIELD(train.single_scale));

        m["loss.wavelet"] = f32(WSR_FIELD(loss.wavelet));
        m["loss.image"] = f32(WSR_FIELD(loss.image));
        m["loss.ssim"] = f32(WSR_FIELD(loss.ssim));
        m["loss.perceptual"] = f32(WSR_FIELD(loss.perceptual));
        m["loss.mask"] = f32(WSR_FIELD(loss.mask));
        m["loss.temporal"] = f32(WSR_FIELD(loss.temporal));

        m["eval.scales"] = [](RunConfig& c, const std::string&, const std::string& v) { c.eval.scales = parse_scales(v); };
        m["eval.dump_images"] = flag(WSR_FIELD(eval.dump_images));
        m["eval.split"] = [](RunConfig& c, const std::string&, const std::string& v) { c.eval.split = v; };
        m["eval.max_frames"] = i32(WSR_FIELD(eval.max_frames));

        m["bench.warmup"] = i32(WSR_FIELD(bench.warmup));
        m["bench.iterations"] = i32(WSR_FIELD(bench.iterations));
        m["bench.height"] = i32(WSR_FIELD(bench.height));
        m["bench.width"] = i32(WSR_FIELD(bench.width));
        m["bench.scale"] = f32(WSR_FIELD(bench.scale));
        m["bench.configs"] = [](RunConfig& c, const std::string&, const std::string& v) { c.bench.configs = split_list(v); };

        m["ablate.configs"] = [](RunConfig& c, const std::string&, const std::string& v) {
            c.ablate.configs = split_list(v);
        };
        m["ablate.steps"] = i32(WSR_FIELD(ablate.steps));
        m["ablate.scale"] = f32(WSR_FIELD(ablate.scale));
#undef WSR_FIELD
        return m;
    }();
    return table;
}

}  // namespace

std::vector<float> parse_scales(const std::string& s) {
    if (trim(s) == "all") return {2.0f, 3.0f, 4.0f};
    std::vector<float> out;
    for (const std::string& item : split_list(s)) out.push_back(parse_number<float>("scales", item));
    if (out.empty()) throw ConfigError("empty scale list");
    return out;
}

RunConfig parse_run_config(const std::string& text, const std::string& source) {
    RunConfig c;
    std::istringstream in(text);
    std::string line, section;
    int line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        const auto hash = line.find_first_of("#;");
        if (hash != std::string::npos) line.erase(hash);
        line = trim(line);
        if (line.empty()) continue;
        const std::string where = source + ":" + std::to_string(line_no);
        if (line.front() == '[') {
            if (line.back() != ']') throw ConfigError(where + ": malformed section header '" + line + "'");
            section = trim(line.substr(1, line.size() - 2));
            static const char* known[] = {"run", "data", "model", "train", "loss", "eval", "bench", "ablate"};
            if (std::find(std::begin(known), std::end(known), section) == std::end(known)) {
                throw ConfigError(where + ": unknown section '" + section + "'");
            }
            continue;
        }
        const auto eq = line.find('=');
        if (eq == std::string::npos) throw ConfigError(where + ": expected 'key = value', got '" + line + "'");
        if (section.empty()) throw ConfigError(where + ": key outside of any [section]");
        const std::string key = section + "." + trim(line.substr(0, eq));
        const std::string value = trim(line.substr(eq + 1));
        const auto it = setters().find(key);
        if (it == setters().end()) throw ConfigError(where + ": unknown config key '" + key + "'");
        try {
            it->second(c, key, value);
        } catch (const ConfigError& e) {
            throw ConfigError(where + ": " + e.what());
        }
    }
    return c;
}

RunConfig load_run_config(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw ConfigError("cannot read config file '" + path.string() + "'");
    std::stringstream ss;
    ss << in.rdbuf();
    return parse_run_config(ss.str(), path.string());
}

std::uint64_t RunConfig::require_seed() const {
    if (!seed) throw ConfigError("a seed is required: set [run] seed or pass --seed");
    return *seed;
}

void RunConfig::validate() const {
    require_seed();
    model.validate();
    loss.validate();
    data.scene.validate();
    if (data.num_scenes < 1) throw ConfigError("data.scenes must be at least 1");
    if (train.steps < 0) throw ConfigError("train.steps must be non-negative");
    if (train.batch < 1) throw ConfigError("train.batch must be at least 1");
    if (!(train.lr > 0.0f)) throw ConfigError("train.lr must be positive");
    if (!(train.beta1 >= 0.0f && train.beta1 < 1.0f && train.beta2 >= 0.0f && train.beta2 < 1.0f)) {
        throw ConfigError("train.beta1 and train.beta2 must lie in [0, 1)");
    }
    if (train.patch < 16 || train.patch % 2 != 0) throw ConfigError("train.patch must be even and at least 16");
    if (train.single_scale && !(model.scale_min <= 2.0f && model.scale_max >= 2.0f)) {
        throw ConfigError("train.single_scale needs 2.0 inside the model scale range");
    }
    if (loss.wavelet == 0 && loss.image == 0 && loss.ssim == 0 && loss.mask == 0 && loss.temporal == 0) {
        throw ConfigError("degenerate objective: every loss weight is zero");
    }
    for (float s : eval.scales) {
        if (!(s >= model.scale_min && s <= model.scale_max)) {
            throw ConfigError("eval scale " + std::to_string(s) + " outside the model scale range");
        }
    }
    if (bench.iterations < 1) throw ConfigError("need at least one timed iteration");
    if (bench.warmup < 0) throw ConfigError("bench.warmup must be non-negative");
}

SamplerConfig RunConfig::sampler() const {
    SamplerConfig s;
    s.patch = train.patch;
    s.scale_min = model.scale_min;
    s.scale_max = model.scale_max;
    s.single_scale = train.single_scale;
    s.use_wavelet = model.wavelet.has_value();
    if (model.wavelet) s.wavelet = *model.wavelet;
    return s;
}

const std::vector<std::string>& preset_names() {
    static const std::vector<std::string> names{"no_wavelet", "dwt_haar", "swt_haar", "swt_sym4",
                                                "swt_db4",    "fusion_ll", "multi_inr", "single_scale"};
    return names;
}

RunConfig apply_preset(const RunConfig& base, const std::string& name) {
    RunConfig c = base;
    c.train.single_scale = false;
    c.model.variant = Variant::standard;
    auto wavelet = [](Transform t, Basis b) { return std::optional(WaveletSpec{t, b, 1}); };
    if (name == "no_wavelet") {
        c.model.wavelet.reset();
        c.model.variant = Variant::no_wavelet;
    } else if (name == "dwt_haar") {
        c.model.wavelet = wavelet(Transform::dwt, Basis::haar);
    } else if (name == "swt_haar") {
        c.model.wavelet = wavelet(Transform::swt, Basis::haar);
    } else if (name == "swt_sym4") {
        c.model.wavelet = wavelet(Transform::swt, Basis::sym4);
    } else if (name == "swt_db4") {
        c.model.wavelet = wavelet(Transform::swt, Basis::db4);
    } else if (name == "fusion_ll") {
        c.model.wavelet = wavelet(Transform::swt, Basis::haar);
        c.model.variant = Variant::fusion_ll_split;
    } else if (name == "multi_inr") {
        c.model.wavelet = wavelet(Transform::dwt, Basis::haar);
        c.model.variant = Variant::multi_inr;
    } else if (name == "single_scale") {
        c.model.wavelet = wavelet(Transform::dwt, Basis::haar);
        c.train.single_scale = true;
    } else {
        throw ConfigError("unknown ablation config '" + name + "'");
    }
    return c;
}

}  // namespace wsr
