#include "etsf/config.hpp"

#include "etsf/error.hpp"

#include <fstream>
#include <set>

namespace etsf::config {

namespace {

// Checked access to one JSON object section.
class Reader {
public:
    Reader(const Json& j, std::string path) : j_(j), path_(std::move(path)) {
        if (!j_.is_object()) throw ConfigError("'" + path_ + "' must be a JSON object");
    }

    bool has(const std::string& key) {
        seen_.insert(key);
        return j_.contains(key);
    }

    std::string key_path(const std::string& key) const { return path_ + "." + key; }

    template <class T>
    void get(const std::string& key, T& out, bool required = false) {
        if (!has(key)) {
            if (required) throw ConfigError("missing required config key '" + key_path(key) + "'");
            return;
        }
        const Json& v = j_.at(key);
        try {
            if constexpr (std::is_same_v<T, bool>) {
                if (!v.is_boolean()) throw ConfigError("");
            } else if constexpr (std::is_integral_v<T>) {
                if (!v.is_number_integer() || (v.is_number_integer() && v.get<long long>() < 0)) throw ConfigError("");
            } else if constexpr (std::is_floating_point_v<T>) {
                if (!v.is_number()) throw ConfigError("");
            } else {
                if (!v.is_string()) throw ConfigError("");
            }
            out = v.get<T>();
        } catch (const std::exception&) {
            throw ConfigError("config key '" + key_path(key) + "' has the wrong type: " + v.dump());
        }
    }

    const Json& child(const std::string& key) {
        seen_.insert(key);
        return j_.at(key);
    }

    void finish() const {
        for (const auto& [key, value] : j_.items()) {
            if (seen_.count(key) == 0) throw ConfigError("unknown config key '" + key_path(key) + "'");
        }
    }

private:
    const Json& j_;
    std::string path_;
    std::set<std::string> seen_;
};

}  // namespace

std::string padding_name(Padding p) { return p == Padding::Circular ? "circular" : "zeros"; }

Padding padding_from_name(const std::string& name) {
    if (name == "zeros") return Padding::Zeros;
    if (name == "circular") return Padding::Circular;
    throw ConfigError("padding must be 'zeros' or 'circular', got '" + name + "'");
}

Json to_json(const model::ModelConfig& c) {
    return Json{{"lookback", c.lookback},   {"horizon", c.horizon}, {"channels", c.channels},
                {"d_model", c.d_model},     {"d_ff", c.d_ff},       {"layers", c.layers},
                {"heads", c.heads},         {"top_k", c.top_k},     {"dropout", c.dropout},
                {"kernel_size", c.kernel_size}, {"padding", padding_name(c.padding)}};
}

Json to_json(const data::AugmentConfig& c) {
    return Json{{"enabled", c.enabled},       {"probability", c.probability}, {"scale_std", c.scale_std},
                {"shift_std", c.shift_std},   {"jitter_std", c.jitter_std},   {"scale_around_one", c.scale_around_one}};
}

Json to_json(const trainer::TrainConfig& c) {
    return Json{{"lr", c.base_lr},
                {"epochs", c.epochs},
                {"warmup_epochs", c.warmup_epochs},
                {"min_lr", c.min_lr},
                {"batch_size", c.batch_size},
                {"beta1", c.beta1},
                {"beta2", c.beta2},
                {"eps", c.eps},
                {"seed", c.seed},
                {"special_lr_multiplier", c.special_lr_multiplier},
                {"grad_clip", c.grad_clip},
                {"augment", to_json(c.augment)}};
}

Json to_json(const DataConfig& c) {
    return Json{{"split", {{"train", c.split.train}, {"val", c.split.val}, {"test", c.split.test}}},
                {"stride", c.stride},
                {"eval_stride", c.eval_stride},
                {"noiseless_eval", c.noiseless_eval}};
}

Json to_json(const RunConfig& c) {
    return Json{{"model", to_json(c.model)}, {"train", to_json(c.train)}, {"data", to_json(c.data)}};
}

model::ModelConfig model_from_json(const Json& j, const std::string& path) {
    Reader r(j, path);
    model::ModelConfig c;
    r.get("lookback", c.lookback, true);
    r.get("horizon", c.horizon, true);
    r.get("channels", c.channels);
    r.get("d_model", c.d_model);
    r.get("d_ff", c.d_ff);
    r.get("layers", c.layers);
    r.get("heads", c.heads);
    r.get("top_k", c.top_k);
    r.get("dropout", c.dropout);
    r.get("kernel_size", c.kernel_size);
    std::string pad = padding_name(c.padding);
    r.get("padding", pad);
    c.padding = padding_from_name(pad);
    r.finish();
    return c;
}

data::AugmentConfig augment_from_json(const Json& j, const std::string& path) {
    Reader r(j, path);
    data::AugmentConfig c;
    r.get("enabled", c.enabled);
    r.get("probability", c.probability);
    r.get("scale_std", c.scale_std);
    r.get("shift_std", c.shift_std);
    r.get("jitter_std", c.jitter_std);
    r.get("scale_around_one", c.scale_around_one);
    r.finish();
    return c;
}

trainer::TrainConfig train_from_json(const Json& j, const std::string& path) {
    Reader r(j, path);
    trainer::TrainConfig c;
    r.get("lr", c.base_lr, true);
    r.get("epochs", c.epochs, true);
    r.get("warmup_epochs", c.warmup_epochs);
    r.get("min_lr", c.min_lr);
    r.get("batch_size", c.batch_size);
    r.get("beta1", c.beta1);
    r.get("beta2", c.beta2);
    r.get("eps", c.eps);
    r.get("seed", c.seed);
    r.get("special_lr_multiplier", c.special_lr_multiplier);
    r.get("grad_clip", c.grad_clip);
    if (r.has("augment")) c.augment = augment_from_json(r.child("augment"), r.key_path("augment"));
    r.finish();
    return c;
}

DataConfig data_from_json(const Json& j, const std::string& path) {
    Reader r(j, path);
    DataConfig c;
    if (r.has("split")) {
        Reader s(r.child("split"), r.key_path("split"));
        s.get("train", c.split.train, true);
        s.get("val", c.split.val, true);
        s.get("test", c.split.test, true);
        s.finish();
    }
    r.get("stride", c.stride);
    r.get("eval_stride", c.eval_stride);
    r.get("noiseless_eval", c.noiseless_eval);
    r.finish();
    return c;
}

RunConfig run_from_json(const Json& j) {
    Reader r(j, "config");
    RunConfig c;
    if (!r.has("model")) throw ConfigError("missing required config key 'model.lookback'");
    c.model = model_from_json(r.child("model"));
    if (!r.has("train")) throw ConfigError("missing required config key 'train.lr'");
    c.train = train_from_json(r.child("train"));
    if (r.has("data")) c.data = data_from_json(r.child("data"));
    // Unknown top-level keys are reported without the "config." prefix.
    for (const auto& [key, value] : j.items()) {
        if (key != "model" && key != "train" && key != "data") throw ConfigError("unknown config key '" + key + "'");
    }
    c.data.split.validate();
    if (c.data.stride == 0 || c.data.eval_stride == 0) throw ConfigError("data strides must be positive");
    c.train.validate();
    return c;
}

RunConfig load_run_config(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw IoError("cannot open config '" + path + "'");
    Json j;
    try {
        j = Json::parse(in);
    } catch (const Json::parse_error& e) {
        throw ConfigError("config '" + path + "' is not valid JSON: " + e.what());
    }
    return run_from_json(j);
}

}  // namespace etsf::config
