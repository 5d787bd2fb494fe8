#include "alens/config.hpp"

#include <fstream>
#include <set>

#include "alens/error.hpp"

namespace alens {

namespace {

bool is_count(const nlohmann::json& v) {
    return v.is_number_unsigned() || (v.is_number_integer() && v.get<std::int64_t>() >= 0);
}

using nlohmann::json;

template <class... Ts>
struct overloaded : Ts... {
    using Ts::operator()...;
};

// Reads typed fields from one JSON object and remembers which keys were used,
// so leftovers can be reported as unknown.
class Section {
public:
    Section(const json& node, std::string path) : node_(node), path_(std::move(path)) {
        if (!node_.is_object()) {
            throw ConfigError(path_ + " must be a JSON object");
        }
    }

    bool has(const std::string& key) const { return node_.contains(key); }

    const json* get(const std::string& key) {
        used_.insert(key);
        const auto it = node_.find(key);
        return it == node_.end() ? nullptr : &*it;
    }

    void read(const std::string& key, double& out) {
        if (const auto* v = get(key)) {
            if (!v->is_number()) fail(key, "a number");
            out = v->get<double>();
        }
    }

    void read(const std::string& key, std::size_t& out) {
        if (const auto* v = get(key)) {
            if (!is_count(*v)) fail(key, "a non-negative integer");
            out = v->get<std::size_t>();
        }
    }

    void read(const std::string& key, std::uint64_t& out, int /*tag*/) {
        if (const auto* v = get(key)) {
            if (!is_count(*v)) fail(key, "a non-negative integer");
            out = v->get<std::uint64_t>();
        }
    }

    void read(const std::string& key, bool& out) {
        if (const auto* v = get(key)) {
            if (!v->is_boolean()) fail(key, "a boolean");
            out = v->get<bool>();
        }
    }

    void read(const std::string& key, std::string& out) {
        if (const auto* v = get(key)) {
            if (!v->is_string()) fail(key, "a string");
            out = v->get<std::string>();
        }
    }

    void read(const std::string& key, std::vector<double>& out) {
        if (const auto* v = get(key)) {
            if (!v->is_array()) fail(key, "an array of numbers");
            out.clear();
            for (const auto& item : *v) {
                if (!item.is_number()) fail(key, "an array of numbers");
                out.push_back(item.get<double>());
            }
        }
    }

    std::optional<Section> child(const std::string& key) {
        if (const auto* v = get(key)) {
            return Section(*v, path_ + "." + key);
        }
        return std::nullopt;
    }

    const std::string& path() const { return path_; }

    void finish() const {
        for (const auto& [key, value] : node_.items()) {
            if (!used_.count(key)) {
                throw ConfigError("unknown key '" + key + "' in " + path_);
            }
        }
    }

    [[noreturn]] void fail(const std::string& key, const std::string& expected) const {
        throw ConfigError(path_ + "." + key + " must be " + expected);
    }

private:
    const json& node_;
    std::string path_;
    std::set<std::string> used_;
};

ModelKind parse_model_kind(const std::string& s) {
    if (s == "quadrant_linear") return ModelKind::QuadrantLinear;
    if (s == "quadrant_mlp") return ModelKind::QuadrantMlp;
    if (s == "random_mlp") return ModelKind::RandomMlp;
    throw ConfigError("unknown model kind '" + s + "'");
}

std::string model_kind_name(ModelKind k) {
    switch (k) {
        case ModelKind::QuadrantLinear: return "quadrant_linear";
        case ModelKind::QuadrantMlp: return "quadrant_mlp";
        case ModelKind::RandomMlp: return "random_mlp";
    }
    return "quadrant_linear";
}

QuadrantMode parse_mode(const std::string& s) {
    if (s == "disjoint") return QuadrantMode::Disjoint;
    if (s == "overlapping") return QuadrantMode::Overlapping;
    throw ConfigError("unknown dataset mode '" + s + "' (expected disjoint or overlapping)");
}

AttributionMethodSpec parse_method(Section& s) {
    std::string kind = "input_x_gradient";
    s.read("kind", kind);
    if (kind == "gradient") return Gradient{};
    if (kind == "input_x_gradient") return InputXGradient{};
    if (kind == "integrated_gradients") {
        IntegratedGradients ig;
        s.read("steps", ig.steps);
        std::string baseline = "zero";
        s.read("baseline", baseline);
        if (baseline != "zero") {
            throw ConfigError("integrated gradients baseline must be \"zero\" in a config file");
        }
        return ig;
    }
    if (kind == "occlusion") {
        Occlusion o;
        s.read("patch", o.patch);
        s.read("stride", o.stride);
        s.read("baseline_value", o.baseline_value);
        return o;
    }
    if (kind == "feature_ablation") {
        FeatureAblation f;
        s.read("grid_rows", f.grid_rows);
        s.read("grid_cols", f.grid_cols);
        s.read("baseline_value", f.baseline_value);
        return f;
    }
    throw ConfigError("unknown attribution method '" + kind + "'");
}

SelectionStrategy parse_strategy(Section& s) {
    std::string name;
    s.read("strategy", name);
    if (name == "predefined") {
        Predefined p;
        const auto* ids = s.get("ids");
        if (!ids || !ids->is_array()) {
            throw ConfigError(s.path() + ".ids must list the predefined class ids");
        }
        for (const auto& v : *ids) {
            if (!is_count(v)) {
                throw ConfigError(s.path() + ".ids must contain non-negative integers");
            }
            p.ids.push_back(v.get<ClassId>());
        }
        if (p.ids.size() < 2) {
            throw ConfigError("a predefined class set needs at least 2 ids");
        }
        return p;
    }
    if (name == "top_k") {
        TopK t;
        s.read("k", t.k);
        s.read("include_lowest", t.include_lowest);
        if (t.k < 1) {
            throw ConfigError("top_k needs k >= 1");
        }
        return t;
    }
    if (name == "best_vs_worst") {
        return BestVsWorst{};
    }
    throw ConfigError("unknown class strategy '" + name + "'");
}

json method_json(const AttributionMethodSpec& spec) {
    return std::visit(overloaded{
                          [](const Gradient&) { return json{{"kind", "gradient"}}; },
                          [](const InputXGradient&) { return json{{"kind", "input_x_gradient"}}; },
                          [](const IntegratedGradients& ig) {
                              return json{{"kind", "integrated_gradients"}, {"steps", ig.steps}, {"baseline", "zero"}};
                          },
                          [](const Occlusion& o) {
                              return json{{"kind", "occlusion"},
                                          {"patch", o.patch},
                                          {"stride", o.stride},
                                          {"baseline_value", o.baseline_value}};
                          },
                          [](const FeatureAblation& f) {
                              return json{{"kind", "feature_ablation"},
                                          {"grid_rows", f.grid_rows},
                                          {"grid_cols", f.grid_cols},
                                          {"baseline_value", f.baseline_value}};
                          },
                      },
                      spec);
}

json strategy_json(const SelectionStrategy& strategy) {
    return std::visit(overloaded{
                          [](const Predefined& p) { return json{{"strategy", "predefined"}, {"ids", p.ids}}; },
                          [](const TopK& t) {
                              return json{{"strategy", "top_k"}, {"k", t.k}, {"include_lowest", t.include_lowest}};
                          },
                          [](const BestVsWorst&) { return json{{"strategy", "best_vs_worst"}}; },
                      },
                      strategy);
}

void validate(const RunConfig& c) {
    c.dataset.spec.validate();
    c.lens.validate();
    validate(c.method);
    if (c.model.hidden < 1) {
        throw ConfigError("model.hidden must be positive");
    }
    if (!(c.model.share >= 0.0)) {
        throw ConfigError("model.share must be non-negative");
    }
    const auto& blur = c.metrics.localization.blur;
    gaussian_kernel(blur.kernel_size, blur.sigma);
    gaussian_kernel(c.metrics.curve.insertion_blur_kernel, c.metrics.curve.insertion_blur_sigma);
    if (c.metrics.curve.steps < 1) {
        throw ConfigError("metrics.curve_steps must be at least 1");
    }
    for (double f : c.metrics.randomization_fractions) {
        if (!(f >= 0.0 && f <= 1.0)) {
            throw ConfigError("metrics.randomization_fractions must lie in [0, 1]");
        }
    }
    if (c.metrics.sanity_seeds < 1) {
        throw ConfigError("metrics.sanity_seeds must be at least 1");
    }
}

}  // namespace

RunConfig parse_config(const json& root) {
    RunConfig c;
    Section top(root, "config");
    top.read("seed", c.seed, 0);
    top.read("out", c.out);

    if (auto s = top.child("model")) {
        std::string kind = model_kind_name(c.model.kind);
        s->read("kind", kind);
        c.model.kind = parse_model_kind(kind);
        s->read("share", c.model.share);
        s->read("hidden", c.model.hidden);
        s->read("threshold", c.model.threshold);
        s->finish();
    }
    if (auto s = top.child("dataset")) {
        s->read("size", c.dataset.spec.image_size);
        s->read("channels", c.dataset.spec.channels);
        s->read("classes", c.dataset.spec.classes);
        s->read("noise_sigma", c.dataset.spec.noise_sigma);
        s->read("margin", c.dataset.spec.margin);
        s->read("samples", c.dataset.samples);
        std::string mode = c.dataset.mode == QuadrantMode::Disjoint ? "disjoint" : "overlapping";
        s->read("mode", mode);
        c.dataset.mode = parse_mode(mode);
        s->finish();
    }
    if (auto s = top.child("method")) {
        c.method = parse_method(*s);
        s->finish();
    }
    if (auto s = top.child("lens")) {
        s->read("inverse_temperatures", c.lens.inverse_temperatures);
        s->read("mask", c.lens.mask_enabled);
        s->read("epsilon", c.lens.stability_epsilon);
        s->finish();
    }
    if (top.has("classes") && !root.at("classes").is_null()) {
        auto s = top.child("classes");
        c.strategy = parse_strategy(*s);
        s->finish();
    } else {
        top.get("classes");
    }
    if (auto s = top.child("metrics")) {
        auto& loc = c.metrics.localization;
        s->read("blur", loc.blur.enabled);
        s->read("blur_kernel", loc.blur.kernel_size);
        s->read("blur_sigma", loc.blur.sigma);
        std::string binarization = loc.binarization == Binarization::Threshold ? "threshold" : "top_region";
        s->read("binarization", binarization);
        if (binarization == "top_region") {
            loc.binarization = Binarization::TopRegionSize;
        } else if (binarization == "threshold") {
            loc.binarization = Binarization::Threshold;
        } else {
            throw ConfigError("metrics.binarization must be top_region or threshold");
        }
        s->read("threshold", loc.threshold);
        s->read("curve_steps", c.metrics.curve.steps);
        s->read("insertion_blur_kernel", c.metrics.curve.insertion_blur_kernel);
        s->read("insertion_blur_sigma", c.metrics.curve.insertion_blur_sigma);
        if (const auto* v = s->get("deletion_baseline")) {
            if (v->is_null()) {
                c.metrics.curve.deletion_baseline.reset();
            } else if (v->is_number()) {
                c.metrics.curve.deletion_baseline = v->get<double>();
            } else {
                s->fail("deletion_baseline", "a number or null");
            }
        }
        std::string values = c.metrics.similarity.absolute ? "absolute" : "signed";
        s->read("similarity_values", values);
        if (values != "absolute" && values != "signed") {
            throw ConfigError("metrics.similarity_values must be absolute or signed");
        }
        c.metrics.similarity.absolute = values == "absolute";
        s->read("randomization_fractions", c.metrics.randomization_fractions);
        s->read("sanity_seeds", c.metrics.sanity_seeds);
        s->read("sanity_images", c.metrics.sanity_images);
        s->finish();
    }
    top.finish();
    validate(c);
    return c;
}

RunConfig load_config(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) {
        throw ConfigError("cannot open config " + path.string());
    }
    try {
        return parse_config(json::parse(in));
    } catch (const json::parse_error& e) {
        throw ConfigError("config " + path.string() + " is not valid JSON (at byte " + std::to_string(e.byte) + ")");
    }
}

json to_json(const RunConfig& c) {
    const auto& loc = c.metrics.localization;
    json metrics = {
        {"blur", loc.blur.enabled},
        {"blur_kernel", loc.blur.kernel_size},
        {"blur_sigma", loc.blur.sigma},
        {"binarization", loc.binarization == Binarization::Threshold ? "threshold" : "top_region"},
        {"threshold", loc.threshold},
        {"curve_steps", c.metrics.curve.steps},
        {"insertion_blur_kernel", c.metrics.curve.insertion_blur_kernel},
        {"insertion_blur_sigma", c.metrics.curve.insertion_blur_sigma},
        {"deletion_baseline", c.metrics.curve.deletion_baseline ? json(*c.metrics.curve.deletion_baseline) : json()},
        {"similarity_values", c.metrics.similarity.absolute ? "absolute" : "signed"},
        {"randomization_fractions", c.metrics.randomization_fractions},
        {"sanity_seeds", c.metrics.sanity_seeds},
        {"sanity_images", c.metrics.sanity_images},
    };
    return json{
        {"seed", c.seed},
        {"out", c.out},
        {"model",
         {{"kind", model_kind_name(c.model.kind)},
          {"share", c.model.share},
          {"hidden", c.model.hidden},
          {"threshold", c.model.threshold}}},
        {"dataset",
         {{"size", c.dataset.spec.image_size},
          {"channels", c.dataset.spec.channels},
          {"classes", c.dataset.spec.classes},
          {"noise_sigma", c.dataset.spec.noise_sigma},
          {"margin", c.dataset.spec.margin},
          {"samples", c.dataset.samples},
          {"mode", c.dataset.mode == QuadrantMode::Disjoint ? "disjoint" : "overlapping"}}},
        {"method", method_json(c.method)},
        {"lens",
         {{"inverse_temperatures", c.lens.inverse_temperatures},
          {"mask", c.lens.mask_enabled},
          {"epsilon", c.lens.stability_epsilon}}},
        {"classes", c.strategy ? strategy_json(*c.strategy) : json()},
        {"metrics", metrics},
    };
}

DatasetSpec dataset_spec(const RunConfig& config) {
    auto spec = config.dataset.spec;
    spec.seed = config.seed;
    return spec;
}

ToyModel build_model(const RunConfig& config, const TemplateBank& templates) {
    switch (config.model.kind) {
        case ModelKind::QuadrantLinear:
            return make_quadrant_model(templates, config.dataset.mode, config.model.share);
        case ModelKind::QuadrantMlp:
            return make_quadrant_mlp(templates, config.dataset.mode, config.model.share, config.model.threshold);
        case ModelKind::RandomMlp: {
            const Shape input{2 * templates.patch.height, 2 * templates.patch.width, templates.patch.channels};
            return make_random_mlp(input, config.model.hidden, templates.classes(), config.seed);
        }
    }
    throw ConfigError("unhandled model kind");
}

}  // namespace alens
