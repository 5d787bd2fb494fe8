#include "alens/cli.hpp"

#include <CLI11.hpp>
#include <algorithm>
#include <charconv>
#include <chrono>
#include <cmath>
#include <ctime>
#include <fstream>
#include <sstream>

#include "alens/error.hpp"
#include "alens/npy.hpp"

namespace alens::cli {

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

constexpr const char* kDatasetFormat = "alens-quadrant-dataset/1";

struct CommonOptions {
    std::string config;
    std::optional<std::uint64_t> seed;
    std::string out;
    bool no_mask = false;
    std::string scales;
};

void add_common(CLI::App* cmd, CommonOptions& o) {
    cmd->add_option("--config", o.config, "JSON run configuration")->check(CLI::ExistingFile);
    cmd->add_option("--seed", o.seed, "Override the run seed");
    cmd->add_option("--out", o.out, "Output directory");
    cmd->add_flag("--no-mask", o.no_mask, "Disable the chance-level mask");
    cmd->add_option("--scales", o.scales, "Inverse temperatures, e.g. \"1,5,100\"");
}

std::vector<double> parse_number_list(const std::string& text, const char* what) {
    std::vector<double> out;
    std::stringstream ss(text);
    std::string item;
    while (std::getline(ss, item, ',')) {
        item.erase(0, item.find_first_not_of(' '));
        item.erase(item.find_last_not_of(' ') + 1);
        double v = 0.0;
        const auto [ptr, ec] = std::from_chars(item.data(), item.data() + item.size(), v);
        if (ec != std::errc() || ptr != item.data() + item.size() || item.empty()) {
            throw ConfigError(std::string("cannot parse ") + what + " entry '" + item + "'");
        }
        out.push_back(v);
    }
    if (out.empty()) {
        throw ConfigError(std::string(what) + " list is empty");
    }
    return out;
}

std::vector<ClassId> parse_class_list(const std::string& text) {
    std::vector<ClassId> ids;
    for (double v : parse_number_list(text, "class")) {
        if (v < 0.0 || v != std::floor(v)) {
            throw ConfigError("class ids must be non-negative integers");
        }
        ids.push_back(static_cast<ClassId>(v));
    }
    return ids;
}

RunConfig resolve(const CommonOptions& o) {
    RunConfig config = o.config.empty() ? parse_config(json::object()) : load_config(o.config);
    if (o.seed) config.seed = *o.seed;
    if (!o.out.empty()) config.out = o.out;
    if (o.no_mask) config.lens.mask_enabled = false;
    if (!o.scales.empty()) {
        config.lens.inverse_temperatures = parse_number_list(o.scales, "scale");
        config.lens.validate();
    }
    return config;
}

std::string utc_timestamp() {
    const auto now = std::chrono::system_clock::to_time_t(std::chrono::system_clock::now());
    std::tm tm{};
    gmtime_r(&now, &tm);
    char buf[32];
    std::strftime(buf, sizeof(buf), "%Y-%m-%dT%H:%M:%SZ", &tm);
    return buf;
}

void write_text(const fs::path& path, const std::string& text) {
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) {
        throw IoError("cannot write " + path.string());
    }
    out << text;
    if (!out) {
        throw IoError("write failed for " + path.string());
    }
}

void write_summary(const fs::path& path, const std::string& command, const RunConfig& config, json body) {
    body["command"] = command;
    body["generated_at"] = utc_timestamp();
    body["config"] = to_json(config);
    write_text(path, body.dump(2) + "\n");
}

std::string sample_name(std::size_t i) {
    char buf[32];
    std::snprintf(buf, sizeof(buf), "sample_%05zu", i);
    return buf;
}

struct Workload {
    ToyModel model;
    std::vector<QuadrantSample> samples;
};

Workload load_workload(const std::string& data_dir, const RunConfig& config) {
    if (!data_dir.empty()) {
        auto loaded = read_dataset(data_dir);
        return {std::move(loaded.model), std::move(loaded.samples)};
    }
    auto dataset = generate_dataset(dataset_spec(config), config.dataset.samples);
    auto model = build_model(config, dataset.templates);
    return {std::move(model), std::move(dataset.samples)};
}

std::string csv_row(std::initializer_list<std::string> cells) {
    std::string row;
    bool first = true;
    for (const auto& c : cells) {
        if (!first) row += ',';
        row += c;
        first = false;
    }
    row += '\n';
    return row;
}

std::string num(double v) { return format_number(v); }
std::string num(std::size_t v) { return std::to_string(v); }

json mean_block(double vanilla, double refined) {
    return json{{"vanilla", vanilla}, {"al", refined}, {"improvement", improvement_percent(vanilla, refined)}};
}

// ---------------------------------------------------------------- commands

int cmd_gen_data(const RunConfig& config, std::ostream& out) {
    write_dataset(config.out, config);
    out << "wrote " << config.dataset.samples << " samples to " << config.out << "\n";
    return kOk;
}

int cmd_attribute(const RunConfig& config, const std::string& data, std::size_t sample_index,
                  const std::string& classes_text, std::ostream& out) {
    auto work = load_workload(data, config);
    if (sample_index >= work.samples.size()) {
        throw InvalidInputError("sample " + std::to_string(sample_index) + " out of range (" +
                                std::to_string(work.samples.size()) + " samples)");
    }
    const auto& sample = work.samples[sample_index];
    std::vector<ClassId> classes;
    if (!classes_text.empty()) {
        classes = parse_class_list(classes_text);
    } else if (config.strategy) {
        classes = select_classes(forward_logits(work.model, sample.image.tensor()), *config.strategy);
    } else {
        classes.assign(sample.classes.begin(), sample.classes.end());
    }
    const auto stack = attribute_stack(work.model, sample.image.tensor(), classes, config.method);
    fs::create_directories(config.out);
    const auto path = fs::path(config.out) / ("stack_" + std::to_string(sample_index) + ".npy");
    npy::save_stack(path, stack);
    out << "wrote " << path.string() << " (" << stack.size() << " classes, " << method_name(config.method) << ")\n";
    return kOk;
}

int cmd_refine(const RunConfig& config, const std::string& stack_path, ClassId target, std::ostream& out) {
    const auto stack = npy::load_stack(stack_path);
    const auto result = refine_detailed(stack, target, config.lens);
    fs::create_directories(config.out);
    const auto path =
        fs::path(config.out) / (fs::path(stack_path).stem().string() + "_refined_c" + std::to_string(target) + ".npy");
    npy::save_map(path, result.map);
    out << "wrote " << path.string() << "\n";
    out << "mask coverage: " << format_number(result.mask_coverage) << "\n";
    return kOk;
}

int cmd_eval_loc(const RunConfig& config, const std::string& data, std::ostream& out) {
    const auto work = load_workload(data, config);
    const auto rows =
        localization_experiment(work.model, work.samples, config.method, config.lens, config.metrics.localization);
    const auto method = method_name(config.method);

    std::string csv = csv_row({"sample", "quadrant", "class", "method", "ra_vanilla", "ra_al", "ra_improvement",
                               "iou_vanilla", "iou_al", "iou_improvement", "precision_vanilla", "precision_al",
                               "recall_vanilla", "recall_al", "f1_vanilla", "f1_al", "f1_improvement"});
    double sums[5][2] = {};
    for (const auto& r : rows) {
        csv += csv_row({num(r.sample), num(r.quadrant), num(r.class_id), method, num(r.vanilla.ra), num(r.refined.ra),
                        improvement_percent(r.vanilla.ra, r.refined.ra), num(r.vanilla.iou), num(r.refined.iou),
                        improvement_percent(r.vanilla.iou, r.refined.iou), num(r.vanilla.precision),
                        num(r.refined.precision), num(r.vanilla.recall), num(r.refined.recall), num(r.vanilla.f1),
                        num(r.refined.f1), improvement_percent(r.vanilla.f1, r.refined.f1)});
        const LocalizationReport* both[2] = {&r.vanilla, &r.refined};
        for (int v = 0; v < 2; ++v) {
            sums[0][v] += both[v]->ra;
            sums[1][v] += both[v]->iou;
            sums[2][v] += both[v]->precision;
            sums[3][v] += both[v]->recall;
            sums[4][v] += both[v]->f1;
        }
    }
    fs::create_directories(config.out);
    write_text(fs::path(config.out) / "localization.csv", csv);

    const double n = rows.empty() ? 1.0 : static_cast<double>(rows.size());
    json means;
    const char* names[5] = {"ra", "iou", "precision", "recall", "f1"};
    for (int k = 0; k < 5; ++k) {
        means[names[k]] = mean_block(sums[k][0] / n, sums[k][1] / n);
    }
    write_summary(fs::path(config.out) / "localization_summary.json", "eval-loc", config,
                  json{{"rows", rows.size()}, {"method", method}, {"mean", means}});
    out << "localization: " << rows.size() << " rows, mean RA " << format_number(sums[0][0] / n) << " -> "
        << format_number(sums[0][1] / n) << "\n";
    return kOk;
}

int cmd_curve(const RunConfig& config, const std::string& data, const std::string& mode_name, std::ostream& out) {
    const auto mode = mode_name == "insertion" ? CurveMode::Insertion : CurveMode::Deletion;
    const auto work = load_workload(data, config);
    const auto rows = curve_experiment(work.model, work.samples, config.method, config.lens, mode, config.metrics.curve);
    const auto method = method_name(config.method);

    std::string csv =
        csv_row({"sample", "quadrant", "class", "method", "mode", "auc_vanilla", "auc_al", "auc_improvement"});
    double vanilla = 0.0, refined = 0.0;
    for (const auto& r : rows) {
        csv += csv_row({num(r.sample), num(r.quadrant), num(r.class_id), method, mode_name, num(r.vanilla_auc),
                        num(r.refined_auc), improvement_percent(r.vanilla_auc, r.refined_auc)});
        vanilla += r.vanilla_auc;
        refined += r.refined_auc;
    }
    fs::create_directories(config.out);
    write_text(fs::path(config.out) / (mode_name + ".csv"), csv);
    const double n = rows.empty() ? 1.0 : static_cast<double>(rows.size());
    write_summary(fs::path(config.out) / (mode_name + "_summary.json"), "curve", config,
                  json{{"rows", rows.size()},
                       {"mode", mode_name},
                       {"method", method},
                       {"higher_is_better", mode == CurveMode::Insertion},
                       {"mean_auc", mean_block(vanilla / n, refined / n)}});
    out << mode_name << ": " << rows.size() << " rows, mean AUC " << format_number(vanilla / n) << " -> "
        << format_number(refined / n) << "\n";
    return kOk;
}

int cmd_sanity(const RunConfig& config, const std::string& data, std::ostream& out) {
    const auto work = load_workload(data, config);
    std::vector<ImageSample> images;
    for (std::size_t i = 0; i < std::min(config.metrics.sanity_images, work.samples.size()); ++i) {
        images.push_back(work.samples[i].image);
    }
    RandomizationSpec spec;
    spec.methods = {Gradient{}, InputXGradient{}, IntegratedGradients{}, Occlusion{}, FeatureAblation{}};
    for (auto& m : spec.methods) {
        if (m.index() == config.method.index()) m = config.method;
    }
    spec.lens = config.lens;
    spec.strategy = config.strategy.value_or(TopK{2, false});
    spec.fractions = config.metrics.randomization_fractions;
    spec.seed = config.seed;
    spec.seeds = config.metrics.sanity_seeds;
    spec.similarity = config.metrics.similarity;
    const auto result = randomization_experiment(work.model, images, spec);
    const std::string values = spec.similarity.absolute ? "absolute" : "signed";

    std::string csv = csv_row({"seed", "fraction", "groups_randomized", "image", "method", "variant", "values",
                               "pearson", "spearman", "cosine", "degenerate"});
    for (const auto& r : result.rows) {
        std::string degenerate;
        if (r.report.pearson_degenerate) degenerate += "p";
        if (r.report.spearman_degenerate) degenerate += "s";
        if (r.report.cosine_degenerate) degenerate += "c";
        csv += csv_row({std::to_string(r.seed), num(r.fraction), num(r.groups_randomized), num(r.image), r.method,
                        r.variant, values, num(r.report.pearson), num(r.report.spearman), num(r.report.cosine),
                        degenerate.empty() ? "-" : degenerate});
    }
    fs::create_directories(config.out);
    write_text(fs::path(config.out) / "sanity.csv", csv);

    json summary = json::array();
    for (const auto& s : result.summary) {
        summary.push_back(json{{"fraction", s.fraction},
                               {"groups_randomized", s.groups_randomized},
                               {"groups_total", parameter_groups(work.model).size()},
                               {"method", s.method},
                               {"variant", s.variant},
                               {"pearson", s.pearson},
                               {"abs_pearson", s.abs_pearson},
                               {"spearman", s.spearman},
                               {"cosine", s.cosine}});
    }
    write_summary(fs::path(config.out) / "sanity_summary.json", "sanity", config,
                  json{{"rows", result.rows.size()},
                       {"images", images.size()},
                       {"similarity_values", values},
                       {"lower_is_better", true},
                       {"mean", summary}});
    out << "sanity: " << result.rows.size() << " rows over " << spec.seeds << " seeds\n";
    return kOk;
}

int cmd_export_heatmap(const std::string& map_path, const std::string& out_path, std::ostream& out) {
    const auto map = npy::load_map(map_path);
    const auto parent = fs::path(out_path).parent_path();
    if (!parent.empty()) {
        fs::create_directories(parent);
    }
    write_text(out_path, encode_pgm(map));
    out << "wrote " << out_path << "\n";
    return kOk;
}

}  // namespace

std::string format_number(double value) {
    char buf[64];
    const auto [end, ec] = std::to_chars(buf, buf + sizeof(buf), value, std::chars_format::general, 9);
    return std::string(buf, end);
}

void write_dataset(const fs::path& dir, const RunConfig& config) {
    const auto spec = dataset_spec(config);
    const auto dataset = generate_dataset(spec, config.dataset.samples);
    const auto model = build_model(config, dataset.templates);

    fs::create_directories(dir / "samples");
    save_model(dir / "model", model, config.seed);

    const auto& patch = dataset.templates.patch;
    npy::Array templates;
    templates.shape = {dataset.templates.classes(), patch.height, patch.width, patch.channels};
    for (const auto& p : dataset.templates.patterns) {
        templates.data.insert(templates.data.end(), p.values().begin(), p.values().end());
    }
    npy::write(dir / "templates.npy", templates);

    json samples = json::array();
    for (std::size_t i = 0; i < dataset.samples.size(); ++i) {
        const auto& s = dataset.samples[i];
        const auto name = sample_name(i);
        npy::save_image(dir / "samples" / (name + ".npy"), s.image);
        npy::save_masks(dir / "samples" / (name + "_masks.npy"), s.regions);
        samples.push_back(json{{"index", i},
                               {"image", "samples/" + name + ".npy"},
                               {"masks", "samples/" + name + "_masks.npy"},
                               {"quadrant_classes", s.classes}});
    }
    auto echo = to_json(config);
    echo.erase("out");
    json manifest{{"format", kDatasetFormat},
                  {"seed", config.seed},
                  {"config", echo},
                  {"image_shape", {2 * patch.height, 2 * patch.width, patch.channels}},
                  {"model", "model"},
                  {"templates", "templates.npy"},
                  {"samples", samples}};
    write_text(dir / "manifest.json", manifest.dump(2) + "\n");
}

LoadedDataset read_dataset(const fs::path& dir) {
    const auto manifest_path = dir / "manifest.json";
    std::ifstream in(manifest_path);
    if (!in) {
        throw IoError("cannot open " + manifest_path.string());
    }
    json manifest;
    try {
        manifest = json::parse(in);
    } catch (const json::parse_error& e) {
        throw ParseError(manifest_path.string() + ": invalid JSON", e.byte);
    }
    try {
        if (manifest.at("format").get<std::string>() != kDatasetFormat) {
            throw ParseError(manifest_path.string() + ": unsupported dataset format", 0);
        }
        std::vector<QuadrantSample> samples;
        for (const auto& entry : manifest.at("samples")) {
            QuadrantSample s;
            s.image = npy::load_image(dir / entry.at("image").get<std::string>());
            auto masks = npy::load_masks(dir / entry.at("masks").get<std::string>());
            const auto classes = entry.at("quadrant_classes").get<std::vector<ClassId>>();
            if (masks.size() != kQuadrants || classes.size() != kQuadrants) {
                throw InvalidInputError("sample " + entry.at("image").get<std::string>() +
                                        " needs 4 masks and 4 quadrant classes");
            }
            std::move(masks.begin(), masks.end(), s.regions.begin());
            std::copy(classes.begin(), classes.end(), s.classes.begin());
            samples.push_back(std::move(s));
        }
        auto model = load_model(dir / manifest.at("model").get<std::string>());
        return LoadedDataset{std::move(manifest), std::move(model), std::move(samples)};
    } catch (const json::exception& e) {
        throw ParseError(manifest_path.string() + ": " + e.what(), 0);
    }
}

std::string encode_pgm(const AttributionMap& map) {
    const auto values = map.values();
    const auto [lo, hi] = std::minmax_element(values.begin(), values.end());
    std::string out = "P5\n" + std::to_string(map.width()) + " " + std::to_string(map.height()) + "\n255\n";
    const double range = *hi - *lo;
    for (double v : values) {
        const int level = range > 0.0 ? static_cast<int>(std::lround(255.0 * (v - *lo) / range)) : 128;
        out.push_back(static_cast<char>(static_cast<unsigned char>(std::clamp(level, 0, 255))));
    }
    return out;
}

int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
    CLI::App app{"Class-competitive attribution refinement and evaluation on synthetic grid data", "alens"};
    app.require_subcommand(1);

    CommonOptions gen_opts, attr_opts, refine_opts, loc_opts, curve_opts, sanity_opts;
    std::optional<std::size_t> gen_samples;
    std::string attr_data, attr_classes, loc_data, curve_data, curve_mode, sanity_data;
    std::size_t attr_sample = 0;
    std::string refine_stack;
    ClassId refine_target = 0;
    std::string heat_map, heat_out;

    auto* gen = app.add_subcommand("gen-data", "Generate a synthetic quadrant dataset and its model");
    add_common(gen, gen_opts);
    gen->add_option("--samples", gen_samples, "Number of grid samples");

    auto* attr = app.add_subcommand("attribute", "Compute an attribution stack for one sample");
    add_common(attr, attr_opts);
    attr->add_option("--data", attr_data, "Dataset directory from gen-data");
    attr->add_option("--sample", attr_sample, "Sample index");
    attr->add_option("--classes", attr_classes, "Explicit class ids, e.g. \"0,3,5\"");

    auto* ref = app.add_subcommand("refine", "Refine one class of a stored attribution stack");
    add_common(ref, refine_opts);
    ref->add_option("--stack", refine_stack, "Stack .npy file (with .json sidecar)")->required();
    ref->add_option("--target", refine_target, "Target class id")->required();

    auto* loc = app.add_subcommand("eval-loc", "Grid-pointing localization: vanilla vs refined");
    add_common(loc, loc_opts);
    loc->add_option("--data", loc_data, "Dataset directory from gen-data");

    auto* curve = app.add_subcommand("curve", "Insertion or deletion AUC: vanilla vs refined");
    add_common(curve, curve_opts);
    curve->add_option("--data", curve_data, "Dataset directory from gen-data");
    curve->add_option("--mode", curve_mode, "insertion or deletion")
        ->required()
        ->check(CLI::IsMember({"insertion", "deletion"}));

    auto* sanity = app.add_subcommand("sanity", "Cascading randomization similarity report");
    add_common(sanity, sanity_opts);
    sanity->add_option("--data", sanity_data, "Dataset directory from gen-data");

    auto* heat = app.add_subcommand("export-heatmap", "Write a map as an 8-bit PGM image");
    heat->add_option("--map", heat_map, "Map .npy file")->required();
    heat->add_option("--out", heat_out, "Output .pgm path")->required();

    std::vector<std::string> reversed(args.rbegin(), args.rend());
    try {
        app.parse(reversed);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e, out, err);
        return code == 0 ? kOk : kConfigError;
    }

    try {
        if (gen->parsed()) {
            auto config = resolve(gen_opts);
            if (gen_samples) config.dataset.samples = *gen_samples;
            return cmd_gen_data(config, out);
        }
        if (attr->parsed()) return cmd_attribute(resolve(attr_opts), attr_data, attr_sample, attr_classes, out);
        if (ref->parsed()) return cmd_refine(resolve(refine_opts), refine_stack, refine_target, out);
        if (loc->parsed()) return cmd_eval_loc(resolve(loc_opts), loc_data, out);
        if (curve->parsed()) return cmd_curve(resolve(curve_opts), curve_data, curve_mode, out);
        if (sanity->parsed()) return cmd_sanity(resolve(sanity_opts), sanity_data, out);
        if (heat->parsed()) return cmd_export_heatmap(heat_map, heat_out, out);
    } catch (const Error& e) {
        err << "error: " << e.what() << "\n";
        return static_cast<int>(e.kind());
    } catch (const fs::filesystem_error& e) {
        err << "error: " << e.what() << "\n";
        return kDataError;
    } catch (const std::exception& e) {
        err << "error: " << e.what() << "\n";
        return kNumericError;
    }
    return kConfigError;
}

}  // namespace alens::cli
