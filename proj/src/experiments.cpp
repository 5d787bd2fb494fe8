#include "alens/experiments.hpp"

#include <algorithm>
#include <cmath>
#include <charconv>

#include "alens/error.hpp"
#include "alens/parallel.hpp"

namespace alens {

namespace {

ClassId top_class(std::span<const double> logits) {
    return static_cast<ClassId>(std::max_element(logits.begin(), logits.end()) - logits.begin());
}

struct ImageMaps {
    std::vector<AttributionMap> vanilla;  // one per method
    std::vector<AttributionMap> refined;
};

ImageMaps explain(const ToyModel& model, const Tensor3& input, ClassId target, const RandomizationSpec& spec) {
    const auto logits = forward_logits(model, input);
    const auto classes = class_set_for(logits, target, spec.strategy);
    ImageMaps maps;
    for (const auto& method : spec.methods) {
        const auto stack = attribute_stack(model, input, classes, method);
        maps.vanilla.push_back(stack.map(stack.slot_of(target)));
        maps.refined.push_back(refine(stack, target, spec.lens));
    }
    return maps;
}

}  // namespace

std::vector<ClassId> class_set_for(std::span<const double> logits, ClassId target, const SelectionStrategy& strategy) {
    auto classes = select_classes(logits, strategy);
    if (std::find(classes.begin(), classes.end(), target) == classes.end()) {
        classes.insert(classes.begin(), target);
    }
    return classes;
}

QuadrantAttributions attribute_quadrants(const ToyModel& model, const QuadrantSample& sample,
                                         const AttributionMethodSpec& method, const LensConfig& lens) {
    const auto stack = attribute_stack(model, sample.image.tensor(), sample.classes, method);
    QuadrantAttributions out;
    for (std::size_t q = 0; q < kQuadrants; ++q) {
        out.vanilla[q] = stack.map(q);
        out.refined[q] = refine(stack, sample.classes[q], lens);
    }
    return out;
}

std::vector<LocalizationRow> localization_experiment(const ToyModel& model, std::span<const QuadrantSample> samples,
                                                     const AttributionMethodSpec& method, const LensConfig& lens,
                                                     const LocalizationOptions& options) {
    lens.validate();
    validate(method);
    std::vector<LocalizationRow> rows(samples.size() * kQuadrants);
    parallel_for(samples.size(), [&](std::size_t i) {
        const auto maps = attribute_quadrants(model, samples[i], method, lens);
        for (std::size_t q = 0; q < kQuadrants; ++q) {
            auto& row = rows[i * kQuadrants + q];
            row.sample = i;
            row.quadrant = q;
            row.class_id = samples[i].classes[q];
            row.vanilla = localization_eval(maps.vanilla[q], samples[i].regions[q], options);
            row.refined = localization_eval(maps.refined[q], samples[i].regions[q], options);
        }
    });
    return rows;
}

std::vector<CurveRow> curve_experiment(const ToyModel& model, std::span<const QuadrantSample> samples,
                                       const AttributionMethodSpec& method, const LensConfig& lens, CurveMode mode,
                                       const CurveOptions& options) {
    lens.validate();
    validate(method);
    std::vector<CurveRow> rows(samples.size() * kQuadrants);
    parallel_for(samples.size(), [&](std::size_t i) {
        const auto& sample = samples[i];
        const auto maps = attribute_quadrants(model, sample, method, lens);
        auto run = [&](const AttributionMap& map, ClassId target) {
            if (mode == CurveMode::Insertion) {
                return insertion_curve(model, sample.image, map, target,
                                       {options.steps, options.insertion_blur_kernel, options.insertion_blur_sigma})
                    .auc;
            }
            return deletion_curve(model, sample.image, map, target, {options.steps, options.deletion_baseline}).auc;
        };
        for (std::size_t q = 0; q < kQuadrants; ++q) {
            auto& row = rows[i * kQuadrants + q];
            row.sample = i;
            row.quadrant = q;
            row.class_id = sample.classes[q];
            row.vanilla_auc = run(maps.vanilla[q], row.class_id);
            row.refined_auc = run(maps.refined[q], row.class_id);
        }
    });
    return rows;
}

RandomizationResult randomization_experiment(const ToyModel& model, std::span<const ImageSample> images,
                                             const RandomizationSpec& spec) {
    spec.lens.validate();
    if (spec.methods.empty()) {
        throw ConfigError("randomization experiment needs at least one method");
    }
    for (const auto& m : spec.methods) {
        validate(m);
    }
    for (double f : spec.fractions) {
        if (!(f >= 0.0 && f <= 1.0)) {
            throw ConfigError("randomization fractions must lie in [0, 1]");
        }
    }
    if (spec.seeds < 1) {
        throw ConfigError("randomization needs at least one seed");
    }

    // Reference maps from the untouched model.
    std::vector<ClassId> targets(images.size());
    std::vector<ImageMaps> reference(images.size());
    parallel_for(images.size(), [&](std::size_t i) {
        targets[i] = top_class(forward_logits(model, images[i].tensor()));
        reference[i] = explain(model, images[i].tensor(), targets[i], spec);
    });

    const auto methods = spec.methods.size();
    const auto per_unit = images.size() * methods * 2;
    const auto units = spec.seeds * spec.fractions.size();
    std::vector<RandomizationRow> rows(units * per_unit);

    parallel_for(units, [&](std::size_t u) {
        const auto seed = spec.seed + u / spec.fractions.size();
        const auto fraction = spec.fractions[u % spec.fractions.size()];
        const auto randomized = randomize_layers(model, fraction, seed);
        const auto groups = randomized_group_count(model, fraction);
        for (std::size_t i = 0; i < images.size(); ++i) {
            const auto maps = explain(randomized, images[i].tensor(), targets[i], spec);
            for (std::size_t m = 0; m < methods; ++m) {
                for (std::size_t v = 0; v < 2; ++v) {
                    auto& row = rows[u * per_unit + (i * methods + m) * 2 + v];
                    row.seed = seed;
                    row.fraction = fraction;
                    row.groups_randomized = groups;
                    row.image = i;
                    row.method = method_name(spec.methods[m]);
                    row.variant = v == 0 ? "vanilla" : "al";
                    const auto& before = v == 0 ? reference[i].vanilla[m] : reference[i].refined[m];
                    const auto& after = v == 0 ? maps.vanilla[m] : maps.refined[m];
                    row.report = similarity(before, after, spec.similarity);
                }
            }
        }
    });

    RandomizationResult result;
    result.rows = std::move(rows);

    // Summary in canonical (fraction index, method index, variant) order.
    const auto fractions = spec.fractions.size();
    std::vector<RandomizationSummaryRow> summary(fractions * methods * 2);
    std::vector<double> counts(summary.size(), 0.0);
    for (std::size_t u = 0; u < units; ++u) {
        const auto fi = u % fractions;
        for (std::size_t k = 0; k < per_unit; ++k) {
            const auto& row = result.rows[u * per_unit + k];
            const auto m = (k / 2) % methods;
            const auto v = k % 2;
            auto& s = summary[(fi * methods + m) * 2 + v];
            s.fraction = row.fraction;
            s.groups_randomized = row.groups_randomized;
            s.method = row.method;
            s.variant = row.variant;
            s.pearson += row.report.pearson;
            s.spearman += row.report.spearman;
            s.cosine += row.report.cosine;
            s.abs_pearson += std::abs(row.report.pearson);
            counts[(fi * methods + m) * 2 + v] += 1.0;
        }
    }
    for (std::size_t k = 0; k < summary.size(); ++k) {
        if (counts[k] > 0.0) {
            summary[k].pearson /= counts[k];
            summary[k].spearman /= counts[k];
            summary[k].cosine /= counts[k];
            summary[k].abs_pearson /= counts[k];
        } else {
            summary[k].fraction = spec.fractions[k / (methods * 2)];
            summary[k].groups_randomized = randomized_group_count(model, summary[k].fraction);
            summary[k].method = method_name(spec.methods[(k / 2) % methods]);
            summary[k].variant = k % 2 == 0 ? "vanilla" : "al";
        }
    }
    result.summary = std::move(summary);
    return result;
}

std::string improvement_percent(double vanilla, double refined) {
    if (refined == vanilla) {
        return "+0%";
    }
    if (vanilla == 0.0) {
        return "n/a";
    }
    const double pct = 100.0 * (refined - vanilla) / std::abs(vanilla);
    char buf[64];
    const auto [end, ec] = std::to_chars(buf, buf + sizeof(buf), std::abs(pct), std::chars_format::fixed, 1);
    return std::string(pct < 0.0 ? "-" : "+") + std::string(buf, end) + "%";
}

}  // namespace alens
