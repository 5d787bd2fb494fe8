#include "alens/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <string>

#include "alens/error.hpp"

namespace alens {

namespace {

void check_dims(const AttributionMap& map, std::size_t height, std::size_t width) {
    if (map.height() != height || map.width() != width) {
        throw InvalidInputError("attribution map is " + std::to_string(map.height()) + "x" +
                                std::to_string(map.width()) + ", expected " + std::to_string(height) + "x" +
                                std::to_string(width));
    }
}

double target_prob(const ToyModel& model, const Tensor3& input, ClassId target) {
    return predict_probs(model, input)[target];
}

void check_target(const ToyModel& model, ClassId target) {
    if (target >= num_classes(model)) {
        throw UnknownClassError("target class " + std::to_string(target) + " out of range");
    }
}

std::vector<double> tick_fractions(std::size_t steps) {
    std::vector<double> f(steps + 1);
    for (std::size_t k = 0; k <= steps; ++k) {
        f[k] = static_cast<double>(k) / static_cast<double>(steps);
    }
    return f;
}

// Shared loop of insertion and deletion: start from `start`, copy `source`
// pixels in rank order, score after each tick.
CurveResult perturbation_curve(const ToyModel& model, const Tensor3& start, const Tensor3& source,
                               const AttributionMap& map, ClassId target, std::size_t steps) {
    if (steps < 1) {
        throw ConfigError("curve needs at least 1 step");
    }
    check_target(model, target);
    const auto& s = start.shape();
    check_dims(map, s.height, s.width);
    const auto order = rank_pixels(map);

    CurveResult result;
    result.fractions = tick_fractions(steps);
    result.scores.reserve(steps + 1);
    Tensor3 current = start;
    result.scores.push_back(target_prob(model, current, target));
    std::size_t done = 0;
    for (std::size_t k = 1; k <= steps; ++k) {
        const auto upto = pixels_at_tick(k, steps, s.pixels());
        for (; done < upto; ++done) {
            const auto p = order[done];
            for (std::size_t ch = 0; ch < s.channels; ++ch) {
                current(p / s.width, p % s.width, ch) = source(p / s.width, p % s.width, ch);
            }
        }
        result.scores.push_back(target_prob(model, current, target));
    }
    result.auc = trapezoid_auc(result.fractions, result.scores);
    return result;
}

double pearson_of(std::span<const double> a, std::span<const double> b, bool& degenerate) {
    const auto n = static_cast<double>(a.size());
    double ma = 0.0, mb = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) {
        ma += a[i];
        mb += b[i];
    }
    ma /= n;
    mb /= n;
    double sab = 0.0, saa = 0.0, sbb = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) {
        const double da = a[i] - ma;
        const double db = b[i] - mb;
        sab += da * db;
        saa += da * da;
        sbb += db * db;
    }
    if (saa == 0.0 || sbb == 0.0) {
        degenerate = true;
        return 0.0;
    }
    return std::clamp(sab / std::sqrt(saa * sbb), -1.0, 1.0);
}

}  // namespace

double region_attribution(const AttributionMap& processed, const RegionMask& region) {
    double inside = 0.0, total = 0.0;
    for (std::size_t p = 0; p < processed.size(); ++p) {
        total += processed[p];
        if (region[p]) {
            inside += processed[p];
        }
    }
    if (total <= 0.0) {
        return 0.0;
    }
    return std::clamp(inside / total, 0.0, 1.0);
}

std::vector<std::size_t> rank_pixels(const AttributionMap& map) {
    std::vector<std::size_t> order(map.size());
    std::iota(order.begin(), order.end(), std::size_t{0});
    std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return map[a] > map[b]; });
    return order;
}

LocalizationReport localization_eval(const AttributionMap& map, const RegionMask& region,
                                     const LocalizationOptions& options) {
    check_dims(map, region.height(), region.width());
    const auto region_size = region.count();
    if (region_size == 0) {
        throw MetricError("localization region is empty");
    }
    auto processed = positive_part(map);
    if (options.blur.enabled) {
        processed = gaussian_blur(processed, options.blur.kernel_size, options.blur.sigma);
    }

    LocalizationReport report;
    report.ra = region_attribution(processed, region);

    std::vector<bool> predicted(processed.size(), false);
    std::size_t predicted_count = 0;
    if (options.binarization == Binarization::TopRegionSize) {
        for (auto p : rank_pixels(processed)) {
            if (predicted_count == region_size || !(processed[p] > 0.0)) {
                break;
            }
            predicted[p] = true;
            ++predicted_count;
        }
    } else {
        const auto values = processed.values();
        const double peak = *std::max_element(values.begin(), values.end());
        for (std::size_t p = 0; p < values.size(); ++p) {
            if (values[p] > 0.0 && values[p] >= options.threshold * peak) {
                predicted[p] = true;
                ++predicted_count;
            }
        }
    }
    if (predicted_count == 0) {
        return report;
    }
    std::size_t hits = 0;
    for (std::size_t p = 0; p < predicted.size(); ++p) {
        hits += (predicted[p] && region[p]) ? 1 : 0;
    }
    const auto unite = predicted_count + region_size - hits;
    report.iou = static_cast<double>(hits) / static_cast<double>(unite);
    report.precision = static_cast<double>(hits) / static_cast<double>(predicted_count);
    report.recall = static_cast<double>(hits) / static_cast<double>(region_size);
    const double pr = report.precision + report.recall;
    report.f1 = pr > 0.0 ? 2.0 * report.precision * report.recall / pr : 0.0;
    return report;
}

double trapezoid_auc(const std::vector<double>& fractions, const std::vector<double>& scores) {
    if (fractions.size() != scores.size()) {
        throw InvalidInputError("curve fractions and scores differ in length");
    }
    double area = 0.0;
    for (std::size_t k = 1; k < fractions.size(); ++k) {
        area += 0.5 * (scores[k] + scores[k - 1]) * (fractions[k] - fractions[k - 1]);
    }
    return area;
}

std::size_t pixels_at_tick(std::size_t tick, std::size_t steps, std::size_t pixels) {
    return tick * pixels / steps;
}

CurveResult insertion_curve(const ToyModel& model, const ImageSample& image, const AttributionMap& map,
                            ClassId target, const InsertionOptions& options) {
    const auto blurred = gaussian_blur(image.tensor(), options.blur_kernel, options.blur_sigma);
    return perturbation_curve(model, blurred, image.tensor(), map, target, options.steps);
}

CurveResult deletion_curve(const ToyModel& model, const ImageSample& image, const AttributionMap& map,
                           ClassId target, const DeletionOptions& options) {
    const auto& t = image.tensor();
    const auto& s = t.shape();
    Tensor3 baseline(s, 0.0);
    for (std::size_t ch = 0; ch < s.channels; ++ch) {
        double fill = 0.0;
        if (options.baseline_value) {
            fill = *options.baseline_value;
        } else {
            for (std::size_t p = 0; p < s.pixels(); ++p) {
                fill += t.values()[p * s.channels + ch];
            }
            fill /= static_cast<double>(s.pixels());
        }
        for (std::size_t p = 0; p < s.pixels(); ++p) {
            baseline.values()[p * s.channels + ch] = fill;
        }
    }
    return perturbation_curve(model, t, baseline, map, target, options.steps);
}

std::vector<double> average_ranks(std::span<const double> values) {
    std::vector<std::size_t> order(values.size());
    std::iota(order.begin(), order.end(), std::size_t{0});
    std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return values[a] < values[b]; });
    std::vector<double> ranks(values.size());
    std::size_t i = 0;
    while (i < order.size()) {
        std::size_t j = i + 1;
        while (j < order.size() && values[order[j]] == values[order[i]]) {
            ++j;
        }
        // Positions i..j-1 (0-based) share rank mean of (i+1)..j.
        const double rank = 0.5 * static_cast<double>(i + 1 + j);
        for (std::size_t k = i; k < j; ++k) {
            ranks[order[k]] = rank;
        }
        i = j;
    }
    return ranks;
}

SimilarityReport similarity(const AttributionMap& a, const AttributionMap& b, const SimilarityOptions& options) {
    check_dims(b, a.height(), a.width());
    std::vector<double> x(a.values().begin(), a.values().end());
    std::vector<double> y(b.values().begin(), b.values().end());
    if (options.absolute) {
        for (double& v : x) v = std::abs(v);
        for (double& v : y) v = std::abs(v);
    }

    SimilarityReport report;
    report.pearson = pearson_of(x, y, report.pearson_degenerate);
    report.spearman = pearson_of(average_ranks(x), average_ranks(y), report.spearman_degenerate);

    double xy = 0.0, xx = 0.0, yy = 0.0;
    for (std::size_t i = 0; i < x.size(); ++i) {
        xy += x[i] * y[i];
        xx += x[i] * x[i];
        yy += y[i] * y[i];
    }
    if (xx == 0.0 || yy == 0.0) {
        report.cosine_degenerate = true;
    } else {
        report.cosine = std::clamp(xy / std::sqrt(xx * yy), -1.0, 1.0);
    }
    return report;
}

}  // namespace alens
