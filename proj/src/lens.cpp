#include "alens/lens.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <string>

#include "alens/error.hpp"

namespace alens {

namespace {

// Stack slots ordered by class id. Every reduction over classes runs in this
// order so results do not depend on how the caller ordered the stack.
std::vector<std::size_t> canonical_order(const std::vector<ClassId>& ids) {
    std::vector<std::size_t> order(ids.size());
    std::iota(order.begin(), order.end(), std::size_t{0});
    std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return ids[a] < ids[b]; });
    return order;
}

void check_aligned(const AttributionStack& stack, const ClassDistributionStack& distribution) {
    if (stack.height() != distribution.height() || stack.width() != distribution.width()) {
        throw InvalidInputError("distribution dimensions do not match the stack");
    }
    auto a = stack.class_ids();
    auto b = distribution.class_ids();
    std::sort(a.begin(), a.end());
    std::sort(b.begin(), b.end());
    if (a != b) {
        throw InvalidInputError("distribution class ids do not match the stack");
    }
}

}  // namespace

void LensConfig::validate() const {
    if (inverse_temperatures.empty()) {
        throw ConfigError("lens needs at least one inverse temperature");
    }
    for (double s : inverse_temperatures) {
        if (!(s > 0.0) || !std::isfinite(s)) {
            throw ConfigError("inverse temperatures must be positive and finite");
        }
    }
    if (!(stability_epsilon > 0.0)) {
        throw ConfigError("stability epsilon must be positive");
    }
}

ClassDistributionStack::ClassDistributionStack(std::vector<ClassId> class_ids, std::size_t height, std::size_t width,
                                               std::vector<std::vector<double>> weights)
    : class_ids_(std::move(class_ids)), height_(height), width_(width), weights_(std::move(weights)) {
    if (class_ids_.size() < 2 || weights_.size() != class_ids_.size()) {
        throw InvalidStackError("distribution needs one weight plane per class and at least 2 classes");
    }
    for (const auto& plane : weights_) {
        if (plane.size() != height_ * width_) {
            throw InvalidInputError("distribution weight plane has wrong size");
        }
    }
    const auto order = canonical_order(class_ids_);
    for (std::size_t p = 0; p < height_ * width_; ++p) {
        double total = 0.0;
        for (auto slot : order) {
            const double w = weights_[slot][p];
            if (!(w >= 0.0 && w <= 1.0)) {
                throw NumericError("distribution weight outside [0, 1] at pixel " + std::to_string(p));
            }
            total += w;
        }
        if (std::abs(total - 1.0) > 1e-9) {
            throw NumericError("distribution does not sum to 1 at pixel " + std::to_string(p));
        }
    }
}

std::size_t ClassDistributionStack::slot_of(ClassId id) const {
    const auto it = std::find(class_ids_.begin(), class_ids_.end(), id);
    if (it == class_ids_.end()) {
        throw UnknownClassError("class " + std::to_string(id) + " is not in the distribution");
    }
    return static_cast<std::size_t>(it - class_ids_.begin());
}

AttributionMap ClassDistributionStack::weight_map(std::size_t slot) const {
    return AttributionMap(height_, width_, weights_.at(slot));
}

ClassDistributionStack pixel_softmax(const AttributionStack& stack, double inverse_temperature,
                                     double stability_epsilon) {
    if (!(inverse_temperature > 0.0) || !std::isfinite(inverse_temperature)) {
        throw ConfigError("inverse temperature must be positive and finite");
    }
    const auto classes = stack.size();
    const auto pixels = stack.height() * stack.width();
    const auto order = canonical_order(stack.class_ids());
    std::vector<std::vector<double>> weights(classes, std::vector<double>(pixels));
    std::vector<double> scaled(classes);

    for (std::size_t p = 0; p < pixels; ++p) {
        double peak = -std::numeric_limits<double>::infinity();
        for (std::size_t c = 0; c < classes; ++c) {
            scaled[c] = inverse_temperature * stack.map(c)[p];
            peak = std::max(peak, scaled[c]);
        }
        double total = 0.0;
        for (auto c : order) {
            scaled[c] = std::exp(scaled[c] - peak);
            total += scaled[c];
        }
        total = std::max(total, stability_epsilon);
        for (std::size_t c = 0; c < classes; ++c) {
            weights[c][p] = scaled[c] / total;
        }
    }
    return ClassDistributionStack(stack.class_ids(), stack.height(), stack.width(), std::move(weights));
}

ClassDistributionStack averaged_distribution(const AttributionStack& stack, const LensConfig& config) {
    config.validate();
    const auto classes = stack.size();
    const auto pixels = stack.height() * stack.width();
    // Running mean: exact when every temperature yields the same weight.
    std::vector<std::vector<double>> mean(classes, std::vector<double>(pixels, 0.0));
    double count = 0.0;
    for (double s : config.inverse_temperatures) {
        const auto dist = pixel_softmax(stack, s, config.stability_epsilon);
        count += 1.0;
        for (std::size_t c = 0; c < classes; ++c) {
            const auto& w = dist.weights(c);
            for (std::size_t p = 0; p < pixels; ++p) {
                mean[c][p] += (w[p] - mean[c][p]) / count;
            }
        }
    }
    return ClassDistributionStack(stack.class_ids(), stack.height(), stack.width(), std::move(mean));
}

RegionMask chance_mask(const ClassDistributionStack& distribution, ClassId target) {
    const auto& w = distribution.weights(distribution.slot_of(target));
    const double chance = 1.0 / static_cast<double>(distribution.size());
    RegionMask mask(distribution.height(), distribution.width(), false);
    for (std::size_t p = 0; p < w.size(); ++p) {
        if (w[p] > chance) {
            mask.set(p / distribution.width(), p % distribution.width(), true);
        }
    }
    return mask;
}

Refinement refine_detailed(const AttributionStack& stack, ClassId target, const LensConfig& config) {
    const auto slot = stack.slot_of(target);
    const auto dist = averaged_distribution(stack, config);
    const auto& attribution = stack.map(slot);
    const auto& weight = dist.weights(slot);
    const double chance = 1.0 / static_cast<double>(stack.size());

    std::vector<double> out(weight.size());
    std::size_t kept = 0;
    for (std::size_t p = 0; p < out.size(); ++p) {
        const bool keep = !config.mask_enabled || weight[p] > chance;
        out[p] = keep ? attribution[p] * weight[p] : 0.0;
        kept += keep ? 1 : 0;
    }
    return Refinement{AttributionMap(stack.height(), stack.width(), std::move(out)),
                      static_cast<double>(kept) / static_cast<double>(weight.size())};
}

AttributionMap refine(const AttributionStack& stack, ClassId target, const LensConfig& config) {
    return refine_detailed(stack, target, config).map;
}

AttributionMap discount_form(const AttributionStack& stack, ClassId target,
                             const ClassDistributionStack& distribution) {
    check_aligned(stack, distribution);
    const auto& attribution = stack.map(stack.slot_of(target));
    const auto order = canonical_order(distribution.class_ids());
    std::vector<double> out(attribution.size());
    for (std::size_t p = 0; p < out.size(); ++p) {
        double shared = 0.0;
        for (auto slot : order) {
            if (distribution.class_ids()[slot] != target) {
                shared += distribution.weights(slot)[p];
            }
        }
        out[p] = attribution[p] * (1.0 - shared);
    }
    return AttributionMap(stack.height(), stack.width(), std::move(out));
}

AttributionMap naive_contrastive(const AttributionStack& stack, ClassId target,
                                 const ClassDistributionStack& distribution) {
    check_aligned(stack, distribution);
    const auto& attribution = stack.map(stack.slot_of(target));
    const auto order = canonical_order(distribution.class_ids());
    std::vector<double> out(attribution.size());
    for (std::size_t p = 0; p < out.size(); ++p) {
        double expected = 0.0;
        for (auto slot : order) {
            const auto id = distribution.class_ids()[slot];
            expected += distribution.weights(slot)[p] * stack.map(stack.slot_of(id))[p];
        }
        out[p] = attribution[p] - expected;
    }
    return AttributionMap(stack.height(), stack.width(), std::move(out));
}

}  // namespace alens
