#pragma once

#include <vector>

#include "alens/maps.hpp"

namespace alens {

struct LensConfig {
    /// Multipliers applied to attributions before the per-pixel softmax.
    std::vector<double> inverse_temperatures{1.0, 5.0, 100.0};
    /// Zero out pixels where the target weight is not above 1/C'.
    bool mask_enabled = true;
    /// Floor on the softmax denominator.
    double stability_epsilon = 1e-12;

    /// Throws ConfigError if the temperature list is empty or has a non-positive entry.
    void validate() const;
};

/**
 * Per-pixel distribution over the classes of a stack: for every pixel the
 * weights across classes are in [0, 1] and sum to one.
 */
class ClassDistributionStack {
public:
    ClassDistributionStack(std::vector<ClassId> class_ids, std::size_t height, std::size_t width,
                           std::vector<std::vector<double>> weights);

    std::size_t size() const { return class_ids_.size(); }
    std::size_t height() const { return height_; }
    std::size_t width() const { return width_; }
    const std::vector<ClassId>& class_ids() const { return class_ids_; }
    const std::vector<double>& weights(std::size_t slot) const { return weights_[slot]; }
    std::size_t slot_of(ClassId id) const;

    AttributionMap weight_map(std::size_t slot) const;

private:
    std::vector<ClassId> class_ids_;
    std::size_t height_;
    std::size_t width_;
    std::vector<std::vector<double>> weights_;
};

/// Softmax across classes at every pixel of `inverse_temperature · A`, max-shifted for stability.
ClassDistributionStack pixel_softmax(const AttributionStack& stack, double inverse_temperature,
                                     double stability_epsilon = 1e-12);

/// Arithmetic mean of pixel_softmax over the configured inverse temperatures.
ClassDistributionStack averaged_distribution(const AttributionStack& stack, const LensConfig& config);

/// Pixels where the target weight is strictly above chance (1/C').
RegionMask chance_mask(const ClassDistributionStack& distribution, ClassId target);

struct Refinement {
    AttributionMap map;
    /// Fraction of pixels kept by the chance mask (1 when masking is off).
    double mask_coverage = 1.0;
};

/**
 * Class-competitive refinement of the target map:
 *   out = A_target · W_target · [W_target > 1/C']
 * where W is the temperature-averaged pixel distribution. The mask factor is
 * dropped when config.mask_enabled is false. Output is bit-identical under
 * any permutation of the stack's class order.
 */
AttributionMap refine(const AttributionStack& stack, ClassId target, const LensConfig& config = {});
Refinement refine_detailed(const AttributionStack& stack, ClassId target, const LensConfig& config = {});

/// A_target · (1 − Σ_{c≠target} W_c). Algebraically equal to A_target · W_target.
AttributionMap discount_form(const AttributionStack& stack, ClassId target,
                             const ClassDistributionStack& distribution);

/// A_target − Σ_c W_c · A_c. Self-cancels where the target dominates.
AttributionMap naive_contrastive(const AttributionStack& stack, ClassId target,
                                 const ClassDistributionStack& distribution);

}  // namespace alens
