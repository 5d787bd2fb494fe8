#pragma once

#include <optional>
#include <span>
#include <utility>
#include <variant>

#include "alens/maps.hpp"
#include "alens/model.hpp"

namespace alens {

struct Gradient {};

struct InputXGradient {};

struct IntegratedGradients {
    std::size_t steps = 32;
    /// Zero image when empty.
    std::optional<Tensor3> baseline;
};

/// Square patches slid jointly over all channels; overlaps are averaged by coverage count.
struct Occlusion {
    std::size_t patch = 15;
    std::size_t stride = 8;
    double baseline_value = 0.0;
};

/// Regular grid segments ablated one at a time; every pixel of a cell receives the cell's logit drop.
struct FeatureAblation {
    std::size_t grid_rows = 10;
    std::size_t grid_cols = 10;
    double baseline_value = 0.0;
};

using AttributionMethodSpec = std::variant<Gradient, InputXGradient, IntegratedGradients, Occlusion, FeatureAblation>;

std::string method_name(const AttributionMethodSpec& spec);

/// Throws ConfigError when step counts, patch sizes or grid dims are zero.
void validate(const AttributionMethodSpec& spec);

/// Channel-aggregated attribution of logit `class_id` for `input`.
AttributionMap attribute(const ToyModel& model, const Tensor3& input, ClassId class_id,
                         const AttributionMethodSpec& spec);

/// One attribute() call per class, in the given order. Needs at least 2 distinct classes.
AttributionStack attribute_stack(const ToyModel& model, const Tensor3& input, std::span<const ClassId> class_ids,
                                 const AttributionMethodSpec& spec);

/// Integrated-gradients tensor (before channel aggregation), midpoint rule.
Tensor3 integrated_gradients_raw(const ToyModel& model, const Tensor3& input, ClassId class_id,
                                 const Tensor3& baseline, std::size_t steps);

/// (sum of the IG tensor, f_c(x) − f_c(baseline)). The two agree for an exact path integral.
std::pair<double, double> integrated_gradients_completeness(const ToyModel& model, const Tensor3& input,
                                                            ClassId class_id, const Tensor3& baseline,
                                                            std::size_t steps);

/// Top-left offsets of sliding windows along one axis; the last window is flush with the edge.
std::vector<std::size_t> window_offsets(std::size_t extent, std::size_t patch, std::size_t stride);

}  // namespace alens
