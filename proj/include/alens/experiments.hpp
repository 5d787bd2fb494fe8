#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "alens/attributors.hpp"
#include "alens/class_select.hpp"
#include "alens/dataset.hpp"
#include "alens/lens.hpp"
#include "alens/metrics.hpp"

namespace alens {

/// Vanilla and lens-refined maps for every quadrant of a grid sample, computed from one stack.
struct QuadrantAttributions {
    std::array<AttributionMap, kQuadrants> vanilla;
    std::array<AttributionMap, kQuadrants> refined;
};

/// The class set is the sample's four quadrant classes.
QuadrantAttributions attribute_quadrants(const ToyModel& model, const QuadrantSample& sample,
                                         const AttributionMethodSpec& method, const LensConfig& lens);

struct LocalizationRow {
    std::size_t sample = 0;
    std::size_t quadrant = 0;
    ClassId class_id = 0;
    LocalizationReport vanilla;
    LocalizationReport refined;
};

/// One row per sample x quadrant, ordered by (sample, quadrant).
std::vector<LocalizationRow> localization_experiment(const ToyModel& model, std::span<const QuadrantSample> samples,
                                                     const AttributionMethodSpec& method, const LensConfig& lens,
                                                     const LocalizationOptions& options);

enum class CurveMode { Insertion, Deletion };

struct CurveOptions {
    std::size_t steps = 64;
    std::size_t insertion_blur_kernel = 11;
    double insertion_blur_sigma = 5.0;
    std::optional<double> deletion_baseline;
};

struct CurveRow {
    std::size_t sample = 0;
    std::size_t quadrant = 0;
    ClassId class_id = 0;
    double vanilla_auc = 0.0;
    double refined_auc = 0.0;
};

std::vector<CurveRow> curve_experiment(const ToyModel& model, std::span<const QuadrantSample> samples,
                                       const AttributionMethodSpec& method, const LensConfig& lens, CurveMode mode,
                                       const CurveOptions& options);

struct RandomizationSpec {
    std::vector<AttributionMethodSpec> methods;
    LensConfig lens{};
    SelectionStrategy strategy = TopK{2, false};
    std::vector<double> fractions{0.0, 0.25, 0.5, 0.75, 1.0};
    std::uint64_t seed = 0;
    /// Randomization draws use seeds seed, seed+1, ..., seed+seeds-1.
    std::size_t seeds = 1;
    SimilarityOptions similarity{};
};

struct RandomizationRow {
    std::uint64_t seed = 0;
    double fraction = 0.0;
    std::size_t groups_randomized = 0;
    std::size_t image = 0;
    std::string method;
    /// "vanilla" or "al".
    std::string variant;
    SimilarityReport report;
};

struct RandomizationSummaryRow {
    double fraction = 0.0;
    std::size_t groups_randomized = 0;
    std::string method;
    std::string variant;
    double pearson = 0.0;
    double spearman = 0.0;
    double cosine = 0.0;
    double abs_pearson = 0.0;
};

struct RandomizationResult {
    /// Ordered by (seed, fraction, image, method, variant).
    std::vector<RandomizationRow> rows;
    /// Means over seeds and images, ordered by (fraction, method, variant).
    std::vector<RandomizationSummaryRow> summary;
};

/**
 * Cascading-randomization sanity check. The explained class is the original
 * model's top prediction. For the lens variant the class set is re-selected on
 * every randomized model; the explained class is prepended when the strategy
 * leaves it out. Maps of the randomized model are compared to those of the
 * original model.
 */
RandomizationResult randomization_experiment(const ToyModel& model, std::span<const ImageSample> images,
                                             const RandomizationSpec& spec);

/// Class set for explaining `target`: the strategy's selection with `target` prepended if missing.
std::vector<ClassId> class_set_for(std::span<const double> logits, ClassId target, const SelectionStrategy& strategy);

/// Relative change (refined − vanilla) / |vanilla| rendered like "+12.5%"; "+0%" when equal.
std::string improvement_percent(double vanilla, double refined);

}  // namespace alens
