#pragma once

#include <optional>
#include <vector>

#include "alens/maps.hpp"
#include "alens/model.hpp"

namespace alens {

enum class Binarization {
    /// The |R| highest-valued strictly positive pixels (ties in row-major order).
    TopRegionSize,
    /// Pixels whose value is at least `threshold` times the map maximum (and positive).
    Threshold,
};

struct LocalizationOptions {
    BlurOptions blur{};
    Binarization binarization = Binarization::TopRegionSize;
    double threshold = 0.5;
};

struct LocalizationReport {
    double ra = 0.0;
    double iou = 0.0;
    double precision = 0.0;
    double recall = 0.0;
    double f1 = 0.0;
};

/**
 * positive part -> Gaussian blur -> metrics. Region attribution is the share
 * of blurred mass inside the region; IoU, precision, recall and F1 compare
 * the binarized map against the region. An all-zero map scores 0 everywhere.
 */
LocalizationReport localization_eval(const AttributionMap& map, const RegionMask& region,
                                     const LocalizationOptions& options = {});

/// Region attribution on an already preprocessed (non-negative) map.
double region_attribution(const AttributionMap& processed, const RegionMask& region);

/// Pixel indices sorted by descending value; equal values keep row-major order.
std::vector<std::size_t> rank_pixels(const AttributionMap& map);

struct CurveResult {
    std::vector<double> fractions;
    std::vector<double> scores;
    double auc = 0.0;
};

/// Trapezoidal area under scores over fractions.
double trapezoid_auc(const std::vector<double>& fractions, const std::vector<double>& scores);

/// Number of pixels changed at tick k of `steps` over `pixels` pixels: floor(k · pixels / steps).
std::size_t pixels_at_tick(std::size_t tick, std::size_t steps, std::size_t pixels);

struct InsertionOptions {
    std::size_t steps = 64;
    std::size_t blur_kernel = 11;
    double blur_sigma = 5.0;
};

/// Start from a blurred copy of the image and reveal original pixels in rank order.
CurveResult insertion_curve(const ToyModel& model, const ImageSample& image, const AttributionMap& map,
                            ClassId target, const InsertionOptions& options = {});

struct DeletionOptions {
    std::size_t steps = 64;
    /// Replacement value for removed pixels; per-channel image mean when empty.
    std::optional<double> baseline_value;
};

/// Start from the image and overwrite pixels in rank order with the deletion baseline.
CurveResult deletion_curve(const ToyModel& model, const ImageSample& image, const AttributionMap& map,
                           ClassId target, const DeletionOptions& options = {});

struct SimilarityOptions {
    /// Compare absolute values (default) or signed values.
    bool absolute = true;
};

struct SimilarityReport {
    double pearson = 0.0;
    double spearman = 0.0;
    double cosine = 0.0;
    /// Set when a measure was undefined (constant or zero input) and reported as 0.
    bool pearson_degenerate = false;
    bool spearman_degenerate = false;
    bool cosine_degenerate = false;
};

SimilarityReport similarity(const AttributionMap& a, const AttributionMap& b, const SimilarityOptions& options = {});

/// Average ranks (1-based) with ties sharing the mean of their positions.
std::vector<double> average_ranks(std::span<const double> values);

}  // namespace alens
