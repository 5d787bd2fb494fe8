#pragma once

#include <array>
#include <cstdint>
#include <vector>

#include "alens/maps.hpp"
#include "alens/model.hpp"

namespace alens {

/// Quadrant order: 0 top-left, 1 top-right, 2 bottom-left, 3 bottom-right.
inline constexpr std::size_t kQuadrants = 4;

struct DatasetSpec {
    std::size_t image_size = 32;
    std::size_t channels = 1;
    std::size_t classes = 8;
    /// Gaussian noise added to template foreground pixels (values are clipped to [0, 1]).
    double noise_sigma = 0.05;
    /// Border band of each quadrant left empty by the templates.
    std::size_t margin = 3;
    std::uint64_t seed = 0;

    void validate() const;
};

/**
 * One pattern per class, each the size of a quadrant. The interior pixels of a
 * quadrant are dealt round-robin (after a seeded shuffle) to the classes, so
 * the supports of different class patterns are disjoint.
 */
struct TemplateBank {
    Shape patch;
    std::vector<Tensor3> patterns;

    std::size_t classes() const { return patterns.size(); }
};

struct QuadrantSample {
    ImageSample image;
    std::array<ClassId, kQuadrants> classes{};
    std::array<RegionMask, kQuadrants> regions;
};

struct QuadrantDataset {
    TemplateBank templates;
    std::vector<QuadrantSample> samples;
    double noise_sigma = 0.0;
    std::uint64_t seed = 0;
};

TemplateBank make_templates(const DatasetSpec& spec);

/// The four quadrant rectangles of an HxW grid; they partition the grid.
std::array<RegionMask, kQuadrants> quadrant_regions(std::size_t height, std::size_t width);

/**
 * Deterministic per (spec.seed, index): four distinct classes are drawn and
 * their patterns tiled into the quadrants.
 */
QuadrantSample make_sample(const TemplateBank& templates, const DatasetSpec& spec, std::size_t index);

QuadrantDataset generate_dataset(const DatasetSpec& spec, std::size_t count);

enum class QuadrantMode { Disjoint, Overlapping };

/**
 * Linear classifier whose class-c weights repeat class c's pattern in every
 * quadrant. Disjoint mode uses the pattern alone; overlapping mode adds
 * `share` times every other class's pattern, so a class also responds to its
 * competitors' objects.
 */
LinearSoftmaxModel make_quadrant_model(const TemplateBank& templates, QuadrantMode mode, double share = 0.5);

/**
 * One hidden unit per (class, quadrant) holding that class's weights restricted
 * to the quadrant, with bias −threshold; the output sums a class's units.
 */
MlpModel make_quadrant_mlp(const TemplateBank& templates, QuadrantMode mode, double share = 0.5,
                           double threshold = 0.5);

}  // namespace alens
