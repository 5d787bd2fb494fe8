#pragma once

#include <cstdint>
#include <filesystem>
#include <json.hpp>
#include <optional>
#include <string>

#include "alens/attributors.hpp"
#include "alens/class_select.hpp"
#include "alens/dataset.hpp"
#include "alens/experiments.hpp"
#include "alens/lens.hpp"
#include "alens/metrics.hpp"

namespace alens {

enum class ModelKind { QuadrantLinear, QuadrantMlp, RandomMlp };

struct ModelSpec {
    ModelKind kind = ModelKind::QuadrantLinear;
    /// Weight given to competitors' patterns in overlapping mode.
    double share = 0.5;
    /// Hidden width of random_mlp.
    std::size_t hidden = 64;
    /// Hidden-unit threshold of quadrant_mlp.
    double threshold = 0.5;
};

struct DatasetConfig {
    DatasetSpec spec{};
    std::size_t samples = 100;
    QuadrantMode mode = QuadrantMode::Overlapping;
};

struct MetricConfig {
    LocalizationOptions localization{};
    CurveOptions curve{};
    SimilarityOptions similarity{};
    std::vector<double> randomization_fractions{0.0, 0.25, 0.5, 0.75, 1.0};
    std::size_t sanity_seeds = 64;
    std::size_t sanity_images = 8;
};

/**
 * Everything a run needs. Every section is optional in the JSON file and
 * falls back to the defaults here; unknown keys are rejected.
 */
struct RunConfig {
    std::uint64_t seed = 0;
    ModelSpec model{};
    DatasetConfig dataset{};
    AttributionMethodSpec method = InputXGradient{};
    LensConfig lens{};
    /// Empty means the command's default: the quadrant classes for localization
    /// and curves, top-2 for the randomization check.
    std::optional<SelectionStrategy> strategy;
    MetricConfig metrics{};
    std::string out = "alens-out";
};

RunConfig parse_config(const nlohmann::json& json);
RunConfig load_config(const std::filesystem::path& path);

/// Fully resolved config; parse_config(to_json(c)) reproduces c.
nlohmann::json to_json(const RunConfig& config);

/// Builds the model the config describes over the dataset's template bank.
ToyModel build_model(const RunConfig& config, const TemplateBank& templates);

/// The dataset spec with the run seed applied.
DatasetSpec dataset_spec(const RunConfig& config);

}  // namespace alens
