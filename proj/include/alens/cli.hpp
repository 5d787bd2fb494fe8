#pragma once

#include <filesystem>
#include <ostream>
#include <string>
#include <vector>

#include "alens/config.hpp"
#include "alens/dataset.hpp"
#include "alens/model.hpp"

namespace alens::cli {

/// Exit codes of the command-line tool.
enum ExitCode : int {
    kOk = 0,
    kConfigError = 2,
    kDataError = 3,
    kNumericError = 4,
};

/**
 * Entry point shared by the executable and the tests. `args` excludes the
 * program name. Diagnostics go to `err`, progress lines to `out`.
 */
int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

/// Shortest round-trip-safe text for CSV cells: 9 significant digits, '.' decimal.
std::string format_number(double value);

/// A dataset on disk as written by gen-data.
struct LoadedDataset {
    nlohmann::json manifest;
    ToyModel model;
    std::vector<QuadrantSample> samples;
};

/// Writes images, masks, templates, the model and manifest.json under `dir`.
void write_dataset(const std::filesystem::path& dir, const RunConfig& config);
LoadedDataset read_dataset(const std::filesystem::path& dir);

/// 8-bit binary PGM (P5), min-max normalized; constant maps become mid-gray (128).
std::string encode_pgm(const AttributionMap& map);

}  // namespace alens::cli
