#pragma once

#include <cstddef>
#include <filesystem>
#include <span>
#include <string>
#include <vector>

#include "alens/maps.hpp"

namespace alens::npy {

/**
 * In-memory NPY array. Always float64 in memory; little-endian float32
 * files are widened on read. Only C-order arrays are supported.
 */
struct Array {
    std::vector<std::size_t> shape;
    std::vector<double> data;

    std::size_t element_count() const;
};

/// Serialize to NPY format version 1.0, '<f8', C order.
std::string encode(const Array& array);

/// Parse NPY bytes. Throws ParseError carrying the byte offset of the first problem.
Array decode(std::span<const char> bytes);

Array read(const std::filesystem::path& path);
void write(const std::filesystem::path& path, const Array& array);

// Domain helpers. Maps are stored as HxW, images as HxWxd, stacks as C'xHxW
// with a sidecar JSON (same stem, ".json") holding {"class_ids": [...]}.

Array from_map(const AttributionMap& map);
AttributionMap to_map(const Array& array);

void save_map(const std::filesystem::path& path, const AttributionMap& map);
AttributionMap load_map(const std::filesystem::path& path);

void save_image(const std::filesystem::path& path, const ImageSample& image);
ImageSample load_image(const std::filesystem::path& path);

std::filesystem::path stack_sidecar(const std::filesystem::path& npy_path);
void save_stack(const std::filesystem::path& path, const AttributionStack& stack);
AttributionStack load_stack(const std::filesystem::path& path);

/// Masks are stored as KxHxW float64 arrays of 0/1.
void save_masks(const std::filesystem::path& path, std::span<const RegionMask> masks);
std::vector<RegionMask> load_masks(const std::filesystem::path& path);

}  // namespace alens::npy
