#include "alens/maps.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "alens/error.hpp"

namespace alens {

namespace {

bool finite_span(std::span<const double> values) {
    return std::all_of(values.begin(), values.end(), [](double v) { return std::isfinite(v); });
}

std::string dims(std::size_t h, std::size_t w) { return std::to_string(h) + "x" + std::to_string(w); }

// Blur one HxW plane (strided by `stride` in `data`) in place.
void blur_plane(std::vector<double>& data, std::size_t height, std::size_t width, std::size_t stride,
                std::size_t offset, const std::vector<double>& kernel) {
    const auto radius = static_cast<std::ptrdiff_t>(kernel.size() / 2);
    const auto h = static_cast<std::ptrdiff_t>(height);
    const auto w = static_cast<std::ptrdiff_t>(width);
    auto at = [&](std::ptrdiff_t r, std::ptrdiff_t c) -> double& {
        return data[static_cast<std::size_t>(r * w + c) * stride + offset];
    };

    std::vector<double> tmp(height * width);
    for (std::ptrdiff_t r = 0; r < h; ++r) {
        for (std::ptrdiff_t c = 0; c < w; ++c) {
            double acc = 0.0;
            for (std::ptrdiff_t k = -radius; k <= radius; ++k) {
                const auto cc = std::clamp<std::ptrdiff_t>(c + k, 0, w - 1);
                acc += kernel[static_cast<std::size_t>(k + radius)] * at(r, cc);
            }
            tmp[static_cast<std::size_t>(r * w + c)] = acc;
        }
    }
    for (std::ptrdiff_t r = 0; r < h; ++r) {
        for (std::ptrdiff_t c = 0; c < w; ++c) {
            double acc = 0.0;
            for (std::ptrdiff_t k = -radius; k <= radius; ++k) {
                const auto rr = std::clamp<std::ptrdiff_t>(r + k, 0, h - 1);
                acc += kernel[static_cast<std::size_t>(k + radius)] * tmp[static_cast<std::size_t>(rr * w + c)];
            }
            at(r, c) = acc;
        }
    }
}

}  // namespace

Tensor3::Tensor3(Shape shape, double fill) : shape_(shape), values_(shape.size(), fill) {}

Tensor3::Tensor3(Shape shape, std::vector<double> values) : shape_(shape), values_(std::move(values)) {
    if (values_.size() != shape_.size()) {
        throw InvalidInputError("tensor has " + std::to_string(values_.size()) + " values, shape requires " +
                                std::to_string(shape_.size()));
    }
}

bool Tensor3::all_finite() const { return finite_span(values_); }

ImageSample::ImageSample(Tensor3 pixels) : pixels_(std::move(pixels)) {
    const auto& s = pixels_.shape();
    if (s.height == 0 || s.width == 0 || s.channels == 0) {
        throw InvalidInputError("image dimensions must be positive");
    }
    for (double v : pixels_.values()) {
        if (!std::isfinite(v) || v < 0.0 || v > 1.0) {
            throw InvalidInputError("image pixel values must be finite and in [0, 1]");
        }
    }
}

ImageSample::ImageSample(Shape shape, std::vector<double> values) : ImageSample(Tensor3(shape, std::move(values))) {}

AttributionMap::AttributionMap(std::size_t height, std::size_t width, double fill)
    : AttributionMap(height, width, std::vector<double>(height * width, fill)) {}

AttributionMap::AttributionMap(std::size_t height, std::size_t width, std::vector<double> values)
    : height_(height), width_(width), values_(std::move(values)) {
    if (height_ == 0 || width_ == 0) {
        throw InvalidInputError("attribution map dimensions must be positive");
    }
    if (values_.size() != height_ * width_) {
        throw InvalidInputError("attribution map of " + dims(height_, width_) + " given " +
                                std::to_string(values_.size()) + " values");
    }
    if (!finite_span(values_)) {
        throw InvalidInputError("attribution map contains non-finite values");
    }
}

AttributionStack::AttributionStack(std::vector<ClassId> class_ids, std::vector<AttributionMap> maps)
    : class_ids_(std::move(class_ids)), maps_(std::move(maps)) {
    if (class_ids_.size() != maps_.size()) {
        throw InvalidStackError("stack has " + std::to_string(class_ids_.size()) + " class ids but " +
                                std::to_string(maps_.size()) + " maps");
    }
    if (class_ids_.size() < 2) {
        throw InvalidStackError("class competition needs at least 2 classes, got " +
                                std::to_string(class_ids_.size()));
    }
    auto sorted = class_ids_;
    std::sort(sorted.begin(), sorted.end());
    if (std::adjacent_find(sorted.begin(), sorted.end()) != sorted.end()) {
        throw InvalidStackError("stack class ids must be distinct");
    }
    for (const auto& m : maps_) {
        if (!m.same_dims(maps_.front())) {
            throw InvalidStackError("stack maps differ in dimensions: " + dims(m.height(), m.width()) + " vs " +
                                    dims(maps_.front().height(), maps_.front().width()));
        }
    }
}

std::size_t AttributionStack::slot_of(ClassId id) const {
    const auto it = std::find(class_ids_.begin(), class_ids_.end(), id);
    if (it == class_ids_.end()) {
        throw UnknownClassError("class " + std::to_string(id) + " is not in the stack");
    }
    return static_cast<std::size_t>(it - class_ids_.begin());
}

bool AttributionStack::contains(ClassId id) const {
    return std::find(class_ids_.begin(), class_ids_.end(), id) != class_ids_.end();
}

RegionMask::RegionMask(std::size_t height, std::size_t width, bool fill)
    : height_(height), width_(width), cells_(height * width, fill) {}

RegionMask::RegionMask(std::size_t height, std::size_t width, std::vector<bool> cells)
    : height_(height), width_(width), cells_(std::move(cells)) {
    if (cells_.size() != height_ * width_) {
        throw InvalidInputError("region mask of " + dims(height_, width_) + " given " +
                                std::to_string(cells_.size()) + " cells");
    }
}

RegionMask RegionMask::rectangle(std::size_t height, std::size_t width, std::size_t row0, std::size_t row1,
                                 std::size_t col0, std::size_t col1) {
    RegionMask mask(height, width, false);
    for (std::size_t r = row0; r < std::min(row1, height); ++r) {
        for (std::size_t c = col0; c < std::min(col1, width); ++c) {
            mask.set(r, c, true);
        }
    }
    return mask;
}

std::size_t RegionMask::count() const {
    return static_cast<std::size_t>(std::count(cells_.begin(), cells_.end(), true));
}

AttributionMap channel_aggregate(const Tensor3& raw) {
    if (!raw.all_finite()) {
        throw InvalidInputError("channel_aggregate: input contains non-finite values");
    }
    const auto& s = raw.shape();
    std::vector<double> out(s.pixels(), 0.0);
    const auto values = raw.values();
    for (std::size_t p = 0; p < s.pixels(); ++p) {
        double acc = 0.0;
        for (std::size_t k = 0; k < s.channels; ++k) {
            acc += values[p * s.channels + k];
        }
        out[p] = acc;
    }
    return AttributionMap(s.height, s.width, std::move(out));
}

AttributionMap positive_part(const AttributionMap& map) {
    std::vector<double> out(map.values().begin(), map.values().end());
    for (double& v : out) {
        v = std::max(v, 0.0);
    }
    return AttributionMap(map.height(), map.width(), std::move(out));
}

std::vector<double> gaussian_kernel(std::size_t kernel_size, double sigma) {
    if (kernel_size == 0 || kernel_size % 2 == 0) {
        throw ConfigError("blur kernel size must be odd and positive, got " + std::to_string(kernel_size));
    }
    if (!(sigma > 0.0) || !std::isfinite(sigma)) {
        throw ConfigError("blur sigma must be positive");
    }
    const auto radius = static_cast<std::ptrdiff_t>(kernel_size / 2);
    std::vector<double> kernel(kernel_size);
    double total = 0.0;
    for (std::ptrdiff_t k = -radius; k <= radius; ++k) {
        const double v = std::exp(-0.5 * static_cast<double>(k * k) / (sigma * sigma));
        kernel[static_cast<std::size_t>(k + radius)] = v;
        total += v;
    }
    for (double& v : kernel) {
        v /= total;
    }
    return kernel;
}

AttributionMap gaussian_blur(const AttributionMap& map, std::size_t kernel_size, double sigma) {
    const auto kernel = gaussian_kernel(kernel_size, sigma);
    std::vector<double> data(map.values().begin(), map.values().end());
    blur_plane(data, map.height(), map.width(), 1, 0, kernel);
    return AttributionMap(map.height(), map.width(), std::move(data));
}

Tensor3 gaussian_blur(const Tensor3& image, std::size_t kernel_size, double sigma) {
    const auto kernel = gaussian_kernel(kernel_size, sigma);
    std::vector<double> data(image.values().begin(), image.values().end());
    for (std::size_t ch = 0; ch < image.channels(); ++ch) {
        blur_plane(data, image.height(), image.width(), image.channels(), ch, kernel);
    }
    return Tensor3(image.shape(), std::move(data));
}

}  // namespace alens
