#pragma once

#include <cstddef>
#include <span>
#include <vector>

namespace alens {

using ClassId = std::size_t;

struct Shape {
    std::size_t height = 0;
    std::size_t width = 0;
    std::size_t channels = 1;

    std::size_t pixels() const { return height * width; }
    std::size_t size() const { return height * width * channels; }
    bool operator==(const Shape&) const = default;
};

/**
 * Dense HxWxd real tensor stored row-major with channels innermost.
 * Used for raw gradients and model inputs; no range restriction.
 */
class Tensor3 {
public:
    Tensor3() = default;
    explicit Tensor3(Shape shape, double fill = 0.0);
    Tensor3(Shape shape, std::vector<double> values);

    const Shape& shape() const { return shape_; }
    std::size_t height() const { return shape_.height; }
    std::size_t width() const { return shape_.width; }
    std::size_t channels() const { return shape_.channels; }

    double& operator()(std::size_t row, std::size_t col, std::size_t ch) {
        return values_[(row * shape_.width + col) * shape_.channels + ch];
    }
    double operator()(std::size_t row, std::size_t col, std::size_t ch) const {
        return values_[(row * shape_.width + col) * shape_.channels + ch];
    }

    std::span<double> values() { return values_; }
    std::span<const double> values() const { return values_; }
    bool all_finite() const;

private:
    Shape shape_{};
    std::vector<double> values_;
};

/// An input image with all pixel values finite and in [0, 1].
class ImageSample {
public:
    ImageSample() = default;
    explicit ImageSample(Tensor3 pixels);
    ImageSample(Shape shape, std::vector<double> values);

    const Shape& shape() const { return pixels_.shape(); }
    std::size_t height() const { return pixels_.height(); }
    std::size_t width() const { return pixels_.width(); }
    std::size_t channels() const { return pixels_.channels(); }
    const Tensor3& tensor() const { return pixels_; }
    double operator()(std::size_t row, std::size_t col, std::size_t ch) const { return pixels_(row, col, ch); }

private:
    Tensor3 pixels_;
};

/// One HxW saliency grid for a single (input, class) pair. Values are always finite.
class AttributionMap {
public:
    AttributionMap() = default;
    AttributionMap(std::size_t height, std::size_t width, double fill = 0.0);
    AttributionMap(std::size_t height, std::size_t width, std::vector<double> values);

    std::size_t height() const { return height_; }
    std::size_t width() const { return width_; }
    std::size_t size() const { return values_.size(); }

    double operator()(std::size_t row, std::size_t col) const { return values_[row * width_ + col]; }
    double operator[](std::size_t index) const { return values_[index]; }
    std::span<const double> values() const { return values_; }

    bool same_dims(const AttributionMap& other) const {
        return height_ == other.height_ && width_ == other.width_;
    }
    bool operator==(const AttributionMap&) const = default;

private:
    std::size_t height_ = 0;
    std::size_t width_ = 0;
    std::vector<double> values_;
};

/// C' ≥ 2 attribution maps over one input, tagged with distinct class ids.
class AttributionStack {
public:
    AttributionStack(std::vector<ClassId> class_ids, std::vector<AttributionMap> maps);

    std::size_t size() const { return class_ids_.size(); }
    std::size_t height() const { return maps_.front().height(); }
    std::size_t width() const { return maps_.front().width(); }
    const std::vector<ClassId>& class_ids() const { return class_ids_; }
    const std::vector<AttributionMap>& maps() const { return maps_; }
    const AttributionMap& map(std::size_t slot) const { return maps_[slot]; }

    /// Slot of `id` in the stack; throws UnknownClassError if absent.
    std::size_t slot_of(ClassId id) const;
    bool contains(ClassId id) const;

private:
    std::vector<ClassId> class_ids_;
    std::vector<AttributionMap> maps_;
};

/// Boolean ground-truth region over an HxW grid.
class RegionMask {
public:
    RegionMask() = default;
    RegionMask(std::size_t height, std::size_t width, bool fill = false);
    RegionMask(std::size_t height, std::size_t width, std::vector<bool> cells);

    /// Axis-aligned rectangle [row0, row1) x [col0, col1).
    static RegionMask rectangle(std::size_t height, std::size_t width, std::size_t row0, std::size_t row1,
                                std::size_t col0, std::size_t col1);

    std::size_t height() const { return height_; }
    std::size_t width() const { return width_; }
    bool operator()(std::size_t row, std::size_t col) const { return cells_[row * width_ + col]; }
    bool operator[](std::size_t index) const { return cells_[index]; }
    void set(std::size_t row, std::size_t col, bool value) { cells_[row * width_ + col] = value; }
    std::size_t count() const;
    bool operator==(const RegionMask&) const = default;

private:
    std::size_t height_ = 0;
    std::size_t width_ = 0;
    std::vector<bool> cells_;
};

struct BlurOptions {
    bool enabled = true;
    std::size_t kernel_size = 11;
    double sigma = 2.0;
};

/// Sum over the channel axis.
AttributionMap channel_aggregate(const Tensor3& raw);

AttributionMap positive_part(const AttributionMap& map);

/// Normalized 1-D Gaussian taps of odd length `kernel_size`.
std::vector<double> gaussian_kernel(std::size_t kernel_size, double sigma);

/**
 * Separable Gaussian blur, rows then columns, with edge replication at the borders.
 * Throws ConfigError for an even kernel size or non-positive sigma.
 */
AttributionMap gaussian_blur(const AttributionMap& map, std::size_t kernel_size, double sigma);

/// Blurs every channel of an image independently (used for insertion baselines).
Tensor3 gaussian_blur(const Tensor3& image, std::size_t kernel_size, double sigma);

}  // namespace alens
