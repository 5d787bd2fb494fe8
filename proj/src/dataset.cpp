#include "alens/dataset.hpp"

#include <algorithm>
#include <numeric>
#include <random>
#include <string>

#include "alens/error.hpp"

namespace alens {

namespace {

std::mt19937_64 stream(std::uint64_t seed, std::uint64_t index, std::uint32_t tag) {
    std::seed_seq seq{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32),
                      static_cast<std::uint32_t>(index), static_cast<std::uint32_t>(index >> 32), tag};
    return std::mt19937_64(seq);
}

constexpr std::uint32_t kTemplateTag = 0x7e3a;
constexpr std::uint32_t kSampleTag = 0x5a31;

// Class-c weight at quadrant-local position (row, col, ch).
double class_weight(const TemplateBank& templates, ClassId c, QuadrantMode mode, double share, std::size_t row,
                    std::size_t col, std::size_t ch) {
    double w = templates.patterns[c](row, col, ch);
    if (mode == QuadrantMode::Overlapping) {
        for (ClassId k = 0; k < templates.classes(); ++k) {
            if (k != c) {
                w += share * templates.patterns[k](row, col, ch);
            }
        }
    }
    return w;
}

void check_bank(const TemplateBank& templates) {
    if (templates.classes() < 2) {
        throw InvalidInputError("template bank needs at least 2 classes");
    }
    for (const auto& p : templates.patterns) {
        if (p.shape() != templates.patch) {
            throw InvalidInputError("template pattern does not match the bank's patch shape");
        }
    }
}

}  // namespace

void DatasetSpec::validate() const {
    if (image_size < 2 || image_size % 2 != 0) {
        throw ConfigError("image size must be even and at least 2");
    }
    if (channels < 1) {
        throw ConfigError("channels must be positive");
    }
    if (classes < kQuadrants) {
        throw ConfigError("a quadrant dataset needs at least 4 classes");
    }
    if (!(noise_sigma >= 0.0)) {
        throw ConfigError("noise sigma must be non-negative");
    }
    const auto patch = image_size / 2;
    if (2 * margin >= patch) {
        throw ConfigError("margin leaves no room inside a quadrant");
    }
    const auto interior = (patch - 2 * margin) * (patch - 2 * margin);
    if (interior < classes) {
        throw ConfigError("quadrant interior has " + std::to_string(interior) + " pixels, fewer than " +
                          std::to_string(classes) + " classes");
    }
}

TemplateBank make_templates(const DatasetSpec& spec) {
    spec.validate();
    const auto patch = spec.image_size / 2;
    TemplateBank bank;
    bank.patch = Shape{patch, patch, spec.channels};
    bank.patterns.assign(spec.classes, Tensor3(bank.patch, 0.0));

    std::vector<std::size_t> interior;
    for (std::size_t r = spec.margin; r < patch - spec.margin; ++r) {
        for (std::size_t c = spec.margin; c < patch - spec.margin; ++c) {
            interior.push_back(r * patch + c);
        }
    }
    auto rng = stream(spec.seed, 0, kTemplateTag);
    std::shuffle(interior.begin(), interior.end(), rng);
    std::uniform_real_distribution<double> intensity(0.5, 1.0);
    for (std::size_t i = 0; i < interior.size(); ++i) {
        auto& pattern = bank.patterns[i % spec.classes];
        const auto r = interior[i] / patch;
        const auto c = interior[i] % patch;
        for (std::size_t ch = 0; ch < spec.channels; ++ch) {
            pattern(r, c, ch) = intensity(rng);
        }
    }
    return bank;
}

std::array<RegionMask, kQuadrants> quadrant_regions(std::size_t height, std::size_t width) {
    const auto h2 = height / 2;
    const auto w2 = width / 2;
    return {RegionMask::rectangle(height, width, 0, h2, 0, w2), RegionMask::rectangle(height, width, 0, h2, w2, width),
            RegionMask::rectangle(height, width, h2, height, 0, w2),
            RegionMask::rectangle(height, width, h2, height, w2, width)};
}

QuadrantSample make_sample(const TemplateBank& templates, const DatasetSpec& spec, std::size_t index) {
    check_bank(templates);
    if (templates.classes() < kQuadrants) {
        throw InvalidInputError("need at least 4 classes to fill the quadrants");
    }
    const auto patch = templates.patch;
    const Shape shape{2 * patch.height, 2 * patch.width, patch.channels};
    auto rng = stream(spec.seed, index, kSampleTag);

    std::vector<ClassId> ids(templates.classes());
    std::iota(ids.begin(), ids.end(), ClassId{0});
    std::shuffle(ids.begin(), ids.end(), rng);

    QuadrantSample sample;
    std::copy_n(ids.begin(), kQuadrants, sample.classes.begin());
    sample.regions = quadrant_regions(shape.height, shape.width);

    std::normal_distribution<double> noise(0.0, 1.0);
    Tensor3 pixels(shape, 0.0);
    for (std::size_t q = 0; q < kQuadrants; ++q) {
        const auto& pattern = templates.patterns[sample.classes[q]];
        const auto row0 = (q / 2) * patch.height;
        const auto col0 = (q % 2) * patch.width;
        for (std::size_t r = 0; r < patch.height; ++r) {
            for (std::size_t c = 0; c < patch.width; ++c) {
                for (std::size_t ch = 0; ch < patch.channels; ++ch) {
                    double v = pattern(r, c, ch);
                    if (v != 0.0 && spec.noise_sigma > 0.0) {
                        v = std::clamp(v + spec.noise_sigma * noise(rng), 0.0, 1.0);
                    }
                    pixels(row0 + r, col0 + c, ch) = v;
                }
            }
        }
    }
    sample.image = ImageSample(std::move(pixels));
    return sample;
}

QuadrantDataset generate_dataset(const DatasetSpec& spec, std::size_t count) {
    QuadrantDataset dataset;
    dataset.templates = make_templates(spec);
    dataset.noise_sigma = spec.noise_sigma;
    dataset.seed = spec.seed;
    dataset.samples.reserve(count);
    for (std::size_t i = 0; i < count; ++i) {
        dataset.samples.push_back(make_sample(dataset.templates, spec, i));
    }
    return dataset;
}

LinearSoftmaxModel make_quadrant_model(const TemplateBank& templates, QuadrantMode mode, double share) {
    check_bank(templates);
    const auto patch = templates.patch;
    const Shape input{2 * patch.height, 2 * patch.width, patch.channels};
    const auto n = input.size();
    std::vector<double> weights(templates.classes() * n);
    for (ClassId c = 0; c < templates.classes(); ++c) {
        for (std::size_t r = 0; r < input.height; ++r) {
            for (std::size_t col = 0; col < input.width; ++col) {
                for (std::size_t ch = 0; ch < input.channels; ++ch) {
                    weights[c * n + (r * input.width + col) * input.channels + ch] =
                        class_weight(templates, c, mode, share, r % patch.height, col % patch.width, ch);
                }
            }
        }
    }
    return LinearSoftmaxModel(input, templates.classes(), std::move(weights),
                              std::vector<double>(templates.classes(), 0.0));
}

MlpModel make_quadrant_mlp(const TemplateBank& templates, QuadrantMode mode, double share, double threshold) {
    const auto linear = make_quadrant_model(templates, mode, share);
    const auto& input = linear.input_shape();
    const auto n = input.size();
    const auto classes = templates.classes();
    const auto hidden = classes * kQuadrants;
    const auto regions = quadrant_regions(input.height, input.width);

    std::vector<double> w1(hidden * n, 0.0);
    std::vector<double> b1(hidden, -threshold);
    std::vector<double> w2(classes * hidden, 0.0);
    for (ClassId c = 0; c < classes; ++c) {
        const auto w = linear.class_weights(c);
        for (std::size_t q = 0; q < kQuadrants; ++q) {
            const auto unit = c * kQuadrants + q;
            for (std::size_t p = 0; p < input.pixels(); ++p) {
                if (!regions[q][p]) {
                    continue;
                }
                for (std::size_t ch = 0; ch < input.channels; ++ch) {
                    w1[unit * n + p * input.channels + ch] = w[p * input.channels + ch];
                }
            }
            w2[c * hidden + unit] = 1.0;
        }
    }
    return MlpModel(input, hidden, classes, std::move(w1), std::move(b1), std::move(w2),
                    std::vector<double>(classes, 0.0));
}

}  // namespace alens
