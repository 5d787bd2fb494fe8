#include "alens/attributors.hpp"

#include <algorithm>
#include <string>

#include "alens/error.hpp"

namespace alens {

namespace {

template <class... Ts>
struct overloaded : Ts... {
    using Ts::operator()...;
};

double logit(const ToyModel& model, const Tensor3& input, ClassId c) { return forward_logits(model, input)[c]; }

Tensor3 input_x_gradient_raw(const ToyModel& model, const Tensor3& input, ClassId c) {
    auto grad = logit_input_gradient(model, input, c);
    const auto x = input.values();
    auto g = grad.values();
    for (std::size_t i = 0; i < g.size(); ++i) {
        g[i] *= x[i];
    }
    return grad;
}

AttributionMap occlusion(const ToyModel& model, const Tensor3& input, ClassId c, const Occlusion& spec) {
    const auto& s = input.shape();
    const auto patch_h = std::min(spec.patch, s.height);
    const auto patch_w = std::min(spec.patch, s.width);
    const auto rows = window_offsets(s.height, spec.patch, spec.stride);
    const auto cols = window_offsets(s.width, spec.patch, spec.stride);
    const double reference = logit(model, input, c);

    // Score every placement first, then accumulate in a fixed order.
    std::vector<double> scores;
    scores.reserve(rows.size() * cols.size());
    for (auto r0 : rows) {
        for (auto c0 : cols) {
            Tensor3 occluded = input;
            for (std::size_t r = r0; r < r0 + patch_h; ++r) {
                for (std::size_t col = c0; col < c0 + patch_w; ++col) {
                    for (std::size_t ch = 0; ch < s.channels; ++ch) {
                        occluded(r, col, ch) = spec.baseline_value;
                    }
                }
            }
            scores.push_back(reference - logit(model, occluded, c));
        }
    }

    std::vector<double> total(s.pixels(), 0.0);
    std::vector<double> coverage(s.pixels(), 0.0);
    std::size_t k = 0;
    for (auto r0 : rows) {
        for (auto c0 : cols) {
            for (std::size_t r = r0; r < r0 + patch_h; ++r) {
                for (std::size_t col = c0; col < c0 + patch_w; ++col) {
                    total[r * s.width + col] += scores[k];
                    coverage[r * s.width + col] += 1.0;
                }
            }
            ++k;
        }
    }
    for (std::size_t p = 0; p < total.size(); ++p) {
        total[p] = coverage[p] > 0.0 ? total[p] / coverage[p] : 0.0;
    }
    return AttributionMap(s.height, s.width, std::move(total));
}

AttributionMap feature_ablation(const ToyModel& model, const Tensor3& input, ClassId c, const FeatureAblation& spec) {
    const auto& s = input.shape();
    const auto grid_rows = std::min(spec.grid_rows, s.height);
    const auto grid_cols = std::min(spec.grid_cols, s.width);
    const double reference = logit(model, input, c);
    std::vector<double> out(s.pixels(), 0.0);
    for (std::size_t gr = 0; gr < grid_rows; ++gr) {
        const auto r0 = gr * s.height / grid_rows;
        const auto r1 = (gr + 1) * s.height / grid_rows;
        for (std::size_t gc = 0; gc < grid_cols; ++gc) {
            const auto c0 = gc * s.width / grid_cols;
            const auto c1 = (gc + 1) * s.width / grid_cols;
            Tensor3 ablated = input;
            for (std::size_t r = r0; r < r1; ++r) {
                for (std::size_t col = c0; col < c1; ++col) {
                    for (std::size_t ch = 0; ch < s.channels; ++ch) {
                        ablated(r, col, ch) = spec.baseline_value;
                    }
                }
            }
            const double drop = reference - logit(model, ablated, c);
            for (std::size_t r = r0; r < r1; ++r) {
                for (std::size_t col = c0; col < c1; ++col) {
                    out[r * s.width + col] = drop;
                }
            }
        }
    }
    return AttributionMap(s.height, s.width, std::move(out));
}

}  // namespace

std::string method_name(const AttributionMethodSpec& spec) {
    return std::visit(overloaded{
                          [](const Gradient&) { return std::string("gradient"); },
                          [](const InputXGradient&) { return std::string("input_x_gradient"); },
                          [](const IntegratedGradients&) { return std::string("integrated_gradients"); },
                          [](const Occlusion&) { return std::string("occlusion"); },
                          [](const FeatureAblation&) { return std::string("feature_ablation"); },
                      },
                      spec);
}

void validate(const AttributionMethodSpec& spec) {
    std::visit(overloaded{
                   [](const Gradient&) {},
                   [](const InputXGradient&) {},
                   [](const IntegratedGradients& ig) {
                       if (ig.steps < 1) {
                           throw ConfigError("integrated gradients needs steps >= 1");
                       }
                   },
                   [](const Occlusion& o) {
                       if (o.patch < 1 || o.stride < 1) {
                           throw ConfigError("occlusion needs patch >= 1 and stride >= 1");
                       }
                   },
                   [](const FeatureAblation& f) {
                       if (f.grid_rows < 1 || f.grid_cols < 1) {
                           throw ConfigError("feature ablation needs a grid of at least 1x1");
                       }
                   },
               },
               spec);
}

std::vector<std::size_t> window_offsets(std::size_t extent, std::size_t patch, std::size_t stride) {
    if (patch >= extent) {
        return {0};
    }
    std::vector<std::size_t> offsets;
    for (std::size_t o = 0; o + patch <= extent; o += stride) {
        offsets.push_back(o);
    }
    if (offsets.back() + patch < extent) {
        offsets.push_back(extent - patch);
    }
    return offsets;
}

Tensor3 integrated_gradients_raw(const ToyModel& model, const Tensor3& input, ClassId class_id,
                                 const Tensor3& baseline, std::size_t steps) {
    if (steps < 1) {
        throw ConfigError("integrated gradients needs steps >= 1");
    }
    if (baseline.shape() != input.shape()) {
        throw InvalidInputError("integrated gradients baseline shape does not match the input");
    }
    const auto x = input.values();
    const auto x0 = baseline.values();
    const auto n = x.size();

    // Running mean of the path gradients; stays exact when the gradient is constant.
    std::vector<double> mean(n, 0.0);
    Tensor3 point(input.shape());
    for (std::size_t k = 0; k < steps; ++k) {
        const double alpha = (static_cast<double>(k) + 0.5) / static_cast<double>(steps);
        auto p = point.values();
        for (std::size_t i = 0; i < n; ++i) {
            p[i] = x0[i] + alpha * (x[i] - x0[i]);
        }
        const auto grad = logit_input_gradient(model, point, class_id);
        const auto g = grad.values();
        const double count = static_cast<double>(k + 1);
        for (std::size_t i = 0; i < n; ++i) {
            mean[i] += (g[i] - mean[i]) / count;
        }
    }
    for (std::size_t i = 0; i < n; ++i) {
        mean[i] *= x[i] - x0[i];
    }
    return Tensor3(input.shape(), std::move(mean));
}

std::pair<double, double> integrated_gradients_completeness(const ToyModel& model, const Tensor3& input,
                                                            ClassId class_id, const Tensor3& baseline,
                                                            std::size_t steps) {
    const auto raw = integrated_gradients_raw(model, input, class_id, baseline, steps);
    double total = 0.0;
    for (double v : raw.values()) {
        total += v;
    }
    return {total, logit(model, input, class_id) - logit(model, baseline, class_id)};
}

AttributionMap attribute(const ToyModel& model, const Tensor3& input, ClassId class_id,
                         const AttributionMethodSpec& spec) {
    validate(spec);
    if (input.shape() != input_shape(model)) {
        throw InvalidInputError("input shape does not match the model");
    }
    if (class_id >= num_classes(model)) {
        throw UnknownClassError("class " + std::to_string(class_id) + " out of range");
    }
    return std::visit(overloaded{
                          [&](const Gradient&) {
                              return channel_aggregate(logit_input_gradient(model, input, class_id));
                          },
                          [&](const InputXGradient&) {
                              return channel_aggregate(input_x_gradient_raw(model, input, class_id));
                          },
                          [&](const IntegratedGradients& ig) {
                              const Tensor3 zero(input.shape(), 0.0);
                              const Tensor3& baseline = ig.baseline ? *ig.baseline : zero;
                              return channel_aggregate(
                                  integrated_gradients_raw(model, input, class_id, baseline, ig.steps));
                          },
                          [&](const Occlusion& o) { return occlusion(model, input, class_id, o); },
                          [&](const FeatureAblation& f) { return feature_ablation(model, input, class_id, f); },
                      },
                      spec);
}

AttributionStack attribute_stack(const ToyModel& model, const Tensor3& input, std::span<const ClassId> class_ids,
                                 const AttributionMethodSpec& spec) {
    if (class_ids.size() < 2) {
        throw InvalidStackError("an attribution stack needs at least 2 classes");
    }
    std::vector<AttributionMap> maps;
    maps.reserve(class_ids.size());
    for (auto c : class_ids) {
        maps.push_back(attribute(model, input, c, spec));
    }
    return AttributionStack({class_ids.begin(), class_ids.end()}, std::move(maps));
}

}  // namespace alens
