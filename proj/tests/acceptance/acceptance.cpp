// Acceptance suite: one PASS/FAIL line per criterion. Exit status is the
// number of failed criteria.

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iterator>
#include <numeric>
#include <random>
#include <sstream>
#include <string>
#include <unistd.h>
#include <vector>

#include "alens/attributors.hpp"
#include "alens/cli.hpp"
#include "alens/dataset.hpp"
#include "alens/experiments.hpp"
#include "alens/lens.hpp"
#include "alens/metrics.hpp"
#include "alens/model.hpp"

namespace fs = std::filesystem;
using namespace alens;

namespace {

struct Outcome {
    bool pass = false;
    std::string detail;
};

std::string fmt(const char* pattern, double a, double b = 0.0, double c = 0.0) {
    char buf[256];
    std::snprintf(buf, sizeof(buf), pattern, a, b, c);
    return buf;
}

AttributionStack random_stack(std::mt19937_64& rng, std::size_t classes, std::size_t h, std::size_t w,
                              double scale = 3.0) {
    std::uniform_real_distribution<double> u(-scale, scale);
    std::vector<ClassId> ids(classes);
    std::iota(ids.begin(), ids.end(), ClassId{0});
    std::vector<AttributionMap> maps;
    for (std::size_t c = 0; c < classes; ++c) {
        std::vector<double> v(h * w);
        for (auto& x : v) x = u(rng);
        maps.emplace_back(h, w, std::move(v));
    }
    return AttributionStack(ids, std::move(maps));
}

Tensor3 random_image(std::mt19937_64& rng, Shape shape) {
    std::uniform_real_distribution<double> u(0.0, 1.0);
    Tensor3 t(shape);
    for (auto& x : t.values()) x = u(rng);
    return t;
}

double inf_norm(const Tensor3& t) {
    double m = 0.0;
    for (double v : t.values()) m = std::max(m, std::abs(v));
    return m;
}

// ------------------------------------------------------------------ criteria

Outcome discount_identity() {
    std::mt19937_64 rng(101);
    const LensConfig lens;
    double worst = 0.0;
    for (int trial = 0; trial < 1000; ++trial) {
        const auto stack = random_stack(rng, 3, 8, 8);
        const auto dist = averaged_distribution(stack, lens);
        const ClassId target = static_cast<ClassId>(trial % 3);
        const auto d = discount_form(stack, target, dist);
        const auto& a = stack.map(stack.slot_of(target));
        const auto& wt = dist.weights(dist.slot_of(target));
        for (std::size_t p = 0; p < a.size(); ++p) {
            worst = std::max(worst, std::abs(d[p] - a[p] * wt[p]));
        }
    }
    return {worst <= 1e-12, fmt("max |discount - A*W| = %.3g over 1000 stacks", worst)};
}

Outcome distribution_law() {
    std::mt19937_64 rng(202);
    double worst = 0.0;
    for (int trial = 0; trial < 1000; ++trial) {
        const auto stack = random_stack(rng, 2 + trial % 5, 8, 8, 1.0 + trial % 7);
        std::vector<ClassDistributionStack> dists;
        for (double s : {1.0, 5.0, 100.0}) dists.push_back(pixel_softmax(stack, s));
        dists.push_back(averaged_distribution(stack, LensConfig{}));
        for (const auto& d : dists) {
            for (std::size_t p = 0; p < d.height() * d.width(); ++p) {
                double sum = 0.0;
                for (std::size_t k = 0; k < d.size(); ++k) sum += d.weights(k)[p];
                worst = std::max(worst, std::abs(sum - 1.0));
            }
        }
    }
    return {worst <= 1e-9, fmt("max |sum W - 1| = %.3g over 1000 stacks x 4 distributions", worst)};
}

Outcome mask_semantics() {
    std::mt19937_64 rng(303);
    bool zero_ok = true, half_ok = true;
    for (int trial = 0; trial < 50; ++trial) {
        const auto base = random_stack(rng, 2, 8, 8).map(0);
        const AttributionStack stack({4, 9}, {base, base});
        for (ClassId target : {ClassId{4}, ClassId{9}}) {
            const auto masked = refine(stack, target);
            for (double v : masked.values()) zero_ok = zero_ok && v == 0.0;
            LensConfig off;
            off.mask_enabled = false;
            const auto unmasked = refine(stack, target, off);
            for (std::size_t p = 0; p < base.size(); ++p) half_ok = half_ok && unmasked[p] == base[p] / 2.0;
        }
    }
    return {zero_ok && half_ok, std::string("masked all-zero: ") + (zero_ok ? "yes" : "no") +
                                    ", unmasked == A/2 exactly: " + (half_ok ? "yes" : "no")};
}

Outcome probability_gradient() {
    const Shape shape{32, 32, 1};
    const double h = 1e-5;
    double worst = 0.0;
    for (std::uint64_t seed = 0; seed < 100; ++seed) {
        const ToyModel model = make_random_mlp(shape, 16, 5, 1000 + seed);
        std::mt19937_64 rng(seed);
        const auto x = random_image(rng, shape);
        const ClassId c = seed % 5;
        const auto g = softmax_prob_gradient(model, x, c);
        double diff = 0.0, norm = 0.0;
        Tensor3 probe = x;
        for (std::size_t i = 0; i < shape.size(); ++i) {
            const double orig = probe.values()[i];
            probe.values()[i] = orig + h;
            const double up = predict_probs(model, probe)[c];
            probe.values()[i] = orig - h;
            const double down = predict_probs(model, probe)[c];
            probe.values()[i] = orig;
            const double fd = (up - down) / (2.0 * h);
            diff += (g.values()[i] - fd) * (g.values()[i] - fd);
            norm += fd * fd;
        }
        worst = std::max(worst, std::sqrt(diff) / std::max(std::sqrt(norm), 1e-300));
    }
    return {worst < 1e-4, fmt("max relative L2 error vs central differences = %.3g over 100 MLPs", worst)};
}

// Random He-initialized MLPs whose output layer is rescaled so the top-2
// logit margin is uniform in [1, 5]: confident, yet small enough that
// exp(-100 * margin) stays representable in double precision.
Outcome saturation() {
    const Shape shape{32, 32, 1};
    std::mt19937_64 margin_rng(55);
    std::uniform_real_distribution<double> margin_dist(1.0, 5.0);
    int ok = 0, total = 0;
    for (std::uint64_t seed = 0; seed < 50; ++seed) {
        auto base = make_random_mlp(shape, 16, 5, 5000 + seed);
        std::mt19937_64 rng(seed + 77);
        const auto x = random_image(rng, shape);
        auto logits = forward_logits(base, x);
        std::sort(logits.begin(), logits.end(), std::greater<>());
        const double rescale = margin_dist(margin_rng) / (logits[0] - logits[1]);
        for (auto& w : base.mutable_output_weights()) w *= rescale;
        for (auto& b : base.mutable_output_biases()) b *= rescale;
        logits = forward_logits(base, x);
        const auto top = static_cast<ClassId>(std::max_element(logits.begin(), logits.end()) - logits.begin());
        if (std::count(logits.begin(), logits.end(), logits[top]) != 1) continue;
        ++total;
        std::vector<double> norms;
        for (double lambda : {1.0, 10.0, 100.0}) {
            auto scaled = base;
            for (auto& w : scaled.mutable_output_weights()) w *= lambda;
            for (auto& b : scaled.mutable_output_biases()) b *= lambda;
            norms.push_back(inf_norm(softmax_prob_gradient(ToyModel(scaled), x, top)));
        }
        if (norms[0] > norms[1] && norms[1] > norms[2]) ++ok;
    }
    return {total == 50 && ok == 50, fmt("strictly decreasing on %.0f/%.0f instances", ok, total)};
}

// Gate: the quadrant MLPs of the grid benchmark, every quadrant target.
// Random He MLPs are reported alongside; their logit delta can be near zero,
// where the kink error of a piecewise-constant integrand dominates.
Outcome ig_completeness() {
    DatasetSpec spec;
    spec.seed = 41;
    const auto data = generate_dataset(spec, 25);
    double worst_mlp = 0.0;
    for (auto mode : {QuadrantMode::Disjoint, QuadrantMode::Overlapping}) {
        const ToyModel mlp = make_quadrant_mlp(data.templates, mode);
        for (const auto& sample : data.samples) {
            const Tensor3 zero(sample.image.shape());
            for (auto c : sample.classes) {
                const auto [sum, delta] = integrated_gradients_completeness(mlp, sample.image.tensor(), c, zero, 128);
                worst_mlp = std::max(worst_mlp, std::abs(sum - delta) / std::abs(delta));
            }
        }
    }

    const Shape shape{32, 32, 1};
    double worst_linear = 0.0, worst_random = 0.0, worst_random_abs = 0.0;
    for (std::uint64_t seed = 0; seed < 20; ++seed) {
        std::mt19937_64 rng(seed + 900);
        const auto x = random_image(rng, shape);
        const Tensor3 zero(shape);
        const ToyModel mlp = make_random_mlp(shape, 32, 5, 9000 + seed);
        const auto logits = forward_logits(mlp, x);
        const auto c = static_cast<ClassId>(std::max_element(logits.begin(), logits.end()) - logits.begin());
        const auto [sum, delta] = integrated_gradients_completeness(mlp, x, c, zero, 128);
        worst_random = std::max(worst_random, std::abs(sum - delta) / std::abs(delta));
        worst_random_abs = std::max(worst_random_abs, std::abs(sum - delta));

        const ToyModel linear = make_random_linear(shape, 5, 9100 + seed);
        for (std::size_t steps : {1, 2, 7, 32, 128}) {
            const auto [ls, ld] = integrated_gradients_completeness(linear, x, seed % 5, zero, steps);
            worst_linear = std::max(worst_linear, std::abs(ls - ld));
        }
    }
    return {worst_mlp <= 0.01 && worst_linear <= 1e-12,
            fmt("quadrant MLPs max relative gap %.3g at 128 steps; linear max abs gap %.3g", worst_mlp,
                worst_linear) +
                fmt("; random MLPs (info) max relative %.3g, max abs %.3g", worst_random, worst_random_abs)};
}

DatasetSpec grid_spec(std::uint64_t seed) {
    DatasetSpec spec;
    spec.seed = seed;
    return spec;
}

Outcome disjoint_localization() {
    const auto data = generate_dataset(grid_spec(11), 25);
    const ToyModel model = make_quadrant_model(data.templates, QuadrantMode::Disjoint);
    LocalizationOptions sharp;
    sharp.blur.enabled = false;
    const auto raw = localization_experiment(model, data.samples, InputXGradient{}, LensConfig{}, sharp);
    const auto blurred = localization_experiment(model, data.samples, InputXGradient{}, LensConfig{}, {});
    double worst = 0.0, min_blur = 1.0;
    for (const auto& r : raw) worst = std::max(worst, std::abs(r.vanilla.ra - 1.0));
    for (const auto& r : blurred) min_blur = std::min(min_blur, r.vanilla.ra);
    return {worst <= 1e-9 && min_blur >= 0.9,
            fmt("no blur: max |RA - 1| = %.3g; blur: min RA = %.4f over 100 quadrants", worst, min_blur)};
}

Outcome overlapping_localization() {
    const auto data = generate_dataset(grid_spec(12), 100);
    const ToyModel model = make_quadrant_model(data.templates, QuadrantMode::Overlapping);
    const auto rows = localization_experiment(model, data.samples, InputXGradient{}, LensConfig{}, {});
    struct Tally {
        int wins = 0;
        double gain = 0.0;
    } ra, iou, f1;
    for (std::size_t s = 0; s < data.samples.size(); ++s) {
        double v[3] = {}, r[3] = {};
        for (std::size_t q = 0; q < kQuadrants; ++q) {
            const auto& row = rows[s * kQuadrants + q];
            v[0] += row.vanilla.ra, r[0] += row.refined.ra;
            v[1] += row.vanilla.iou, r[1] += row.refined.iou;
            v[2] += row.vanilla.f1, r[2] += row.refined.f1;
        }
        Tally* t[3] = {&ra, &iou, &f1};
        for (int k = 0; k < 3; ++k) {
            t[k]->wins += r[k] > v[k];
            t[k]->gain += (r[k] - v[k]) / (4.0 * 100.0);
        }
    }
    const bool pass = ra.wins >= 90 && iou.wins >= 90 && f1.wins >= 90 && ra.gain > 0 && iou.gain > 0 && f1.gain > 0;
    std::ostringstream os;
    os << "samples improved RA/IoU/F1 = " << ra.wins << "/" << iou.wins << "/" << f1.wins << " of 100; mean gain "
       << fmt("%.3f/%.3f/%.3f", ra.gain, iou.gain, f1.gain);
    return {pass, os.str()};
}

// Independent insertion oracle: every tick rebuilds its image from scratch.
double insertion_oracle(const ToyModel& model, const ImageSample& image, const AttributionMap& map, ClassId target,
                        std::size_t steps) {
    const auto blurred = gaussian_blur(image.tensor(), 11, 5.0);
    const std::size_t n = map.size();
    std::vector<std::pair<double, std::size_t>> keyed;
    for (std::size_t p = 0; p < n; ++p) keyed.emplace_back(map[p], p);
    std::vector<std::size_t> order;
    std::vector<bool> used(n, false);
    for (std::size_t k = 0; k < n; ++k) {
        std::size_t best = n;
        for (std::size_t p = 0; p < n; ++p) {
            if (!used[p] && (best == n || map[p] > map[best])) best = p;
        }
        used[best] = true;
        order.push_back(best);
    }
    std::vector<double> scores;
    for (std::size_t k = 0; k <= steps; ++k) {
        const std::size_t revealed = k * n / steps;
        Tensor3 current = blurred;
        for (std::size_t i = 0; i < revealed; ++i) {
            const auto p = order[i];
            for (std::size_t ch = 0; ch < image.channels(); ++ch) {
                current(p / map.width(), p % map.width(), ch) = image(p / map.width(), p % map.width(), ch);
            }
        }
        scores.push_back(predict_probs(model, current)[target]);
    }
    double auc = 0.0;
    for (std::size_t k = 0; k < steps; ++k) auc += 0.5 * (scores[k] + scores[k + 1]) / static_cast<double>(steps);
    return auc;
}

Outcome insertion_oracle_check() {
    DatasetSpec spec;
    spec.image_size = 8;
    spec.classes = 4;
    spec.margin = 1;
    spec.seed = 21;
    const auto data = generate_dataset(spec, 10);
    const ToyModel model = make_quadrant_model(data.templates, QuadrantMode::Disjoint);
    std::mt19937_64 rng(2121);
    double worst_oracle = 0.0, worst_transform = 0.0;
    for (const auto& sample : data.samples) {
        for (std::size_t q = 0; q < kQuadrants; ++q) {
            const auto target = sample.classes[q];
            const auto map = attribute(model, sample.image.tensor(), target, InputXGradient{});
            for (std::size_t steps : {8, 64}) {
                const auto auc = insertion_curve(model, sample.image, map, target, {steps, 11, 5.0}).auc;
                worst_oracle = std::max(worst_oracle, std::abs(auc - insertion_oracle(model, sample.image, map,
                                                                                       target, steps)));
            }
            const auto reference = insertion_curve(model, sample.image, map, target).auc;
            std::uniform_real_distribution<double> a(0.5, 3.0), b(-2.0, 2.0);
            for (int t = 0; t < 10; ++t) {
                const double sa = a(rng), sb = b(rng);
                std::vector<double> v(map.values().begin(), map.values().end());
                for (auto& x : v) {
                    switch (t % 5) {
                        case 0: x = sa * x + sb; break;
                        case 1: x = std::exp(sa * x); break;
                        case 2: x = x + sa * x * x * x; break;
                        case 3: x = std::atan(sa * x); break;
                        default: x = std::sinh(sa * x) + sb; break;
                    }
                }
                const AttributionMap transformed(map.height(), map.width(), std::move(v));
                const auto auc = insertion_curve(model, sample.image, transformed, target).auc;
                worst_transform = std::max(worst_transform, std::abs(auc - reference));
            }
        }
    }
    return {worst_oracle <= 1e-9 && worst_transform <= 1e-12,
            fmt("max |AUC - oracle| = %.3g; max AUC shift under monotone transforms = %.3g", worst_oracle,
                worst_transform)};
}

std::string slurp(const fs::path& p) {
    std::ifstream in(p, std::ios::binary);
    return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

Outcome randomization() {
    const auto data = generate_dataset(grid_spec(31), 8);
    std::vector<ImageSample> images;
    for (const auto& s : data.samples) images.push_back(s.image);
    double worst = 0.0;
    for (int arch = 0; arch < 2; ++arch) {
        const ToyModel model = arch == 0 ? ToyModel(make_quadrant_model(data.templates, QuadrantMode::Overlapping))
                                         : ToyModel(make_quadrant_mlp(data.templates, QuadrantMode::Overlapping));
        RandomizationSpec spec;
        spec.methods = {Gradient{}, InputXGradient{}, IntegratedGradients{}, Occlusion{}, FeatureAblation{}};
        spec.fractions = {0.0};
        spec.seeds = 3;
        for (bool absolute : {true, false}) {
            spec.similarity.absolute = absolute;
            for (const auto& row : randomization_experiment(model, images, spec).rows) {
                worst = std::max({worst, std::abs(row.report.pearson - 1.0), std::abs(row.report.spearman - 1.0),
                                  std::abs(row.report.cosine - 1.0)});
            }
        }
    }

    const auto root = fs::temp_directory_path() / ("alens-acceptance-" + std::to_string(::getpid()));
    std::ostringstream sink;
    bool ran = true;
    for (const char* run : {"a", "b"}) {
        ran = ran && cli::run({"sanity", "--seed", "7", "--out", (root / run).string()}, sink, sink) == 0;
    }
    const auto first = slurp(root / "a" / "sanity.csv");
    const bool identical = ran && !first.empty() && first == slurp(root / "b" / "sanity.csv");
    const auto lines = std::count(first.begin(), first.end(), '\n');
    fs::remove_all(root);
    return {worst <= 1e-9 && identical,
            fmt("fraction 0: max |sim - 1| = %.3g; 64-seed report rows = %.0f, rerun byte-identical: ", worst,
                static_cast<double>(lines - 1)) +
                (identical ? "yes" : "no")};
}

Outcome permutation_equivariance() {
    std::mt19937_64 rng(404);
    const auto stack = random_stack(rng, 6, 16, 16);
    bool identical = true;
    for (int trial = 0; trial < 100; ++trial) {
        std::vector<std::size_t> perm(stack.size());
        std::iota(perm.begin(), perm.end(), std::size_t{0});
        std::shuffle(perm.begin(), perm.end(), rng);
        std::vector<ClassId> ids;
        std::vector<AttributionMap> maps;
        for (auto s : perm) {
            ids.push_back(stack.class_ids()[s]);
            maps.push_back(stack.map(s));
        }
        const AttributionStack shuffled(ids, maps);
        for (ClassId target : stack.class_ids()) {
            identical = identical && refine(stack, target) == refine(shuffled, target);
        }
    }
    return {identical, std::string("100 permutations x 6 targets bit-identical: ") + (identical ? "yes" : "no")};
}

struct Criterion {
    int id;
    const char* name;
    double budget_seconds;
    std::function<Outcome()> check;
};

}  // namespace

int main() {
    const std::vector<Criterion> criteria = {
        {1, "discount identity", 1.0, discount_identity},
        {2, "distribution sums to one", 0.0, distribution_law},
        {3, "chance-mask semantics", 0.0, mask_semantics},
        {4, "probability gradient vs finite differences", 0.0, probability_gradient},
        {5, "softmax saturation", 0.0, saturation},
        {6, "integrated gradients completeness", 0.0, ig_completeness},
        {7, "grid pointing, disjoint mode", 0.0, disjoint_localization},
        {8, "grid pointing, overlapping mode", 30.0, overlapping_localization},
        {9, "insertion oracle and monotone invariance", 0.0, insertion_oracle_check},
        {10, "cascading randomization", 60.0, randomization},
        {11, "permutation equivariance", 0.0, permutation_equivariance},
    };
    int failed = 0;
    for (const auto& c : criteria) {
        const auto start = std::chrono::steady_clock::now();
        Outcome o;
        try {
            o = c.check();
        } catch (const std::exception& e) {
            o = {false, std::string("exception: ") + e.what()};
        }
        const double seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
        const bool in_budget = c.budget_seconds <= 0.0 || seconds < c.budget_seconds;
        const bool pass = o.pass && in_budget;
        failed += !pass;
        std::printf("[%s] %2d %-45s %s (%.2fs%s)\n", pass ? "PASS" : "FAIL", c.id, c.name, o.detail.c_str(), seconds,
                    in_budget ? "" : ", over budget");
    }
    std::printf("%d/%zu criteria passed\n", static_cast<int>(criteria.size()) - failed, criteria.size());
    return failed;
}
