#include <doctest.h>

#include <algorithm>
#include <random>

#include "alens/error.hpp"
#include "alens/dataset.hpp"
#include "alens/metrics.hpp"

using namespace alens;

namespace {

AttributionMap random_map(std::mt19937_64& rng, std::size_t h, std::size_t w) {
    std::normal_distribution<double> n(0.0, 1.0);
    std::vector<double> v(h * w);
    for (auto& x : v) x = n(rng);
    return AttributionMap(h, w, v);
}

double pearson(const std::vector<double>& a, const std::vector<double>& b) {
    const double n = static_cast<double>(a.size());
    double ma = 0, mb = 0;
    for (std::size_t i = 0; i < a.size(); ++i) ma += a[i] / n, mb += b[i] / n;
    double s = 0, sa = 0, sb = 0;
    for (std::size_t i = 0; i < a.size(); ++i) {
        s += (a[i] - ma) * (b[i] - mb);
        sa += (a[i] - ma) * (a[i] - ma);
        sb += (b[i] - mb) * (b[i] - mb);
    }
    return s / std::sqrt(sa * sb);
}

}  // namespace

TEST_CASE("region attribution and binarized overlap without blur") {
    const AttributionMap m(2, 4, std::vector<double>{3, 1, -2, 0, 0, 2, 0, 2});
    const auto region = RegionMask::rectangle(2, 4, 0, 2, 0, 2);
    LocalizationOptions o;
    o.blur.enabled = false;
    const auto r = localization_eval(m, region, o);
    CHECK(r.ra == doctest::Approx(6.0 / 8.0));
    // Top-4 positives: 3 (in), 2 (in), 2 (out), 1 (in).
    CHECK(r.precision == doctest::Approx(3.0 / 4.0));
    CHECK(r.recall == doctest::Approx(3.0 / 4.0));
    CHECK(r.iou == doctest::Approx(3.0 / 5.0));
    CHECK(r.f1 == doctest::Approx(0.75));

    o.binarization = Binarization::Threshold;
    o.threshold = 0.5;
    const auto t = localization_eval(m, region, o);
    CHECK(t.precision == doctest::Approx(2.0 / 3.0));
    CHECK(t.recall == doctest::Approx(2.0 / 4.0));

    const AttributionMap negative(2, 4, -1.0);
    const auto z = localization_eval(negative, region, o);
    CHECK(z.ra == 0.0);
    CHECK(z.f1 == 0.0);
    CHECK_THROWS_AS(localization_eval(m, RegionMask(2, 4), o), MetricError);
    CHECK_THROWS(localization_eval(m, RegionMask(3, 4, true), o));
}

TEST_CASE("ranking breaks ties row-major and matches brute force") {
    const AttributionMap m(2, 3, std::vector<double>{1, 5, 1, 5, 0, 1});
    CHECK(rank_pixels(m) == std::vector<std::size_t>{1, 3, 0, 2, 5, 4});
    std::mt19937_64 rng(2);
    std::uniform_int_distribution<int> small(0, 4);
    for (int trial = 0; trial < 50; ++trial) {
        std::vector<double> v(30);
        for (auto& x : v) x = small(rng);
        const AttributionMap r(5, 6, v);
        const auto order = rank_pixels(r);
        for (std::size_t i = 0; i + 1 < order.size(); ++i) {
            const bool ok = v[order[i]] > v[order[i + 1]] || (v[order[i]] == v[order[i + 1]] && order[i] < order[i + 1]);
            CHECK(ok);
        }
    }
}

TEST_CASE("average ranks and spearman") {
    const std::vector<double> v{10, 20, 20, 5};
    CHECK(average_ranks(v) == std::vector<double>{2, 3.5, 3.5, 1});
    std::mt19937_64 rng(3);
    const auto a = random_map(rng, 6, 6), b = random_map(rng, 6, 6);
    SimilarityOptions signed_values{false};
    const auto rep = similarity(a, b, signed_values);
    std::vector<double> va(a.values().begin(), a.values().end()), vb(b.values().begin(), b.values().end());
    CHECK(rep.pearson == doctest::Approx(pearson(va, vb)).epsilon(1e-12));
    CHECK(rep.spearman == doctest::Approx(pearson(average_ranks(va), average_ranks(vb))).epsilon(1e-12));
    double dot = 0, na = 0, nb = 0;
    for (std::size_t i = 0; i < va.size(); ++i) dot += va[i] * vb[i], na += va[i] * va[i], nb += vb[i] * vb[i];
    CHECK(rep.cosine == doctest::Approx(dot / std::sqrt(na * nb)).epsilon(1e-12));

    const auto self = similarity(a, a);
    CHECK(self.pearson == doctest::Approx(1.0));
    CHECK(self.spearman == doctest::Approx(1.0));

    std::vector<double> neg(va);
    for (auto& x : neg) x = -x;
    const AttributionMap an(6, 6, neg);
    CHECK(similarity(a, an).pearson == doctest::Approx(1.0));
    CHECK(similarity(a, an, signed_values).pearson == doctest::Approx(-1.0));
}

TEST_CASE("degenerate similarity inputs are flagged") {
    const AttributionMap flat(3, 3, 2.0), zero(3, 3, 0.0);
    std::mt19937_64 rng(4);
    const auto m = random_map(rng, 3, 3);
    const auto r = similarity(flat, m);
    CHECK(r.pearson_degenerate);
    CHECK(r.spearman_degenerate);
    CHECK_FALSE(r.cosine_degenerate);
    CHECK(similarity(zero, m).cosine_degenerate);
}

TEST_CASE("trapezoid AUC and tick schedule") {
    CHECK(trapezoid_auc({0, 1}, {0.2, 0.6}) == doctest::Approx(0.4));
    CHECK(trapezoid_auc({0, 0.5, 1}, {1, 1, 1}) == doctest::Approx(1.0));
    CHECK(trapezoid_auc({0, 0.5, 1}, {0, 0, 0}) == 0.0);
    CHECK(pixels_at_tick(0, 64, 1024) == 0);
    CHECK(pixels_at_tick(64, 64, 1024) == 1024);
    CHECK(pixels_at_tick(1, 3, 10) == 3);
    CHECK(pixels_at_tick(2, 3, 10) == 6);
}

TEST_CASE("insertion and deletion endpoints") {
    const Shape shape{6, 6, 1};
    std::mt19937_64 rng(5);
    std::uniform_real_distribution<double> u(0, 1);
    std::vector<double> px(36);
    for (auto& x : px) x = u(rng);
    const ImageSample image(shape, px);
    const ToyModel model = make_random_linear(shape, 3, 2);
    const auto map = random_map(rng, 6, 6);
    const auto full = predict_probs(model, image.tensor())[1];

    const auto ins = insertion_curve(model, image, map, 1, {12, 11, 5.0});
    REQUIRE(ins.scores.size() == 13);
    const auto blurred = gaussian_blur(image.tensor(), 11, 5.0);
    CHECK(ins.scores.front() == doctest::Approx(predict_probs(model, blurred)[1]).epsilon(1e-15));
    CHECK(ins.scores.back() == doctest::Approx(full).epsilon(1e-15));

    const auto del = deletion_curve(model, image, map, 1, {12, std::nullopt});
    CHECK(del.scores.front() == doctest::Approx(full).epsilon(1e-15));
    double mean = 0;
    for (double x : px) mean += x / 36.0;
    CHECK(del.scores.back() == doctest::Approx(predict_probs(model, Tensor3(shape, mean))[1]).epsilon(1e-12));
    const auto del0 = deletion_curve(model, image, map, 1, {12, 0.0});
    CHECK(del0.scores.back() == doctest::Approx(predict_probs(model, Tensor3(shape, 0.0))[1]).epsilon(1e-15));

    const auto one = insertion_curve(model, image, map, 1, {1, 11, 5.0});
    CHECK(one.auc == doctest::Approx((one.scores[0] + one.scores[1]) / 2));
    CHECK_THROWS(insertion_curve(model, image, map, 7, {}));
    CHECK_THROWS(insertion_curve(model, image, AttributionMap(5, 6), 1, {}));
}

TEST_CASE("curves on a disjoint linear model follow the class support") {
    DatasetSpec spec;
    spec.image_size = 8;
    spec.classes = 4;
    spec.margin = 1;
    spec.seed = 6;
    const auto data = generate_dataset(spec, 4);
    const auto linear = make_quadrant_model(data.templates, QuadrantMode::Disjoint);
    const ToyModel model = linear;
    for (const auto& sample : data.samples) {
        for (auto c : sample.classes) {
            const auto w = linear.class_weights(c);
            std::vector<double> support(64, 0.0);
            std::size_t size = 0;
            for (std::size_t p = 0; p < 64; ++p) {
                if (w[p] != 0.0) {
                    support[p] = 1.0;
                    ++size;
                }
            }
            REQUIRE(size > 0);
            const AttributionMap map(8, 8, support);

            // Once the support is revealed the target logit is final; the
            // probability may still move through competitor logits.
            const auto ins = insertion_curve(model, sample.image, map, c, {64, 11, 5.0});
            Tensor3 revealed = gaussian_blur(sample.image.tensor(), 11, 5.0);
            for (std::size_t p = 0; p < 64; ++p)
                if (support[p] != 0.0) revealed.values()[p] = sample.image.tensor().values()[p];
            CHECK(ins.scores[size] == doctest::Approx(predict_probs(model, revealed)[c]).epsilon(1e-15));
            const double full = forward_logits(model, sample.image.tensor())[c];
            double zc = linear.biases()[c];
            for (std::size_t p = 0; p < 64; ++p) zc += w[p] * revealed.values()[p];
            CHECK(zc == doctest::Approx(full).epsilon(1e-14));

            const auto del = deletion_curve(model, sample.image, map, c, {64, 0.0});
            Tensor3 cleared = sample.image.tensor();
            for (std::size_t p = 0; p < 64; ++p)
                if (support[p] != 0.0) cleared.values()[p] = 0.0;
            const auto z = forward_logits(model, cleared);
            CHECK(z[c] == linear.biases()[c]);
            CHECK(del.scores[size] == doctest::Approx(softmax(z)[c]).epsilon(1e-15));
        }
    }
}
