#include <doctest.h>

#include "alens/dataset.hpp"
#include "alens/error.hpp"

using namespace alens;

TEST_CASE("template supports are disjoint and inside the margin") {
    DatasetSpec spec;
    const auto bank = make_templates(spec);
    REQUIRE(bank.classes() == spec.classes);
    CHECK(bank.patch == Shape{16, 16, 1});
    std::vector<int> owners(bank.patch.pixels(), 0);
    for (const auto& t : bank.patterns) {
        bool any = false;
        for (std::size_t r = 0; r < 16; ++r) {
            for (std::size_t c = 0; c < 16; ++c) {
                const double v = t(r, c, 0);
                if (v == 0.0) continue;
                any = true;
                CHECK(v >= 0.5);
                CHECK(v <= 1.0);
                CHECK(r >= spec.margin);
                CHECK(r < 16 - spec.margin);
                CHECK(c >= spec.margin);
                CHECK(c < 16 - spec.margin);
                owners[r * 16 + c] += 1;
            }
        }
        CHECK(any);
    }
    for (int o : owners) CHECK(o <= 1);
}

TEST_CASE("quadrant regions partition the image") {
    const auto regions = quadrant_regions(8, 6);
    for (std::size_t p = 0; p < 48; ++p) {
        int n = 0;
        for (const auto& r : regions) n += r[p];
        CHECK(n == 1);
    }
    CHECK(regions[0](0, 0));
    CHECK(regions[1](0, 5));
    CHECK(regions[2](7, 0));
    CHECK(regions[3](7, 5));
}

TEST_CASE("samples are deterministic, distinct per quadrant and noise stays on the foreground") {
    DatasetSpec spec;
    spec.seed = 3;
    const auto a = generate_dataset(spec, 5);
    const auto b = generate_dataset(spec, 5);
    for (std::size_t i = 0; i < 5; ++i) {
        const auto& s = a.samples[i];
        CHECK(std::equal(s.image.tensor().values().begin(), s.image.tensor().values().end(),
                         b.samples[i].image.tensor().values().begin()));
        CHECK(s.classes == b.samples[i].classes);
        for (std::size_t q = 0; q < kQuadrants; ++q)
            for (std::size_t k = q + 1; k < kQuadrants; ++k) CHECK(s.classes[q] != s.classes[k]);
        for (std::size_t q = 0; q < kQuadrants; ++q) {
            const auto& t = a.templates.patterns[s.classes[q]];
            const std::size_t r0 = q / 2 * 16, c0 = q % 2 * 16;
            for (std::size_t r = 0; r < 16; ++r)
                for (std::size_t c = 0; c < 16; ++c)
                    if (t(r, c, 0) == 0.0) CHECK(s.image(r0 + r, c0 + c, 0) == 0.0);
        }
    }
    spec.seed = 4;
    const auto c = generate_dataset(spec, 1);
    CHECK_FALSE(std::equal(c.samples[0].image.tensor().values().begin(), c.samples[0].image.tensor().values().end(),
                           a.samples[0].image.tensor().values().begin()));
}

TEST_CASE("disjoint model logits only see their own pattern") {
    const auto data = generate_dataset(DatasetSpec{}, 2);
    const ToyModel model = make_quadrant_model(data.templates, QuadrantMode::Disjoint);
    const auto& s = data.samples[0];
    const auto z = forward_logits(model, s.image.tensor());
    for (ClassId c = 0; c < z.size(); ++c) {
        const bool present = std::find(s.classes.begin(), s.classes.end(), c) != s.classes.end();
        CHECK((z[c] > 0.0) == present);
    }
    const auto mlp = make_quadrant_mlp(data.templates, QuadrantMode::Overlapping);
    CHECK(mlp.hidden_size() == 4 * data.templates.classes());
}

TEST_CASE("dataset spec validation") {
    DatasetSpec odd;
    odd.image_size = 31;
    CHECK_THROWS_AS(odd.validate(), ConfigError);
    DatasetSpec few;
    few.classes = 3;
    CHECK_THROWS_AS(few.validate(), ConfigError);
    DatasetSpec crowded;
    crowded.image_size = 8;
    crowded.margin = 1;
    crowded.classes = 5;
    CHECK_THROWS_AS(crowded.validate(), ConfigError);
}
