#include "alens/class_select.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <string>

#include "alens/error.hpp"

namespace alens {

namespace {

template <class... Ts>
struct overloaded : Ts... {
    using Ts::operator()...;
};

// Indices sorted by descending logit; stable, so equal logits keep index order.
std::vector<ClassId> descending_order(std::span<const double> logits) {
    std::vector<ClassId> order(logits.size());
    std::iota(order.begin(), order.end(), ClassId{0});
    std::stable_sort(order.begin(), order.end(), [&](ClassId a, ClassId b) { return logits[a] > logits[b]; });
    return order;
}

ClassId argmin(std::span<const double> logits) {
    return static_cast<ClassId>(std::min_element(logits.begin(), logits.end()) - logits.begin());
}

ClassId argmax(std::span<const double> logits) {
    return static_cast<ClassId>(std::max_element(logits.begin(), logits.end()) - logits.begin());
}

}  // namespace

std::vector<ClassId> select_classes(std::span<const double> logits, const SelectionStrategy& strategy) {
    if (logits.size() < 2) {
        throw InvalidInputError("class selection needs at least 2 logits");
    }
    if (!std::all_of(logits.begin(), logits.end(), [](double v) { return std::isfinite(v); })) {
        throw InvalidInputError("class selection got non-finite logits");
    }

    auto result = std::visit(
        overloaded{
            [&](const Predefined& p) {
                auto sorted = p.ids;
                std::sort(sorted.begin(), sorted.end());
                if (std::adjacent_find(sorted.begin(), sorted.end()) != sorted.end()) {
                    throw ConfigError("predefined class set contains duplicates");
                }
                for (auto id : p.ids) {
                    if (id >= logits.size()) {
                        throw ConfigError("predefined class " + std::to_string(id) + " out of range for " +
                                          std::to_string(logits.size()) + " classes");
                    }
                }
                return p.ids;
            },
            [&](const TopK& t) {
                if (t.k == 0) {
                    throw ConfigError("top-k needs k >= 1");
                }
                auto order = descending_order(logits);
                order.resize(std::min(t.k, order.size()));
                if (t.include_lowest) {
                    const auto lowest = argmin(logits);
                    if (std::find(order.begin(), order.end(), lowest) == order.end()) {
                        order.push_back(lowest);
                    }
                }
                return order;
            },
            [&](const BestVsWorst&) {
                const auto best = argmax(logits);
                const auto worst = argmin(logits);
                return best == worst ? std::vector<ClassId>{best} : std::vector<ClassId>{best, worst};
            },
        },
        strategy);

    if (result.size() < 2) {
        throw SelectionError("class selection produced " + std::to_string(result.size()) +
                             " distinct class(es); at least 2 are required");
    }
    return result;
}

}  // namespace alens
