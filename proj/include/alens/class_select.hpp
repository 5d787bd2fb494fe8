#pragma once

#include <span>
#include <variant>
#include <vector>

#include "alens/maps.hpp"

namespace alens {

struct Predefined {
    std::vector<ClassId> ids;
};

struct TopK {
    std::size_t k = 2;
    /// Also append the single lowest-scoring class when it is not already selected.
    bool include_lowest = false;
};

struct BestVsWorst {};

using SelectionStrategy = std::variant<Predefined, TopK, BestVsWorst>;

/**
 * Choose the competing class set from a logit vector.
 *
 * Ties are broken by the lowest class index, both for the top-k order and for
 * argmax/argmin. The order of the result is cosmetic for the lens, which is
 * permutation-equivariant.
 */
std::vector<ClassId> select_classes(std::span<const double> logits, const SelectionStrategy& strategy);

}  // namespace alens
