#pragma once

// Reference data of the blood domain: ABO/Rh groups, products, transfusion
// compatibility, rarity scores, shelf lives and the population distribution.

#include "bloodflow/error.hpp"
#include "bloodflow/random.hpp"

#include <array>
#include <bit>
#include <cstdint>
#include <string>
#include <string_view>
#include <vector>

namespace bloodflow {

// Enumerators are declared in canonical order: descending population share.
// That order drives CDF sampling, serialization and deterministic tie-breaks.
enum class BloodType : std::uint8_t { OPos, APos, BPos, ONeg, ANeg, ABPos, BNeg, ABNeg };

enum class Component : std::uint8_t { RBC, PLAS, PLAT, WB };

inline constexpr std::array<BloodType, 8> kAllBloodTypes{
    BloodType::OPos, BloodType::APos, BloodType::BPos,  BloodType::ONeg,
    BloodType::ANeg, BloodType::ABPos, BloodType::BNeg, BloodType::ABNeg};

inline constexpr std::array<Component, 4> kAllComponents{Component::RBC, Component::PLAS,
                                                         Component::PLAT, Component::WB};

constexpr std::size_t index_of(BloodType t) noexcept { return static_cast<std::size_t>(t); }
constexpr std::size_t index_of(Component c) noexcept { return static_cast<std::size_t>(c); }

constexpr std::string_view to_string(BloodType t) noexcept {
    constexpr std::array<std::string_view, 8> names{"O+", "A+", "B+", "O-", "A-", "AB+", "B-", "AB-"};
    return names[index_of(t)];
}

constexpr std::string_view to_string(Component c) noexcept {
    constexpr std::array<std::string_view, 4> names{"RBC", "PLAS", "PLAT", "WB"};
    return names[index_of(c)];
}

inline BloodType parse_blood_type(std::string_view text) {
    for (BloodType t : kAllBloodTypes)
        if (to_string(t) == text) return t;
    throw ValidationError("unknown blood type '" + std::string(text) + "'", "blood_type");
}

inline Component parse_component(std::string_view text) {
    for (Component c : kAllComponents)
        if (to_string(c) == text) return c;
    throw ValidationError("unknown component '" + std::string(text) + "'", "component");
}

// Small value set of blood types backed by an 8-bit mask.
class BloodTypeSet {
public:
    constexpr BloodTypeSet() = default;
    constexpr BloodTypeSet(std::initializer_list<BloodType> types) {
        for (BloodType t : types) insert(t);
    }

    constexpr void insert(BloodType t) noexcept { mask_ |= bit(t); }
    constexpr bool contains(BloodType t) const noexcept { return (mask_ & bit(t)) != 0; }
    constexpr std::size_t size() const noexcept { return static_cast<std::size_t>(std::popcount(mask_)); }
    constexpr bool empty() const noexcept { return mask_ == 0; }
    constexpr std::uint8_t mask() const noexcept { return mask_; }

    // Members in canonical order.
    std::vector<BloodType> to_vector() const {
        std::vector<BloodType> out;
        for (BloodType t : kAllBloodTypes)
            if (contains(t)) out.push_back(t);
        return out;
    }

    friend constexpr bool operator==(BloodTypeSet, BloodTypeSet) = default;

private:
    static constexpr std::uint8_t bit(BloodType t) noexcept {
        return static_cast<std::uint8_t>(1u << index_of(t));
    }
    std::uint8_t mask_ = 0;
};

// Recipient -> acceptable donor types for red-cell products. The same matrix is
// applied to every component; plasma's reversed compatibility is not modeled.
class CompatibilityMatrix {
public:
    static const CompatibilityMatrix& standard() {
        static const CompatibilityMatrix matrix;
        return matrix;
    }

    BloodTypeSet donors_for(BloodType recipient) const noexcept { return donors_[index_of(recipient)]; }

    bool accepts(BloodType recipient, BloodType donor) const noexcept {
        return donors_[index_of(recipient)].contains(donor);
    }

private:
    CompatibilityMatrix() {
        using enum BloodType;
        donors_[index_of(OPos)] = {OPos, ONeg};
        donors_[index_of(APos)] = {APos, ANeg, OPos, ONeg};
        donors_[index_of(BPos)] = {BPos, BNeg, OPos, ONeg};
        donors_[index_of(ONeg)] = {ONeg};
        donors_[index_of(ANeg)] = {ANeg, ONeg};
        donors_[index_of(ABPos)] = {OPos, APos, BPos, ONeg, ANeg, ABPos, BNeg, ABNeg};
        donors_[index_of(BNeg)] = {BNeg, ONeg};
        donors_[index_of(ABNeg)] = {ABNeg, ANeg, BNeg, ONeg};
    }

    std::array<BloodTypeSet, 8> donors_{};
};

inline BloodTypeSet compatible_donors(BloodType recipient) {
    return CompatibilityMatrix::standard().donors_for(recipient);
}

// 1 (rarest) .. 4 (most common).
constexpr int rarity_score(BloodType t) noexcept {
    constexpr std::array<int, 8> scores{4, 3, 2, 3, 2, 1, 1, 1};
    return scores[index_of(t)];
}

constexpr int shelf_life_days(Component c) noexcept {
    constexpr std::array<int, 4> days{42, 365, 5, 35};
    return days[index_of(c)];
}

constexpr double type_probability(BloodType t) noexcept {
    constexpr std::array<double, 8> p{0.38, 0.34, 0.09, 0.07, 0.06, 0.03, 0.02, 0.01};
    return p[index_of(t)];
}

// Inverse CDF over the canonical order; u in [0, 1).
inline BloodType blood_type_from_uniform(double u) noexcept {
    double cumulative = 0.0;
    for (BloodType t : kAllBloodTypes) {
        cumulative += type_probability(t);
        if (u < cumulative) return t;
    }
    return kAllBloodTypes.back();
}

inline BloodType sample_blood_type(Rng& rng) { return blood_type_from_uniform(rng.uniform01()); }

}  // namespace bloodflow
