#pragma once

#include <cstddef>
#include <initializer_list>
#include <span>
#include <vector>

namespace actguide {

/// Conditioning action: a finite real vector (2 entries in the toy world,
/// measured in pixels per step).
class ActionVector {
public:
    explicit ActionVector(std::vector<double> values);
    ActionVector(std::initializer_list<double> values);

    static ActionVector zero(std::size_t dim);

    std::size_t dim() const noexcept { return values_.size(); }
    std::span<const double> values() const noexcept { return values_; }
    double operator[](std::size_t i) const { return values_[i]; }

    ActionVector scaled(double factor) const;

    friend bool operator==(const ActionVector&, const ActionVector&) = default;

private:
    std::vector<double> values_;
};

}  // namespace actguide
