#include "actguide/action.hpp"

#include <cmath>

#include "actguide/error.hpp"

namespace actguide {

ActionVector::ActionVector(std::vector<double> values) : values_(std::move(values)) {
    if (values_.empty()) throw InvalidInput("action vector must have at least one entry");
    for (double v : values_) {
        if (!std::isfinite(v)) throw InvalidInput("action vector has a non-finite entry");
    }
}

ActionVector::ActionVector(std::initializer_list<double> values)
    : ActionVector(std::vector<double>(values)) {}

ActionVector ActionVector::zero(std::size_t dim) { return ActionVector(std::vector<double>(dim, 0.0)); }

ActionVector ActionVector::scaled(double factor) const {
    std::vector<double> out(values_);
    for (double& v : out) v *= factor;
    return ActionVector(std::move(out));
}

}  // namespace actguide
