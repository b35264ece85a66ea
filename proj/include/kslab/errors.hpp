#pragma once

#include <stdexcept>
#include <string>

namespace kslab {

/** Requested acceleration cannot be met; carries the nearest achievable factor. */
class infeasible_acceleration : public std::runtime_error {
public:
    infeasible_acceleration(const std::string& msg, double nearest)
        : std::runtime_error(msg), nearest_achievable(nearest) {}
    double nearest_achievable;
};

/** An iterative solver or training run produced non-finite values. */
class divergence_error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/** A serialized artifact failed validation on read. */
class format_error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

}  // namespace kslab
