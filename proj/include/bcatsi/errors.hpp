#pragma once

#include <stdexcept>
#include <string>

namespace bcatsi {

// Shape or dimension violation in a tensor operation.
struct ShapeError : std::invalid_argument {
    using std::invalid_argument::invalid_argument;
};

// Malformed or infeasible input data (files, masks, panels).
struct DataError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

// Non-finite losses and other numeric breakdowns.
struct NumericError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

// Violated API contract; a programming error on the caller's side.
struct ContractError : std::logic_error {
    using std::logic_error::logic_error;
};

} // namespace bcatsi
