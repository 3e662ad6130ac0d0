#pragma once

#include <stdexcept>
#include <string>

namespace fedscope {

// Invalid values, ranges, or file contents. CLI maps this to exit code 2.
struct validation_error : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// Incompatible shapes between parameter sets, batches, or labels.
struct dimension_error : validation_error {
  using validation_error::validation_error;
};

// Constrained selection with an empty feasible set. Exit code 3.
struct infeasible_error : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// Filesystem and serialization failures. Exit code 4.
struct io_error : std::runtime_error {
  using std::runtime_error::runtime_error;
};

}  // namespace fedscope
