#pragma once

#include <stdexcept>

namespace girnet {

// Bad external input: unreadable frames, malformed manifests, clips that
// violate size contracts. CLI maps this to exit code 2.
struct DataError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// Runtime numerical failure: NaN/Inf where finite values are required.
// CLI maps this to exit code 3.
struct NumericalError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

}  // namespace girnet
