#ifndef PNEN_ERRORS_HPP_
#define PNEN_ERRORS_HPP_

#include <stdexcept>
#include <string>

namespace pnen {

// Error taxonomy, mapped to process exit codes by the CLI:
//   ConfigError -> 2 (bad flags, bad config keys, shape mismatches)
//   DataError   -> 3 (missing or malformed files)
//   NumericError-> 4 (non-finite values)
struct ConfigError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

struct DataError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

struct NumericError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

}  // namespace pnen

#endif  // PNEN_ERRORS_HPP_
