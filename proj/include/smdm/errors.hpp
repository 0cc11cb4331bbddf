#pragma once

#include <stdexcept>
#include <string>

namespace smdm {

// Error taxonomy mirrored by the CLI exit codes:
//   config_error -> 2, io_error -> 3, numeric_error -> 4.
// contract_error marks caller bugs (bad shapes, bad indices) rather than
// bad user input and maps to a generic failure exit.

struct config_error : std::runtime_error {
  using std::runtime_error::runtime_error;
};

struct io_error : std::runtime_error {
  using std::runtime_error::runtime_error;
};

struct numeric_error : std::runtime_error {
  using std::runtime_error::runtime_error;
};

struct contract_error : std::logic_error {
  using std::logic_error::logic_error;
};

}  // namespace smdm
