#pragma once
// Error hierarchy shared by the library and the command line tool.
// config_error maps to exit code 2, solver_error to exit code 3.

#include <stdexcept>
#include <string>

namespace crackband {

struct error : std::runtime_error {
  explicit error(const std::string& msg) : std::runtime_error(msg) {}
};

// bad numeric input to a tensor or material routine (NaN/Inf, non-unit normal, ...)
struct invalid_input_error : error {
  using error::error;
};

// violated call contract (routine invoked in a state its caller must exclude)
struct contract_violation : error {
  using error::error;
};

// configuration / validation problems; messages name the offending field
struct config_error : error {
  using error::error;
};

// equilibrium or local iteration failed to converge
struct solver_error : error {
  using error::error;
};

}  // namespace crackband
