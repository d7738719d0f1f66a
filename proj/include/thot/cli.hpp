#pragma once

#include <iosfwd>
#include <memory>
#include <string>
#include <vector>

#include "thot/backend.hpp"
#include "thot/runner.hpp"

namespace thot {

// Hooks for tests; empty members fall back to the real implementations.
struct CliEnv {
  std::shared_ptr<Transport> transport;
  BackendFactory backend_factory;
  Clock clock;
};

// args excludes the program name. Returns 0 on success, 2 on usage errors
// and 1 on configuration or runtime errors.
int cli_run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err, const CliEnv& env = {});

}  // namespace thot
