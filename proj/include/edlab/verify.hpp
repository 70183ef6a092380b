#pragma once

#include <ostream>

namespace edlab {

/// Runs the cross-module invariant battery, printing one line per check.
/// Returns 0 when every check passes, 1 otherwise.
int run_verify(std::ostream& out);

}  // namespace edlab
