#pragma once

namespace edlab::cli {

/// Entry point behind the edlab binary. Exit codes: 0 success, 1 invariant
/// violation (verify), 2 usage or configuration error.
int run(int argc, const char* const* argv);

}  // namespace edlab::cli
