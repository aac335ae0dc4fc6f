#pragma once

#include <ostream>

namespace raf {

/// Entry point for the `raf` tool. Results go to `out`, progress and
/// diagnostics to `err`. Returns 0 on success, 1 on a runtime failure and 2
/// on a usage error.
int run_cli(int argc, const char* const* argv, std::ostream& out, std::ostream& err);

}  // namespace raf
