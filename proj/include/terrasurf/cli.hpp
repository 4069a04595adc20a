#pragma once

namespace terrasurf {

// Full command-line surface. Returns the process exit code:
// 0 success, 1 usage error, 2 data/processing error.
int run_cli(int argc, const char* const* argv);

} // namespace terrasurf
