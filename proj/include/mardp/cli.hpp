#pragma once

namespace mardp::cli {

/// Entry point for the `mardp` command. Returns the process exit code:
/// 0 success, 2 usage error, 3 data error, 4 numerical failure.
int run(int argc, const char* const* argv);

}  // namespace mardp::cli
