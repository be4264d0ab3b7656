#pragma once

// The `mentor` command line: demo-gen, train, eval, calibrate, bench-overlay
// and serve. Exit codes: 0 success, 1 usage error, 2 data or environment
// error (non-monotone benchmark means also exit 2).

#include <atomic>
#include <iosfwd>
#include <string>
#include <vector>

namespace pegmentor {

inline constexpr int kExitOk = 0;
inline constexpr int kExitUsage = 1;
inline constexpr int kExitData = 2;

/// Runs one invocation; args exclude the program name. `stop` (optional)
/// ends a running `serve`.
int run_cli(const std::vector<std::string>& args, std::ostream& out, std::ostream& err,
            const std::atomic<bool>* stop = nullptr);

}  // namespace pegmentor
