#pragma once

#include <iosfwd>
#include <string>
#include <vector>

#include "tal/error.hpp"

namespace tal::cli {

// Exit codes. Also printed in the --help footer.
inline constexpr int kExitOk = 0;
inline constexpr int kExitInternal = 1;
inline constexpr int kExitUsage = 2;
inline constexpr int kExitConfig = 3;
inline constexpr int kExitIo = 4;
inline constexpr int kExitDomain = 5;
inline constexpr int kExitInput = 6;
inline constexpr int kExitPrecondition = 7;
inline constexpr int kExitSolver = 8;
inline constexpr int kExitInvariant = 9;
inline constexpr int kExitRuntime = 10;

int exit_code_for(ErrorKind kind) noexcept;

// Environment variable consulted when neither --output-dir nor the spec
// names an output directory.
inline constexpr const char* kOutputDirEnv = "TAL_OUTPUT_DIR";

// args[0] is the program name. Failures print one JSON object to `err`:
// {"error":{"kind":...,"message":...,"exit_code":...}}.
int run(const std::vector<std::string>& args, std::ostream& out,
        std::ostream& err);

}  // namespace tal::cli
