#pragma once

#include <iosfwd>
#include <string>
#include <vector>

namespace gridppo {

inline constexpr int kExitOk = 0;
inline constexpr int kExitUsage = 1;
inline constexpr int kExitNumerical = 2;

/// Entry point of the gridppo binary. Normal output goes to `out`, diagnostics to `err`.
int cli_main(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);
int cli_main(int argc, char** argv);

}  // namespace gridppo
