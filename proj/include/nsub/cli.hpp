#pragma once

#include <iosfwd>

namespace nsub {

inline constexpr int kExitOk = 0;
inline constexpr int kExitValidation = 1;
inline constexpr int kExitNumerical = 2;

// Entry point of the `nsub` tool. Progress and results go to `out`, errors
// and usage text to `err`.
int cli_main(int argc, const char* const* argv, std::ostream& out, std::ostream& err);

}  // namespace nsub
