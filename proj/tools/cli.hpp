#pragma once

#include <iosfwd>
#include <string>
#include <vector>

namespace fracuc::cli {

inline constexpr int kExitOk = 0;
inline constexpr int kExitValidation = 2;
inline constexpr int kExitNumerical = 3;

/// Runs `fracuc` with args excluding the program name; returns the exit code.
int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

}  // namespace fracuc::cli
