#pragma once

#include <ostream>
#include <span>
#include <string>

#include "soel/error.hpp"
#include "soel/fewshot.hpp"

namespace soel::cli {

inline constexpr int kExitOk = 0;
inline constexpr int kExitConfig = 2;
inline constexpr int kExitData = 3;
inline constexpr int kExitDiverged = 4;
inline constexpr int kExitOther = 1;

int exit_code(Errc code);

/// Runs `soelsim` with `args` (without the program name). Normal output
/// goes to `out`, diagnostics to `err`; returns the process exit code.
int run(std::span<const std::string> args, std::ostream& out, std::ostream& err);

/// Reads manifest.csv (class,seed,path,duration_us) and the event files it
/// lists; paths are relative to `dir`.
fewshot::Dataset load_dataset(const std::string& dir);

}  // namespace soel::cli
