#pragma once

#include <filesystem>

namespace uavipp::cli {

inline constexpr int kExitOk = 0;
inline constexpr int kExitRuntime = 1;
inline constexpr int kExitUsage = 2;

// Output root for runs without an explicit --out: $UAVIPP_OUT_ROOT or ./runs.
std::filesystem::path out_root();

int run(int argc, char** argv);

} // namespace uavipp::cli
