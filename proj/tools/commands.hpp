#pragma once

#include "config.hpp"

namespace tvpcli {

enum ExitCode : int { kExitOk = 0, kExitUsage = 2, kExitPartial = 3, kExitNumerical = 4 };

int cmd_estimate(const RunConfig& cfg);
int cmd_simulate(const RunConfig& cfg);
int cmd_forecast(const RunConfig& cfg);
int cmd_bench(const RunConfig& cfg);

} // namespace tvpcli
