#pragma once

#include <spdlog/spdlog.h>

namespace panelcausal::detail {

/// Shared stderr logger; level comes from PANELCAUSAL_LOG (off, info, debug).
spdlog::logger& log();

}  // namespace panelcausal::detail
