#pragma once

#include "bloodflow/date.hpp"
#include "bloodflow/domain.hpp"
#include "bloodflow/error.hpp"
#include "bloodflow/forecast.hpp"
#include "bloodflow/lstm.hpp"
#include "bloodflow/random.hpp"
#include "bloodflow/records.hpp"
#include "bloodflow/simengine.hpp"
#include "bloodflow/stats.hpp"
#include "bloodflow/store.hpp"
#include "bloodflow/synthgen.hpp"

namespace bloodflow {
inline constexpr const char* kVersion = "0.1.0";
}
