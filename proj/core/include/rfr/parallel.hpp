#pragma once

#include <cstddef>
#include <functional>

namespace rfr {

// Worker cap: RFR_THREADS environment variable when set (>= 1), otherwise
// std::thread::hardware_concurrency().
int worker_count();

// Runs fn(0) .. fn(n_units - 1), possibly concurrently. Callers must shape
// work units so results do not depend on how units are assigned to workers;
// every numeric routine in this library uses fixed-size units for that
// reason. The first exception thrown by any unit is rethrown after all
// workers finish.
void parallel_for_units(std::size_t n_units, const std::function<void(std::size_t)>& fn);

} // namespace rfr
