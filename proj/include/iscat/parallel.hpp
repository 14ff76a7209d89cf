#pragma once

#include <functional>

namespace iscat {

// Worker count resolution: explicit set_thread_count() wins, then the
// ISCAT_THREADS environment variable, default 1 (deterministic mode).
int thread_count();
void set_thread_count(int n);

// Runs f(i) for i in [0, n). Each index must write only its own slots;
// reductions belong to the caller, in fixed index order.
void parallel_for(int n, const std::function<void(int)>& f);

}  // namespace iscat
