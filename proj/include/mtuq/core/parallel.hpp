#pragma once

#ifdef _OPENMP
#include <omp.h>
#endif

namespace mtuq {

// Global execution mode for the compute kernels. Parallel is the default;
// Serial forces the reference implementations everywhere (used by tests and
// the --serial CLI flag). Both modes produce bit-identical results because
// every kernel fixes its accumulation order independently of the thread
// count.
enum class Exec { Parallel, Serial };

Exec default_exec();
void set_default_exec(Exec e);

int max_threads();
void set_num_threads(int n);

} // namespace mtuq
