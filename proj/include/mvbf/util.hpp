#pragma once

#include <cstddef>
#include <functional>
#include <string>

namespace mvbf {

// Chunked parallel loop over [0, n). Work items write only their own slots,
// so results are independent of the thread count.
void parallel_for(std::size_t n, int threads, const std::function<void(std::size_t)>& fn);

int default_thread_count();

void set_quiet(bool quiet);
bool quiet();
void log_warn(const std::string& msg);
void log_info(const std::string& msg);

}  // namespace mvbf
