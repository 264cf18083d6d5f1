#include "dan/parallel.hpp"

#include <charconv>
#include <cstdlib>
#include <cstring>

namespace dan {

std::size_t worker_count() {
    const std::size_t hw = std::max(1u, std::thread::hardware_concurrency());
    const char* env = std::getenv("DAN_THREADS");
    if (env == nullptr) return hw;
    std::size_t value = 0;
    const auto* end = env + std::strlen(env);
    auto [ptr, ec] = std::from_chars(env, end, value);
    if (ec != std::errc{} || ptr != end || value == 0) return hw;
    return value;
}

}  // namespace dan
