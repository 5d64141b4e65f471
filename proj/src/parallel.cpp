#include "dickecav/parallel.hpp"

#include <charconv>
#include <cstdlib>
#include <cstring>

namespace dickecav::parallel {

int worker_count() {
    if (const char* env = std::getenv("DICKECAV_WORKERS")) {
        int v = 0;
        const auto [ptr, ec] = std::from_chars(env, env + std::strlen(env), v);
        if (ec == std::errc{} && *ptr == '\0' && v > 0) return v;
    }
    const unsigned hw = std::thread::hardware_concurrency();
    return hw == 0 ? 1 : static_cast<int>(hw);
}

} // namespace dickecav::parallel
