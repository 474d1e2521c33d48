#include "wipin/format.hpp"

#include <array>
#include <charconv>

namespace wipin {

std::string fmt_num(double v) {
    std::array<char, 32> buf{};
    const auto [ptr, ec] = std::to_chars(buf.data(), buf.data() + buf.size(), v);
    return std::string(buf.data(), ptr);
}

} // namespace wipin
