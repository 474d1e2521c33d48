#pragma once

#include <string>

namespace wipin {

/// Shortest text form of a double that parses back bit-exactly.
std::string fmt_num(double v);

} // namespace wipin
