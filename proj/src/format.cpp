#include "spnx/format.hpp"

#include <cmath>
#include <cstdio>

#include "json.hpp"

namespace spnx {

std::string text_number(double value)
{
    if (std::isnan(value))
        return "nan";
    if (std::isinf(value))
        return value > 0 ? "inf" : "-inf";
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.17g", value);
    return buf;
}

std::string json_number(double value)
{
    if (!std::isfinite(value))
        return "null";
    return text_number(value);
}

std::string json_string(std::string_view text) { return nlohmann::json(std::string(text)).dump(); }

} // namespace spnx
