#pragma once

#include <string>

#include "json.hpp"

namespace interlasso {

/// Serializes `value` with every floating-point number printed as %.17g, so
/// output bytes depend only on the values. Non-finite numbers become null.
std::string dump_json(const nlohmann::ordered_json& value, int indent = 2);

/// "%.17g" rendering used by every text output.
std::string format_real(double value);

}  // namespace interlasso
