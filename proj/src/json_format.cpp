#include "interlasso/json_format.hpp"

#include <cmath>

#include <fmt/format.h>

namespace interlasso {

std::string format_real(double value) { return fmt::format("{:.17g}", value); }

namespace {

void write(const nlohmann::ordered_json& v, int indent, int depth, std::string& out) {
  using value_t = nlohmann::ordered_json::value_t;
  const auto newline = [&](int level) {
    if (indent < 0) return;
    out += '\n';
    out.append(static_cast<std::size_t>(indent * level), ' ');
  };
  switch (v.type()) {
    case value_t::object: {
      if (v.empty()) {
        out += "{}";
        return;
      }
      out += '{';
      bool first = true;
      for (auto it = v.begin(); it != v.end(); ++it) {
        if (!first) out += ',';
        first = false;
        newline(depth + 1);
        out += nlohmann::ordered_json(it.key()).dump();
        out += indent < 0 ? ":" : ": ";
        write(it.value(), indent, depth + 1, out);
      }
      newline(depth);
      out += '}';
      return;
    }
    case value_t::array: {
      if (v.empty()) {
        out += "[]";
        return;
      }
      // Arrays of plain numbers stay on one line.
      const bool flat = std::all_of(v.begin(), v.end(), [](const auto& e) { return e.is_number(); });
      out += '[';
      bool first = true;
      for (const auto& e : v) {
        if (!first) out += flat ? ", " : ",";
        first = false;
        if (!flat) newline(depth + 1);
        write(e, indent, depth + 1, out);
      }
      if (!flat) newline(depth);
      out += ']';
      return;
    }
    case value_t::number_float: {
      const double d = v.get<double>();
      out += std::isfinite(d) ? format_real(d) : "null";
      return;
    }
    default:
      out += v.dump();
  }
}

}  // namespace

std::string dump_json(const nlohmann::ordered_json& value, int indent) {
  std::string out;
  write(value, indent, 0, out);
  return out;
}

}  // namespace interlasso
