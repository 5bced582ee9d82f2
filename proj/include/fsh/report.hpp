#pragma once

#include <charconv>
#include <filesystem>
#include <fstream>
#include <optional>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "fsh/error.hpp"
#include "fsh/rng.hpp"

namespace fsh {

inline constexpr std::string_view tool_version = "fsh 0.1.0";

/// Shortest decimal form that parses back to the same double.
inline std::string format_double(double v) {
  char buf[64];
  auto [end, ec] = std::to_chars(buf, buf + sizeof buf, v);
  return ec == std::errc() ? std::string(buf, end) : std::string("nan");
}

inline std::string format_optional(const std::optional<double>& v) { return v ? format_double(*v) : std::string(); }

/// Resolved settings of one run, in the order they are reported.
using ConfigEntries = std::vector<std::pair<std::string, std::string>>;

/**
 * @brief CSV report with a `#`-prefixed header recording the tool version,
 * the command, every resolved setting and the generator identity. The header
 * carries no timestamps, so identical runs produce identical files.
 */
class ReportWriter {
public:
  ReportWriter(const std::filesystem::path& path, std::string_view command, const ConfigEntries& config,
               const std::vector<std::string>& notes = {})
      : path_(path), out_(path) {
    if (!out_) fail_validation("cannot write report '" + path.string() + "'");
    out_ << "# tool: " << tool_version << '\n';
    out_ << "# command: " << command << '\n';
    for (const auto& [key, value] : config) out_ << "# config: " << key << '=' << value << '\n';
    out_ << "# rng: " << rng_identity << '\n';
    for (const auto& note : notes) out_ << "# note: " << note << '\n';
  }

  template <typename... Fields>
  ReportWriter& row(const Fields&... fields) {
    bool first = true;
    ((out_ << (first ? "" : ",") << cell(fields), first = false), ...);
    out_ << '\n';
    return *this;
  }

  ReportWriter& row(const std::vector<std::string>& fields) {
    for (std::size_t i = 0; i < fields.size(); ++i) out_ << (i ? "," : "") << fields[i];
    out_ << '\n';
    return *this;
  }

  const std::filesystem::path& path() const { return path_; }

private:
  static std::string cell(const std::string& s) { return s; }
  static std::string cell(std::string_view s) { return std::string(s); }
  static std::string cell(const char* s) { return s; }
  static std::string cell(double v) { return format_double(v); }
  static std::string cell(bool v) { return v ? "true" : "false"; }
  static std::string cell(const std::optional<double>& v) { return format_optional(v); }
  template <typename I>
  static std::string cell(I v) requires std::is_integral_v<I> {
    return std::to_string(v);
  }

  std::filesystem::path path_;
  std::ofstream out_;
};

}  // namespace fsh
