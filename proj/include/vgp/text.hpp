#pragma once

#include <cstddef>
#include <functional>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

namespace vgp {

/// Error raised while reading a line-oriented input; carries the 1-based line.
class ParseError : public std::runtime_error {
 public:
  ParseError(std::size_t line, const std::string& what)
      : std::runtime_error("line " + std::to_string(line) + ": " + what), line_(line) {}
  std::size_t line() const { return line_; }

 private:
  std::size_t line_;
};

std::string to_lower(std::string_view s);
std::vector<std::string> split_whitespace(std::string_view s);
std::vector<std::string_view> split(std::string_view s, char sep);
std::string join(const std::vector<std::string>& parts, std::string_view sep);
std::string_view trim(std::string_view s);

// Strict numeric parsing; the whole field must be consumed.
bool parse_double(std::string_view s, double& out);
bool parse_long(std::string_view s, long& out);

// Diagnostics go to stderr unless silenced (tests silence them).
void warn(const std::string& message);
void set_warnings_enabled(bool enabled);
std::size_t warning_count();

// Runs body(i) for i in [0, n). Each index is handled exactly once; callers
// write results into pre-sized slots so ordering stays deterministic.
void parallel_for(std::size_t n, int jobs, const std::function<void(std::size_t)>& body);

}  // namespace vgp

namespace vgp {
/// Shortest round-trip decimal representation.
std::string format_double(double v);
}  // namespace vgp
