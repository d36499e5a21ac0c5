#pragma once

#include <string>
#include <string_view>
#include <vector>

namespace polka_te {

/// Shortest decimal text that round-trips to the same double.
std::string format_number(double v);
/// Parses a finite or non-finite decimal; `context` prefixes error messages.
double parse_number(std::string_view s, const std::string& context);
std::vector<std::string> split(std::string_view s, char sep);

}  // namespace polka_te
