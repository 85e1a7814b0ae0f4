#pragma once

#include <string>
#include <string_view>
#include <vector>

namespace moralscope::text {

/// Splits on whitespace; runs of letters, digits and apostrophes form a token,
/// every other printable character is its own token. Bytes >= 0x80 (UTF-8
/// continuation) are word characters. Original case is preserved.
std::vector<std::string> tokenize(std::string_view s);

std::string lowercase(std::string_view s);
std::string trim(std::string_view s);

/// Curly quotes and apostrophes folded to ASCII.
std::string fold_quotes(std::string_view s);

std::vector<std::string> split(std::string_view s, char sep);
std::string join(const std::vector<std::string>& parts, std::string_view sep);

}  // namespace moralscope::text
