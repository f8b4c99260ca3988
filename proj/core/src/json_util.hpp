#pragma once

#include <string>
#include <string_view>

#include <nlohmann/json.hpp>

#include "ikl/common.hpp"

namespace ikl::detail {

using Json = nlohmann::json;

/// Parses `text`, turning syntax errors into ConfigError of the form
/// "source:line:column: message" followed by the offending line.
inline Json parse_json(std::string_view text, std::string_view source) {
  try {
    return Json::parse(text.begin(), text.end());
  } catch (const Json::parse_error& e) {
    std::size_t pos = e.byte == 0 ? 0 : e.byte - 1;
    if (pos > text.size()) pos = text.size();
    std::size_t line = 1;
    std::size_t line_start = 0;
    for (std::size_t i = 0; i < pos; ++i) {
      if (text[i] == '\n') {
        ++line;
        line_start = i + 1;
      }
    }
    std::size_t line_end = text.find('\n', line_start);
    if (line_end == std::string_view::npos) line_end = text.size();
    std::string context(text.substr(line_start, line_end - line_start));
    if (context.size() > 120) context = context.substr(0, 120) + "...";
    const std::string what = e.what();
    const auto colon = what.rfind(": ");
    throw ConfigError(std::string(source) + ":" + std::to_string(line) + ":" +
                      std::to_string(pos - line_start + 1) + ": " +
                      (colon == std::string::npos ? what : what.substr(colon + 2)) + "\n  " +
                      context);
  }
}

/// Typed member access with errors naming the key and the document.
template <typename T>
T get_field(const Json& obj, const char* key, std::string_view source) {
  const auto it = obj.find(key);
  if (it == obj.end()) {
    throw ConfigError(std::string(source) + ": missing key '" + key + "'");
  }
  try {
    return it->get<T>();
  } catch (const Json::exception&) {
    throw ConfigError(std::string(source) + ": key '" + key + "' has the wrong type (" +
                      it->type_name() + ")");
  }
}

}  // namespace ikl::detail
