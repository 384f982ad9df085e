#pragma once

#include <initializer_list>
#include <string>

#include <json.hpp>

#include "stc/error.hpp"

namespace stc {

// Strict config parsing: unknown keys are rejected by name.
inline void check_keys(const nlohmann::json& obj,
                       std::initializer_list<const char*> allowed,
                       const std::string& context) {
  if (!obj.is_object()) fail(ErrorCode::Parse, context + ": expected a JSON object");
  for (const auto& [key, _] : obj.items()) {
    bool ok = false;
    for (const char* a : allowed)
      if (key == a) {
        ok = true;
        break;
      }
    if (!ok) fail(ErrorCode::Parse, context + ": unknown key '" + key + "'");
  }
}

inline void require_key(const nlohmann::json& obj, const char* key,
                        const std::string& context) {
  if (!obj.contains(key)) fail(ErrorCode::Parse, context + ": missing key '" + std::string(key) + "'");
}

}  // namespace stc
