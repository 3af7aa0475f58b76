#pragma once

#include <optional>
#include <string>
#include <string_view>

#include "mendkit/errors.hpp"
#include "mendkit/text.hpp"

namespace mendkit {

enum class Language { java, python, c, javascript };

inline std::string_view to_string(Language lang) {
    switch (lang) {
        case Language::java: return "java";
        case Language::python: return "python";
        case Language::c: return "c";
        case Language::javascript: return "javascript";
    }
    return "?";
}

inline Language parse_language(std::string_view tag) {
    const std::string t = to_lower(tag);
    if (t == "java") return Language::java;
    if (t == "python") return Language::python;
    if (t == "c") return Language::c;
    if (t == "javascript") return Language::javascript;
    throw UnsupportedLanguage(std::string(tag));
}

// Model-facing prefix placed at the start of every encoded input.
inline std::string_view language_prefix(Language lang) {
    switch (lang) {
        case Language::java: return "Java";
        case Language::python: return "Python";
        case Language::c: return "C";
        case Language::javascript: return "JavaScript";
    }
    return "";
}

// Maps a file name to a language by extension; nullopt when unknown.
inline std::optional<Language> language_from_path(std::string_view path) {
    const auto dot = path.rfind('.');
    if (dot == std::string_view::npos) return std::nullopt;
    const std::string ext = to_lower(path.substr(dot + 1));
    if (ext == "java") return Language::java;
    if (ext == "py") return Language::python;
    if (ext == "c" || ext == "h") return Language::c;
    if (ext == "js" || ext == "mjs" || ext == "cjs") return Language::javascript;
    return std::nullopt;
}

}  // namespace mendkit
