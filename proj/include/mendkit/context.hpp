#pragma once

#include <algorithm>
#include <array>
#include <memory>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "mendkit/errors.hpp"
#include "mendkit/language.hpp"
#include "mendkit/line_range.hpp"
#include "mendkit/text.hpp"

namespace mendkit {

enum class ContextKind { enclosing_function, window };

inline std::string_view to_string(ContextKind k) {
    return k == ContextKind::enclosing_function ? "enclosing_function" : "window";
}

struct ContextSpan {
    ContextKind kind = ContextKind::window;
    LineRange range;
    std::string text;
};

// Finds function definitions in a source file. Each returned range covers the
// whole definition (leading decorators/annotations through the last body
// line). Implementations throw ScanError on sources they cannot make sense of.
class FunctionScanner {
public:
    virtual ~FunctionScanner() = default;
    virtual std::vector<LineRange> functions(std::string_view source) const = 0;
};

namespace scan_detail {

// Source with comments, string/char/template/regex literal bodies and (for C)
// preprocessor lines replaced by spaces. Newlines are kept so offsets map to
// the same lines as the original.
inline std::string mask_c_like(std::string_view src, Language lang) {
    std::string out(src);
    const std::size_t n = src.size();
    auto blank = [&](std::size_t from, std::size_t to) {
        for (std::size_t k = from; k < to && k < n; ++k)
            if (out[k] != '\n') out[k] = ' ';
    };
    auto prev_significant = [&](std::size_t i) -> std::size_t {
        while (i > 0) {
            --i;
            if (!is_space(out[i])) return i;
        }
        return std::string::npos;
    };

    bool at_line_start = true;
    std::size_t i = 0;
    while (i < n) {
        const char c = src[i];
        if (c == '\n') {
            at_line_start = true;
            ++i;
            continue;
        }
        if (is_space(c)) {
            ++i;
            continue;
        }
        const bool line_start = at_line_start;
        at_line_start = false;

        if (lang == Language::c && line_start && c == '#') {
            std::size_t j = i;
            while (j < n) {
                if (src[j] == '\n' && (j == 0 || src[j - 1] != '\\')) break;
                ++j;
            }
            blank(i, j);
            i = j;
            continue;
        }
        if (c == '/' && i + 1 < n && src[i + 1] == '/') {
            std::size_t j = src.find('\n', i);
            if (j == std::string_view::npos) j = n;
            blank(i, j);
            i = j;
            continue;
        }
        if (c == '/' && i + 1 < n && src[i + 1] == '*') {
            const std::size_t j = src.find("*/", i + 2);
            if (j == std::string_view::npos) throw ScanError("unterminated block comment");
            blank(i, j + 2);
            i = j + 2;
            continue;
        }
        if (lang == Language::java && src.substr(i, 3) == "\"\"\"") {
            const std::size_t j = src.find("\"\"\"", i + 3);
            if (j == std::string_view::npos) throw ScanError("unterminated text block");
            blank(i, j + 3);
            i = j + 3;
            continue;
        }
        if (c == '"' || c == '\'') {
            std::size_t j = i + 1;
            while (j < n && src[j] != c) {
                if (src[j] == '\\') {
                    j += 2;
                    continue;
                }
                if (src[j] == '\n') throw ScanError("unterminated literal");
                ++j;
            }
            if (j >= n) throw ScanError("unterminated literal");
            blank(i, j + 1);
            i = j + 1;
            continue;
        }
        if (lang == Language::javascript && c == '`') {
            std::size_t j = i + 1;
            int expr_depth = 0;
            while (j < n) {
                if (expr_depth == 0) {
                    if (src[j] == '\\') {
                        j += 2;
                        continue;
                    }
                    if (src[j] == '`') break;
                    if (src[j] == '$' && j + 1 < n && src[j + 1] == '{') {
                        expr_depth = 1;
                        j += 2;
                        continue;
                    }
                } else if (src[j] == '{') {
                    ++expr_depth;
                } else if (src[j] == '}') {
                    --expr_depth;
                }
                ++j;
            }
            if (j >= n) throw ScanError("unterminated template literal");
            blank(i, j + 1);
            i = j + 1;
            continue;
        }
        if (lang == Language::javascript && c == '/') {
            // Regex literal when '/' cannot be a division operator.
            const std::size_t p = prev_significant(i);
            bool regex = p == std::string::npos ||
                         contains("(,=:[!&|?{};+-*%<>~^", std::string_view(&out[p], 1));
            if (!regex && p != std::string::npos && is_alnum(out[p])) {
                std::size_t b = p;
                while (b > 0 && (is_alnum(out[b - 1]) || out[b - 1] == '_')) --b;
                static constexpr std::array<std::string_view, 8> kw = {
                    "return", "typeof", "case", "else", "in", "of", "throw", "yield"};
                const std::string_view word(&out[b], p - b + 1);
                regex = std::find(kw.begin(), kw.end(), word) != kw.end();
            }
            if (regex) {
                std::size_t j = i + 1;
                bool in_class = false;
                bool closed = false;
                while (j < n && src[j] != '\n') {
                    if (src[j] == '\\') {
                        j += 2;
                        continue;
                    }
                    if (src[j] == '[') in_class = true;
                    else if (src[j] == ']') in_class = false;
                    else if (src[j] == '/' && !in_class) {
                        closed = true;
                        break;
                    }
                    ++j;
                }
                if (closed) {
                    blank(i, j + 1);
                    i = j + 1;
                    continue;
                }
            }
        }
        ++i;
    }
    return out;
}

inline std::vector<std::size_t> line_starts(std::string_view text) {
    std::vector<std::size_t> starts{0};
    for (std::size_t i = 0; i < text.size(); ++i)
        if (text[i] == '\n' && i + 1 < text.size()) starts.push_back(i + 1);
    return starts;
}

inline std::size_t line_of(const std::vector<std::size_t>& starts, std::size_t offset) {
    auto it = std::upper_bound(starts.begin(), starts.end(), offset);
    return static_cast<std::size_t>(it - starts.begin());  // 1-based
}

inline bool is_ident_char(char c) { return is_alnum(c) || c == '_' || c == '$'; }

// Identifier ending right before position `end` (after skipping spaces).
inline std::string_view word_before(std::string_view s, std::size_t end, std::size_t* word_begin = nullptr) {
    std::size_t e = end;
    while (e > 0 && is_space(s[e - 1])) --e;
    std::size_t b = e;
    while (b > 0 && is_ident_char(s[b - 1])) --b;
    if (word_begin) *word_begin = b;
    return s.substr(b, e - b);
}

inline std::size_t skip_space_back(std::string_view s, std::size_t end) {
    while (end > 0 && is_space(s[end - 1])) --end;
    return end;
}

// Offset of the '(' matching the ')' at `close`, or npos.
inline std::size_t matching_open_paren(std::string_view s, std::size_t close) {
    int depth = 0;
    for (std::size_t i = close + 1; i-- > 0;) {
        if (s[i] == ')') ++depth;
        else if (s[i] == '(' && --depth == 0) return i;
    }
    return std::string_view::npos;
}

}  // namespace scan_detail

// Brace-language scanner for C, Java and JavaScript.
class BraceScanner final : public FunctionScanner {
public:
    explicit BraceScanner(Language lang) : lang_(lang) {}

    std::vector<LineRange> functions(std::string_view source) const override {
        using namespace scan_detail;
        const std::string masked = mask_c_like(source, lang_);
        const auto starts = line_starts(masked);

        struct Open {
            bool is_function;
            std::size_t start_line;
        };
        std::vector<Open> stack;
        std::vector<LineRange> found;
        int paren_depth = 0;
        for (std::size_t i = 0; i < masked.size(); ++i) {
            const char c = masked[i];
            if (c == '(') {
                ++paren_depth;
            } else if (c == ')') {
                if (--paren_depth < 0) throw ScanError("unbalanced ')'");
            } else if (c == '{') {
                std::size_t start_line = 0;
                const bool fn = opens_function(masked, i, starts, start_line);
                stack.push_back({fn, start_line});
            } else if (c == '}') {
                if (stack.empty()) throw ScanError("unbalanced '}'");
                const Open top = stack.back();
                stack.pop_back();
                if (top.is_function) {
                    const std::size_t end_line = line_of(starts, i);
                    found.push_back({top.start_line, end_line - top.start_line + 1});
                }
            }
        }
        if (!stack.empty()) throw ScanError("unclosed '{'");
        if (paren_depth != 0) throw ScanError("unbalanced '('");
        return found;
    }

private:
    bool opens_function(std::string_view s, std::size_t brace, const std::vector<std::size_t>& starts,
                        std::size_t& start_line) const {
        using namespace scan_detail;
        std::size_t end = skip_space_back(s, brace);
        if (end >= 2 && (s.substr(end - 2, 2) == "=>" || s.substr(end - 2, 2) == "->")) {
            if (lang_ == Language::c) return false;
            const std::size_t arrow = end - 2;
            const std::size_t before = skip_space_back(s, arrow);
            std::size_t anchor = arrow;
            if (before > 0 && s[before - 1] == ')') {
                const std::size_t open = matching_open_paren(s, before - 1);
                if (open == std::string_view::npos) return false;
                anchor = open;
            } else {
                std::size_t wb = 0;
                if (!word_before(s, before, &wb).empty()) anchor = wb;
            }
            start_line = header_start(s, anchor, starts);
            return true;
        }

        // Drop trailing qualifiers between ')' and '{'.
        static constexpr std::array<std::string_view, 5> qualifiers = {"const", "noexcept", "override",
                                                                       "final", "volatile"};
        for (;;) {
            std::size_t wb = 0;
            const auto w = word_before(s, end, &wb);
            if (!w.empty() && std::find(qualifiers.begin(), qualifiers.end(), w) != qualifiers.end()) {
                end = skip_space_back(s, wb);
                continue;
            }
            break;
        }
        if (lang_ == Language::java) {
            // `) throws A, b.C {`
            const std::size_t close = s.rfind(')', end);
            if (close != std::string_view::npos && close < end) {
                const std::string_view tail = s.substr(close + 1, end - close - 1);
                const std::string norm = normalize_ws(tail);
                if (starts_with(norm, "throws ")) end = close + 1;
            }
        }
        if (end == 0 || s[end - 1] != ')') return false;

        const std::size_t open = matching_open_paren(s, end - 1);
        if (open == std::string_view::npos) return false;
        std::size_t wb = 0;
        const std::string_view name = word_before(s, open, &wb);
        if (name.empty()) return false;

        static constexpr std::array<std::string_view, 14> control = {
            "if", "for", "while", "switch", "catch", "with", "synchronized", "return",
            "sizeof", "typeof", "foreach", "do", "else", "try"};
        if (std::find(control.begin(), control.end(), name) != control.end()) return false;

        std::size_t pb = 0;
        const std::string_view prev = word_before(s, wb, &pb);
        static constexpr std::array<std::string_view, 7> type_intro = {
            "new", "record", "class", "interface", "enum", "struct", "union"};
        if (std::find(type_intro.begin(), type_intro.end(), prev) != type_intro.end()) return false;

        if (lang_ == Language::javascript) {
            std::size_t anchor = wb;
            if (prev == "function" || prev == "async" || prev == "get" || prev == "set" || prev == "static") {
                anchor = pb;
            }
            start_line = header_start(s, anchor, starts);
        } else {
            start_line = statement_start(s, wb, starts);
        }
        return true;
    }

    // First line of the declaration statement containing `pos` (after the
    // previous ';', '{' or '}', skipping blanked comments).
    static std::size_t statement_start(std::string_view s, std::size_t pos, const std::vector<std::size_t>& starts) {
        std::size_t i = pos;
        int depth = 0;
        while (i > 0) {
            const char c = s[i - 1];
            if (c == ')' || c == ']') ++depth;
            else if (c == '(' || c == '[') {
                if (depth == 0) break;
                --depth;
            } else if (depth == 0 && (c == ';' || c == '{' || c == '}')) {
                break;
            }
            --i;
        }
        while (i < pos && is_space(s[i])) ++i;
        return scan_detail::line_of(starts, i);
    }

    // Line of `anchor`, extended upward over decorator lines.
    static std::size_t header_start(std::string_view s, std::size_t anchor, const std::vector<std::size_t>& starts) {
        std::size_t line = scan_detail::line_of(starts, anchor);
        while (line > 1) {
            const std::size_t b = starts[line - 2];
            const std::size_t e = starts[line - 1];
            const auto prev = trim(s.substr(b, e - b));
            if (!prev.empty() && prev.front() == '@') {
                --line;
            } else {
                break;
            }
        }
        return line;
    }

    Language lang_;
};

// Indentation-based scanner for Python.
class IndentScanner final : public FunctionScanner {
public:
    std::vector<LineRange> functions(std::string_view source) const override {
        const auto logical = logical_lines(source);
        std::vector<LineRange> found;
        for (std::size_t li = 0; li < logical.size(); ++li) {
            const auto& L = logical[li];
            if (!(starts_with(L.head, "def ") || starts_with(L.head, "def\t") || starts_with(L.head, "async def "))) {
                continue;
            }
            std::size_t first = L.first_line;
            for (std::size_t k = li; k-- > 0;) {
                if (logical[k].indent == L.indent && starts_with(logical[k].head, "@")) {
                    first = logical[k].first_line;
                } else {
                    break;
                }
            }
            std::size_t last = L.last_line;
            for (std::size_t k = li + 1; k < logical.size(); ++k) {
                if (logical[k].indent <= L.indent) break;
                last = logical[k].last_line;
            }
            found.push_back({first, last - first + 1});
        }
        return found;
    }

private:
    struct Logical {
        std::size_t first_line;
        std::size_t last_line;
        std::size_t indent;
        std::string head;  // text of the first physical line, left-trimmed
    };

    // Code-bearing logical lines; blank and comment-only lines are skipped.
    static std::vector<Logical> logical_lines(std::string_view src) {
        const auto lines = split_lines(src);
        std::vector<Logical> out;
        int depth = 0;
        std::string open_triple;  // active triple-quote delimiter
        bool continuation = false;
        for (std::size_t ln = 0; ln < lines.size(); ++ln) {
            const std::string& line = lines[ln];
            const bool inside = depth > 0 || !open_triple.empty() || continuation;
            if (!inside) {
                const auto t = trim(line);
                if (t.empty() || t.front() == '#') continue;
                std::size_t indent = 0;
                for (char ch : line) {
                    if (ch == ' ') ++indent;
                    else if (ch == '\t') indent = (indent / 8 + 1) * 8;
                    else break;
                }
                const auto lead = line.find_first_not_of(" \t");
                out.push_back({ln + 1, ln + 1, indent, line.substr(lead)});
            } else if (!out.empty()) {
                out.back().last_line = ln + 1;
            }
            continuation = false;
            std::size_t i = 0;
            while (i < line.size()) {
                if (!open_triple.empty()) {
                    if (line[i] == '\\') {
                        i += 2;
                    } else if (line.compare(i, 3, open_triple) == 0) {
                        i += 3;
                        open_triple.clear();
                    } else {
                        ++i;
                    }
                    continue;
                }
                const char c = line[i];
                if (c == '#') break;
                if (c == '"' || c == '\'') {
                    const std::string triple(3, c);
                    if (line.compare(i, 3, triple) == 0) {
                        open_triple = triple;
                        i += 3;
                        continue;
                    }
                    std::size_t j = i + 1;
                    while (j < line.size() && line[j] != c) j += line[j] == '\\' ? 2 : 1;
                    if (j >= line.size()) {
                        if (!line.empty() && line.back() == '\\') {
                            throw ScanError("string continuation across lines is not supported");
                        }
                        throw ScanError("unterminated string at line " + std::to_string(ln + 1));
                    }
                    i = j + 1;
                    continue;
                }
                if (c == '(' || c == '[' || c == '{') ++depth;
                else if (c == ')' || c == ']' || c == '}') {
                    if (--depth < 0) throw ScanError("unbalanced bracket at line " + std::to_string(ln + 1));
                }
                ++i;
            }
            if (open_triple.empty() && !line.empty() && line.back() == '\\') continuation = true;
        }
        if (!open_triple.empty()) throw ScanError("unterminated triple-quoted string");
        if (depth != 0) throw ScanError("unclosed bracket");
        return out;
    }
};

inline std::unique_ptr<FunctionScanner> make_scanner(Language lang) {
    if (lang == Language::python) return std::make_unique<IndentScanner>();
    return std::make_unique<BraceScanner>(lang);
}

namespace detail {

inline void check_hunk(const std::vector<std::string>& lines, const LineRange& hunk) {
    if (!hunk.within(lines.size())) {
        throw InvalidArgument("hunk range outside file bounds");
    }
}

inline std::string range_text(const std::vector<std::string>& lines, const LineRange& r) {
    if (r.length == 0) return {};
    std::vector<std::string> sub(lines.begin() + static_cast<long>(r.start - 1),
                                 lines.begin() + static_cast<long>(r.last()));
    return join_lines(sub);
}

// An insertion point counts as inside a function only strictly after its
// first line and no later than its last line.
inline bool encloses(const LineRange& fn, const LineRange& hunk) {
    if (hunk.length == 0) return hunk.start > fn.start && hunk.start <= fn.last();
    return fn.contains(hunk);
}

}  // namespace detail

inline std::optional<ContextSpan> enclosing_function(std::string_view source, const LineRange& hunk,
                                                     const FunctionScanner& scanner) {
    const auto lines = split_lines(source);
    detail::check_hunk(lines, hunk);
    std::optional<LineRange> best;
    for (const auto& fn : scanner.functions(source)) {
        if (!detail::encloses(fn, hunk)) continue;
        if (!best || fn.start < best->start || (fn.start == best->start && fn.length > best->length)) {
            best = fn;
        }
    }
    if (!best) return std::nullopt;
    return ContextSpan{ContextKind::enclosing_function, *best, detail::range_text(lines, *best)};
}

// Outermost function definition enclosing `hunk`, or nullopt. Throws
// ScanError when the source cannot be scanned.
inline std::optional<ContextSpan> enclosing_function(std::string_view source, const LineRange& hunk,
                                                     Language lang) {
    return enclosing_function(source, hunk, *make_scanner(lang));
}

// Hunk plus up to three lines on each side, clamped to the file.
inline ContextSpan window_context(std::string_view source, const LineRange& hunk, std::size_t radius = 3) {
    const auto lines = split_lines(source);
    detail::check_hunk(lines, hunk);
    const std::size_t first = hunk.start > radius ? hunk.start - radius : 1;
    // For an insertion point the "hunk" occupies no line; the window ends
    // `radius` lines after the line the insertion sits before.
    std::size_t last = hunk.length == 0 ? hunk.start + radius - 1 : hunk.last() + radius;
    last = std::min(last, lines.size());
    LineRange r{first, last >= first ? last - first + 1 : 0};
    return ContextSpan{ContextKind::window, r, detail::range_text(lines, r)};
}

inline ContextSpan context_for_hunk(std::string_view source, const LineRange& hunk,
                                    const FunctionScanner& scanner,
                                    std::vector<std::string>* warnings = nullptr) {
    try {
        if (auto fn = enclosing_function(source, hunk, scanner)) return *std::move(fn);
    } catch (const ScanError& e) {
        if (warnings) warnings->push_back(std::string("function scan failed, using window context: ") + e.what());
    }
    return window_context(source, hunk);
}

inline ContextSpan context_for_hunk(std::string_view source, const LineRange& hunk, Language lang,
                                    std::vector<std::string>* warnings = nullptr) {
    return context_for_hunk(source, hunk, *make_scanner(lang), warnings);
}

}  // namespace mendkit
