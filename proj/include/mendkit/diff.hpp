#pragma once

#include <algorithm>
#include <charconv>
#include <cstddef>
#include <sstream>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

#include "mendkit/errors.hpp"
#include "mendkit/line_range.hpp"
#include "mendkit/text.hpp"

namespace mendkit::diff {

// A zero-context change region: `old_range` in the old file is replaced by
// `new_range` of the new file.
struct Hunk {
    LineRange old_range;
    LineRange new_range;

    friend bool operator==(const Hunk&, const Hunk&) = default;
};

enum class Op : char { equal = ' ', remove = '-', insert = '+' };

namespace detail {

inline std::vector<int> intern(const std::vector<std::string>& lines,
                               std::unordered_map<std::string, int>& ids) {
    std::vector<int> out;
    out.reserve(lines.size());
    for (const auto& l : lines) {
        auto [it, _] = ids.emplace(l, static_cast<int>(ids.size()));
        out.push_back(it->second);
    }
    return out;
}

// Myers O(ND) shortest edit script between a and b.
inline std::vector<Op> myers(const std::vector<int>& a, const std::vector<int>& b) {
    const long n = static_cast<long>(a.size());
    const long m = static_cast<long>(b.size());
    const long max = n + m;
    const long offset = max + 1;
    std::vector<long> v(2 * max + 3, 0);
    std::vector<std::vector<long>> trace;

    long found_d = -1;
    for (long d = 0; d <= max && found_d < 0; ++d) {
        // Diagonals -d-1..d+1 are all that backtracking reads for step d.
        trace.emplace_back(v.begin() + (offset - d - 1), v.begin() + (offset + d + 2));
        for (long k = -d; k <= d; k += 2) {
            long x;
            if (k == -d || (k != d && v[offset + k - 1] < v[offset + k + 1])) {
                x = v[offset + k + 1];
            } else {
                x = v[offset + k - 1] + 1;
            }
            long y = x - k;
            while (x < n && y < m && a[x] == b[y]) {
                ++x;
                ++y;
            }
            v[offset + k] = x;
            if (x >= n && y >= m) {
                found_d = d;
                break;
            }
        }
    }

    std::vector<Op> ops;
    long x = n;
    long y = m;
    for (long d = found_d; d > 0; --d) {
        const auto& vd = trace[d];
        auto at = [&](long kk) { return vd[kk + d + 1]; };
        const long k = x - y;
        long prev_k;
        if (k == -d || (k != d && at(k - 1) < at(k + 1))) {
            prev_k = k + 1;
        } else {
            prev_k = k - 1;
        }
        const long prev_x = at(prev_k);
        const long prev_y = prev_x - prev_k;
        while (x > prev_x && y > prev_y) {
            ops.push_back(Op::equal);
            --x;
            --y;
        }
        if (x == prev_x) {
            ops.push_back(Op::insert);
            --y;
        } else {
            ops.push_back(Op::remove);
            --x;
        }
    }
    while (x > 0 && y > 0) {
        ops.push_back(Op::equal);
        --x;
        --y;
    }
    std::reverse(ops.begin(), ops.end());
    return ops;
}

}  // namespace detail

// Edit script turning `old_lines` into `new_lines`: one Op per old/new line.
inline std::vector<Op> edit_script(const std::vector<std::string>& old_lines,
                                   const std::vector<std::string>& new_lines) {
    std::size_t prefix = 0;
    while (prefix < old_lines.size() && prefix < new_lines.size() &&
           old_lines[prefix] == new_lines[prefix]) {
        ++prefix;
    }
    std::size_t suffix = 0;
    while (suffix < old_lines.size() - prefix && suffix < new_lines.size() - prefix &&
           old_lines[old_lines.size() - 1 - suffix] == new_lines[new_lines.size() - 1 - suffix]) {
        ++suffix;
    }
    std::unordered_map<std::string, int> ids;
    std::vector<std::string> mid_old(old_lines.begin() + prefix, old_lines.end() - suffix);
    std::vector<std::string> mid_new(new_lines.begin() + prefix, new_lines.end() - suffix);
    const auto a = detail::intern(mid_old, ids);
    const auto b = detail::intern(mid_new, ids);

    std::vector<Op> ops(prefix, Op::equal);
    const auto mid = detail::myers(a, b);
    ops.insert(ops.end(), mid.begin(), mid.end());
    ops.insert(ops.end(), suffix, Op::equal);
    return ops;
}

// Zero-context hunks in file order.
inline std::vector<Hunk> line_hunks(const std::vector<std::string>& old_lines,
                                    const std::vector<std::string>& new_lines) {
    const auto ops = edit_script(old_lines, new_lines);
    std::vector<Hunk> hunks;
    std::size_t oi = 1;
    std::size_t ni = 1;
    std::size_t i = 0;
    while (i < ops.size()) {
        if (ops[i] == Op::equal) {
            ++oi;
            ++ni;
            ++i;
            continue;
        }
        Hunk h;
        h.old_range.start = oi;
        h.new_range.start = ni;
        while (i < ops.size() && ops[i] != Op::equal) {
            if (ops[i] == Op::remove) {
                ++h.old_range.length;
                ++oi;
            } else {
                ++h.new_range.length;
                ++ni;
            }
            ++i;
        }
        hunks.push_back(h);
    }
    return hunks;
}

inline std::vector<std::string> slice(const std::vector<std::string>& lines, const LineRange& r) {
    if (r.length == 0) return {};
    return {lines.begin() + static_cast<long>(r.start - 1),
            lines.begin() + static_cast<long>(r.last())};
}

// ---------------------------------------------------------------------------
// Unified diff
// ---------------------------------------------------------------------------

struct UnifiedLine {
    Op op = Op::equal;
    std::string text;
};

struct UnifiedHunk {
    // Header numbers exactly as written: for a zero-length side, start is the
    // line after which the change happens.
    std::size_t old_start = 0;
    std::size_t old_len = 0;
    std::size_t new_start = 0;
    std::size_t new_len = 0;
    std::vector<UnifiedLine> lines;

    std::vector<std::string> old_side() const {
        std::vector<std::string> out;
        for (const auto& l : lines)
            if (l.op != Op::insert) out.push_back(l.text);
        return out;
    }
    std::vector<std::string> new_side() const {
        std::vector<std::string> out;
        for (const auto& l : lines)
            if (l.op != Op::remove) out.push_back(l.text);
        return out;
    }
};

struct FilePatch {
    std::string old_path;
    std::string new_path;
    std::vector<UnifiedHunk> hunks;
};

struct PatchDocument {
    std::string preamble;  // text before the first file header, e.g. a commit message
    std::vector<FilePatch> files;
};

inline std::string strip_path_prefix(std::string_view p) {
    // "a/src/x.c\t2020-01-01" -> "src/x.c"
    auto tab = p.find('\t');
    if (tab != std::string_view::npos) p = p.substr(0, tab);
    p = trim(p);
    if (starts_with(p, "a/") || starts_with(p, "b/")) p.remove_prefix(2);
    return std::string(p);
}

// Renders one file's change with `context` lines of context around each
// change region. Returns an empty string when the files are identical.
inline std::string render_unified(const std::vector<std::string>& old_lines,
                                  const std::vector<std::string>& new_lines,
                                  std::string_view old_name, std::string_view new_name,
                                  std::size_t context = 3) {
    const auto hunks = line_hunks(old_lines, new_lines);
    if (hunks.empty()) return {};

    std::ostringstream out;
    out << "--- " << old_name << "\n+++ " << new_name << "\n";

    std::size_t i = 0;
    while (i < hunks.size()) {
        // Group hunks whose context windows touch.
        std::size_t j = i;
        while (j + 1 < hunks.size()) {
            const auto& cur = hunks[j];
            const std::size_t cur_old_end = cur.old_range.start + cur.old_range.length;  // first line after
            if (hunks[j + 1].old_range.start <= cur_old_end + 2 * context) {
                ++j;
            } else {
                break;
            }
        }
        const Hunk& first = hunks[i];
        const Hunk& last = hunks[j];
        const std::size_t lead = std::min(context, first.old_range.start - 1);
        const std::size_t old_begin = first.old_range.start - lead;  // 1-based
        const std::size_t old_after = last.old_range.start + last.old_range.length;
        const std::size_t trail = std::min(context, old_lines.size() + 1 - old_after);
        const std::size_t old_end = old_after + trail;  // exclusive, 1-based
        const std::size_t new_begin = first.new_range.start - lead;

        std::vector<UnifiedLine> body;
        std::size_t o = old_begin;
        std::size_t nn = new_begin;
        for (std::size_t h = i; h <= j; ++h) {
            const Hunk& hk = hunks[h];
            while (o < hk.old_range.start) {
                body.push_back({Op::equal, old_lines[o - 1]});
                ++o;
                ++nn;
            }
            for (std::size_t k = 0; k < hk.old_range.length; ++k) body.push_back({Op::remove, old_lines[o - 1 + k]});
            for (std::size_t k = 0; k < hk.new_range.length; ++k) body.push_back({Op::insert, new_lines[nn - 1 + k]});
            o += hk.old_range.length;
            nn += hk.new_range.length;
        }
        while (o < old_end) {
            body.push_back({Op::equal, old_lines[o - 1]});
            ++o;
        }

        std::size_t old_len = 0;
        std::size_t new_len = 0;
        for (const auto& l : body) {
            if (l.op != Op::insert) ++old_len;
            if (l.op != Op::remove) ++new_len;
        }
        const std::size_t old_hdr = old_len == 0 ? old_begin - 1 : old_begin;
        const std::size_t new_hdr = new_len == 0 ? new_begin - 1 : new_begin;
        out << "@@ -" << old_hdr << "," << old_len << " +" << new_hdr << "," << new_len << " @@\n";
        for (const auto& l : body) out << static_cast<char>(l.op) << l.text << "\n";
        i = j + 1;
    }
    return out.str();
}

namespace detail {

inline bool parse_range(std::string_view s, std::size_t& start, std::size_t& len) {
    auto comma = s.find(',');
    auto num = [](std::string_view t, std::size_t& v) {
        auto [p, ec] = std::from_chars(t.data(), t.data() + t.size(), v);
        return ec == std::errc() && p == t.data() + t.size();
    };
    if (comma == std::string_view::npos) {
        len = 1;
        return num(s, start);
    }
    return num(s.substr(0, comma), start) && num(s.substr(comma + 1), len);
}

}  // namespace detail

inline PatchDocument parse_unified(std::string_view text) {
    PatchDocument doc;
    const auto lines = split_lines(text);
    std::size_t i = 0;
    std::vector<std::string> preamble;
    while (i < lines.size() && !(starts_with(lines[i], "--- ") && i + 1 < lines.size() &&
                                 starts_with(lines[i + 1], "+++ "))) {
        preamble.push_back(lines[i]);
        ++i;
    }
    doc.preamble = join_lines(preamble);

    while (i < lines.size()) {
        if (!(starts_with(lines[i], "--- ") && i + 1 < lines.size() && starts_with(lines[i + 1], "+++ "))) {
            ++i;  // git extended headers, "diff --git", index lines
            continue;
        }
        FilePatch fp;
        fp.old_path = strip_path_prefix(std::string_view(lines[i]).substr(4));
        fp.new_path = strip_path_prefix(std::string_view(lines[i + 1]).substr(4));
        i += 2;
        while (i < lines.size() && starts_with(lines[i], "@@ ")) {
            std::string_view hdr = lines[i];
            const auto minus = hdr.find('-');
            const auto plus = hdr.find(" +", minus);
            const auto close = hdr.find(" @@", plus);
            if (minus == std::string_view::npos || plus == std::string_view::npos ||
                close == std::string_view::npos) {
                throw InvalidArgument("malformed hunk header: " + std::string(hdr));
            }
            UnifiedHunk h;
            if (!detail::parse_range(hdr.substr(minus + 1, plus - minus - 1), h.old_start, h.old_len) ||
                !detail::parse_range(hdr.substr(plus + 2, close - plus - 2), h.new_start, h.new_len)) {
                throw InvalidArgument("malformed hunk header: " + std::string(hdr));
            }
            ++i;
            std::size_t seen_old = 0;
            std::size_t seen_new = 0;
            while (i < lines.size() && (seen_old < h.old_len || seen_new < h.new_len)) {
                const std::string& l = lines[i];
                if (starts_with(l, "\\")) {
                    ++i;
                    continue;
                }
                const char tag = l.empty() ? ' ' : l[0];
                const std::string body = l.empty() ? std::string() : l.substr(1);
                if (tag == ' ') {
                    h.lines.push_back({Op::equal, body});
                    ++seen_old;
                    ++seen_new;
                } else if (tag == '-') {
                    h.lines.push_back({Op::remove, body});
                    ++seen_old;
                } else if (tag == '+') {
                    h.lines.push_back({Op::insert, body});
                    ++seen_new;
                } else {
                    throw InvalidArgument("unexpected line in hunk body: " + l);
                }
                ++i;
            }
            if (seen_old != h.old_len || seen_new != h.new_len) {
                throw InvalidArgument("truncated hunk in " + fp.new_path);
            }
            while (i < lines.size() && starts_with(lines[i], "\\")) ++i;
            fp.hunks.push_back(std::move(h));
        }
        doc.files.push_back(std::move(fp));
    }
    return doc;
}

// Applies one file's hunks at their exact header positions; any mismatch of
// context or removed lines is a conflict.
inline std::vector<std::string> apply(const std::vector<std::string>& old_lines, const FilePatch& fp) {
    std::vector<std::string> out;
    std::size_t cursor = 0;  // 0-based index of next unread old line
    for (const auto& h : fp.hunks) {
        std::size_t begin = h.old_len == 0 ? h.old_start : h.old_start - 1;
        if (begin < cursor || begin > old_lines.size()) {
            throw PatchConflict("hunk out of order or out of range in " + fp.old_path);
        }
        out.insert(out.end(), old_lines.begin() + static_cast<long>(cursor),
                   old_lines.begin() + static_cast<long>(begin));
        std::size_t o = begin;
        for (const auto& l : h.lines) {
            if (l.op == Op::insert) {
                out.push_back(l.text);
                continue;
            }
            if (o >= old_lines.size() || old_lines[o] != l.text) {
                throw PatchConflict("context mismatch at line " + std::to_string(o + 1) + " of " + fp.old_path);
            }
            if (l.op == Op::equal) out.push_back(l.text);
            ++o;
        }
        cursor = o;
    }
    out.insert(out.end(), old_lines.begin() + static_cast<long>(cursor), old_lines.end());
    return out;
}

}  // namespace mendkit::diff
