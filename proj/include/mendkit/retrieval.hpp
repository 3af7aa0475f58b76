#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <fstream>
#include <map>
#include <memory>
#include <string>
#include <string_view>
#include <unordered_set>
#include <utility>
#include <vector>

#include <nlohmann/json.hpp>

#include "mendkit/context.hpp"
#include "mendkit/errors.hpp"
#include "mendkit/text.hpp"

namespace mendkit {

inline constexpr std::size_t kDefaultRetrievedLines = 5;
inline constexpr double kDefaultSimilarityThreshold = 0.5;

// Sparse L2-normalized vector, sorted by dimension key.
struct LineVector {
    std::vector<std::pair<std::string, double>> dims;

    bool empty() const { return dims.empty(); }

    double norm() const {
        double s = 0.0;
        for (const auto& [_, w] : dims) s += w * w;
        return std::sqrt(s);
    }

    friend bool operator==(const LineVector&, const LineVector&) = default;
};

inline double dot(const LineVector& a, const LineVector& b) {
    double s = 0.0;
    auto i = a.dims.begin();
    auto j = b.dims.begin();
    while (i != a.dims.end() && j != b.dims.end()) {
        if (i->first < j->first) {
            ++i;
        } else if (j->first < i->first) {
            ++j;
        } else {
            s += i->second * j->second;
            ++i;
            ++j;
        }
    }
    return s;
}

// Cosine of two normalized vectors, clamped to [0, 1]. Zero when either is empty.
inline double cosine(const LineVector& a, const LineVector& b) {
    if (a.empty() || b.empty()) return 0.0;
    return std::clamp(dot(a, b), 0.0, 1.0);
}

class Embedder {
public:
    virtual ~Embedder() = default;
    // Throws InvalidArgument on text that is empty after whitespace normalization.
    virtual LineVector embed(std::string_view text) const = 0;
};

// Term frequency over lowercased alphanumeric tokens, L2-normalized.
class TermFrequencyEmbedder final : public Embedder {
public:
    LineVector embed(std::string_view text) const override {
        if (normalize_ws(text).empty()) throw InvalidArgument("cannot embed empty text");
        std::map<std::string, double> tf;
        std::string cur;
        auto flush = [&] {
            if (!cur.empty()) tf[cur] += 1.0;
            cur.clear();
        };
        for (char c : text) {
            if (is_alnum(c)) {
                cur.push_back(static_cast<char>(std::tolower(static_cast<unsigned char>(c))));
            } else {
                flush();
            }
        }
        flush();
        LineVector v;
        double norm = 0.0;
        for (const auto& [_, w] : tf) norm += w * w;
        norm = std::sqrt(norm);
        for (const auto& [k, w] : tf) v.dims.emplace_back(k, w / norm);
        return v;
    }
};

struct IndexEntry {
    std::string text;  // whitespace-normalized line
    LineVector vector;
    std::size_t line_no = 0;
};

struct LineIndex {
    std::string file_id;
    std::vector<IndexEntry> entries;
};

struct RetrievedLine {
    std::string text;
    double similarity = 0.0;
    std::size_t line_no = 0;
};

// Indexes the lines of `source` outside `excluded`. Empty and punctuation-only
// lines, normalized duplicates (first kept) and lines equal to the normalized
// hunk text are dropped.
inline LineIndex build_line_index(std::string_view source, const ContextSpan& excluded, std::string_view hunk_text,
                                  const Embedder& embedder, std::string file_id = {}) {
    LineIndex index;
    index.file_id = std::move(file_id);
    const auto lines = split_lines(source);
    const std::string hunk_norm = normalize_ws(hunk_text);
    std::unordered_set<std::string> seen;
    for (std::size_t i = 0; i < lines.size(); ++i) {
        const std::size_t line_no = i + 1;
        if (excluded.range.length > 0 && line_no >= excluded.range.start && line_no <= excluded.range.last()) {
            continue;
        }
        if (is_punctuation_only(lines[i])) continue;
        std::string norm = normalize_ws(lines[i]);
        if (!seen.insert(norm).second) continue;
        if (norm == hunk_norm) continue;
        LineVector v = embedder.embed(norm);
        index.entries.push_back({std::move(norm), std::move(v), line_no});
    }
    return index;
}

// Up to `r` entries with cosine >= threshold to the hunk, best first, ties by
// ascending line number. Empty hunks retrieve nothing.
inline std::vector<RetrievedLine> retrieve(std::string_view hunk_text, const LineIndex& index, std::size_t r,
                                           double threshold, const Embedder& embedder) {
    if (threshold < 0.0 || threshold > 1.0) throw InvalidArgument("similarity threshold must lie in [0, 1]");
    const std::string hunk_norm = normalize_ws(hunk_text);
    if (hunk_norm.empty() || r == 0) return {};
    const LineVector q = embedder.embed(hunk_norm);

    // Rounding must not push an exact-threshold match (e.g. 1/sqrt(2)^2) below it.
    constexpr double kSlack = 1e-12;
    std::vector<RetrievedLine> hits;
    for (const auto& e : index.entries) {
        if (e.text == hunk_norm) continue;
        const double sim = cosine(q, e.vector);
        if (sim + kSlack >= threshold) hits.push_back({e.text, std::max(sim, threshold), e.line_no});
    }
    auto better = [](const RetrievedLine& a, const RetrievedLine& b) {
        if (a.similarity != b.similarity) return a.similarity > b.similarity;
        return a.line_no < b.line_no;
    };
    if (hits.size() > r) {
        std::partial_sort(hits.begin(), hits.begin() + static_cast<long>(r), hits.end(), better);
        hits.resize(r);
    } else {
        std::sort(hits.begin(), hits.end(), better);
    }
    return hits;
}

// ---------------------------------------------------------------------------
// On-disk index cache: a header record followed by one JSON record per entry.
// ---------------------------------------------------------------------------

inline constexpr std::string_view kIndexCacheFormat = "mendkit-line-index";
inline constexpr int kIndexCacheVersion = 1;

inline void save_index(const LineIndex& index, const std::string& path) {
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw Error("cannot write index cache: " + path);
    nlohmann::json header = {{"format", kIndexCacheFormat},
                             {"version", kIndexCacheVersion},
                             {"file_id", index.file_id},
                             {"entries", index.entries.size()}};
    out << header.dump() << "\n";
    for (const auto& e : index.entries) {
        nlohmann::json weights = nlohmann::json::array();
        for (const auto& [k, w] : e.vector.dims) weights.push_back({k, w});
        nlohmann::json rec = {{"file_id", index.file_id}, {"line", e.line_no}, {"text", e.text}, {"weights", weights}};
        out << rec.dump() << "\n";
    }
}

// Returns nullopt when the file is missing, of another version, or damaged.
inline std::optional<LineIndex> load_index(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) return std::nullopt;
    std::string line;
    try {
        if (!std::getline(in, line)) return std::nullopt;
        const auto header = nlohmann::json::parse(line);
        if (header.value("format", "") != kIndexCacheFormat || header.value("version", 0) != kIndexCacheVersion) {
            return std::nullopt;
        }
        LineIndex index;
        index.file_id = header.at("file_id").get<std::string>();
        const auto count = header.at("entries").get<std::size_t>();
        while (std::getline(in, line)) {
            if (line.empty()) continue;
            const auto rec = nlohmann::json::parse(line);
            IndexEntry e;
            e.line_no = rec.at("line").get<std::size_t>();
            e.text = rec.at("text").get<std::string>();
            for (const auto& w : rec.at("weights")) {
                e.vector.dims.emplace_back(w.at(0).get<std::string>(), w.at(1).get<double>());
            }
            index.entries.push_back(std::move(e));
        }
        if (index.entries.size() != count) return std::nullopt;
        return index;
    } catch (const nlohmann::json::exception&) {
        return std::nullopt;
    }
}

}  // namespace mendkit
