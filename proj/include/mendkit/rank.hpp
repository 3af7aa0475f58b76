#pragma once

#include <algorithm>
#include <cstddef>
#include <limits>
#include <map>
#include <string>
#include <unordered_set>
#include <vector>

#include "mendkit/errors.hpp"
#include "mendkit/generate.hpp"
#include "mendkit/text.hpp"

namespace mendkit {

struct Provenance {
    std::size_t checkpoint = 0;
    std::size_t rank = 0;
    double score = 0.0;

    friend bool operator==(const Provenance&, const Provenance&) = default;
};

struct MergedCandidate {
    std::string normalized;
    std::string display;  // spelling of the highest-ranked member
    std::size_t best_rank = 0;  // 0 for a deletion patch nobody generated
    double best_score = -std::numeric_limits<double>::infinity();
    std::vector<Provenance> provenance;  // all members, in merge order

    bool is_deletion() const { return normalized.empty(); }

    friend bool operator==(const MergedCandidate&, const MergedCandidate&) = default;
};

// Single ranked list for one hunk:
//   1. flatten the k beams, order by beam rank, then score (desc), then checkpoint;
//   2. drop candidates equal to the source hunk (whitespace-normalized);
//   3. collapse normalized duplicates into the first occurrence;
//   4. for a non-empty source hunk, put the deletion patch first.
inline std::vector<MergedCandidate> merge_candidates(const std::vector<std::vector<CandidatePatch>>& per_checkpoint,
                                                     std::string_view source_hunk) {
    std::vector<const CandidatePatch*> flat;
    for (const auto& beam : per_checkpoint)
        for (const auto& c : beam) flat.push_back(&c);
    std::stable_sort(flat.begin(), flat.end(), [](const CandidatePatch* a, const CandidatePatch* b) {
        if (a->rank != b->rank) return a->rank < b->rank;
        if (a->score != b->score) return a->score > b->score;
        return a->checkpoint < b->checkpoint;
    });

    const std::string source_norm = normalize_ws(source_hunk);
    std::vector<MergedCandidate> merged;
    std::map<std::string, std::size_t> slot;
    for (const CandidatePatch* c : flat) {
        const std::string norm = normalize_ws(c->text);
        if (norm == source_norm) continue;
        auto [it, inserted] = slot.emplace(norm, merged.size());
        if (inserted) {
            MergedCandidate m;
            m.normalized = norm;
            m.display = c->text;
            m.best_rank = c->rank;
            m.best_score = c->score;
            merged.push_back(std::move(m));
        }
        merged[it->second].provenance.push_back({c->checkpoint, c->rank, c->score});
    }

    if (!source_norm.empty()) {
        auto del = slot.find("");
        if (del == slot.end()) {
            MergedCandidate m;
            merged.insert(merged.begin(), std::move(m));
        } else {
            MergedCandidate m = std::move(merged[del->second]);
            m.display.clear();
            merged.erase(merged.begin() + static_cast<long>(del->second));
            merged.insert(merged.begin(), std::move(m));
        }
    }
    return merged;
}

struct UniformCandidate {
    std::string normalized;
    std::string display;     // spelling from the first hunk's list
    std::size_t rank_sum = 0;  // sum of 1-based positions across hunk lists
    double max_score = -std::numeric_limits<double>::infinity();

    friend bool operator==(const UniformCandidate&, const UniformCandidate&) = default;
};

// Candidates present in every hunk's merged list, ordered by rank_sum
// (ascending), then max_score (descending), then normalized text.
inline std::vector<UniformCandidate> uniform_candidates(const std::vector<std::vector<MergedCandidate>>& per_hunk) {
    if (per_hunk.size() < 2) throw InvalidArgument("uniform candidates need at least two hunks");
    std::map<std::string, UniformCandidate> acc;
    std::map<std::string, std::size_t> seen_in;
    for (std::size_t h = 0; h < per_hunk.size(); ++h) {
        for (std::size_t pos = 0; pos < per_hunk[h].size(); ++pos) {
            const auto& m = per_hunk[h][pos];
            auto& u = acc[m.normalized];
            if (h == 0) {
                u.normalized = m.normalized;
                u.display = m.display;
            }
            u.rank_sum += pos + 1;
            u.max_score = std::max(u.max_score, m.best_score);
            ++seen_in[m.normalized];
        }
    }
    std::vector<UniformCandidate> out;
    for (auto& [norm, u] : acc) {
        if (seen_in[norm] == per_hunk.size()) out.push_back(std::move(u));
    }
    std::sort(out.begin(), out.end(), [](const UniformCandidate& a, const UniformCandidate& b) {
        if (a.rank_sum != b.rank_sum) return a.rank_sum < b.rank_sum;
        if (a.max_score != b.max_score) return a.max_score > b.max_score;
        return a.normalized < b.normalized;
    });
    return out;
}

}  // namespace mendkit
