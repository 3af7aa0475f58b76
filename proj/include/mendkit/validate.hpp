#pragma once

#include <algorithm>
#include <chrono>
#include <cstddef>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <string_view>
#include <tuple>
#include <vector>

#include "mendkit/errors.hpp"
#include "mendkit/line_range.hpp"
#include "mendkit/rank.hpp"
#include "mendkit/text.hpp"

namespace mendkit {

using TestId = std::string;
using Seconds = std::chrono::duration<double>;

enum class Outcome { pass, fail, error, timeout };

inline std::string_view to_string(Outcome o) {
    switch (o) {
        case Outcome::pass: return "pass";
        case Outcome::fail: return "fail";
        case Outcome::error: return "error";
        case Outcome::timeout: return "timeout";
    }
    return "?";
}

struct SuiteReport {
    bool compiled = false;
    std::map<TestId, Outcome> outcomes;  // empty unless compiled
    Seconds wall_time{0};
    bool timed_out = false;

    bool passed(const TestId& id) const {
        auto it = outcomes.find(id);
        return it != outcomes.end() && it->second == Outcome::pass;
    }
};

struct Baseline {
    std::set<TestId> passing;
    std::set<TestId> failing;  // trigger tests
    std::set<TestId> flaky;    // never executed during validation
};

// Hunk id -> replacement text. Hunks not mentioned keep their source text;
// an empty text deletes the hunk.
using PatchSet = std::map<std::string, std::string>;

// Runs a project's test suite with a patch set applied. Tests listed in
// `skip` must not run and must not be reported.
class TestHarness {
public:
    virtual ~TestHarness() = default;
    virtual SuiteReport execute(const PatchSet& patches, const std::set<TestId>& skip) = 0;
};

// Tests (restricted to `tests` unless it is empty) whose outcome is not the
// same in every one of `repeats` unpatched runs. A test missing from some
// run counts as changing.
inline std::set<TestId> detect_flaky(TestHarness& harness, const std::set<TestId>& tests, std::size_t repeats) {
    if (repeats < 2) throw InvalidArgument("flaky screening needs at least two runs");
    std::vector<SuiteReport> runs;
    runs.reserve(repeats);
    for (std::size_t i = 0; i < repeats; ++i) {
        runs.push_back(harness.execute({}, {}));
        if (!runs.back().compiled) throw SandboxError("unpatched program failed to build or run during flaky screening");
    }
    std::set<TestId> universe = tests;
    if (universe.empty()) {
        for (const auto& r : runs)
            for (const auto& [id, _] : r.outcomes) universe.insert(id);
    }
    std::set<TestId> flaky;
    for (const auto& id : universe) {
        std::optional<Outcome> first;
        bool missing = false;
        bool differs = false;
        for (const auto& r : runs) {
            auto it = r.outcomes.find(id);
            if (it == r.outcomes.end()) {
                missing = true;
                continue;
            }
            if (!first) first = it->second;
            else if (*first != it->second) differs = true;
        }
        if (differs || (missing && first)) flaky.insert(id);
    }
    return flaky;
}

// One unpatched run after screening. A program with no failing test has
// nothing to repair against and is rejected.
inline Baseline measure_baseline(TestHarness& harness, std::set<TestId> flaky) {
    const SuiteReport r = harness.execute({}, flaky);
    if (!r.compiled) throw SandboxError("unpatched program failed to build or run");
    Baseline b;
    b.flaky = std::move(flaky);
    for (const auto& [id, o] : r.outcomes) {
        if (b.flaky.count(id)) continue;
        (o == Outcome::pass ? b.passing : b.failing).insert(id);
    }
    if (b.failing.empty()) throw ManifestError("unpatched program has no failing non-flaky test");
    return b;
}

// Executes the suite for a patch set. Flaky tests are skipped and scrubbed;
// after a timeout every expected test without a result is marked timeout.
inline SuiteReport run_suite(TestHarness& harness, const PatchSet& patches, const Baseline& baseline) {
    SuiteReport r = harness.execute(patches, baseline.flaky);
    for (const auto& id : baseline.flaky) r.outcomes.erase(id);
    if (!r.compiled) {
        r.outcomes.clear();
        return r;
    }
    if (r.timed_out) {
        for (const auto* group : {&baseline.passing, &baseline.failing})
            for (const auto& id : *group) r.outcomes.try_emplace(id, Outcome::timeout);
    }
    return r;
}

inline bool is_plausible(const SuiteReport& report, const Baseline& baseline) {
    if (!report.compiled) return false;
    for (const auto& id : baseline.passing)
        if (!report.passed(id)) return false;
    for (const auto& id : baseline.failing)
        if (!report.passed(id)) return false;
    return true;
}

// Fixes at least one trigger test without breaking a passing one, yet is not
// plausible.
inline bool is_partial(const SuiteReport& report, const Baseline& baseline) {
    if (!report.compiled) return false;
    for (const auto& id : baseline.passing)
        if (!report.passed(id)) return false;
    const bool fixes_some = std::any_of(baseline.failing.begin(), baseline.failing.end(),
                                        [&](const TestId& id) { return report.passed(id); });
    return fixes_some && !is_plausible(report, baseline);
}

// Baseline after accepting a partial patch: its newly passing triggers move
// to the passing set.
inline Baseline advance_baseline(const Baseline& current, const SuiteReport& report) {
    Baseline next;
    next.flaky = current.flaky;
    next.passing = current.passing;
    for (const auto& id : current.failing) (report.passed(id) ? next.passing : next.failing).insert(id);
    return next;
}

// ---------------------------------------------------------------------------
// Search procedures
// ---------------------------------------------------------------------------

enum class RepairStatus { plausible, exhausted, error };

inline std::string_view to_string(RepairStatus s) {
    switch (s) {
        case RepairStatus::plausible: return "plausible";
        case RepairStatus::exhausted: return "exhausted";
        case RepairStatus::error: return "error";
    }
    return "?";
}

enum class SearchPhase { single, uniform, sequential, none };

inline std::string_view to_string(SearchPhase p) {
    switch (p) {
        case SearchPhase::single: return "single";
        case SearchPhase::uniform: return "uniform";
        case SearchPhase::sequential: return "sequential";
        case SearchPhase::none: return "none";
    }
    return "?";
}

struct RepairResult {
    RepairStatus status = RepairStatus::exhausted;
    PatchSet patchset;  // accepted replacements; hunks absent keep source
    std::size_t npc = 0;  // candidate suite executions
    std::optional<std::size_t> first_plausible_rank;  // validation position of the plausible patch
    SearchPhase found_in = SearchPhase::none;
    std::size_t uniform_tried = 0;
    std::size_t timeouts = 0;
    Seconds validation_time{0};
    std::vector<std::string> accepted_partials;  // hunk ids, in acceptance order
};

// Candidates for one hunk together with what orders it among its siblings.
struct HunkCandidates {
    std::string id;
    std::string file;
    std::size_t start = 0;
    std::vector<MergedCandidate> merged;
};

inline std::string patch_text(const MergedCandidate& m) { return m.is_deletion() ? std::string() : m.display; }

// Validates the ranked list top-down and stops at the first plausible patch.
inline RepairResult validate_single(const HunkCandidates& hunk, TestHarness& harness, const Baseline& baseline) {
    const auto t0 = std::chrono::steady_clock::now();
    RepairResult res;
    for (const auto& cand : hunk.merged) {
        PatchSet ps{{hunk.id, patch_text(cand)}};
        const SuiteReport r = run_suite(harness, ps, baseline);
        ++res.npc;
        if (r.timed_out) ++res.timeouts;
        if (is_plausible(r, baseline)) {
            res.status = RepairStatus::plausible;
            res.patchset = std::move(ps);
            res.first_plausible_rank = res.npc;
            res.found_in = SearchPhase::single;
            break;
        }
    }
    res.validation_time = std::chrono::steady_clock::now() - t0;
    return res;
}

// Hunks sorted by (file path, start line).
inline std::vector<const HunkCandidates*> hunk_order(const std::vector<HunkCandidates>& hunks) {
    std::vector<const HunkCandidates*> order;
    for (const auto& h : hunks) order.push_back(&h);
    std::stable_sort(order.begin(), order.end(), [](const HunkCandidates* a, const HunkCandidates* b) {
        return std::tie(a->file, a->start) < std::tie(b->file, b->start);
    });
    return order;
}

// Two phases. Uniform: every candidate present in all hunk lists is applied
// to all hunks at once. Sequential: hunks are visited in order; each tries
// its list against the current combination, keeps the first partial patch
// (which then becomes the new baseline) or falls back to its source text.
// The search stops at the first plausible combination.
inline RepairResult validate_multi(const std::vector<HunkCandidates>& hunks, TestHarness& harness,
                                   const Baseline& baseline) {
    if (hunks.size() < 2) throw InvalidArgument("multi-hunk validation needs at least two hunks");
    const auto t0 = std::chrono::steady_clock::now();
    RepairResult res;
    auto finish = [&](RepairResult& r) -> RepairResult {
        r.validation_time = std::chrono::steady_clock::now() - t0;
        return std::move(r);
    };

    std::vector<std::vector<MergedCandidate>> lists;
    for (const auto& h : hunks) lists.push_back(h.merged);
    const auto uniform = uniform_candidates(lists);
    for (const auto& u : uniform) {
        PatchSet ps;
        for (const auto& h : hunks) ps[h.id] = u.normalized.empty() ? std::string() : u.display;
        const SuiteReport r = run_suite(harness, ps, baseline);
        ++res.npc;
        ++res.uniform_tried;
        if (r.timed_out) ++res.timeouts;
        if (is_plausible(r, baseline)) {
            res.status = RepairStatus::plausible;
            res.patchset = std::move(ps);
            res.first_plausible_rank = res.npc;
            res.found_in = SearchPhase::uniform;
            return finish(res);
        }
    }

    Baseline current = baseline;
    PatchSet chosen;
    for (const HunkCandidates* h : hunk_order(hunks)) {
        for (const auto& cand : h->merged) {
            PatchSet ps = chosen;
            ps[h->id] = patch_text(cand);
            const SuiteReport r = run_suite(harness, ps, current);
            ++res.npc;
            if (r.timed_out) ++res.timeouts;
            if (is_plausible(r, current)) {
                res.status = RepairStatus::plausible;
                res.patchset = std::move(ps);
                res.first_plausible_rank = res.npc;
                res.found_in = SearchPhase::sequential;
                return finish(res);
            }
            if (is_partial(r, current)) {
                chosen = std::move(ps);
                current = advance_baseline(current, r);
                res.accepted_partials.push_back(h->id);
                break;
            }
        }
    }
    // Every plausible combination returns above, so the last accepted partial
    // (or the untouched source) is not plausible.
    res.status = RepairStatus::exhausted;
    res.patchset = std::move(chosen);
    return finish(res);
}

// Dispatches on hunk count.
inline RepairResult validate_bug(const std::vector<HunkCandidates>& hunks, TestHarness& harness,
                                 const Baseline& baseline) {
    if (hunks.empty()) throw InvalidArgument("bug has no hunks");
    if (hunks.size() == 1) return validate_single(hunks.front(), harness, baseline);
    return validate_multi(hunks, harness, baseline);
}

}  // namespace mendkit
