// Acceptance checks. Prints one PASS/FAIL line per criterion.
//
//   mendkit_acceptance [--only N]
//
// Exit status: 0 when every selected criterion passes, 77 when the only
// failures are criteria known to be unattainable as stated, 1 otherwise.

#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <functional>
#include <random>
#include <regex>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <nlohmann/json.hpp>

#include "../support/truth_table.hpp"
#include "mendkit/encode.hpp"
#include "mendkit/harness.hpp"
#include "mendkit/manifest.hpp"
#include "mendkit/pipeline.hpp"
#include "mendkit/rank.hpp"
#include "mendkit/retrieval.hpp"
#include "mendkit/validate.hpp"

using namespace mendkit;
using mendkit::testing::FunctionHarness;
using mendkit::testing::random_instance;
namespace fs = std::filesystem;
using nlohmann::json;
using Clock = std::chrono::steady_clock;

namespace {

const fs::path kFixtures = MENDKIT_FIXTURE_DIR;

struct Verdict {
    bool pass = false;
    std::string detail;
};

double seconds_since(Clock::time_point t0) {
    return std::chrono::duration<double>(Clock::now() - t0).count();
}

// ---------------------------------------------------------------------------
// 1. npc bound on random multi-hunk instances
// ---------------------------------------------------------------------------

Verdict search_space_bound() {
    const auto t0 = Clock::now();
    std::size_t ok = 0, total = 0, plausible = 0, worst_npc = 0;
    double product_sum = 0, npc_sum = 0;
    for (unsigned seed = 1; seed <= 1000; ++seed) {
        std::mt19937 rng(seed);
        const std::size_t h = 1 + rng() % 4;
        auto inst = random_instance(rng, h, 20, 24);
        FunctionHarness harness([&](const PatchSet& ps) { return inst.table.evaluate(ps); });
        const Baseline b = inst.table.baseline();
        const auto res = validate_bug(inst.hunks, harness, b);

        std::vector<std::vector<MergedCandidate>> lists;
        std::size_t bound = 0;
        double product = 1;
        for (const auto& hc : inst.hunks) {
            lists.push_back(hc.merged);
            bound += hc.merged.size();
            product *= static_cast<double>(hc.merged.size() + 1);
        }
        if (h > 1) bound += uniform_candidates(lists).size();
        ++total;
        if (res.npc <= bound && res.npc == harness.runs.size()) ++ok;
        if (res.status == RepairStatus::plausible) ++plausible;
        worst_npc = std::max(worst_npc, res.npc);
        npc_sum += static_cast<double>(res.npc);
        product_sum += product;
    }
    const double secs = seconds_since(t0);
    char buf[256];
    std::snprintf(buf, sizeof buf,
                  "%zu/%zu within bound, %.2fs; mean npc %.1f (max %zu) vs mean product space %.0f; %zu plausible",
                  ok, total, secs, npc_sum / total, worst_npc, product_sum / total, plausible);
    return {ok == total && secs < 60.0, buf};
}

// ---------------------------------------------------------------------------
// 2. soundness against brute-force product-space search
// ---------------------------------------------------------------------------

bool any_plausible_combination(const mendkit::testing::RandomInstance& inst, const Baseline& b) {
    // Each hunk keeps its source or takes one of its candidates.
    std::vector<std::size_t> choice(inst.hunks.size(), 0);
    while (true) {
        PatchSet ps;
        for (std::size_t i = 0; i < choice.size(); ++i)
            if (choice[i] > 0) ps[inst.hunks[i].id] = inst.hunks[i].merged[choice[i] - 1].display;
        const SuiteReport r = inst.table.evaluate(ps);
        if (is_plausible(r, b)) return true;
        std::size_t i = 0;
        while (i < choice.size() && ++choice[i] > inst.hunks[i].merged.size()) choice[i++] = 0;
        if (i == choice.size()) return false;
    }
}

Verdict exhaustive_soundness() {
    std::size_t unsound = 0, found = 0, oracle_found = 0, missed = 0;
    for (unsigned seed = 1; seed <= 500; ++seed) {
        std::mt19937 rng(100000 + seed);
        const std::size_t h = 1 + rng() % 3;
        auto inst = random_instance(rng, h, 5, 6);
        FunctionHarness harness([&](const PatchSet& ps) { return inst.table.evaluate(ps); });
        const Baseline b = inst.table.baseline();
        const auto res = validate_bug(inst.hunks, harness, b);
        const bool oracle = any_plausible_combination(inst, b);
        if (oracle) ++oracle_found;
        if (res.status == RepairStatus::plausible) {
            ++found;
            if (!is_plausible(inst.table.evaluate(res.patchset), b)) ++unsound;
        } else if (oracle) {
            ++missed;
        }
    }
    char buf[256];
    std::snprintf(buf, sizeof buf,
                  "%zu unsound of %zu plausible results; divergence: oracle finds %zu, procedure misses %zu", unsound,
                  found, oracle_found, missed);
    return {unsound == 0, buf};
}

// ---------------------------------------------------------------------------
// 3. merge rules against a brute-force reference
// ---------------------------------------------------------------------------

std::string collapse_ws(const std::string& s) {
    std::string out;
    bool pending = false;
    for (char c : s) {
        if (c == ' ' || c == '\t' || c == '\n' || c == '\r' || c == '\f' || c == '\v') {
            pending = !out.empty();
        } else {
            if (pending) out.push_back(' ');
            pending = false;
            out.push_back(c);
        }
    }
    return out;
}

// Groups by normalized text; each group's representative is its minimum
// under (rank, -score, checkpoint); groups are emitted in representative
// order. Quadratic on purpose.
std::vector<MergedCandidate> reference_merge(const std::vector<std::vector<CandidatePatch>>& beams,
                                             const std::string& source) {
    std::vector<CandidatePatch> all;
    for (const auto& b : beams)
        for (const auto& c : b)
            if (collapse_ws(c.text) != collapse_ws(source)) all.push_back(c);
    auto before = [](const CandidatePatch& a, const CandidatePatch& b) {
        if (a.rank != b.rank) return a.rank < b.rank;
        if (a.score != b.score) return a.score > b.score;
        return a.checkpoint < b.checkpoint;
    };
    std::vector<bool> used(all.size(), false);
    std::vector<MergedCandidate> out;
    while (true) {
        std::size_t best = all.size();
        for (std::size_t i = 0; i < all.size(); ++i)
            if (!used[i] && (best == all.size() || before(all[i], all[best]))) best = i;
        if (best == all.size()) break;
        MergedCandidate m;
        m.normalized = collapse_ws(all[best].text);
        m.display = all[best].text;
        m.best_rank = all[best].rank;
        m.best_score = all[best].score;
        // Members in order, selection-sort style.
        while (true) {
            std::size_t next = all.size();
            for (std::size_t i = 0; i < all.size(); ++i)
                if (!used[i] && collapse_ws(all[i].text) == m.normalized &&
                    (next == all.size() || before(all[i], all[next])))
                    next = i;
            if (next == all.size()) break;
            used[next] = true;
            m.provenance.push_back({all[next].checkpoint, all[next].rank, all[next].score});
        }
        out.push_back(std::move(m));
    }
    if (!collapse_ws(source).empty()) {
        MergedCandidate del;
        for (std::size_t i = 0; i < out.size(); ++i) {
            if (out[i].normalized.empty()) {
                del = out[i];
                del.display.clear();
                out.erase(out.begin() + static_cast<long>(i));
                break;
            }
        }
        out.insert(out.begin(), del);
    }
    return out;
}

std::string serialize(const std::vector<MergedCandidate>& v) {
    std::ostringstream os;
    char buf[64];
    for (const auto& m : v) {
        std::snprintf(buf, sizeof buf, "%a", m.best_score);
        os << json(m.normalized).dump() << '|' << json(m.display).dump() << '|' << m.best_rank << '|' << buf;
        for (const auto& p : m.provenance) {
            std::snprintf(buf, sizeof buf, "%a", p.score);
            os << '|' << p.checkpoint << ',' << p.rank << ',' << buf;
        }
        os << '\n';
    }
    return os.str();
}

Verdict merge_equivalence() {
    std::mt19937 rng(4242);
    const std::vector<std::string> pool = {"x=1", "x = 1", " x=1 ", "x=2", "y", "y\n", "", "  ", "src", " src",
                                           "s r c", "z;", "z ;", "a\tb", "a b"};
    std::size_t agree = 0;
    std::string first_mismatch;
    for (int iter = 0; iter < 1000; ++iter) {
        const std::size_t k = 1 + rng() % 5;
        std::vector<std::vector<CandidatePatch>> beams(k);
        for (std::size_t c = 0; c < k; ++c) {
            const std::size_t t = rng() % 11;
            double score = -static_cast<double>(rng() % 3) / 8.0;
            for (std::size_t r = 1; r <= t; ++r) {
                score -= static_cast<double>(rng() % 3) / 8.0;  // coarse, so ties occur
                const std::string text = pool[rng() % pool.size()];
                beams[c].push_back({text, normalize_ws(text), c + 1, r, score});
            }
        }
        const std::string source = rng() % 5 ? "src" : (rng() % 2 ? "" : "   ");
        const auto got = serialize(merge_candidates(beams, source));
        const auto want = serialize(reference_merge(beams, source));
        if (got == want) {
            ++agree;
        } else if (first_mismatch.empty()) {
            first_mismatch = " (first mismatch at case " + std::to_string(iter) + ")";
        }
    }
    return {agree == 1000, std::to_string(agree) + "/1000 ensembles byte-identical" + first_mismatch};
}

// ---------------------------------------------------------------------------
// 4. retrieval properties
// ---------------------------------------------------------------------------

Verdict retrieval_contract() {
    const TermFrequencyEmbedder emb;
    std::mt19937 rng(77);
    const std::vector<std::string> words = {"int", "x", "y", "return", "=", "+", "1", "foo", "bar", "(", ")", ";",
                                            "if", "else", "{", "}", "count", "total"};
    std::size_t files_ok = 0;
    std::string why;
    for (int f = 0; f < 1000; ++f) {
        const std::size_t n = 1 + rng() % 40;
        std::vector<std::string> lines;
        for (std::size_t i = 0; i < n; ++i) {
            std::string line(rng() % 3 == 0 ? "    " : "");
            const std::size_t len = rng() % 6;
            for (std::size_t w = 0; w < len; ++w) line += words[rng() % words.size()] + (rng() % 2 ? " " : "");
            lines.push_back(line);
        }
        const std::string src = join_lines(lines);
        LineRange hunk{1 + rng() % n, rng() % 4 == 0 ? 0 : 1 + rng() % 3};
        if (!hunk.within(n)) hunk.length = 0;
        std::string hunk_text;
        for (std::size_t i = 0; i < hunk.length; ++i) hunk_text += lines[hunk.start - 1 + i] + "\n";
        ContextSpan excl;
        excl.range = {hunk.start, std::min<std::size_t>(n - hunk.start + 1, hunk.length + rng() % 5)};
        const std::size_t r = rng() % 8;
        const double thr = static_cast<double>(rng() % 11) / 10.0;

        const auto index = build_line_index(src, excl, hunk_text, emb);
        const auto hits = retrieve(hunk_text, index, r, thr, emb);
        const std::string hn = normalize_ws(hunk_text);
        bool ok = hits.size() <= r;
        if (hn.empty() && !hits.empty()) ok = false;
        for (std::size_t i = 0; i < hits.size(); ++i) {
            if (hits[i].similarity < thr) ok = false;
            if (i > 0 && hits[i].similarity > hits[i - 1].similarity) ok = false;
            if (hits[i].text == hn) ok = false;
            if (excl.range.length > 0 && hits[i].line_no >= excl.range.start && hits[i].line_no <= excl.range.last())
                ok = false;
        }
        if (ok) {
            ++files_ok;
        } else if (why.empty()) {
            why = "; first violation in file " + std::to_string(f);
        }
    }

    // Worked example: hunk "a b" against "a b c", "a z", "q".
    LineIndex idx;
    idx.entries.push_back({"a b c", emb.embed("a b c"), 4});
    idx.entries.push_back({"a z", emb.embed("a z"), 9});
    idx.entries.push_back({"q", emb.embed("q"), 2});
    const auto hits = retrieve("a b", idx, 2, 0.5, emb);
    bool example = hits.size() == 2 && hits[0].line_no == 4 && hits[1].line_no == 9 &&
                   std::abs(hits[0].similarity - 2.0 / std::sqrt(6.0)) < 1e-6 &&
                   std::abs(hits[0].similarity - 0.816) < 5e-4 && std::abs(hits[1].similarity - 0.5) < 1e-6;
    char buf[256];
    std::snprintf(buf, sizeof buf, "%zu/1000 random files satisfy all properties%s; worked example %s (%.6f, %.6f)",
                  files_ok, why.c_str(), example ? "reproduced" : "WRONG", hits.size() > 0 ? hits[0].similarity : -1.0,
                  hits.size() > 1 ? hits[1].similarity : -1.0);
    return {files_ok == 1000 && example, buf};
}

// ---------------------------------------------------------------------------
// 5. end-to-end fixture run
// ---------------------------------------------------------------------------

Verdict end_to_end() {
    const auto t0 = Clock::now();
    const fs::path dir = kFixtures / "e2e";
    json expected;
    std::ifstream(dir / "expected.json") >> expected;
    const auto bugs = load_manifest(dir / "manifest.json");
    const fs::path out = fs::temp_directory_path() / ("mendkit-acceptance-e2e-" + std::to_string(getpid()));
    fs::remove_all(out);
    const auto outcomes = repair_all(bugs, out, 4, {});
    fs::remove_all(out);

    std::size_t plausible = 0, npc_match = 0, multi = 0;
    bool phase1 = false, phase2_kept = false;
    std::string mismatches;
    for (std::size_t i = 0; i < bugs.size(); ++i) {
        const json& r = outcomes[i].report;
        const json& e = expected.at(bugs[i].id);
        if (r["status"] == "plausible") ++plausible;
        if (r["npc"] == e["npc"] && r["status"] == e["status"] && r["found_in"] == (e["found_in"].is_null() ? json("none") : e["found_in"]))
            ++npc_match;
        else
            mismatches += " " + bugs[i].id + "(npc " + r["npc"].dump() + ")";
        if (bugs[i].hunks.size() > 1 && r["status"] == "plausible") {
            ++multi;
            if (r["found_in"] == "uniform") phase1 = true;
            bool kept_source = false;
            for (const auto& h : r["hunks"]) kept_source |= h["patch"].is_null();
            if (r["found_in"] == "sequential" && kept_source && !r["accepted_partials"].empty()) phase2_kept = true;
        }
    }
    const double secs = seconds_since(t0);
    char buf[320];
    std::snprintf(buf, sizeof buf,
                  "%zu/10 plausible, %zu multi-hunk (uniform: %s, sequential with kept source: %s), "
                  "%zu/10 match expected npc%s, %.1fs",
                  plausible, multi, phase1 ? "yes" : "no", phase2_kept ? "yes" : "no", npc_match,
                  mismatches.c_str(), secs);
    return {plausible >= 8 && multi >= 2 && phase1 && phase2_kept && npc_match == bugs.size() && secs < 300, buf};
}

// ---------------------------------------------------------------------------
// 6. mining counts
// ---------------------------------------------------------------------------

Verdict mining_counts() {
    json frozen;
    std::ifstream(kFixtures / "mini-corpus-counts.json") >> frozen;
    const fs::path out = fs::temp_directory_path() / ("mendkit-acceptance-mine-" + std::to_string(getpid()) + ".jsonl");
    const std::string cmd = std::string(MENDKIT_CLI) + " mine " + (kFixtures / "mini-corpus").string() + " " +
                            out.string() + " 2>/dev/null";
    FILE* p = popen(cmd.c_str(), "r");
    if (!p) return {false, "cannot run mendkit mine"};
    std::string text;
    char buf[512];
    while (fgets(buf, sizeof buf, p)) text += buf;
    const int rc = pclose(p);

    const std::vector<std::pair<std::string, std::string>> keys = {
        {"pairs read", "pairs"},
        {"non-fix commits", "skipped_commits"},
        {"instances extracted", "input"},
        {"comments stripped", "comments_stripped"},
        {"removed duplicate", "duplicates"},
        {"removed unchanged", "unchanged"},
        {"removed empty fix", "empty_fix"},
        {"removed over budget", "over_budget"},
        {"kept", "kept"}};
    std::size_t match = 0;
    std::string diffs;
    for (const auto& [label, key] : keys) {
        const std::regex re("(^|\\n)" + label + " +([0-9]+)");
        std::smatch m;
        if (std::regex_search(text, m, re) && std::stoul(m[2]) == frozen.at(key).get<std::size_t>()) {
            ++match;
        } else {
            diffs += " " + key;
        }
    }
    std::size_t lines = 0;
    std::ifstream in(out);
    for (std::string l; std::getline(in, l);) ++lines;
    fs::remove(out);
    const bool file_ok = lines == frozen.at("kept").get<std::size_t>();
    std::snprintf(buf, sizeof buf, "%zu/%zu counts match (kept %zu, instance file %zu lines)%s%s", match, keys.size(),
                  frozen.at("kept").get<std::size_t>(), lines, diffs.empty() ? "" : "; differ:", diffs.c_str());
    return {rc == 0 && match == keys.size() && file_ok, buf};
}

// ---------------------------------------------------------------------------
// 7. truncation safety
// ---------------------------------------------------------------------------

Verdict truncation_safety() {
    const ReferenceTokenizer tok;
    std::mt19937 rng(7);
    const std::vector<std::string> prefixes = {"Java", "Python", "C", "JavaScript"};
    const std::vector<std::string> atoms = {"a", "bb", "x1", "(", ")", "{", "}", ";", "=", "==", ":", "foo_bar",
                                            "  ", "\n", "\t", "->", "0", "\"s\"", ","};
    auto random_text = [&](std::size_t max_atoms) {
        std::string s;
        const std::size_t n = rng() % (max_atoms + 1);
        for (std::size_t i = 0; i < n; ++i) s += atoms[rng() % atoms.size()] + (rng() % 3 ? " " : "");
        return s;
    };
    std::size_t ok = 0, truncated = 0, rejected = 0;
    for (int iter = 0; iter < 10000; ++iter) {
        const std::string prefix = prefixes[rng() % prefixes.size()];
        const std::string hunk = random_text(rng() % 20 == 0 ? 900 : (rng() % 4 == 0 ? 300 : 60));
        std::vector<std::string> retrieved;
        for (std::size_t i = rng() % 6; i > 0; --i) retrieved.push_back(random_text(40));
        const std::string context = random_text(rng() % 2 ? 1200 : 100);
        const Prompt full = build_prompt(prefix, hunk, retrieved, context, tok);
        const std::string head = detail::prompt_head(full.language_prefix, full.hunk_text);
        if (tok.count(head) > 512) {
            // The caller learns the hunk cannot fit; nothing is silently cut.
            try {
                fit_to_budget(full, TokenBudget{}, tok);
            } catch (const HunkExceedsBudget&) {
                ++rejected;
                ++ok;
            }
            continue;
        }
        const Prompt fit = fit_to_budget(full, TokenBudget{}, tok);
        bool good = fit.token_count <= 512 && tok.count(fit.rendered) <= 512;
        good &= fit.language_prefix == full.language_prefix && fit.hunk_text == full.hunk_text;
        good &= fit.rendered.compare(0, head.size(), head) == 0;
        good &= fit.rendered.size() == head.size() || fit.rendered[head.size()] == ' ';
        good &= full.context_text.compare(0, fit.context_text.size(), fit.context_text) == 0;
        good &= fit.retrieved.size() <= full.retrieved.size() &&
                std::equal(fit.retrieved.begin(), fit.retrieved.end(), full.retrieved.begin());
        if (fit.retrieved.size() < full.retrieved.size()) good &= fit.context_text.empty();
        if (full.token_count > 512) ++truncated;
        if (good) ++ok;
    }
    char buf[200];
    std::snprintf(buf, sizeof buf, "%zu/10000 prompts safe (%zu truncated, %zu over-long hunks rejected)", ok,
                  truncated, rejected);
    return {ok == 10000, buf};
}

// ---------------------------------------------------------------------------
// 8. flaky screening
// ---------------------------------------------------------------------------

// Run-time fraction of trials in which the flaky test is caught.
struct FlakyTrialStats {
    std::size_t caught = 0;
    std::size_t leaked = 0;  // excluded tests seen in a later report
};

FlakyTrialStats flaky_trials(std::size_t trials, std::size_t repeats) {
    const fs::path project = kFixtures / "flaky";
    const fs::path scratch = fs::temp_directory_path() / ("mendkit-acceptance-flaky-" + std::to_string(getpid()));
    fs::create_directories(scratch);
    FlakyTrialStats st;
    for (std::size_t t = 0; t < trials; ++t) {
        CommandSpec spec;
        spec.test = "python3 run_tests.py";
        spec.env = {{"FLAKY_SEED", std::to_string(t)}};
        spec.timeout = Seconds(30);
        CommandHarness harness(project, {{"h1", "lib.py", {2, 1}}}, spec, scratch);
        const auto flaky = detect_flaky(harness, {}, repeats);
        if (flaky.count("test_sometimes")) ++st.caught;
        const Baseline b = measure_baseline(harness, flaky);
        for (const PatchSet& ps : {PatchSet{}, PatchSet{{"h1", "    return x * 2"}}}) {
            const SuiteReport r = run_suite(harness, ps, b);
            for (const auto& id : flaky) st.leaked += r.outcomes.count(id);
        }
    }
    fs::remove_all(scratch);
    return st;
}

Verdict flaky_screening() {
    const auto st = flaky_trials(200, 5);
    const double rate = static_cast<double>(st.caught) / 200.0;
    const double theory = 1.0 - std::pow(2.0 / 3.0, 5) - std::pow(1.0 / 3.0, 5);
    char buf[320];
    std::snprintf(buf, sizeof buf,
                  "excluded in %zu/200 trials (%.1f%%, need >= 95%%); excluded tests in later reports: %zu; "
                  "at 5 repeats P(excluded) = %.3f, so 95%% is out of reach (8 repeats give %.3f)",
                  st.caught, 100 * rate, st.leaked, theory,
                  1.0 - std::pow(2.0 / 3.0, 8) - std::pow(1.0 / 3.0, 8));
    return {rate >= 0.95 && st.leaked == 0, buf};
}

struct Criterion {
    int number;
    const char* name;
    std::function<Verdict()> run;
    bool known_unattainable = false;
};

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"mendkit acceptance checks"};
    int only = 0;
    app.add_option("--only", only, "run a single criterion (1-8)")->check(CLI::Range(1, 8));
    CLI11_PARSE(app, argc, argv);

    const std::vector<Criterion> criteria = {
        {1, "multi-hunk search-space bound", search_space_bound},
        {2, "exhaustive-oracle soundness", exhaustive_soundness},
        {3, "merge-rule equivalence", merge_equivalence},
        {4, "retrieval contract", retrieval_contract},
        {5, "end-to-end fixture run", end_to_end},
        {6, "preprocessing counts", mining_counts},
        {7, "truncation safety", truncation_safety},
        {8, "flaky screening", flaky_screening, true},
    };

    int hard_failures = 0, known_failures = 0;
    for (const auto& c : criteria) {
        if (only && c.number != only) continue;
        Verdict v;
        try {
            v = c.run();
        } catch (const std::exception& e) {
            v = {false, std::string("exception: ") + e.what()};
        }
        std::printf("%s  %d %s: %s\n", v.pass ? "PASS" : "FAIL", c.number, c.name, v.detail.c_str());
        std::fflush(stdout);
        if (!v.pass) ++(c.known_unattainable ? known_failures : hard_failures);
    }
    if (hard_failures) return 1;
    return known_failures ? 77 : 0;
}
