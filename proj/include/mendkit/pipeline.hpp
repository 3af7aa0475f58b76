#pragma once

#include <atomic>
#include <chrono>
#include <filesystem>
#include <fstream>
#include <map>
#include <memory>
#include <mutex>
#include <string>
#include <thread>
#include <vector>

#include <nlohmann/json.hpp>

#include "mendkit/context.hpp"
#include "mendkit/diff.hpp"
#include "mendkit/encode.hpp"
#include "mendkit/generate.hpp"
#include "mendkit/harness.hpp"
#include "mendkit/manifest.hpp"
#include "mendkit/rank.hpp"
#include "mendkit/remote.hpp"
#include "mendkit/retrieval.hpp"
#include "mendkit/validate.hpp"

namespace mendkit {

inline constexpr int kReportVersion = 1;
inline constexpr std::string_view kReportKind = "mendkit-repair-report";

// Everything computed for one hunk before generation.
struct PreparedHunk {
    HunkLocation location;
    std::string source_hunk;
    ContextSpan context;
    std::vector<RetrievedLine> retrieved;
    Prompt prompt;
};

struct PipelineOptions {
    std::shared_ptr<const Embedder> embedder = std::make_shared<TermFrequencyEmbedder>();
    std::shared_ptr<const Tokenizer> tokenizer = std::make_shared<ReferenceTokenizer>();
    std::filesystem::path scratch = sandbox_root();
};

inline std::map<std::string, SourceText> load_sources(const BugManifest& bug) {
    std::map<std::string, SourceText> files;
    for (const auto& h : bug.hunks) {
        if (!files.count(h.file)) files[h.file] = SourceText::parse(read_file(bug.root / h.file));
    }
    return files;
}

// Context, retrieval and prompt for every hunk, in manifest order.
inline std::vector<PreparedHunk> prepare_hunks(const BugManifest& bug, const std::map<std::string, SourceText>& files,
                                               const PipelineOptions& opt, std::vector<std::string>* warnings) {
    const auto scanner = make_scanner(bug.language);
    std::vector<PreparedHunk> out;
    for (const auto& h : bug.hunks) {
        const SourceText& src = files.at(h.file);
        const std::string text = src.str();
        PreparedHunk p;
        p.location = h;
        p.source_hunk = join_lines(diff::slice(src.lines, h.range));
        p.context = context_for_hunk(text, h.range, *scanner, warnings);
        const LineIndex index = build_line_index(text, p.context, p.source_hunk, *opt.embedder, h.file);
        p.retrieved = retrieve(p.source_hunk, index, bug.params.r, bug.params.threshold, *opt.embedder);
        p.prompt = fit_to_budget(
            build_prompt(language_prefix(bug.language), p.source_hunk, p.retrieved, p.context, *opt.tokenizer),
            bug.params.budget, *opt.tokenizer);
        out.push_back(std::move(p));
    }
    return out;
}

inline std::vector<std::shared_ptr<const Generator>> make_backends(const BugManifest& bug) {
    std::vector<std::shared_ptr<const Generator>> backends;
    if (bug.generator.replay) {
        auto store = std::make_shared<const ReplayStore>(ReplayStore::load(bug.generator.replay->string()));
        for (std::size_t i = 1; i <= bug.params.ensemble.k; ++i)
            backends.push_back(std::make_shared<ReplayGenerator>(store, i));
    } else {
        for (std::size_t i = 1; i <= bug.params.ensemble.k; ++i)
            backends.push_back(std::make_shared<RemoteGenerator>(*bug.generator.remote, i));
    }
    return backends;
}

// Unified diff of the patch set against the pristine sources, files in
// path order.
inline std::string patchset_diff(const std::map<std::string, SourceText>& files, const std::vector<HunkLocation>& hunks,
                                 const PatchSet& patches) {
    std::string out;
    for (const auto& [file, patched] : apply_patchset(files, hunks, patches)) {
        out += diff::render_unified(files.at(file).lines, patched.lines, "a/" + file, "b/" + file);
    }
    return out;
}

struct BugOutcome {
    nlohmann::json report;
    std::string diff;
    bool pipeline_error = false;
};

inline nlohmann::json retrieved_json(const std::vector<RetrievedLine>& lines) {
    nlohmann::json arr = nlohmann::json::array();
    for (const auto& r : lines) arr.push_back({{"text", r.text}, {"similarity", r.similarity}, {"line", r.line_no}});
    return arr;
}

// Runs context -> retrieval -> encode -> generate -> rank -> validate for one
// bug. Failures become a report with status "error".
inline BugOutcome repair_bug(const BugManifest& bug, const PipelineOptions& opt = {}) {
    using clock = std::chrono::steady_clock;
    const auto t0 = clock::now();
    BugOutcome outcome;
    nlohmann::json& rep = outcome.report;
    rep["schema_version"] = kReportVersion;
    rep["kind"] = kReportKind;
    rep["bug_id"] = bug.id;
    rep["language"] = to_string(bug.language);
    rep["status"] = to_string(RepairStatus::error);
    rep["error"] = nullptr;
    rep["npc"] = 0;
    rep["first_plausible_rank"] = nullptr;
    rep["found_in"] = to_string(SearchPhase::none);
    rep["uniform_tried"] = 0;
    rep["timeouts"] = 0;
    rep["hunks"] = nlohmann::json::array();
    rep["patch_file"] = bug.id + ".diff";
    rep["exact_match"] = nullptr;
    std::vector<std::string> warnings;
    nlohmann::json timings = {{"prepare_s", 0.0}, {"generate_s", 0.0}, {"baseline_s", 0.0}, {"validate_s", 0.0}};

    try {
        const auto files = load_sources(bug);
        auto prepared = prepare_hunks(bug, files, opt, &warnings);
        const auto t_prep = clock::now();
        timings["prepare_s"] = Seconds(t_prep - t0).count();

        const auto backends = make_backends(bug);
        std::vector<HunkCandidates> candidates;
        for (const auto& p : prepared) {
            auto beams = ensemble_generate(backends, p.location.id, p.prompt, bug.params.ensemble, &warnings);
            candidates.push_back({p.location.id, p.location.file, p.location.range.start,
                                  merge_candidates(beams, p.source_hunk)});
        }
        const auto t_gen = clock::now();
        timings["generate_s"] = Seconds(t_gen - t_prep).count();

        for (std::size_t i = 0; i < prepared.size(); ++i) {
            const auto& p = prepared[i];
            rep["hunks"].push_back({{"id", p.location.id},
                                    {"file", p.location.file},
                                    {"start", p.location.range.start},
                                    {"length", p.location.range.length},
                                    {"context_kind", to_string(p.context.kind)},
                                    {"context_range", {p.context.range.start, p.context.range.length}},
                                    {"retrieved", retrieved_json(p.retrieved)},
                                    {"prompt", p.prompt.rendered},
                                    {"prompt_tokens", p.prompt.token_count},
                                    {"candidates", candidates[i].merged.size()},
                                    {"patch", nullptr}});
        }

        CommandHarness harness(bug.root, bug.hunks, bug.commands, opt.scratch);
        const auto flaky = detect_flaky(harness, {}, bug.flaky_repeats);
        const Baseline baseline = measure_baseline(harness, flaky);
        const auto t_base = clock::now();
        timings["baseline_s"] = Seconds(t_base - t_gen).count();
        rep["baseline"] = {{"passing", baseline.passing}, {"failing", baseline.failing}, {"flaky", baseline.flaky}};

        const RepairResult res = validate_bug(candidates, harness, baseline);
        timings["validate_s"] = res.validation_time.count();

        rep["status"] = to_string(res.status);
        rep["npc"] = res.npc;
        if (res.first_plausible_rank) rep["first_plausible_rank"] = *res.first_plausible_rank;
        rep["found_in"] = to_string(res.found_in);
        rep["uniform_tried"] = res.uniform_tried;
        rep["timeouts"] = res.timeouts;
        rep["accepted_partials"] = res.accepted_partials;
        for (auto& h : rep["hunks"]) {
            auto it = res.patchset.find(h["id"].get<std::string>());
            if (it != res.patchset.end()) h["patch"] = it->second;
        }
        if (bug.reference) {
            bool match = res.status == RepairStatus::plausible;
            for (const auto& p : prepared) {
                auto got = res.patchset.find(p.location.id);
                auto want = bug.reference->find(p.location.id);
                const std::string g = got != res.patchset.end() ? got->second : p.source_hunk;
                const std::string w = want != bug.reference->end() ? want->second : p.source_hunk;
                if (normalize_ws(g) != normalize_ws(w)) match = false;
            }
            rep["exact_match"] = match;
        }
        outcome.diff = patchset_diff(files, bug.hunks, res.patchset);
    } catch (const Error& e) {
        rep["status"] = to_string(RepairStatus::error);
        rep["error"] = e.what();
        outcome.pipeline_error = true;
    } catch (const std::exception& e) {
        rep["status"] = to_string(RepairStatus::error);
        rep["error"] = std::string("internal: ") + e.what();
        outcome.pipeline_error = true;
    }
    rep["warnings"] = warnings;
    timings["total_s"] = Seconds(clock::now() - t0).count();
    rep["timings"] = timings;
    return outcome;
}

inline void write_outcome(const BugOutcome& outcome, const std::filesystem::path& out_dir) {
    const std::string id = outcome.report.at("bug_id").get<std::string>();
    {
        std::ofstream out(out_dir / (id + ".report.json"), std::ios::binary | std::ios::trunc);
        if (!out) throw Error("cannot write report for " + id);
        out << outcome.report.dump(2) << "\n";
    }
    std::ofstream diff_out(out_dir / (id + ".diff"), std::ios::binary | std::ios::trunc);
    if (!diff_out) throw Error("cannot write diff for " + id);
    diff_out << outcome.diff;
}

// Repairs every bug with `jobs` workers; outcomes come back in manifest order.
inline std::vector<BugOutcome> repair_all(const std::vector<BugManifest>& bugs, const std::filesystem::path& out_dir,
                                          std::size_t jobs, const PipelineOptions& opt = {}) {
    std::filesystem::create_directories(out_dir);
    std::vector<BugOutcome> outcomes(bugs.size());
    std::atomic<std::size_t> next{0};
    auto worker = [&] {
        for (std::size_t i = next.fetch_add(1); i < bugs.size(); i = next.fetch_add(1)) {
            outcomes[i] = repair_bug(bugs[i], opt);
            write_outcome(outcomes[i], out_dir);
        }
    };
    jobs = std::max<std::size_t>(1, std::min(jobs, bugs.size()));
    std::vector<std::thread> pool;
    for (std::size_t j = 1; j < jobs; ++j) pool.emplace_back(worker);
    worker();
    for (auto& t : pool) t.join();
    return outcomes;
}

}  // namespace mendkit
