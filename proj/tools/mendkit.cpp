#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <string>

#include <CLI11.hpp>
#include <nlohmann/json.hpp>

#include "mendkit/corpus.hpp"
#include "mendkit/manifest.hpp"
#include "mendkit/pipeline.hpp"
#include "mendkit/stats.hpp"

namespace fs = std::filesystem;
using namespace mendkit;

namespace {

// Exit codes: 0 ok, 1 pipeline error in some bug, 2 bad input (manifest,
// arguments, unreadable paths).
constexpr int kExitPipeline = 1;
constexpr int kExitInput = 2;

int cmd_mine(const fs::path& in, const fs::path& out, std::size_t in_budget, std::size_t out_budget) {
    ReferenceTokenizer tok;
    MineResult res;
    try {
        res = mine_directory(in, tok, in_budget, out_budget);
    } catch (const Error& e) {
        std::cerr << "mendkit mine: " << e.what() << "\n";
        return kExitInput;
    }
    if (out.has_parent_path()) fs::create_directories(out.parent_path());
    std::ofstream os(out, std::ios::binary | std::ios::trunc);
    if (!os) {
        std::cerr << "mendkit mine: cannot write " << out << "\n";
        return kExitInput;
    }
    write_instances(os, res.instances);
    for (const auto& w : res.warnings) std::cerr << "warning: " << w << "\n";
    const auto& r = res.stats.rules;
    std::cout << "pairs read            " << res.stats.pairs << "\n"
              << "non-fix commits       " << res.stats.skipped_commits << "\n"
              << "skipped files         " << res.stats.skipped_files << "\n"
              << "instances extracted   " << r.input << "\n"
              << "comments stripped     " << r.comments_stripped << "\n"
              << "removed duplicate     " << r.duplicates << "\n"
              << "removed unchanged     " << r.unchanged << "\n"
              << "removed empty fix     " << r.empty_fix << "\n"
              << "removed over budget   " << r.over_budget << "\n"
              << "kept                  " << r.kept << "\n";
    return 0;
}

int cmd_repair(const fs::path& manifest, const fs::path& out, std::size_t jobs, const ParameterOverrides& ov) {
    std::vector<BugManifest> bugs;
    try {
        bugs = load_manifest(manifest, ov);
    } catch (const Error& e) {
        std::cerr << "mendkit repair: " << e.what() << "\n";
        return kExitInput;
    }
    std::vector<BugOutcome> outcomes;
    try {
        outcomes = repair_all(bugs, out, jobs);
    } catch (const Error& e) {
        std::cerr << "mendkit repair: " << e.what() << "\n";
        return kExitPipeline;
    }
    int rc = 0;
    for (const auto& o : outcomes) {
        const auto& r = o.report;
        std::cout << r["bug_id"].get<std::string>() << "\t" << r["status"].get<std::string>() << "\tnpc=" << r["npc"];
        if (!r["error"].is_null()) std::cout << "\t" << r["error"].get<std::string>();
        std::cout << "\n";
        if (o.pipeline_error) rc = kExitPipeline;
    }
    return rc;
}

int cmd_retrieve(const fs::path& manifest, const std::string& bug_id, bool as_json) {
    std::vector<BugManifest> bugs;
    try {
        bugs = load_manifest(manifest);
    } catch (const Error& e) {
        std::cerr << "mendkit retrieve: " << e.what() << "\n";
        return kExitInput;
    }
    const BugManifest* bug = nullptr;
    for (const auto& b : bugs)
        if (b.id == bug_id) bug = &b;
    if (!bug) {
        std::cerr << "mendkit retrieve: unknown bug id " << bug_id << "\n";
        return kExitInput;
    }
    std::vector<std::string> warnings;
    std::vector<PreparedHunk> prepared;
    try {
        prepared = prepare_hunks(*bug, load_sources(*bug), PipelineOptions{}, &warnings);
    } catch (const Error& e) {
        std::cerr << "mendkit retrieve: " << e.what() << "\n";
        return kExitPipeline;
    }
    for (const auto& w : warnings) std::cerr << "warning: " << w << "\n";
    if (as_json) {
        nlohmann::json arr = nlohmann::json::array();
        for (const auto& p : prepared)
            arr.push_back({{"id", p.location.id}, {"retrieved", retrieved_json(p.retrieved)}});
        std::cout << arr.dump(2) << "\n";
        return 0;
    }
    for (const auto& p : prepared) {
        std::cout << "hunk " << p.location.id << " (" << p.location.file << " " << p.location.range << ", "
                  << to_string(p.context.kind) << " " << p.context.range << ")\n";
        for (const auto& r : p.retrieved) {
            char sim[16];
            std::snprintf(sim, sizeof sim, "%.4f", r.similarity);
            std::cout << "  " << sim << "  " << r.line_no << "  " << r.text << "\n";
        }
    }
    return 0;
}

int cmd_stats(const fs::path& dir) {
    ReportStats st;
    try {
        st = collect_stats(dir);
    } catch (const Error& e) {
        std::cerr << "mendkit stats: " << e.what() << "\n";
        return kExitInput;
    }
    for (const auto& s : st.skipped) std::cerr << "warning: skipped " << s << "\n";
    std::cout << render_stats(st);
    std::ofstream os(dir / "stats.json", std::ios::trunc);
    if (!os) {
        std::cerr << "mendkit stats: cannot write stats.json\n";
        return kExitInput;
    }
    os << to_json(st).dump(2) << "\n";
    return 0;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"mendkit: retrieval-augmented multi-hunk program repair"};
    app.require_subcommand(1);

    auto* mine = app.add_subcommand("mine", "extract and filter training instances from file pairs or diffs");
    std::string mine_in, mine_out;
    std::size_t in_budget = 512, out_budget = 256;
    mine->add_option("in", mine_in, "input directory")->required();
    mine->add_option("out", mine_out, "output JSONL file")->required();
    mine->add_option("--input-budget", in_budget, "input token budget")->check(CLI::PositiveNumber);
    mine->add_option("--output-budget", out_budget, "output token budget")->check(CLI::PositiveNumber);

    auto* repair = app.add_subcommand("repair", "repair every bug in a manifest");
    std::string manifest, out_dir;
    std::size_t jobs = 1;
    std::optional<std::size_t> r, beam, checkpoints;
    std::optional<double> threshold, timeout;
    repair->add_option("manifest", manifest, "bug manifest")->required();
    repair->add_option("--out", out_dir, "report directory")->required();
    repair->add_option("--jobs", jobs, "bugs repaired in parallel")->check(CLI::PositiveNumber);
    repair->add_option("--r", r, "retrieved lines per hunk");
    repair->add_option("--threshold", threshold, "similarity threshold")->check(CLI::Range(0.0, 1.0));
    repair->add_option("--beam", beam, "beam size per checkpoint")->check(CLI::PositiveNumber);
    repair->add_option("--checkpoints", checkpoints, "checkpoints in the ensemble")->check(CLI::PositiveNumber);
    repair->add_option("--timeout", timeout, "seconds per build+test run")->check(CLI::PositiveNumber);

    auto* retrieve = app.add_subcommand("retrieve", "show lines retrieved for each hunk of a bug");
    std::string ret_manifest, bug_id;
    bool as_json = false;
    retrieve->add_option("manifest", ret_manifest, "bug manifest")->required();
    retrieve->add_option("bug-id", bug_id, "bug id")->required();
    retrieve->add_flag("--json", as_json, "print JSON");

    auto* stats = app.add_subcommand("stats", "summarize repair reports");
    std::string stats_dir;
    stats->add_option("dir", stats_dir, "report directory")->required();

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int rc = app.exit(e);
        return rc == 0 ? 0 : kExitInput;
    }

    if (*mine) return cmd_mine(mine_in, mine_out, in_budget, out_budget);
    if (*repair) return cmd_repair(manifest, out_dir, jobs, ParameterOverrides{r, threshold, beam, checkpoints, timeout});
    if (*retrieve) return cmd_retrieve(ret_manifest, bug_id, as_json);
    return cmd_stats(stats_dir);
}
