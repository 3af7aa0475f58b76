#pragma once

#include <filesystem>
#include <fstream>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "mendkit/corpus.hpp"
#include "mendkit/encode.hpp"
#include "mendkit/errors.hpp"
#include "mendkit/generate.hpp"
#include "mendkit/harness.hpp"
#include "mendkit/language.hpp"
#include "mendkit/retrieval.hpp"

namespace mendkit {

inline constexpr int kManifestVersion = 1;

struct RepairParameters {
    std::size_t r = kDefaultRetrievedLines;
    double threshold = kDefaultSimilarityThreshold;
    EnsembleConfig ensemble;  // k = 5, t = 100
    TokenBudget budget;       // 512 / 256
};

struct GeneratorSpec {
    std::optional<std::filesystem::path> replay;
    std::optional<std::string> remote;
};

struct BugManifest {
    std::string id;
    Language language = Language::java;
    std::filesystem::path root;  // project directory
    std::vector<HunkLocation> hunks;
    CommandSpec commands;
    std::size_t flaky_repeats = 5;
    GeneratorSpec generator;
    RepairParameters params;
    std::optional<std::map<std::string, std::string>> reference;  // hunk id -> developer fix
};

// Command-line overrides applied on top of every bug's parameters.
struct ParameterOverrides {
    std::optional<std::size_t> r;
    std::optional<double> threshold;
    std::optional<std::size_t> beam;
    std::optional<std::size_t> checkpoints;
    std::optional<double> timeout;
};

namespace detail {

template <class T>
T field(const nlohmann::json& obj, const char* key, const T& fallback, const std::string& where) {
    if (!obj.contains(key)) return fallback;
    try {
        return obj.at(key).get<T>();
    } catch (const nlohmann::json::exception&) {
        throw ManifestError(where + ": field '" + key + "' has the wrong type");
    }
}

inline void read_parameters(const nlohmann::json& j, RepairParameters& p, std::size_t& repeats, double& timeout,
                            const std::string& where) {
    if (!j.is_object()) throw ManifestError(where + ": parameters must be an object");
    p.r = field<std::size_t>(j, "r", p.r, where);
    p.threshold = field<double>(j, "threshold", p.threshold, where);
    p.ensemble.k = field<std::size_t>(j, "k", p.ensemble.k, where);
    p.ensemble.t = field<std::size_t>(j, "t", p.ensemble.t, where);
    p.budget.input_limit = field<std::size_t>(j, "input_budget", p.budget.input_limit, where);
    p.budget.output_limit = field<std::size_t>(j, "output_budget", p.budget.output_limit, where);
    repeats = field<std::size_t>(j, "flaky_repeats", repeats, where);
    timeout = field<double>(j, "timeout", timeout, where);
}

inline void check_parameters(const RepairParameters& p, std::size_t repeats, double timeout, const std::string& where) {
    if (p.threshold < 0.0 || p.threshold > 1.0) throw ManifestError(where + ": threshold must lie in [0, 1]");
    if (p.ensemble.k < 1 || p.ensemble.t < 1) throw ManifestError(where + ": k and t must be >= 1");
    if (p.budget.input_limit < 1 || p.budget.output_limit < 1) throw ManifestError(where + ": budgets must be > 0");
    if (repeats < 2) throw ManifestError(where + ": flaky_repeats must be >= 2");
    if (!(timeout > 0.0)) throw ManifestError(where + ": timeout must be positive");
}

}  // namespace detail

// Parses and checks a manifest document. Relative paths resolve against
// `base_dir`. Every structural problem is a ManifestError raised before any
// bug runs.
inline std::vector<BugManifest> parse_manifest(const nlohmann::json& doc, const std::filesystem::path& base_dir,
                                               const ParameterOverrides& overrides = {}) {
    namespace fs = std::filesystem;
    if (!doc.is_object()) throw ManifestError("manifest must be a JSON object");
    if (detail::field<int>(doc, "schema_version", 0, "manifest") != kManifestVersion) {
        throw ManifestError("manifest schema_version must be " + std::to_string(kManifestVersion));
    }
    if (!doc.contains("bugs") || !doc["bugs"].is_array()) throw ManifestError("manifest needs a 'bugs' array");

    RepairParameters defaults;
    std::size_t default_repeats = 5;
    double default_timeout = 60.0;
    if (doc.contains("defaults")) {
        detail::read_parameters(doc["defaults"], defaults, default_repeats, default_timeout, "defaults");
    }

    std::vector<BugManifest> bugs;
    std::set<std::string> ids;
    for (const auto& b : doc["bugs"]) {
        if (!b.is_object()) throw ManifestError("every bug entry must be an object");
        BugManifest m;
        m.id = detail::field<std::string>(b, "id", "", "bug");
        if (m.id.empty()) throw ManifestError("bug without an id");
        const std::string where = "bug '" + m.id + "'";
        if (!ids.insert(m.id).second) throw ManifestError(where + ": duplicate id");
        try {
            m.language = parse_language(detail::field<std::string>(b, "language", "", where));
        } catch (const UnsupportedLanguage& e) {
            throw ManifestError(where + ": " + e.what());
        }
        m.root = base_dir / detail::field<std::string>(b, "root", ".", where);
        if (!fs::is_directory(m.root)) throw ManifestError(where + ": project root " + m.root.string() + " not found");

        m.params = defaults;
        std::size_t repeats = default_repeats;
        double timeout = default_timeout;
        if (b.contains("parameters")) detail::read_parameters(b["parameters"], m.params, repeats, timeout, where);
        repeats = detail::field<std::size_t>(b, "flaky_repeats", repeats, where);
        timeout = detail::field<double>(b, "timeout", timeout, where);
        if (overrides.r) m.params.r = *overrides.r;
        if (overrides.threshold) m.params.threshold = *overrides.threshold;
        if (overrides.beam) m.params.ensemble.t = *overrides.beam;
        if (overrides.checkpoints) m.params.ensemble.k = *overrides.checkpoints;
        if (overrides.timeout) timeout = *overrides.timeout;
        detail::check_parameters(m.params, repeats, timeout, where);
        m.flaky_repeats = repeats;

        m.commands.build = detail::field<std::string>(b, "build", "", where);
        m.commands.test = detail::field<std::string>(b, "test", "", where);
        if (m.commands.test.empty()) throw ManifestError(where + ": missing test command");
        m.commands.env = detail::field<std::map<std::string, std::string>>(b, "env", {}, where);
        m.commands.timeout = Seconds(timeout);

        if (!b.contains("hunks") || !b["hunks"].is_array() || b["hunks"].empty()) {
            throw ManifestError(where + ": needs at least one hunk");
        }
        std::map<std::string, std::vector<std::string>> file_lines;
        std::set<std::string> hunk_ids;
        for (const auto& h : b["hunks"]) {
            if (!h.is_object()) throw ManifestError(where + ": hunk entries must be objects");
            HunkLocation loc;
            loc.file = detail::field<std::string>(h, "file", "", where);
            loc.range.start = detail::field<std::size_t>(h, "start", 0, where);
            loc.range.length = detail::field<std::size_t>(h, "length", 0, where);
            if (loc.file.empty() || loc.range.start < 1) {
                throw ManifestError(where + ": hunk needs 'file' and 1-based 'start'");
            }
            loc.id = detail::field<std::string>(h, "id", loc.file + ":" + std::to_string(loc.range.start), where);
            if (!hunk_ids.insert(loc.id).second) throw ManifestError(where + ": duplicate hunk id " + loc.id);
            const fs::path path = m.root / loc.file;
            if (!file_lines.count(loc.file)) {
                if (!fs::is_regular_file(path)) throw ManifestError(where + ": file " + loc.file + " not found");
                file_lines[loc.file] = split_lines(read_file(path));
            }
            if (!loc.range.within(file_lines[loc.file].size())) {
                throw ManifestError(where + ": hunk " + loc.id + " lies outside " + loc.file);
            }
            for (const auto& other : m.hunks) {
                if (other.file == loc.file && other.range.overlaps(loc.range)) {
                    throw ManifestError(where + ": hunks " + other.id + " and " + loc.id + " overlap");
                }
            }
            m.hunks.push_back(std::move(loc));
        }

        if (!b.contains("generator") || !b["generator"].is_object()) {
            throw ManifestError(where + ": missing generator spec");
        }
        const auto& g = b["generator"];
        if (g.contains("replay") == g.contains("remote")) {
            throw ManifestError(where + ": generator needs exactly one of 'replay' or 'remote'");
        }
        if (g.contains("replay")) {
            m.generator.replay = base_dir / detail::field<std::string>(g, "replay", "", where);
            if (!fs::is_regular_file(*m.generator.replay)) {
                throw ManifestError(where + ": replay file " + m.generator.replay->string() + " not found");
            }
        } else {
            m.generator.remote = detail::field<std::string>(g, "remote", "", where);
            if (m.generator.remote->empty()) throw ManifestError(where + ": empty remote endpoint");
        }

        if (b.contains("reference")) {
            m.reference = detail::field<std::map<std::string, std::string>>(b, "reference", {}, where);
            for (const auto& [hid, _] : *m.reference) {
                if (!hunk_ids.count(hid)) throw ManifestError(where + ": reference names unknown hunk " + hid);
            }
        }
        bugs.push_back(std::move(m));
    }
    return bugs;
}

inline std::vector<BugManifest> load_manifest(const std::filesystem::path& path,
                                              const ParameterOverrides& overrides = {}) {
    std::ifstream in(path);
    if (!in) throw ManifestError("cannot open manifest " + path.string());
    nlohmann::json doc;
    try {
        doc = nlohmann::json::parse(in);
    } catch (const nlohmann::json::parse_error& e) {
        throw ManifestError("manifest is not valid JSON: " + std::string(e.what()));
    }
    return parse_manifest(doc, path.parent_path(), overrides);
}

}  // namespace mendkit
