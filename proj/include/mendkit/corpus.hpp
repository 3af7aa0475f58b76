#pragma once

#include <algorithm>
#include <filesystem>
#include <fstream>
#include <iosfwd>
#include <set>
#include <sstream>
#include <string>
#include <string_view>
#include <tuple>
#include <utility>
#include <vector>

#include <nlohmann/json.hpp>

#include "mendkit/context.hpp"
#include "mendkit/diff.hpp"
#include "mendkit/errors.hpp"
#include "mendkit/language.hpp"
#include "mendkit/text.hpp"
#include "mendkit/tokenizer.hpp"

namespace mendkit {

struct Origin {
    std::string source;
    std::size_t hunk = 0;  // 1-based ordinal within the source

    friend bool operator==(const Origin&, const Origin&) = default;
};

struct TrainingInstance {
    Language language = Language::java;
    std::string buggy_hunk;
    std::string context;
    std::string fixed_hunk;
    Origin origin;

    friend bool operator==(const TrainingInstance&, const TrainingInstance&) = default;
};

struct FilePair {
    std::string buggy;
    std::string fixed;
    std::string path;
};

struct CommitRecord {
    std::string message;
    std::vector<FilePair> file_pairs;
};

// Case-insensitive raw substring match on "bug", "fix" or "patch".
inline bool is_bugfix_commit(std::string_view message) {
    const std::string m = to_lower(message);
    return contains(m, "bug") || contains(m, "fix") || contains(m, "patch");
}

// One instance per zero-context diff hunk, in file order. Context comes from
// the buggy file: the outermost enclosing function, else a +-3 line window.
inline std::vector<TrainingInstance> extract_instances(std::string_view buggy_file, std::string_view fixed_file,
                                                       Language lang, const std::string& source_id = {},
                                                       std::vector<std::string>* warnings = nullptr) {
    const auto old_lines = split_lines(buggy_file);
    const auto new_lines = split_lines(fixed_file);
    const auto scanner = make_scanner(lang);
    std::vector<TrainingInstance> out;
    std::size_t ordinal = 0;
    for (const auto& h : diff::line_hunks(old_lines, new_lines)) {
        TrainingInstance inst;
        inst.language = lang;
        inst.buggy_hunk = join_lines(diff::slice(old_lines, h.old_range));
        inst.fixed_hunk = join_lines(diff::slice(new_lines, h.new_range));
        inst.context = context_for_hunk(buggy_file, h.old_range, *scanner, warnings).text;
        inst.origin = {source_id, ++ordinal};
        out.push_back(std::move(inst));
    }
    return out;
}

inline std::vector<TrainingInstance> extract_instances(std::string_view buggy_file, std::string_view fixed_file,
                                                       std::string_view language_tag) {
    return extract_instances(buggy_file, fixed_file, parse_language(language_tag));
}

// Removes line and block comments, leaving string literals alone. Lines that
// held only a comment disappear; lines that lost a trailing comment are
// right-trimmed. Unterminated literals or comments run to the end of their
// line or of the text, since hunks are code fragments.
inline std::string strip_comments(std::string_view code, Language lang) {
    std::string out;
    out.reserve(code.size());
    std::vector<bool> touched{false};  // per output line
    auto mark = [&] { touched.back() = true; };
    auto emit = [&](char c) {
        out.push_back(c);
        if (c == '\n') touched.push_back(false);
    };

    const bool py = lang == Language::python;
    const std::size_t n = code.size();
    std::size_t i = 0;
    while (i < n) {
        const char c = code[i];
        if (py && c == '#') {
            mark();
            while (i < n && code[i] != '\n') ++i;
            continue;
        }
        if (!py && c == '/' && i + 1 < n && code[i + 1] == '/') {
            mark();
            while (i < n && code[i] != '\n') ++i;
            continue;
        }
        if (!py && c == '/' && i + 1 < n && code[i + 1] == '*') {
            mark();
            const std::size_t end = code.find("*/", i + 2);
            const std::size_t stop = end == std::string_view::npos ? n : end + 2;
            bool spanned = false;
            for (std::size_t k = i; k < stop; ++k) {
                if (code[k] == '\n') {
                    emit('\n');
                    mark();
                    spanned = true;
                }
            }
            // An inline block comment separates tokens like whitespace does.
            if (!spanned) emit(' ');
            i = stop;
            continue;
        }
        const bool triple = py && (c == '"' || c == '\'') && code.substr(i, 3) == std::string(3, c);
        if (triple) {
            const std::string delim(3, c);
            std::size_t j = i + 3;
            while (j < n && code.substr(j, 3) != delim) j += code[j] == '\\' ? 2 : 1;
            const std::size_t stop = std::min(n, j + 3);
            for (std::size_t k = i; k < stop; ++k) emit(code[k]);
            i = stop;
            continue;
        }
        if (c == '"' || c == '\'' || (lang == Language::javascript && c == '`')) {
            std::size_t j = i + 1;
            while (j < n && code[j] != c && (code[j] != '\n' || c == '`')) j += code[j] == '\\' ? 2 : 1;
            const std::size_t stop = std::min(n, j < n && code[j] == c ? j + 1 : j);
            for (std::size_t k = i; k < stop; ++k) emit(code[k]);
            i = stop;
            continue;
        }
        emit(c);
        ++i;
    }

    const auto lines = split_lines(out);
    std::vector<std::string> kept;
    for (std::size_t k = 0; k < lines.size(); ++k) {
        if (k < touched.size() && touched[k]) {
            std::string_view t = lines[k];
            while (!t.empty() && is_space(t.back())) t.remove_suffix(1);
            if (trim(t).empty()) continue;
            kept.emplace_back(t);
        } else {
            kept.push_back(lines[k]);
        }
    }
    return join_lines(kept);
}

struct PreprocessStats {
    std::size_t input = 0;
    std::size_t comments_stripped = 0;  // instances whose hunks changed in rule 1
    std::size_t duplicates = 0;         // rule 2
    std::size_t unchanged = 0;          // rule 3
    std::size_t empty_fix = 0;          // rule 4
    std::size_t over_budget = 0;        // rule 5
    std::size_t kept = 0;
};

// The five corpus rules, in order: strip hunk comments, drop exact duplicates
// (first kept), drop whitespace-equal buggy/fixed pairs, drop empty fixes,
// drop hunks over their token budget.
inline std::vector<TrainingInstance> preprocess(std::vector<TrainingInstance> instances, const Tokenizer& tok,
                                                std::size_t input_budget, std::size_t output_budget,
                                                PreprocessStats* stats = nullptr) {
    if (input_budget == 0 || output_budget == 0) throw InvalidArgument("token budgets must be positive");
    PreprocessStats st;
    st.input = instances.size();

    for (auto& inst : instances) {
        auto b = strip_comments(inst.buggy_hunk, inst.language);
        auto f = strip_comments(inst.fixed_hunk, inst.language);
        if (b != inst.buggy_hunk || f != inst.fixed_hunk) ++st.comments_stripped;
        inst.buggy_hunk = std::move(b);
        inst.fixed_hunk = std::move(f);
    }

    std::vector<TrainingInstance> out;
    std::set<std::tuple<std::string, std::string, std::string>> seen;
    for (auto& inst : instances) {
        if (!seen.emplace(inst.buggy_hunk, inst.context, inst.fixed_hunk).second) {
            ++st.duplicates;
            continue;
        }
        const std::string nb = normalize_ws(inst.buggy_hunk);
        const std::string nf = normalize_ws(inst.fixed_hunk);
        if (nb == nf) {
            ++st.unchanged;
            continue;
        }
        if (nf.empty()) {
            ++st.empty_fix;
            continue;
        }
        if (tok.count(inst.buggy_hunk) > input_budget || tok.count(inst.fixed_hunk) > output_budget) {
            ++st.over_budget;
            continue;
        }
        out.push_back(std::move(inst));
    }
    st.kept = out.size();
    if (stats) *stats = st;
    return out;
}

struct TrainingPair {
    std::string input;
    std::string label;
};

// input = "<prefix> <buggy> : <context>", label = fixed hunk; each flattened
// to a single line.
inline TrainingPair encode_training(const TrainingInstance& inst) {
    TrainingPair p;
    p.input = std::string(language_prefix(inst.language)) + " " + flatten(inst.buggy_hunk) + " :";
    const std::string ctx = flatten(inst.context);
    if (!ctx.empty()) p.input += " " + ctx;
    p.label = flatten(inst.fixed_hunk);
    return p;
}

// ---------------------------------------------------------------------------
// Instance file (JSON lines)
// ---------------------------------------------------------------------------

inline nlohmann::json to_json(const TrainingInstance& inst, bool with_encoding = true) {
    nlohmann::json j = {{"language", to_string(inst.language)},
                        {"buggy_hunk", inst.buggy_hunk},
                        {"context", inst.context},
                        {"fixed_hunk", inst.fixed_hunk},
                        {"origin", {{"source", inst.origin.source}, {"hunk", inst.origin.hunk}}}};
    if (with_encoding) {
        const auto enc = encode_training(inst);
        j["input"] = enc.input;
        j["label"] = enc.label;
    }
    return j;
}

inline TrainingInstance instance_from_json(const nlohmann::json& j) {
    TrainingInstance inst;
    inst.language = parse_language(j.at("language").get<std::string>());
    inst.buggy_hunk = j.at("buggy_hunk").get<std::string>();
    inst.context = j.at("context").get<std::string>();
    inst.fixed_hunk = j.at("fixed_hunk").get<std::string>();
    inst.origin.source = j.at("origin").at("source").get<std::string>();
    inst.origin.hunk = j.at("origin").at("hunk").get<std::size_t>();
    return inst;
}

inline void write_instances(std::ostream& out, const std::vector<TrainingInstance>& instances) {
    for (const auto& inst : instances) out << to_json(inst).dump() << "\n";
}

inline std::vector<TrainingInstance> read_instances(std::istream& in) {
    std::vector<TrainingInstance> out;
    std::string line;
    while (std::getline(in, line)) {
        if (trim(line).empty()) continue;
        out.push_back(instance_from_json(nlohmann::json::parse(line)));
    }
    return out;
}

// ---------------------------------------------------------------------------
// Corpus directories
// ---------------------------------------------------------------------------

struct MineStats {
    std::size_t pairs = 0;            // file pairs read
    std::size_t skipped_commits = 0;  // commit message present but not a bug fix
    std::size_t skipped_files = 0;    // unknown language or missing partner
    PreprocessStats rules;
};

struct MineResult {
    std::vector<TrainingInstance> instances;
    MineStats stats;
    std::vector<std::string> warnings;
};

inline std::string read_file(const std::filesystem::path& p) {
    std::ifstream in(p, std::ios::binary);
    if (!in) throw Error("cannot read " + p.string());
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

// Walks `dir` for `<id>.buggy`/`<id>.fixed` pairs (optional `<id>.msg` commit
// message) and unified diffs (`*.diff`, `*.patch`; text before the first file
// header is the commit message). The language comes from the extension inside
// `<id>` or from the diffed path. Files are visited in sorted path order.
inline MineResult mine_directory(const std::filesystem::path& dir, const Tokenizer& tok, std::size_t input_budget,
                                 std::size_t output_budget) {
    namespace fs = std::filesystem;
    if (!fs::is_directory(dir)) throw Error("input is not a readable directory: " + dir.string());
    std::vector<fs::path> files;
    for (const auto& e : fs::recursive_directory_iterator(dir)) {
        if (e.is_regular_file()) files.push_back(e.path());
    }
    std::sort(files.begin(), files.end());

    MineResult res;
    std::vector<TrainingInstance> extracted;
    for (const auto& p : files) {
        const std::string ext = p.extension().string();
        const std::string rel = fs::relative(p, dir).generic_string();
        if (ext == ".buggy") {
            fs::path stem = p;
            stem.replace_extension();
            const fs::path fixed = fs::path(stem.string() + ".fixed");
            const fs::path msg = fs::path(stem.string() + ".msg");
            const std::string id = fs::relative(stem, dir).generic_string();
            if (!fs::exists(fixed)) {
                res.warnings.push_back(id + ": missing .fixed partner");
                ++res.stats.skipped_files;
                continue;
            }
            const auto lang = language_from_path(stem.string());
            if (!lang) {
                res.warnings.push_back(id + ": cannot infer language");
                ++res.stats.skipped_files;
                continue;
            }
            if (fs::exists(msg) && !is_bugfix_commit(read_file(msg))) {
                ++res.stats.skipped_commits;
                continue;
            }
            ++res.stats.pairs;
            auto inst = extract_instances(read_file(p), read_file(fixed), *lang, id, &res.warnings);
            extracted.insert(extracted.end(), std::make_move_iterator(inst.begin()),
                             std::make_move_iterator(inst.end()));
        } else if (ext == ".diff" || ext == ".patch") {
            const auto doc = diff::parse_unified(read_file(p));
            if (!trim(doc.preamble).empty() && !is_bugfix_commit(doc.preamble)) {
                ++res.stats.skipped_commits;
                continue;
            }
            for (const auto& fp : doc.files) {
                const auto lang = language_from_path(fp.new_path);
                if (!lang) {
                    res.warnings.push_back(rel + ": cannot infer language of " + fp.new_path);
                    ++res.stats.skipped_files;
                    continue;
                }
                ++res.stats.pairs;
                std::size_t ordinal = 0;
                const std::string id = rel + ":" + fp.new_path;
                // A diff carries only fragments of each file; every unified hunk
                // is mined as its own old/new pair.
                for (const auto& uh : fp.hunks) {
                    auto inst = extract_instances(join_lines(uh.old_side()), join_lines(uh.new_side()), *lang, id,
                                                  &res.warnings);
                    for (auto& x : inst) {
                        x.origin.hunk = ++ordinal;
                        extracted.push_back(std::move(x));
                    }
                }
            }
        }
    }
    res.instances = preprocess(std::move(extracted), tok, input_budget, output_budget, &res.stats.rules);
    return res;
}

}  // namespace mendkit
