#pragma once

#include <algorithm>
#include <array>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <optional>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "mendkit/errors.hpp"

namespace mendkit {

inline constexpr std::array<std::size_t, 7> kTopThresholds = {1, 5, 10, 50, 100, 200, 500};

struct Summary {
    std::size_t count = 0;
    double min = 0, max = 0, median = 0, mean = 0;
};

inline Summary summarize(std::vector<double> xs) {
    Summary s;
    s.count = xs.size();
    if (xs.empty()) return s;
    std::sort(xs.begin(), xs.end());
    s.min = xs.front();
    s.max = xs.back();
    const std::size_t n = xs.size();
    s.median = n % 2 ? xs[n / 2] : (xs[n / 2 - 1] + xs[n / 2]) / 2.0;
    double sum = 0;
    for (double x : xs) sum += x;
    s.mean = sum / static_cast<double>(n);
    return s;
}

// Number of ranks at or below each threshold.
inline std::vector<std::size_t> top_k_counts(const std::vector<std::size_t>& ranks) {
    std::vector<std::size_t> out;
    for (std::size_t k : kTopThresholds)
        out.push_back(static_cast<std::size_t>(
            std::count_if(ranks.begin(), ranks.end(), [k](std::size_t r) { return r >= 1 && r <= k; })));
    return out;
}

struct ReportStats {
    std::size_t reports = 0;
    std::size_t plausible = 0;
    std::size_t exhausted = 0;
    std::size_t errors = 0;
    std::size_t exact_matches = 0;
    Summary npc_all, npc_plausible, time_all, time_plausible, rank;
    std::vector<std::size_t> top_k;
    std::vector<std::string> skipped;  // unreadable or foreign files
};

inline ReportStats aggregate_reports(const std::vector<nlohmann::json>& reports) {
    ReportStats st;
    std::vector<double> npc_all, npc_ok, time_all, time_ok, ranks_d;
    std::vector<std::size_t> ranks;
    for (const auto& r : reports) {
        ++st.reports;
        const std::string status = r.value("status", "");
        const double npc = r.value("npc", 0.0);
        double t = 0;
        if (r.contains("timings") && r["timings"].is_object()) t = r["timings"].value("total_s", 0.0);
        if (status == "error") {
            ++st.errors;
            continue;
        }
        npc_all.push_back(npc);
        time_all.push_back(t);
        if (status == "plausible") {
            ++st.plausible;
            npc_ok.push_back(npc);
            time_ok.push_back(t);
            if (r.contains("first_plausible_rank") && r["first_plausible_rank"].is_number()) {
                ranks.push_back(r["first_plausible_rank"].get<std::size_t>());
                ranks_d.push_back(static_cast<double>(ranks.back()));
            }
        } else {
            ++st.exhausted;
        }
        if (r.contains("exact_match") && r["exact_match"].is_boolean() && r["exact_match"].get<bool>())
            ++st.exact_matches;
    }
    st.npc_all = summarize(npc_all);
    st.npc_plausible = summarize(npc_ok);
    st.time_all = summarize(time_all);
    st.time_plausible = summarize(time_ok);
    st.rank = summarize(ranks_d);
    st.top_k = top_k_counts(ranks);
    return st;
}

// Reads every *.report.json in `dir` (sorted by name).
inline ReportStats collect_stats(const std::filesystem::path& dir) {
    namespace fs = std::filesystem;
    if (!fs::is_directory(dir)) throw InvalidArgument("not a directory: " + dir.string());
    std::vector<fs::path> files;
    for (const auto& e : fs::directory_iterator(dir)) {
        const std::string name = e.path().filename().string();
        if (e.is_regular_file() && name.size() > 12 && name.ends_with(".report.json")) files.push_back(e.path());
    }
    std::sort(files.begin(), files.end());
    std::vector<nlohmann::json> reports;
    std::vector<std::string> skipped;
    for (const auto& f : files) {
        std::ifstream in(f);
        try {
            auto j = nlohmann::json::parse(in);
            if (j.is_object() && j.value("kind", "") == "mendkit-repair-report") reports.push_back(std::move(j));
            else skipped.push_back(f.filename().string());
        } catch (const nlohmann::json::exception&) {
            skipped.push_back(f.filename().string());
        }
    }
    ReportStats st = aggregate_reports(reports);
    st.skipped = std::move(skipped);
    return st;
}

inline nlohmann::json summary_json(const Summary& s) {
    if (s.count == 0) return {{"count", 0}, {"min", nullptr}, {"max", nullptr}, {"median", nullptr}, {"mean", nullptr}};
    return {{"count", s.count}, {"min", s.min}, {"max", s.max}, {"median", s.median}, {"mean", s.mean}};
}

inline nlohmann::json to_json(const ReportStats& st) {
    nlohmann::json top = nlohmann::json::object();
    for (std::size_t i = 0; i < kTopThresholds.size(); ++i)
        top["top-" + std::to_string(kTopThresholds[i])] = st.top_k.at(i);
    return {{"reports", st.reports},
            {"plausible", st.plausible},
            {"exhausted", st.exhausted},
            {"errors", st.errors},
            {"exact_matches", st.exact_matches},
            {"npc", {{"all", summary_json(st.npc_all)}, {"plausible", summary_json(st.npc_plausible)}}},
            {"time_s", {{"all", summary_json(st.time_all)}, {"plausible", summary_json(st.time_plausible)}}},
            {"first_plausible_rank", summary_json(st.rank)},
            {"ranking", top},
            {"skipped", st.skipped}};
}

namespace detail {

inline std::string fmt_num(double v) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.2f", v);
    return buf;
}

inline std::string summary_row(const std::string& label, const Summary& s) {
    char buf[160];
    if (s.count == 0) {
        std::snprintf(buf, sizeof buf, "%-22s %6zu %10s %10s %10s %10s\n", label.c_str(), s.count, "-", "-", "-", "-");
    } else {
        std::snprintf(buf, sizeof buf, "%-22s %6zu %10s %10s %10s %10s\n", label.c_str(), s.count,
                      fmt_num(s.min).c_str(), fmt_num(s.max).c_str(), fmt_num(s.median).c_str(),
                      fmt_num(s.mean).c_str());
    }
    return buf;
}

}  // namespace detail

inline std::string render_stats(const ReportStats& st) {
    std::string out;
    out += "reports " + std::to_string(st.reports) + "  plausible " + std::to_string(st.plausible) + "  exhausted " +
           std::to_string(st.exhausted) + "  errors " + std::to_string(st.errors) + "  exact " +
           std::to_string(st.exact_matches) + "\n\n";
    char head[160];
    std::snprintf(head, sizeof head, "%-22s %6s %10s %10s %10s %10s\n", "", "n", "min", "max", "median", "mean");
    out += head;
    out += detail::summary_row("npc (plausible)", st.npc_plausible);
    out += detail::summary_row("npc (all)", st.npc_all);
    out += detail::summary_row("time s (plausible)", st.time_plausible);
    out += detail::summary_row("time s (all)", st.time_all);
    out += detail::summary_row("first plausible rank", st.rank);
    out += "\n";
    for (std::size_t i = 0; i < kTopThresholds.size(); ++i) {
        char row[64];
        std::snprintf(row, sizeof row, "top-%-4zu %6zu\n", kTopThresholds[i], st.top_k.at(i));
        out += row;
    }
    return out;
}

}  // namespace mendkit
