#pragma once

#include <cstddef>
#include <fstream>
#include <future>
#include <map>
#include <memory>
#include <string>
#include <utility>
#include <vector>

#include <nlohmann/json.hpp>

#include "mendkit/encode.hpp"
#include "mendkit/errors.hpp"
#include "mendkit/text.hpp"

namespace mendkit {

// One beam entry as produced by a checkpoint. Empty text is a deletion.
struct RawCandidate {
    std::string text;
    double score = 0.0;  // sequence log-probability, higher is better
};

struct CandidatePatch {
    std::string text;
    std::string normalized;
    std::size_t checkpoint = 1;  // 1..k
    std::size_t rank = 1;        // 1..t, position in that checkpoint's beam
    double score = 0.0;
};

struct EnsembleConfig {
    std::size_t k = 5;
    std::size_t t = 100;
};

struct GenerationRequest {
    std::string hunk_id;
    const Prompt* prompt = nullptr;
    std::size_t beam_size = 1;
    std::size_t checkpoint = 1;
};

// One checkpoint. Implementations must tolerate concurrent calls.
class Generator {
public:
    virtual ~Generator() = default;
    virtual std::vector<RawCandidate> propose(const GenerationRequest& request) const = 0;
};

namespace detail {

inline void check_beam_order(const std::vector<RawCandidate>& beam, const std::string& where) {
    for (std::size_t i = 1; i < beam.size(); ++i) {
        if (beam[i].score > beam[i - 1].score) {
            throw MalformedResponse(where + ": scores increase at beam position " + std::to_string(i + 1));
        }
    }
}

inline RawCandidate candidate_from_json(const nlohmann::json& j, const std::string& where) {
    if (!j.is_object() || !j.contains("text") || !j.contains("score") || !j["text"].is_string() ||
        !j["score"].is_number()) {
        throw MalformedResponse(where + ": candidate needs string 'text' and numeric 'score'");
    }
    return {j["text"].get<std::string>(), j["score"].get<double>()};
}

}  // namespace detail

// Recorded beams: hunk id -> one beam per checkpoint.
class ReplayStore {
public:
    ReplayStore() = default;

    static ReplayStore from_json(const nlohmann::json& doc) {
        if (!doc.is_object()) throw MalformedResponse("replay document must be an object keyed by hunk id");
        ReplayStore store;
        for (const auto& [hunk_id, beams] : doc.items()) {
            if (!beams.is_array()) throw MalformedResponse("replay entry '" + hunk_id + "' must be a list of beams");
            auto& dest = store.beams_[hunk_id];
            for (std::size_t c = 0; c < beams.size(); ++c) {
                const std::string where = "replay '" + hunk_id + "' checkpoint " + std::to_string(c + 1);
                if (!beams[c].is_array()) throw MalformedResponse(where + ": beam must be an array");
                std::vector<RawCandidate> beam;
                for (const auto& cand : beams[c]) beam.push_back(detail::candidate_from_json(cand, where));
                detail::check_beam_order(beam, where);
                dest.push_back(std::move(beam));
            }
        }
        return store;
    }

    static ReplayStore load(const std::string& path) {
        std::ifstream in(path);
        if (!in) throw BackendUnavailable("cannot open replay file " + path);
        try {
            return from_json(nlohmann::json::parse(in));
        } catch (const nlohmann::json::parse_error& e) {
            throw MalformedResponse("replay file " + path + ": " + e.what());
        }
    }

    // Empty when the hunk or checkpoint was never recorded.
    std::vector<RawCandidate> beam(const std::string& hunk_id, std::size_t checkpoint) const {
        auto it = beams_.find(hunk_id);
        if (it == beams_.end() || checkpoint == 0 || checkpoint > it->second.size()) return {};
        return it->second[checkpoint - 1];
    }

    void set(const std::string& hunk_id, std::vector<std::vector<RawCandidate>> beams) {
        beams_[hunk_id] = std::move(beams);
    }

private:
    std::map<std::string, std::vector<std::vector<RawCandidate>>> beams_;
};

// Serves one checkpoint out of a ReplayStore, keyed by hunk id.
class ReplayGenerator final : public Generator {
public:
    ReplayGenerator(std::shared_ptr<const ReplayStore> store, std::size_t checkpoint)
        : store_(std::move(store)), checkpoint_(checkpoint) {}

    std::vector<RawCandidate> propose(const GenerationRequest& request) const override {
        auto beam = store_->beam(request.hunk_id, checkpoint_);
        if (beam.size() > request.beam_size) beam.resize(request.beam_size);
        return beam;
    }

private:
    std::shared_ptr<const ReplayStore> store_;
    std::size_t checkpoint_;
};

// Calls a backend and enforces the propose contract.
inline std::vector<RawCandidate> propose(const Generator& gen, const GenerationRequest& request) {
    if (request.beam_size < 1) throw InvalidArgument("beam size must be >= 1");
    auto out = gen.propose(request);
    const std::string where = "checkpoint " + std::to_string(request.checkpoint);
    if (out.size() > request.beam_size) {
        throw MalformedResponse(where + ": returned " + std::to_string(out.size()) + " candidates for beam size " +
                                std::to_string(request.beam_size));
    }
    detail::check_beam_order(out, where);
    return out;
}

// Runs the k checkpoints concurrently and returns their beams in checkpoint
// order, each candidate tagged with (checkpoint, rank). A failing backend
// contributes an empty beam and a warning.
inline std::vector<std::vector<CandidatePatch>> ensemble_generate(
    const std::vector<std::shared_ptr<const Generator>>& backends, const std::string& hunk_id, const Prompt& prompt,
    const EnsembleConfig& cfg, std::vector<std::string>* warnings = nullptr) {
    if (cfg.k < 1 || cfg.t < 1) throw InvalidArgument("ensemble needs k >= 1 and t >= 1");
    if (backends.size() != cfg.k) {
        throw InvalidArgument("expected " + std::to_string(cfg.k) + " backends, got " +
                              std::to_string(backends.size()));
    }
    std::vector<std::future<std::vector<RawCandidate>>> pending;
    pending.reserve(cfg.k);
    for (std::size_t i = 0; i < cfg.k; ++i) {
        GenerationRequest req{hunk_id, &prompt, cfg.t, i + 1};
        pending.push_back(std::async(std::launch::async, [gen = backends[i], req] { return propose(*gen, req); }));
    }
    std::vector<std::vector<CandidatePatch>> out(cfg.k);
    for (std::size_t i = 0; i < cfg.k; ++i) {
        try {
            auto beam = pending[i].get();
            out[i].reserve(beam.size());
            for (std::size_t r = 0; r < beam.size(); ++r) {
                out[i].push_back({beam[r].text, normalize_ws(beam[r].text), i + 1, r + 1, beam[r].score});
            }
        } catch (const Error& e) {
            if (warnings) warnings->push_back("checkpoint " + std::to_string(i + 1) + " failed: " + e.what());
        }
    }
    return out;
}

}  // namespace mendkit
