#pragma once

#include <chrono>
#include <string>
#include <vector>

#include <httplib.h>
#include <nlohmann/json.hpp>

#include "mendkit/generate.hpp"

namespace mendkit {

// Checkpoint served over HTTP:
//   POST /generate {prompt, beam_size, checkpoint} -> {candidates: [{text, score}]}
// Any non-200 status or transport failure is BackendUnavailable; bodies that
// break the contract are MalformedResponse.
class RemoteGenerator final : public Generator {
public:
    RemoteGenerator(std::string endpoint, std::size_t checkpoint,
                    std::chrono::seconds timeout = std::chrono::seconds(600))
        : endpoint_(std::move(endpoint)), checkpoint_(checkpoint), timeout_(timeout) {}

    std::vector<RawCandidate> propose(const GenerationRequest& request) const override {
        httplib::Client client(endpoint_);
        client.set_connection_timeout(std::chrono::seconds(10));
        client.set_read_timeout(timeout_);
        const nlohmann::json body = {{"prompt", request.prompt ? request.prompt->rendered : std::string()},
                                     {"beam_size", request.beam_size},
                                     {"checkpoint", checkpoint_}};
        const std::string where = endpoint_ + " checkpoint " + std::to_string(checkpoint_);
        auto res = client.Post("/generate", body.dump(), "application/json");
        if (!res) throw BackendUnavailable(where + ": " + httplib::to_string(res.error()));
        if (res->status != 200) throw BackendUnavailable(where + ": HTTP " + std::to_string(res->status));

        nlohmann::json doc;
        try {
            doc = nlohmann::json::parse(res->body);
        } catch (const nlohmann::json::parse_error& e) {
            throw MalformedResponse(where + ": " + e.what());
        }
        if (!doc.is_object() || !doc.contains("candidates") || !doc["candidates"].is_array()) {
            throw MalformedResponse(where + ": response lacks a 'candidates' array");
        }
        const auto& cands = doc["candidates"];
        if (cands.size() > request.beam_size) {
            throw MalformedResponse(where + ": " + std::to_string(cands.size()) + " candidates exceed beam size " +
                                    std::to_string(request.beam_size));
        }
        std::vector<RawCandidate> out;
        out.reserve(cands.size());
        for (const auto& c : cands) out.push_back(detail::candidate_from_json(c, where));
        return out;
    }

private:
    std::string endpoint_;
    std::size_t checkpoint_;
    std::chrono::seconds timeout_;
};

}  // namespace mendkit
