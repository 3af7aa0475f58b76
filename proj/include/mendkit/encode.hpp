#pragma once

#include <cstddef>
#include <string>
#include <string_view>
#include <vector>

#include "mendkit/errors.hpp"
#include "mendkit/retrieval.hpp"
#include "mendkit/text.hpp"
#include "mendkit/tokenizer.hpp"

namespace mendkit {

struct TokenBudget {
    std::size_t input_limit = 512;
    std::size_t output_limit = 256;
};

// Generator input. All segments are stored flattened to a single line.
struct Prompt {
    std::string language_prefix;
    std::string hunk_text;
    std::vector<std::string> retrieved;  // most similar first
    std::string context_text;
    std::string rendered;
    std::size_t token_count = 0;
};

namespace detail {

// "<prefix> <hunk> :" -- the part truncation never touches.
inline std::string prompt_head(std::string_view prefix, std::string_view hunk) {
    std::string out(prefix);
    out.push_back(' ');
    out.append(hunk);
    out.append(" :");
    return out;
}

inline void render(Prompt& p, const Tokenizer& tok) {
    p.rendered = prompt_head(p.language_prefix, p.hunk_text);
    for (const auto& r : p.retrieved) {
        if (r.empty()) continue;
        p.rendered.push_back(' ');
        p.rendered.append(r);
    }
    if (!p.context_text.empty()) {
        p.rendered.push_back(' ');
        p.rendered.append(p.context_text);
    }
    p.token_count = tok.count(p.rendered);
}

}  // namespace detail

inline Prompt build_prompt(std::string_view prefix, std::string_view hunk, const std::vector<std::string>& retrieved,
                           std::string_view context, const Tokenizer& tok = ReferenceTokenizer{}) {
    Prompt p;
    p.language_prefix = flatten(prefix);
    p.hunk_text = flatten(hunk);
    for (const auto& r : retrieved) {
        auto f = flatten(r);
        if (!f.empty()) p.retrieved.push_back(std::move(f));
    }
    p.context_text = flatten(context);
    detail::render(p, tok);
    return p;
}

inline Prompt build_prompt(std::string_view prefix, std::string_view hunk, const std::vector<RetrievedLine>& retrieved,
                           const ContextSpan& context, const Tokenizer& tok = ReferenceTokenizer{}) {
    std::vector<std::string> texts;
    texts.reserve(retrieved.size());
    for (const auto& r : retrieved) texts.push_back(r.text);
    return build_prompt(prefix, hunk, texts, context.text, tok);
}

// Cuts tokens from the end until the prompt fits `budget.input_limit`: first
// the context tail, then whole retrieved lines starting with the least
// similar. Prefix, hunk and separator are never changed.
inline Prompt fit_to_budget(Prompt prompt, const TokenBudget& budget, const Tokenizer& tok = ReferenceTokenizer{}) {
    const std::size_t limit = budget.input_limit;
    const std::size_t head_tokens = tok.count(detail::prompt_head(prompt.language_prefix, prompt.hunk_text));
    if (head_tokens > limit) {
        throw HunkExceedsBudget("prefix, hunk and separator take " + std::to_string(head_tokens) +
                                " tokens; input limit is " + std::to_string(limit));
    }
    detail::render(prompt, tok);
    if (prompt.token_count <= limit) return prompt;

    std::size_t retrieved_tokens = 0;
    for (const auto& r : prompt.retrieved) retrieved_tokens += tok.count(r);
    const std::size_t used = head_tokens + retrieved_tokens;
    std::size_t keep = used < limit ? limit - used : 0;
    const std::string full_context = prompt.context_text;
    prompt.context_text = std::string(trim(tok.truncate(full_context, keep)));
    detail::render(prompt, tok);
    // Non-additive tokenizers may merge across the joins; shave until it fits.
    while (prompt.token_count > limit && !prompt.context_text.empty()) {
        keep = keep > 0 ? keep - 1 : 0;
        prompt.context_text = std::string(trim(tok.truncate(full_context, keep)));
        detail::render(prompt, tok);
    }
    while (prompt.token_count > limit && !prompt.retrieved.empty()) {
        prompt.retrieved.pop_back();
        detail::render(prompt, tok);
    }
    return prompt;
}

}  // namespace mendkit
