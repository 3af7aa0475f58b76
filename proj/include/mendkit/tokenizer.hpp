#pragma once

#include <cstddef>
#include <string_view>
#include <vector>

#include "mendkit/text.hpp"

namespace mendkit {

// Byte offsets [begin, end) of one token inside the tokenized text.
struct TokenSpan {
    std::size_t begin = 0;
    std::size_t end = 0;
};

// Counting/truncation interface. Budgets are enforced through this so that a
// model-specific subword tokenizer can replace the reference one.
class Tokenizer {
public:
    virtual ~Tokenizer() = default;

    virtual std::vector<TokenSpan> tokenize(std::string_view text) const = 0;

    virtual std::size_t count(std::string_view text) const { return tokenize(text).size(); }

    // Longest prefix of `text` holding at most `max_tokens` tokens, with
    // trailing whitespace removed.
    std::string_view truncate(std::string_view text, std::size_t max_tokens) const {
        const auto spans = tokenize(text);
        if (spans.size() <= max_tokens) return text;
        if (max_tokens == 0) return text.substr(0, 0);
        return text.substr(0, spans[max_tokens - 1].end);
    }
};

// Splits on whitespace and at punctuation boundaries: a token is either a
// maximal run of [A-Za-z0-9_] or a single other non-space byte.
class ReferenceTokenizer final : public Tokenizer {
public:
    std::vector<TokenSpan> tokenize(std::string_view text) const override {
        std::vector<TokenSpan> out;
        std::size_t i = 0;
        while (i < text.size()) {
            const char c = text[i];
            if (is_space(c)) {
                ++i;
            } else if (is_word(c)) {
                std::size_t j = i + 1;
                while (j < text.size() && is_word(text[j])) ++j;
                out.push_back({i, j});
                i = j;
            } else {
                out.push_back({i, i + 1});
                ++i;
            }
        }
        return out;
    }

    std::size_t count(std::string_view text) const override {
        std::size_t n = 0;
        std::size_t i = 0;
        while (i < text.size()) {
            const char c = text[i];
            if (is_space(c)) {
                ++i;
                continue;
            }
            ++n;
            if (is_word(c)) {
                while (i < text.size() && is_word(text[i])) ++i;
            } else {
                ++i;
            }
        }
        return n;
    }

private:
    static bool is_word(char c) { return is_alnum(c) || c == '_'; }
};

}  // namespace mendkit
