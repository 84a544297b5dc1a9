#pragma once

#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

namespace mtprompt {

// Word-level vocabulary. Slots 0..4 are always the special tokens, in this
// order: [PAD] [UNK] [CLS] [SEP] [MASK]. Regular tokens follow, sorted
// lexicographically, so vocabulary construction is deterministic.
struct Vocab {
    std::vector<std::string> tokens;
    std::unordered_map<std::string, int> index;

    static constexpr int pad_id = 0;
    static constexpr int unk_id = 1;
    static constexpr int cls_id = 2;
    static constexpr int sep_id = 3;
    static constexpr int mask_id = 4;
    static constexpr int n_special = 5;

    int size() const { return static_cast<int>(tokens.size()); }

    bool contains(const std::string &t) const { return index.count(t) != 0; }

    // Returns -1 when absent.
    int id_of(const std::string &t) const {
        auto it = index.find(t);
        return it == index.end() ? -1 : it->second;
    }

    const std::string &token(int id) const { return tokens.at(static_cast<size_t>(id)); }
};

// Builds a vocabulary from a bag of surface forms. Inputs are run through
// the same segmentation as tokenize(), deduplicated and sorted.
Vocab make_vocab(const std::vector<std::string> &words);

// Lowercased segmentation into alphanumeric runs and single punctuation
// characters. Whitespace separates, never appears in output.
std::vector<std::string> word_split(std::string_view text);

// Total function: unknown surface forms map to [UNK]. Never emits special
// ids other than unk_id; the bracketed special spellings do not survive
// word_split intact.
std::vector<int> tokenize(std::string_view text, const Vocab &vocab);

// Space-joined token strings for the given ids (diagnostics and tests).
std::string detokenize(const std::vector<int> &ids, const Vocab &vocab);

} // namespace mtprompt
