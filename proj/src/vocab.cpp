#include "mtprompt/vocab.hpp"

#include <algorithm>
#include <cctype>
#include <set>

#include "mtprompt/errors.hpp"

namespace mtprompt {

static const char *kSpecials[Vocab::n_special] = {"[PAD]", "[UNK]", "[CLS]", "[SEP]", "[MASK]"};

std::vector<std::string> word_split(std::string_view text) {
    std::vector<std::string> out;
    std::string cur;
    for (char raw : text) {
        unsigned char c = static_cast<unsigned char>(raw);
        if (std::isspace(c)) {
            if (!cur.empty()) {
                out.push_back(cur);
                cur.clear();
            }
        } else if (std::isalnum(c)) {
            cur.push_back(static_cast<char>(std::tolower(c)));
        } else {
            // punctuation and anything else: one token per character
            if (!cur.empty()) {
                out.push_back(cur);
                cur.clear();
            }
            out.push_back(std::string(1, raw));
        }
    }
    if (!cur.empty()) out.push_back(cur);
    return out;
}

Vocab make_vocab(const std::vector<std::string> &words) {
    std::set<std::string> uniq;
    for (const auto &w : words) {
        for (auto &piece : word_split(w)) {
            uniq.insert(piece);
        }
    }
    Vocab v;
    v.tokens.reserve(uniq.size() + Vocab::n_special);
    for (const char *s : kSpecials) v.tokens.emplace_back(s);
    for (const auto &t : uniq) v.tokens.push_back(t);
    for (int i = 0; i < v.size(); ++i) {
        auto [it, inserted] = v.index.emplace(v.tokens[static_cast<size_t>(i)], i);
        if (!inserted) {
            throw Error(ErrorKind::invalid_argument,
                        "duplicate token in vocabulary: " + v.tokens[static_cast<size_t>(i)]);
        }
    }
    return v;
}

std::vector<int> tokenize(std::string_view text, const Vocab &vocab) {
    std::vector<int> ids;
    for (auto &piece : word_split(text)) {
        int id = vocab.id_of(piece);
        ids.push_back(id >= Vocab::n_special ? id : Vocab::unk_id);
    }
    return ids;
}

std::string detokenize(const std::vector<int> &ids, const Vocab &vocab) {
    std::string out;
    for (size_t i = 0; i < ids.size(); ++i) {
        if (i) out.push_back(' ');
        out += vocab.token(ids[i]);
    }
    return out;
}

} // namespace mtprompt
