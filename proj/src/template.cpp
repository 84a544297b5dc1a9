#include "mtprompt/template.hpp"

#include <algorithm>
#include <cctype>

#include "mtprompt/errors.hpp"

namespace mtprompt {

namespace {

bool is_terminal_punct(const std::string &token) {
    return token == "." || token == "!" || token == "?";
}

std::string decode_literal(const std::string &raw) {
    std::string out;
    out.reserve(raw.size());
    for (char c : raw) out.push_back(c == '_' ? ' ' : c);
    return out;
}

std::string encode_literal(const std::string &text) {
    std::string out;
    out.reserve(text.size());
    for (char c : text) {
        if (c == '*' || c == '_') {
            throw Error(ErrorKind::malformed_template,
                        "literal cannot be serialized: contains reserved character '" +
                            std::string(1, c) + "'");
        }
        out.push_back(c == ' ' ? '_' : c);
    }
    return out;
}

Segment parse_directive(const std::string &body) {
    std::string d = body;
    bool leading_space = false;
    if (!d.empty() && d[0] == '+') {
        leading_space = true;
        d = d.substr(1);
    }
    if (!leading_space) {
        if (d == "cls") return ClsMarker{};
        if (d == "sep+") return SepMarker{};
        if (d == "mask") return MaskSlot{};
    }
    SentenceTransform transform = SentenceTransform::raw;
    std::string head;
    if (d.rfind("sent_", 0) == 0) {
        transform = SentenceTransform::raw;
        head = d.substr(5);
    } else if (d.rfind("sent-_", 0) == 0) {
        transform = SentenceTransform::strip_final_punct;
        head = d.substr(6);
    } else if (d.rfind("sentl_", 0) == 0) {
        transform = SentenceTransform::lowercase_first;
        head = d.substr(6);
    } else {
        throw Error(ErrorKind::malformed_template, "unknown directive '*" + body + "*'");
    }
    if (head.empty() || !std::all_of(head.begin(), head.end(), [](unsigned char c) {
            return std::isdigit(c);
        })) {
        throw Error(ErrorKind::malformed_template,
                    "bad sentence index in directive '*" + body + "*'");
    }
    SentenceSlot slot;
    slot.index = std::stoi(head);
    slot.transform = transform;
    slot.leading_space = leading_space;
    return slot;
}

void append_literal(std::vector<Segment> &segments, const std::string &text) {
    if (text.empty()) return;
    if (!segments.empty() && std::holds_alternative<Literal>(segments.back())) {
        std::get<Literal>(segments.back()).text += text;
    } else {
        segments.push_back(Literal{text});
    }
}

int count_masks(const TemplateAst &ast) {
    int n = 0;
    for (const auto &seg : ast.segments) {
        if (std::holds_alternative<MaskSlot>(seg)) ++n;
    }
    return n;
}

// Splits cloze text at its single [mask] placeholder (case-insensitive).
std::pair<std::string, std::string> split_at_placeholder(const std::string &text) {
    static const std::string needle = "[mask]";
    for (size_t i = 0; i + needle.size() <= text.size(); ++i) {
        bool match = true;
        for (size_t j = 0; j < needle.size(); ++j) {
            if (std::tolower(static_cast<unsigned char>(text[i + j])) != needle[j]) {
                match = false;
                break;
            }
        }
        if (match) {
            return {text.substr(0, i), text.substr(i + needle.size())};
        }
    }
    throw Error(ErrorKind::composition, "cloze text has no [mask] placeholder: " + text);
}

std::string rstrip(std::string s) {
    while (!s.empty() && std::isspace(static_cast<unsigned char>(s.back()))) s.pop_back();
    return s;
}

} // namespace

int TemplateAst::max_sentence_index() const {
    int mx = -1;
    for (const auto &seg : segments) {
        if (const auto *slot = std::get_if<SentenceSlot>(&seg)) {
            mx = std::max(mx, slot->index);
        }
    }
    return mx;
}

std::string CompositionFlags::to_string() const {
    std::string s;
    if (include_od) s += "od";
    if (include_sd) s += s.empty() ? "sd" : "+sd";
    if (include_td) s += s.empty() ? "td" : "+td";
    return s.empty() ? "none" : s;
}

TemplateAst parse_template(const std::string &source) {
    if (source.empty()) {
        throw Error(ErrorKind::malformed_template, "empty template");
    }
    TemplateAst ast;
    size_t i = 0;
    while (i < source.size()) {
        if (source[i] == '*') {
            size_t close = source.find('*', i + 1);
            if (close == std::string::npos) {
                throw Error(ErrorKind::malformed_template,
                            "unbalanced '*' at offset " + std::to_string(i));
            }
            ast.segments.push_back(parse_directive(source.substr(i + 1, close - i - 1)));
            i = close + 1;
        } else {
            size_t next = source.find('*', i);
            if (next == std::string::npos) next = source.size();
            append_literal(ast.segments, decode_literal(source.substr(i, next - i)));
            i = next;
        }
    }
    int masks = count_masks(ast);
    if (masks != 1) {
        throw Error(ErrorKind::malformed_template,
                    "template must contain exactly one *mask* (found " + std::to_string(masks) +
                        "): " + source);
    }
    return ast;
}

std::string serialize_template(const TemplateAst &ast) {
    std::string out;
    for (const auto &seg : ast.segments) {
        if (std::holds_alternative<ClsMarker>(seg)) {
            out += "*cls*";
        } else if (std::holds_alternative<SepMarker>(seg)) {
            out += "*sep+*";
        } else if (std::holds_alternative<MaskSlot>(seg)) {
            out += "*mask*";
        } else if (const auto *slot = std::get_if<SentenceSlot>(&seg)) {
            out += '*';
            if (slot->leading_space) out += '+';
            switch (slot->transform) {
            case SentenceTransform::raw: out += "sent_"; break;
            case SentenceTransform::strip_final_punct: out += "sent-_"; break;
            case SentenceTransform::lowercase_first: out += "sentl_"; break;
            }
            out += std::to_string(slot->index);
            out += '*';
        } else {
            out += encode_literal(std::get<Literal>(seg).text);
        }
    }
    return out;
}

TemplateAst compose_mtprompt(const TaskSpec &task, const CompositionFlags &flags) {
    if (!flags.include_td && task.fallback_cloze.empty()) {
        throw Error(ErrorKind::composition,
                    "task '" + task.name +
                        "': composition without td needs a fallback_cloze to carry the mask");
    }
    TemplateAst ast;
    ast.segments.push_back(ClsMarker{});
    ast.segments.push_back(SentenceSlot{0, SentenceTransform::raw, false});
    append_literal(ast.segments, ".");

    if (flags.include_od) append_literal(ast.segments, " " + rstrip(task.descriptions.od));
    if (flags.include_sd) append_literal(ast.segments, " " + rstrip(task.descriptions.sd));

    const std::string &cloze = flags.include_td ? task.descriptions.td : task.fallback_cloze;
    auto [before, after] = split_at_placeholder(rstrip(cloze));
    before = rstrip(before);
    if (!before.empty()) append_literal(ast.segments, " " + before);
    ast.segments.push_back(MaskSlot{});
    if (!after.empty()) append_literal(ast.segments, after);

    if (task.sentence_arity == 2) {
        ast.segments.push_back(SentenceSlot{1, SentenceTransform::raw, true});
        append_literal(ast.segments, ".");
    }
    ast.segments.push_back(SepMarker{});
    return ast;
}

std::vector<std::string> template_surface_text(const TemplateAst &ast) {
    std::vector<std::string> out;
    for (const auto &seg : ast.segments) {
        if (const auto *lit = std::get_if<Literal>(&seg)) {
            out.push_back(lit->text);
        }
    }
    return out;
}

Rendered render(const TemplateAst &ast, const std::vector<std::string> &sentences,
                const Vocab &vocab, int max_len) {
    int arity_needed = ast.max_sentence_index() + 1;
    if (static_cast<int>(sentences.size()) < arity_needed) {
        throw Error(ErrorKind::invalid_argument,
                    "render: template expects " + std::to_string(arity_needed) +
                        " sentence(s), got " + std::to_string(sentences.size()));
    }

    // First pass: tokenize each segment. Sentence slots stay separate so the
    // truncation budget can be applied to them alone.
    struct Piece {
        std::vector<int> ids;
        bool is_sentence = false;
        bool has_mask = false;
    };
    std::vector<Piece> pieces;
    std::string prev_token; // last surface token emitted so far
    int template_tokens = 0;

    auto push_fixed = [&](std::vector<int> ids, bool mask) {
        Piece p;
        p.ids = std::move(ids);
        p.has_mask = mask;
        template_tokens += static_cast<int>(p.ids.size());
        if (!p.ids.empty()) prev_token = vocab.token(p.ids.back());
        pieces.push_back(std::move(p));
    };

    for (const auto &seg : ast.segments) {
        if (std::holds_alternative<ClsMarker>(seg)) {
            push_fixed({Vocab::cls_id}, false);
            prev_token.clear(); // markers are not punctuation context
        } else if (std::holds_alternative<SepMarker>(seg)) {
            push_fixed({Vocab::sep_id}, false);
        } else if (std::holds_alternative<MaskSlot>(seg)) {
            push_fixed({Vocab::mask_id}, true);
            prev_token.clear();
        } else if (const auto *slot = std::get_if<SentenceSlot>(&seg)) {
            std::string text = sentences[static_cast<size_t>(slot->index)];
            if (slot->transform == SentenceTransform::strip_final_punct) {
                std::string t = rstrip(text);
                if (!t.empty() && std::ispunct(static_cast<unsigned char>(t.back()))) {
                    t.pop_back();
                }
                text = t;
            } else if (slot->transform == SentenceTransform::lowercase_first) {
                if (!text.empty()) {
                    text[0] = static_cast<char>(std::tolower(static_cast<unsigned char>(text[0])));
                }
            }
            Piece p;
            p.ids = tokenize(text, vocab);
            p.is_sentence = true;
            if (!p.ids.empty()) prev_token = vocab.token(p.ids.back());
            pieces.push_back(std::move(p));
        } else {
            std::string text = std::get<Literal>(seg).text;
            // A composed prompt always places "." after the raw input; skip
            // it when the sentence already ended with terminal punctuation.
            if (!text.empty() && text[0] == '.' && is_terminal_punct(prev_token)) {
                text.erase(text.begin());
            }
            push_fixed(tokenize(text, vocab), false);
        }
    }

    if (template_tokens > max_len) {
        throw Error(ErrorKind::invalid_argument,
                    "render: template alone has " + std::to_string(template_tokens) +
                        " tokens, exceeding max_len " + std::to_string(max_len));
    }

    // Truncate sentence slots right-to-left until the sequence fits.
    int sentence_tokens = 0;
    for (const Piece &p : pieces) {
        if (p.is_sentence) sentence_tokens += static_cast<int>(p.ids.size());
    }
    int excess = template_tokens + sentence_tokens - max_len;
    for (size_t i = pieces.size(); i-- > 0 && excess > 0;) {
        if (!pieces[i].is_sentence) continue;
        int cut = std::min<int>(excess, static_cast<int>(pieces[i].ids.size()));
        pieces[i].ids.resize(pieces[i].ids.size() - static_cast<size_t>(cut));
        excess -= cut;
    }

    Rendered out;
    for (const Piece &p : pieces) {
        if (p.has_mask) out.mask_position = static_cast<int>(out.ids.size());
        out.ids.insert(out.ids.end(), p.ids.begin(), p.ids.end());
    }
    return out;
}

} // namespace mtprompt
