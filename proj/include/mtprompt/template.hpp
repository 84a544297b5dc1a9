#pragma once

#include <string>
#include <variant>
#include <vector>

#include "mtprompt/task.hpp"
#include "mtprompt/vocab.hpp"

namespace mtprompt {

// Template grammar, star-delimited:
//   *cls*            leading classifier marker
//   *sep+*           trailing separator marker
//   *mask*           the single mask slot
//   *sent_k*         sentence k verbatim
//   *sent-_k*        sentence k with one trailing punctuation mark removed
//   *sentl_k*        sentence k with its first letter lowercased
//   *+sent...*       a '+' right after '*' asks for a preceding space
// Text between directives is literal; '_' encodes a space inside literals.

enum class SentenceTransform {
    raw,
    strip_final_punct,
    lowercase_first,
};

struct ClsMarker {
    bool operator==(const ClsMarker &) const = default;
};
struct SepMarker {
    bool operator==(const SepMarker &) const = default;
};
struct MaskSlot {
    bool operator==(const MaskSlot &) const = default;
};
struct SentenceSlot {
    int index = 0;
    SentenceTransform transform = SentenceTransform::raw;
    bool leading_space = false;
    bool operator==(const SentenceSlot &) const = default;
};
struct Literal {
    std::string text; // decoded, i.e. with real spaces
    bool operator==(const Literal &) const = default;
};

using Segment = std::variant<ClsMarker, SepMarker, MaskSlot, SentenceSlot, Literal>;

struct TemplateAst {
    std::vector<Segment> segments;
    bool operator==(const TemplateAst &) const = default;

    int max_sentence_index() const;
};

struct CompositionFlags {
    bool include_od = false;
    bool include_sd = false;
    bool include_td = false;

    bool operator==(const CompositionFlags &) const = default;

    // Short form like "od+sd+td", or "none" when all flags are off.
    std::string to_string() const;
};

// Parses a template grammar string. Throws ErrorKind::malformed_template on
// unbalanced '*', unknown directives, and zero or multiple masks.
TemplateAst parse_template(const std::string &source);

// Inverse of parse_template; parse(serialize(ast)) == ast for canonical
// ASTs (no adjacent literals, which both parse and compose guarantee).
std::string serialize_template(const TemplateAst &ast);

// Builds the multi-dimensional task prompt for the given flag combination:
// [CLS] sentence0 . <OD> <SD> <TD with its mask> [SEP], with sentence 1
// following the mask for two-sentence tasks. When td is excluded the
// task's fallback cloze supplies the mask; a missing fallback is a
// composition error.
TemplateAst compose_mtprompt(const TaskSpec &task, const CompositionFlags &flags);

struct Rendered {
    std::vector<int> ids;
    int mask_position = 0;
};

// Renders an AST over a concrete example into model-ready token ids.
// Sentence slots are truncated right-to-left when the sequence would
// exceed max_len; template tokens are never dropped. A literal that starts
// with '.' drops that period when the previously emitted token already is
// terminal punctuation, so composed prompts do not double sentence-final
// periods.
Rendered render(const TemplateAst &ast, const std::vector<std::string> &sentences,
                const Vocab &vocab, int max_len);

// All surface text a template can contribute (literals plus, for composed
// use, description and cloze text) — used when building vocabularies.
std::vector<std::string> template_surface_text(const TemplateAst &ast);

} // namespace mtprompt
