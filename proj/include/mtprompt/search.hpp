#pragma once

#include <string>
#include <vector>

#include "mtprompt/data.hpp"
#include "mtprompt/model.hpp"
#include "mtprompt/template.hpp"
#include "mtprompt/verbalizer.hpp"

namespace mtprompt {

struct PromptCandidate {
    int id = 0;
    TemplateAst ast;
    bool manual = false;
    CompositionFlags flags; // meaningful when !manual
    std::string source;     // template string (serialized form)

    std::string provenance() const {
        return manual ? "manual:" + source : "composed:" + flags.to_string();
    }
};

struct CandidateScore {
    int candidate_id = 0;
    double score = 0.0; // sum of gold-label probabilities over the split
};

// The seven nonempty od/sd/td combinations (in ablation order: td, od, sd,
// sd+td, od+td, od+sd, od+sd+td) plus any manual template strings, parsed
// and deduplicated by serialized form. Ids are assigned in that order.
std::vector<PromptCandidate> enumerate_candidates(const TaskSpec &task,
                                                  const std::vector<std::string> &manual_templates);

// Zero-shot candidate score: sum over the training half of the split of
// the gold label's restricted-softmax probability under the (pretrained,
// not fine-tuned) model.
CandidateScore score_candidate(const MlmModel &model, const PromptCandidate &candidate,
                               const FewShotSplit &split, const LabelMapping &mapping);

struct TopkResult {
    std::vector<CandidateScore> ranked; // descending score, ties to lower id
    bool clamped = false;               // k exceeded the candidate count
};

TopkResult select_topk(std::vector<CandidateScore> scores, int k);

const PromptCandidate &manual_select(const std::vector<PromptCandidate> &candidates, int id);

} // namespace mtprompt
