#pragma once

#include <span>
#include <string>
#include <vector>

#include "mtprompt/model.hpp"
#include "mtprompt/task.hpp"
#include "mtprompt/vocab.hpp"

namespace mtprompt {

// Injective map from task labels to single vocabulary tokens, in task label
// order. That order defines the alignment of ClassProbabilities.
struct LabelMapping {
    std::vector<std::pair<std::string, int>> entries; // label -> vocab id

    int n_labels() const { return static_cast<int>(entries.size()); }
    int token_id(int label) const { return entries.at(static_cast<size_t>(label)).second; }
    const std::string &label_name(int label) const {
        return entries.at(static_cast<size_t>(label)).first;
    }
};

// Probabilities over the task labels, aligned with the LabelMapping order.
using ClassProbabilities = std::vector<double>;

// Resolves the task's verbalizer words against the vocabulary. A word that
// does not tokenize to exactly one in-vocabulary token, or a token shared
// by two labels, is a verbalizer error.
LabelMapping map_labels(const TaskSpec &task, const Vocab &vocab);

// Softmax restricted to the mapped label tokens, max-stabilized. Logits at
// every other coordinate are ignored.
ClassProbabilities label_softmax(std::span<const double> logits, const LabelMapping &mapping);

struct NllResult {
    double loss = 0.0;
    // Per item, gradient of the mean loss at the full logit vector; nonzero
    // only at label-token coordinates.
    std::vector<LogitVector> logit_grads;
};

// Mean negative log-probability of the gold labels over a batch, plus the
// exact gradient at each item's logits (restricted softmax minus one-hot,
// scaled by 1/N).
NllResult nll_loss(const std::vector<ClassProbabilities> &batch_probs,
                   const std::vector<int> &gold_labels, const LabelMapping &mapping,
                   int vocab_size);

// Index of the largest probability; ties go to the lowest label index.
int argmax_label(const ClassProbabilities &probs);

} // namespace mtprompt
