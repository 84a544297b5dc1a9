#include "mtprompt/verbalizer.hpp"

#include <algorithm>
#include <cmath>
#include <set>

#include "mtprompt/errors.hpp"

namespace mtprompt {

LabelMapping map_labels(const TaskSpec &task, const Vocab &vocab) {
    LabelMapping mapping;
    std::set<int> used;
    for (const auto &[label, word] : task.verbalizer) {
        std::vector<std::string> pieces = word_split(word);
        if (pieces.size() != 1) {
            throw Error(ErrorKind::verbalizer,
                        "verbalizer word '" + word + "' for label '" + label +
                            "' must be a single token");
        }
        int id = vocab.id_of(pieces[0]);
        if (id < Vocab::n_special) {
            throw Error(ErrorKind::verbalizer,
                        "verbalizer word '" + word + "' for label '" + label +
                            "' is not in the vocabulary");
        }
        if (!used.insert(id).second) {
            throw Error(ErrorKind::verbalizer,
                        "verbalizer token '" + pieces[0] + "' is mapped by two labels");
        }
        mapping.entries.emplace_back(label, id);
    }
    if (mapping.n_labels() < 2) {
        throw Error(ErrorKind::verbalizer, "label mapping needs at least two labels");
    }
    return mapping;
}

ClassProbabilities label_softmax(std::span<const double> logits, const LabelMapping &mapping) {
    size_t ny = mapping.entries.size();
    std::vector<double> selected(ny);
    for (size_t t = 0; t < ny; ++t) {
        int id = mapping.entries[t].second;
        if (id < 0 || static_cast<size_t>(id) >= logits.size()) {
            throw Error(ErrorKind::invalid_argument,
                        "label_softmax: mapped token id out of logit range");
        }
        selected[t] = logits[static_cast<size_t>(id)];
    }
    return softmax(selected);
}

NllResult nll_loss(const std::vector<ClassProbabilities> &batch_probs,
                   const std::vector<int> &gold_labels, const LabelMapping &mapping,
                   int vocab_size) {
    if (batch_probs.empty()) {
        throw Error(ErrorKind::invalid_argument, "nll_loss: empty batch");
    }
    if (batch_probs.size() != gold_labels.size()) {
        throw Error(ErrorKind::invalid_argument, "nll_loss: batch/label size mismatch");
    }
    size_t ny = mapping.entries.size();
    double inv_n = 1.0 / static_cast<double>(batch_probs.size());

    NllResult res;
    res.logit_grads.reserve(batch_probs.size());
    for (size_t i = 0; i < batch_probs.size(); ++i) {
        const ClassProbabilities &probs = batch_probs[i];
        int gold = gold_labels[i];
        if (probs.size() != ny) {
            throw Error(ErrorKind::invalid_argument, "nll_loss: probability vector length mismatch");
        }
        if (gold < 0 || static_cast<size_t>(gold) >= ny) {
            throw Error(ErrorKind::invalid_argument,
                        "nll_loss: gold label " + std::to_string(gold) + " out of range");
        }
        res.loss += -std::log(std::max(probs[static_cast<size_t>(gold)], 1e-300)) * inv_n;
        LogitVector grad(static_cast<size_t>(vocab_size), 0.0);
        for (size_t t = 0; t < ny; ++t) {
            double g = probs[t] * inv_n;
            if (static_cast<int>(t) == gold) g -= inv_n;
            grad[static_cast<size_t>(mapping.entries[t].second)] = g;
        }
        res.logit_grads.push_back(std::move(grad));
    }
    return res;
}

int argmax_label(const ClassProbabilities &probs) {
    int best = 0;
    for (size_t i = 1; i < probs.size(); ++i) {
        if (probs[i] > probs[static_cast<size_t>(best)]) best = static_cast<int>(i);
    }
    return best;
}

} // namespace mtprompt
