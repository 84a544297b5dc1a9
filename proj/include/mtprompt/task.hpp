#pragma once

#include <optional>
#include <string>
#include <vector>

namespace mtprompt {

// The three meta-description components of a multi-dimensional task prompt.
// td carries exactly one [mask] placeholder; od and sd carry none.
struct DescriptionSet {
    std::string od;
    std::string sd;
    std::string td;
};

// A classification task: ordered labels, label-word verbalizer, description
// set and sentence arity. fallback_cloze supplies the mask slot for
// compositions that exclude the task description; manual_template is the
// task's baseline template in the template grammar.
struct TaskSpec {
    std::string name;
    int sentence_arity = 1;
    std::vector<std::string> labels;                        // order defines probability alignment
    std::vector<std::pair<std::string, std::string>> verbalizer; // label -> word, label order
    DescriptionSet descriptions;
    std::string fallback_cloze;   // optional; empty if none
    std::string manual_template;  // optional; empty if none

    int label_index(const std::string &label) const;

    // Label-word of the i-th label.
    const std::string &verbalizer_word(int label) const;
};

TaskSpec load_task(const std::string &path);
void save_task(const TaskSpec &task, const std::string &path);

// Structural validation shared by load_task and the generators: mask
// placeholder counts, verbalizer/label alignment, arity and character
// restrictions on description text.
void validate_task(const TaskSpec &task);

// Counts case-insensitive occurrences of the [mask] placeholder.
int count_mask_placeholders(const std::string &text);

} // namespace mtprompt
