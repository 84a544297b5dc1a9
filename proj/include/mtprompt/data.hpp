#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "mtprompt/task.hpp"
#include "mtprompt/vocab.hpp"

namespace mtprompt {

// The five sub-dataset seeds used by default throughout the harness.
inline constexpr uint64_t kCanonicalSeeds[5] = {13, 21, 42, 87, 100};

struct Example {
    std::vector<std::string> sentences; // 1 or 2, per task arity
    int label = 0;
};

// One K-shot train/dev pair: exactly k examples per label in each half,
// disjoint by source row, bit-reproducible from (source, k, seed).
struct FewShotSplit {
    int k = 0;
    uint64_t seed = 0;
    std::vector<Example> train;
    std::vector<Example> dev;
    std::vector<int> train_rows; // source row ids, parallel to train
    std::vector<int> dev_rows;
};

// Tab-separated, label first: label<TAB>sentence1[<TAB>sentence2], UTF-8,
// no header. Blank lines are skipped. Errors name the offending line.
std::vector<Example> load_dataset(const std::string &path, const TaskSpec &task);
void save_dataset(const std::vector<Example> &examples, const TaskSpec &task,
                  const std::string &path);

// Per-label stratified shuffle under the seed; the first k rows of each
// label form train, the next k form dev.
FewShotSplit sample_kshot(const std::vector<Example> &source, const TaskSpec &task, int k,
                          uint64_t seed);

// Source rows not used by the split, in source order (the test set).
std::vector<Example> remaining_test(const std::vector<Example> &source, const FewShotSplit &split);

struct SyntheticTaskConfig {
    int n_labels = 2;
    int n_discriminative_per_label = 3;
    int n_neutral_words = 24;
    int min_sentence_len = 5;
    int max_sentence_len = 10;
    double noise_rate = 0.0;
    int n_examples = 600;
    int n_corpus_sequences = 1200;
    uint64_t seed = 0;
    // When set, the pretraining corpus rewards one planted manual template
    // ("the trigger was <label word>") and leaves the task's own cloze
    // patterns uninformative.
    bool rigged = false;
};

struct SyntheticTask {
    TaskSpec task;
    std::vector<Example> examples;
    std::vector<std::string> corpus; // pretraining text, one sequence per line
    // For the rigged variant: the manual template whose literal carries the
    // planted token. Empty otherwise.
    std::string planted_template;
};

// Deterministic generator for desk-scale experiments. Each sentence holds
// exactly one discriminative token; with probability noise_rate that token
// is drawn from a uniformly random label's pool instead of the gold one.
SyntheticTask gen_synthetic_task(const SyntheticTaskConfig &config);

// Vocabulary covering the corpus plus everything a task can render:
// descriptions, cloze, manual template literals and verbalizer words.
Vocab build_vocab(const std::vector<std::string> &corpus_lines, const TaskSpec &task);

// Tokenizes corpus lines; wrap_specials brackets each sequence with
// [CLS]...[SEP] so pretraining matches the rendered-prompt layout.
std::vector<std::vector<int>> corpus_to_ids(const std::vector<std::string> &lines,
                                            const Vocab &vocab, bool wrap_specials = true);

std::vector<std::string> read_lines(const std::string &path);
void write_lines(const std::vector<std::string> &lines, const std::string &path);

} // namespace mtprompt
