#include "mtprompt/data.hpp"

#include <algorithm>
#include <fstream>
#include <set>
#include <sstream>

#include "mtprompt/errors.hpp"
#include "mtprompt/rng.hpp"
#include "mtprompt/template.hpp"

namespace mtprompt {

std::vector<Example> load_dataset(const std::string &path, const TaskSpec &task) {
    std::ifstream in(path);
    if (!in) {
        throw Error(ErrorKind::io, "cannot open dataset: " + path);
    }
    std::vector<Example> out;
    std::string line;
    int line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        if (!line.empty() && line.back() == '\r') line.pop_back();
        if (line.empty()) continue;
        std::vector<std::string> cols;
        size_t start = 0;
        while (true) {
            size_t tab = line.find('\t', start);
            if (tab == std::string::npos) {
                cols.push_back(line.substr(start));
                break;
            }
            cols.push_back(line.substr(start, tab - start));
            start = tab + 1;
        }
        if (static_cast<int>(cols.size()) != task.sentence_arity + 1) {
            throw Error(ErrorKind::data,
                        path + ":" + std::to_string(line_no) + ": expected " +
                            std::to_string(task.sentence_arity + 1) + " columns, got " +
                            std::to_string(cols.size()));
        }
        int label = task.label_index(cols[0]);
        if (label < 0) {
            throw Error(ErrorKind::data, path + ":" + std::to_string(line_no) +
                                             ": unknown label '" + cols[0] + "'");
        }
        Example ex;
        ex.label = label;
        ex.sentences.assign(cols.begin() + 1, cols.end());
        out.push_back(std::move(ex));
    }
    return out;
}

void save_dataset(const std::vector<Example> &examples, const TaskSpec &task,
                  const std::string &path) {
    std::ofstream out(path, std::ios::binary);
    if (!out) {
        throw Error(ErrorKind::io, "cannot open dataset for writing: " + path);
    }
    for (const Example &ex : examples) {
        out << task.labels.at(static_cast<size_t>(ex.label));
        for (const std::string &s : ex.sentences) {
            out << '\t' << s;
        }
        out << '\n';
    }
    if (!out) {
        throw Error(ErrorKind::io, "failed writing dataset: " + path);
    }
}

FewShotSplit sample_kshot(const std::vector<Example> &source, const TaskSpec &task, int k,
                          uint64_t seed) {
    if (k <= 0) {
        throw Error(ErrorKind::invalid_argument, "sample_kshot: k must be positive");
    }
    FewShotSplit split;
    split.k = k;
    split.seed = seed;

    Rng rng(seed);
    for (size_t li = 0; li < task.labels.size(); ++li) {
        std::vector<int> rows;
        for (size_t r = 0; r < source.size(); ++r) {
            if (source[r].label == static_cast<int>(li)) rows.push_back(static_cast<int>(r));
        }
        if (static_cast<int>(rows.size()) < 2 * k) {
            throw Error(ErrorKind::data,
                        "sample_kshot: label '" + task.labels[li] + "' has only " +
                            std::to_string(rows.size()) + " examples, needs " +
                            std::to_string(2 * k));
        }
        rng.shuffle(rows);
        for (int i = 0; i < k; ++i) {
            split.train.push_back(source[static_cast<size_t>(rows[static_cast<size_t>(i)])]);
            split.train_rows.push_back(rows[static_cast<size_t>(i)]);
        }
        for (int i = k; i < 2 * k; ++i) {
            split.dev.push_back(source[static_cast<size_t>(rows[static_cast<size_t>(i)])]);
            split.dev_rows.push_back(rows[static_cast<size_t>(i)]);
        }
    }
    return split;
}

std::vector<Example> remaining_test(const std::vector<Example> &source,
                                    const FewShotSplit &split) {
    std::set<int> used(split.train_rows.begin(), split.train_rows.end());
    used.insert(split.dev_rows.begin(), split.dev_rows.end());
    std::vector<Example> test;
    for (size_t r = 0; r < source.size(); ++r) {
        if (!used.count(static_cast<int>(r))) test.push_back(source[r]);
    }
    return test;
}

namespace {

struct SyntheticWords {
    std::vector<std::string> neutral;
    std::vector<std::vector<std::string>> discriminative; // per label
    std::vector<std::string> verbalizer;                  // per label
};

SyntheticWords make_words(const SyntheticTaskConfig &cfg) {
    SyntheticWords w;
    for (int i = 0; i < cfg.n_neutral_words; ++i) {
        w.neutral.push_back("w" + std::to_string(i));
    }
    w.discriminative.resize(static_cast<size_t>(cfg.n_labels));
    for (int l = 0; l < cfg.n_labels; ++l) {
        for (int j = 0; j < cfg.n_discriminative_per_label; ++j) {
            w.discriminative[static_cast<size_t>(l)].push_back(
                "cue" + std::to_string(l) + "x" + std::to_string(j));
        }
        w.verbalizer.push_back("v" + std::to_string(l));
    }
    return w;
}

std::string join(const std::vector<std::string> &words) {
    std::string out;
    for (size_t i = 0; i < words.size(); ++i) {
        if (i) out.push_back(' ');
        out += words[i];
    }
    return out;
}

// One synthetic sentence: exactly one discriminative token among neutrals.
std::vector<std::string> make_sentence(const SyntheticWords &w, const SyntheticTaskConfig &cfg,
                                       Rng &rng, int signal_label) {
    int len = rng.uniform_int(cfg.min_sentence_len, cfg.max_sentence_len);
    std::vector<std::string> words;
    words.reserve(static_cast<size_t>(len));
    for (int i = 0; i < len; ++i) {
        words.push_back(w.neutral[static_cast<size_t>(
            rng.uniform_int(0, static_cast<int>(w.neutral.size()) - 1))]);
    }
    const auto &pool = w.discriminative[static_cast<size_t>(signal_label)];
    int pos = rng.uniform_int(0, len - 1);
    words[static_cast<size_t>(pos)] =
        pool[static_cast<size_t>(rng.uniform_int(0, static_cast<int>(pool.size()) - 1))];
    return words;
}

} // namespace

SyntheticTask gen_synthetic_task(const SyntheticTaskConfig &cfg) {
    if (cfg.n_labels < 2 || cfg.n_discriminative_per_label < 1 || cfg.n_neutral_words < 1 ||
        cfg.min_sentence_len < 1 || cfg.max_sentence_len < cfg.min_sentence_len ||
        cfg.noise_rate < 0.0 || cfg.noise_rate >= 1.0 || cfg.n_examples < 1) {
        throw Error(ErrorKind::invalid_argument, "gen_synthetic_task: bad config");
    }
    SyntheticWords w = make_words(cfg);

    SyntheticTask out;
    TaskSpec &task = out.task;
    task.name = cfg.rigged ? "synthetic-rigged" : "synthetic";
    task.sentence_arity = 1;
    for (int l = 0; l < cfg.n_labels; ++l) {
        task.labels.push_back("l" + std::to_string(l));
        task.verbalizer.emplace_back(task.labels.back(), w.verbalizer[static_cast<size_t>(l)]);
    }
    if (cfg.rigged) {
        task.descriptions.od = "a plain text";
        task.descriptions.sd = "made of ordinary words,";
        task.descriptions.td = "the word here was [mask]";
        task.fallback_cloze = "was [mask]";
        task.manual_template = "*cls**sent_0*_it_was*mask*.*sep+*";
        out.planted_template = "*cls**sent_0*_the_trigger_was*mask*.*sep+*";
    } else {
        task.descriptions.od = "a generated text";
        task.descriptions.sd = "built from signal words for each class,";
        task.descriptions.td = "the class of this text was [mask]";
        task.fallback_cloze = "was [mask]";
        task.manual_template = "*cls**sent_0*_it_was*mask*.*sep+*";
    }
    validate_task(task);

    Rng rng(cfg.seed);

    // Labeled examples; labels round-robin so the generator is exactly
    // balanced at any size.
    for (int i = 0; i < cfg.n_examples; ++i) {
        int gold = i % cfg.n_labels;
        int signal = gold;
        if (cfg.noise_rate > 0.0 && rng.uniform() < cfg.noise_rate) {
            signal = rng.uniform_int(0, cfg.n_labels - 1);
        }
        Example ex;
        ex.label = gold;
        ex.sentences.push_back(join(make_sentence(w, cfg, rng, signal)));
        out.examples.push_back(std::move(ex));
    }

    // Pretraining corpus: noise-free sentences followed by a cloze whose
    // answer slot holds the gold verbalizer word, so masked-token training
    // ties the discriminative tokens to the label words.
    auto [td_before, td_after] = [&] {
        std::string td = task.descriptions.td;
        size_t at = td.find("[mask]");
        return std::pair<std::string, std::string>(td.substr(0, at), td.substr(at + 6));
    }();
    for (int i = 0; i < cfg.n_corpus_sequences; ++i) {
        int gold = i % cfg.n_labels;
        std::vector<std::string> sent = make_sentence(w, cfg, rng, gold);
        std::string line = join(sent);
        if (cfg.rigged) {
            if (i % 2 == 0) {
                // planted pattern: informative
                line += " the trigger was " + w.verbalizer[static_cast<size_t>(gold)] + " .";
            } else {
                // task's own cloze pattern: uninformative (random label word)
                int any = rng.uniform_int(0, cfg.n_labels - 1);
                line += " . " + task.descriptions.od + " " + task.descriptions.sd + " " +
                        td_before + w.verbalizer[static_cast<size_t>(any)] + td_after + " .";
            }
        } else {
            line += " . " + task.descriptions.od + " " + task.descriptions.sd + " " + td_before +
                    w.verbalizer[static_cast<size_t>(gold)] + td_after + " .";
        }
        out.corpus.push_back(std::move(line));
    }
    return out;
}

Vocab build_vocab(const std::vector<std::string> &corpus_lines, const TaskSpec &task) {
    std::vector<std::string> words = corpus_lines;
    words.push_back(task.descriptions.od);
    words.push_back(task.descriptions.sd);
    words.push_back(task.descriptions.td);
    words.push_back(task.fallback_cloze);
    for (const auto &[label, word] : task.verbalizer) words.push_back(word);
    if (!task.manual_template.empty()) {
        for (const auto &text : template_surface_text(parse_template(task.manual_template))) {
            words.push_back(text);
        }
    }
    // placeholder brackets would otherwise leak "mask" into the vocab; they
    // are harmless regular tokens but excluded for tidiness
    std::vector<std::string> cleaned;
    for (auto &wtext : words) {
        std::string copy = wtext;
        size_t at;
        std::string lower = copy;
        std::transform(lower.begin(), lower.end(), lower.begin(),
                       [](unsigned char c) { return std::tolower(c); });
        while ((at = lower.find("[mask]")) != std::string::npos) {
            copy.erase(at, 6);
            lower.erase(at, 6);
        }
        cleaned.push_back(copy);
    }
    // templates always need basic punctuation
    cleaned.push_back(". , ? ! : ;");
    return make_vocab(cleaned);
}

std::vector<std::vector<int>> corpus_to_ids(const std::vector<std::string> &lines,
                                            const Vocab &vocab, bool wrap_specials) {
    std::vector<std::vector<int>> out;
    out.reserve(lines.size());
    for (const auto &line : lines) {
        std::vector<int> ids;
        if (wrap_specials) ids.push_back(Vocab::cls_id);
        std::vector<int> body = tokenize(line, vocab);
        ids.insert(ids.end(), body.begin(), body.end());
        if (wrap_specials) ids.push_back(Vocab::sep_id);
        out.push_back(std::move(ids));
    }
    return out;
}

std::vector<std::string> read_lines(const std::string &path) {
    std::ifstream in(path);
    if (!in) {
        throw Error(ErrorKind::io, "cannot open file: " + path);
    }
    std::vector<std::string> lines;
    std::string line;
    while (std::getline(in, line)) {
        if (!line.empty() && line.back() == '\r') line.pop_back();
        if (!line.empty()) lines.push_back(line);
    }
    return lines;
}

void write_lines(const std::vector<std::string> &lines, const std::string &path) {
    std::ofstream out(path, std::ios::binary);
    if (!out) {
        throw Error(ErrorKind::io, "cannot open file for writing: " + path);
    }
    for (const auto &line : lines) out << line << '\n';
    if (!out) {
        throw Error(ErrorKind::io, "failed writing file: " + path);
    }
}

} // namespace mtprompt
