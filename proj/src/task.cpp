#include "mtprompt/task.hpp"

#include <algorithm>
#include <cctype>
#include <fstream>
#include <set>

#include <json.hpp>

#include "mtprompt/errors.hpp"

namespace mtprompt {

int TaskSpec::label_index(const std::string &label) const {
    for (size_t i = 0; i < labels.size(); ++i) {
        if (labels[i] == label) return static_cast<int>(i);
    }
    return -1;
}

const std::string &TaskSpec::verbalizer_word(int label) const {
    return verbalizer.at(static_cast<size_t>(label)).second;
}

int count_mask_placeholders(const std::string &text) {
    static const std::string needle = "[mask]";
    int count = 0;
    for (size_t i = 0; i + needle.size() <= text.size(); ++i) {
        bool match = true;
        for (size_t j = 0; j < needle.size(); ++j) {
            if (std::tolower(static_cast<unsigned char>(text[i + j])) != needle[j]) {
                match = false;
                break;
            }
        }
        if (match) ++count;
    }
    return count;
}

static void check_description_chars(const std::string &field, const std::string &text) {
    if (text.find('*') != std::string::npos || text.find('_') != std::string::npos) {
        throw Error(ErrorKind::data,
                    "task field '" + field + "' may not contain '*' or '_' (reserved by the "
                    "template grammar)");
    }
}

void validate_task(const TaskSpec &task) {
    if (task.name.empty()) {
        throw Error(ErrorKind::data, "task has no name");
    }
    if (task.sentence_arity != 1 && task.sentence_arity != 2) {
        throw Error(ErrorKind::data, "task '" + task.name + "': sentence_arity must be 1 or 2");
    }
    if (task.labels.size() < 2) {
        throw Error(ErrorKind::data, "task '" + task.name + "': needs at least 2 labels");
    }
    std::set<std::string> seen(task.labels.begin(), task.labels.end());
    if (seen.size() != task.labels.size()) {
        throw Error(ErrorKind::data, "task '" + task.name + "': duplicate labels");
    }
    if (task.verbalizer.size() != task.labels.size()) {
        throw Error(ErrorKind::data,
                    "task '" + task.name + "': verbalizer must cover every label exactly once");
    }
    for (size_t i = 0; i < task.labels.size(); ++i) {
        if (task.verbalizer[i].first != task.labels[i]) {
            throw Error(ErrorKind::data,
                        "task '" + task.name + "': verbalizer order must match labels order");
        }
        if (task.verbalizer[i].second.empty()) {
            throw Error(ErrorKind::data, "task '" + task.name + "': empty verbalizer word");
        }
    }
    check_description_chars("od", task.descriptions.od);
    check_description_chars("sd", task.descriptions.sd);
    check_description_chars("td", task.descriptions.td);
    check_description_chars("fallback_cloze", task.fallback_cloze);
    if (count_mask_placeholders(task.descriptions.od) != 0 ||
        count_mask_placeholders(task.descriptions.sd) != 0) {
        throw Error(ErrorKind::data,
                    "task '" + task.name + "': od/sd must not contain a mask placeholder");
    }
    if (count_mask_placeholders(task.descriptions.td) != 1) {
        throw Error(ErrorKind::data,
                    "task '" + task.name + "': td must contain exactly one mask placeholder");
    }
    if (!task.fallback_cloze.empty() && count_mask_placeholders(task.fallback_cloze) != 1) {
        throw Error(ErrorKind::data,
                    "task '" + task.name +
                        "': fallback_cloze must contain exactly one mask placeholder");
    }
}

TaskSpec load_task(const std::string &path) {
    std::ifstream in(path);
    if (!in) {
        throw Error(ErrorKind::io, "cannot open task file: " + path);
    }
    nlohmann::json j;
    try {
        in >> j;
    } catch (const nlohmann::json::exception &e) {
        throw Error(ErrorKind::io, "malformed task file " + path + ": " + e.what());
    }
    TaskSpec task;
    try {
        task.name = j.at("name").get<std::string>();
        task.sentence_arity = j.at("sentence_arity").get<int>();
        task.labels = j.at("labels").get<std::vector<std::string>>();
        const nlohmann::json &verb = j.at("verbalizer");
        for (const auto &label : task.labels) {
            if (!verb.contains(label)) {
                throw Error(ErrorKind::data,
                            "task file " + path + ": verbalizer missing label '" + label + "'");
            }
            task.verbalizer.emplace_back(label, verb.at(label).get<std::string>());
        }
        task.descriptions.od = j.at("od").get<std::string>();
        task.descriptions.sd = j.at("sd").get<std::string>();
        task.descriptions.td = j.at("td").get<std::string>();
        task.fallback_cloze = j.value("fallback_cloze", std::string());
        task.manual_template = j.value("manual_template", std::string());
    } catch (const nlohmann::json::exception &e) {
        throw Error(ErrorKind::data, "task file " + path + ": " + e.what());
    }
    validate_task(task);
    return task;
}

void save_task(const TaskSpec &task, const std::string &path) {
    validate_task(task);
    nlohmann::json j;
    j["schema_version"] = 1;
    j["name"] = task.name;
    j["sentence_arity"] = task.sentence_arity;
    j["labels"] = task.labels;
    nlohmann::json verb;
    for (const auto &[label, word] : task.verbalizer) verb[label] = word;
    j["verbalizer"] = std::move(verb);
    j["od"] = task.descriptions.od;
    j["sd"] = task.descriptions.sd;
    j["td"] = task.descriptions.td;
    if (!task.fallback_cloze.empty()) j["fallback_cloze"] = task.fallback_cloze;
    if (!task.manual_template.empty()) j["manual_template"] = task.manual_template;

    std::ofstream out(path, std::ios::binary);
    if (!out) {
        throw Error(ErrorKind::io, "cannot open task file for writing: " + path);
    }
    out << j.dump(2) << '\n';
}

} // namespace mtprompt
