#pragma once
// Prompt templates for the segmenter, merger, confidence probe and judge.
// Placeholders are written {name}. The same text ships under prompts/ and
// can be overridden by pointing PromptSet::load at another directory.

#include <filesystem>
#include <fstream>
#include <map>
#include <sstream>
#include <string>

#include "fcg/core.hpp"

namespace fcg {

struct PromptSet {
    std::string segment =
        "Please breakdown the following text into independent facts.\n"
        "\n"
        "{text}";

    std::string merge =
        "You will see a list of specific facts along with a sample text. Your task is to combine these facts "
        "into a coherent paragraph. If a fact from the list is also in the sample text, use the same phrasing as "
        "the sample text. Ensure that you exclude any details not listed in the facts, even if they appear in the "
        "sample text.\n"
        "\n"
        "Facts:\n"
        "{facts}\n"
        "\n"
        "Sample text:\n"
        "{sample}";

    std::string probe = "{fact} Is this statement True or False? Start your answer with either \"True\" or \"False\".";

    std::string judge =
        "Answer the question about {entity} based on the given context.\n"
        "\n"
        "{passages}\n"
        "\n"
        "Input: {fact} True or False?\n"
        "Output:";

    // Files segment.txt, merge.txt, probe.txt, judge.txt; any that are absent
    // keep the built-in text. One trailing newline is dropped.
    static PromptSet load(const std::filesystem::path& dir) {
        PromptSet set;
        auto read = [&](const char* name, std::string& slot) {
            std::ifstream in(dir / name, std::ios::binary);
            if (!in) return;
            std::ostringstream buf;
            buf << in.rdbuf();
            std::string text = buf.str();
            if (!text.empty() && text.back() == '\n') text.pop_back();
            slot = std::move(text);
        };
        read("segment.txt", set.segment);
        read("merge.txt", set.merge);
        read("probe.txt", set.probe);
        read("judge.txt", set.judge);
        return set;
    }
};

// Replaces each {key} in one left-to-right pass; substituted text is never rescanned.
inline std::string fill_template(const std::string& tmpl, const std::map<std::string, std::string>& values) {
    std::string out;
    out.reserve(tmpl.size());
    std::size_t i = 0;
    while (i < tmpl.size()) {
        if (tmpl[i] == '{') {
            const auto close = tmpl.find('}', i + 1);
            if (close != std::string::npos) {
                const auto it = values.find(tmpl.substr(i + 1, close - i - 1));
                if (it != values.end()) {
                    out += it->second;
                    i = close + 1;
                    continue;
                }
            }
        }
        out += tmpl[i++];
    }
    return out;
}

}  // namespace fcg
