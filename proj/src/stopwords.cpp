// English maintenance stop-words. Any edit must bump kVersion: the list feeds
// the evidence packet and therefore the prompts.
#include <algorithm>
#include <string>
#include <vector>

#include "condinsight/workorder.hpp"

namespace condinsight {

namespace {

constexpr std::string_view kVersion = "maint-en-1";

constexpr const char* kWords[] = {
    // general English (only entries with >= 4 letters matter to the tokenizer)
    "about", "above", "after", "again", "against", "also", "been", "before", "being", "below",
    "between", "both", "could", "does", "doing", "down", "during", "each", "from", "further",
    "have", "having", "here", "into", "itself", "just", "more", "most", "once", "only", "other",
    "over", "same", "should", "some", "such", "than", "that", "their", "them", "then", "there",
    "these", "they", "this", "those", "through", "under", "until", "very", "were", "what", "when",
    "where", "which", "while", "will", "with", "would", "your",
    // maintenance boilerplate
    "please", "check", "checked", "checking", "need", "needs", "needed", "required", "request",
    "requested", "asset", "unit", "work", "order", "issue", "issues", "problem", "reported",
    "report", "found", "perform", "performed", "complete", "completed", "done", "team", "site",
    "area", "call", "called", "onsite", "today", "tech", "technician", "note", "notes", "attend",
    "investigate", "investigated", "item", "items", "general", "service", "serviced", "task",
};

}  // namespace

const std::vector<std::string>& stopwords() {
  static const std::vector<std::string> words = [] {
    std::vector<std::string> w(std::begin(kWords), std::end(kWords));
    std::sort(w.begin(), w.end());
    w.erase(std::unique(w.begin(), w.end()), w.end());
    return w;
  }();
  return words;
}

std::string_view stopwords_version() { return kVersion; }

}  // namespace condinsight
