// SPDX-License-Identifier: Apache-2.0
#include "transcript/transcript.hpp"

#include <spdlog/spdlog.h>

#include <algorithm>
#include <cctype>
#include <regex>
#include <set>
#include <sstream>

#include "common/error.hpp"
#include "common/fs.hpp"

namespace depscreen {

AcronymTable::AcronymTable(std::map<std::string, std::string> entries) : entries_(std::move(entries)) {
  for (const auto& [k, v] : entries_) {
    if (!valid_key(k)) fail(ErrorCode::kValidation, "bad acronym key '" + k + "'");
    if (trim(v).empty()) fail(ErrorCode::kValidation, "empty expansion for '" + k + "'");
  }
}

bool AcronymTable::valid_key(std::string_view key) {
  static const std::regex pattern("^[a-z](_[a-z])+$");
  return std::regex_match(key.begin(), key.end(), pattern);
}

AcronymTable AcronymTable::parse(std::string_view text) {
  std::map<std::string, std::string> entries;
  std::istringstream in{std::string(text)};
  std::string line;
  while (std::getline(in, line)) {
    const std::string t = trim(line);
    if (t.empty() || t.front() == '#') continue;
    const auto tab = t.find('\t');
    if (tab == std::string::npos) fail(ErrorCode::kValidation, "acronym row without tab: '" + t + "'");
    entries[trim(t.substr(0, tab))] = trim(t.substr(tab + 1));
  }
  return AcronymTable(std::move(entries));
}

AcronymTable AcronymTable::load(const std::filesystem::path& path) { return parse(read_text_file(path)); }

const std::string* AcronymTable::find(std::string_view key) const {
  auto it = entries_.find(std::string(key));
  return it == entries_.end() ? nullptr : &it->second;
}

namespace {

std::string collapse_whitespace(std::string_view s) {
  std::string out;
  out.reserve(s.size());
  bool pending_space = false;
  for (char c : s) {
    if (std::isspace(static_cast<unsigned char>(c))) {
      pending_space = !out.empty();
      continue;
    }
    if (pending_space) out.push_back(' ');
    pending_space = false;
    out.push_back(c);
  }
  return out;
}

std::string clean_once(const std::string& text, const AcronymTable& acronyms) {
  static const std::regex identifier(R"(([^\s()]+)\s*\(([^()]*)\))");
  static const std::regex acronym(R"(\b[a-z](?:_[a-z])+\b)");
  static const std::regex angle(R"(<[^<>]*>)");

  std::string s = std::regex_replace(text, identifier, "$2");

  std::string expanded;
  auto begin = std::sregex_iterator(s.begin(), s.end(), acronym);
  std::size_t last = 0;
  for (auto it = begin; it != std::sregex_iterator(); ++it) {
    const auto& m = *it;
    expanded.append(s, last, static_cast<std::size_t>(m.position()) - last);
    if (const std::string* rep = acronyms.find(m.str())) {
      expanded += *rep;
    } else {
      spdlog::warn("unknown acronym token '{}' left unchanged", m.str());
      expanded += m.str();
    }
    last = static_cast<std::size_t>(m.position() + m.length());
  }
  expanded.append(s, last, std::string::npos);

  s = std::regex_replace(expanded, angle, " ");
  return collapse_whitespace(s);
}

std::vector<std::string> words_of(std::string_view sentence) {
  std::vector<std::string> words;
  std::string cur;
  for (char c : sentence) {
    const auto uc = static_cast<unsigned char>(c);
    if (std::isalnum(uc) || c == '\'') {
      cur.push_back(static_cast<char>(std::tolower(uc)));
    } else if (!cur.empty()) {
      words.push_back(std::move(cur));
      cur.clear();
    }
  }
  if (!cur.empty()) words.push_back(std::move(cur));
  return words;
}

const std::set<std::string>& wh_words() {
  static const std::set<std::string> s = {"what",   "where",  "when",  "why",   "who",   "whom", "whose",
                                          "which",  "how",    "what's", "where's", "who's", "how's", "when's"};
  return s;
}

const std::set<std::string>& auxiliaries() {
  static const std::set<std::string> s = {
      "do",     "does",    "did",     "are",      "is",       "was",      "were",    "am",      "have",
      "has",    "had",     "can",     "could",    "would",    "will",     "shall",   "should",  "may",
      "might",  "must",    "don't",   "doesn't",  "didn't",   "aren't",   "isn't",   "wasn't",  "weren't",
      "haven't", "hasn't", "hadn't",  "can't",    "couldn't", "wouldn't", "won't",   "shouldn't"};
  return s;
}

const std::set<std::string>& subjects() {
  static const std::set<std::string> s = {
      "i",      "you",     "he",      "she",      "it",      "we",       "they",    "there",  "this",
      "that",   "these",   "those",   "my",       "your",    "his",      "her",     "our",    "their",
      "the",    "a",       "an",      "anyone",   "anybody", "someone",  "somebody", "everyone", "people",
      "any",    "anything", "something", "things", "y'all",   "ya",       "u"};
  return s;
}

const std::set<std::string>& discourse_markers() {
  static const std::set<std::string> s = {"so",  "and", "but", "okay", "ok",  "well",   "um",
                                          "uh",  "oh",  "now", "alright", "hmm", "right", "yeah"};
  return s;
}

}  // namespace

std::string clean_utterance(std::string_view text, const AcronymTable& acronyms) {
  std::string current(text);
  for (int i = 0; i < 8; ++i) {
    std::string next = clean_once(current, acronyms);
    if (next == current) break;
    current = std::move(next);
  }
  return current;
}

bool RuleInterrogativeClassifier::is_interrogative(std::string_view sentence) const {
  const std::string trimmed = trim(sentence);
  if (trimmed.empty()) return false;
  if (trimmed.back() == '?') return true;
  if (trimmed.back() == '.' || trimmed.back() == '!') return false;

  std::vector<std::string> w = words_of(trimmed);
  std::size_t i = 0;
  while (i + 1 < w.size() && discourse_markers().count(w[i]) != 0) ++i;
  w.erase(w.begin(), w.begin() + static_cast<std::ptrdiff_t>(i));
  if (w.empty()) return false;

  const std::size_t n = w.size();
  // Tag questions.
  if (n >= 3) {
    static const std::set<std::string> tag_pronouns = {"you", "it", "i", "we", "they", "he", "she", "that", "there"};
    const std::string& aux = w[n - 2];
    const bool negative_aux = aux.size() > 3 && aux.compare(aux.size() - 3, 3, "n't") == 0 && auxiliaries().count(aux) != 0;
    if (negative_aux && tag_pronouns.count(w[n - 1]) != 0) return true;
  }
  if (trimmed.size() > 7 && trimmed.compare(trimmed.size() - 7, 7, ", right") == 0) return true;

  const std::string& first = w[0];
  if (wh_words().count(first) != 0) {
    if (n == 1) return true;
    const std::string& second = w[1];
    if (second == "a" || second == "an") return false;  // "what a day"
    static const std::set<std::string> subordinators = {"when", "where", "which", "whose", "whom"};
    static const std::set<std::string> clause_subjects = {"i", "we", "he", "she", "they", "my", "our", "it's", "i'm"};
    if (clause_subjects.count(second) != 0) return false;
    // "which is why ...", "which means ..." continue a previous clause.
    if (first == "which" && (second == "means" || (n >= 3 && (second == "is" || second == "was") &&
                                                   wh_words().count(w[2]) != 0))) {
      return false;
    }
    if (second == "you" && subordinators.count(first) != 0) return false;
    return true;
  }
  if (auxiliaries().count(first) != 0) {
    // Imperative "have a ..." rather than inversion.
    if (first == "have" && n >= 2 && (w[1] == "a" || w[1] == "an")) return false;
    return n >= 2 && subjects().count(w[1]) != 0;
  }
  if ((first == "any" || first == "anything") && n <= 3) return true;
  return false;
}

bool is_interrogative(std::string_view sentence) {
  static const RuleInterrogativeClassifier classifier;
  return classifier.is_interrogative(sentence);
}

RuleGrammarCorrector::RuleGrammarCorrector() : classifier_(std::make_shared<RuleInterrogativeClassifier>()) {}

RuleGrammarCorrector::RuleGrammarCorrector(std::shared_ptr<const InterrogativeClassifier> classifier)
    : classifier_(std::move(classifier)) {}

std::string RuleGrammarCorrector::correct(std::string_view text) const {
  static const std::regex pronoun_i(R"(\bi\b)");
  std::string s = collapse_whitespace(text);
  if (s.empty()) return s;
  s = std::regex_replace(s, pronoun_i, "I");

  bool sentence_start = true;
  for (std::size_t k = 0; k < s.size(); ++k) {
    const auto c = static_cast<unsigned char>(s[k]);
    if (sentence_start && std::isalpha(c)) {
      s[k] = static_cast<char>(std::toupper(c));
      sentence_start = false;
    } else if (std::isalnum(c)) {
      sentence_start = false;
    }
    if ((s[k] == '.' || s[k] == '?' || s[k] == '!') && k + 1 < s.size() && s[k + 1] == ' ') sentence_start = true;
  }

  const char last = s.back();
  if (last != '.' && last != '?' && last != '!') s.push_back(classifier_->is_interrogative(s) ? '?' : '.');
  return s;
}

std::string normalize_grammar(std::string_view text) {
  static const RuleGrammarCorrector corrector;
  return corrector.correct(text);
}

std::vector<Utterance> normalize_transcript(const std::vector<Utterance>& utterances, const AcronymTable& acronyms,
                                            const GrammarCorrector& corrector) {
  std::vector<Utterance> out;
  double prev_start = -1e300;
  for (const auto& u : utterances) {
    if (u.start_time < prev_start) fail(ErrorCode::kValidation, "utterances must be sorted by start_time");
    prev_start = u.start_time;

    Speaker speaker;
    if (u.speaker == Speaker::kEllie) {
      speaker = Speaker::kTherapist;
    } else if (u.speaker == Speaker::kParticipant) {
      speaker = Speaker::kPatient;
    } else {
      fail(ErrorCode::kUnknownSpeaker, std::string(speaker_name(u.speaker)));
    }

    const std::string cleaned = clean_utterance(u.text, acronyms);
    if (cleaned.empty()) continue;
    std::string text = corrector.correct(cleaned);
    if (!out.empty() && out.back().speaker == speaker) {
      out.back().stop_time = std::max(out.back().stop_time, u.stop_time);
      out.back().text += " " + text;
    } else {
      out.push_back(Utterance{speaker, u.start_time, u.stop_time, std::move(text)});
    }
  }
  return out;
}

std::vector<Utterance> normalize_transcript(const std::vector<Utterance>& utterances, const AcronymTable& acronyms) {
  static const RuleGrammarCorrector corrector;
  return normalize_transcript(utterances, acronyms, corrector);
}

std::string render_dialogue(const std::vector<Utterance>& utterances) {
  std::string out;
  for (std::size_t i = 0; i < utterances.size(); ++i) {
    if (i > 0) out.push_back('\n');
    out += speaker_name(utterances[i].speaker);
    out += ": ";
    out += utterances[i].text;
  }
  return out;
}

}  // namespace depscreen
