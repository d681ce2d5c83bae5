// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <filesystem>
#include <functional>
#include <map>
#include <memory>
#include <string>
#include <string_view>
#include <vector>

#include "corpus/types.hpp"

namespace depscreen {

// Letter-by-letter acronyms as written in the corpus ("l_a") mapped to
// their expansion ("Los Angeles").
class AcronymTable {
 public:
  AcronymTable() = default;
  explicit AcronymTable(std::map<std::string, std::string> entries);

  // Two columns separated by a tab; blank lines and '#' comments skipped.
  static AcronymTable load(const std::filesystem::path& path);
  static AcronymTable parse(std::string_view text);
  static bool valid_key(std::string_view key);

  const std::string* find(std::string_view key) const;
  const std::map<std::string, std::string>& entries() const { return entries_; }

 private:
  std::map<std::string, std::string> entries_;
};

class InterrogativeClassifier {
 public:
  virtual ~InterrogativeClassifier() = default;
  virtual bool is_interrogative(std::string_view sentence) const = 0;
};

// Wh-word openings, auxiliary inversion and tag questions, after stripping
// leading discourse markers ("so", "okay", ...).
class RuleInterrogativeClassifier final : public InterrogativeClassifier {
 public:
  bool is_interrogative(std::string_view sentence) const override;
};

class GrammarCorrector {
 public:
  virtual ~GrammarCorrector() = default;
  virtual std::string correct(std::string_view text) const = 0;
};

// Sentence-initial capitals, capital pronoun "I", and a terminal '?' or '.'
// chosen by the interrogative classifier. Idempotent.
class RuleGrammarCorrector final : public GrammarCorrector {
 public:
  RuleGrammarCorrector();
  explicit RuleGrammarCorrector(std::shared_ptr<const InterrogativeClassifier> classifier);
  std::string correct(std::string_view text) const override;

 private:
  std::shared_ptr<const InterrogativeClassifier> classifier_;
};

// Adapter for an external corrector (e.g. a sequence-to-sequence model
// served out of process).
class FunctionGrammarCorrector final : public GrammarCorrector {
 public:
  explicit FunctionGrammarCorrector(std::function<std::string(std::string_view)> fn) : fn_(std::move(fn)) {}
  std::string correct(std::string_view text) const override { return fn_(text); }

 private:
  std::function<std::string(std::string_view)> fn_;
};

std::string clean_utterance(std::string_view text, const AcronymTable& acronyms);
bool is_interrogative(std::string_view sentence);
std::string normalize_grammar(std::string_view text);

// Clean + correct every row, rename Ellie/Participant to Therapist/Patient,
// drop rows left empty, and merge consecutive rows of the same speaker.
std::vector<Utterance> normalize_transcript(const std::vector<Utterance>& utterances, const AcronymTable& acronyms,
                                            const GrammarCorrector& corrector);
std::vector<Utterance> normalize_transcript(const std::vector<Utterance>& utterances, const AcronymTable& acronyms);

std::string render_dialogue(const std::vector<Utterance>& utterances);

}  // namespace depscreen
