#pragma once

#include <cstddef>
#include <filesystem>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "pearrl/chat.hpp"
#include "pearrl/rng.hpp"

namespace pearrl {

inline constexpr int kInterventionCount = 35;

/// The fixed survey interventions, indexed 1..35.
class InterventionCatalog {
 public:
  // One intervention per line, in index order.
  static InterventionCatalog parse(std::string_view text, std::string_view source = "<text>");
  static InterventionCatalog load(const std::filesystem::path& path);
  static const InterventionCatalog& defaults();

  std::size_t size() const { return texts_.size(); }
  const std::string& text(int index) const;
  // Index of an exact (whitespace-trimmed) match.
  std::optional<int> find(std::string_view text) const;

 private:
  std::vector<std::string> texts_;
};

inline constexpr std::string_view kWizardUserTemplate =
    "My preference for BEV is {initial pref.} out of 0 to 100.";
inline constexpr std::string_view kWizardSystemTemplate =
    "Generate your response to improve the user's preference for BEV. You are a Chatbot. The "
    "conversational partner's values for BEV are inferred as follows: {values}. Please answer in "
    "1 sentence concisely, with no additional explanation.";
// Same prompt without the values sentence, for untargeted generation.
inline constexpr std::string_view kWizardUntargetedSystemPrompt =
    "Generate your response to improve the user's preference for BEV. You are a Chatbot. Please "
    "answer in 1 sentence concisely, with no additional explanation.";

struct WizardRequest {
  int initial_preference = 0;
  std::vector<std::string> targeted_values;  // one or two value labels
};

struct WizardPrompts {
  std::string system;
  std::string user;
};

WizardPrompts build_wizard_prompts(const WizardRequest& request);
WizardPrompts build_untargeted_prompts(int initial_preference);

inline constexpr int kGenerationRetries = 3;

struct GeneratedIntervention {
  std::string text;
  int attempts = 1;
  std::vector<std::string> rejected;  // blank replies that were retried
};

/// One completion for [system, user]; a blank reply is retried up to
/// kGenerationRetries times before GenerationFailed.
GeneratedIntervention generate_intervention(const WizardPrompts& prompts, ChatBackend& backend,
                                            Rng& rng);

struct StaticIntervention {
  int index = 1;
  std::string text;
};

StaticIntervention pick_static_intervention(const InterventionCatalog& catalog, Rng& rng);

/// Offline wizard: answers "Targeted: {values}." from the system prompt, or
/// "Untargeted intervention." when the prompt names no values.
class TemplateWizardBackend final : public ChatBackend {
 public:
  std::string complete(std::span<const ChatMessage> messages, Rng& rng) override;
  std::string tag() const override { return "synthetic-wizard"; }
};

inline constexpr std::string_view kUntargetedStubReply = "Untargeted intervention.";

}  // namespace pearrl
