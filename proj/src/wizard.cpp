#include "pearrl/wizard.hpp"

#include <algorithm>

#include "pearrl/embedded_data.hpp"
#include "pearrl/errors.hpp"
#include "pearrl/values.hpp"
#include "text_util.hpp"

namespace pearrl {

namespace {

std::string substitute(std::string_view tmpl, std::string_view slot, std::string_view value) {
  const auto pos = tmpl.find(slot);
  if (pos == std::string_view::npos) {
    throw DomainError("template slot " + std::string(slot) + " not found");
  }
  std::string out(tmpl.substr(0, pos));
  out += value;
  out += tmpl.substr(pos + slot.size());
  return out;
}

bool blank(std::string_view s) { return detail::trim(s).empty(); }

}  // namespace

InterventionCatalog InterventionCatalog::parse(std::string_view text, std::string_view source) {
  InterventionCatalog catalog;
  for (const auto line : detail::lines(text)) {
    const auto trimmed = detail::trim(line);
    if (trimmed.empty()) {
      throw ConfigError(std::string(source) + ": blank line in intervention catalog");
    }
    catalog.texts_.emplace_back(trimmed);
  }
  if (catalog.texts_.size() != static_cast<std::size_t>(kInterventionCount)) {
    throw ConfigError(std::string(source) + ": expected " + std::to_string(kInterventionCount) +
                      " interventions, found " + std::to_string(catalog.texts_.size()));
  }
  return catalog;
}

InterventionCatalog InterventionCatalog::load(const std::filesystem::path& path) {
  return parse(detail::read_file(path), path.string());
}

const InterventionCatalog& InterventionCatalog::defaults() {
  static const auto kDefaults = parse(embedded::kInterventions, "data/interventions.txt");
  return kDefaults;
}

const std::string& InterventionCatalog::text(int index) const {
  if (index < 1 || index > static_cast<int>(texts_.size())) {
    throw DomainError("intervention index out of range: " + std::to_string(index));
  }
  return texts_[static_cast<std::size_t>(index - 1)];
}

std::optional<int> InterventionCatalog::find(std::string_view text) const {
  const auto trimmed = detail::trim(text);
  const auto it = std::find(texts_.begin(), texts_.end(), trimmed);
  if (it == texts_.end()) {
    return std::nullopt;
  }
  return static_cast<int>(it - texts_.begin()) + 1;
}

WizardPrompts build_wizard_prompts(const WizardRequest& request) {
  if (request.initial_preference < 0 || request.initial_preference > 100) {
    throw DomainError("initial preference outside [0, 100]");
  }
  if (request.targeted_values.empty() || request.targeted_values.size() > 2) {
    throw DomainError("wizard request needs one or two targeted values");
  }
  std::string values;
  for (const auto& label : request.targeted_values) {
    if (!ValueCatalog::find(label)) {
      throw DomainError("unknown value label '" + label + "'");
    }
    if (!values.empty()) {
      values += ", ";
    }
    values += label;
  }
  return {substitute(kWizardSystemTemplate, "{values}", values),
          substitute(kWizardUserTemplate, "{initial pref.}",
                     std::to_string(request.initial_preference))};
}

WizardPrompts build_untargeted_prompts(int initial_preference) {
  if (initial_preference < 0 || initial_preference > 100) {
    throw DomainError("initial preference outside [0, 100]");
  }
  return {std::string(kWizardUntargetedSystemPrompt),
          substitute(kWizardUserTemplate, "{initial pref.}", std::to_string(initial_preference))};
}

GeneratedIntervention generate_intervention(const WizardPrompts& prompts, ChatBackend& backend,
                                            Rng& rng) {
  const std::vector<ChatMessage> messages = {{Role::system, prompts.system},
                                             {Role::user, prompts.user}};
  GeneratedIntervention out;
  for (int attempt = 1; attempt <= 1 + kGenerationRetries; ++attempt) {
    auto reply = backend.complete(messages, rng);
    if (!blank(reply)) {
      out.text = std::string(detail::trim(reply));
      out.attempts = attempt;
      return out;
    }
    out.rejected.push_back(std::move(reply));
  }
  throw GenerationFailed("wizard returned blank text after " +
                             std::to_string(1 + kGenerationRetries) + " attempts",
                         std::move(out.rejected));
}

StaticIntervention pick_static_intervention(const InterventionCatalog& catalog, Rng& rng) {
  const int index = static_cast<int>(rng.uniform_index(catalog.size())) + 1;
  return {index, catalog.text(index)};
}

std::string TemplateWizardBackend::complete(std::span<const ChatMessage> messages, Rng&) {
  static constexpr std::string_view kMarker = "inferred as follows: ";
  static constexpr std::string_view kEnd = ". Please answer";
  for (const auto& m : messages) {
    if (m.role != Role::system) {
      continue;
    }
    const auto start = m.content.find(kMarker);
    if (start == std::string::npos) {
      break;
    }
    const auto from = start + kMarker.size();
    const auto end = m.content.find(kEnd, from);
    return "Targeted: " + m.content.substr(from, end - from) + ".";
  }
  return std::string(kUntargetedStubReply);
}

}  // namespace pearrl
