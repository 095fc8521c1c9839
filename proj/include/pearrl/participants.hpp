#pragma once

#include <array>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "pearrl/chat.hpp"
#include "pearrl/demographics.hpp"
#include "pearrl/rng.hpp"
#include "pearrl/values.hpp"
#include "pearrl/wizard.hpp"

namespace pearrl {

inline constexpr std::string_view kPersonaPromptPrefix =
    "I want you to act as the following character. Answer all of the following questions from "
    "the point of view of this character, do not break character. ";

inline constexpr std::string_view kPreferencePrompt =
    "On a scale from 0 to 100, what is your current preference for battery electric vehicles "
    "(BEVs)? Please reply with just a single number rating and no additional words or "
    "explanations. Score: ";

inline constexpr int kMaxPreferenceAttempts = 10;

std::string persona_system_prompt(const DemographicProfile& profile);

/// First maximal run of ASCII digits, accepted iff it parses to 0..100.
/// Anything after a decimal point is a separate run, so "70.5" reads as 70.
std::optional<int> extract_preference(std::string_view reply);

struct PreferenceReading {
  int value = 0;
  std::string raw_text;
  int attempts = 1;
  std::vector<std::string> rejected;  // raw replies without a usable number
};

/// One virtual participant talking to one backend. Messages are only ever
/// appended; the transcript starts with the persona system prompt.
class ParticipantSession {
 public:
  ParticipantSession(DemographicProfile profile, ChatBackend& backend, Rng rng);

  const DemographicProfile& profile() const { return profile_; }
  const std::vector<ChatMessage>& transcript() const { return transcript_; }
  std::string backend_tag() const { return backend_->tag(); }

  /// Asks the preference question, resampling the reply (not re-asking in
  /// the transcript) up to kMaxPreferenceAttempts times. Throws InvalidTrial.
  PreferenceReading measure_preference();

  /// Sends the intervention as a user turn and returns the assistant's
  /// acknowledgment. Rejects blank text.
  std::string deliver_intervention(std::string_view intervention);

 private:
  void append(Role role, std::string content);

  DemographicProfile profile_;
  ChatBackend* backend_;
  Rng rng_;
  std::vector<ChatMessage> transcript_;
};

ParticipantSession open_session(const DemographicProfile& profile, ChatBackend& backend, Rng rng);

/// Closed-form stand-in for a language-model participant.
///
/// Pre-intervention readings are round(clamp(N(base_mean, base_std))). After an
/// intervention the reading moves by the intervention's contribution plus
/// N(0, noise_std) noise, again rounded and clamped to [0, 100]. The
/// contribution is, in order of precedence: the static shift of a catalog
/// intervention; the summed per-context sensitivities of every value label the
/// text mentions; or the untargeted shift.
struct SyntheticPersona {
  double base_mean = 70.0;
  double base_std = 15.0;
  double noise_std = 10.0;
  // [context index][value index - 1], preference points.
  std::array<std::array<double, kValueCount>, kContextCount> sensitivity{};
  double untargeted_shift = 3.5;
  std::array<double, kInterventionCount> static_shift{};

  static constexpr double kPlantedValueShift = 10.0;
  static constexpr double kOtherValueShift = -5.0;

  // Planted arm values get `planted_shift` each, every other value `other_shift`.
  static SyntheticPersona with_planted_arms(const std::array<ValuePairArm, kContextCount>& planted,
                                            double planted_shift = kPlantedValueShift,
                                            double other_shift = kOtherValueShift);
  static const std::array<ValuePairArm, kContextCount>& default_planted_arms();
  static SyntheticPersona defaults();
  // Every contribution and the noise are zero.
  static SyntheticPersona null_model();

  void validate() const;
  double arm_contribution(const BanditContext& context, const ValuePairArm& arm) const;
  double contribution(const BanditContext& context, std::string_view intervention,
                      const InterventionCatalog& catalog) const;

  bool operator==(const SyntheticPersona&) const = default;
};

/// Next assistant message for `transcript` under the persona model. Reads the
/// context from the persona prompt and the previous reading from the
/// transcript, so it sees exactly what a remote model would.
std::string synthetic_reply(const SyntheticPersona& persona, std::span<const ChatMessage> transcript,
                            Rng& rng, const InterventionCatalog& catalog = InterventionCatalog::defaults());

inline constexpr std::string_view kSyntheticAcknowledgment = "Understood.";

class SyntheticParticipantBackend final : public ChatBackend {
 public:
  explicit SyntheticParticipantBackend(SyntheticPersona persona,
                                       const InterventionCatalog& catalog = InterventionCatalog::defaults());

  std::string complete(std::span<const ChatMessage> messages, Rng& rng) override;
  std::string tag() const override { return "synthetic"; }
  const SyntheticPersona& persona() const { return persona_; }

 private:
  SyntheticPersona persona_;
  const InterventionCatalog* catalog_;
};

}  // namespace pearrl
