#include "pearrl/participants.hpp"

#include <algorithm>
#include <cmath>

#include "pearrl/errors.hpp"
#include "text_util.hpp"

namespace pearrl {

namespace {

bool is_digit(char c) { return c >= '0' && c <= '9'; }

bool is_preference_query(const ChatMessage& m) {
  return m.role == Role::user && m.content == kPreferencePrompt;
}

double clamp_preference(double v) { return std::clamp(v, 0.0, 100.0); }

}  // namespace

std::string persona_system_prompt(const DemographicProfile& profile) {
  return std::string(kPersonaPromptPrefix) + format_properties(profile);
}

std::optional<int> extract_preference(std::string_view reply) {
  const auto begin = std::find_if(reply.begin(), reply.end(), is_digit);
  if (begin == reply.end()) {
    return std::nullopt;
  }
  const auto end = std::find_if_not(begin, reply.end(), is_digit);
  // Strip leading zeros so long runs like "0000085" still parse, then bound the length.
  auto first = begin;
  while (first + 1 < end && *first == '0') {
    ++first;
  }
  if (end - first > 3) {
    return std::nullopt;
  }
  int value = 0;
  for (auto it = first; it != end; ++it) {
    value = value * 10 + (*it - '0');
  }
  if (value > 100) {
    return std::nullopt;
  }
  return value;
}

ParticipantSession::ParticipantSession(DemographicProfile profile, ChatBackend& backend, Rng rng)
    : profile_(std::move(profile)), backend_(&backend), rng_(std::move(rng)) {
  validate_profile(profile_);
  transcript_.push_back({Role::system, persona_system_prompt(profile_)});
}

void ParticipantSession::append(Role role, std::string content) {
  transcript_.push_back({role, std::move(content)});
}

PreferenceReading ParticipantSession::measure_preference() {
  append(Role::user, std::string(kPreferencePrompt));
  PreferenceReading reading;
  for (int attempt = 1; attempt <= kMaxPreferenceAttempts; ++attempt) {
    auto reply = backend_->complete(transcript_, rng_);
    if (const auto value = extract_preference(reply)) {
      reading.value = *value;
      reading.raw_text = reply;
      reading.attempts = attempt;
      append(Role::assistant, std::move(reply));
      return reading;
    }
    reading.rejected.push_back(std::move(reply));
  }
  // Keep the transcript alternating: the last raw reply closes the turn.
  append(Role::assistant, reading.rejected.back());
  throw InvalidTrial("no preference in " + std::to_string(kMaxPreferenceAttempts) + " replies",
                     std::move(reading.rejected));
}

std::string ParticipantSession::deliver_intervention(std::string_view intervention) {
  if (detail::trim(intervention).empty()) {
    throw DomainError("intervention text is empty");
  }
  append(Role::user, std::string(intervention));
  auto ack = backend_->complete(transcript_, rng_);
  append(Role::assistant, ack);
  return ack;
}

ParticipantSession open_session(const DemographicProfile& profile, ChatBackend& backend, Rng rng) {
  return ParticipantSession(profile, backend, std::move(rng));
}

SyntheticPersona SyntheticPersona::with_planted_arms(
    const std::array<ValuePairArm, kContextCount>& planted, double planted_shift,
    double other_shift) {
  SyntheticPersona persona;
  for (std::size_t ctx = 0; ctx < kContextCount; ++ctx) {
    for (int v = 1; v <= kValueCount; ++v) {
      persona.sensitivity[ctx][static_cast<std::size_t>(v - 1)] =
          planted[ctx].contains(v) ? planted_shift : other_shift;
    }
  }
  persona.static_shift.fill(persona.untargeted_shift);
  return persona;
}

const std::array<ValuePairArm, kContextCount>& SyntheticPersona::default_planted_arms() {
  // Indexed by BanditContext::index().
  static const std::array<ValuePairArm, kContextCount> kPlanted = {
      ValuePairArm{3, 5},  // under45/male
      ValuePairArm{3, 6},  // under45/female
      ValuePairArm{1, 5},  // over45/male
      ValuePairArm{2, 7},  // over45/female
  };
  return kPlanted;
}

SyntheticPersona SyntheticPersona::defaults() {
  return with_planted_arms(default_planted_arms());
}

SyntheticPersona SyntheticPersona::null_model() {
  SyntheticPersona persona;
  persona.noise_std = 0.0;
  persona.untargeted_shift = 0.0;
  persona.static_shift.fill(0.0);
  return persona;
}

void SyntheticPersona::validate() const {
  const auto finite = [](double v) { return std::isfinite(v); };
  if (!finite(base_mean) || !finite(base_std) || !finite(noise_std) || base_std < 0.0 ||
      noise_std < 0.0) {
    throw ConfigError("synthetic persona: base_mean must be finite, stds nonnegative");
  }
  if (!finite(untargeted_shift)) {
    throw ConfigError("synthetic persona: untargeted shift must be finite");
  }
  for (const auto& row : sensitivity) {
    if (!std::all_of(row.begin(), row.end(), finite)) {
      throw ConfigError("synthetic persona: sensitivities must be finite");
    }
  }
  if (!std::all_of(static_shift.begin(), static_shift.end(), finite)) {
    throw ConfigError("synthetic persona: static shifts must be finite");
  }
}

double SyntheticPersona::arm_contribution(const BanditContext& context,
                                          const ValuePairArm& arm) const {
  const auto& row = sensitivity[context.index()];
  return row[static_cast<std::size_t>(arm.lo - 1)] + row[static_cast<std::size_t>(arm.hi - 1)];
}

double SyntheticPersona::contribution(const BanditContext& context, std::string_view intervention,
                                      const InterventionCatalog& catalog) const {
  if (const auto index = catalog.find(intervention)) {
    return static_shift[static_cast<std::size_t>(*index - 1)];
  }
  double total = 0.0;
  bool targeted = false;
  for (int v = 1; v <= kValueCount; ++v) {
    if (intervention.find(ValueCatalog::label(v)) != std::string_view::npos) {
      total += sensitivity[context.index()][static_cast<std::size_t>(v - 1)];
      targeted = true;
    }
  }
  return targeted ? total : untargeted_shift;
}

std::string synthetic_reply(const SyntheticPersona& persona, std::span<const ChatMessage> transcript,
                            Rng& rng, const InterventionCatalog& catalog) {
  if (transcript.empty() || transcript.front().role != Role::system) {
    throw ProtocolError("synthetic participant needs a persona system prompt");
  }
  if (transcript.back().role != Role::user) {
    throw ProtocolError("synthetic participant expects a user turn last");
  }
  if (!is_preference_query(transcript.back())) {
    return std::string(kSyntheticAcknowledgment);
  }

  // Last accepted reading: an assistant reply directly after a preference query.
  std::optional<int> previous;
  std::size_t previous_at = 0;
  for (std::size_t i = 1; i + 1 < transcript.size(); ++i) {
    if (is_preference_query(transcript[i - 1]) && transcript[i].role == Role::assistant) {
      if (const auto v = extract_preference(transcript[i].content)) {
        previous = v;
        previous_at = i;
      }
    }
  }
  if (!previous) {
    const double draw = rng.normal(persona.base_mean, persona.base_std);
    return std::to_string(static_cast<int>(std::lround(clamp_preference(draw))));
  }

  DemographicProfile probe;
  probe.age = property_value(transcript.front().content, "Age").value_or("");
  probe.gender = property_value(transcript.front().content, "Gender").value_or("");
  const auto context = to_context(probe);

  double shift = 0.0;
  for (std::size_t i = previous_at + 1; i + 1 < transcript.size(); ++i) {
    if (transcript[i].role == Role::user && !is_preference_query(transcript[i])) {
      shift += persona.contribution(context, transcript[i].content, catalog);
    }
  }
  const double draw = static_cast<double>(*previous) + shift + rng.normal(0.0, persona.noise_std);
  return std::to_string(static_cast<int>(std::lround(clamp_preference(draw))));
}

SyntheticParticipantBackend::SyntheticParticipantBackend(SyntheticPersona persona,
                                                         const InterventionCatalog& catalog)
    : persona_(std::move(persona)), catalog_(&catalog) {
  persona_.validate();
}

std::string SyntheticParticipantBackend::complete(std::span<const ChatMessage> messages, Rng& rng) {
  return synthetic_reply(persona_, messages, rng, *catalog_);
}

}  // namespace pearrl
