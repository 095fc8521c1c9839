#include <cmath>
#include <fstream>
#include <random>
#include <string>
#include <vector>

#include <gtest/gtest.h>

#include "pearrl/errors.hpp"
#include "pearrl/participants.hpp"
#include "scripted_backend.hpp"

namespace pearrl {
namespace {

using testing::ScriptedBackend;

DemographicProfile profile(std::string age = "25 to 44 years", std::string gender = "Male") {
  DemographicProfile p;
  p.age = std::move(age);
  p.income = "$50,000 to 74,999 per year";
  p.education = "Some college";
  p.politics = "Democratic party";
  p.gender = std::move(gender);
  p.household_type = "Married couple household";
  p.ethnicity = "White";
  p.name = "Robert Thompson";
  p.state = "Utah";
  p.city = "Ogden";
  return p;
}

struct ReplyCase {
  std::optional<int> expected;
  std::string reply;
};

std::vector<ReplyCase> reply_fixture() {
  std::ifstream in(std::string(PEARRL_FIXTURE_DIR) + "/preference_replies.tsv");
  std::vector<ReplyCase> out;
  std::string line;
  while (std::getline(in, line)) {
    if (line.empty() || line[0] == '#') continue;
    const auto tab = line.find('\t');
    const auto head = line.substr(0, tab);
    const auto reply = tab == std::string::npos ? std::string() : line.substr(tab + 1);
    out.push_back({head == "none" ? std::nullopt : std::optional<int>(std::stoi(head)), reply});
  }
  return out;
}

TEST(PersonaPrompt, PrefixPlusProperties) {
  const auto p = profile();
  EXPECT_EQ(persona_system_prompt(p), std::string(kPersonaPromptPrefix) + format_properties(p));
  EXPECT_TRUE(kPreferencePrompt.starts_with("On a scale from 0 to 100"));
  EXPECT_TRUE(kPreferencePrompt.ends_with("Score: "));
}

TEST(ExtractPreference, ThirtyReplyFixture) {
  const auto cases = reply_fixture();
  ASSERT_EQ(cases.size(), 30u);
  for (const auto& c : cases) {
    EXPECT_EQ(extract_preference(c.reply), c.expected) << "reply: '" << c.reply << "'";
  }
}

TEST(ExtractPreference, NeverFabricates) {
  std::mt19937_64 gen(17);
  std::uniform_int_distribution<int> ch(32, 126);
  std::uniform_int_distribution<int> len(0, 40);
  for (int i = 0; i < 20000; ++i) {
    std::string s(static_cast<std::size_t>(len(gen)), ' ');
    for (auto& c : s) c = static_cast<char>(ch(gen));
    if (const auto v = extract_preference(s)) {
      ASSERT_GE(*v, 0);
      ASSERT_LE(*v, 100);
      EXPECT_NE(s.find(std::to_string(*v)), std::string::npos) << s;
    }
  }
}

TEST(Session, StartsWithPersonaSystemPrompt) {
  ScriptedBackend backend({});
  ParticipantSession session(profile(), backend, Rng(0));
  ASSERT_EQ(session.transcript().size(), 1u);
  EXPECT_EQ(session.transcript()[0].role, Role::system);
  EXPECT_EQ(session.transcript()[0].content, persona_system_prompt(profile()));
}

TEST(Session, ResamplesUntilANumberAppears) {
  ScriptedBackend backend({"I cannot say.", "Hmm.", "Score: 64"});
  ParticipantSession session(profile(), backend, Rng(0));
  const auto reading = session.measure_preference();
  EXPECT_EQ(reading.value, 64);
  EXPECT_EQ(reading.attempts, 3);
  EXPECT_EQ(reading.raw_text, "Score: 64");
  EXPECT_EQ(reading.rejected, (std::vector<std::string>{"I cannot say.", "Hmm."}));
  // Resampling re-sends the same conversation; rejected replies never enter it.
  ASSERT_EQ(backend.calls.size(), 3u);
  EXPECT_EQ(backend.calls[0], backend.calls[2]);
  const auto& t = session.transcript();
  ASSERT_EQ(t.size(), 3u);
  EXPECT_EQ(t[1].content, kPreferencePrompt);
  EXPECT_EQ(t[2].content, "Score: 64");
}

TEST(Session, TenNumberFreeRepliesIsInvalidTrial) {
  std::vector<std::string> replies(10, "no idea");
  replies[9] = "still no idea";
  ScriptedBackend backend(replies);
  ParticipantSession session(profile(), backend, Rng(0));
  try {
    session.measure_preference();
    FAIL() << "expected InvalidTrial";
  } catch (const InvalidTrial& e) {
    EXPECT_EQ(e.raw_replies.size(), 10u);
  }
  EXPECT_EQ(backend.calls.size(), 10u);
  EXPECT_EQ(session.transcript().back().content, "still no idea");
}

TEST(Session, FixtureDrivesResamplingWithoutFabrication) {
  // Feed the whole fixture in order; each reading must be the next parsable
  // reply, and a run of ten unparsable replies must end the trial.
  const auto cases = reply_fixture();
  std::vector<std::string> replies;
  for (const auto& c : cases) replies.push_back(c.reply);
  ScriptedBackend backend(replies);
  std::size_t pos = 0;
  int readings = 0;
  int invalid = 0;
  while (pos < cases.size()) {
    ParticipantSession session(profile(), backend, Rng(0));
    const auto before = backend.remaining();
    std::size_t next = pos;
    while (next < cases.size() && !cases[next].expected) ++next;
    const bool should_fail = next - pos >= static_cast<std::size_t>(kMaxPreferenceAttempts) ||
                             next == cases.size();
    if (should_fail && next - pos < static_cast<std::size_t>(kMaxPreferenceAttempts)) break;
    try {
      const auto r = session.measure_preference();
      ASSERT_FALSE(should_fail);
      EXPECT_EQ(r.value, *cases[next].expected);
      EXPECT_EQ(static_cast<std::size_t>(r.attempts), next - pos + 1);
      ++readings;
    } catch (const InvalidTrial& e) {
      ASSERT_TRUE(should_fail);
      EXPECT_EQ(e.raw_replies.size(), static_cast<std::size_t>(kMaxPreferenceAttempts));
      ++invalid;
    }
    pos += before - backend.remaining();
  }
  EXPECT_EQ(readings, 15);
  EXPECT_EQ(invalid, 1);
}

TEST(Session, DeliverInterventionKeepsAlternation) {
  ScriptedBackend backend({"50", "Thanks.", "60"});
  ParticipantSession session(profile(), backend, Rng(0));
  session.measure_preference();
  EXPECT_EQ(session.deliver_intervention("BEVs save money."), "Thanks.");
  EXPECT_EQ(session.measure_preference().value, 60);
  const auto& t = session.transcript();
  ASSERT_EQ(t.size(), 7u);
  for (std::size_t i = 1; i < t.size(); ++i) {
    EXPECT_EQ(t[i].role, i % 2 == 1 ? Role::user : Role::assistant) << i;
  }
  EXPECT_EQ(t[3].content, "BEVs save money.");
}

TEST(Session, BlankInterventionRejected) {
  ScriptedBackend backend({"50"});
  ParticipantSession session(profile(), backend, Rng(0));
  EXPECT_THROW(session.deliver_intervention("  \n"), DomainError);
}

TEST(Session, InvalidProfileRejected) {
  ScriptedBackend backend({});
  auto p = profile();
  p.name.clear();
  EXPECT_THROW(ParticipantSession(p, backend, Rng(0)), DataError);
}

TEST(SyntheticPersona, DefaultsPlantTwentyPointArms) {
  const auto persona = SyntheticPersona::defaults();
  for (std::size_t ctx = 0; ctx < kContextCount; ++ctx) {
    const auto c = BanditContext::from_index(ctx);
    const auto planted = SyntheticPersona::default_planted_arms()[ctx];
    double best_other = -1e9;
    for (const auto& arm : all_arms()) {
      if (arm == planted) continue;
      best_other = std::max(best_other, persona.arm_contribution(c, arm));
    }
    EXPECT_DOUBLE_EQ(persona.arm_contribution(c, planted), 20.0);
    EXPECT_GE(persona.arm_contribution(c, planted) - best_other, 10.0);
  }
}

TEST(SyntheticPersona, ContributionPrecedence) {
  const auto persona = SyntheticPersona::defaults();
  const BanditContext ctx{AgeClass::under45, GenderClass::male};
  const auto& catalog = InterventionCatalog::defaults();
  EXPECT_DOUBLE_EQ(persona.contribution(ctx, catalog.text(1), catalog), persona.static_shift[0]);
  EXPECT_DOUBLE_EQ(
      persona.contribution(ctx, "Targeted: Carbon emission reduction, Economic benefits.", catalog),
      20.0);
  EXPECT_DOUBLE_EQ(persona.contribution(ctx, "Targeted: Status symbol.", catalog), -5.0);
  EXPECT_DOUBLE_EQ(persona.contribution(ctx, "Untargeted intervention.", catalog),
                   persona.untargeted_shift);
}

std::vector<ChatMessage> conversation(const DemographicProfile& p, const std::string& pre,
                                      const std::string& intervention) {
  return {{Role::system, persona_system_prompt(p)},
          {Role::user, std::string(kPreferencePrompt)},
          {Role::assistant, pre},
          {Role::user, intervention},
          {Role::assistant, "Understood."},
          {Role::user, std::string(kPreferencePrompt)}};
}

TEST(SyntheticReply, ReadsContextFromPrompt) {
  auto persona = SyntheticPersona::defaults();
  persona.noise_std = 0.0;
  Rng rng(0);
  // over45/female plants (2, 7).
  const auto p = profile("55 to 64 years", "Female");
  const auto planted = conversation(
      p, "50", "Targeted: Battery life concerns, Government incentives.");
  EXPECT_EQ(synthetic_reply(persona, planted, rng), "70");
  // The same text is off-target for under45/male.
  const auto off = conversation(profile(), "50",
                                "Targeted: Battery life concerns, Government incentives.");
  EXPECT_EQ(synthetic_reply(persona, off, rng), "40");
}

TEST(SyntheticReply, ClampsToScale) {
  auto persona = SyntheticPersona::defaults();
  persona.noise_std = 0.0;
  Rng rng(0);
  const auto msgs =
      conversation(profile(), "95", "Targeted: Carbon emission reduction, Economic benefits.");
  EXPECT_EQ(synthetic_reply(persona, msgs, rng), "100");
}

TEST(SyntheticReply, AcknowledgesNonQuestions) {
  Rng rng(0);
  std::vector<ChatMessage> msgs = {{Role::system, persona_system_prompt(profile())},
                                   {Role::user, "Some intervention."}};
  EXPECT_EQ(synthetic_reply(SyntheticPersona::defaults(), msgs, rng), kSyntheticAcknowledgment);
}

TEST(SyntheticReply, PreferenceDrawMatchesBaseline) {
  const auto persona = SyntheticPersona::defaults();
  std::vector<ChatMessage> msgs = {{Role::system, persona_system_prompt(profile())},
                                   {Role::user, std::string(kPreferencePrompt)}};
  double sum = 0.0;
  const int n = 20000;
  for (int i = 0; i < n; ++i) {
    auto rng = Rng::stream(1, StreamPurpose::backend, static_cast<std::uint64_t>(i));
    const auto v = extract_preference(synthetic_reply(persona, msgs, rng));
    ASSERT_TRUE(v.has_value());
    sum += *v;
  }
  // Clamping at 100 pulls the mean slightly under 70.
  EXPECT_NEAR(sum / n, 69.87, 0.35);
}

TEST(SyntheticPersona, NullModelGivesZeroShift) {
  const auto persona = SyntheticPersona::null_model();
  const auto& catalog = InterventionCatalog::defaults();
  for (int i = 1; i <= kInterventionCount; ++i) {
    auto rng = Rng(static_cast<std::uint64_t>(i));
    const auto msgs = conversation(profile(), "63", catalog.text(i));
    EXPECT_EQ(synthetic_reply(persona, msgs, rng, catalog), "63");
  }
}

TEST(SyntheticPersona, ValidateRejectsNonFinite) {
  auto persona = SyntheticPersona::defaults();
  persona.noise_std = -1.0;
  EXPECT_THROW(persona.validate(), ConfigError);
  persona = SyntheticPersona::defaults();
  persona.sensitivity[0][0] = std::nan("");
  EXPECT_THROW(persona.validate(), ConfigError);
}

}  // namespace
}  // namespace pearrl
