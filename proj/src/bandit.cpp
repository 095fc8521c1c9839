#include "pearrl/bandit.hpp"

#include <cmath>
#include <string>
#include <utility>

#include "pearrl/errors.hpp"

namespace pearrl {

BanditState::BanditState(std::size_t num_contexts, std::size_t num_arms)
    : num_contexts_(num_contexts), num_arms_(num_arms), cells_(num_contexts * num_arms) {
  if (num_contexts == 0 || num_arms == 0) {
    throw DomainError("bandit needs at least one context and one arm");
  }
}

const ArmStats& BanditState::cell(std::size_t context, std::size_t arm) const {
  if (context >= num_contexts_ || arm >= num_arms_) {
    throw DomainError("bandit cell out of range (context " + std::to_string(context) + ", arm " +
                      std::to_string(arm) + ")");
  }
  return cells_[context * num_arms_ + arm];
}

ArmStats& BanditState::mutable_cell(std::size_t context, std::size_t arm) {
  return const_cast<ArmStats&>(std::as_const(*this).cell(context, arm));
}

std::optional<double> BanditState::mean(std::size_t context, std::size_t arm) const {
  const auto& c = cell(context, arm);
  if (c.pulls == 0) {
    return std::nullopt;
  }
  return c.mean;
}

std::vector<BanditStateRow> BanditState::to_rows() const {
  std::vector<BanditStateRow> rows;
  for (std::size_t ctx = 0; ctx < num_contexts_; ++ctx) {
    for (std::size_t arm = 0; arm < num_arms_; ++arm) {
      const auto& c = cells_[ctx * num_arms_ + arm];
      if (c.pulls > 0) {
        rows.push_back({ctx, arm, c.pulls, c.mean});
      }
    }
  }
  return rows;
}

BanditState BanditState::from_rows(std::size_t num_contexts, std::size_t num_arms,
                                   std::span<const BanditStateRow> rows) {
  BanditState state(num_contexts, num_arms);
  for (const auto& row : rows) {
    auto& c = state.mutable_cell(row.context, row.arm);
    if (c.pulls != 0) {
      throw DataError("duplicate bandit state row");
    }
    if (row.pulls == 0) {
      throw DataError("bandit state row with zero pulls");
    }
    if (!(row.mean >= 0.0 && row.mean <= 1.0)) {
      throw DataError("bandit state mean outside [0, 1]");
    }
    c.pulls = row.pulls;
    c.mean = row.mean;
    state.step_ += row.pulls;
  }
  return state;
}

double normalize_reward(double shift) {
  if (!(shift >= -100.0 && shift <= 100.0)) {
    throw DomainError("preference shift outside [-100, 100]: " + std::to_string(shift));
  }
  return (shift + 100.0) / 200.0;
}

double ucb_score(const BanditState& state, std::size_t context, std::size_t arm) {
  const auto& c = state.cell(context, arm);
  if (c.pulls == 0) {
    return kUnexploredScore;
  }
  const double t = static_cast<double>(state.step());
  return c.mean + std::sqrt(2.0 * std::log(t) / static_cast<double>(c.pulls));
}

double ucb_score(const BanditState& state, const BanditContext& context, const ValuePairArm& arm) {
  return ucb_score(state, context.index(), arm.index());
}

std::size_t select_arm(const BanditState& state, std::size_t context, SelectionPolicy policy,
                       Rng& rng) {
  if (context >= state.num_contexts()) {
    throw DomainError("context out of range: " + std::to_string(context));
  }
  if (policy == SelectionPolicy::random) {
    return rng.uniform_index(state.num_arms());
  }
  std::size_t best = 0;
  double best_score = ucb_score(state, context, 0);
  for (std::size_t arm = 1; arm < state.num_arms(); ++arm) {
    const double score = ucb_score(state, context, arm);
    // Strict comparison keeps the lowest index on ties, including +inf ties.
    if (score > best_score) {
      best = arm;
      best_score = score;
    }
  }
  return best;
}

ValuePairArm select_arm(const BanditState& state, const BanditContext& context,
                        SelectionPolicy policy, Rng& rng) {
  return ValuePairArm::from_index(select_arm(state, context.index(), policy, rng));
}

void update(BanditState& state, std::size_t context, std::size_t arm, double reward) {
  if (!(reward >= 0.0 && reward <= 1.0)) {
    throw DomainError("reward outside [0, 1]: " + std::to_string(reward));
  }
  auto& c = state.mutable_cell(context, arm);
  c.pulls += 1;
  c.mean += (reward - c.mean) / static_cast<double>(c.pulls);
  state.step_ += 1;
}

void update(BanditState& state, const BanditContext& context, const ValuePairArm& arm,
            double reward) {
  update(state, context.index(), arm.index(), reward);
}

}  // namespace pearrl
