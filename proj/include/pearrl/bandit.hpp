#pragma once

#include <cstddef>
#include <cstdint>
#include <limits>
#include <optional>
#include <span>
#include <vector>

#include "pearrl/rng.hpp"
#include "pearrl/values.hpp"

namespace pearrl {

enum class SelectionPolicy { ucb, random };

/// Score given to arms never pulled in a context, so they are explored first.
inline constexpr double kUnexploredScore = std::numeric_limits<double>::infinity();

struct ArmStats {
  std::uint64_t pulls = 0;
  double mean = 0.0;  // meaningful only when pulls > 0

  bool operator==(const ArmStats&) const = default;
};

/// One row of the flat persisted form.
struct BanditStateRow {
  std::size_t context = 0;
  std::size_t arm = 0;
  std::uint64_t pulls = 0;
  double mean = 0.0;
};

/// Pull counts and empirical mean rewards per (context, arm), plus the global
/// step count t = sum of all pull counts. Single writer; reads are pure.
class BanditState {
 public:
  explicit BanditState(std::size_t num_contexts = kContextCount,
                       std::size_t num_arms = kArmCount);

  std::size_t num_contexts() const { return num_contexts_; }
  std::size_t num_arms() const { return num_arms_; }
  std::uint64_t step() const { return step_; }

  const ArmStats& cell(std::size_t context, std::size_t arm) const;
  std::uint64_t pulls(std::size_t context, std::size_t arm) const { return cell(context, arm).pulls; }
  std::optional<double> mean(std::size_t context, std::size_t arm) const;

  // Rows with pulls > 0, ordered by (context, arm).
  std::vector<BanditStateRow> to_rows() const;
  // Rebuilds a state from persisted rows; rejects out-of-range cells,
  // duplicates and means outside [0, 1].
  static BanditState from_rows(std::size_t num_contexts, std::size_t num_arms,
                               std::span<const BanditStateRow> rows);

  bool operator==(const BanditState&) const = default;

 private:
  friend void update(BanditState& state, std::size_t context, std::size_t arm, double reward);

  ArmStats& mutable_cell(std::size_t context, std::size_t arm);

  std::size_t num_contexts_;
  std::size_t num_arms_;
  std::uint64_t step_ = 0;
  std::vector<ArmStats> cells_;
};

/// Maps a preference shift in [-100, 100] onto [0, 1].
double normalize_reward(double shift);

/// mean + sqrt(2 ln t / n), or kUnexploredScore when the arm is unpulled.
double ucb_score(const BanditState& state, std::size_t context, std::size_t arm);
double ucb_score(const BanditState& state, const BanditContext& context, const ValuePairArm& arm);

/// UCB picks the arg-max score, ties going to the lowest arm index. Random
/// draws uniformly from the stream; UCB never touches it.
std::size_t select_arm(const BanditState& state, std::size_t context, SelectionPolicy policy,
                       Rng& rng);
ValuePairArm select_arm(const BanditState& state, const BanditContext& context,
                        SelectionPolicy policy, Rng& rng);

void update(BanditState& state, std::size_t context, std::size_t arm, double reward);
void update(BanditState& state, const BanditContext& context, const ValuePairArm& arm,
            double reward);

}  // namespace pearrl
