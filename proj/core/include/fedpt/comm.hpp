#pragma once

#include <cstddef>
#include <cstdint>
#include <vector>

#include "fedpt/algorithm_kind.hpp"

namespace fedpt {

struct RoundPlan;

/// Counts d-vector transfers per client. One unit = one model-sized vector.
class CommLedger {
 public:
  explicit CommLedger(std::size_t n = 0) : down_(n, 0), up_(n, 0) {}

  void charge(std::size_t client, std::uint64_t down, std::uint64_t up);
  /// Closes the current round, recording its totals.
  void end_round();

  std::size_t clients() const noexcept { return down_.size(); }
  std::uint64_t client_down(std::size_t i) const { return down_.at(i); }
  std::uint64_t client_up(std::size_t i) const { return up_.at(i); }
  std::uint64_t total_down() const noexcept { return total_down_; }
  std::uint64_t total_up() const noexcept { return total_up_; }
  std::uint64_t total() const noexcept { return total_down_ + total_up_; }

  /// Cumulative units averaged over the whole population of n clients.
  double population_mean_down() const noexcept;
  double population_mean_up() const noexcept;
  /// Sum over rounds of (round units / participants that round).
  double participant_mean_down() const noexcept { return participant_down_; }
  double participant_mean_up() const noexcept { return participant_up_; }

  struct RoundTotals {
    std::uint64_t down = 0;
    std::uint64_t up = 0;
    std::size_t participants = 0;
  };
  const std::vector<RoundTotals>& history() const noexcept { return history_; }

  /// Cumulative totals equal the per-round history and the per-client sums.
  bool audit() const;

 private:
  std::vector<std::uint64_t> down_;
  std::vector<std::uint64_t> up_;
  std::uint64_t total_down_ = 0;
  std::uint64_t total_up_ = 0;
  double participant_down_ = 0.0;
  double participant_up_ = 0.0;
  RoundTotals open_;
  std::vector<bool> touched_;
  std::vector<RoundTotals> history_;
};

/// Units (down, up) charged to one participant for one round.
struct TransferRule {
  std::uint64_t down = 0;
  std::uint64_t up = 0;
  std::uint64_t tracker_up = 0;  // extra upload for clients in the tracking subset
};

TransferRule transfer_rule(AlgorithmKind kind);

/// Charges one round of `plan` under `kind` and closes the round.
void charge_communication(CommLedger& ledger, const RoundPlan& plan, AlgorithmKind kind);

}  // namespace fedpt
