#include "fedpt/comm.hpp"

#include <numeric>

#include "fedpt/fed_algorithms.hpp"

namespace fedpt {

void CommLedger::charge(std::size_t client, std::uint64_t down, std::uint64_t up) {
  if (touched_.size() != down_.size()) touched_.assign(down_.size(), false);
  down_.at(client) += down;
  up_.at(client) += up;
  total_down_ += down;
  total_up_ += up;
  open_.down += down;
  open_.up += up;
  if (!touched_[client]) {
    touched_[client] = true;
    ++open_.participants;
  }
}

void CommLedger::end_round() {
  if (open_.participants > 0) {
    participant_down_ += static_cast<double>(open_.down) / static_cast<double>(open_.participants);
    participant_up_ += static_cast<double>(open_.up) / static_cast<double>(open_.participants);
  }
  history_.push_back(open_);
  open_ = {};
  touched_.assign(down_.size(), false);
}

double CommLedger::population_mean_down() const noexcept {
  return down_.empty() ? 0.0 : static_cast<double>(total_down_) / static_cast<double>(down_.size());
}

double CommLedger::population_mean_up() const noexcept {
  return up_.empty() ? 0.0 : static_cast<double>(total_up_) / static_cast<double>(up_.size());
}

bool CommLedger::audit() const {
  std::uint64_t hd = 0, hu = 0;
  for (const auto& r : history_) {
    hd += r.down;
    hu += r.up;
  }
  hd += open_.down;
  hu += open_.up;
  const auto cd = std::accumulate(down_.begin(), down_.end(), std::uint64_t{0});
  const auto cu = std::accumulate(up_.begin(), up_.end(), std::uint64_t{0});
  return hd == total_down_ && hu == total_up_ && cd == total_down_ && cu == total_up_;
}

TransferRule transfer_rule(AlgorithmKind kind) {
  switch (kind) {
    case AlgorithmKind::FedAvg:
    case AlgorithmKind::LocalAdam: return {1, 1, 0};
    case AlgorithmKind::Scaffold: return {2, 2, 0};
    case AlgorithmKind::FedLada: return {2, 1, 0};
    case AlgorithmKind::FAdamET:
    case AlgorithmKind::FAdamGT: return {2, 1, 1};
  }
  return {};
}

void charge_communication(CommLedger& ledger, const RoundPlan& plan, AlgorithmKind kind) {
  const auto rule = transfer_rule(kind);
  for (std::size_t i : plan.participants) {
    const bool tracks = rule.tracker_up > 0 && plan.is_tracker(i);
    ledger.charge(i, rule.down, rule.up + (tracks ? rule.tracker_up : 0));
  }
  ledger.end_round();
}

}  // namespace fedpt
