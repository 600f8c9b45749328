#pragma once

#include <array>
#include <string>
#include <string_view>

#include "fedpt/local_optim.hpp"

namespace fedpt {

enum class AlgorithmKind { FedAvg, Scaffold, LocalAdam, FedLada, FAdamET, FAdamGT };

inline constexpr std::array<AlgorithmKind, 6> kAllAlgorithms = {
    AlgorithmKind::FedAvg,  AlgorithmKind::Scaffold, AlgorithmKind::LocalAdam,
    AlgorithmKind::FedLada, AlgorithmKind::FAdamET,  AlgorithmKind::FAdamGT};

std::string_view to_string(AlgorithmKind kind);
/// Case-insensitive; throws ConfigError on an unknown name.
AlgorithmKind algorithm_from_string(std::string_view name);

constexpr bool uses_adam(AlgorithmKind k) {
  return k != AlgorithmKind::FedAvg && k != AlgorithmKind::Scaffold;
}

/// FAdamET and FAdamGT maintain y and y_i.
constexpr bool uses_tracking(AlgorithmKind k) {
  return k == AlgorithmKind::FAdamET || k == AlgorithmKind::FAdamGT;
}

constexpr CorrectionMode correction_mode(AlgorithmKind k) {
  switch (k) {
    case AlgorithmKind::FAdamET: return CorrectionMode::EstimateTracking;
    case AlgorithmKind::FAdamGT: return CorrectionMode::GradientTracking;
    default: return CorrectionMode::None;
  }
}

}  // namespace fedpt
