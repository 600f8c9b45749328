#include "fedpt/algorithm_kind.hpp"

#include <algorithm>
#include <cctype>
#include <string>

#include "fedpt/errors.hpp"

namespace fedpt {

std::string_view to_string(AlgorithmKind kind) {
  switch (kind) {
    case AlgorithmKind::FedAvg: return "FedAvg";
    case AlgorithmKind::Scaffold: return "Scaffold";
    case AlgorithmKind::LocalAdam: return "LocalAdam";
    case AlgorithmKind::FedLada: return "FedLada";
    case AlgorithmKind::FAdamET: return "FAdamET";
    case AlgorithmKind::FAdamGT: return "FAdamGT";
  }
  return "?";
}

AlgorithmKind algorithm_from_string(std::string_view name) {
  auto lower = [](std::string_view s) {
    std::string out(s);
    std::transform(out.begin(), out.end(), out.begin(),
                   [](unsigned char c) { return static_cast<char>(std::tolower(c)); });
    return out;
  };
  const auto wanted = lower(name);
  for (auto k : kAllAlgorithms) {
    if (lower(to_string(k)) == wanted) return k;
  }
  throw ConfigError("unknown algorithm '" + std::string(name) + "'", "algorithm");
}

}  // namespace fedpt
