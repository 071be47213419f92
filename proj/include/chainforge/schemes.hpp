#pragma once

#include <array>
#include <optional>
#include <string_view>

namespace chainforge {

// How a structure tree is made usable on the device. `naive` is the
// per-object deep copy with pointer fixups; the other three are the
// schemes the benchmark suite compares.
enum class TransferScheme { uvm, marshalling, pointerchain, naive };

inline constexpr std::array<TransferScheme, 4> kAllSchemes = {
    TransferScheme::uvm, TransferScheme::marshalling, TransferScheme::pointerchain, TransferScheme::naive};

constexpr std::string_view scheme_name(TransferScheme s) noexcept {
  switch (s) {
    case TransferScheme::uvm: return "uvm";
    case TransferScheme::marshalling: return "marshalling";
    case TransferScheme::pointerchain: return "pointerchain";
    case TransferScheme::naive: return "naive";
  }
  return "uvm";
}

constexpr std::optional<TransferScheme> parse_scheme(std::string_view s) noexcept {
  for (const auto scheme : kAllSchemes) {
    if (scheme_name(scheme) == s) return scheme;
  }
  return std::nullopt;
}

}  // namespace chainforge
