#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace chainforge {

enum class Errc {
  unbalanced_region,
  malformed_declare,
  nested_region,
  name_collision,
  out_of_sim_memory,
  wild_access,
  attach_outside_arena,
  verification_failed,
  scenario_mismatch,
  missing_baseline,
  invalid_argument,
  io,
};

std::string_view errc_name(Errc code) noexcept;

// Base of every error the library throws. Catch this to handle all of them,
// or one of the aliases below to handle a single condition.
class Error : public std::runtime_error {
 public:
  Error(Errc code, const std::string& what)
      : std::runtime_error(what), code_(code) {}

  Errc code() const noexcept { return code_; }

 private:
  Errc code_;
};

template <Errc C>
class CodedError : public Error {
 public:
  explicit CodedError(const std::string& what) : Error(C, what) {}
};

using UnbalancedRegion = CodedError<Errc::unbalanced_region>;
using MalformedDeclare = CodedError<Errc::malformed_declare>;
using NestedRegion = CodedError<Errc::nested_region>;
using NameCollision = CodedError<Errc::name_collision>;
using OutOfSimMemory = CodedError<Errc::out_of_sim_memory>;
using WildAccess = CodedError<Errc::wild_access>;
using AttachOutsideArena = CodedError<Errc::attach_outside_arena>;
using VerificationFailed = CodedError<Errc::verification_failed>;
using ScenarioMismatch = CodedError<Errc::scenario_mismatch>;
using MissingBaseline = CodedError<Errc::missing_baseline>;
using InvalidArgument = CodedError<Errc::invalid_argument>;
using IoError = CodedError<Errc::io>;

inline std::string_view errc_name(Errc code) noexcept {
  switch (code) {
    case Errc::unbalanced_region: return "UnbalancedRegion";
    case Errc::malformed_declare: return "MalformedDeclare";
    case Errc::nested_region: return "NestedRegion";
    case Errc::name_collision: return "NameCollision";
    case Errc::out_of_sim_memory: return "OutOfSimMemory";
    case Errc::wild_access: return "WildAccess";
    case Errc::attach_outside_arena: return "AttachOutsideArena";
    case Errc::verification_failed: return "VerificationFailed";
    case Errc::scenario_mismatch: return "ScenarioMismatch";
    case Errc::missing_baseline: return "MissingBaseline";
    case Errc::invalid_argument: return "InvalidArgument";
    case Errc::io: return "IoError";
  }
  return "Error";
}

}  // namespace chainforge
