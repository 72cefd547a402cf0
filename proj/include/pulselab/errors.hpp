#pragma once

#include <stdexcept>
#include <string>

namespace pulselab {

/// A kernel failed one of the admissibility clauses. `clause` is one of
/// "1", "2", "3a", "3b"; `witness` is a point where the clause fails
/// (NaN when no single witness applies).
struct NotAdmissible : std::runtime_error {
  NotAdmissible(std::string clause_, double witness_, const std::string& what_)
      : std::runtime_error(what_), clause(std::move(clause_)), witness(witness_) {}
  std::string clause;
  double witness;
};

/// The certificate interpolation system was singular or too ill-conditioned.
struct ConstructionFailed : std::runtime_error {
  ConstructionFailed(double condition_, const std::string& what_)
      : std::runtime_error(what_), condition(condition_) {}
  double condition;
};

}  // namespace pulselab
