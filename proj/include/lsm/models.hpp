#pragma once

#include "lsm/dynamics.hpp"

#include <string>
#include <vector>

namespace lsm {

/// The scalar worked example:
///   dx = -(1/eps) x dt + (1/(4 eps)) cos(y) dt + sigma eps^{-1/alpha} dL
///   dy = y dt + (1/4) sin(lambda x) dt
/// with K = gamma = beta = 1, L_f = L_g = 1/4, Lambda = [0.2, 3].
ModelSpec example_model();

/// Variant of the worked example with g = 0 (decoupled slow flow).
ModelSpec example_model_g0();

struct HypothesisCheck {
  std::string name;
  bool pass = false;
  std::string witness;  // failing point / quotient, empty on pass
};

struct HypothesisReport {
  std::vector<HypothesisCheck> checks;
  bool all_pass = true;
  const HypothesisCheck* find(const std::string& name) const;
};

/// Spot-checks (H1) on random (t, x) samples, (H2) exactly on the declared
/// constants, and the declared Lipschitz constants against sampled
/// difference quotients on the unit box (g's state quotient at lambda_ref,
/// its lambda quotient over Lambda).
HypothesisReport check_hypotheses(const ModelSpec& spec, int sample_count,
                                  const SeededStream& stream);

/// Max |w'(p) - (w(p+h)-w(p-h))/(2h)| over random points, for w in {f vs
/// f_y, g vs g_lambda}; the derivative-consistency oracle.
double derivative_consistency(const ModelSpec& spec, int sample_count, const SeededStream& stream);

struct ModelRegistryEntry {
  std::string name;
  ModelSpec spec;
  std::vector<std::pair<std::string, std::string>> documented_properties;
};

class ModelRegistry {
 public:
  /// Registry with the built-in models.
  static const ModelRegistry& builtin();

  const ModelRegistryEntry& find(const std::string& name) const;
  bool contains(const std::string& name) const;
  const std::vector<ModelRegistryEntry>& entries() const { return entries_; }
  void add(ModelRegistryEntry entry);

 private:
  std::vector<ModelRegistryEntry> entries_;
};

}  // namespace lsm
