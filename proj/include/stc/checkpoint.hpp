#pragma once

#include <string>
#include <variant>

#include "stc/ensemble.hpp"
#include "stc/models.hpp"

namespace stc {

// A trained model of any kind: one completion model or a whole ensemble.
struct AnyModel {
  std::variant<CompletionModel, EnsembleModel> model;

  bool is_ensemble() const { return std::holds_alternative<EnsembleModel>(model); }
  const Shape& shape() const;
  double predict(std::span<const int64_t> index) const;
  DenseTensor reconstruct() const;
};

// Single models: one JSON header line plus one parameter per line, formatted
// for exact round trips. Ensembles: a manifest listing sibling base
// checkpoints and the aggregator checkpoint.
void save_model(const AnyModel& model, const std::string& path);
AnyModel load_model(const std::string& path);

}  // namespace stc
