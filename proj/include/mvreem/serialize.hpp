#pragma once

#include <string>
#include <vector>

#include "mvreem/mrt.hpp"
#include "mvreem/reem.hpp"

namespace mvreem {

inline constexpr int kModelSchemaVersion = 1;

/// Pretty-printed JSON document for a fitted model. Doubles are written in
/// shortest round-trip form, so loading reproduces every parameter exactly.
std::string serialize_model(const ReemModel& model);
ReemModel parse_model(const std::string& text);

void save_model(const ReemModel& model, const std::string& path);
ReemModel load_model(const std::string& path);

/// Nested JSON rendering of a tree; `predictor_names` may be empty.
std::string serialize_tree(const MultivariateTree& tree, const std::vector<std::string>& predictor_names);

}  // namespace mvreem
