#pragma once

#include <json.hpp>

#include <filesystem>
#include <string>
#include <vector>

#include "nsub/subspace_fit.hpp"
#include "nsub/systems.hpp"

namespace nsub {

inline constexpr int kWebFormatVersion = 1;
inline constexpr double kLatentRangeHint = 2.5;

// Document layout (see schemas/web_export.schema.json):
//   format, version, dims {n, d, m}, sigma, activation, layer_sizes,
//   layers [{weights: rows, bias}], geometry, conditions [{name, min, max}],
//   latent_range [-2.5, 2.5]
nlohmann::json web_export_json(const SubspaceModel& model, const SystemDef& system);
void export_web(const SubspaceModel& model, const SystemDef& system, const std::filesystem::path& path);

// Network half of an exported document, for round-trip checks.
MlpParams mlp_from_web_json(const nlohmann::json& doc);

std::vector<std::string> validate_against_schema(const nlohmann::json& doc, const nlohmann::json& schema);

}  // namespace nsub
