#include "nsub/io/web_export.hpp"

#include <cmath>
#include <fstream>

#include "nsub/errors.hpp"

namespace nsub {

using nlohmann::json;

namespace {

json mesh_json(const TriMesh& mesh) {
  json verts = json::array();
  for (int v = 0; v < mesh.vertex_count(); ++v) {
    json row = json::array();
    for (int k = 0; k < mesh.dim(); ++k) row.push_back(mesh.vertices(v, k));
    verts.push_back(std::move(row));
  }
  json faces = json::array();
  for (const auto& t : mesh.triangles) faces.push_back({t[0], t[1], t[2]});
  return {{"dim", mesh.dim()}, {"vertices", std::move(verts)}, {"faces", std::move(faces)}};
}

json geometry_json(const SystemGeometry& g) {
  switch (g.kind) {
    case SystemGeometry::Kind::Mesh: {
      json out = mesh_json(g.surface);
      out["kind"] = "mesh";
      return out;
    }
    case SystemGeometry::Kind::RigidBodies: {
      json bodies = json::array();
      for (const BodyShape& b : g.bodies) {
        json body = mesh_json(b.mesh);
        body["shape"] = b.shape;
        body["size"] = {b.size.x(), b.size.y(), b.size.z()};
        bodies.push_back(std::move(body));
      }
      return {{"kind", "rigid"}, {"bodies", std::move(bodies)}};
    }
    case SystemGeometry::Kind::Abstract:
      break;
  }
  return {{"kind", "abstract"}};
}

// JSON has no encoding for non-finite numbers.
double finite(double v) {
  if (!std::isfinite(v)) throw NumericalError("export_web: model contains a non-finite value");
  return v;
}

}  // namespace

json web_export_json(const SubspaceModel& model, const SystemDef& system) {
  model.validate();
  if (model.config_dim() != system.n) throw ConfigError("export_web: model output differs from the system dimension");
  if (model.m != system.condition_dim()) throw ConfigError("export_web: model and system differ in condition count");

  json layers = json::array();
  for (int l = 0; l < model.mlp.num_layers(); ++l) {
    const Mat& W = model.mlp.weights[l];
    json rows = json::array();
    for (Eigen::Index r = 0; r < W.rows(); ++r) {
      json row = json::array();
      for (Eigen::Index c = 0; c < W.cols(); ++c) row.push_back(finite(W(r, c)));
      rows.push_back(std::move(row));
    }
    json bias = json::array();
    for (Eigen::Index i = 0; i < model.mlp.biases[l].size(); ++i) bias.push_back(finite(model.mlp.biases[l][i]));
    layers.push_back({{"weights", std::move(rows)}, {"bias", std::move(bias)}});
  }
  json conditions = json::array();
  for (const ConditionRange& c : system.conditions) {
    conditions.push_back({{"name", c.name}, {"min", c.min}, {"max", c.max}});
  }
  return {
      {"format", "nsub-web"},
      {"version", kWebFormatVersion},
      {"name", system.name},
      {"dims", {{"n", system.n}, {"d", model.d}, {"m", model.m}}},
      {"sigma", model.sigma},
      {"activation", "elu"},
      {"layer_sizes", model.mlp.layer_sizes()},
      {"layers", std::move(layers)},
      {"geometry", geometry_json(system.geometry)},
      {"conditions", std::move(conditions)},
      {"latent_range", {-kLatentRangeHint, kLatentRangeHint}},
  };
}

void export_web(const SubspaceModel& model, const SystemDef& system, const std::filesystem::path& path) {
  const json doc = web_export_json(model, system);
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  std::ofstream out(path);
  if (!out) throw ConfigError("cannot write '" + path.string() + "'");
  out << doc.dump() << "\n";
}

MlpParams mlp_from_web_json(const json& doc) {
  MlpParams p;
  try {
    for (const json& layer : doc.at("layers")) {
      const json& rows = layer.at("weights");
      const auto r = static_cast<Eigen::Index>(rows.size());
      const auto c = r > 0 ? static_cast<Eigen::Index>(rows.at(0).size()) : 0;
      Mat W(r, c);
      for (Eigen::Index i = 0; i < r; ++i) {
        if (static_cast<Eigen::Index>(rows.at(i).size()) != c) throw ConfigError("web model: ragged weight matrix");
        for (Eigen::Index j = 0; j < c; ++j) W(i, j) = rows.at(i).at(j).get<double>();
      }
      const json& bias = layer.at("bias");
      Vec b(static_cast<Eigen::Index>(bias.size()));
      for (Eigen::Index i = 0; i < b.size(); ++i) b[i] = bias.at(i).get<double>();
      p.weights.push_back(std::move(W));
      p.biases.push_back(std::move(b));
    }
  } catch (const json::exception& e) {
    throw ConfigError(std::string("web model: ") + e.what());
  }
  p.validate();
  return p;
}

namespace {

bool type_matches(const json& v, const std::string& type) {
  if (type == "object") return v.is_object();
  if (type == "array") return v.is_array();
  if (type == "string") return v.is_string();
  if (type == "number") return v.is_number();
  if (type == "integer") return v.is_number_integer() || (v.is_number_float() && std::floor(v.get<double>()) == v.get<double>());
  if (type == "boolean") return v.is_boolean();
  if (type == "null") return v.is_null();
  return false;
}

void check(const json& v, const json& schema, const json& root, const std::string& where,
           std::vector<std::string>& errors) {
  if (schema.contains("$ref")) {
    const std::string ref = schema["$ref"].get<std::string>();
    const std::string prefix = "#/$defs/";
    if (ref.rfind(prefix, 0) != 0) {
      errors.push_back(where + ": unsupported $ref " + ref);
      return;
    }
    check(v, root.at("$defs").at(ref.substr(prefix.size())), root, where, errors);
    return;
  }
  if (schema.contains("type")) {
    const json& t = schema["type"];
    bool ok = false;
    if (t.is_array()) {
      for (const json& one : t) ok = ok || type_matches(v, one.get<std::string>());
    } else {
      ok = type_matches(v, t.get<std::string>());
    }
    if (!ok) {
      errors.push_back(where + ": expected type " + t.dump());
      return;
    }
  }
  if (schema.contains("const") && v != schema["const"]) errors.push_back(where + ": expected " + schema["const"].dump());
  if (schema.contains("enum")) {
    bool found = false;
    for (const json& e : schema["enum"]) found = found || v == e;
    if (!found) errors.push_back(where + ": not one of " + schema["enum"].dump());
  }
  if (v.is_number()) {
    const double x = v.get<double>();
    if (schema.contains("minimum") && x < schema["minimum"].get<double>()) errors.push_back(where + ": below minimum");
    if (schema.contains("maximum") && x > schema["maximum"].get<double>()) errors.push_back(where + ": above maximum");
  }
  if (v.is_object()) {
    if (schema.contains("required")) {
      for (const json& key : schema["required"]) {
        if (!v.contains(key.get<std::string>())) errors.push_back(where + ": missing '" + key.get<std::string>() + "'");
      }
    }
    const json props = schema.value("properties", json::object());
    for (auto it = v.begin(); it != v.end(); ++it) {
      if (props.contains(it.key())) {
        check(it.value(), props[it.key()], root, where + "/" + it.key(), errors);
      } else if (schema.contains("additionalProperties") && schema["additionalProperties"] == false) {
        errors.push_back(where + ": unexpected property '" + it.key() + "'");
      }
    }
  }
  if (v.is_array()) {
    if (schema.contains("minItems") && v.size() < schema["minItems"].get<std::size_t>()) {
      errors.push_back(where + ": fewer than " + schema["minItems"].dump() + " items");
    }
    if (schema.contains("maxItems") && v.size() > schema["maxItems"].get<std::size_t>()) {
      errors.push_back(where + ": more than " + schema["maxItems"].dump() + " items");
    }
    if (schema.contains("items")) {
      for (std::size_t i = 0; i < v.size(); ++i) {
        check(v[i], schema["items"], root, where + "/" + std::to_string(i), errors);
      }
    }
  }
  if (schema.contains("oneOf")) {
    int matches = 0;
    for (const json& alt : schema["oneOf"]) {
      std::vector<std::string> sub;
      check(v, alt, root, where, sub);
      if (sub.empty()) ++matches;
    }
    if (matches != 1) errors.push_back(where + ": matches " + std::to_string(matches) + " of the oneOf alternatives");
  }
}

}  // namespace

// Supports the subset of JSON Schema the shipped schema uses: type, const,
// enum, minimum, maximum, required, properties, additionalProperties: false,
// items, minItems, maxItems, oneOf and local $ref into $defs.
std::vector<std::string> validate_against_schema(const json& doc, const json& schema) {
  std::vector<std::string> errors;
  check(doc, schema, schema, "", errors);
  return errors;
}

}  // namespace nsub
