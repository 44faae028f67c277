#pragma once

#include <string>
#include <vector>

#include <nlohmann/json.hpp>

namespace cura::testing {

/// Just enough JSON Schema for the contract tests: type, properties, required,
/// additionalProperties, items, enum, minimum, maximum, oneOf and local $ref.
class SchemaValidator {
 public:
  explicit SchemaValidator(nlohmann::json root) : root_(std::move(root)) {}

  /// Violations of definition `name`; empty when `value` conforms.
  std::vector<std::string> check(const nlohmann::json& value, const std::string& name) const {
    std::vector<std::string> errors;
    validate(value, root_.at("definitions").at(name), "$", errors);
    return errors;
  }

 private:
  const nlohmann::json& resolve(const std::string& ref) const {
    if (ref.rfind("#/", 0) != 0) throw std::invalid_argument("only local refs: " + ref);
    return root_.at(nlohmann::json::json_pointer(ref.substr(1)));
  }

  static bool has_type(const nlohmann::json& v, const std::string& t) {
    if (t == "object") return v.is_object();
    if (t == "array") return v.is_array();
    if (t == "string") return v.is_string();
    if (t == "boolean") return v.is_boolean();
    if (t == "null") return v.is_null();
    if (t == "integer") return v.is_number_integer();
    if (t == "number") return v.is_number();
    throw std::invalid_argument("unknown type " + t);
  }

  void validate(const nlohmann::json& v, const nlohmann::json& s, const std::string& at,
                std::vector<std::string>& errors) const {
    if (s.contains("$ref")) return validate(v, resolve(s.at("$ref").get<std::string>()), at, errors);
    if (s.contains("oneOf")) {
      int matches = 0;
      for (const auto& option : s.at("oneOf")) {
        std::vector<std::string> sub;
        validate(v, option, at, sub);
        matches += sub.empty();
      }
      if (matches != 1) errors.push_back(at + ": matches " + std::to_string(matches) + " oneOf branches");
    }
    if (s.contains("type")) {
      const auto& t = s.at("type");
      bool ok = false;
      if (t.is_string()) ok = has_type(v, t.get<std::string>());
      else
        for (const auto& each : t) ok = ok || has_type(v, each.get<std::string>());
      if (!ok) {
        errors.push_back(at + ": expected type " + t.dump() + ", got " + v.dump());
        return;
      }
    }
    if (s.contains("enum")) {
      const auto& e = s.at("enum");
      if (std::find(e.begin(), e.end(), v) == e.end()) errors.push_back(at + ": " + v.dump() + " not in enum");
    }
    if (v.is_number()) {
      if (s.contains("minimum") && v.get<double>() < s.at("minimum").get<double>())
        errors.push_back(at + ": below minimum");
      if (s.contains("maximum") && v.get<double>() > s.at("maximum").get<double>())
        errors.push_back(at + ": above maximum");
    }
    if (v.is_object()) {
      for (const auto& r : s.value("required", nlohmann::json::array()))
        if (!v.contains(r.get<std::string>())) errors.push_back(at + ": missing " + r.get<std::string>());
      const auto props = s.value("properties", nlohmann::json::object());
      for (const auto& [k, child] : v.items()) {
        if (props.contains(k)) {
          validate(child, props.at(k), at + "." + k, errors);
        } else if (s.contains("additionalProperties")) {
          const auto& extra = s.at("additionalProperties");
          if (extra.is_boolean()) {
            if (!extra.get<bool>()) errors.push_back(at + ": unexpected property " + k);
          } else {
            validate(child, extra, at + "." + k, errors);
          }
        }
      }
    }
    if (v.is_array() && s.contains("items"))
      for (std::size_t i = 0; i < v.size(); ++i) validate(v[i], s.at("items"), at + "[" + std::to_string(i) + "]", errors);
  }

  nlohmann::json root_;
};

}  // namespace cura::testing
