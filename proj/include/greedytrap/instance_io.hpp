#pragma once

#include <optional>
#include <string>

#include "greedytrap/continuum.hpp"
#include "greedytrap/core.hpp"
#include "greedytrap/dmso.hpp"
#include "json.hpp"

namespace greedytrap {

inline constexpr int kSchemaVersion = 1;

/// Malformed instance document; `pointer` is the JSON pointer of the offending node.
struct SchemaError : Error {
  SchemaError(std::string pointer, const std::string& what);
  std::string pointer;
};

enum class InstanceKind { Mab, Cb, Dmso, Continuum };

const char* kind_name(InstanceKind kind);

/// Parsed instance file. Exactly one of finite / continuum / models is set,
/// matching `kind` (mab and cb are both finite).
struct InstanceFile {
  InstanceKind kind = InstanceKind::Mab;
  std::optional<ProblemInstance> finite;
  std::optional<ContinuumInstance> continuum;
  std::optional<ModelClass> models;
  std::optional<std::size_t> n0;          // dmso warm-up samples per policy
  std::optional<std::size_t> decoy_hint;  // dmso decoy member (finite ones live on the instance)
};

InstanceFile parse_instance(const nlohmann::json& doc);
/// Throws SchemaError with pointer "" for JSON syntax errors.
InstanceFile parse_instance_text(const std::string& text);
InstanceFile load_instance(const std::string& path);

nlohmann::json instance_to_json(const InstanceFile& file);
/// Pretty-printed document with a trailing newline.
std::string serialize_instance(const InstanceFile& file);
void save_instance(const InstanceFile& file, const std::string& path);

InstanceFile finite_file(ProblemInstance instance);
InstanceFile continuum_file(ContinuumInstance instance);

/// Reads a whole file; throws Error when it cannot be opened.
std::string read_text_file(const std::string& path);
void write_text_file(const std::string& path, const std::string& text);

}  // namespace greedytrap
