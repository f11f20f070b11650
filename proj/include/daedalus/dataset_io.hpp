#pragma once

#include <filesystem>
#include <string>

#include "json.hpp"

#include "daedalus/model.hpp"

namespace daedalus {

/// Parsed manifest document. Relative paths are resolved against the
/// manifest's directory.
struct Manifest {
    AttributeSchema schema;
    Provenance provenance = Provenance::real;
    std::string created_at;
    std::filesystem::path particles_csv;
    std::filesystem::path image_dir;
};

nlohmann::json schema_to_json(const AttributeSchema& schema);
AttributeSchema schema_from_json(const nlohmann::json& doc);
/// Reads a standalone schema document (the "schema" object of a manifest).
AttributeSchema load_schema(const std::filesystem::path& path);

Manifest read_manifest(const std::filesystem::path& manifest_path);

/// Loads manifest + CSV. Errors: io, parse (message names the CSV line),
/// validation (details carry the validation report).
Dataset load_dataset(const std::filesystem::path& manifest_path);

/// Writes `<dir>/manifest.json` and `<dir>/particles.csv`; images are
/// referenced relative to `<dir>/images`. Returns the manifest path.
std::filesystem::path write_dataset(const Dataset& dataset, const std::filesystem::path& dir);

/// Manifest path inside a data directory.
std::filesystem::path manifest_path(const std::filesystem::path& data_dir);

}  // namespace daedalus
