#pragma once

#include <cstddef>
#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <string_view>
#include <unordered_map>
#include <variant>
#include <vector>

namespace daedalus {

enum class AttributeRole { production_context, shape, size };
enum class AttributeKind { categorical, ordinal, numeric };

std::string_view to_string(AttributeRole role);
std::string_view to_string(AttributeKind kind);
AttributeRole parse_role(std::string_view text);
AttributeKind parse_kind(std::string_view text);

struct AttributeDescriptor {
    std::string name;
    AttributeRole role = AttributeRole::size;
    AttributeKind kind = AttributeKind::numeric;
    std::optional<std::string> unit;
    /// Present (and non-empty) exactly for categorical and ordinal attributes.
    std::optional<std::vector<std::string>> categories;

    bool is_numeric() const { return kind == AttributeKind::numeric; }

    friend bool operator==(const AttributeDescriptor&, const AttributeDescriptor&) = default;
};

/// Ordered attribute descriptors plus the designated elongation attribute.
/// Instances are always valid: the factory rejects broken schemas.
class AttributeSchema {
public:
    AttributeSchema() = default;

    /// Throws Error(validation) listing every invariant violation.
    static AttributeSchema create(std::vector<AttributeDescriptor> descriptors, std::string elongation);

    const std::vector<AttributeDescriptor>& descriptors() const { return descriptors_; }
    const std::string& elongation() const { return elongation_; }
    std::size_t size() const { return descriptors_.size(); }

    const AttributeDescriptor* find(std::string_view name) const;
    /// Throws Error(not_found).
    const AttributeDescriptor& at(std::string_view name) const;
    std::optional<std::size_t> index_of(std::string_view name) const;

    std::size_t count(AttributeRole role) const;
    std::size_t count(AttributeKind kind) const;
    std::vector<std::string> names() const;
    std::vector<std::string> numeric_names() const;

    /// 3 production-context, 3 shape, 6 size; 2 ordinal, 1 categorical, 9 numeric.
    bool has_reference_shape() const;

    friend bool operator==(const AttributeSchema&, const AttributeSchema&) = default;

private:
    std::vector<AttributeDescriptor> descriptors_;
    std::string elongation_;
};

using AttributeValue = std::variant<double, std::string>;

struct ParticleRecord {
    std::string id;
    std::string image_ref;
    std::map<std::string, AttributeValue, std::less<>> values;

    friend bool operator==(const ParticleRecord&, const ParticleRecord&) = default;
};

enum class Provenance { real, synthetic };
std::string_view to_string(Provenance provenance);
Provenance parse_provenance(std::string_view text);

/// Immutable particle collection. Row index is the canonical particle index
/// shared by feature matrices, layouts and coordinate arrays.
class Dataset {
public:
    Dataset() = default;
    Dataset(AttributeSchema schema, std::vector<ParticleRecord> particles, Provenance provenance,
            std::string created_at);

    const AttributeSchema& schema() const { return schema_; }
    const std::vector<ParticleRecord>& particles() const { return particles_; }
    const ParticleRecord& particle(std::size_t row) const { return particles_.at(row); }
    std::size_t size() const { return particles_.size(); }
    bool empty() const { return particles_.empty(); }
    Provenance provenance() const { return provenance_; }
    const std::string& created_at() const { return created_at_; }

    /// Row of the first particle carrying `id`.
    std::optional<std::size_t> row_of(std::string_view id) const;
    /// Content hash over schema and rows; names the dataset version in API responses.
    const std::string& fingerprint() const { return fingerprint_; }

    friend bool operator==(const Dataset& a, const Dataset& b) {
        return a.schema_ == b.schema_ && a.particles_ == b.particles_ && a.provenance_ == b.provenance_ &&
               a.created_at_ == b.created_at_;
    }

private:
    AttributeSchema schema_;
    std::vector<ParticleRecord> particles_;
    Provenance provenance_ = Provenance::real;
    std::string created_at_;
    std::unordered_map<std::string, std::size_t> rows_;
    std::string fingerprint_;
};

/// A categorical view of one attribute: the category order plus one code per
/// row (-1 when the row's value is not one of the categories).
struct CategoryColumn {
    std::string name;
    std::vector<std::string> categories;
    std::vector<std::int32_t> codes;
};

/// Values of a numeric attribute in row order (NaN where absent or non-numeric).
std::vector<double> numeric_column(const Dataset& dataset, std::string_view attribute);
/// Throws Error(invalid_argument) for numeric or unknown attributes.
CategoryColumn category_column(const Dataset& dataset, std::string_view attribute);

enum class ViolationKind { unknown_attribute, missing_attribute, wrong_type, non_finite, unknown_category, duplicate_id };
std::string_view to_string(ViolationKind kind);

struct Violation {
    ViolationKind kind;
    std::string particle_id;
    std::string attribute;
    std::string message;
};

struct ValidationReport {
    std::vector<Violation> violations;
    bool ok() const { return violations.empty(); }
    std::vector<std::string> describe() const;
};

ValidationReport validate_dataset(const Dataset& dataset);

/// Current UTC time as ISO-8601 with second precision.
std::string now_iso8601();

/// 64-bit FNV-1a, hex encoded.
std::string content_hash(std::string_view bytes);

}  // namespace daedalus
