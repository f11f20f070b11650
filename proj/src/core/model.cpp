#include "daedalus/model.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <ctime>
#include <limits>
#include <set>

#include "daedalus/error.hpp"

namespace daedalus {

std::string_view to_string(ErrorCode code) {
    switch (code) {
        case ErrorCode::io: return "io_error";
        case ErrorCode::parse: return "parse_error";
        case ErrorCode::validation: return "validation_error";
        case ErrorCode::encoding: return "encoding_error";
        case ErrorCode::invalid_argument: return "invalid_argument";
        case ErrorCode::not_found: return "not_found";
        case ErrorCode::conflict: return "conflict";
    }
    return "unknown";
}

std::string_view to_string(AttributeRole role) {
    switch (role) {
        case AttributeRole::production_context: return "production-context";
        case AttributeRole::shape: return "shape";
        case AttributeRole::size: return "size";
    }
    return "size";
}

std::string_view to_string(AttributeKind kind) {
    switch (kind) {
        case AttributeKind::categorical: return "categorical";
        case AttributeKind::ordinal: return "ordinal";
        case AttributeKind::numeric: return "numeric";
    }
    return "numeric";
}

AttributeRole parse_role(std::string_view text) {
    if (text == "production-context") return AttributeRole::production_context;
    if (text == "shape") return AttributeRole::shape;
    if (text == "size") return AttributeRole::size;
    throw Error(ErrorCode::parse, "unknown attribute role '" + std::string(text) + "'");
}

AttributeKind parse_kind(std::string_view text) {
    if (text == "categorical") return AttributeKind::categorical;
    if (text == "ordinal") return AttributeKind::ordinal;
    if (text == "numeric") return AttributeKind::numeric;
    throw Error(ErrorCode::parse, "unknown attribute kind '" + std::string(text) + "'");
}

std::string_view to_string(Provenance provenance) {
    return provenance == Provenance::real ? "real" : "synthetic";
}

Provenance parse_provenance(std::string_view text) {
    if (text == "real") return Provenance::real;
    if (text == "synthetic") return Provenance::synthetic;
    throw Error(ErrorCode::parse, "unknown provenance '" + std::string(text) + "'");
}

AttributeSchema AttributeSchema::create(std::vector<AttributeDescriptor> descriptors, std::string elongation) {
    std::vector<std::string> problems;
    std::set<std::string, std::less<>> seen;
    for (const auto& d : descriptors) {
        if (d.name.empty()) problems.push_back("attribute with empty name");
        if (!seen.insert(d.name).second) problems.push_back("duplicate attribute name '" + d.name + "'");
        if (d.is_numeric() && d.categories) {
            problems.push_back("numeric attribute '" + d.name + "' must not declare categories");
        }
        if (!d.is_numeric()) {
            if (!d.categories || d.categories->empty()) {
                problems.push_back("attribute '" + d.name + "' needs a non-empty category order");
            } else {
                std::set<std::string, std::less<>> cats(d.categories->begin(), d.categories->end());
                if (cats.size() != d.categories->size()) {
                    problems.push_back("attribute '" + d.name + "' repeats a category");
                }
            }
        }
    }
    const AttributeDescriptor* elong = nullptr;
    for (const auto& d : descriptors) {
        if (d.name == elongation) elong = &d;
    }
    if (!elong) {
        problems.push_back("elongation attribute '" + elongation + "' is not in the schema");
    } else {
        if (elong->role != AttributeRole::shape) problems.push_back("elongation attribute must have role shape");
        if (!elong->is_numeric()) problems.push_back("elongation attribute must be numeric");
    }
    if (!problems.empty()) {
        throw Error(ErrorCode::validation, "invalid attribute schema", std::move(problems));
    }
    AttributeSchema schema;
    schema.descriptors_ = std::move(descriptors);
    schema.elongation_ = std::move(elongation);
    return schema;
}

const AttributeDescriptor* AttributeSchema::find(std::string_view name) const {
    for (const auto& d : descriptors_) {
        if (d.name == name) return &d;
    }
    return nullptr;
}

const AttributeDescriptor& AttributeSchema::at(std::string_view name) const {
    if (const auto* d = find(name)) return *d;
    throw Error(ErrorCode::not_found, "unknown attribute '" + std::string(name) + "'");
}

std::optional<std::size_t> AttributeSchema::index_of(std::string_view name) const {
    for (std::size_t i = 0; i < descriptors_.size(); ++i) {
        if (descriptors_[i].name == name) return i;
    }
    return std::nullopt;
}

std::size_t AttributeSchema::count(AttributeRole role) const {
    std::size_t n = 0;
    for (const auto& d : descriptors_) n += d.role == role;
    return n;
}

std::size_t AttributeSchema::count(AttributeKind kind) const {
    std::size_t n = 0;
    for (const auto& d : descriptors_) n += d.kind == kind;
    return n;
}

std::vector<std::string> AttributeSchema::names() const {
    std::vector<std::string> out;
    out.reserve(descriptors_.size());
    for (const auto& d : descriptors_) out.push_back(d.name);
    return out;
}

std::vector<std::string> AttributeSchema::numeric_names() const {
    std::vector<std::string> out;
    for (const auto& d : descriptors_) {
        if (d.is_numeric()) out.push_back(d.name);
    }
    return out;
}

bool AttributeSchema::has_reference_shape() const {
    return count(AttributeRole::production_context) == 3 && count(AttributeRole::shape) == 3 &&
           count(AttributeRole::size) == 6 && count(AttributeKind::ordinal) == 2 &&
           count(AttributeKind::categorical) == 1 && count(AttributeKind::numeric) == 9;
}

namespace {

void hash_bytes(std::uint64_t& h, std::string_view bytes) {
    for (unsigned char c : bytes) {
        h ^= c;
        h *= 1099511628211ULL;
    }
}

std::string hex64(std::uint64_t h) {
    static constexpr char digits[] = "0123456789abcdef";
    std::string out(16, '0');
    for (int i = 15; i >= 0; --i) {
        out[static_cast<std::size_t>(i)] = digits[h & 0xF];
        h >>= 4;
    }
    return out;
}

}  // namespace

std::string content_hash(std::string_view bytes) {
    std::uint64_t h = 14695981039346656037ULL;
    hash_bytes(h, bytes);
    return hex64(h);
}

Dataset::Dataset(AttributeSchema schema, std::vector<ParticleRecord> particles, Provenance provenance,
                 std::string created_at)
    : schema_(std::move(schema)),
      particles_(std::move(particles)),
      provenance_(provenance),
      created_at_(std::move(created_at)) {
    rows_.reserve(particles_.size());
    std::uint64_t h = 14695981039346656037ULL;
    for (const auto& name : schema_.names()) {
        hash_bytes(h, name);
        hash_bytes(h, "\x1f");
    }
    for (std::size_t row = 0; row < particles_.size(); ++row) {
        const auto& p = particles_[row];
        rows_.try_emplace(p.id, row);
        hash_bytes(h, p.id);
        hash_bytes(h, "\x1e");
        hash_bytes(h, p.image_ref);
        for (const auto& [name, value] : p.values) {
            hash_bytes(h, name);
            if (const auto* d = std::get_if<double>(&value)) {
                hash_bytes(h, std::string_view(reinterpret_cast<const char*>(d), sizeof(double)));
            } else {
                hash_bytes(h, std::get<std::string>(value));
            }
        }
    }
    fingerprint_ = hex64(h);
}

std::optional<std::size_t> Dataset::row_of(std::string_view id) const {
    auto it = rows_.find(std::string(id));
    if (it == rows_.end()) return std::nullopt;
    return it->second;
}

std::vector<double> numeric_column(const Dataset& dataset, std::string_view attribute) {
    std::vector<double> out(dataset.size(), std::numeric_limits<double>::quiet_NaN());
    for (std::size_t row = 0; row < dataset.size(); ++row) {
        const auto& values = dataset.particle(row).values;
        auto it = values.find(attribute);
        if (it == values.end()) continue;
        if (const auto* d = std::get_if<double>(&it->second)) out[row] = *d;
    }
    return out;
}

CategoryColumn category_column(const Dataset& dataset, std::string_view attribute) {
    const auto& desc = dataset.schema().at(attribute);
    if (desc.is_numeric()) {
        throw Error(ErrorCode::invalid_argument, "attribute '" + desc.name + "' is numeric, not categorical");
    }
    CategoryColumn col;
    col.name = desc.name;
    col.categories = *desc.categories;
    std::unordered_map<std::string_view, std::int32_t> lookup;
    for (std::size_t i = 0; i < col.categories.size(); ++i) {
        lookup.emplace(col.categories[i], static_cast<std::int32_t>(i));
    }
    col.codes.assign(dataset.size(), -1);
    for (std::size_t row = 0; row < dataset.size(); ++row) {
        const auto& values = dataset.particle(row).values;
        auto it = values.find(attribute);
        if (it == values.end()) continue;
        if (const auto* s = std::get_if<std::string>(&it->second)) {
            if (auto found = lookup.find(*s); found != lookup.end()) col.codes[row] = found->second;
        }
    }
    return col;
}

std::string_view to_string(ViolationKind kind) {
    switch (kind) {
        case ViolationKind::unknown_attribute: return "unknown-attribute";
        case ViolationKind::missing_attribute: return "missing-attribute";
        case ViolationKind::wrong_type: return "wrong-type";
        case ViolationKind::non_finite: return "non-finite";
        case ViolationKind::unknown_category: return "unknown-category";
        case ViolationKind::duplicate_id: return "duplicate-id";
    }
    return "unknown";
}

std::vector<std::string> ValidationReport::describe() const {
    std::vector<std::string> out;
    out.reserve(violations.size());
    for (const auto& v : violations) {
        std::string line = std::string(to_string(v.kind)) + ": particle '" + v.particle_id + "'";
        if (!v.attribute.empty()) line += ", attribute '" + v.attribute + "'";
        if (!v.message.empty()) line += ": " + v.message;
        out.push_back(std::move(line));
    }
    return out;
}

ValidationReport validate_dataset(const Dataset& dataset) {
    ValidationReport report;
    const auto& schema = dataset.schema();
    std::unordered_map<std::string_view, std::size_t> id_counts;

    for (const auto& p : dataset.particles()) {
        if (++id_counts[p.id] == 2) {
            report.violations.push_back({ViolationKind::duplicate_id, p.id, "", "id occurs more than once"});
        }
        for (const auto& [name, value] : p.values) {
            if (!schema.find(name)) {
                report.violations.push_back({ViolationKind::unknown_attribute, p.id, name, "not in schema"});
            }
        }
        for (const auto& desc : schema.descriptors()) {
            auto it = p.values.find(desc.name);
            if (it == p.values.end()) {
                report.violations.push_back({ViolationKind::missing_attribute, p.id, desc.name, "no value"});
                continue;
            }
            if (desc.is_numeric()) {
                const auto* d = std::get_if<double>(&it->second);
                if (!d) {
                    report.violations.push_back({ViolationKind::wrong_type, p.id, desc.name, "expected a number"});
                } else if (!std::isfinite(*d)) {
                    report.violations.push_back({ViolationKind::non_finite, p.id, desc.name, "value is not finite"});
                }
            } else {
                const auto* s = std::get_if<std::string>(&it->second);
                if (!s) {
                    report.violations.push_back({ViolationKind::wrong_type, p.id, desc.name, "expected a category"});
                    continue;
                }
                const auto& cats = *desc.categories;
                if (std::find(cats.begin(), cats.end(), *s) == cats.end()) {
                    report.violations.push_back(
                        {ViolationKind::unknown_category, p.id, desc.name, "category '" + *s + "' not in order"});
                }
            }
        }
    }
    return report;
}

std::string now_iso8601() {
    const auto now = std::chrono::system_clock::to_time_t(std::chrono::system_clock::now());
    std::tm tm{};
    gmtime_r(&now, &tm);
    char buf[32];
    std::strftime(buf, sizeof(buf), "%Y-%m-%dT%H:%M:%SZ", &tm);
    return buf;
}

}  // namespace daedalus
