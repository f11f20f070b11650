#include "daedalus/dataset_io.hpp"

#include <charconv>
#include <fstream>
#include <sstream>

#include "daedalus/error.hpp"

namespace daedalus {
namespace fs = std::filesystem;
using nlohmann::json;

namespace {

constexpr const char* kManifestFormat = "daedalus-dataset/1";

std::string read_text(const fs::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw Error(ErrorCode::io, "cannot open " + path.string());
    std::ostringstream buf;
    buf << in.rdbuf();
    return buf.str();
}

struct CsvRecord {
    std::size_t line = 0;
    std::vector<std::string> fields;
};

// RFC 4180 style reader: quoted fields may contain separators, doubled quotes
// and line breaks. `line` is the 1-based line on which the record starts.
std::vector<CsvRecord> parse_csv(std::string_view text) {
    std::vector<CsvRecord> records;
    CsvRecord current;
    std::string field;
    std::size_t line = 1;
    current.line = 1;
    bool in_quotes = false;
    bool field_started = false;
    bool record_has_content = false;

    auto end_field = [&] {
        current.fields.push_back(std::move(field));
        field.clear();
        field_started = false;
    };
    auto end_record = [&] {
        if (record_has_content || !current.fields.empty() || field_started) {
            end_field();
            records.push_back(std::move(current));
        }
        current = CsvRecord{};
        current.line = line;
        record_has_content = false;
    };

    for (std::size_t i = 0; i < text.size(); ++i) {
        const char c = text[i];
        if (in_quotes) {
            if (c == '"') {
                if (i + 1 < text.size() && text[i + 1] == '"') {
                    field.push_back('"');
                    ++i;
                } else {
                    in_quotes = false;
                }
            } else {
                if (c == '\n') ++line;
                field.push_back(c);
            }
            continue;
        }
        switch (c) {
            case '"':
                if (field_started && !field.empty()) {
                    throw Error(ErrorCode::parse, "line " + std::to_string(line) + ": stray quote");
                }
                in_quotes = true;
                field_started = true;
                record_has_content = true;
                break;
            case ',':
                end_field();
                record_has_content = true;
                break;
            case '\r':
                break;
            case '\n':
                ++line;
                end_record();
                break;
            default:
                field.push_back(c);
                field_started = true;
                record_has_content = true;
        }
    }
    if (in_quotes) throw Error(ErrorCode::parse, "line " + std::to_string(current.line) + ": unterminated quote");
    end_record();
    return records;
}

std::string csv_escape(std::string_view value) {
    if (value.find_first_of(",\"\r\n") == std::string_view::npos) return std::string(value);
    std::string out = "\"";
    for (char c : value) {
        if (c == '"') out.push_back('"');
        out.push_back(c);
    }
    out.push_back('"');
    return out;
}

std::string format_double(double v) {
    char buf[64];
    auto [end, ec] = std::to_chars(buf, buf + sizeof(buf), v);
    return std::string(buf, end);
}

}  // namespace

json schema_to_json(const AttributeSchema& schema) {
    json attrs = json::array();
    for (const auto& d : schema.descriptors()) {
        json a{{"name", d.name}, {"role", std::string(to_string(d.role))}, {"kind", std::string(to_string(d.kind))}};
        if (d.unit) a["unit"] = *d.unit;
        if (d.categories) a["categories"] = *d.categories;
        attrs.push_back(std::move(a));
    }
    return json{{"elongation", schema.elongation()}, {"attributes", std::move(attrs)}};
}

AttributeSchema schema_from_json(const json& doc) {
    try {
        std::vector<AttributeDescriptor> descriptors;
        for (const auto& a : doc.at("attributes")) {
            AttributeDescriptor d;
            d.name = a.at("name").get<std::string>();
            d.role = parse_role(a.at("role").get<std::string>());
            d.kind = parse_kind(a.at("kind").get<std::string>());
            if (a.contains("unit") && !a["unit"].is_null()) d.unit = a["unit"].get<std::string>();
            if (a.contains("categories") && !a["categories"].is_null()) {
                d.categories = a["categories"].get<std::vector<std::string>>();
            }
            descriptors.push_back(std::move(d));
        }
        return AttributeSchema::create(std::move(descriptors), doc.at("elongation").get<std::string>());
    } catch (const json::exception& e) {
        throw Error(ErrorCode::parse, std::string("malformed schema: ") + e.what());
    }
}

AttributeSchema load_schema(const fs::path& path) {
    try {
        return schema_from_json(json::parse(read_text(path)));
    } catch (const json::parse_error& e) {
        throw Error(ErrorCode::parse, path.string() + ": " + e.what());
    }
}

fs::path manifest_path(const fs::path& data_dir) { return data_dir / "manifest.json"; }

Manifest read_manifest(const fs::path& path) {
    json doc;
    try {
        doc = json::parse(read_text(path));
    } catch (const json::parse_error& e) {
        throw Error(ErrorCode::parse, path.string() + ": " + e.what());
    }
    Manifest m;
    const fs::path base = path.parent_path();
    try {
        m.schema = schema_from_json(doc.at("schema"));
        m.provenance = parse_provenance(doc.value("provenance", "real"));
        m.created_at = doc.value("created_at", "");
        m.particles_csv = base / doc.value("particles", "particles.csv");
        m.image_dir = base / doc.value("images", "images");
    } catch (const json::exception& e) {
        throw Error(ErrorCode::parse, path.string() + ": " + e.what());
    }
    return m;
}

Dataset load_dataset(const fs::path& path) {
    Manifest m = read_manifest(path);
    const auto records = parse_csv(read_text(m.particles_csv));
    const auto csv_name = m.particles_csv.filename().string();
    if (records.empty()) throw Error(ErrorCode::parse, csv_name + " line 1: missing header");

    std::vector<std::string> expected{"id", "image"};
    for (const auto& name : m.schema.names()) expected.push_back(name);
    if (records.front().fields != expected) {
        throw Error(ErrorCode::parse, csv_name + " line 1: header must be id,image followed by the schema attributes in order");
    }

    const auto& descriptors = m.schema.descriptors();
    std::vector<ParticleRecord> particles;
    particles.reserve(records.size() - 1);
    for (std::size_t r = 1; r < records.size(); ++r) {
        const auto& rec = records[r];
        const std::string where = csv_name + " line " + std::to_string(rec.line);
        if (rec.fields.size() != expected.size()) {
            throw Error(ErrorCode::parse, where + ": expected " + std::to_string(expected.size()) + " columns, found " +
                                              std::to_string(rec.fields.size()));
        }
        ParticleRecord p;
        p.id = rec.fields[0];
        p.image_ref = rec.fields[1];
        for (std::size_t a = 0; a < descriptors.size(); ++a) {
            const auto& text = rec.fields[a + 2];
            if (descriptors[a].is_numeric()) {
                double v = 0;
                const char* first = text.data();
                const char* last = first + text.size();
                auto [ptr, ec] = std::from_chars(first, last, v);
                if (ec != std::errc() || ptr != last) {
                    throw Error(ErrorCode::parse,
                                where + ": attribute '" + descriptors[a].name + "' is not a number: '" + text + "'");
                }
                p.values.emplace(descriptors[a].name, v);
            } else {
                p.values.emplace(descriptors[a].name, text);
            }
        }
        particles.push_back(std::move(p));
    }

    Dataset dataset(std::move(m.schema), std::move(particles), m.provenance, m.created_at);
    auto report = validate_dataset(dataset);
    if (!report.ok()) {
        throw Error(ErrorCode::validation,
                    std::to_string(report.violations.size()) + " dataset violation(s) in " + path.string(),
                    report.describe());
    }
    return dataset;
}

fs::path write_dataset(const Dataset& dataset, const fs::path& dir) {
    fs::create_directories(dir);
    const auto& schema = dataset.schema();
    json manifest{{"format", kManifestFormat},
                  {"provenance", std::string(to_string(dataset.provenance()))},
                  {"created_at", dataset.created_at()},
                  {"particles", "particles.csv"},
                  {"images", "images"},
                  {"schema", schema_to_json(schema)}};
    const auto mpath = manifest_path(dir);
    {
        std::ofstream out(mpath, std::ios::binary);
        if (!out) throw Error(ErrorCode::io, "cannot write " + mpath.string());
        out << manifest.dump(2) << '\n';
    }
    std::ofstream out(dir / "particles.csv", std::ios::binary);
    if (!out) throw Error(ErrorCode::io, "cannot write " + (dir / "particles.csv").string());
    out << "id,image";
    for (const auto& d : schema.descriptors()) out << ',' << csv_escape(d.name);
    out << '\n';
    for (const auto& p : dataset.particles()) {
        out << csv_escape(p.id) << ',' << csv_escape(p.image_ref);
        for (const auto& d : schema.descriptors()) {
            out << ',';
            auto it = p.values.find(d.name);
            if (it == p.values.end()) continue;
            if (const auto* v = std::get_if<double>(&it->second)) {
                out << format_double(*v);
            } else {
                out << csv_escape(std::get<std::string>(it->second));
            }
        }
        out << '\n';
    }
    if (!out) throw Error(ErrorCode::io, "write failed for " + (dir / "particles.csv").string());
    return mpath;
}

}  // namespace daedalus
