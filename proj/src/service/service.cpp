#include "daedalus/service.hpp"

#include <charconv>
#include <cstdlib>
#include <regex>
#include <shared_mutex>

#include "httplib.h"

#include "daedalus/coordinates.hpp"
#include "daedalus/dataset_io.hpp"
#include "daedalus/error.hpp"
#include "daedalus/filter.hpp"
#include "daedalus/layout.hpp"
#include "daedalus/projection.hpp"
#include "daedalus/selection.hpp"

namespace daedalus {
using nlohmann::json;
namespace fs = std::filesystem;

namespace {

int http_status(ErrorCode code) {
    switch (code) {
        case ErrorCode::validation:
        case ErrorCode::invalid_argument:
        case ErrorCode::encoding: return 422;
        case ErrorCode::parse: return 400;
        case ErrorCode::not_found: return 404;
        case ErrorCode::conflict: return 409;
        case ErrorCode::io: return 500;
    }
    return 500;
}

json error_body(std::string_view code, const std::string& message, const std::vector<std::string>& details) {
    return json{{"code", code}, {"message", message}, {"details", details}};
}

json parse_body(const httplib::Request& req) {
    if (req.body.empty()) return json::object();
    try {
        return json::parse(req.body);
    } catch (const json::parse_error& e) {
        throw Error(ErrorCode::parse, "request body is not valid JSON", {e.what()});
    }
}

std::optional<std::uint64_t> parse_uint(std::string_view text) {
    std::uint64_t v = 0;
    auto [ptr, ec] = std::from_chars(text.data(), text.data() + text.size(), v);
    if (ec != std::errc() || ptr != text.data() + text.size() || text.empty()) return std::nullopt;
    return v;
}

std::vector<std::string> string_list(const json& doc, const std::string& path) {
    if (!doc.is_array()) throw Error(ErrorCode::validation, "invalid request", {path + ": expected array of strings"});
    std::vector<std::string> out;
    out.reserve(doc.size());
    for (std::size_t i = 0; i < doc.size(); ++i) {
        if (!doc[i].is_string()) {
            throw Error(ErrorCode::validation, "invalid request", {path + "/" + std::to_string(i) + ": expected string"});
        }
        out.push_back(doc[i].get<std::string>());
    }
    return out;
}

std::string request_who(const json& body) {
    return body.contains("who") && body["who"].is_string() ? body["who"].get<std::string>() : "anonymous";
}

}  // namespace

ServiceConfig ServiceConfig::from_environment() {
    ServiceConfig c;
    if (const char* port = std::getenv("DAEDALUS_PORT")) {
        if (auto v = parse_uint(port); v && *v <= 65535) c.port = static_cast<int>(*v);
    }
    if (const char* data = std::getenv("DAEDALUS_DATA")) c.data_dir = data;
    return c;
}

struct Service::Impl {
    ServiceConfig config;
    Dataset dataset;
    ImageStore images;
    LabelStore labels;
    std::unique_ptr<LabelRepository> repository;
    fs::path projections_dir;
    JobManager jobs;
    httplib::Server server;
    std::thread thread;
    int port = 0;

    static std::uint64_t next_job_number(const fs::path& dir) {
        std::uint64_t next = 1;
        std::error_code ec;
        for (const auto& entry : fs::directory_iterator(dir, ec)) {
            const auto stem = entry.path().stem().string();
            if (stem.rfind("job-", 0) == 0) {
                if (auto n = parse_uint(std::string_view(stem).substr(4))) next = std::max(next, *n + 1);
            }
        }
        return next;
    }

    static std::set<std::string, std::less<>> reserved(const Dataset& d) {
        auto names = d.schema().names();
        return {names.begin(), names.end()};
    }

    static std::vector<std::string> ids(const Dataset& d) {
        std::vector<std::string> out;
        out.reserve(d.size());
        for (const auto& p : d.particles()) out.push_back(p.id);
        return out;
    }

    Impl(ServiceConfig cfg, Dataset ds, ImageStore img)
        : config(std::move(cfg)),
          dataset(std::move(ds)),
          images(std::move(img)),
          labels(ids(dataset), reserved(dataset)),
          projections_dir(config.data_dir / "projections"),
          jobs(config.workers, (fs::create_directories(config.data_dir / "projections"),
                                next_job_number(config.data_dir / "projections"))) {
        if (config.data_dir.empty()) throw Error(ErrorCode::invalid_argument, "service needs a data directory");
        repository = std::make_unique<LabelRepository>(config.data_dir / "labels", config.label_snapshot_every);
        repository->attach(labels);
        routes();
    }

    json snapshot_of(const LabelState& state) const {
        return json{{"dataset", dataset.fingerprint()}, {"labels", state.seq}};
    }

    void reply(httplib::Response& res, int status, json body, const LabelState& state) const {
        body["snapshot"] = snapshot_of(state);
        res.status = status;
        res.set_header("X-Daedalus-Snapshot", dataset.fingerprint() + "@" + std::to_string(state.seq));
        res.set_content(body.dump(), "application/json");
    }

    void reply_binary(httplib::Response& res, std::string bytes, const LabelState& state) const {
        res.status = 200;
        res.set_header("X-Daedalus-Snapshot", dataset.fingerprint() + "@" + std::to_string(state.seq));
        res.set_content(std::move(bytes), "application/octet-stream");
    }

    template <class Fn>
    httplib::Server::Handler guard(Fn fn) {
        return [this, fn](const httplib::Request& req, httplib::Response& res) {
            try {
                fn(req, res);
            } catch (const Error& e) {
                res.status = http_status(e.code());
                res.set_content(error_body(to_string(e.code()), e.what(), e.details()).dump(), "application/json");
            } catch (const json::exception& e) {
                res.status = 422;
                res.set_content(error_body("validation_error", "malformed request field", {e.what()}).dump(),
                                "application/json");
            } catch (const std::exception& e) {
                res.status = 500;
                res.set_content(error_body("internal_error", e.what(), {}).dump(), "application/json");
            }
        };
    }

    const LabelAlphabet& resolve_alphabet(const LabelState& state, std::string_view ref) const {
        const LabelAlphabet* a = nullptr;
        if (auto id = parse_uint(ref)) a = state.find_alphabet(*id);
        if (!a) a = state.find_alphabet(ref);
        if (!a) throw Error(ErrorCode::not_found, "unknown alphabet '" + std::string(ref) + "'");
        return *a;
    }

    std::optional<LabelId> resolve_label(const LabelAlphabet& a, const json& ref) const {
        if (ref.is_number_unsigned() || ref.is_number_integer()) {
            const auto id = ref.get<LabelId>();
            if (!a.find(id)) throw Error(ErrorCode::not_found, "label " + std::to_string(id) + " is not in '" + a.name + "'");
            return id;
        }
        if (!ref.is_string()) throw Error(ErrorCode::validation, "invalid request", {"/label: expected id or name"});
        const auto text = ref.get<std::string>();
        if (text == kUnlabeled) return std::nullopt;
        for (const auto& l : a.labels) {
            if (l.name == text) return l.id;
        }
        if (auto id = parse_uint(text); id && a.find(*id)) return *id;
        throw Error(ErrorCode::not_found, "label '" + text + "' is not in '" + a.name + "'");
    }

    std::map<std::string, BinSpec, std::less<>> bins_of(const json& body) const {
        std::map<std::string, BinSpec, std::less<>> out;
        if (!body.contains("bins") || body["bins"].is_null()) return out;
        if (!body["bins"].is_object()) throw Error(ErrorCode::validation, "invalid request", {"/bins: expected object"});
        for (const auto& [name, spec] : body["bins"].items()) out.emplace(name, bin_spec_from_json(spec));
        return out;
    }

    std::optional<BinSpec> bins_for(const std::map<std::string, BinSpec, std::less<>>& bins, std::string_view name) const {
        if (auto it = bins.find(name); it != bins.end()) return it->second;
        return std::nullopt;
    }

    FilterState filters_of(const json& body) const {
        if (!body.contains("filters")) return {};
        return filter_state_from_json(body["filters"]);
    }

    GridLayout layout_for(const json& spec, const LabelState& state) const {
        if (!spec.contains("attribute") || !spec["attribute"].is_string()) {
            throw Error(ErrorCode::validation, "invalid layout request", {"/attribute: expected string"});
        }
        const auto attribute = spec["attribute"].get<std::string>();
        std::optional<BinSpec> bins;
        if (spec.contains("bins") && !spec["bins"].is_null()) bins = bin_spec_from_json(spec["bins"]);
        const auto config = layout_config_from_json(spec.contains("config") ? spec["config"] : json());
        return attribute_layout(dataset, auto_partition(dataset, attribute, bins, &state), config);
    }

    CoordinateFile stored_projection(const std::string& job) const {
        const auto status = jobs.status(job);
        fs::path path;
        if (status) {
            if (status->state != JobState::done) {
                throw Error(ErrorCode::conflict, "job " + job + " is " + std::string(to_string(status->state)));
            }
            path = status->result;
        } else {
            path = projections_dir / (job + ".bin");
            if (job.find('/') != std::string::npos || !fs::exists(path)) {
                throw Error(ErrorCode::not_found, "unknown projection job '" + job + "'");
            }
        }
        return read_coordinates(path);
    }

    json job_json(const JobView& v) const {
        json j{{"job", v.id},
               {"state", to_string(v.state)},
               {"progress", v.progress},
               {"request", v.request},
               {"submitted_at", v.submitted_at}};
        if (!v.finished_at.empty()) j["finished_at"] = v.finished_at;
        if (!v.error.empty()) j["error"] = v.error;
        if (v.state == JobState::done) {
            j["result"] = {{"rows", dataset.size()},
                           {"format", "coordinates/float32"},
                           {"url", "/projection/" + v.id + "?format=binary"}};
        }
        return j;
    }

    void routes();
    void projection_routes();
    void label_routes();
};

void Service::Impl::routes() {
    server.set_payload_max_length(256u << 20);

    server.Get("/dataset", guard([this](const httplib::Request&, httplib::Response& res) {
        auto state = labels.snapshot();
        json particles = json::array();
        for (const auto& p : dataset.particles()) {
            json values = json::object();
            for (const auto& [name, v] : p.values) {
                if (const auto* d = std::get_if<double>(&v)) {
                    values[name] = *d;
                } else {
                    values[name] = std::get<std::string>(v);
                }
            }
            particles.push_back(json{{"id", p.id}, {"image", p.image_ref}, {"values", std::move(values)}});
        }
        reply(res, 200,
              json{{"fingerprint", dataset.fingerprint()},
                   {"size", dataset.size()},
                   {"provenance", to_string(dataset.provenance())},
                   {"created_at", dataset.created_at()},
                   {"particles", std::move(particles)},
                   {"warnings", images.warnings()}},
              *state);
    }));

    server.Get("/attributes", guard([this](const httplib::Request&, httplib::Response& res) {
        auto state = labels.snapshot();
        json attrs = json::array();
        for (const auto& d : dataset.schema().descriptors()) {
            json j{{"name", d.name}, {"role", to_string(d.role)}, {"kind", to_string(d.kind)}, {"augmented", false}};
            if (d.unit) j["unit"] = *d.unit;
            if (d.categories) j["categories"] = *d.categories;
            attrs.push_back(std::move(j));
        }
        for (const auto& [id, a] : state->alphabets) {
            std::vector<std::string> cats;
            for (const auto& l : a.labels) cats.push_back(l.name);
            cats.emplace_back(kUnlabeled);
            attrs.push_back(json{{"name", a.name},
                                 {"role", "label"},
                                 {"kind", "categorical"},
                                 {"augmented", true},
                                 {"alphabet_id", id},
                                 {"categories", std::move(cats)}});
        }
        reply(res, 200, json{{"elongation", dataset.schema().elongation()}, {"attributes", std::move(attrs)}}, *state);
    }));

    server.Post("/layout", guard([this](const httplib::Request& req, httplib::Response& res) {
        auto state = labels.snapshot();
        const auto body = parse_body(req);
        const auto layout = layout_for(body, *state);
        auto file = to_coordinate_file(layout);
        if (body.contains("filters")) file.mask = apply_filters(filters_of(body), dataset, state.get());
        file.header["snapshot"] = snapshot_of(*state);
        if (body.value("format", "binary") == "json") {
            json out{{"header", file.header}, {"coords", file.coords}};
            if (file.mask) out["mask"] = *file.mask;
            reply(res, 200, std::move(out), *state);
        } else {
            reply_binary(res, encode_coordinates(file), *state);
        }
    }));

    server.Post("/filters/summary", guard([this](const httplib::Request& req, httplib::Response& res) {
        auto state = labels.snapshot();
        const auto body = parse_body(req);
        const auto filters = filters_of(body);
        const auto bins = bins_of(body);
        std::vector<std::string> attributes;
        if (body.contains("attributes")) {
            attributes = string_list(body["attributes"], "/attributes");
        } else {
            for (const auto& s : filters.specs()) attributes.push_back(s.attribute);
        }
        const auto passes = evaluate_specs(filters, dataset, state.get());
        const auto mask = combine_passes(passes, dataset.size());
        const auto included = static_cast<std::size_t>(std::count(mask.begin(), mask.end(), 1));
        json summaries = json::array();
        for (const auto& a : attributes) {
            summaries.push_back(to_json(filter_summary(filters, passes, dataset, state.get(), a, bins_for(bins, a))));
        }
        reply(res, 200,
              json{{"total", dataset.size()},
                   {"included", included},
                   {"filters", to_json(filters)["filters"]},
                   {"summaries", std::move(summaries)}},
              *state);
    }));

    server.Post("/selection/stats", guard([this](const httplib::Request& req, httplib::Response& res) {
        auto state = labels.snapshot();
        const auto body = parse_body(req);
        Selection current{{}, dataset.fingerprint()};
        if (body.contains("current")) {
            auto ids = string_list(body["current"], "/current");
            current.ids.insert(ids.begin(), ids.end());
        }
        std::vector<std::string> ids;
        if (body.contains("ids")) ids = string_list(body["ids"], "/ids");
        if (body.contains("geometry")) {
            const auto geometry = geometry_from_json(body["geometry"]);
            if (!body.contains("source") || !body["source"].is_object()) {
                throw Error(ErrorCode::validation, "invalid selection request",
                            {"/source: a geometry needs {\"projection\": job} or {\"layout\": {...}}"});
            }
            const auto& source = body["source"];
            std::vector<float> coords;
            if (source.contains("projection")) {
                coords = stored_projection(source["projection"].get<std::string>()).coords;
            } else if (source.contains("layout")) {
                coords = to_coordinate_file(layout_for(source["layout"], *state)).coords;
            } else {
                throw Error(ErrorCode::validation, "invalid selection request", {"/source: expected projection or layout"});
            }
            if (coords.size() != 2 * dataset.size()) {
                throw Error(ErrorCode::conflict, "source coordinates do not match the dataset");
            }
            std::vector<std::uint8_t> visible;
            if (body.contains("filters")) visible = apply_filters(filters_of(body), dataset, state.get());
            const auto rows = hit_test(geometry, coords, visible);
            auto hit = ids_of(dataset, rows);
            ids.insert(ids.end(), hit.begin(), hit.end());
        }
        for (const auto& id : ids) {
            if (!dataset.row_of(id)) throw Error(ErrorCode::not_found, "unknown particle id '" + id + "'");
        }
        const auto mode = parse_selection_mode(body.value("mode", "replace"));
        const auto selection = update_selection(current, ids, mode);
        const auto stats = selection_stats(selection, dataset, state.get(), bins_of(body));
        reply(res, 200, json{{"selection", to_json(selection)}, {"stats", to_json(stats)}}, *state);
    }));

    server.Get(R"(/thumb/([^/]+))", guard([this](const httplib::Request& req, httplib::Response& res) {
        const std::string id = req.matches[1];
        const auto mode = req.has_param("mode") ? req.get_param_value("mode") : "original";
        if (mode != "original" && mode != "transparent") {
            throw Error(ErrorCode::validation, "invalid thumbnail mode", {"mode: expected original or transparent"});
        }
        const auto& entry = images.at(id);
        const auto& bytes = mode == "transparent" ? entry.transparent : entry.thumbnail;
        const std::string etag =
            "\"" + content_hash(std::string_view(reinterpret_cast<const char*>(bytes.data()), bytes.size())) + "\"";
        res.set_header("ETag", etag);
        res.set_header("Cache-Control", "public, max-age=31536000, immutable");
        if (req.get_header_value("If-None-Match") == etag) {
            res.status = 304;
            return;
        }
        res.status = 200;
        res.set_content(std::string(bytes.begin(), bytes.end()), "image/png");
    }));

    projection_routes();
    label_routes();
}

void Service::Impl::projection_routes() {
    server.Post("/projection", guard([this](const httplib::Request& req, httplib::Response& res) {
        auto state = labels.snapshot();
        const auto body = parse_body(req);
        std::vector<std::string> problems;
        std::vector<std::string> attributes;
        if (!body.contains("attributes")) {
            problems.emplace_back("/attributes: required");
        } else {
            attributes = string_list(body["attributes"], "/attributes");
            for (std::size_t i = 0; i < attributes.size(); ++i) {
                if (!dataset.schema().find(attributes[i])) {
                    problems.push_back("/attributes/" + std::to_string(i) + ": unknown attribute '" + attributes[i] + "'");
                }
            }
        }
        std::optional<AlphabetSlice> slice;
        if (body.contains("alphabet") && !body["alphabet"].is_null()) {
            const auto& ref = body["alphabet"];
            const auto text = ref.is_string() ? ref.get<std::string>() : ref.dump();
            const LabelAlphabet* a = nullptr;
            if (auto id = parse_uint(text)) a = state->find_alphabet(*id);
            if (!a) a = state->find_alphabet(text);
            if (!a) {
                problems.push_back("/alphabet: unknown alphabet '" + text + "'");
            } else {
                slice = AlphabetSlice{*a, state->assignments_of(a->id)};
            }
        }
        if (attributes.empty() || (attributes.size() < 2 && !slice && problems.empty())) {
            problems.emplace_back("/attributes: select at least 2 attributes, or 1 attribute with an alphabet");
        }
        ProjectionConfig config;
        try {
            config = projection_config_from_json(body.contains("config") ? body["config"] : json());
            for (auto& p : config.problems(dataset.size())) problems.push_back("/config/" + p);
        } catch (const Error& e) {
            for (const auto& d : e.details()) problems.push_back("/config/" + d);
        }
        std::optional<std::vector<double>> initial;
        std::string initial_job;
        if (body.contains("initial_job") && !body["initial_job"].is_null()) {
            initial_job = body["initial_job"].get<std::string>();
            const auto prev = stored_projection(initial_job);
            if (prev.rows() == dataset.size()) initial.emplace(prev.coords.begin(), prev.coords.end());
        }
        if (!problems.empty()) throw Error(ErrorCode::validation, "invalid projection request", std::move(problems));

        json request{{"attributes", attributes},
                     {"alphabet", slice ? json(slice->alphabet.name) : json(nullptr)},
                     {"config", to_json(config)},
                     {"initial_job", initial_job.empty() ? json(nullptr) : json(initial_job)},
                     {"label_seq", slice ? state->seq : 0}};
        const std::string key = request.dump();
        const json snapshot = snapshot_of(*state);
        auto task = [this, attributes, slice, config, initial, snapshot](const std::string& job,
                                                                          const JobManager::Progress& progress) {
            OptimizeOptions options;
            options.initial = initial;
            options.on_epoch = [&](std::size_t done, std::size_t total) {
                return progress(static_cast<double>(done) / static_cast<double>(total));
            };
            auto result = project(dataset, attributes, slice, config, options);
            result.computed_at = now_iso8601();
            auto file = to_coordinate_file(result);
            file.header["job"] = job;
            file.header["snapshot"] = snapshot;
            const auto path = projections_dir / (job + ".bin");
            write_coordinates(file, path);
            return path;
        };
        const auto [id, created] = jobs.submit(key, request, task);
        const auto view = jobs.status(id);
        reply(res, created ? 202 : 200, job_json(*view), *state);
    }));

    server.Get(R"(/projection/([^/]+))", guard([this](const httplib::Request& req, httplib::Response& res) {
        auto state = labels.snapshot();
        const std::string job = req.matches[1];
        const bool binary = req.has_param("format") && req.get_param_value("format") == "binary";
        auto view = jobs.status(job);
        if (!binary) {
            if (view) {
                reply(res, 200, job_json(*view), *state);
                return;
            }
            const auto file = stored_projection(job);
            JobView v;
            v.id = job;
            v.state = JobState::done;
            v.progress = 1.0;
            v.request = file.header;
            reply(res, 200, job_json(v), *state);
            return;
        }
        auto file = stored_projection(job);
        if (req.has_param("filters")) {
            json filters;
            try {
                filters = json::parse(req.get_param_value("filters"));
            } catch (const json::parse_error& e) {
                throw Error(ErrorCode::parse, "filters parameter is not valid JSON", {e.what()});
            }
            file.mask = apply_filters(filter_state_from_json(filters), dataset, state.get());
        }
        reply_binary(res, encode_coordinates(file), *state);
    }));

    server.Delete(R"(/projection/([^/]+))", guard([this](const httplib::Request& req, httplib::Response& res) {
        auto state = labels.snapshot();
        const std::string job = req.matches[1];
        const auto before = jobs.status(job);
        if (!before) throw Error(ErrorCode::not_found, "unknown projection job '" + job + "'");
        if (before->state == JobState::done || before->state == JobState::failed) {
            throw Error(ErrorCode::conflict, "job " + job + " already finished");
        }
        const auto view = jobs.cancel(job);
        reply(res, 200, job_json(*view), *state);
    }));
}

void Service::Impl::label_routes() {
    server.Get("/alphabets", guard([this](const httplib::Request&, httplib::Response& res) {
        auto state = labels.snapshot();
        json list = json::array();
        for (const auto& [id, a] : state->alphabets) {
            auto j = to_json(a);
            const auto& map = state->assignments_of(id);
            json counts = json::object();
            for (const auto& l : a.labels) counts[std::to_string(l.id)] = 0;
            for (const auto& [particle, label] : map) counts[std::to_string(label)] = counts[std::to_string(label)].get<std::size_t>() + 1;
            j["counts"] = std::move(counts);
            j["unlabeled"] = dataset.size() - map.size();
            list.push_back(std::move(j));
        }
        reply(res, 200, json{{"alphabets", std::move(list)}}, *state);
    }));

    server.Post("/alphabets", guard([this](const httplib::Request& req, httplib::Response& res) {
        const auto body = parse_body(req);
        AlphabetDefinition def;
        std::vector<std::string> problems;
        if (body.contains("id") && !body["id"].is_null()) {
            if (!body["id"].is_number_unsigned()) {
                problems.emplace_back("/id: expected unsigned integer");
            } else {
                def.id = body["id"].get<AlphabetId>();
            }
        }
        if (!body.contains("name") || !body["name"].is_string()) {
            problems.emplace_back("/name: expected string");
        } else {
            def.name = body["name"].get<std::string>();
        }
        if (!body.contains("labels") || !body["labels"].is_array()) {
            problems.emplace_back("/labels: expected array");
        } else {
            const auto& ls = body["labels"];
            for (std::size_t i = 0; i < ls.size(); ++i) {
                const auto& l = ls[i];
                const std::string p = "/labels/" + std::to_string(i);
                if (!l.is_object() || !l.contains("name") || !l["name"].is_string() || !l.contains("color") ||
                    !l["color"].is_string()) {
                    problems.push_back(p + ": expected {name, color}");
                    continue;
                }
                AlphabetDefinition::LabelDef d;
                d.name = l["name"].get<std::string>();
                d.color = l["color"].get<std::string>();
                if (l.contains("id") && !l["id"].is_null()) d.id = l["id"].get<LabelId>();
                if (l.contains("description") && l["description"].is_string()) d.description = l["description"].get<std::string>();
                def.labels.push_back(std::move(d));
            }
        }
        if (!problems.empty()) throw Error(ErrorCode::validation, "invalid alphabet", std::move(problems));
        const bool create = !def.id;
        const auto alphabet = labels.upsert_alphabet(def, request_who(body), body.value("force", false));
        auto state = labels.snapshot();
        reply(res, create ? 201 : 200, json{{"alphabet", to_json(alphabet)}}, *state);
    }));

    auto assignment = [this](bool assign) {
        return guard([this, assign](const httplib::Request& req, httplib::Response& res) {
            const auto body = parse_body(req);
            const auto before = labels.snapshot();
            const auto& alphabet = resolve_alphabet(*before, req.matches[1].str());
            if (!body.contains("ids")) throw Error(ErrorCode::validation, "invalid request", {"/ids: required"});
            const auto ids = string_list(body["ids"], "/ids");
            std::size_t changed = 0;
            if (assign) {
                if (!body.contains("label")) throw Error(ErrorCode::validation, "invalid request", {"/label: required"});
                const auto label = resolve_label(alphabet, body["label"]);
                changed = label ? labels.assign(ids, alphabet.id, *label, request_who(body))
                                : labels.unassign(ids, alphabet.id, request_who(body));
            } else {
                changed = labels.unassign(ids, alphabet.id, request_who(body));
            }
            auto state = labels.snapshot();
            reply(res, 200, json{{"alphabet", alphabet.id}, {"changed", changed}}, *state);
        });
    };
    server.Post(R"(/alphabets/([^/]+)/assign)", assignment(true));
    server.Post(R"(/alphabets/([^/]+)/unassign)", assignment(false));

    server.Get(R"(/labels/([^/]+)/([^/]+)/particles)", guard([this](const httplib::Request& req, httplib::Response& res) {
        auto state = labels.snapshot();
        const auto& alphabet = resolve_alphabet(*state, req.matches[1].str());
        const auto label = resolve_label(alphabet, json(req.matches[2].str()));
        const auto& map = state->assignments_of(alphabet.id);
        std::vector<std::string> ids;
        for (const auto& p : dataset.particles()) {
            auto it = map.find(p.id);
            if (label ? (it != map.end() && it->second == *label) : it == map.end()) ids.push_back(p.id);
        }
        reply(res, 200,
              json{{"alphabet", alphabet.id},
                   {"label", label ? json(*label) : json(kUnlabeled)},
                   {"count", ids.size()},
                   {"ids", std::move(ids)}},
              *state);
    }));

    server.Get("/snapshot", guard([this](const httplib::Request& req, httplib::Response& res) {
        if (req.has_param("format") && req.get_param_value("format") == "csv") {
            res.status = 200;
            res.set_content(labels.export_assignments_csv(), "text/csv");
            return;
        }
        res.status = 200;
        res.set_header("X-Daedalus-Snapshot", dataset.fingerprint() + "@" + std::to_string(labels.log_position()));
        res.set_content(labels.export_snapshot().dump(), "application/json");
    }));

    server.Post("/snapshot", guard([this](const httplib::Request& req, httplib::Response& res) {
        const auto body = parse_body(req);
        const auto policy = parse_merge_policy(req.has_param("policy") ? req.get_param_value("policy") : "reject");
        const auto outcome = labels.import_snapshot(body, policy, req.has_param("who") ? req.get_param_value("who") : "import");
        auto state = labels.snapshot();
        reply(res, 200,
              json{{"alphabets", outcome.alphabets}, {"assignments", outcome.assignments}, {"conflicts", outcome.conflicts}},
              *state);
    }));
}

Service::Service(ServiceConfig config, Dataset dataset, ImageStore images)
    : impl_(std::make_unique<Impl>(std::move(config), std::move(dataset), std::move(images))) {}

Service::~Service() { stop(); }

std::unique_ptr<Service> Service::open(ServiceConfig config) {
    const auto manifest = manifest_path(config.data_dir);
    auto dataset = load_dataset(manifest);
    ImageStore images;
    if (fs::exists(config.data_dir / "thumbs" / "index.json")) {
        images = ImageStore::load(dataset, config.data_dir);
    } else {
        images = load_images(dataset, read_manifest(manifest).image_dir);
        images.save(dataset, config.data_dir);
    }
    return std::make_unique<Service>(std::move(config), std::move(dataset), std::move(images));
}

int Service::bind() {
    auto& i = *impl_;
    if (i.config.port == 0) {
        i.port = i.server.bind_to_any_port(i.config.host);
        if (i.port < 0) throw Error(ErrorCode::io, "cannot bind " + i.config.host);
    } else {
        if (!i.server.bind_to_port(i.config.host, i.config.port)) {
            throw Error(ErrorCode::io, "cannot bind " + i.config.host + ":" + std::to_string(i.config.port));
        }
        i.port = i.config.port;
    }
    return i.port;
}

void Service::listen() { impl_->server.listen_after_bind(); }

int Service::start() {
    const int port = bind();
    impl_->thread = std::thread([this] { listen(); });
    impl_->server.wait_until_ready();
    return port;
}

void Service::stop() {
    if (!impl_) return;
    impl_->server.stop();
    if (impl_->thread.joinable()) impl_->thread.join();
}

const Dataset& Service::dataset() const { return impl_->dataset; }
LabelStore& Service::labels() { return impl_->labels; }
JobManager& Service::jobs() { return impl_->jobs; }

}  // namespace daedalus
