#include "cli.hpp"

#include <csignal>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <optional>
#include <ostream>
#include <sstream>

#include "CLI11.hpp"
#include "json.hpp"

#include "daedalus/coordinates.hpp"
#include "daedalus/dataset_io.hpp"
#include "daedalus/error.hpp"
#include "daedalus/filter.hpp"
#include "daedalus/image_store.hpp"
#include "daedalus/labelstore.hpp"
#include "daedalus/layout.hpp"
#include "daedalus/projection.hpp"
#include "daedalus/service.hpp"
#include "daedalus/synth.hpp"
#include "purity.hpp"

namespace daedalus {
namespace fs = std::filesystem;
using nlohmann::json;

namespace {

std::vector<std::string> split_list(const std::string& text) {
    std::vector<std::string> out;
    std::string item;
    std::istringstream in(text);
    while (std::getline(in, item, ',')) {
        if (!item.empty()) out.push_back(item);
    }
    return out;
}

std::unique_ptr<LabelStore> open_labels(const Dataset& dataset, const fs::path& data_dir,
                                        std::unique_ptr<LabelRepository>& repository) {
    std::vector<std::string> ids;
    for (const auto& p : dataset.particles()) ids.push_back(p.id);
    auto names = dataset.schema().names();
    auto store = std::make_unique<LabelStore>(std::move(ids), std::set<std::string, std::less<>>(names.begin(), names.end()));
    repository = std::make_unique<LabelRepository>(data_dir / "labels");
    repository->attach(*store);
    return store;
}

struct IngestArgs {
    std::string manifest;
    std::string out;
    int thumb_edge = kDefaultThumbEdge;
};

int do_ingest(const IngestArgs& a, std::ostream& out, std::ostream& err) {
    const auto manifest = read_manifest(a.manifest);
    auto dataset = load_dataset(a.manifest);
    auto images = load_images(dataset, manifest.image_dir, a.thumb_edge);
    const fs::path dir = a.out;
    write_dataset(dataset, dir);
    for (const auto& p : dataset.particles()) {
        const fs::path from = manifest.image_dir / p.image_ref, to = dir / "images" / p.image_ref;
        std::error_code ec;
        if (fs::equivalent(from, to, ec)) continue;
        fs::create_directories(to.parent_path());
        fs::copy_file(from, to, fs::copy_options::overwrite_existing, ec);
    }
    images.save(dataset, dir);
    for (const auto& w : images.warnings()) err << "warning: " << w << '\n';
    out << "ingested " << dataset.size() << " particles into " << dir.string() << " (fingerprint "
        << dataset.fingerprint() << ")\n";
    return 0;
}

struct SynthArgs {
    SynthConfig config;
    bool reference = false;
    std::string out;
};

int do_synth(SynthArgs a, const CLI::App& cmd, std::ostream& out) {
    if (a.reference) {
        auto ref = reference_synth_config();
        if (cmd.count("--seed")) ref.seed = a.config.seed;
        a.config = ref;
    }
    const auto result = generate_synthetic(a.config);
    write_synthetic(result, a.out);
    out << "wrote " << result.dataset.size() << " particles to " << a.out << '\n';
    return 0;
}

struct ProjectArgs {
    std::string data_dir;
    std::string attrs;
    std::string alphabet;
    std::string init;
    std::string out;
    ProjectionConfig config;
};

int do_project(const ProjectArgs& a, std::ostream& out, std::ostream& err) {
    const auto dataset = load_dataset(manifest_path(a.data_dir));
    const auto attributes = split_list(a.attrs);
    std::optional<AlphabetSlice> slice;
    if (!a.alphabet.empty()) {
        std::unique_ptr<LabelRepository> repo;
        auto store = open_labels(dataset, a.data_dir, repo);
        slice = store->slice(a.alphabet);
        if (!slice) throw Error(ErrorCode::validation, "unknown alphabet '" + a.alphabet + "'");
    }
    OptimizeOptions options;
    if (!a.init.empty()) {
        const auto prev = read_coordinates(a.init);
        if (prev.rows() != dataset.size()) {
            throw Error(ErrorCode::validation, "--init has " + std::to_string(prev.rows()) + " rows, dataset has " +
                                                   std::to_string(dataset.size()));
        }
        options.initial.emplace(prev.coords.begin(), prev.coords.end());
    }
    std::size_t last_decile = 0;
    options.on_epoch = [&](std::size_t done, std::size_t total) {
        const std::size_t decile = done * 10 / total;
        if (decile != last_decile) {
            last_decile = decile;
            err << "epoch " << done << "/" << total << '\n';
        }
        return true;
    };
    const auto result = project(dataset, attributes, slice, a.config, options);
    write_coordinates(to_coordinate_file(result), a.out);
    out << "wrote " << dataset.size() << " x 2 coordinates to " << a.out << '\n';
    return 0;
}

struct LayoutArgs {
    std::string data_dir;
    std::string attr;
    std::size_t bins = kDefaultTargetBins;
    std::string filters;
    std::string out;
    LayoutConfig config;
};

int do_layout(const LayoutArgs& a, std::ostream& out) {
    const auto dataset = load_dataset(manifest_path(a.data_dir));
    std::unique_ptr<LabelRepository> repo;
    auto store = open_labels(dataset, a.data_dir, repo);
    const auto state = store->snapshot();
    std::optional<BinSpec> bins;
    if (const auto* d = dataset.schema().find(a.attr); d && d->kind == AttributeKind::numeric) {
        bins = bin_numeric_attribute(numeric_column(dataset, a.attr), a.bins, a.attr);
    }
    const auto layout = attribute_layout(dataset, auto_partition(dataset, a.attr, bins, state.get()), a.config);
    auto file = to_coordinate_file(layout);
    if (!a.filters.empty()) {
        json doc;
        try {
            doc = json::parse(read_file(a.filters));
        } catch (const json::parse_error& e) {
            throw Error(ErrorCode::parse, a.filters + ": " + e.what());
        }
        file.mask = apply_filters(filter_state_from_json(doc), dataset, state.get());
    }
    write_coordinates(file, a.out);
    out << layout.columns.size() << " columns written to " << a.out << '\n';
    return 0;
}

struct LabelsArgs {
    std::string file;
    std::string data_dir;
    std::string policy = "reject";
    bool csv = false;
};

int do_labels_export(const LabelsArgs& a, std::ostream& out) {
    const auto dataset = load_dataset(manifest_path(a.data_dir));
    std::unique_ptr<LabelRepository> repo;
    auto store = open_labels(dataset, a.data_dir, repo);
    write_file(a.file, a.csv ? store->export_assignments_csv() : store->export_snapshot().dump(2) + "\n");
    out << "exported labels at log position " << store->log_position() << " to " << a.file << '\n';
    return 0;
}

int do_labels_import(const LabelsArgs& a, std::ostream& out) {
    const auto dataset = load_dataset(manifest_path(a.data_dir));
    json doc;
    try {
        doc = json::parse(read_file(a.file));
    } catch (const json::parse_error& e) {
        throw Error(ErrorCode::parse, a.file + ": " + e.what());
    }
    std::unique_ptr<LabelRepository> repo;
    auto store = open_labels(dataset, a.data_dir, repo);
    const auto outcome = store->import_snapshot(doc, parse_merge_policy(a.policy));
    out << "imported " << outcome.alphabets << " alphabets, " << outcome.assignments << " assignments";
    if (!outcome.conflicts.empty()) out << " (" << outcome.conflicts.size() << " conflicts resolved)";
    out << '\n';
    return 0;
}

std::atomic<Service*> g_serving{nullptr};

extern "C" void on_signal(int) {
    if (auto* s = g_serving.load()) s->stop();
}

int do_serve(const std::string& data_dir, ServiceConfig config, std::ostream& err) {
    if (!data_dir.empty()) config.data_dir = data_dir;
    if (config.data_dir.empty()) throw Error(ErrorCode::validation, "no data directory (argument or DAEDALUS_DATA)");
    auto service = Service::open(config);
    const int port = service->bind();
    err << "serving " << service->dataset().size() << " particles on http://" << config.host << ':' << port << '\n';
    g_serving = service.get();
    std::signal(SIGINT, on_signal);
    std::signal(SIGTERM, on_signal);
    service->listen();
    g_serving = nullptr;
    return 0;
}

struct PurityArgs {
    std::string result;
    std::string truth;
    std::size_t k = 10;
    bool json_output = false;
};

int do_eval_purity(const PurityArgs& a, std::ostream& out) {
    const auto file = read_coordinates(a.result);
    const auto truth = read_truth(a.truth);
    const double purity = knn_purity(file.coords, truth, a.k);
    if (a.json_output) {
        out << json{{"purity", purity}, {"k", a.k}, {"rows", truth.size()}}.dump() << '\n';
    } else {
        out << std::fixed << std::setprecision(6) << purity << '\n';
    }
    return 0;
}

void add_projection_flags(CLI::App& cmd, ProjectionConfig& c) {
    cmd.add_option("--seed", c.seed, "Random seed");
    cmd.add_option("--neighbors", c.n_neighbors, "Neighbourhood size");
    cmd.add_option("--min-dist", c.min_dist, "Minimum embedded distance");
    cmd.add_option("--spread", c.spread, "Embedding spread");
    cmd.add_option("--epochs", c.n_epochs, "Optimisation epochs");
    cmd.add_option("--negative-rate", c.negative_sample_rate, "Negative samples per positive sample");
    cmd.add_option("--learning-rate", c.learning_rate, "Initial learning rate");
    cmd.add_option("--far-weight", c.far_weight, "Edge scale between different labels, in [0, 1]");
}

}  // namespace

int run_cli(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
    CLI::App app{"Particle image exploration toolkit", "daedalus"};
    app.require_subcommand(1);

    IngestArgs ingest;
    auto* ingest_cmd = app.add_subcommand("ingest", "Load a manifest, validate it and build a data directory");
    ingest_cmd->add_option("manifest", ingest.manifest, "Manifest JSON")->required();
    ingest_cmd->add_option("-o,--out", ingest.out, "Output data directory")->required();
    ingest_cmd->add_option("--thumb-edge", ingest.thumb_edge, "Thumbnail edge in pixels");

    SynthArgs synth;
    auto* synth_cmd = app.add_subcommand("synth", "Generate a synthetic corpus with ground truth");
    synth_cmd->add_option("--n", synth.config.particle_count, "Particle count");
    synth_cmd->add_option("--classes", synth.config.class_count, "Latent classes");
    synth_cmd->add_option("--lots", synth.config.lot_count, "Lot count");
    synth_cmd->add_option("--suppliers", synth.config.supplier_count, "Supplier count");
    synth_cmd->add_option("--seed", synth.config.seed, "Random seed");
    synth_cmd->add_flag("--reference", synth.reference, "Reference-scale corpus (37,857 particles)");
    synth_cmd->add_option("-o,--out", synth.out, "Output directory")->required();

    ProjectArgs proj;
    auto* project_cmd = app.add_subcommand("project", "Compute a 2-D projection");
    project_cmd->add_option("data_dir", proj.data_dir, "Data directory")->required();
    project_cmd->add_option("--attrs", proj.attrs, "Comma-separated attributes")->required();
    project_cmd->add_option("--alphabet", proj.alphabet, "Label alphabet used as supervision");
    project_cmd->add_option("--init", proj.init, "Start from an earlier result file");
    project_cmd->add_option("-o,--out", proj.out, "Output coordinate file")->required();
    add_projection_flags(*project_cmd, proj.config);

    LayoutArgs lay;
    auto* layout_cmd = app.add_subcommand("layout", "Compute an attribute layout");
    layout_cmd->add_option("data_dir", lay.data_dir, "Data directory")->required();
    layout_cmd->add_option("--attr", lay.attr, "Attribute or alphabet name")->required();
    layout_cmd->add_option("--bins", lay.bins, "Target bin count for numeric attributes");
    layout_cmd->add_option("--sort-key", lay.config.sort_key, "Numeric attribute ordering each column");
    layout_cmd->add_option("--aspect", lay.config.aspect, "Column aspect ratio");
    layout_cmd->add_option("--filters", lay.filters, "Filter state JSON; adds a visibility mask");
    layout_cmd->add_option("-o,--out", lay.out, "Output coordinate file")->required();

    LabelsArgs labels;
    auto* labels_cmd = app.add_subcommand("labels", "Export or import label snapshots");
    labels_cmd->require_subcommand(1);
    auto* export_cmd = labels_cmd->add_subcommand("export", "Write the label snapshot");
    export_cmd->add_option("file", labels.file, "Output file")->required();
    export_cmd->add_option("--data-dir", labels.data_dir, "Data directory")->required();
    export_cmd->add_flag("--csv", labels.csv, "Assignments as CSV instead of a snapshot");
    auto* import_cmd = labels_cmd->add_subcommand("import", "Load a label snapshot");
    import_cmd->add_option("file", labels.file, "Snapshot file")->required();
    import_cmd->add_option("--data-dir", labels.data_dir, "Data directory")->required();
    import_cmd->add_option("--policy", labels.policy, "Merge policy: reject, theirs or ours")
        ->check(CLI::IsMember({"reject", "theirs", "ours"}));

    std::string serve_dir;
    ServiceConfig serve_config = ServiceConfig::from_environment();
    auto* serve_cmd = app.add_subcommand("serve", "Run the HTTP service");
    serve_cmd->add_option("data_dir", serve_dir, "Data directory (default $DAEDALUS_DATA)");
    serve_cmd->add_option("--port", serve_config.port, "Port, 0 for any (default $DAEDALUS_PORT or 8080)");
    serve_cmd->add_option("--host", serve_config.host, "Bind address");
    serve_cmd->add_option("--workers", serve_config.workers, "Projection worker threads");

    PurityArgs purity;
    auto* purity_cmd = app.add_subcommand("eval-purity", "Mean same-class k-NN purity of a projection");
    purity_cmd->add_option("result", purity.result, "Coordinate file")->required();
    purity_cmd->add_option("--truth", purity.truth, "truth.csv (id,class)")->required();
    purity_cmd->add_option("--k", purity.k, "Neighbours per point")->check(CLI::PositiveNumber);
    purity_cmd->add_flag("--json", purity.json_output, "Machine-readable output");

    std::vector<std::string> rest(args.size() > 1 ? args.begin() + 1 : args.end(), args.end());
    std::reverse(rest.begin(), rest.end());
    try {
        app.parse(rest);
    } catch (const CLI::CallForHelp&) {
        out << app.help();
        return 0;
    } catch (const CLI::CallForAllHelp&) {
        out << app.help("", CLI::AppFormatMode::All);
        return 0;
    } catch (const CLI::ParseError& e) {
        err << "error: " << e.what() << "\n\n" << app.help();
        return 2;
    }

    try {
        if (*ingest_cmd) return do_ingest(ingest, out, err);
        if (*synth_cmd) return do_synth(synth, *synth_cmd, out);
        if (*project_cmd) return do_project(proj, out, err);
        if (*layout_cmd) return do_layout(lay, out);
        if (*export_cmd) return do_labels_export(labels, out);
        if (*import_cmd) return do_labels_import(labels, out);
        if (*serve_cmd) return do_serve(serve_dir, serve_config, err);
        if (*purity_cmd) return do_eval_purity(purity, out);
    } catch (const Error& e) {
        err << "error (" << to_string(e.code()) << "): " << e.what() << '\n';
        for (const auto& d : e.details()) err << "  " << d << '\n';
        switch (e.code()) {
            case ErrorCode::validation:
            case ErrorCode::invalid_argument:
            case ErrorCode::parse:
            case ErrorCode::encoding: return 2;
            default: return 1;
        }
    } catch (const std::exception& e) {
        err << "error: " << e.what() << '\n';
        return 1;
    }
    return 1;
}

}  // namespace daedalus
