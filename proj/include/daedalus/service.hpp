#pragma once

#include <cstdint>
#include <filesystem>
#include <memory>
#include <string>

#include "json.hpp"

#include "daedalus/image_store.hpp"
#include "daedalus/jobs.hpp"
#include "daedalus/labelstore.hpp"
#include "daedalus/model.hpp"

namespace daedalus {

struct ServiceConfig {
    std::filesystem::path data_dir;
    std::string host = "127.0.0.1";
    int port = 8080;
    unsigned workers = 2;
    std::size_t label_snapshot_every = 100;

    /// DAEDALUS_PORT and DAEDALUS_DATA override the defaults.
    static ServiceConfig from_environment();
};

/// HTTP API over one immutable dataset, its thumbnails, the label store and
/// the projection job pool. Labels persist under <data_dir>/labels and
/// projection results under <data_dir>/projections.
class Service {
public:
    Service(ServiceConfig config, Dataset dataset, ImageStore images);
    ~Service();
    Service(const Service&) = delete;
    Service& operator=(const Service&) = delete;

    /// Loads <data_dir>/manifest.json plus the thumbnail cache (built from
    /// the images when absent).
    static std::unique_ptr<Service> open(ServiceConfig config);

    /// Binds host:port (port 0 picks a free one) and returns the bound port.
    int bind();
    /// Serves until stop(); call after bind().
    void listen();
    /// bind() + listen() on a background thread; returns the port.
    int start();
    void stop();

    const Dataset& dataset() const;
    LabelStore& labels();
    JobManager& jobs();

private:
    struct Impl;
    std::unique_ptr<Impl> impl_;
};

}  // namespace daedalus
