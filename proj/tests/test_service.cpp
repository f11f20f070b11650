#include <gtest/gtest.h>

#include <chrono>

#include "httplib.h"

#include "daedalus/coordinates.hpp"
#include "daedalus/filter.hpp"
#include "daedalus/service.hpp"
#include "daedalus/synth.hpp"
#include "support.hpp"

using namespace daedalus;
using daedalus::testing::TempDir;
using nlohmann::json;
using namespace std::chrono_literals;

namespace {

const SynthResult& corpus() {
    static const SynthResult r = [] {
        SynthConfig c;
        c.particle_count = 300;
        c.lot_count = 5;
        c.supplier_count = 3;
        c.image_size_range = {10, 48};
        return generate_synthetic(c);
    }();
    return r;
}

class ServiceTest : public ::testing::Test {
protected:
    void SetUp() override { open(); }

    void open() {
        client_.reset();
        service_.reset();
        ServiceConfig config;
        config.data_dir = dir_.path();
        config.port = 0;
        config.label_snapshot_every = 4;
        service_ = std::make_unique<Service>(config, corpus().dataset, corpus().images);
        port_ = service_->start();
        client_ = std::make_unique<httplib::Client>("127.0.0.1", port_);
        client_->set_read_timeout(60, 0);
    }

    httplib::Result post(const std::string& path, const json& body) {
        return client_->Post(path, body.dump(), "application/json");
    }

    static json body_of(const httplib::Result& r) { return json::parse(r->body); }

    std::string supplier(std::size_t i) const { return corpus().dataset.schema().at("Supplier").categories->at(i); }

    json create_alphabet(const std::string& name = "Morphology") {
        auto r = post("/alphabets", {{"name", name},
                                     {"who", "tester"},
                                     {"labels", {{{"name", "round"}, {"color", "#ff0000"}},
                                                 {{"name", "angular"}, {"color", "#00ff00"}}}}});
        EXPECT_EQ(r->status, 201) << r->body;
        return body_of(r)["alphabet"];
    }

    JobView wait_job(const std::string& id) {
        auto v = service_->jobs().wait(id, 120s);
        EXPECT_TRUE(v);
        return *v;
    }

    TempDir dir_;
    std::unique_ptr<Service> service_;
    std::unique_ptr<httplib::Client> client_;
    int port_ = 0;
};

const std::vector<std::string> kShapeAttrs{"Elongation", "Circularity", "Convexity", "Area"};

}  // namespace

TEST_F(ServiceTest, DatasetCarriesSnapshot) {
    auto r = client_->Get("/dataset");
    ASSERT_TRUE(r);
    EXPECT_EQ(r->status, 200);
    const auto body = body_of(r);
    EXPECT_EQ(body["size"], 300);
    EXPECT_EQ(body["particles"].size(), 300u);
    EXPECT_EQ(body["provenance"], "synthetic");
    EXPECT_EQ(body["snapshot"]["dataset"], corpus().dataset.fingerprint());
    EXPECT_EQ(body["snapshot"]["labels"], 0);
    EXPECT_EQ(r->get_header_value("X-Daedalus-Snapshot"), corpus().dataset.fingerprint() + "@0");
}

TEST_F(ServiceTest, AttributesIncludeAlphabets) {
    auto body = body_of(client_->Get("/attributes"));
    EXPECT_EQ(body["elongation"], "Elongation");
    EXPECT_EQ(body["attributes"].size(), 12u);
    create_alphabet();
    body = body_of(client_->Get("/attributes"));
    ASSERT_EQ(body["attributes"].size(), 13u);
    const auto& last = body["attributes"].back();
    EXPECT_EQ(last["name"], "Morphology");
    EXPECT_EQ(last["augmented"], true);
    EXPECT_EQ(last["categories"], json({"round", "angular", "UNLABELED"}));
    EXPECT_EQ(body["snapshot"]["labels"], 1);
}

TEST_F(ServiceTest, LayoutBinaryAndJson) {
    auto r = post("/layout", {{"attribute", "Supplier"}});
    ASSERT_EQ(r->status, 200) << r->body;
    EXPECT_EQ(r->get_header_value("Content-Type"), "application/octet-stream");
    const auto file = decode_coordinates(r->body);
    EXPECT_EQ(file.rows(), 300u);
    EXPECT_FALSE(file.mask);
    EXPECT_EQ(file.header["snapshot"]["dataset"], corpus().dataset.fingerprint());

    const json filters = {{{"attribute", "Supplier"}, {"include", json::array({supplier(0)})}}};
    r = post("/layout", {{"attribute", "Lot Number"}, {"filters", filters}, {"format", "json"}});
    ASSERT_EQ(r->status, 200) << r->body;
    const auto body = body_of(r);
    EXPECT_EQ(body["coords"].size(), 600u);
    const auto expected = apply_filters(filter_state_from_json(filters), corpus().dataset, nullptr);
    EXPECT_EQ(body["mask"].get<std::vector<std::uint8_t>>(), expected);

    EXPECT_EQ(post("/layout", {{"attribute", "Nope"}})->status, 404);
    EXPECT_EQ(post("/layout", json::object())->status, 422);
    EXPECT_EQ(client_->Post("/layout", "{oops", "application/json")->status, 400);
}

TEST_F(ServiceTest, FilterSummaryMatchesBruteForce) {
    const json filters = {{{"attribute", "Supplier"}, {"include", {supplier(0), supplier(1)}}},
                          {{"attribute", "Area"}, {"interval", {0, 400}}}};
    auto r = post("/filters/summary", {{"filters", filters}, {"attributes", {"Supplier", "Lot Number"}}});
    ASSERT_EQ(r->status, 200) << r->body;
    const auto body = body_of(r);
    const auto& d = corpus().dataset;
    std::size_t included = 0, supplier_ok = 0;
    for (const auto& p : d.particles()) {
        const auto& s = std::get<std::string>(p.values.at("Supplier"));
        const double area = std::get<double>(p.values.at("Area"));
        const bool a = s == supplier(0) || s == supplier(1), b = area >= 0 && area <= 400;
        supplier_ok += a;
        included += a && b;
    }
    EXPECT_EQ(body["total"], 300);
    EXPECT_EQ(body["included"], included);
    ASSERT_EQ(body["summaries"].size(), 2u);
    std::size_t total = 0, inc = 0, self = 0;
    for (const auto& bin : body["summaries"][0]["bins"]) {
        total += bin["total"].get<std::size_t>();
        inc += bin["included"].get<std::size_t>();
        self += bin["excluded_by_self"].get<std::size_t>();
    }
    EXPECT_EQ(total, 300u);
    EXPECT_EQ(inc, included);
    EXPECT_EQ(self, 300 - supplier_ok);

    r = post("/filters/summary", {{"filters", {{{"attribute", 3}}}}});
    EXPECT_EQ(r->status, 422);
    EXPECT_EQ(body_of(r)["code"], "validation_error");
    EXPECT_EQ(body_of(r)["details"][0], "/filters/0/attribute: expected string");
}

TEST_F(ServiceTest, SelectionStatsFromIdsAndGeometry) {
    const auto& d = corpus().dataset;
    json ids = {d.particle(0).id, d.particle(1).id, d.particle(2).id, d.particle(3).id};
    auto r = post("/selection/stats", {{"ids", ids}});
    ASSERT_EQ(r->status, 200) << r->body;
    auto body = body_of(r);
    EXPECT_EQ(body["stats"]["size"], 4);
    EXPECT_EQ(body["selection"]["ids"].size(), 4u);

    r = post("/selection/stats", {{"ids", json::array({d.particle(0).id})}, {"current", ids}, {"mode", "remove"}});
    EXPECT_EQ(body_of(r)["stats"]["size"], 3);

    const json everything = {{"kind", "rectangle"}, {"rect", {-1e9, -1e9, 1e9, 1e9}}};
    r = post("/selection/stats", {{"geometry", everything}, {"source", {{"layout", {{"attribute", "Supplier"}}}}}});
    ASSERT_EQ(r->status, 200) << r->body;
    EXPECT_EQ(body_of(r)["stats"]["size"], 300);

    const json filters = {{{"attribute", "Supplier"}, {"include", json::array({supplier(2)})}}};
    r = post("/selection/stats", {{"geometry", everything},
                                  {"source", {{"layout", {{"attribute", "Supplier"}}}}},
                                  {"filters", filters}});
    const auto mask = apply_filters(filter_state_from_json(filters), d, nullptr);
    EXPECT_EQ(body_of(r)["stats"]["size"], std::count(mask.begin(), mask.end(), 1));

    EXPECT_EQ(post("/selection/stats", {{"ids", json::array({"missing"})}})->status, 404);
    EXPECT_EQ(post("/selection/stats", {{"geometry", everything}})->status, 422);
    EXPECT_EQ(post("/selection/stats", {{"geometry", {{"kind", "circle"}}}})->status, 422);
    EXPECT_EQ(post("/selection/stats", {{"ids", ids}, {"mode", "xor"}})->status, 422);
}

TEST_F(ServiceTest, ThumbnailsAreCacheable) {
    const auto id = corpus().dataset.particle(7).id;
    auto r = client_->Get("/thumb/" + id);
    ASSERT_EQ(r->status, 200);
    EXPECT_EQ(r->get_header_value("Content-Type"), "image/png");
    const auto& entry = corpus().images.at(id);
    EXPECT_EQ(r->body, std::string(entry.thumbnail.begin(), entry.thumbnail.end()));
    const auto etag = r->get_header_value("ETag");
    ASSERT_FALSE(etag.empty());

    auto again = client_->Get("/thumb/" + id, httplib::Headers{{"If-None-Match", etag}});
    EXPECT_EQ(again->status, 304);
    EXPECT_TRUE(again->body.empty());

    auto t = client_->Get("/thumb/" + id + "?mode=transparent");
    ASSERT_EQ(t->status, 200);
    EXPECT_EQ(t->body, std::string(entry.transparent.begin(), entry.transparent.end()));
    EXPECT_NE(t->get_header_value("ETag"), etag);

    EXPECT_EQ(client_->Get("/thumb/none")->status, 404);
    EXPECT_EQ(client_->Get("/thumb/" + id + "?mode=sepia")->status, 422);
}

TEST_F(ServiceTest, AlphabetLifecycle) {
    const auto alphabet = create_alphabet();
    const auto id = alphabet["id"].get<AlphabetId>();
    const auto& d = corpus().dataset;

    auto dup = post("/alphabets", {{"name", "Morphology"}, {"labels", {{{"name", "x"}, {"color", "#010101"}}}}});
    EXPECT_EQ(dup->status, 409);
    EXPECT_EQ(body_of(dup)["code"], "conflict");
    EXPECT_EQ(post("/alphabets", {{"name", "Supplier"}, {"labels", {{{"name", "x"}, {"color", "#010101"}}}}})->status,
              422);
    EXPECT_EQ(post("/alphabets", {{"name", "Bad"}, {"labels", {{{"name", "x"}}}}})->status, 422);

    json first{d.particle(0).id, d.particle(1).id, d.particle(2).id};
    auto r = post("/alphabets/Morphology/assign", {{"ids", first}, {"label", "round"}});
    ASSERT_EQ(r->status, 200) << r->body;
    EXPECT_EQ(body_of(r)["changed"], 3);
    EXPECT_EQ(body_of(r)["snapshot"]["labels"], 2);
    r = post("/alphabets/" + std::to_string(id) + "/assign",
             {{"ids", {d.particle(2).id, d.particle(3).id}}, {"label", alphabet["labels"][1]["id"]}});
    EXPECT_EQ(body_of(r)["changed"], 2);
    EXPECT_EQ(r->get_header_value("X-Daedalus-Snapshot"), d.fingerprint() + "@3");

    auto list = body_of(client_->Get("/alphabets"))["alphabets"];
    ASSERT_EQ(list.size(), 1u);
    EXPECT_EQ(list[0]["counts"][std::to_string(alphabet["labels"][0]["id"].get<LabelId>())], 2);
    EXPECT_EQ(list[0]["counts"][std::to_string(alphabet["labels"][1]["id"].get<LabelId>())], 2);
    EXPECT_EQ(list[0]["unlabeled"], 296);

    auto particles = body_of(client_->Get("/labels/Morphology/round/particles"));
    EXPECT_EQ(particles["ids"], json({d.particle(0).id, d.particle(1).id}));
    particles = body_of(client_->Get("/labels/Morphology/UNLABELED/particles"));
    EXPECT_EQ(particles["count"], 296);

    r = post("/alphabets/Morphology/assign", {{"ids", json::array({d.particle(0).id})}, {"label", "UNLABELED"}});
    EXPECT_EQ(body_of(r)["changed"], 1);
    r = post("/alphabets/Morphology/unassign", {{"ids", first}});
    EXPECT_EQ(body_of(r)["changed"], 2);

    EXPECT_EQ(post("/alphabets/Nope/assign", {{"ids", first}, {"label", "round"}})->status, 404);
    EXPECT_EQ(post("/alphabets/Morphology/assign", {{"ids", first}, {"label", "oval"}})->status, 404);
    EXPECT_EQ(post("/alphabets/Morphology/assign", {{"ids", json::array({"ghost"})}, {"label", "round"}})->status, 404);
    EXPECT_EQ(post("/alphabets/Morphology/assign", {{"label", "round"}})->status, 422);

    // Removing a label that still has assignments needs force.
    json edit{{"id", id}, {"name", "Morphology"}, {"labels", {{{"id", alphabet["labels"][0]["id"]}, {"name", "round"},
                                                                {"color", "#ff0000"}}}}};
    EXPECT_EQ(post("/alphabets", edit)->status, 409);
    edit["force"] = true;
    EXPECT_EQ(post("/alphabets", edit)->status, 200);

    // Labels persist across a restart.
    const auto before = body_of(client_->Get("/alphabets"));
    open();
    EXPECT_EQ(body_of(client_->Get("/alphabets")), before);
}

TEST_F(ServiceTest, SnapshotExportImport) {
    create_alphabet();
    const auto& d = corpus().dataset;
    post("/alphabets/Morphology/assign", {{"ids", {d.particle(5).id, d.particle(6).id}}, {"label", "angular"}});
    auto r = client_->Get("/snapshot");
    ASSERT_EQ(r->status, 200);
    const auto exported = r->body;
    EXPECT_EQ(client_->Get("/snapshot?format=csv")->body,
              "particle_id,alphabet,label\n" + d.particle(5).id + ",Morphology,angular\n" + d.particle(6).id +
                  ",Morphology,angular\n");

    // Into a fresh store the document is adopted byte for byte.
    TempDir other_dir;
    ServiceConfig config;
    config.data_dir = other_dir.path();
    config.port = 0;
    Service other(config, corpus().dataset, corpus().images);
    httplib::Client oc("127.0.0.1", other.start());
    auto imported = oc.Post("/snapshot", exported, "application/json");
    ASSERT_EQ(imported->status, 200) << imported->body;
    EXPECT_EQ(oc.Get("/snapshot")->body, exported);

    // Diverge, then merge back under each policy.
    oc.Post("/alphabets/Morphology/assign", json{{"ids", json::array({d.particle(5).id})}, {"label", "round"}}.dump(),
            "application/json");
    const auto theirs = oc.Get("/snapshot")->body;
    auto rejected = client_->Post("/snapshot?policy=reject", theirs, "application/json");
    EXPECT_EQ(rejected->status, 409);
    EXPECT_EQ(body_of(rejected)["details"].size(), 1u);
    auto taken = client_->Post("/snapshot?policy=theirs", theirs, "application/json");
    ASSERT_EQ(taken->status, 200) << taken->body;
    EXPECT_EQ(body_of(taken)["conflicts"].size(), 1u);
    EXPECT_EQ(body_of(client_->Get("/labels/Morphology/round/particles"))["ids"], json({d.particle(5).id}));

    EXPECT_EQ(client_->Post("/snapshot?policy=mine", theirs, "application/json")->status, 422);
    EXPECT_EQ(post("/snapshot", {{"alphabets", 1}})->status, 422);
    other.stop();
}

TEST_F(ServiceTest, ProjectionJobRoundTrip) {
    json request{{"attributes", kShapeAttrs}, {"config", {{"n_epochs", 40}, {"seed", 3}}}};
    auto r = post("/projection", request);
    ASSERT_EQ(r->status, 202) << r->body;
    const auto job = body_of(r)["job"].get<std::string>();
    EXPECT_EQ(job, "job-1");
    EXPECT_EQ(body_of(r)["request"]["config"]["n_epochs"], 40);
    EXPECT_EQ(wait_job(job).state, JobState::done);

    auto status = body_of(client_->Get("/projection/" + job));
    EXPECT_EQ(status["state"], "done");
    EXPECT_EQ(status["progress"], 1.0);
    EXPECT_EQ(status["result"]["rows"], 300);

    auto bin = client_->Get("/projection/" + job + "?format=binary");
    ASSERT_EQ(bin->status, 200);
    const auto file = decode_coordinates(bin->body);
    EXPECT_EQ(file.rows(), 300u);
    EXPECT_EQ(file.header["job"], job);
    EXPECT_TRUE(std::filesystem::exists(dir_ / "projections/job-1.bin"));

    const json filters = {{{"attribute", "Supplier"}, {"include", json::array({supplier(1)})}}};
    auto masked = client_->Get("/projection/" + job + "?format=binary&filters=" +
                               httplib::detail::encode_query_param(filters.dump()));
    ASSERT_EQ(masked->status, 200) << masked->body;
    EXPECT_EQ(*decode_coordinates(masked->body).mask,
              apply_filters(filter_state_from_json(filters), corpus().dataset, nullptr));
    EXPECT_EQ(client_->Get("/projection/" + job + "?format=binary&filters=%7B")->status, 400);

    // A lasso over the projection selects through the stored coordinates.
    const json all = {{"kind", "lasso"}, {"points", {{-1e6, -1e6}, {1e6, -1e6}, {1e6, 1e6}, {-1e6, 1e6}}}};
    r = post("/selection/stats", {{"geometry", all}, {"source", {{"projection", job}}}});
    ASSERT_EQ(r->status, 200) << r->body;
    EXPECT_EQ(body_of(r)["stats"]["size"], 300);

    // A warm start from the finished job.
    request["initial_job"] = job;
    r = post("/projection", request);
    ASSERT_EQ(r->status, 202) << r->body;
    EXPECT_EQ(wait_job(body_of(r)["job"]).state, JobState::done);

    // Results and the job counter survive a restart.
    open();
    EXPECT_EQ(client_->Get("/projection/job-1?format=binary")->body, bin->body);
    EXPECT_EQ(body_of(client_->Get("/projection/job-1"))["state"], "done");
    r = post("/projection", {{"attributes", kShapeAttrs}, {"config", {{"n_epochs", 5}}}});
    EXPECT_EQ(body_of(r)["job"], "job-3");
    wait_job("job-3");
}

TEST_F(ServiceTest, ProjectionValidation) {
    auto r = post("/projection", {{"attributes", {"Area", "Weight"}}, {"config", {{"n_neighbors", 500}}}});
    ASSERT_EQ(r->status, 422);
    const auto details = body_of(r)["details"];
    ASSERT_EQ(details.size(), 2u);
    EXPECT_EQ(details[0].get<std::string>().rfind("/attributes/1:", 0), 0u);
    EXPECT_EQ(details[1].get<std::string>().rfind("/config/n_neighbors:", 0), 0u);

    EXPECT_EQ(post("/projection", {{"attributes", {"Area"}}})->status, 422);
    EXPECT_EQ(post("/projection", json::object())->status, 422);
    EXPECT_EQ(post("/projection", {{"attributes", {"Area"}}, {"alphabet", "Missing"}})->status, 422);
    EXPECT_EQ(post("/projection", {{"attributes", kShapeAttrs}, {"config", {{"far_weight", 2}}}})->status, 422);
    EXPECT_EQ(client_->Get("/projection/job-9")->status, 404);
    EXPECT_EQ(client_->Get("/projection/job-9?format=binary")->status, 404);
    EXPECT_EQ(client_->Delete("/projection/job-9")->status, 404);
    EXPECT_EQ(post("/projection", {{"attributes", kShapeAttrs}, {"initial_job", "job-9"}})->status, 404);

    // One attribute is enough alongside an alphabet.
    create_alphabet();
    r = post("/projection", {{"attributes", {"Area"}}, {"alphabet", "Morphology"}, {"config", {{"n_epochs", 5}}}});
    ASSERT_EQ(r->status, 202) << r->body;
    EXPECT_EQ(body_of(r)["request"]["label_seq"], 1);
    wait_job(body_of(r)["job"]);
}

TEST_F(ServiceTest, DuplicateRequestsShareAJobAndCancel) {
    const json slow{{"attributes", kShapeAttrs}, {"config", {{"n_epochs", 200000}}}};
    auto first = post("/projection", slow);
    ASSERT_EQ(first->status, 202);
    auto second = post("/projection", slow);
    ASSERT_EQ(second->status, 200);
    const auto job = body_of(first)["job"].get<std::string>();
    EXPECT_EQ(body_of(second)["job"], job);

    // The binary result of an unfinished job is a conflict.
    EXPECT_EQ(client_->Get("/projection/" + job + "?format=binary")->status, 409);

    auto cancelled = client_->Delete("/projection/" + job);
    ASSERT_EQ(cancelled->status, 200);
    EXPECT_EQ(wait_job(job).state, JobState::cancelled);
    EXPECT_EQ(body_of(client_->Get("/projection/" + job))["state"], "cancelled");

    // Once cancelled, the same request starts a fresh job.
    auto third = post("/projection", slow);
    EXPECT_EQ(third->status, 202);
    EXPECT_NE(body_of(third)["job"], job);
    client_->Delete("/projection/" + body_of(third)["job"].get<std::string>());
    wait_job(body_of(third)["job"]);
}

TEST_F(ServiceTest, TwoJobsRunConcurrently) {
    const json a{{"attributes", kShapeAttrs}, {"config", {{"n_epochs", 200000}, {"seed", 1}}}};
    const json b{{"attributes", kShapeAttrs}, {"config", {{"n_epochs", 200000}, {"seed", 2}}}};
    const auto ja = body_of(post("/projection", a))["job"].get<std::string>();
    const auto jb = body_of(post("/projection", b))["job"].get<std::string>();
    EXPECT_NE(ja, jb);
    const auto deadline = std::chrono::steady_clock::now() + 60s;
    bool both = false;
    while (!both && std::chrono::steady_clock::now() < deadline) {
        both = service_->jobs().status(ja)->state == JobState::running &&
               service_->jobs().status(jb)->state == JobState::running;
        if (!both) std::this_thread::sleep_for(10ms);
    }
    EXPECT_TRUE(both);
    client_->Delete("/projection/" + ja);
    client_->Delete("/projection/" + jb);
    EXPECT_EQ(wait_job(ja).state, JobState::cancelled);
    EXPECT_EQ(wait_job(jb).state, JobState::cancelled);

    const json quick{{"attributes", kShapeAttrs}, {"config", {{"n_epochs", 10}}}};
    const auto jc = body_of(post("/projection", quick))["job"].get<std::string>();
    EXPECT_EQ(wait_job(jc).state, JobState::done);
    EXPECT_EQ(client_->Delete("/projection/" + jc)->status, 409);
}
