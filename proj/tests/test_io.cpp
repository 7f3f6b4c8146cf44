#include <doctest.h>

#include <cstdio>
#include <filesystem>
#include <string>

#include "imsrc/errors.hpp"
#include "imsrc/io.hpp"
#include "imsrc/rng.hpp"

using namespace imsrc;
namespace fs = std::filesystem;

namespace {

struct TempDir {
    fs::path path;
    TempDir() {
        path = fs::temp_directory_path() / ("imsrc_test_" + std::to_string(::getpid()));
        fs::create_directories(path);
    }
    ~TempDir() { fs::remove_all(path); }
    std::string file(const std::string& name) const { return (path / name).string(); }
};

Scenario sample_scenario() {
    Scenario s;
    s.room.dims = {5.0, 4.0, 3.0};
    s.room.absorption = {0.1, 0.2, 0.15, 0.05, 0.25, 0.12};
    s.src = {3.8, 1.2, 1.4};
    s.array = make_em32_array({1.5, 2.5, 1.5});
    s.rng_seed = 4242;
    return s;
}

} // namespace

TEST_SUITE("io") {

TEST_CASE("scenario JSON round trip") {
    TempDir tmp;
    const Scenario s = sample_scenario();
    save_scenario(tmp.file("scen.json"), s, {});
    const Scenario back = load_scenario(tmp.file("scen.json"));
    CHECK(back.room.dims.x == s.room.dims.x);
    CHECK(back.room.absorption == s.room.absorption);
    CHECK(back.src.z == s.src.z);
    CHECK(back.rng_seed == s.rng_seed);
    CHECK(back.c == s.c);
    REQUIRE(back.array.positions.size() == 32);
    for (std::size_t i = 0; i < 32; ++i)
        CHECK(distance(back.array.positions[i], s.array.positions[i]) < 1e-12);
}

TEST_CASE("ELRIR1 container round trips bit-exactly") {
    TempDir tmp;
    Rng rng(5);
    Mat data(6, 41);
    for (double& v : data.flat()) v = rng.uniform(-1, 1);
    save_rir(tmp.file("x.elrir"), data, 16000.0, 343.0);
    const RirData back = load_rir(tmp.file("x.elrir"));
    CHECK(back.f_s == 16000.0);
    CHECK(back.c == 343.0);
    REQUIRE(back.data.rows() == 6);
    REQUIRE(back.data.cols() == 41);
    for (std::size_t i = 0; i < data.size(); ++i) CHECK(back.data.flat()[i] == data.flat()[i]);

    CHECK_THROWS_AS(load_rir(tmp.file("missing.elrir")), IoError);
    write_text_file(tmp.file("junk.elrir"), "NOTRIR__");
    CHECK_THROWS_AS(load_rir(tmp.file("junk.elrir")), IoError);
}

TEST_CASE("source CSV round trip") {
    TempDir tmp;
    const ImageSourceSet set =
        enumerate_image_sources({{4.0, 3.0, 2.5}, {0.1, 0.1, 0.1, 0.1, 0.1, 0.1}},
                                {1.0, 1.5, 1.2}, 2);
    save_sources_csv(tmp.file("truth.csv"), set.sources, {});
    const std::vector<ImageSource> back = load_sources_csv(tmp.file("truth.csv"));
    REQUIRE(back.size() == set.sources.size());
    for (std::size_t i = 0; i < back.size(); ++i) {
        CHECK(back[i].q == set.sources[i].q);
        CHECK(back[i].eps == set.sources[i].eps);
        CHECK(back[i].order == set.sources[i].order);
        CHECK(back[i].position.x == set.sources[i].position.x);
        CHECK(back[i].amplitude == set.sources[i].amplitude);
    }
}

TEST_CASE("result JSON carries the recovered spikes") {
    TempDir tmp;
    RecoveryResult result;
    result.measure.spikes = {{0.5, {1.0, 2.0, 3.0}}, {0.25, {-1.0, 0.5, 2.5}}};
    result.stop_reason = StopReason::AmplitudeBelowThreshold;
    IterationRecord rec;
    rec.certificate_max = 0.125;
    rec.spike_added = true;
    rec.spike_position = {1.0, 2.0, 3.0};
    rec.spike_amplitude = 0.5;
    result.trace.push_back(rec);
    save_result(tmp.file("result.json"), result, {});
    const SparseMeasure back = load_result_measure(tmp.file("result.json"));
    REQUIRE(back.spikes.size() == 2);
    CHECK(back.spikes[0].amplitude == 0.5);
    CHECK(back.spikes[1].position.z == 2.5);

    const nlohmann::json j = load_json(tmp.file("result.json"));
    CHECK(j.at("stop_reason").get<std::string>() == "AmplitudeBelowThreshold");
    CHECK(j.contains("provenance"));
    CHECK(j.at("trace").size() == 1);
}

TEST_CASE("spike CSV uses the ground-truth schema") {
    TempDir tmp;
    SparseMeasure m;
    m.spikes = {{0.7, {4.0, 5.0, 6.0}}};
    save_spikes_csv(tmp.file("spikes.csv"), m, {});
    const std::vector<ImageSource> back = load_sources_csv(tmp.file("spikes.csv"));
    REQUIRE(back.size() == 1);
    CHECK(back[0].order == -1);
    CHECK(back[0].amplitude == 0.7);
    CHECK(back[0].position.y == 5.0);
}

TEST_CASE("grid CSV has the provenance comment and header") {
    TempDir tmp;
    PlaneSpec plane{2, 1.0, 0.0, 1.0, 0.0, 1.0, 3, 2};
    Mat values(2, 3);
    values(1, 2) = 0.5;
    Provenance prov;
    prov.config_hash = "deadbeef";
    prov.seed = 9;
    save_grid_csv(tmp.file("grid.csv"), plane, values, prov);
    const std::string text = read_text_file(tmp.file("grid.csv"));
    CHECK(text.find("# imsrc v") == 0);
    CHECK(text.find("config_hash=deadbeef") != std::string::npos);
    CHECK(text.find("x,y,value") != std::string::npos);
    CHECK(text.find("1,1,0.5") != std::string::npos);
}

TEST_CASE("solver config JSON round trip") {
    SolverConfig c;
    c.lambda = 1e-4;
    c.i_max = 77;
    c.grid_radial_offsets = {-0.02, 0.0, 0.02, 0.04};
    const SolverConfig back = solver_config_from_json(solver_config_to_json(c));
    CHECK(back.lambda == c.lambda);
    CHECK(back.i_max == 77);
    CHECK(back.grid_radial_offsets == c.grid_radial_offsets);

    CHECK_THROWS_AS(solver_config_from_json({{"lambda", -1.0}}), InvalidInput);
}

TEST_CASE("dataset spec JSON round trip") {
    DatasetSpec d;
    d.n_rooms = 3;
    d.rng_seed = 11;
    const DatasetSpec back = dataset_spec_from_json(dataset_spec_to_json(d));
    CHECK(back.n_rooms == 3);
    CHECK(back.rng_seed == 11);
}

TEST_CASE("fnv1a hash is stable") {
    CHECK(fnv1a_hex("") == "cbf29ce484222325");
    CHECK(fnv1a_hex("a") == fnv1a_hex("a"));
    CHECK(fnv1a_hex("a") != fnv1a_hex("b"));
}

} // TEST_SUITE
