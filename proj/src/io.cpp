#include "imsrc/io.hpp"

#include <cstdint>
#include <cstring>
#include <fstream>
#include <iomanip>
#include <sstream>

#include "imsrc/errors.hpp"

namespace imsrc {

using nlohmann::json;

std::string fnv1a_hex(const std::string& text) {
    std::uint64_t h = 0xcbf29ce484222325ULL;
    for (unsigned char ch : text) {
        h ^= ch;
        h *= 0x100000001b3ULL;
    }
    std::ostringstream out;
    out << std::hex << std::setfill('0') << std::setw(16) << h;
    return out.str();
}

std::string provenance_comment(const Provenance& p) {
    std::ostringstream out;
    out << "# imsrc v" << p.version << " config_hash=" << p.config_hash << " seed=" << p.seed;
    return out.str();
}

namespace {

json provenance_json(const Provenance& p) {
    return json{{"version", p.version}, {"config_hash", p.config_hash}, {"seed", p.seed}};
}

json vec3_json(const Vec3& v) { return json::array({v.x, v.y, v.z}); }

Vec3 vec3_from(const json& j) {
    if (!j.is_array() || j.size() != 3) throw InvalidInput("expected a 3-vector");
    return {j[0].get<double>(), j[1].get<double>(), j[2].get<double>()};
}

std::ofstream open_out(const std::string& path, std::ios::openmode mode = std::ios::out) {
    std::ofstream f(path, mode);
    if (!f) throw IoError("cannot open for writing: " + path);
    return f;
}

std::ifstream open_in(const std::string& path, std::ios::openmode mode = std::ios::in) {
    std::ifstream f(path, mode);
    if (!f) throw IoError("cannot open for reading: " + path);
    return f;
}

std::vector<std::string> split_csv_line(const std::string& line) {
    std::vector<std::string> fields;
    std::string cur;
    for (char ch : line) {
        if (ch == ',') {
            fields.push_back(cur);
            cur.clear();
        } else if (ch != '\r') {
            cur += ch;
        }
    }
    fields.push_back(cur);
    return fields;
}

} // namespace

void write_text_file(const std::string& path, const std::string& text) {
    auto f = open_out(path, std::ios::binary);
    f << text;
    if (!f) throw IoError("write failed: " + path);
}

std::string read_text_file(const std::string& path) {
    auto f = open_in(path, std::ios::binary);
    std::ostringstream out;
    out << f.rdbuf();
    return out.str();
}

json load_json(const std::string& path) {
    const std::string text = read_text_file(path);
    json j = json::parse(text, nullptr, false);
    if (j.is_discarded()) throw IoError("malformed JSON: " + path);
    return j;
}

void save_json(const std::string& path, const json& j) { write_text_file(path, j.dump(2) + "\n"); }

json scenario_to_json(const Scenario& s) {
    json mics = json::array();
    for (const Vec3& p : s.array.positions) mics.push_back(vec3_json(p));
    return json{{"dims", vec3_json(s.room.dims)},
                {"absorption", s.room.absorption},
                {"src", vec3_json(s.src)},
                {"mic_positions", mics},
                {"array_label", s.array.label},
                {"rng_seed", s.rng_seed},
                {"c", s.c}};
}

Scenario scenario_from_json(const json& j) {
    Scenario s;
    s.room.dims = vec3_from(j.at("dims"));
    const auto& abs = j.at("absorption");
    if (!abs.is_array() || abs.size() != 6) throw InvalidInput("absorption must have 6 entries");
    for (int i = 0; i < 6; ++i) s.room.absorption[i] = abs[i].get<double>();
    s.src = vec3_from(j.at("src"));
    for (const auto& p : j.at("mic_positions")) s.array.positions.push_back(vec3_from(p));
    s.array.label = j.value("array_label", std::string("custom"));
    s.rng_seed = j.value("rng_seed", std::uint64_t{0});
    s.c = j.value("c", 343.0);
    validate_scenario(s);
    return s;
}

void save_scenario(const std::string& path, const Scenario& s, const Provenance& prov) {
    json j = scenario_to_json(s);
    j["provenance"] = provenance_json(prov);
    save_json(path, j);
}

Scenario load_scenario(const std::string& path) { return scenario_from_json(load_json(path)); }

namespace {
constexpr char kRirMagic[6] = {'E', 'L', 'R', 'I', 'R', '1'};
}

void save_rir(const std::string& path, const Mat& data, double f_s, double c) {
    auto f = open_out(path, std::ios::binary);
    f.write(kRirMagic, sizeof(kRirMagic));
    const std::uint32_t m = static_cast<std::uint32_t>(data.rows());
    const std::uint32_t n = static_cast<std::uint32_t>(data.cols());
    f.write(reinterpret_cast<const char*>(&m), 4);
    f.write(reinterpret_cast<const char*>(&n), 4);
    f.write(reinterpret_cast<const char*>(&f_s), 8);
    f.write(reinterpret_cast<const char*>(&c), 8);
    f.write(reinterpret_cast<const char*>(data.data()), static_cast<std::streamsize>(data.size() * 8));
    if (!f) throw IoError("write failed: " + path);
}

RirData load_rir(const std::string& path) {
    auto f = open_in(path, std::ios::binary);
    char magic[6];
    f.read(magic, 6);
    if (!f || std::memcmp(magic, kRirMagic, 6) != 0)
        throw IoError("not an ELRIR1 file: " + path);
    std::uint32_t m = 0;
    std::uint32_t n = 0;
    RirData rir;
    f.read(reinterpret_cast<char*>(&m), 4);
    f.read(reinterpret_cast<char*>(&n), 4);
    f.read(reinterpret_cast<char*>(&rir.f_s), 8);
    f.read(reinterpret_cast<char*>(&rir.c), 8);
    if (!f || m == 0 || n == 0 || m > 100000 || n > 100000000)
        throw IoError("bad ELRIR1 header: " + path);
    rir.data = Mat(static_cast<int>(m), static_cast<int>(n));
    f.read(reinterpret_cast<char*>(rir.data.data()),
           static_cast<std::streamsize>(rir.data.size() * 8));
    if (!f) throw IoError("truncated ELRIR1 file: " + path);
    return rir;
}

void save_rir_csv(const std::string& path, const Mat& data, double f_s, double c,
                  const Provenance& prov) {
    auto f = open_out(path);
    f << provenance_comment(prov) << " f_s=" << f_s << " c=" << c << " M=" << data.rows()
      << " N=" << data.cols() << "\n";
    f << std::setprecision(17);
    for (int m = 0; m < data.rows(); ++m) {
        for (int n = 0; n < data.cols(); ++n) f << (n ? "," : "") << data(m, n);
        f << "\n";
    }
    if (!f) throw IoError("write failed: " + path);
}

void save_sources_csv(const std::string& path, const std::vector<ImageSource>& sources,
                      const Provenance& prov) {
    auto f = open_out(path);
    f << provenance_comment(prov) << "\n";
    f << "q0,q1,q2,eps0,eps1,eps2,x,y,z,amplitude,order\n";
    f << std::setprecision(17);
    for (const ImageSource& s : sources) {
        f << s.q[0] << "," << s.q[1] << "," << s.q[2] << "," << s.eps[0] << "," << s.eps[1] << ","
          << s.eps[2] << "," << s.position.x << "," << s.position.y << "," << s.position.z << ","
          << s.amplitude << "," << s.order << "\n";
    }
    if (!f) throw IoError("write failed: " + path);
}

std::vector<ImageSource> load_sources_csv(const std::string& path) {
    auto f = open_in(path);
    std::vector<ImageSource> out;
    std::string line;
    bool header_seen = false;
    while (std::getline(f, line)) {
        if (line.empty() || line[0] == '#') continue;
        if (!header_seen) { // header row
            header_seen = true;
            continue;
        }
        const auto fields = split_csv_line(line);
        if (fields.size() != 11) throw IoError("bad source CSV row in " + path);
        ImageSource s;
        for (int i = 0; i < 3; ++i) s.q[i] = std::stoi(fields[i]);
        for (int i = 0; i < 3; ++i) s.eps[i] = std::stoi(fields[3 + i]);
        s.position = {std::stod(fields[6]), std::stod(fields[7]), std::stod(fields[8])};
        s.amplitude = std::stod(fields[9]);
        s.order = std::stoi(fields[10]);
        out.push_back(s);
    }
    return out;
}

void save_spikes_csv(const std::string& path, const SparseMeasure& measure,
                     const Provenance& prov) {
    std::vector<ImageSource> rows;
    rows.reserve(measure.spikes.size());
    for (const Spike& sp : measure.spikes) {
        ImageSource s;
        s.q = {0, 0, 0};
        s.eps = {0, 0, 0};
        s.position = sp.position;
        s.amplitude = sp.amplitude;
        s.order = -1; // unknown for estimates
        rows.push_back(s);
    }
    save_sources_csv(path, rows, prov);
}

json result_to_json(const RecoveryResult& result, const Provenance& prov) {
    json spikes = json::array();
    for (const Spike& sp : result.measure.spikes)
        spikes.push_back(json{{"a", sp.amplitude},
                              {"x", sp.position.x},
                              {"y", sp.position.y},
                              {"z", sp.position.z}});
    json trace = json::array();
    for (const IterationRecord& r : result.trace) {
        json t{{"iteration", r.iteration},
               {"active_samples", r.active_samples},
               {"extended", r.extended},
               {"certificate_max", r.certificate_max},
               {"residual_norm", r.residual_norm},
               {"objective", r.objective},
               {"n_spikes", r.n_spikes}};
        if (r.spike_added || r.spike_amplitude != 0.0) {
            t["spike"] = vec3_json(r.spike_position);
            t["spike_amplitude"] = r.spike_amplitude;
            t["spike_added"] = r.spike_added;
        }
        trace.push_back(t);
    }
    return json{{"provenance", provenance_json(prov)},
                {"spikes", spikes},
                {"trace", trace},
                {"stop_reason", to_string(result.stop_reason)},
                {"final_objective", result.final_objective},
                {"config", solver_config_to_json(result.config)}};
}

void save_result(const std::string& path, const RecoveryResult& result, const Provenance& prov) {
    save_json(path, result_to_json(result, prov));
}

SparseMeasure measure_from_result_json(const json& j) {
    SparseMeasure m;
    for (const auto& s : j.at("spikes"))
        m.spikes.push_back(
            {s.at("a").get<double>(),
             {s.at("x").get<double>(), s.at("y").get<double>(), s.at("z").get<double>()}});
    return m;
}

SparseMeasure load_result_measure(const std::string& path) {
    return measure_from_result_json(load_json(path));
}

json existence_to_json(const ExistenceReport& rep, const Provenance& prov) {
    return json{{"provenance", provenance_json(prov)},
                {"phi", rep.phi},
                {"mu", rep.mu},
                {"alb_ok", rep.alb_ok},
                {"alb_min_sum", rep.alb_min_sum},
                {"condition_i", rep.condition_i},
                {"condition_ii", rep.condition_ii},
                {"condition_lambda", rep.condition_lambda},
                {"verdict", to_string(rep.verdict)},
                {"obs_norm", rep.obs_norm},
                {"lambda", rep.lambda},
                {"c_alb", rep.c_alb}};
}

json match_report_to_json(const MatchReport& rep, const Provenance& prov) {
    json matches = json::array();
    for (const Match& m : rep.matches)
        matches.push_back(json{{"target", m.target_index},
                               {"estimate", m.estimate_index},
                               {"ae_deg", m.ae_deg},
                               {"re", m.re},
                               {"ee", m.ee},
                               {"amp_err", m.amp_err}});
    json per_order = json::array();
    for (const OrderStats& st : rep.per_order)
        per_order.push_back(json{{"order", st.order},
                                 {"n_targets", st.n_targets},
                                 {"n_matched", st.n_matched},
                                 {"recall", st.recall()},
                                 {"mean_re", st.mean_re()},
                                 {"mean_ae_deg", st.mean_ae_deg()},
                                 {"mean_ee", st.mean_ee()},
                                 {"mean_amp_err", st.mean_amp_err()}});
    return json{{"provenance", provenance_json(prov)},
                {"n_targets", rep.n_targets},
                {"n_estimates", rep.n_estimates},
                {"recall", rep.recall},
                {"precision", rep.precision},
                {"mean_re", rep.mean_re},
                {"mean_ae_deg", rep.mean_ae_deg},
                {"mean_ee", rep.mean_ee},
                {"mean_amp_err", rep.mean_amp_err},
                {"matches", matches},
                {"per_order", per_order}};
}

void save_grid_csv(const std::string& path, const PlaneSpec& plane, const Mat& values,
                   const Provenance& prov) {
    auto f = open_out(path);
    f << provenance_comment(prov) << " fixed_axis=" << plane.fixed_axis
      << " fixed_value=" << plane.fixed_value << "\n";
    f << "x,y,value\n";
    f << std::setprecision(17);
    for (int iv = 0; iv < values.rows(); ++iv) {
        for (int iu = 0; iu < values.cols(); ++iu) {
            const Vec3 p = plane.point(iu, iv);
            double u;
            double v;
            switch (plane.fixed_axis) {
                case 0: u = p.y, v = p.z; break;
                case 1: u = p.x, v = p.z; break;
                default: u = p.x, v = p.y; break;
            }
            f << u << "," << v << "," << values(iv, iu) << "\n";
        }
    }
    if (!f) throw IoError("write failed: " + path);
}

void save_table1_csv(const std::string& path, const AggregateReport& agg, const Provenance& prov) {
    auto f = open_out(path);
    f << provenance_comment(prov) << "\n";
    f << "n_sources,n_scenarios,recall,precision,re_mm,ae_deg,ee_mm,ame\n";
    for (const BucketStats& b : agg.by_size) {
        f << b.label << "," << b.n_scenarios << "," << b.recall() << "," << b.precision() << ","
          << b.mean_re() * 1000.0 << "," << b.mean_ae_deg() << "," << b.mean_ee() * 1000.0 << ","
          << b.mean_amp_err() << "\n";
    }
    if (!f) throw IoError("write failed: " + path);
}

void save_table2_csv(const std::string& path, const AggregateReport& agg, const Provenance& prov) {
    auto f = open_out(path);
    f << provenance_comment(prov) << "\n";
    f << "is_order,recall,re_mm,ae_deg,ee_mm\n";
    for (const OrderStats& st : agg.by_order) {
        f << st.order << "," << st.recall() << "," << st.mean_re() * 1000.0 << ","
          << st.mean_ae_deg() << "," << st.mean_ee() * 1000.0 << "\n";
    }
    if (!f) throw IoError("write failed: " + path);
}

namespace {

template <typename T>
void read_key(const json& j, const char* key, T& out) {
    if (j.contains(key)) out = j.at(key).get<T>();
}

} // namespace

SolverConfig solver_config_from_json(const json& j) {
    SolverConfig c;
    read_key(j, "lambda", c.lambda);
    read_key(j, "eps_excl", c.eps_excl);
    read_key(j, "alpha_min", c.alpha_min);
    read_key(j, "i_max", c.i_max);
    read_key(j, "i_ext", c.i_ext);
    read_key(j, "resid_drop", c.resid_drop);
    read_key(j, "cutting_count", c.cutting_count);
    read_key(j, "grid_top_mics", c.grid_top_mics);
    read_key(j, "grid_angular_spacing_deg", c.grid_angular_spacing_deg);
    read_key(j, "grid_radial_offsets", c.grid_radial_offsets);
    read_key(j, "smoothing_window", c.smoothing_window);
    read_key(j, "bfgs_grad_tol", c.bfgs_grad_tol);
    read_key(j, "bfgs_max_iters", c.bfgs_max_iters);
    read_key(j, "merge_radius", c.merge_radius);
    read_key(j, "rng_seed", c.rng_seed);
    read_key(j, "slide_each_iteration", c.slide_each_iteration);
    c.validate();
    return c;
}

json solver_config_to_json(const SolverConfig& c) {
    return json{{"lambda", c.lambda},
                {"eps_excl", c.eps_excl},
                {"alpha_min", c.alpha_min},
                {"i_max", c.i_max},
                {"i_ext", c.i_ext},
                {"resid_drop", c.resid_drop},
                {"cutting_count", c.cutting_count},
                {"grid_top_mics", c.grid_top_mics},
                {"grid_angular_spacing_deg", c.grid_angular_spacing_deg},
                {"grid_radial_offsets", c.grid_radial_offsets},
                {"smoothing_window", c.smoothing_window},
                {"bfgs_grad_tol", c.bfgs_grad_tol},
                {"bfgs_max_iters", c.bfgs_max_iters},
                {"merge_radius", c.merge_radius},
                {"rng_seed", c.rng_seed},
                {"slide_each_iteration", c.slide_each_iteration}};
}

DatasetSpec dataset_spec_from_json(const json& j) {
    DatasetSpec d;
    read_key(j, "n_rooms", d.n_rooms);
    read_key(j, "len_min", d.len_min);
    read_key(j, "len_max", d.len_max);
    read_key(j, "height_min", d.height_min);
    read_key(j, "height_max", d.height_max);
    read_key(j, "absorption_min", d.absorption_min);
    read_key(j, "absorption_max", d.absorption_max);
    read_key(j, "wall_clearance", d.wall_clearance);
    read_key(j, "min_source_array_distance", d.min_source_array_distance);
    read_key(j, "array_radius", d.array_radius);
    read_key(j, "c", d.c);
    read_key(j, "rng_seed", d.rng_seed);
    d.validate();
    return d;
}

json dataset_spec_to_json(const DatasetSpec& d) {
    return json{{"n_rooms", d.n_rooms},
                {"len_min", d.len_min},
                {"len_max", d.len_max},
                {"height_min", d.height_min},
                {"height_max", d.height_max},
                {"absorption_min", d.absorption_min},
                {"absorption_max", d.absorption_max},
                {"wall_clearance", d.wall_clearance},
                {"min_source_array_distance", d.min_source_array_distance},
                {"array_radius", d.array_radius},
                {"c", d.c},
                {"rng_seed", d.rng_seed}};
}

} // namespace imsrc
