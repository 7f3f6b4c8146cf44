#ifndef IMSRC_IO_HPP
#define IMSRC_IO_HPP

#include <string>
#include <vector>

#include "imsrc/analysis.hpp"
#include "imsrc/forward.hpp"
#include "imsrc/harness.hpp"
#include "imsrc/solver.hpp"

#include <json.hpp>

namespace imsrc {

inline constexpr const char* kArtifactVersion = "0.1.0";

/// Stamp carried by every output file: artifact version, a hash of the
/// effective configuration, and the seed in play.
struct Provenance {
    std::string version = kArtifactVersion;
    std::string config_hash;
    std::uint64_t seed = 0;
};

std::string fnv1a_hex(const std::string& text);
std::string provenance_comment(const Provenance& p);

// scenario JSON: dims, absorption[6], src, mic_positions[M][3], rng_seed, c
nlohmann::json scenario_to_json(const Scenario& s);
Scenario scenario_from_json(const nlohmann::json& j);
void save_scenario(const std::string& path, const Scenario& s, const Provenance& prov);
Scenario load_scenario(const std::string& path);

/// ELRIR1 binary container: magic "ELRIR1", M u32, N u32, f_s f64, c f64,
/// then M*N little-endian f64, row-major.
struct RirData {
    Mat data;
    double f_s = 0.0;
    double c = 343.0;
};
void save_rir(const std::string& path, const Mat& data, double f_s, double c);
RirData load_rir(const std::string& path);
void save_rir_csv(const std::string& path, const Mat& data, double f_s, double c,
                  const Provenance& prov);

// ground-truth / spike CSV: q0,q1,q2,eps0,eps1,eps2,x,y,z,amplitude,order
void save_sources_csv(const std::string& path, const std::vector<ImageSource>& sources,
                      const Provenance& prov);
std::vector<ImageSource> load_sources_csv(const std::string& path);
/// Estimated spikes in the same schema; q/eps are zero and order is -1.
void save_spikes_csv(const std::string& path, const SparseMeasure& measure,
                     const Provenance& prov);

nlohmann::json result_to_json(const RecoveryResult& result, const Provenance& prov);
void save_result(const std::string& path, const RecoveryResult& result, const Provenance& prov);
SparseMeasure measure_from_result_json(const nlohmann::json& j);
SparseMeasure load_result_measure(const std::string& path);

nlohmann::json existence_to_json(const ExistenceReport& rep, const Provenance& prov);
nlohmann::json match_report_to_json(const MatchReport& rep, const Provenance& prov);

/// Plane sample grid as CSV: header x,y,value (the two free plane axes).
void save_grid_csv(const std::string& path, const PlaneSpec& plane, const Mat& values,
                   const Provenance& prov);

void save_table1_csv(const std::string& path, const AggregateReport& agg, const Provenance& prov);
void save_table2_csv(const std::string& path, const AggregateReport& agg, const Provenance& prov);

// config parsing (JSON object with optional keys, unknown keys rejected)
SolverConfig solver_config_from_json(const nlohmann::json& j);
nlohmann::json solver_config_to_json(const SolverConfig& c);
DatasetSpec dataset_spec_from_json(const nlohmann::json& j);
nlohmann::json dataset_spec_to_json(const DatasetSpec& d);

void write_text_file(const std::string& path, const std::string& text);
std::string read_text_file(const std::string& path);
nlohmann::json load_json(const std::string& path);
void save_json(const std::string& path, const nlohmann::json& j);

} // namespace imsrc

#endif
