#ifndef IMSRC_HARNESS_HPP
#define IMSRC_HARNESS_HPP

#include <cstdint>
#include <string>
#include <vector>

#include "imsrc/forward.hpp"

namespace imsrc {

/// Randomized scenario generator parameters.
struct DatasetSpec {
    int n_rooms = 200;
    double len_min = 2.0, len_max = 10.0;      // room length and width, m
    double height_min = 2.0, height_max = 5.0; // room height, m
    double absorption_min = 0.01, absorption_max = 0.3;
    double wall_clearance = 0.25;             // array center to every wall
    double min_source_array_distance = 1.0;
    double array_radius = 0.042;
    double c = 343.0;
    std::uint64_t rng_seed = 0;

    void validate() const;
};

/// Scenarios satisfying all placement constraints, by rejection sampling.
/// Deterministic under the seed; scenario i draws from stream (seed, i).
std::vector<Scenario> generate_dataset(const DatasetSpec& spec);

/// Angle in degrees between r and r_hat as seen from the origin
/// (array-centered coordinates). Throws on zero vectors.
double angular_error_deg(const Vec3& r, const Vec3& r_hat);
double radial_error(const Vec3& r, const Vec3& r_hat);
double euclidean_error(const Vec3& r, const Vec3& r_hat);

struct Match {
    int target_index = -1;
    int estimate_index = -1;
    double ae_deg = 0.0;
    double re = 0.0;
    double ee = 0.0;
    double amp_err = 0.0;
};

struct OrderStats {
    int order = 0;
    long n_targets = 0;
    long n_matched = 0;
    double sum_re = 0.0, sum_ae_deg = 0.0, sum_ee = 0.0, sum_amp_err = 0.0;

    double recall() const { return n_targets ? static_cast<double>(n_matched) / n_targets : 1.0; }
    double mean_re() const { return n_matched ? sum_re / n_matched : 0.0; }
    double mean_ae_deg() const { return n_matched ? sum_ae_deg / n_matched : 0.0; }
    double mean_ee() const { return n_matched ? sum_ee / n_matched : 0.0; }
    double mean_amp_err() const { return n_matched ? sum_amp_err / n_matched : 0.0; }
};

struct MatchReport {
    std::vector<Match> matches;
    int n_targets = 0;
    int n_estimates = 0;
    double recall = 1.0;
    double precision = 1.0;
    std::vector<OrderStats> per_order; // orders present in the truth set, ascending
    double mean_re = 0.0, mean_ae_deg = 0.0, mean_ee = 0.0, mean_amp_err = 0.0;

    const OrderStats* order_stats(int order) const;
};

/// Greedy closest-first matching in array-centered coordinates. A target and
/// an estimate may pair only if RE and AE are both within the thresholds;
/// each estimate matches at most one target and vice versa, closest EE first.
MatchReport match_and_score(const ImageSourceSet& truth, const SparseMeasure& estimate,
                            const Vec3& array_center, double re_thresh = 0.01,
                            double ae_thresh_deg = 2.0);

struct BucketStats {
    std::string label;
    long lo = 0;
    long hi = -1; // -1 = open-ended
    int n_scenarios = 0;
    long n_targets = 0;
    long n_matched = 0;
    long n_estimates = 0;
    double sum_re = 0.0, sum_ae_deg = 0.0, sum_ee = 0.0, sum_amp_err = 0.0;

    double recall() const { return n_targets ? static_cast<double>(n_matched) / n_targets : 1.0; }
    double precision() const {
        return n_estimates ? static_cast<double>(n_matched) / n_estimates : 1.0;
    }
    double mean_re() const { return n_matched ? sum_re / n_matched : 0.0; }
    double mean_ae_deg() const { return n_matched ? sum_ae_deg / n_matched : 0.0; }
    double mean_ee() const { return n_matched ? sum_ee / n_matched : 0.0; }
    double mean_amp_err() const { return n_matched ? sum_amp_err / n_matched : 0.0; }
};

struct AggregateReport {
    std::vector<BucketStats> by_size; // 0-200, 200-400, 400-700, 700+ target sources
    std::vector<OrderStats> by_order; // reflection orders 0..3
};

AggregateReport aggregate(const std::vector<MatchReport>& reports);

} // namespace imsrc

#endif
