#include "imsrc/harness.hpp"

#include <algorithm>
#include <cmath>
#include <map>

#include "imsrc/errors.hpp"
#include "imsrc/rng.hpp"

namespace imsrc {

void DatasetSpec::validate() const {
    if (n_rooms < 1) throw InvalidInput("dataset needs at least one room");
    if (!(len_min > 0.0 && len_max >= len_min)) throw InvalidInput("bad length range");
    if (!(height_min > 0.0 && height_max >= height_min)) throw InvalidInput("bad height range");
    if (!(absorption_min >= 0.0 && absorption_max < 1.0 && absorption_max >= absorption_min))
        throw InvalidInput("bad absorption range");
    if (!(wall_clearance >= 0.0) || !(array_radius > 0.0) || !(c > 0.0))
        throw InvalidInput("bad dataset geometry parameters");
    if (2.0 * wall_clearance >= std::min(len_min, height_min))
        throw InvalidInput("wall clearance leaves no room for the array center");
    if (!(min_source_array_distance >= 0.0)) throw InvalidInput("bad separation distance");
}

std::vector<Scenario> generate_dataset(const DatasetSpec& spec) {
    spec.validate();
    std::vector<Scenario> out;
    out.reserve(spec.n_rooms);
    for (int i = 0; i < spec.n_rooms; ++i) {
        Rng rng(derive_seed(spec.rng_seed, static_cast<std::uint64_t>(i)));
        Scenario s;
        s.c = spec.c;
        s.room.dims = {rng.uniform(spec.len_min, spec.len_max),
                       rng.uniform(spec.len_min, spec.len_max),
                       rng.uniform(spec.height_min, spec.height_max)};
        for (double& a : s.room.absorption)
            a = rng.uniform(spec.absorption_min, spec.absorption_max);

        const Vec3 lo{spec.wall_clearance, spec.wall_clearance, spec.wall_clearance};
        const Vec3 hi = s.room.dims - lo;
        Vec3 center;
        Vec3 src;
        bool placed = false;
        for (int attempt = 0; attempt < 100000; ++attempt) {
            center = {rng.uniform(lo.x, hi.x), rng.uniform(lo.y, hi.y), rng.uniform(lo.z, hi.z)};
            src = {rng.uniform(0.0, s.room.dims.x), rng.uniform(0.0, s.room.dims.y),
                   rng.uniform(0.0, s.room.dims.z)};
            if (!s.room.contains_strictly(src)) continue;
            if (distance(src, center) >= spec.min_source_array_distance) {
                placed = true;
                break;
            }
        }
        if (!placed)
            throw InvalidInput("generate_dataset: could not satisfy placement constraints");
        s.src = src;

        const auto q = rng.unit_quaternion();
        s.array = make_em32_array(center, spec.array_radius,
                                  rotation_from_quaternion(q[0], q[1], q[2], q[3]));
        s.rng_seed = rng.next_u64();
        validate_scenario(s);
        out.push_back(std::move(s));
    }
    return out;
}

double angular_error_deg(const Vec3& r, const Vec3& r_hat) {
    const double nr = r.norm();
    const double nh = r_hat.norm();
    if (nr == 0.0 || nh == 0.0) throw InvalidInput("angular error undefined for zero vectors");
    const double cosv = std::clamp(r.dot(r_hat) / (nr * nh), -1.0, 1.0);
    return std::acos(cosv) * 180.0 / 3.14159265358979323846;
}

double radial_error(const Vec3& r, const Vec3& r_hat) { return std::abs(r.norm() - r_hat.norm()); }

double euclidean_error(const Vec3& r, const Vec3& r_hat) { return (r - r_hat).norm(); }

const OrderStats* MatchReport::order_stats(int order) const {
    for (const OrderStats& s : per_order)
        if (s.order == order) return &s;
    return nullptr;
}

MatchReport match_and_score(const ImageSourceSet& truth, const SparseMeasure& estimate,
                            const Vec3& array_center, double re_thresh, double ae_thresh_deg) {
    if (!(re_thresh > 0.0) || !(ae_thresh_deg > 0.0))
        throw InvalidInput("match thresholds must be positive");
    MatchReport rep;
    rep.n_targets = static_cast<int>(truth.sources.size());
    rep.n_estimates = static_cast<int>(estimate.spikes.size());

    struct Candidate {
        double ee;
        int est;
        double ae;
        double re;
    };
    std::vector<std::vector<Candidate>> candidates(rep.n_targets);
    for (int t = 0; t < rep.n_targets; ++t) {
        const Vec3 tv = truth.sources[t].position - array_center;
        for (int e = 0; e < rep.n_estimates; ++e) {
            const Vec3 ev = estimate.spikes[e].position - array_center;
            if (ev.norm() == 0.0) continue;
            const double re = radial_error(tv, ev);
            if (re > re_thresh) continue;
            const double ae = angular_error_deg(tv, ev);
            if (ae > ae_thresh_deg) continue;
            candidates[t].push_back({euclidean_error(tv, ev), e, ae, re});
        }
        std::sort(candidates[t].begin(), candidates[t].end(),
                  [](const Candidate& a, const Candidate& b) {
                      return a.ee != b.ee ? a.ee < b.ee : a.est < b.est;
                  });
    }

    // targets claim their closest remaining estimate, in order of best-match EE
    std::vector<int> order;
    for (int t = 0; t < rep.n_targets; ++t)
        if (!candidates[t].empty()) order.push_back(t);
    std::sort(order.begin(), order.end(), [&](int a, int b) {
        const double ea = candidates[a].front().ee;
        const double eb = candidates[b].front().ee;
        return ea != eb ? ea < eb : a < b;
    });

    std::vector<bool> e_used(rep.n_estimates, false);
    for (int t : order) {
        for (const Candidate& cand : candidates[t]) {
            if (e_used[cand.est]) continue;
            e_used[cand.est] = true;
            Match m;
            m.target_index = t;
            m.estimate_index = cand.est;
            m.ae_deg = cand.ae;
            m.re = cand.re;
            m.ee = cand.ee;
            m.amp_err =
                std::abs(truth.sources[t].amplitude - estimate.spikes[cand.est].amplitude);
            rep.matches.push_back(m);
            break;
        }
    }
    std::sort(rep.matches.begin(), rep.matches.end(),
              [](const Match& a, const Match& b) { return a.target_index < b.target_index; });

    const long matched = static_cast<long>(rep.matches.size());
    rep.recall = rep.n_targets ? static_cast<double>(matched) / rep.n_targets : 1.0;
    rep.precision = rep.n_estimates ? static_cast<double>(matched) / rep.n_estimates : 1.0;

    std::map<int, OrderStats> by_order;
    for (const ImageSource& s : truth.sources) {
        OrderStats& st = by_order[s.order];
        st.order = s.order;
        ++st.n_targets;
    }
    for (const Match& m : rep.matches) {
        OrderStats& st = by_order[truth.sources[m.target_index].order];
        ++st.n_matched;
        st.sum_re += m.re;
        st.sum_ae_deg += m.ae_deg;
        st.sum_ee += m.ee;
        st.sum_amp_err += m.amp_err;
        rep.mean_re += m.re;
        rep.mean_ae_deg += m.ae_deg;
        rep.mean_ee += m.ee;
        rep.mean_amp_err += m.amp_err;
    }
    if (matched > 0) {
        rep.mean_re /= matched;
        rep.mean_ae_deg /= matched;
        rep.mean_ee /= matched;
        rep.mean_amp_err /= matched;
    }
    for (const auto& [order, st] : by_order) rep.per_order.push_back(st);
    return rep;
}

AggregateReport aggregate(const std::vector<MatchReport>& reports) {
    AggregateReport agg;
    agg.by_size = {
        {"0-200", 0, 200, 0, 0, 0, 0, 0, 0, 0, 0},
        {"200-400", 200, 400, 0, 0, 0, 0, 0, 0, 0, 0},
        {"400-700", 400, 700, 0, 0, 0, 0, 0, 0, 0, 0},
        {"700+", 700, -1, 0, 0, 0, 0, 0, 0, 0, 0},
    };
    for (int order = 0; order <= 3; ++order) {
        OrderStats st;
        st.order = order;
        agg.by_order.push_back(st);
    }

    for (const MatchReport& rep : reports) {
        BucketStats* bucket = nullptr;
        for (BucketStats& b : agg.by_size)
            if (rep.n_targets >= b.lo && (b.hi < 0 || rep.n_targets < b.hi)) {
                bucket = &b;
                break;
            }
        if (bucket) {
            ++bucket->n_scenarios;
            bucket->n_targets += rep.n_targets;
            bucket->n_estimates += rep.n_estimates;
            bucket->n_matched += static_cast<long>(rep.matches.size());
            for (const Match& m : rep.matches) {
                bucket->sum_re += m.re;
                bucket->sum_ae_deg += m.ae_deg;
                bucket->sum_ee += m.ee;
                bucket->sum_amp_err += m.amp_err;
            }
        }
        for (const OrderStats& st : rep.per_order) {
            if (st.order > 3) continue;
            OrderStats& dst = agg.by_order[st.order];
            dst.n_targets += st.n_targets;
            dst.n_matched += st.n_matched;
            dst.sum_re += st.sum_re;
            dst.sum_ae_deg += st.sum_ae_deg;
            dst.sum_ee += st.sum_ee;
            dst.sum_amp_err += st.sum_amp_err;
        }
    }
    return agg;
}

} // namespace imsrc
