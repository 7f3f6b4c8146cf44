#include <atomic>
#include <cstdint>
#include <filesystem>
#include <iostream>
#include <string>
#include <thread>
#include <vector>

#include <CLI11.hpp>

#include "imsrc/analysis.hpp"
#include "imsrc/errors.hpp"
#include "imsrc/forward.hpp"
#include "imsrc/harness.hpp"
#include "imsrc/io.hpp"
#include "imsrc/parallel.hpp"
#include "imsrc/solver.hpp"

namespace fs = std::filesystem;
using nlohmann::json;
using namespace imsrc;

namespace {

struct KernelOptions {
    std::string kind = "sinc";
    double sigma = 0.0;
};

FilterKernel make_kernel(const KernelOptions& k, double f_s) {
    if (k.kind == "sinc") return FilterKernel::sinc_lowpass(f_s);
    if (k.kind == "gaussian") return FilterKernel::gaussian(k.sigma);
    throw InvalidInput("unknown kernel kind: " + k.kind);
}

void add_kernel_options(CLI::App* cmd, KernelOptions& k) {
    cmd->add_option("--kernel", k.kind, "Filter kernel: sinc | gaussian")
        ->check(CLI::IsMember({"sinc", "gaussian"}));
    cmd->add_option("--sigma", k.sigma, "Gaussian kernel width in seconds");
}

Provenance make_provenance(const json& effective_config, std::uint64_t seed) {
    Provenance p;
    p.config_hash = fnv1a_hex(effective_config.dump());
    p.seed = seed;
    return p;
}

void ensure_dir(const std::string& dir) {
    std::error_code ec;
    fs::create_directories(dir, ec);
    if (ec) throw IoError("cannot create output directory: " + dir);
}

struct PlaneArg {
    std::string axis_eq = "z=0";
    double u_min = 0.0, u_max = 1.0, v_min = 0.0, v_max = 1.0;
    int nu = 201, nv = 201;

    PlaneSpec to_spec() const {
        const auto eq = axis_eq.find('=');
        if (axis_eq.size() < 3 || eq != 1) throw InvalidInput("--plane expects e.g. z=1.25");
        PlaneSpec p;
        switch (axis_eq[0]) {
            case 'x': p.fixed_axis = 0; break;
            case 'y': p.fixed_axis = 1; break;
            case 'z': p.fixed_axis = 2; break;
            default: throw InvalidInput("plane axis must be x, y or z");
        }
        p.fixed_value = std::stod(axis_eq.substr(2));
        p.u_min = u_min;
        p.u_max = u_max;
        p.v_min = v_min;
        p.v_max = v_max;
        p.nu = nu;
        p.nv = nv;
        return p;
    }
};

void add_plane_options(CLI::App* cmd, PlaneArg& p) {
    cmd->add_option("--plane", p.axis_eq, "Axis-aligned plane, e.g. z=1.25");
    cmd->add_option("--umin", p.u_min, "First free-axis minimum, m");
    cmd->add_option("--umax", p.u_max, "First free-axis maximum, m");
    cmd->add_option("--vmin", p.v_min, "Second free-axis minimum, m");
    cmd->add_option("--vmax", p.v_max, "Second free-axis maximum, m");
    cmd->add_option("--nu", p.nu, "Grid resolution along the first free axis");
    cmd->add_option("--nv", p.nv, "Grid resolution along the second free axis");
}

SolverConfig load_solver_config(const std::string& config_path) {
    if (config_path.empty()) return {};
    return solver_config_from_json(load_json(config_path));
}

ImageSourceSet sources_as_set(std::vector<ImageSource> sources) {
    ImageSourceSet set;
    set.sources = std::move(sources);
    for (const ImageSource& s : set.sources) set.max_order = std::max(set.max_order, s.order);
    return set;
}

// ---------------------------------------------------------------------------

int cmd_simulate(const std::string& scenario_path, const std::string& dataset_path,
                 int dataset_index, double f_s, double t_max, int n_samples,
                 const KernelOptions& kopt, int max_order, double psnr, bool has_psnr,
                 std::uint64_t seed_override, bool has_seed, const std::string& array_layout,
                 const std::string& out_dir) {
    Scenario scenario;
    if (!scenario_path.empty()) {
        scenario = load_scenario(scenario_path);
    } else if (!dataset_path.empty()) {
        DatasetSpec dspec = dataset_spec_from_json(load_json(dataset_path));
        if (dataset_index < 0 || dataset_index >= dspec.n_rooms)
            throw InvalidInput("--index outside the dataset");
        dspec.n_rooms = dataset_index + 1;
        scenario = generate_dataset(dspec).back();
    } else {
        throw InvalidInput("simulate needs --scenario or --dataset");
    }
    if (has_seed) scenario.rng_seed = seed_override;
    if (array_layout == "fib32") {
        const Vec3 center = scenario.array.center();
        const double radius = distance(scenario.array.positions.front(), center);
        scenario.array = make_fibonacci_array(center, radius);
    } else if (array_layout != "em32") {
        throw InvalidInput("unknown array layout: " + array_layout);
    }

    const SamplingSpec spec =
        n_samples > 0 ? SamplingSpec{f_s, n_samples} : SamplingSpec::from_duration(f_s, t_max);
    const FilterKernel kernel = make_kernel(kopt, f_s);

    json cfg{{"command", "simulate"},   {"f_s", f_s},
             {"n_samples", spec.n_samples}, {"kernel", kopt.kind},
             {"sigma", kopt.sigma},     {"max_order", max_order},
             {"psnr", has_psnr ? json(psnr) : json()},
             {"scenario", scenario_to_json(scenario)}};
    const Provenance prov = make_provenance(cfg, scenario.rng_seed);

    auto [obs, truth] = synthesize_rir(scenario, kernel, spec, max_order, scenario.c);
    if (has_psnr) obs = add_noise(obs, psnr, scenario.rng_seed);

    ensure_dir(out_dir);
    save_rir(out_dir + "/rir.elrir", obs.data, f_s, scenario.c);
    save_rir_csv(out_dir + "/rir.csv", obs.data, f_s, scenario.c, prov);
    save_sources_csv(out_dir + "/truth.csv", truth.sources, prov);
    save_scenario(out_dir + "/scenario.json", scenario, prov);
    cfg["provenance"] = json{{"version", prov.version}, {"config_hash", prov.config_hash},
                             {"seed", prov.seed}};
    save_json(out_dir + "/manifest.json", cfg);
    std::cout << "wrote " << out_dir << "/rir.elrir (" << obs.data.rows() << "x" << obs.data.cols()
              << "), " << truth.sources.size() << " sources\n";
    return 0;
}

int cmd_solve(const std::string& rir_path, const std::string& scenario_path,
              const std::string& config_path, double lambda, bool has_lambda,
              const std::string& out_path) {
    const RirData rir = load_rir(rir_path);
    const Scenario scenario = load_scenario(scenario_path);
    if (rir.data.rows() != static_cast<int>(scenario.array.positions.size()))
        throw InvalidInput("RIR channel count does not match the scenario array");

    SolverConfig config = load_solver_config(config_path);
    if (has_lambda) config.lambda = lambda;
    config.validate();

    Observation obs{rir.data, SamplingSpec{rir.f_s, rir.data.cols()}, scenario.array,
                    FilterKernel::sinc_lowpass(rir.f_s)};
    const RecoveryResult result = solve(obs, rir.c, config);

    json cfg{{"command", "solve"}, {"rir", rir_path}, {"config", solver_config_to_json(config)}};
    const Provenance prov = make_provenance(cfg, config.rng_seed);
    save_result(out_path, result, prov);
    const std::string csv_path =
        out_path.size() > 5 && out_path.substr(out_path.size() - 5) == ".json"
            ? out_path.substr(0, out_path.size() - 5) + "_spikes.csv"
            : out_path + "_spikes.csv";
    save_spikes_csv(csv_path, result.measure, prov);
    std::cout << "recovered " << result.measure.spikes.size() << " spikes, stop reason "
              << to_string(result.stop_reason) << "\n";
    return 0;
}

int cmd_certify(const std::string& truth_path, const std::string& scenario_path, double f_s,
                double t_max, const KernelOptions& kopt, const PlaneArg& plane_arg,
                const std::string& out_path) {
    const Scenario scenario = load_scenario(scenario_path);
    const std::vector<ImageSource> sources = load_sources_csv(truth_path);
    if (sources.empty()) throw InvalidInput("certify: empty source list");

    const SamplingSpec spec = SamplingSpec::from_duration(f_s, t_max);
    const FilterKernel kernel = make_kernel(kopt, f_s);
    std::vector<Vec3> positions;
    std::vector<int> signs;
    for (const ImageSource& s : sources) {
        positions.push_back(s.position);
        signs.push_back(1);
    }

    const Precertificate cert =
        precertificate_eta_v(positions, signs, scenario.array, kernel, spec, scenario.c);
    const PlaneSpec plane = plane_arg.to_spec();
    const Mat values = sample_certificate_plane(
        [&](const Vec3& r) { return std::abs(cert.eval(r).value); }, plane);

    json cfg{{"command", "certify"}, {"f_s", f_s}, {"t_max", t_max}, {"n_sources", sources.size()}};
    save_grid_csv(out_path, plane, values, make_provenance(cfg, scenario.rng_seed));
    std::cout << "wrote " << out_path << " (" << plane.nv << "x" << plane.nu << ")\n";
    return 0;
}

int cmd_analyze(const std::string& rir_path, const std::string& scenario_path, double lambda,
                double c_alb, const std::string& out_path) {
    const RirData rir = load_rir(rir_path);
    const Scenario scenario = load_scenario(scenario_path);
    Observation obs{rir.data, SamplingSpec{rir.f_s, rir.data.cols()}, scenario.array,
                    FilterKernel::sinc_lowpass(rir.f_s)};
    const ExistenceReport rep = existence_verdict(obs, rir.c, lambda, c_alb);
    json cfg{{"command", "analyze"}, {"lambda", lambda}, {"c_alb", c_alb}};
    save_json(out_path, existence_to_json(rep, make_provenance(cfg, scenario.rng_seed)));
    std::cout << "phi=" << rep.phi << " verdict=" << to_string(rep.verdict) << "\n";
    return 0;
}

int cmd_evaluate(const std::string& truth_path, const std::string& result_path,
                 const std::string& scenario_path, double f_s, double t_max, double eps_excl,
                 double re_thresh, double ae_thresh, const std::string& out_path) {
    const Scenario scenario = load_scenario(scenario_path);
    ImageSourceSet truth = sources_as_set(load_sources_csv(truth_path));
    truth = observable_subset(truth, scenario.array, t_max, scenario.c, eps_excl);
    const SparseMeasure estimate = load_result_measure(result_path);
    const MatchReport rep =
        match_and_score(truth, estimate, scenario.array.center(), re_thresh, ae_thresh);
    json cfg{{"command", "evaluate"}, {"f_s", f_s},       {"t_max", t_max},
             {"eps_excl", eps_excl},  {"re", re_thresh},  {"ae", ae_thresh}};
    save_json(out_path, match_report_to_json(rep, make_provenance(cfg, scenario.rng_seed)));
    std::cout << "recall=" << rep.recall << " precision=" << rep.precision << " ("
              << rep.matches.size() << "/" << rep.n_targets << " targets)\n";
    return 0;
}

int cmd_bench(const std::string& dataset_path, double f_s, double t_max, int max_order,
              double psnr, bool has_psnr, const std::string& config_path, double eps_excl_eval,
              int jobs, const std::string& out_dir) {
    DatasetSpec dspec;
    if (!dataset_path.empty()) dspec = dataset_spec_from_json(load_json(dataset_path));
    SolverConfig config = load_solver_config(config_path);
    config.validate();

    const SamplingSpec spec = SamplingSpec::from_duration(f_s, t_max);
    const FilterKernel kernel = make_kernel({"sinc", 0.0}, f_s);
    const std::vector<Scenario> scenarios = generate_dataset(dspec);

    json cfg{{"command", "bench"},
             {"dataset", dataset_spec_to_json(dspec)},
             {"f_s", f_s},
             {"t_max", t_max},
             {"max_order", max_order},
             {"psnr", has_psnr ? json(psnr) : json()},
             {"config", solver_config_to_json(config)}};
    const Provenance prov = make_provenance(cfg, dspec.rng_seed);
    ensure_dir(out_dir);

    if (jobs > 1) set_max_threads(1); // scenario workers saturate the cores

    std::vector<MatchReport> reports(scenarios.size());
    std::atomic<std::size_t> next{0};
    std::atomic<int> failures{0};
    auto worker = [&] {
        for (;;) {
            const std::size_t i = next.fetch_add(1);
            if (i >= scenarios.size()) return;
            try {
                const Scenario& scenario = scenarios[i];
                auto [obs, truth] = synthesize_rir(scenario, kernel, spec, max_order, scenario.c);
                if (has_psnr) obs = add_noise(obs, psnr, scenario.rng_seed);
                const RecoveryResult result = solve(obs, scenario.c, config);
                const ImageSourceSet observable =
                    observable_subset(truth, scenario.array, spec.t_max(), scenario.c,
                                      eps_excl_eval);
                reports[i] = match_and_score(observable, result.measure,
                                             scenario.array.center());
                const std::string stem = out_dir + "/scenario_" + std::to_string(i);
                save_scenario(stem + ".json", scenario, prov);
                save_result(stem + "_result.json", result, prov);
                save_json(stem + "_report.json", match_report_to_json(reports[i], prov));
            } catch (const std::exception& e) {
                ++failures;
                std::cerr << "scenario " << i << " failed: " << e.what() << "\n";
            }
        }
    };
    std::vector<std::thread> pool;
    for (int t = 1; t < jobs; ++t) pool.emplace_back(worker);
    worker();
    for (auto& t : pool) t.join();

    const AggregateReport agg = aggregate(reports);
    save_table1_csv(out_dir + "/table1.csv", agg, prov);
    save_table2_csv(out_dir + "/table2.csv", agg, prov);
    save_json(out_dir + "/manifest.json", cfg);
    std::cout << "bench complete: " << scenarios.size() - failures << "/" << scenarios.size()
              << " scenarios, tables in " << out_dir << "\n";
    return failures == 0 ? 0 : 3;
}

} // namespace

int main(int argc, char** argv) {
    CLI::App app{"Image-source RIR synthesis and gridless recovery"};
    app.require_subcommand(1);
    int threads = 0;
    app.add_option("--threads", threads, "Worker thread cap (0 = hardware)");

    // simulate
    auto* sim = app.add_subcommand("simulate", "Synthesize a band-limited sampled RIR");
    std::string sim_scenario, sim_dataset, sim_out = "out";
    int sim_index = 0, sim_order = 20, sim_samples = 0;
    double sim_fs = 24000.0, sim_tmax = 0.05, sim_psnr = 0.0;
    std::uint64_t sim_seed = 0;
    KernelOptions sim_kernel;
    sim->add_option("--scenario", sim_scenario, "Scenario JSON path");
    sim->add_option("--dataset", sim_dataset, "Dataset spec JSON (with --index)");
    sim->add_option("--index", sim_index, "Scenario index within the dataset");
    sim->add_option("--fs", sim_fs, "Sampling frequency, Hz");
    sim->add_option("--tmax", sim_tmax, "Signal duration (N-1)/fs, seconds");
    sim->add_option("--samples", sim_samples, "Sample count N (overrides --tmax)");
    sim->add_option("--max-order", sim_order, "Image source truncation order");
    auto* sim_psnr_opt = sim->add_option("--psnr", sim_psnr, "Add noise at this PSNR, dB");
    auto* sim_seed_opt = sim->add_option("--seed", sim_seed, "Noise seed override");
    std::string sim_array = "em32";
    sim->add_option("--array", sim_array, "Array layout for dataset scenarios: em32 | fib32")
        ->check(CLI::IsMember({"em32", "fib32"}));
    add_kernel_options(sim, sim_kernel);
    sim->add_option("-o,--out", sim_out, "Output directory");

    // solve
    auto* sol = app.add_subcommand("solve", "Recover the image-source point cloud from a RIR");
    std::string sol_rir, sol_scenario, sol_config, sol_out = "result.json";
    double sol_lambda = 3e-5;
    sol->add_option("--rir", sol_rir, "ELRIR1 file")->required();
    sol->add_option("--scenario", sol_scenario, "Scenario JSON (microphone positions)")->required();
    sol->add_option("--config", sol_config, "Solver config JSON");
    auto* sol_lambda_opt = sol->add_option("--lambda", sol_lambda, "Regularization weight");
    sol->add_option("-o,--out", sol_out, "Result JSON path");

    // certify
    auto* cer = app.add_subcommand("certify", "Sample the vanishing-derivatives precertificate");
    std::string cer_truth, cer_scenario, cer_out = "grid.csv";
    double cer_fs = 24000.0, cer_tmax = 0.05;
    KernelOptions cer_kernel;
    PlaneArg cer_plane;
    cer->add_option("--truth", cer_truth, "Source CSV")->required();
    cer->add_option("--scenario", cer_scenario, "Scenario JSON")->required();
    cer->add_option("--fs", cer_fs, "Sampling frequency, Hz");
    cer->add_option("--tmax", cer_tmax, "Signal duration, seconds");
    add_kernel_options(cer, cer_kernel);
    add_plane_options(cer, cer_plane);
    cer->add_option("-o,--out", cer_out, "Grid CSV path");

    // analyze
    auto* ana = app.add_subcommand("analyze", "Existence-criterion report for an observation");
    std::string ana_rir, ana_scenario, ana_out = "existence.json";
    double ana_lambda = 3e-5, ana_calb = 0.0;
    ana->add_option("--rir", ana_rir, "ELRIR1 file")->required();
    ana->add_option("--scenario", ana_scenario, "Scenario JSON")->required();
    ana->add_option("--lambda", ana_lambda, "Regularization weight");
    ana->add_option("--c-alb", ana_calb, "Amplitude-lower-bound constant estimate");
    ana->add_option("-o,--out", ana_out, "Report JSON path");

    // evaluate
    auto* eva = app.add_subcommand("evaluate", "Match a recovery against ground truth");
    std::string eva_truth, eva_result, eva_scenario, eva_out = "match.json";
    double eva_fs = 24000.0, eva_tmax = 0.05, eva_eps = 0.01, eva_re = 0.01, eva_ae = 2.0;
    eva->add_option("--truth", eva_truth, "Source CSV")->required();
    eva->add_option("--result", eva_result, "Result JSON from solve")->required();
    eva->add_option("--scenario", eva_scenario, "Scenario JSON")->required();
    eva->add_option("--fs", eva_fs, "Sampling frequency, Hz");
    eva->add_option("--tmax", eva_tmax, "Signal duration used for the observable set");
    eva->add_option("--eps-excl", eva_eps, "Exclusion radius for the observable set, m");
    eva->add_option("--re-thresh", eva_re, "Radial threshold, m");
    eva->add_option("--ae-thresh", eva_ae, "Angular threshold, degrees");
    eva->add_option("-o,--out", eva_out, "Report JSON path");

    // bench
    auto* ben = app.add_subcommand("bench", "Randomized dataset sweep with aggregate tables");
    std::string ben_dataset, ben_config, ben_out = "bench";
    double ben_fs = 24000.0, ben_tmax = 0.05, ben_psnr = 0.0, ben_eps = 0.01;
    int ben_order = 20, ben_jobs = 1;
    ben->add_option("--dataset", ben_dataset, "Dataset spec JSON (defaults: 200 rooms)");
    ben->add_option("--fs", ben_fs, "Sampling frequency, Hz");
    ben->add_option("--tmax", ben_tmax, "Signal duration, seconds");
    ben->add_option("--max-order", ben_order, "Image source truncation order");
    auto* ben_psnr_opt = ben->add_option("--psnr", ben_psnr, "Add noise at this PSNR, dB");
    ben->add_option("--config", ben_config, "Solver config JSON");
    ben->add_option("--eps-excl", ben_eps, "Evaluation exclusion radius, m");
    ben->add_option("--jobs", ben_jobs, "Parallel scenario workers");
    ben->add_option("-o,--out", ben_out, "Output directory");

    try {
        app.parse(argc, argv);
    } catch (const CLI::CallForHelp& e) {
        return app.exit(e);
    } catch (const CLI::ParseError& e) {
        app.exit(e);
        return 2;
    }
    set_max_threads(threads);

    try {
        if (sim->parsed())
            return cmd_simulate(sim_scenario, sim_dataset, sim_index, sim_fs, sim_tmax,
                                sim_samples, sim_kernel, sim_order, sim_psnr,
                                sim_psnr_opt->count() > 0, sim_seed, sim_seed_opt->count() > 0,
                                sim_array, sim_out);
        if (sol->parsed())
            return cmd_solve(sol_rir, sol_scenario, sol_config, sol_lambda,
                             sol_lambda_opt->count() > 0, sol_out);
        if (cer->parsed())
            return cmd_certify(cer_truth, cer_scenario, cer_fs, cer_tmax, cer_kernel, cer_plane,
                               cer_out);
        if (ana->parsed()) return cmd_analyze(ana_rir, ana_scenario, ana_lambda, ana_calb, ana_out);
        if (eva->parsed())
            return cmd_evaluate(eva_truth, eva_result, eva_scenario, eva_fs, eva_tmax, eva_eps,
                                eva_re, eva_ae, eva_out);
        if (ben->parsed())
            return cmd_bench(ben_dataset, ben_fs, ben_tmax, ben_order, ben_psnr,
                             ben_psnr_opt->count() > 0, ben_config, ben_eps, ben_jobs, ben_out);
    } catch (const SingularityError& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 2;
    } catch (const InvalidInput& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 2;
    } catch (const DegenerateConfiguration& e) {
        std::cerr << "numerical failure: " << e.what() << "\n";
        return 3;
    } catch (const IoError& e) {
        std::cerr << "i/o error: " << e.what() << "\n";
        return 4;
    } catch (const std::exception& e) {
        std::cerr << "failure: " << e.what() << "\n";
        return 3;
    }
    return 0;
}
