// Command-line front end: plan generation, fabrication, scattering,
// metrics on speckle images, duplicate batches, noise calibration, protocol
// scenarios, and report inspection.

#include <cstdio>
#include <filesystem>
#include <stdexcept>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "pufsim/harness.hpp"

namespace fs = std::filesystem;
using namespace pufsim;

namespace {

harness::ExperimentConfig resolve_config(const std::string& config_path, bool full,
                                         bool scenario_scale, uint64_t seed,
                                         bool seed_given, bool damage) {
    harness::ExperimentConfig base = full ? harness::full_defaults()
                                   : scenario_scale ? harness::scenario_defaults()
                                                    : harness::desk_defaults();
    if (!config_path.empty()) base = harness::load_config(config_path, base);
    if (seed_given) base.master_seed = seed;
    if (damage) base.damage = true;
    return base;
}

int run_cli(int argc, char** argv) {
    CLI::App app{"Optical PUF duplicate simulation and protocol toolkit"};
    app.require_subcommand(1);

    std::string config_path, out_dir = "out";
    uint64_t seed = 1;
    bool full = false, damage = false, scenario_scale = false;
    app.add_option("--config", config_path, "JSON config file (overrides defaults)");
    app.add_option("--out", out_dir, "output directory");
    auto* seed_opt = app.add_option("--seed", seed, "master seed");
    app.add_flag("--full", full, "full-scale settings (256^2 grid, batch 63)");
    app.add_flag("--scenario-scale", scenario_scale,
                 "protocol-scenario settings (64^2 grid, reduced contrast)");
    app.add_flag("--damage", damage, "include the damaged-label case in the tag scenario");

    auto* plan_cmd = app.add_subcommand("plan", "generate a construction plan file");
    std::string plan_out = "plan.json";
    plan_cmd->add_option("--plan-out", plan_out, "plan file path");

    auto* fab_cmd = app.add_subcommand("fabricate", "voxelize a plan into a PUFV volume");
    std::string fab_plan, fab_out = "puf.pufv";
    double sigma_endpoint = -1;
    fab_cmd->add_option("--plan", fab_plan, "plan JSON path")->required();
    fab_cmd->add_option("--volume-out", fab_out, "PUFV output path");
    fab_cmd->add_option("--sigma-endpoint", sigma_endpoint,
                        "endpoint jitter sigma in um (default: config value)");
    uint64_t noise_seed = 0;
    fab_cmd->add_option("--noise-seed", noise_seed, "fabrication noise seed");

    auto* scatter_cmd =
        app.add_subcommand("scatter", "propagate a challenge and emit field + image");
    std::string scatter_vol;
    uint64_t challenge_seed = 0;
    bool plane = false;
    scatter_cmd->add_option("--volume", scatter_vol, "PUFV volume path")->required();
    scatter_cmd->add_option("--challenge-seed", challenge_seed, "random-phase challenge seed");
    scatter_cmd->add_flag("--plane-wave", plane, "use a normal plane wave instead");

    auto* metrics_cmd =
        app.add_subcommand("metrics", "pairwise metrics over PGM speckle images");
    std::vector<std::string> image_paths;
    metrics_cmd->add_option("--images", image_paths, "16-bit PGM images (>= 2)")
        ->required()
        ->expected(-2);

    auto* batch_cmd = app.add_subcommand("batch", "run a duplicate batch experiment");

    auto* cal_cmd = app.add_subcommand("calibrate", "sweep noise against a like-FHD target");
    double target = 0.1;
    cal_cmd->add_option("--target", target, "target mean like-FHD");

    auto* scn_cmd = app.add_subcommand("scenario", "run a named protocol scenario");
    std::string scenario;
    int runs = -1;
    scn_cmd->add_option("name", scenario, "one of: group-id mac group-ke ke-attack feistel ot ot-attack tag")
        ->required();
    scn_cmd->add_option("--runs", runs, "number of seeded repetitions");

    auto* report_cmd = app.add_subcommand("report", "validate and print a run report");

    for (CLI::App* sub : app.get_subcommands({})) sub->fallthrough();
    CLI11_PARSE(app, argc, argv);

    harness::ExperimentConfig cfg = resolve_config(
        config_path, full, scenario_scale || scn_cmd->parsed(), seed,
        seed_opt->count() > 0, damage);

    if (plan_cmd->parsed()) {
        geom::ConstructionPlan p = geom::generate_plan(
            derive_seed(cfg.master_seed, "plan", 0), cfg.plan.cube_edge_um, cfg.plan.n_rods,
            cfg.plan.rod_radius_um, cfg.plan.n_rod, cfg.plan.n_background);
        geom::save_plan(p, plan_out);
        std::printf("plan: %d rods, cube %g um, seed %llu -> %s\n", p.n_rods,
                    p.cube_edge_um, (unsigned long long)p.seed, plan_out.c_str());
    } else if (fab_cmd->parsed()) {
        geom::ConstructionPlan p = geom::load_plan(fab_plan);
        fab::FabricationNoise noise = cfg.noise;
        if (sigma_endpoint >= 0) noise.sigma_endpoint_um = sigma_endpoint;
        noise.noise_seed = noise_seed;
        fab::VoxelVolume vol = fab::fabricate(p, noise, cfg.pitch());
        fab::save_pufv(vol, fab_out);
        std::printf("volume: %dx%dx%d at %.6g um -> %s\n", vol.nx, vol.ny, vol.nz,
                    vol.pitch_um, fab_out.c_str());
    } else if (scatter_cmd->parsed()) {
        fab::VoxelVolume vol = fab::load_pufv(scatter_vol);
        optics::OpticsConfig oc = cfg.optics;
        oc.pitch_um = vol.pitch_um;
        if (oc.grid_nx > vol.nx || oc.grid_ny > vol.ny)
            vol = fab::embed(vol, oc.grid_nx, oc.grid_ny, float(oc.n_background));
        optics::Challenge ch = plane ? optics::Challenge::plane()
                                     : optics::Challenge::random(challenge_seed);
        optics::ComplexField in = optics::make_challenge_field(ch, oc);
        optics::ComplexField out = optics::propagate(in, vol, oc);
        optics::SpeckleImage img = optics::image_response(out, oc);
        fs::create_directories(out_dir);
        optics::save_puff(out, out_dir + "/exit_field.puff");
        optics::save_pgm16(img, out_dir + "/speckle.pgm");
        std::printf("scatter: field -> %s/exit_field.puff, image -> %s/speckle.pgm\n",
                    out_dir.c_str(), out_dir.c_str());
    } else if (metrics_cmd->parsed()) {
        std::vector<optics::SpeckleImage> images;
        for (const std::string& path : image_paths)
            images.push_back(optics::load_pgm16(path));
        auto matrix = metrics::correlation_matrix(images, cfg.max_shift);
        fs::create_directories(out_dir);
        metrics::write_correlation_matrix_csv(matrix, out_dir + "/correlation_matrix.csv");
        std::vector<metrics::GaborCode> codes;
        for (const auto& img : images)
            codes.push_back(metrics::gabor_digitize(img, cfg.gabor));
        std::vector<std::pair<std::string, double>> rows;
        for (size_t i = 0; i < codes.size(); ++i)
            for (size_t j = i + 1; j < codes.size(); ++j)
                rows.emplace_back("fhd", metrics::fhd(codes[i], codes[j]));
        metrics::write_samples_csv(rows, out_dir + "/fhd_samples.csv");
        std::printf("metrics: %zu images -> %s/{correlation_matrix,fhd_samples}.csv\n",
                    images.size(), out_dir.c_str());
    } else if (batch_cmd->parsed()) {
        harness::RunReport rep = harness::run_duplicate_batch(cfg, out_dir);
        std::printf("batch: %d duplicates, best pair (%d,%d) r=%.4f, like %.4f / unlike %.4f,"
                    " threshold %.4f -> %s\n",
                    cfg.batch_size, rep.best_pair.i, rep.best_pair.j, rep.best_pair.r,
                    rep.like_mean, rep.unlike_mean, rep.threshold, out_dir.c_str());
    } else if (cal_cmd->parsed()) {
        harness::CalibrationResult cal =
            harness::calibrate_noise(cfg, target, cfg.calibration_sweep);
        for (const auto& p : cal.table)
            std::printf("  sigma %.5g um -> mean like-FHD %.4f\n", p.sigma_endpoint_um,
                        p.mean_like_fhd);
        std::printf("calibrate: target %.3f -> sigma %.5g um (achieved %.4f)%s\n", target,
                    cal.chosen_sigma, cal.achieved_fhd,
                    cal.target_reachable ? "" : " [target unreachable in swept range]");
    } else if (scn_cmd->parsed()) {
        if (runs > 0) cfg.protocol.scenario_runs = runs;
        harness::ScenarioResult res = harness::run_scenario(scenario, cfg, out_dir);
        std::printf("scenario %s: %d/%d runs succeeded\n", res.name.c_str(), res.successes,
                    res.runs);
        for (const auto& [case_name, count] : res.counters)
            std::printf("  %-32s %d/%d\n", case_name.c_str(), count, res.runs);
        if (res.failures > 0) return 1;
    } else if (report_cmd->parsed()) {
        std::string text = harness::read_report(out_dir);
        std::printf("%s", text.c_str());
    }
    return 0;
}

}  // namespace

int main(int argc, char** argv) {
    try {
        return run_cli(argc, argv);
    } catch (const std::invalid_argument& e) {
        std::fprintf(stderr, "error: %s\n", e.what());
        return 1;
    } catch (const std::exception& e) {
        std::fprintf(stderr, "internal error: %s\n", e.what());
        return 2;
    }
}
