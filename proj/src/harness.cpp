#include "pufsim/harness.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <stdexcept>

#include <json.hpp>

#include "pufsim/parallel.hpp"
#include "pufsim/sha256.hpp"

namespace pufsim::harness {

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

geom::ConstructionPlan make_plan(const ExperimentConfig& c, const char* label,
                                 uint64_t index) {
    return geom::generate_plan(derive_seed(c.master_seed, label, index),
                               c.plan.cube_edge_um, c.plan.n_rods, c.plan.rod_radius_um,
                               c.plan.n_rod, c.plan.n_background);
}

fab::VoxelVolume make_duplicate(const geom::ConstructionPlan& plan,
                                const ExperimentConfig& c, uint64_t index) {
    fab::FabricationNoise noise = c.noise;
    noise.noise_seed = derive_seed(c.master_seed, "dup-noise", index);
    return fab::fabricate(plan, noise, c.pitch());
}

optics::SpeckleImage plane_wave_image(const fab::VoxelVolume& vol,
                                      const optics::OpticsConfig& cfg) {
    optics::OpticsConfig local = cfg;
    local.pitch_um = vol.pitch_um;
    fab::VoxelVolume padded;
    const fab::VoxelVolume* use = &vol;
    if (cfg.grid_nx > vol.nx || cfg.grid_ny > vol.ny) {
        padded = fab::embed(vol, cfg.grid_nx, cfg.grid_ny, float(cfg.n_background));
        use = &padded;
    }
    optics::ComplexField in =
        optics::make_challenge_field(optics::Challenge::plane(), local);
    optics::ComplexField out = optics::propagate(in, *use, local);
    return optics::image_response(out, local);
}

// Tracks emitted files so a failed run leaves no partial outputs behind.
class FileSink {
public:
    explicit FileSink(std::string dir) : dir_(std::move(dir)) {
        fs::create_directories(dir_);
    }

    std::string path(const std::string& name) const { return dir_ + "/" + name; }

    void note(const std::string& name) { files_.push_back(name); }

    void write_text(const std::string& name, const std::string& text) {
        std::ofstream f(path(name), std::ios::binary);
        if (!f) throw std::runtime_error("cannot open " + path(name));
        f << text;
        if (!f) throw std::runtime_error("write failed: " + path(name));
        note(name);
    }

    const std::vector<std::string>& files() const { return files_; }

    void remove_all() {
        for (const std::string& name : files_) {
            std::error_code ec;
            fs::remove(path(name), ec);
        }
        files_.clear();
    }

private:
    std::string dir_;
    std::vector<std::string> files_;
};

}  // namespace

void ExperimentConfig::validate() const {
    if (batch_size < 2) throw std::invalid_argument("batch_size must be >= 2");
    if (max_shift < 0) throw std::invalid_argument("max_shift must be >= 0");
    if (protocol.k < 1 || protocol.scenario_runs < 1)
        throw std::invalid_argument("protocol counts must be positive");
    if (!(protocol.tau > 0) || !(protocol.tau < 0.5))
        throw std::invalid_argument("tau must lie in (0, 0.5)");
    protocol.codec.validate();
    gabor.validate();
    optics.validate();
    if (!(plan.cube_edge_um > 0) || plan.n_rods < 1 || !(plan.rod_radius_um > 0))
        throw std::invalid_argument("invalid plan parameters");
}

double ExperimentConfig::pitch() const {
    if (optics.pitch_um > 0) return optics.pitch_um;
    return plan.cube_edge_um / double(optics.grid_nx);
}

ExperimentConfig desk_defaults() {
    ExperimentConfig c;
    c.optics.grid_nx = c.optics.grid_ny = 128;
    c.optics.pitch_um = 15.0 / 128.0;
    c.optics.rotation_deg = 0.0;
    c.optics.crop_px = 120;
    c.batch_size = 16;
    c.noise.sigma_endpoint_um = 0.005;  // calibrated to the like-FHD target;
                                        // reproduce via `pufsim calibrate`
    return c;
}

ExperimentConfig full_defaults() {
    ExperimentConfig c = desk_defaults();
    c.full_scale = true;
    c.batch_size = 63;
    c.optics.grid_nx = c.optics.grid_ny = 256;
    c.optics.pitch_um = 0.1;
    c.optics.crop_px = 125;
    c.optics.rotation_deg = 10.0;
    return c;
}

ExperimentConfig scenario_defaults() {
    ExperimentConfig c;
    c.plan.n_rod = 1.2;  // keeps the per-slice phase step inside the
                         // thin-slice validity band at the coarser pitch
    c.optics.grid_nx = c.optics.grid_ny = 64;
    c.optics.pitch_um = 15.0 / 64.0;
    c.optics.rotation_deg = 0.0;
    c.optics.crop_px = 48;
    // Kernel scaled to the 48 px protocol crop: the desk-size kernel wastes
    // most of the small code on border effects and drags the unlike mean
    // toward the acceptance threshold.
    c.gabor = metrics::GaborParams{4.0, 0.0, 2.0, 9};
    c.batch_size = 8;
    c.noise.sigma_endpoint_um = 0.005;  // calibrated to the like-FHD target;
                                        // reproduce via `pufsim calibrate --scenario-scale`
    return c;
}

std::string config_to_json(const ExperimentConfig& c) {
    json j;
    j["master_seed"] = c.master_seed;
    j["batch_size"] = c.batch_size;
    j["full_scale"] = c.full_scale;
    j["damage"] = c.damage;
    j["plan"] = {{"cube_edge_um", c.plan.cube_edge_um},
                 {"n_rods", c.plan.n_rods},
                 {"rod_radius_um", c.plan.rod_radius_um},
                 {"n_rod", c.plan.n_rod},
                 {"n_background", c.plan.n_background}};
    j["noise"] = {{"sigma_endpoint_um", c.noise.sigma_endpoint_um},
                  {"sigma_radius_um", c.noise.sigma_radius_um},
                  {"sigma_index", c.noise.sigma_index}};
    j["optics"] = {{"wavelength_um", c.optics.wavelength_um},
                   {"na", c.optics.na},
                   {"mode_pitch_um", c.optics.mode_pitch_um},
                   {"grid_nx", c.optics.grid_nx},
                   {"grid_ny", c.optics.grid_ny},
                   {"pitch_um", c.optics.pitch_um},
                   {"n_background", c.optics.n_background},
                   {"rotation_deg", c.optics.rotation_deg},
                   {"crop_px", c.optics.crop_px}};
    j["gabor"] = {{"kernel_wavelength_px", c.gabor.kernel_wavelength_px},
                  {"orientation_rad", c.gabor.orientation_rad},
                  {"sigma_px", c.gabor.sigma_px},
                  {"kernel_size_px", c.gabor.kernel_size_px}};
    j["metrics"] = {{"max_shift", c.max_shift},
                    {"like_fhd_target", c.like_fhd_target},
                    {"calibration_sweep", c.calibration_sweep}};
    j["protocol"] = {{"k", c.protocol.k},
                     {"tau", c.protocol.tau},
                     {"rho", c.protocol.codec.rho},
                     {"key_bits", c.protocol.codec.key_bits},
                     {"margin_bits", c.protocol.codec.margin_bits},
                     {"feistel_rounds", c.protocol.feistel_rounds},
                     {"feistel_blocks_per_run", c.protocol.feistel_blocks_per_run},
                     {"ke_members", c.protocol.ke_members},
                     {"n_challenges", c.protocol.n_challenges},
                     {"mac_wrap", c.protocol.mac_wrap},
                     {"mac_k", c.protocol.mac_k},
                     {"scenario_runs", c.protocol.scenario_runs},
                     {"ot_bias_runs", c.protocol.ot_bias_runs}};
    return j.dump(2) + "\n";
}

ExperimentConfig config_from_json(const std::string& text, ExperimentConfig c) {
    json j = json::parse(text);
    c.master_seed = j.value("master_seed", c.master_seed);
    c.batch_size = j.value("batch_size", c.batch_size);
    c.full_scale = j.value("full_scale", c.full_scale);
    c.damage = j.value("damage", c.damage);
    if (j.contains("plan")) {
        const json& p = j["plan"];
        c.plan.cube_edge_um = p.value("cube_edge_um", c.plan.cube_edge_um);
        c.plan.n_rods = p.value("n_rods", c.plan.n_rods);
        c.plan.rod_radius_um = p.value("rod_radius_um", c.plan.rod_radius_um);
        c.plan.n_rod = p.value("n_rod", c.plan.n_rod);
        c.plan.n_background = p.value("n_background", c.plan.n_background);
    }
    if (j.contains("noise")) {
        const json& p = j["noise"];
        c.noise.sigma_endpoint_um = p.value("sigma_endpoint_um", c.noise.sigma_endpoint_um);
        c.noise.sigma_radius_um = p.value("sigma_radius_um", c.noise.sigma_radius_um);
        c.noise.sigma_index = p.value("sigma_index", c.noise.sigma_index);
    }
    if (j.contains("optics")) {
        const json& p = j["optics"];
        c.optics.wavelength_um = p.value("wavelength_um", c.optics.wavelength_um);
        c.optics.na = p.value("na", c.optics.na);
        c.optics.mode_pitch_um = p.value("mode_pitch_um", c.optics.mode_pitch_um);
        c.optics.grid_nx = p.value("grid_nx", c.optics.grid_nx);
        c.optics.grid_ny = p.value("grid_ny", c.optics.grid_ny);
        c.optics.pitch_um = p.value("pitch_um", c.optics.pitch_um);
        c.optics.n_background = p.value("n_background", c.optics.n_background);
        c.optics.rotation_deg = p.value("rotation_deg", c.optics.rotation_deg);
        c.optics.crop_px = p.value("crop_px", c.optics.crop_px);
    }
    if (j.contains("gabor")) {
        const json& p = j["gabor"];
        c.gabor.kernel_wavelength_px = p.value("kernel_wavelength_px", c.gabor.kernel_wavelength_px);
        c.gabor.orientation_rad = p.value("orientation_rad", c.gabor.orientation_rad);
        c.gabor.sigma_px = p.value("sigma_px", c.gabor.sigma_px);
        c.gabor.kernel_size_px = p.value("kernel_size_px", c.gabor.kernel_size_px);
    }
    if (j.contains("metrics")) {
        const json& p = j["metrics"];
        c.max_shift = p.value("max_shift", c.max_shift);
        c.like_fhd_target = p.value("like_fhd_target", c.like_fhd_target);
        if (p.contains("calibration_sweep"))
            c.calibration_sweep = p["calibration_sweep"].get<std::vector<double>>();
    }
    if (j.contains("protocol")) {
        const json& p = j["protocol"];
        c.protocol.k = p.value("k", c.protocol.k);
        c.protocol.tau = p.value("tau", c.protocol.tau);
        c.protocol.codec.rho = p.value("rho", c.protocol.codec.rho);
        c.protocol.codec.key_bits = p.value("key_bits", c.protocol.codec.key_bits);
        c.protocol.codec.margin_bits = p.value("margin_bits", c.protocol.codec.margin_bits);
        c.protocol.feistel_rounds = p.value("feistel_rounds", c.protocol.feistel_rounds);
        c.protocol.feistel_blocks_per_run =
            p.value("feistel_blocks_per_run", c.protocol.feistel_blocks_per_run);
        c.protocol.ke_members = p.value("ke_members", c.protocol.ke_members);
        c.protocol.n_challenges = p.value("n_challenges", c.protocol.n_challenges);
        c.protocol.mac_wrap = p.value("mac_wrap", c.protocol.mac_wrap);
        c.protocol.mac_k = p.value("mac_k", c.protocol.mac_k);
        c.protocol.scenario_runs = p.value("scenario_runs", c.protocol.scenario_runs);
        c.protocol.ot_bias_runs = p.value("ot_bias_runs", c.protocol.ot_bias_runs);
    }
    return c;
}

ExperimentConfig load_config(const std::string& path, ExperimentConfig base) {
    std::ifstream f(path, std::ios::binary);
    if (!f) throw std::runtime_error("cannot open config " + path);
    std::string text((std::istreambuf_iterator<char>(f)), std::istreambuf_iterator<char>());
    return config_from_json(text, std::move(base));
}

RunReport run_duplicate_batch(const ExperimentConfig& config, const std::string& out_dir) {
    config.validate();
    FileSink sink(out_dir);
    try {
        geom::ConstructionPlan plan = make_plan(config, "plan", 0);
        sink.write_text("plan.json", geom::plan_to_json(plan));

        const int n = config.batch_size;
        std::vector<optics::SpeckleImage> dup_images(n), unrel_images(n);
        parallel_for(size_t(n), [&](size_t i) {
            fab::VoxelVolume vol = make_duplicate(plan, config, i);
            dup_images[i] = plane_wave_image(vol, config.optics);
        });
        parallel_for(size_t(n), [&](size_t i) {
            geom::ConstructionPlan other = make_plan(config, "unrelated", i + 1);
            fab::VoxelVolume vol = fab::voxelize(other, config.pitch());
            unrel_images[i] = plane_wave_image(vol, config.optics);
        });

        auto matrix = metrics::correlation_matrix(dup_images, config.max_shift);
        metrics::write_correlation_matrix_csv(matrix, sink.path("correlation_matrix.csv"));
        sink.note("correlation_matrix.csv");

        std::vector<double> offdiag;
        std::vector<std::pair<std::string, double>> pearson_rows;
        for (int i = 0; i < n; ++i) {
            for (int j = i + 1; j < n; ++j) {
                offdiag.push_back(matrix[i][j]);
                pearson_rows.emplace_back("pearson", matrix[i][j]);
            }
        }
        metrics::write_samples_csv(pearson_rows, sink.path("pearson_samples.csv"));
        sink.note("pearson_samples.csv");
        std::vector<double> kde_input = offdiag;
        if (kde_input.size() == 1) kde_input.push_back(kde_input[0]);
        metrics::write_kde_csv(metrics::kde(kde_input), sink.path("pearson_kde.csv"));
        sink.note("pearson_kde.csv");

        std::vector<metrics::GaborCode> like_codes(n), unlike_codes(n);
        parallel_for(size_t(n), [&](size_t i) {
            like_codes[i] = metrics::gabor_digitize(dup_images[i], config.gabor);
            unlike_codes[i] = metrics::gabor_digitize(unrel_images[i], config.gabor);
        });
        metrics::LikeUnlike lu = metrics::like_unlike(like_codes, unlike_codes);
        std::vector<std::pair<std::string, double>> fhd_rows;
        for (double v : lu.like.samples) fhd_rows.emplace_back("like", v);
        for (double v : lu.unlike.samples) fhd_rows.emplace_back("unlike", v);
        metrics::write_samples_csv(fhd_rows, sink.path("fhd_samples.csv"));
        sink.note("fhd_samples.csv");
        metrics::write_kde_csv(lu.like.kde, sink.path("like_kde.csv"));
        sink.note("like_kde.csv");
        metrics::write_kde_csv(lu.unlike.kde, sink.path("unlike_kde.csv"));
        sink.note("unlike_kde.csv");

        RunReport rep;
        rep.out_dir = out_dir;
        rep.best_pair = metrics::best_pair(matrix);
        double acc = 0;
        for (double v : offdiag) acc += v;
        rep.pearson_offdiag_mean = offdiag.empty() ? 0 : acc / double(offdiag.size());
        rep.like_mean = lu.like.mean;
        rep.unlike_mean = lu.unlike.mean;
        rep.threshold = lu.threshold;
        rep.overlap_fraction = lu.overlap_fraction;
        rep.distributions_disjoint = lu.disjoint;

        json j;
        j["artifact_version"] = kArtifactVersion;
        j["config"] = json::parse(config_to_json(config));
        j["plan_seed"] = plan.seed;
        j["best_pair"] = {{"i", rep.best_pair.i}, {"j", rep.best_pair.j},
                          {"r", rep.best_pair.r}};
        j["pearson_offdiag_mean"] = rep.pearson_offdiag_mean;
        j["like_mean"] = rep.like_mean;
        j["unlike_mean"] = rep.unlike_mean;
        j["threshold"] = rep.threshold;
        j["overlap_fraction"] = rep.overlap_fraction;
        j["distributions_disjoint"] = rep.distributions_disjoint;
        json files = json::array();
        for (const std::string& f : sink.files()) files.push_back(f);
        files.push_back("report.json");
        j["files"] = files;
        sink.write_text("report.json", j.dump(2) + "\n");

        rep.files = sink.files();
        return rep;
    } catch (...) {
        sink.remove_all();
        throw;
    }
}

CalibrationResult calibrate_noise(const ExperimentConfig& config, double target_like_fhd,
                                  const std::vector<double>& sweep) {
    config.validate();
    if (sweep.empty()) throw std::invalid_argument("calibrate_noise: sweep grid is empty");

    geom::ConstructionPlan plan = make_plan(config, "plan", 0);
    const int sub = std::max(3, std::min(4, config.batch_size));

    CalibrationResult res;
    res.table.resize(sweep.size());
    parallel_for(sweep.size(), [&](size_t s) {
        ExperimentConfig local = config;
        local.noise.sigma_endpoint_um = sweep[s];
        std::vector<metrics::GaborCode> codes(sub);
        for (int i = 0; i < sub; ++i) {
            fab::VoxelVolume vol = make_duplicate(plan, local, uint64_t(i));
            codes[i] = metrics::gabor_digitize(plane_wave_image(vol, local.optics),
                                               local.gabor);
        }
        double acc = 0;
        int pairs = 0;
        for (int i = 0; i < sub; ++i)
            for (int j = i + 1; j < sub; ++j, ++pairs)
                acc += metrics::fhd(codes[i], codes[j]);
        res.table[s] = {sweep[s], acc / double(pairs)};
    });

    size_t best = 0;
    for (size_t s = 1; s < res.table.size(); ++s) {
        if (std::abs(res.table[s].mean_like_fhd - target_like_fhd) <
            std::abs(res.table[best].mean_like_fhd - target_like_fhd))
            best = s;
    }
    res.chosen_sigma = res.table[best].sigma_endpoint_um;
    res.achieved_fhd = res.table[best].mean_like_fhd;

    double lo = res.table[0].mean_like_fhd, hi = res.table[0].mean_like_fhd;
    for (const CalibrationPoint& p : res.table) {
        lo = std::min(lo, p.mean_like_fhd);
        hi = std::max(hi, p.mean_like_fhd);
    }
    res.target_reachable = target_like_fhd >= lo && target_like_fhd <= hi;

    // Piecewise-linear inverse of the (sigma -> FHD) table where it brackets
    // the target.
    for (size_t s = 0; s + 1 < res.table.size(); ++s) {
        double a = res.table[s].mean_like_fhd, b = res.table[s + 1].mean_like_fhd;
        if ((a <= target_like_fhd && target_like_fhd <= b) ||
            (b <= target_like_fhd && target_like_fhd <= a)) {
            double t = (a == b) ? 0.5 : (target_like_fhd - a) / (b - a);
            res.interpolated_sigma = res.table[s].sigma_endpoint_um +
                                     t * (res.table[s + 1].sigma_endpoint_um -
                                          res.table[s].sigma_endpoint_um);
            break;
        }
    }
    return res;
}

ScenarioCast make_scenario_cast(const ExperimentConfig& config) {
    config.validate();
    geom::ConstructionPlan plan = make_plan(config, "plan", 0);

    int n_members = std::max(2, config.protocol.ke_members);
    ScenarioCast cast{
        proto::PufDevice::make(make_duplicate(plan, config, 0), config.optics),
        proto::PufDevice::make(make_duplicate(plan, config, 1), config.optics),
        {},
        proto::PufDevice::make(
            fab::voxelize(make_plan(config, "unrelated", 1), config.pitch()),
            config.optics),
        proto::PufDevice(),
    };
    cast.members.reserve(n_members);
    cast.members.push_back(cast.duplicate_a);
    cast.members.push_back(cast.duplicate_b);
    for (int i = 2; i < n_members; ++i)
        cast.members.push_back(
            proto::PufDevice::make(make_duplicate(plan, config, uint64_t(i)), config.optics));

    // Damaged label: the same plan with half the rods dropped (deterministic
    // pick), then fabricated like any duplicate.
    geom::ConstructionPlan damaged = plan;
    uint64_t dmg_seed = derive_seed(config.master_seed, "damage", 0);
    std::vector<std::pair<uint64_t, size_t>> order(plan.chords.size());
    for (size_t i = 0; i < plan.chords.size(); ++i)
        order[i] = {mix64(dmg_seed ^ uint64_t(i)), i};
    std::sort(order.begin(), order.end());
    damaged.chords.clear();
    for (size_t i = 0; i < order.size() / 2; ++i)
        damaged.chords.push_back(plan.chords[order[i].second]);
    std::stable_sort(damaged.chords.begin(), damaged.chords.end(),
                     [](const geom::Chord& a, const geom::Chord& b) {
                         return a.min_z() < b.min_z();
                     });
    damaged.n_rods = int(damaged.chords.size());
    ExperimentConfig dmg_cfg = config;
    cast.damaged = proto::PufDevice::make(make_duplicate(damaged, dmg_cfg, 77), config.optics);
    return cast;
}

const std::vector<std::string>& scenario_names() {
    static const std::vector<std::string> names = {
        "group-id", "mac", "group-ke", "ke-attack", "feistel", "ot", "ot-attack", "tag"};
    return names;
}

namespace {

struct RunOutcome {
    bool success = true;
    std::vector<std::pair<std::string, bool>> cases;
    std::string transcript_text;

    void check(const std::string& name, bool ok) {
        cases.emplace_back(name, ok);
        success = success && ok;
    }
};

std::vector<uint8_t> random_bytes(CounterRng& rng, size_t n) {
    std::vector<uint8_t> b(n);
    for (uint8_t& v : b) v = uint8_t(rng.next_u64());
    return b;
}

RunOutcome scenario_run(const std::string& name, const ExperimentConfig& config,
                        const ScenarioCast& cast, uint64_t run_index) {
    const ProtocolConfig& pc = config.protocol;
    CounterRng rng(derive_seed(config.master_seed, "scenario:" + name, run_index));
    RunOutcome out;

    auto verifier = proto::make_party("verifier", proto::Role::verifier,
                                      proto::Capability::none, cast.duplicate_a);
    auto prover = proto::make_party("prover", proto::Role::prover,
                                    proto::Capability::none, cast.duplicate_b);
    auto impostor = proto::make_party("impostor", proto::Role::prover,
                                      proto::Capability::none, cast.impostor);

    if (name == "group-id") {
        proto::IdentifyResult honest =
            proto::group_identify(verifier, prover, pc.k, pc.tau, rng, config.gabor);
        out.check("honest_accept", honest.accepted);
        proto::IdentifyResult fake =
            proto::group_identify(verifier, impostor, pc.k, pc.tau, rng, config.gabor);
        out.check("impostor_reject", !fake.accepted);
        out.transcript_text = honest.transcript.to_text() + fake.transcript.to_text();
    } else if (name == "mac") {
        std::vector<uint8_t> message = random_bytes(rng, 32);
        proto::MacResult honest = proto::message_authenticate(
            verifier, prover, message, pc.k, pc.tau, rng, config.gabor);
        out.check("honest_accept", honest.accepted);

        // Same tag, message corrupted in transit.
        proto::MacTag tag = proto::mac_tag(cast.duplicate_a, message, pc.k, rng, config.gabor);
        std::vector<uint8_t> corrupted = message;
        size_t pos = size_t(rng.next_u64() % corrupted.size());
        corrupted[pos] ^= uint8_t(1 + (rng.next_u64() % 255));
        out.check("corruption_reject",
                  !proto::mac_verify(cast.duplicate_b, corrupted, tag, pc.tau, config.gabor));

        // Forgery without a duplicate: random codes of the right shape.
        proto::MacTag forged;
        forged.nonce = rng.next_u64();
        int crop = config.optics.crop_px;
        for (int i = 0; i < pc.k; ++i) {
            metrics::GaborCode c;
            c.width = c.height = crop;
            c.bits.resize(size_t(crop) * crop);
            for (uint8_t& b : c.bits) b = uint8_t(rng.next_u64() & 1);
            forged.codes.push_back(std::move(c));
        }
        out.check("forgery_reject",
                  !proto::mac_verify(cast.duplicate_b, message, forged, pc.tau, config.gabor));
        out.transcript_text = honest.transcript.to_text();
    } else if (name == "group-ke") {
        std::vector<proto::Party> members;
        for (size_t i = 0; i < cast.members.size(); ++i)
            members.push_back(proto::make_party("member" + std::to_string(i),
                                                proto::Role::member,
                                                proto::Capability::none, cast.members[i]));
        proto::KeyExchangeResult honest =
            proto::group_key_exchange(members, pc.n_challenges, pc.codec, rng,
                                      config.gabor, pc.mac_wrap, pc.mac_k, pc.tau);
        out.check("all_keys_equal", honest.all_equal);

        std::vector<proto::Party> with_outsider = {members[0], members[1],
                                                   proto::make_party("outsider",
                                                                     proto::Role::member,
                                                                     proto::Capability::none,
                                                                     cast.impostor)};
        proto::KeyExchangeResult mixed = proto::group_key_exchange(
            with_outsider, pc.n_challenges, pc.codec, rng, config.gabor, false, pc.mac_k, pc.tau);
        out.check("outsider_key_differs",
                  mixed.keys[2] != mixed.keys[0] && mixed.keys[1] == mixed.keys[0]);
        out.transcript_text = honest.transcript.to_text();
    } else if (name == "ke-attack") {
        std::vector<proto::Party> members = {
            proto::make_party("member0", proto::Role::member, proto::Capability::none,
                              cast.duplicate_a),
            proto::make_party("member1", proto::Role::member, proto::Capability::none,
                              cast.duplicate_b)};
        proto::KeyExchangeResult ke = proto::group_key_exchange(
            members, pc.n_challenges, pc.codec, rng, config.gabor, false, pc.mac_k, pc.tau);
        out.check("honest_keys_equal", ke.all_equal);

        auto dup_adversary = proto::make_party(
            "adversary", proto::Role::adversary,
            proto::Capability::transcript_tap_plus_duplicate,
            cast.members.size() > 2 ? cast.members[2] : cast.duplicate_b);
        proto::StableKey stolen =
            proto::ke_duplicate_attack(ke.transcript, dup_adversary, config.gabor);
        out.check("duplicate_adversary_recovers_key", stolen == ke.keys[0]);

        auto weak_adversary = proto::make_party("outsider", proto::Role::adversary,
                                                proto::Capability::transcript_tap,
                                                cast.impostor);
        proto::StableKey guess =
            proto::ke_duplicate_attack(ke.transcript, weak_adversary, config.gabor);
        out.check("unrelated_adversary_fails", guess != ke.keys[0]);
        out.transcript_text = ke.transcript.to_text();
    } else if (name == "feistel") {
        bool all_blocks = true;
        for (int b = 0; b < pc.feistel_blocks_per_run; ++b) {
            uint64_t left = rng.next_u64(), right = rng.next_u64();
            proto::FeistelCiphertext ct = proto::feistel_encrypt(
                left, right, pc.feistel_rounds, cast.duplicate_a, pc.codec, rng, config.gabor);
            auto [dl, dr] = proto::feistel_decrypt(ct, cast.duplicate_b, config.gabor);
            all_blocks = all_blocks && dl == left && dr == right;
        }
        out.check("cross_device_roundtrip", all_blocks);

        // Corrupt one whole repetition block of one round helper: flips one
        // reconstructed message bit, so the round key changes.
        uint64_t left = rng.next_u64(), right = rng.next_u64();
        proto::FeistelCiphertext ct = proto::feistel_encrypt(
            left, right, pc.feistel_rounds, cast.duplicate_a, pc.codec, rng, config.gabor);
        codec::HelperData& h = ct.round_helpers[0];
        int block = int(rng.next_u64() % uint64_t(h.n_blocks));
        for (int t = 0; t < h.rho; ++t)
            h.offset[size_t(block) + size_t(t) * h.n_blocks] ^= 1;
        auto [dl, dr] = proto::feistel_decrypt(ct, cast.duplicate_b, config.gabor);
        out.check("helper_corruption_breaks_decrypt", !(dl == left && dr == right));
    } else if (name == "ot") {
        auto sender = proto::make_party("sender", proto::Role::sender,
                                        proto::Capability::none, cast.duplicate_a);
        auto receiver = proto::make_party("receiver", proto::Role::receiver,
                                          proto::Capability::none, cast.duplicate_b);
        size_t len = size_t(pc.codec.key_bits) / 8;
        std::array<std::vector<uint8_t>, 2> msgs = {random_bytes(rng, len),
                                                    random_bytes(rng, len)};
        int b = int(rng.next_u64() & 1);
        proto::OtRunResult res =
            proto::ot_run(sender, receiver, msgs, b, false, pc.codec, rng, config.gabor);
        out.check("received_chosen_message", res.received == msgs[b]);
        out.check("single_ledger_query", res.receiver_ledger.size() == 1);
        out.transcript_text = res.transcript.to_text();
    } else if (name == "ot-attack") {
        auto sender = proto::make_party("sender", proto::Role::sender,
                                        proto::Capability::transcript_tap_plus_duplicate,
                                        cast.duplicate_a);
        auto receiver = proto::make_party("receiver", proto::Role::receiver,
                                          proto::Capability::none, cast.duplicate_b);
        size_t len = size_t(pc.codec.key_bits) / 8;
        std::array<std::vector<uint8_t>, 2> msgs = {random_bytes(rng, len),
                                                    random_bytes(rng, len)};
        int b = int(rng.next_u64() & 1);
        proto::OtRunResult res =
            proto::ot_run(sender, receiver, msgs, b, true, pc.codec, rng, config.gabor);
        proto::OtAttackReport attack =
            proto::ot_duplicate_attack(res.transcript, cast.duplicate_a, config.gabor);
        out.check("choice_bit_recovered", attack.conclusive && attack.recovered_choice == b);
        out.check("both_messages_recovered",
                  attack.recovered_messages[0] == msgs[0] &&
                      attack.recovered_messages[1] == msgs[1]);

        proto::OtAttackReport blind =
            proto::ot_duplicate_attack(res.transcript, cast.impostor, config.gabor);
        out.check("unrelated_structure_inconclusive", !blind.conclusive);
        out.transcript_text = res.transcript.to_text();
    } else if (name == "tag") {
        auto reference = proto::make_party("reference", proto::Role::verifier,
                                           proto::Capability::none, cast.duplicate_a);
        auto label = proto::make_party("label", proto::Role::prover,
                                       proto::Capability::none, cast.duplicate_b);
        proto::TagVerifyResult genuine =
            proto::tag_verify(reference, label, pc.k, pc.tau, rng, config.gabor);
        out.check("genuine_label", genuine.genuine);
        proto::TagVerifyResult fake =
            proto::tag_verify(reference, impostor, pc.k, pc.tau, rng, config.gabor);
        out.check("counterfeit_reject", !fake.genuine);
        if (config.damage) {
            auto damaged = proto::make_party("damaged", proto::Role::prover,
                                             proto::Capability::none, cast.damaged);
            proto::TagVerifyResult dmg =
                proto::tag_verify(reference, damaged, pc.k, pc.tau, rng, config.gabor);
            out.check("damaged_reject", !dmg.genuine);
        }
        out.transcript_text = genuine.transcript.to_text();
    } else {
        throw std::invalid_argument("unknown scenario: " + name);
    }
    return out;
}

}  // namespace

ScenarioResult run_scenario(const std::string& name, const ExperimentConfig& config,
                            const std::string& out_dir) {
    const auto& names = scenario_names();
    if (std::find(names.begin(), names.end(), name) == names.end())
        throw std::invalid_argument("unknown scenario: " + name);
    config.validate();

    ScenarioCast cast = make_scenario_cast(config);
    const int runs = config.protocol.scenario_runs;
    std::vector<RunOutcome> outcomes(runs);
    parallel_for(size_t(runs), [&](size_t r) {
        outcomes[r] = scenario_run(name, config, cast, uint64_t(r));
    });

    ScenarioResult res;
    res.name = name;
    res.runs = runs;
    for (const RunOutcome& o : outcomes) {
        if (o.success) ++res.successes;
        else ++res.failures;
        for (const auto& [case_name, ok] : o.cases)
            if (ok) ++res.counters[case_name];
    }

    if (!out_dir.empty()) {
        FileSink sink(out_dir);
        try {
            std::string csv = "run,case,outcome\n";
            for (int r = 0; r < runs; ++r)
                for (const auto& [case_name, ok] : outcomes[r].cases)
                    csv += std::to_string(r) + "," + case_name + "," + (ok ? "ok" : "fail") + "\n";
            sink.write_text("outcomes.csv", csv);

            fs::create_directories(out_dir + "/transcripts");
            for (int r = 0; r < runs; ++r) {
                if (outcomes[r].transcript_text.empty()) continue;
                std::string fname = "transcripts/" + name + "_run" +
                                    std::to_string(r) + ".txt";
                sink.write_text(fname, outcomes[r].transcript_text);
                res.transcript_files.push_back(fname);
            }

            json j;
            j["artifact_version"] = kArtifactVersion;
            j["config"] = json::parse(config_to_json(config));
            j["scenario"] = name;
            j["runs"] = res.runs;
            j["successes"] = res.successes;
            j["failures"] = res.failures;
            j["counters"] = res.counters;
            json files = json::array();
            for (const std::string& f : sink.files()) files.push_back(f);
            files.push_back("report.json");
            j["files"] = files;
            sink.write_text("report.json", j.dump(2) + "\n");
        } catch (...) {
            sink.remove_all();
            throw;
        }
    }
    return res;
}

std::string read_report(const std::string& out_dir) {
    std::ifstream f(out_dir + "/report.json", std::ios::binary);
    if (!f) throw std::runtime_error("no report.json in " + out_dir);
    std::string text((std::istreambuf_iterator<char>(f)), std::istreambuf_iterator<char>());
    json j = json::parse(text);
    for (const auto& name : j.at("files")) {
        fs::path p = fs::path(out_dir) / name.get<std::string>();
        if (!fs::exists(p))
            throw std::runtime_error("report references missing file: " + p.string());
    }
    return text;
}

}  // namespace pufsim::harness
