#ifndef PUFSIM_HARNESS_HPP
#define PUFSIM_HARNESS_HPP

#include <map>
#include <optional>
#include <string>
#include <vector>

#include "pufsim/codec.hpp"
#include "pufsim/metrics.hpp"
#include "pufsim/protocols.hpp"

namespace pufsim::harness {

inline constexpr const char* kArtifactVersion = "pufsim 1.0.0";

struct PlanConfig {
    double cube_edge_um = 15.0;
    int n_rods = 2000;
    double rod_radius_um = 0.25;
    double n_rod = 1.51;
    double n_background = 1.0;
};

struct ProtocolConfig {
    int k = 3;                      // challenges per identification/tag round
    double tau = 0.4;               // FHD acceptance threshold
    codec::CodecParams codec{31, 64, 0};
    int feistel_rounds = 4;
    int feistel_blocks_per_run = 10;
    int ke_members = 5;
    int n_challenges = 1;
    bool mac_wrap = true;
    int mac_k = 2;
    int scenario_runs = 100;
    int ot_bias_runs = 1000;        // mask-key bit-bias sample size
};

struct ExperimentConfig {
    uint64_t master_seed = 1;
    int batch_size = 16;
    bool full_scale = false;
    bool damage = false;
    PlanConfig plan;
    fab::FabricationNoise noise;
    optics::OpticsConfig optics;
    metrics::GaborParams gabor;
    int max_shift = 10;
    double like_fhd_target = 0.1;
    std::vector<double> calibration_sweep = {0.0,   0.002, 0.005, 0.01,
                                             0.02,  0.04,  0.08};
    ProtocolConfig protocol;

    void validate() const;
    // Voxel/transverse sampling: explicit optics pitch if set, else
    // cube_edge / grid_nx.
    double pitch() const;
};

// Desk-scale defaults: 128^2 grid over the 15 um cube, batch 16.
ExperimentConfig desk_defaults();
// Full-scale: 256^2 grid at 0.1 um pitch (cube padded), batch 63.
ExperimentConfig full_defaults();
// Protocol scenarios: 64^2 grid, reduced index contrast, crop 48. Noise is
// pre-calibrated to the like-FHD target at these settings.
ExperimentConfig scenario_defaults();

std::string config_to_json(const ExperimentConfig& c);
// Missing keys keep the supplied base (defaults-overlay semantics).
ExperimentConfig config_from_json(const std::string& text, ExperimentConfig base);
ExperimentConfig load_config(const std::string& path, ExperimentConfig base);

struct RunReport {
    std::string out_dir;
    std::vector<std::string> files;
    metrics::BestPair best_pair;
    double pearson_offdiag_mean = 0;
    double like_mean = 0;
    double unlike_mean = 0;
    double threshold = 0;
    double overlap_fraction = 0;
    bool distributions_disjoint = false;
};

// Fig.-3/4-style pipeline: one plan, batch_size noisy duplicates plus
// batch_size unrelated plans, one plane-wave response each; emits the
// correlation matrix, Pearson histogram/KDE, like/unlike FHD distributions
// and threshold, plus a provenance report. Partial outputs are removed on
// failure.
RunReport run_duplicate_batch(const ExperimentConfig& config, const std::string& out_dir);

struct CalibrationPoint {
    double sigma_endpoint_um = 0;
    double mean_like_fhd = 0;
};

struct CalibrationResult {
    double chosen_sigma = 0;
    double achieved_fhd = 0;
    bool target_reachable = false;
    std::optional<double> interpolated_sigma;
    std::vector<CalibrationPoint> table;
};

// Sweeps sigma_endpoint, measuring mean duplicate-pair FHD on a small
// sub-batch per point; returns the grid point closest to the target.
CalibrationResult calibrate_noise(const ExperimentConfig& config, double target_like_fhd,
                                  const std::vector<double>& sweep);

// Fixed cast of structures every protocol scenario runs against.
struct ScenarioCast {
    proto::PufDevice duplicate_a;
    proto::PufDevice duplicate_b;
    std::vector<proto::PufDevice> members;  // ke_members duplicates, [0..]
    proto::PufDevice impostor;              // unrelated plan
    proto::PufDevice damaged;               // duplicate with half the rods removed
};

ScenarioCast make_scenario_cast(const ExperimentConfig& config);

struct ScenarioResult {
    std::string name;
    int runs = 0;
    int successes = 0;
    int failures = 0;
    std::map<std::string, int> counters;
    std::vector<std::string> transcript_files;
};

// Executes scenario_runs seeded repetitions of one named protocol scenario
// (group-id, mac, group-ke, ke-attack, feistel, ot, ot-attack, tag) and
// emits an outcome table plus per-run transcripts when out_dir is given.
ScenarioResult run_scenario(const std::string& name, const ExperimentConfig& config,
                            const std::string& out_dir);

const std::vector<std::string>& scenario_names();

// Re-reads a batch/scenario output directory and returns the provenance
// report text; throws when referenced files are missing.
std::string read_report(const std::string& out_dir);

}  // namespace pufsim::harness

#endif
