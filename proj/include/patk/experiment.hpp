#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "patk/dip.hpp"
#include "patk/geometry.hpp"
#include "patk/iqa.hpp"
#include "patk/pdhg.hpp"
#include "patk/phantom.hpp"
#include "patk/unet.hpp"
#include "patk/waveop.hpp"

namespace patk {

enum class Method { tv, dip, both };

/// Everything a run needs. Lengths in meters, angles in degrees.
struct ExperimentConfig {
  // Reconstruction grid; the simulation grid is fine_factor times finer
  // over the same extent.
  int n = 128;
  int fine_factor = 2;
  double dx = 1e-4;
  double c = 1500.0;
  int pad_factor = 2;

  int n_total = 128;
  double arc_deg = 270.0;
  double center_deg = 270.0;
  double radius_frac = 0.45;  // ring radius as a fraction of the grid extent
  int n_active = 128;
  int arc_offset = 0;

  int n_t = 0;      // 0: default time axis
  double dt = 0.0;  // 0: dx / (2c)

  double eta = 0.1;
  std::uint64_t seed_phantom = 1;
  std::uint64_t seed_noise = 2;
  std::uint64_t seed_network = 3;

  PhantomKind phantom = PhantomKind::disks;
  Method method = Method::both;
  InverseMode inverse = InverseMode::normalized_adjoint;

  PdhgConfig tv;
  DipConfig dip;
  UNetConfig unet;

  double roi_threshold = -1.0;  // < 0: whole image
  bool record_seconds = false;  // wall time makes metrics.csv non-reproducible
  std::filesystem::path output_dir = "patk_out";

  void validate() const;

  Grid grid() const;
  Grid fine_grid() const;
  /// Ring with n_active elements switched on.
  DetectorRing ring() const;
  TimeAxis time_axis() const;
};

using KeyValues = std::map<std::string, std::string>;

/// `key = value` lines; blank lines and lines starting with '#' are skipped.
KeyValues parse_key_values(std::string_view text);
std::string format_key_values(const KeyValues& kv);

/// Applies the entries to `config`. Unknown keys and malformed values throw
/// ConfigError.
void apply_key_values(ExperimentConfig& config, const KeyValues& kv);
/// Fully resolved configuration; parsing it back reproduces `config`.
KeyValues to_key_values(const ExperimentConfig& config);
/// Keys understood by apply_key_values.
std::vector<std::string> config_keys();

/// Defaults, then the file (if any), then the overrides.
ExperimentConfig load_config(const std::filesystem::path* file, const KeyValues& overrides = {});

/// Simulated measurement for one configuration.
struct Problem {
  Grid grid;
  Grid fine_grid;
  DetectorRing ring;
  TimeAxis time_axis;
  Image phantom_fine;
  Image gt;
  TimeSeries clean;
  TimeSeries noisy;
  double eta_measured = 0.0;
};

/// Phantom on the fine grid, ground truth on the reconstruction grid and the
/// clean and noisy data; coarse_op is the reconstruction operator.
Problem make_problem(const ExperimentConfig& config, const ForwardOperator& coarse_op);
ForwardOperator make_operator(const ExperimentConfig& config);
RoiMask metrics_roi(const ExperimentConfig& config, const Image& gt);

struct MetricsRow {
  std::string method;
  std::string selection;
  MetricsReport metrics;
  int iterations = 0;
  double seconds = 0.0;
};

struct ExperimentResult {
  std::vector<MetricsRow> rows;
  double eta = 0.0;
  double eta_measured = 0.0;
  double coverage_deg = 0.0;
  std::filesystem::path dir;
};

/// Runs phantom, simulation, noise, initialization, the configured methods
/// and the metrics, writing every artifact to config.output_dir. Outputs go
/// to a staging directory first and replace output_dir only on success.
ExperimentResult run_experiment(const ExperimentConfig& config);

std::string metrics_csv(const ExperimentResult& result);
std::string history_csv(const RunRecord& record, int first_iteration);

struct SweepSpec {
  std::vector<double> etas{0.0, 0.1, 0.2};
  std::vector<int> n_active;  // empty: n_total * {256, 170, 112} / 256
};

std::vector<int> default_sweep_counts(int n_total);

/// One run per (eta, n_active) pair under config.output_dir, plus
/// sweep.csv with every metrics row.
std::vector<ExperimentResult> run_sweep(const ExperimentConfig& config, const SweepSpec& spec);

enum class SearchParam { alpha, lambda };
SearchParam parse_search_param(const std::string& s);

struct GridSearchRow {
  double value = 0.0;
  MetricsRow row;
  bool best = false;
};

/// Runs one experiment per value (TV for alpha, DIP for lambda) and writes
/// grid_search.csv under config.output_dir; the row with the largest PSNR
/// is flagged.
std::vector<GridSearchRow> grid_search(const ExperimentConfig& config, SearchParam param,
                                       std::span<const double> values);

std::string format_number(double v);

}  // namespace patk
