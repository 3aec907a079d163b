#include "patk/experiment.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <limits>

#include "patk/fieldio.hpp"

namespace fs = std::filesystem;

namespace patk {
namespace {

constexpr const char* kMarker = ".patk-output";

/// Output directory written under a temporary name and moved into place by
/// commit(); removed again if the run fails before that.
class StagedDir {
 public:
  explicit StagedDir(const fs::path& target) : target_(target.lexically_normal()) {
    if (target_.filename().empty()) target_ = target_.parent_path();
    if (target_.empty() || target_ == "." || target_ == ".." || target_ == target_.root_path())
      throw ConfigError("output directory '" + target.string() + "' is not usable");
    if (fs::exists(target_) && !fs::is_empty(target_) && !fs::exists(target_ / kMarker))
      throw ConfigError("refusing to replace '" + target_.string() + "': not a patk output directory");
    stage_ = target_;
    stage_ += ".partial";
    fs::remove_all(stage_);
    fs::create_directories(stage_);
    write_file(stage_ / kMarker, std::string_view());
  }
  StagedDir(const StagedDir&) = delete;
  StagedDir& operator=(const StagedDir&) = delete;
  ~StagedDir() {
    if (!committed_) {
      std::error_code ec;
      fs::remove_all(stage_, ec);
    }
  }

  const fs::path& path() const { return stage_; }
  const fs::path& target() const { return target_; }

  void commit() {
    fs::remove_all(target_);
    fs::rename(stage_, target_);
    committed_ = true;
  }

 private:
  fs::path target_;
  fs::path stage_;
  bool committed_ = false;
};

void write_text(const fs::path& path, const std::string& text) { write_file(path, text); }

void write_preview(const fs::path& dir, const std::string& stem, const Image& f) {
  write_image(dir / (stem + ".raw"), f);
  write_pgm(dir / (stem + ".pgm"), f);
}

std::string selection_label(Selection s) {
  switch (s) {
    case Selection::early_stop_psnr: return "early_stop";
    case Selection::converged_psnr: return "converged";
    case Selection::fixed_cutoff: return "cutoff";
  }
  return {};
}

double elapsed(std::chrono::steady_clock::time_point since) {
  return std::chrono::duration<double>(std::chrono::steady_clock::now() - since).count();
}

std::string psnr_field(const MetricsReport& m) { return m.psnr_infinite ? "inf" : format_number(m.psnr); }

std::string metric_fields(const MetricsRow& r) {
  return psnr_field(r.metrics) + "," + format_number(r.metrics.ssim) + "," + format_number(r.metrics.cc) + "," +
         format_number(r.metrics.haarpsi) + "," + std::to_string(r.iterations) + "," + format_number(r.seconds);
}

ExperimentResult run_into(const ExperimentConfig& config, const fs::path& dir) {
  const ForwardOperator op = make_operator(config);
  const Problem p = make_problem(config, op);
  const RoiMask roi = metrics_roi(config, p.gt);

  write_preview(dir, "gt", p.gt);
  write_timeseries(dir / "data.raw", p.noisy);

  ExperimentResult res;
  res.eta = config.eta;
  res.eta_measured = p.eta_measured;
  res.coverage_deg = p.ring.coverage_deg();
  auto seconds = [&](std::chrono::steady_clock::time_point t0) { return config.record_seconds ? elapsed(t0) : 0.0; };

  auto t0 = std::chrono::steady_clock::now();
  const Image z = approximate_inverse(p.noisy, op, config.inverse);
  write_preview(dir, "z", z);
  res.rows.push_back({"initial", "none", evaluate(z, p.gt, roi), 0, seconds(t0)});

  if (config.method != Method::tv) {
    t0 = std::chrono::steady_clock::now();
    UNetConfig net = config.unet;
    net.init_seed = config.seed_network;
    const DipResult d = dip_reconstruct(p.noisy, z, op, config.dip, net, p.gt);
    const double s = seconds(t0);
    res.rows.push_back({"dip", "early_stop", evaluate(*d.early_stop, p.gt, roi), static_cast<int>(d.early_index), s});
    res.rows.push_back(
        {"dip", "converged", evaluate(*d.converged, p.gt, roi), static_cast<int>(d.converged_index), s});
    res.rows.push_back({"dip", "cutoff", evaluate(d.cutoff, p.gt, roi), config.dip.max_iter, s});
    write_preview(dir, "rec_dip_early_stop", *d.early_stop);
    write_preview(dir, "rec_dip_converged", *d.converged);
    write_preview(dir, "rec_dip_cutoff", d.cutoff);
    write_text(dir / "history_dip.csv", history_csv(d.record, 0));
  }

  if (config.method != Method::dip) {
    t0 = std::chrono::steady_clock::now();
    const PdhgResult t = pdhg_solve(p.noisy, op, config.tv, p.gt);
    res.rows.push_back({"tv", t.record.converged ? "stopping_rule" : "max_iter", evaluate(t.image, p.gt, roi),
                        t.record.iterations_run, seconds(t0)});
    write_preview(dir, "rec_tv", t.image);
    write_text(dir / "history_tv.csv", history_csv(t.record, 1));
  }

  write_text(dir / "metrics.csv", metrics_csv(res));
  write_text(dir / "config.echo", format_key_values(to_key_values(config)));
  return res;
}

}  // namespace

void ExperimentConfig::validate() const {
  if (n < 32) throw ConfigError("grid.n must be >= 32");
  if (fine_factor < 2) throw ConfigError("grid.fine_factor must be >= 2");
  grid().validate();
  fine_grid().validate();
  if (n_total < 1) throw ConfigError("ring.n_total must be >= 1");
  if (n_active < 1 || n_active > n_total) throw ConfigError("ring.n_active must be in [1, ring.n_total]");
  if (!(arc_deg > 0.0 && arc_deg <= 360.0)) throw ConfigError("ring.arc_deg must be in (0, 360]");
  if (!(radius_frac > 0.0 && radius_frac < 0.5)) throw ConfigError("ring.radius_frac must be in (0, 0.5)");
  if (n_t < 0 || dt < 0.0) throw ConfigError("time.n_t and time.dt must be non-negative");
  if (!(eta >= 0.0 && eta < 1.0)) throw ConfigError("noise.eta must be in [0, 1)");
  if (!(roi_threshold < 1.0)) throw ConfigError("metrics.roi_threshold must be < 1");
  tv.validate();
  dip.validate();
  unet.validate();
  const int cells = 1 << unet.pooling_stages();
  if (n % cells != 0) throw ConfigError("grid.n must be divisible by 2^(number of pooling stages)");
  if (output_dir.empty()) throw ConfigError("output.dir must not be empty");
}

Grid ExperimentConfig::grid() const { return Grid{n, n, dx, c, pad_factor}; }

Grid ExperimentConfig::fine_grid() const {
  return Grid{n * fine_factor, n * fine_factor, dx / fine_factor, c, pad_factor};
}

DetectorRing ExperimentConfig::ring() const {
  const DetectorRing full = make_ring(radius_frac * n * dx, n_total, arc_deg, center_deg);
  return subsample_arc(full, n_active, arc_offset);
}

TimeAxis ExperimentConfig::time_axis() const {
  const Grid g = grid();
  const DetectorRing r = ring();
  TimeAxis t = default_time_axis(g, r);
  if (dt > 0.0) {
    t.dt = dt;
    t.n_t = static_cast<int>(std::ceil(2.0 * r.radius / (c * dt))) + 1;
  }
  if (n_t > 0) t.n_t = n_t;
  return t;
}

ForwardOperator make_operator(const ExperimentConfig& config) {
  return ForwardOperator(config.grid(), config.ring(), config.time_axis());
}

Problem make_problem(const ExperimentConfig& config, const ForwardOperator& coarse_op) {
  Problem p;
  p.grid = config.grid();
  p.fine_grid = config.fine_grid();
  p.ring = config.ring();
  p.time_axis = config.time_axis();
  p.phantom_fine = make_phantom(p.fine_grid, config.phantom, config.seed_phantom, p.ring.radius);
  p.gt = downsample(p.phantom_fine, config.fine_factor);
  const ForwardOperator fine_op(p.fine_grid, p.ring, p.time_axis);
  p.clean = simulate_data(p.phantom_fine, fine_op, coarse_op);
  p.noisy = add_relative_noise(p.clean, config.eta, config.seed_noise, p.ring.active);
  p.eta_measured = config.eta > 0.0 ? relative_noise_level(p.noisy, p.clean) : 0.0;
  return p;
}

RoiMask metrics_roi(const ExperimentConfig& config, const Image& gt) {
  return config.roi_threshold < 0.0 ? RoiMask::full(gt) : roi_from_gt(gt, config.roi_threshold);
}

std::string metrics_csv(const ExperimentResult& result) {
  std::string out = "method,selection,psnr_db,ssim,cc,haarpsi,iterations,seconds,eta,eta_measured\n";
  for (const auto& r : result.rows)
    out += r.method + "," + r.selection + "," + metric_fields(r) + "," + format_number(result.eta) + "," +
           format_number(result.eta_measured) + "\n";
  return out;
}

std::string history_csv(const RunRecord& record, int first_iteration) {
  std::string out = "iteration,objective,psnr,ssim\n";
  for (std::size_t k = 0; k < record.objective.size(); ++k) {
    out += std::to_string(first_iteration + static_cast<int>(k)) + "," + format_number(record.objective[k]) + ",";
    out += (k < record.psnr.size() ? format_number(record.psnr[k]) : "") + ",";
    out += (k < record.ssim.size() ? format_number(record.ssim[k]) : "") + "\n";
  }
  return out;
}

ExperimentResult run_experiment(const ExperimentConfig& config) {
  config.validate();
  StagedDir out(config.output_dir);
  ExperimentResult res = run_into(config, out.path());
  out.commit();
  res.dir = out.target();
  return res;
}

std::vector<int> default_sweep_counts(int n_total) {
  std::vector<int> out;
  for (int k : {256, 170, 112}) out.push_back(std::max(1, static_cast<int>(std::lround(n_total * k / 256.0))));
  return out;
}

std::vector<ExperimentResult> run_sweep(const ExperimentConfig& config, const SweepSpec& spec) {
  config.validate();
  const std::vector<int> counts = spec.n_active.empty() ? default_sweep_counts(config.n_total) : spec.n_active;
  if (spec.etas.empty() || counts.empty()) throw ConfigError("sweep: empty noise or coverage list");

  StagedDir root(config.output_dir);
  std::vector<ExperimentResult> results;
  std::vector<std::string> names;
  std::string csv =
      "eta,n_active,coverage_deg,method,selection,psnr_db,ssim,cc,haarpsi,iterations,seconds,eta_measured\n";
  for (double eta : spec.etas)
    for (int n_active : counts) {
      ExperimentConfig run = config;
      run.eta = eta;
      run.n_active = n_active;
      const std::string name = "eta" + format_number(eta) + "_n" + std::to_string(n_active);
      run.output_dir = root.path() / name;
      ExperimentResult r = run_experiment(run);
      for (const auto& row : r.rows)
        csv += format_number(eta) + "," + std::to_string(n_active) + "," + format_number(r.coverage_deg) + "," +
               row.method + "," + row.selection + "," + metric_fields(row) + "," + format_number(r.eta_measured) +
               "\n";
      results.push_back(std::move(r));
      names.push_back(name);
    }
  write_text(root.path() / "sweep.csv", csv);
  write_text(root.path() / "config.echo", format_key_values(to_key_values(config)));
  root.commit();
  for (std::size_t k = 0; k < results.size(); ++k) results[k].dir = root.target() / names[k];
  return results;
}

SearchParam parse_search_param(const std::string& s) {
  if (s == "alpha") return SearchParam::alpha;
  if (s == "lambda") return SearchParam::lambda;
  throw ConfigError("grid search: unknown parameter '" + s + "' (expected alpha or lambda)");
}

std::vector<GridSearchRow> grid_search(const ExperimentConfig& config, SearchParam param,
                                       std::span<const double> values) {
  if (values.empty()) throw ConfigError("grid search: empty value list");
  config.validate();
  const bool alpha = param == SearchParam::alpha;
  const std::string pname = alpha ? "alpha" : "lambda";

  StagedDir root(config.output_dir);
  std::vector<GridSearchRow> rows;
  for (std::size_t k = 0; k < values.size(); ++k) {
    ExperimentConfig run = config;
    run.method = alpha ? Method::tv : Method::dip;
    (alpha ? run.tv.alpha : run.dip.lambda) = values[k];
    run.output_dir = root.path() / (pname + "_" + std::to_string(k));
    const ExperimentResult r = run_experiment(run);
    const std::string wanted = selection_label(config.dip.selection);
    const auto it = std::find_if(r.rows.begin(), r.rows.end(), [&](const MetricsRow& m) {
      return alpha ? m.method == "tv" : (m.method == "dip" && m.selection == wanted);
    });
    rows.push_back({values[k], *it, false});
  }

  std::size_t best = 0;
  auto score = [](const GridSearchRow& r) {
    return r.row.metrics.psnr_infinite ? std::numeric_limits<double>::infinity() : r.row.metrics.psnr;
  };
  for (std::size_t k = 1; k < rows.size(); ++k)
    if (score(rows[k]) > score(rows[best])) best = k;
  rows[best].best = true;

  std::string csv = "param,value,method,selection,psnr_db,ssim,cc,haarpsi,iterations,seconds,best\n";
  for (const auto& r : rows)
    csv += pname + "," + format_number(r.value) + "," + r.row.method + "," + r.row.selection + "," +
           metric_fields(r.row) + "," + (r.best ? "1" : "0") + "\n";
  write_text(root.path() / "grid_search.csv", csv);
  write_text(root.path() / "config.echo", format_key_values(to_key_values(config)));
  root.commit();
  return rows;
}

}  // namespace patk
