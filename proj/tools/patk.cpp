// patk: command line front end for the reconstruction toolkit.

#include <CLI11.hpp>

#include <cstdio>
#include <filesystem>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include "patk/experiment.hpp"
#include "patk/fieldio.hpp"
#include "patk/parallel.hpp"

namespace fs = std::filesystem;
using namespace patk;

namespace {

enum Exit { kOk = 0, kIo = 1, kConfig = 2, kNumerical = 3 };

struct Common {
  std::string config_file;
  std::vector<std::string> sets;
  std::optional<std::uint64_t> seed_phantom, seed_noise, seed_network;
  std::string out;
  int threads = 0;
};

void add_common(CLI::App& app, Common& c) {
  app.add_option("--config", c.config_file, "key = value configuration file")->check(CLI::ExistingFile);
  app.add_option("--set", c.sets, "Override one key, e.g. --set noise.eta=0.2 (repeatable)");
  app.add_option("--seed-phantom", c.seed_phantom, "Phantom seed");
  app.add_option("--seed-noise", c.seed_noise, "Noise seed");
  app.add_option("--seed-network", c.seed_network, "Network initialization seed");
  app.add_option("--out", c.out, "Output directory (overrides output.dir)");
  app.add_option("--threads", c.threads, "Worker threads (0: hardware concurrency)")->check(CLI::NonNegativeNumber);
}

ExperimentConfig resolve(const Common& c) {
  KeyValues overrides;
  for (const auto& s : c.sets) {
    const auto kv = parse_key_values(s);
    if (kv.size() != 1) throw ConfigError("--set expects key=value, got '" + s + "'");
    overrides[kv.begin()->first] = kv.begin()->second;
  }
  // Dedicated flags win over --set.
  if (c.seed_phantom) overrides["seed.phantom"] = std::to_string(*c.seed_phantom);
  if (c.seed_noise) overrides["seed.noise"] = std::to_string(*c.seed_noise);
  if (c.seed_network) overrides["seed.network"] = std::to_string(*c.seed_network);
  if (!c.out.empty()) overrides["output.dir"] = c.out;
  const fs::path file = c.config_file;
  ExperimentConfig cfg = load_config(c.config_file.empty() ? nullptr : &file, overrides);
  cfg.validate();
  if (c.threads > 0) set_num_threads(c.threads);
  return cfg;
}

fs::path prepare_dir(const ExperimentConfig& cfg) {
  fs::create_directories(cfg.output_dir);
  return cfg.output_dir;
}

void save(const fs::path& dir, const std::string& stem, const Image& f) {
  write_image(dir / (stem + ".raw"), f);
  write_pgm(dir / (stem + ".pgm"), f);
}

void write_text(const fs::path& p, const std::string& s) { write_file(p, s); }

std::string metrics_header() { return "psnr_db,ssim,cc,haarpsi"; }

std::string metrics_line(const MetricsReport& m) {
  return (m.psnr_infinite ? std::string("inf") : format_number(m.psnr)) + "," + format_number(m.ssim) + "," +
         format_number(m.cc) + "," + format_number(m.haarpsi);
}

std::optional<Image> maybe_image(const std::string& path) {
  if (path.empty()) return std::nullopt;
  return read_image(path);
}

int cmd_phantom(const Common& c) {
  const ExperimentConfig cfg = resolve(c);
  const fs::path dir = prepare_dir(cfg);
  const Image fine = make_phantom(cfg.fine_grid(), cfg.phantom, cfg.seed_phantom, cfg.ring().radius);
  save(dir, "phantom_fine", fine);
  save(dir, "gt", downsample(fine, cfg.fine_factor));
  write_text(dir / "config.echo", format_key_values(to_key_values(cfg)));
  return kOk;
}

int cmd_simulate(const Common& c) {
  const ExperimentConfig cfg = resolve(c);
  const fs::path dir = prepare_dir(cfg);
  const ForwardOperator op = make_operator(cfg);
  const Problem p = make_problem(cfg, op);
  save(dir, "gt", p.gt);
  write_timeseries(dir / "data_clean.raw", p.clean);
  write_timeseries(dir / "data.raw", p.noisy);
  write_text(dir / "config.echo", format_key_values(to_key_values(cfg)));
  std::printf("eta %s measured %s\n", format_number(cfg.eta).c_str(), format_number(p.eta_measured).c_str());
  return kOk;
}

int cmd_recon_tv(const Common& c, const std::string& data, const std::string& gt_path) {
  const ExperimentConfig cfg = resolve(c);
  const fs::path dir = prepare_dir(cfg);
  const ForwardOperator op = make_operator(cfg);
  const std::optional<Image> gt = maybe_image(gt_path);
  const PdhgResult r = pdhg_solve(read_timeseries(data), op, cfg.tv, gt);
  save(dir, "rec_tv", r.image);
  write_text(dir / "history_tv.csv", history_csv(r.record, 1));
  std::printf("iterations %d converged %s\n", r.record.iterations_run, r.record.converged ? "yes" : "no");
  return kOk;
}

int cmd_recon_dip(const Common& c, const std::string& data, const std::string& gt_path, const std::string& init) {
  const ExperimentConfig cfg = resolve(c);
  const fs::path dir = prepare_dir(cfg);
  const ForwardOperator op = make_operator(cfg);
  const TimeSeries g = read_timeseries(data);
  const std::optional<Image> gt = maybe_image(gt_path);
  const Image z = init.empty() ? approximate_inverse(g, op, cfg.inverse) : read_image(init);
  UNetConfig net = cfg.unet;
  net.init_seed = cfg.seed_network;
  const DipResult r = dip_reconstruct(g, z, op, cfg.dip, net, gt);
  save(dir, "z", z);
  save(dir, "rec_dip", r.image);
  write_text(dir / "history_dip.csv", history_csv(r.record, 0));
  std::printf("selected iteration %zu of %d\n", r.selected, cfg.dip.max_iter);
  return kOk;
}

int cmd_evaluate(const Common& c, const std::string& rec, const std::string& gt_path) {
  const ExperimentConfig cfg = resolve(c);
  const Image gt = read_image(gt_path);
  const MetricsReport m = evaluate(read_image(rec), gt, metrics_roi(cfg, gt));
  std::printf("%s\n%s\n", metrics_header().c_str(), metrics_line(m).c_str());
  return kOk;
}

int cmd_run(const Common& c) {
  const ExperimentResult r = run_experiment(resolve(c));
  std::cout << metrics_csv(r);
  return kOk;
}

int cmd_sweep(const Common& c, const std::vector<double>& etas, const std::vector<int>& counts) {
  SweepSpec spec;
  if (!etas.empty()) spec.etas = etas;
  spec.n_active = counts;
  const auto results = run_sweep(resolve(c), spec);
  std::printf("%zu runs\n", results.size());
  return kOk;
}

int cmd_grid_search(const Common& c, const std::string& param, const std::vector<double>& values) {
  const auto rows = grid_search(resolve(c), parse_search_param(param), values);
  for (const auto& r : rows)
    std::printf("%s %s psnr %s%s\n", param.c_str(), format_number(r.value).c_str(),
                format_number(r.row.metrics.psnr).c_str(), r.best ? "  (best)" : "");
  return kOk;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Photoacoustic tomography reconstruction toolkit"};
  app.require_subcommand(1);
  Common common;
  std::string data, gt, init, rec, param;
  std::vector<double> etas, values;
  std::vector<int> counts;

  auto* phantom = app.add_subcommand("phantom", "Write the phantom on the fine and reconstruction grids");
  auto* simulate = app.add_subcommand("simulate", "Simulate clean and noisy detector data");
  auto* tv = app.add_subcommand("recon-tv", "TV reconstruction with the primal-dual solver");
  auto* dip = app.add_subcommand("recon-dip", "Deep image prior reconstruction");
  auto* eval = app.add_subcommand("evaluate", "Image quality metrics of a reconstruction");
  auto* run = app.add_subcommand("run", "Full experiment: simulation, reconstructions and metrics");
  auto* sweep = app.add_subcommand("sweep", "Experiments over noise levels and detector counts");
  auto* grid = app.add_subcommand("grid-search", "Experiments over alpha or lambda");
  for (auto* s : {phantom, simulate, tv, dip, eval, run, sweep, grid}) add_common(*s, common);

  for (auto* s : {tv, dip}) {
    s->add_option("--data", data, "Detector data (raw field)")->required()->check(CLI::ExistingFile);
    s->add_option("--gt", gt, "Ground truth for PSNR/SSIM histories")->check(CLI::ExistingFile);
  }
  dip->add_option("--init", init, "Network input; default: approximate inverse of the data")->check(CLI::ExistingFile);
  eval->add_option("--rec", rec, "Reconstruction (raw field)")->required()->check(CLI::ExistingFile);
  eval->add_option("--gt", gt, "Ground truth (raw field)")->required()->check(CLI::ExistingFile);
  sweep->add_option("--etas", etas, "Noise levels (default 0 0.1 0.2)");
  sweep->add_option("--counts", counts, "Active detector counts (default n_total x 256/170/112 / 256)");
  grid->add_option("--param", param, "alpha or lambda")->required()->check(CLI::IsMember({"alpha", "lambda"}));
  grid->add_option("--values", values, "Parameter values")->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? kOk : kConfig;
  }

  try {
    if (*phantom) return cmd_phantom(common);
    if (*simulate) return cmd_simulate(common);
    if (*tv) return cmd_recon_tv(common, data, gt);
    if (*dip) return cmd_recon_dip(common, data, gt, init);
    if (*eval) return cmd_evaluate(common, rec, gt);
    if (*run) return cmd_run(common);
    if (*sweep) return cmd_sweep(common, etas, counts);
    if (*grid) return cmd_grid_search(common, param, values);
  } catch (const ConfigError& e) {
    std::fprintf(stderr, "patk: configuration error: %s\n", e.what());
    return kConfig;
  } catch (const NumericalError& e) {
    std::fprintf(stderr, "patk: numerical failure: %s\n", e.what());
    return kNumerical;
  } catch (const std::exception& e) {
    std::fprintf(stderr, "patk: %s\n", e.what());
    return kIo;
  }
  return kOk;
}
