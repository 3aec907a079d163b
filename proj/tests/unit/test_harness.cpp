#include <doctest.h>

#include <cmath>
#include <fstream>
#include <sstream>

#include "../support.hpp"
#include "patk/experiment.hpp"
#include "patk/fieldio.hpp"

using namespace patk;
namespace fs = std::filesystem;

namespace {

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

std::vector<std::vector<std::string>> csv_rows(const std::string& text) {
  std::vector<std::vector<std::string>> rows;
  std::istringstream in(text);
  std::string line;
  while (std::getline(in, line)) {
    std::vector<std::string> cells;
    std::istringstream ls(line);
    std::string cell;
    while (std::getline(ls, cell, ',')) cells.push_back(cell);
    rows.push_back(cells);
  }
  return rows;
}

ExperimentConfig small_config(const fs::path& out) {
  ExperimentConfig c;
  c.n = 32;
  c.n_total = 32;
  c.n_active = 32;
  c.unet.channels = {4, 8};
  c.dip.max_iter = 6;
  c.dip.burn_in = 2;
  c.dip.lr0 = 1e-2;
  c.tv.max_iter = 15;
  c.tv.alpha = 1e-4;
  c.output_dir = out;
  return c;
}

}  // namespace

TEST_CASE("phantoms") {
  Grid g;
  g.nx = g.ny = 128;
  const double radius = 0.45 * 128 * g.dx;
  for (PhantomKind kind : {PhantomKind::disks, PhantomKind::annulus_with_inclusions, PhantomKind::shepp_like}) {
    CAPTURE(to_string(kind));
    CHECK(parse_phantom_kind(to_string(kind)) == kind);
    const Image a = make_phantom(g, kind, 4, radius);
    CHECK(a == make_phantom(g, kind, 4, radius));
    double total = 0.0;
    for (int i = 0; i < g.nx; ++i)
      for (int j = 0; j < g.ny; ++j) {
        const double v = a(static_cast<std::size_t>(i), static_cast<std::size_t>(j));
        CHECK(v >= 0.0);
        if (v > 0.0) CHECK(std::hypot(g.x_of(i), g.y_of(j)) < 0.9 * radius);
        total += v;
      }
    CHECK(total > 0.0);
  }
  CHECK_FALSE(make_phantom(g, PhantomKind::disks, 4, radius) == make_phantom(g, PhantomKind::disks, 5, radius));
  CHECK_THROWS_AS(parse_phantom_kind("cube"), ConfigError);

  for (std::uint64_t seed = 1; seed <= 5; ++seed) {
    const auto shapes = phantom_shapes(PhantomKind::disks, radius, seed);
    CHECK(shapes.size() >= 3);
    CHECK(shapes.size() <= 6);
    double analytic = 0.0;
    for (const auto& e : shapes) analytic += e.area() * e.amplitude;
    const Image f = rasterize(g, shapes);
    double integral = 0.0;
    for (double v : f.values()) integral += v * g.dx * g.dx;
    CHECK(std::abs(integral - analytic) <= 0.02 * analytic);
  }
}

TEST_CASE("relative noise") {
  TimeSeries g = test::random_series(6, 50, 1);
  for (auto& v : g.row(2)) v = 0.0;
  CHECK(add_relative_noise(g, 0.0, 3) == g);
  for (double eta : {0.1, 0.2, 0.5}) {
    const TimeSeries n = add_relative_noise(g, eta, 3);
    CHECK(std::abs(relative_noise_level(n, g) - eta) <= 1e-12);
    for (double v : n.row(2)) CHECK(v == 0.0);
    CHECK(n == add_relative_noise(g, eta, 3));
    CHECK_FALSE(n == add_relative_noise(g, eta, 4));
  }
  const std::vector<std::uint8_t> mask{1, 1, 1, 0, 1, 1};
  const TimeSeries m = add_relative_noise(g, 0.1, 3, mask);
  CHECK(m.row(3)[0] == g.row(3)[0]);
  CHECK(m.row(2)[7] != 0.0);
  CHECK_THROWS_AS(add_relative_noise(g, 1.0, 3), ConfigError);
  CHECK_THROWS_AS(add_relative_noise(g, -0.1, 3), ConfigError);
  CHECK_THROWS_AS(add_relative_noise(TimeSeries(2, 4), 0.1, 3), NumericalError);
}

TEST_CASE("raw field files") {
  const Image f = test::random_image(64, 64, 2);
  RawField field{{64, 64}, {}};
  for (double v : f.values()) field.values.push_back(static_cast<float>(v));
  const auto bytes = encode_raw(field);
  CHECK(bytes.size() == 4 + 4 + 4 + 8 + 4 * 64 * 64);
  CHECK(std::string(bytes.begin(), bytes.begin() + 4) == "PATK");
  const RawField back = decode_raw(bytes);
  CHECK(back.dims == field.dims);
  CHECK(back.values == field.values);

  const fs::path dir = test::scratch_dir("fieldio");
  write_image(dir / "f.raw", f);
  const Image g = read_image(dir / "f.raw");
  for (std::size_t k = 0; k < f.size(); ++k) CHECK(g[k] == static_cast<double>(static_cast<float>(f[k])));
  const TimeSeries ts = test::random_series(3, 7, 1);
  write_timeseries(dir / "t.raw", ts);
  CHECK(read_timeseries(dir / "t.raw").n_t() == 7);
  write_raw(dir / "v.raw", RawField{{2, 2, 2}, std::vector<float>(8)});
  CHECK_THROWS_AS(read_image(dir / "v.raw"), FormatError);
}

TEST_CASE("raw field length and header checks") {
  RawField small{{3, 2}, std::vector<float>(6, 1.5f)};
  auto bytes = encode_raw(small);
  CHECK(bytes.size() - 20 == 24);
  CHECK(decode_raw(bytes).values.size() == 6);
  auto short_by_one = bytes;
  short_by_one.pop_back();
  CHECK_THROWS_AS(decode_raw(short_by_one), FormatError);
  auto long_by_one = bytes;
  long_by_one.push_back(0);
  CHECK_THROWS_AS(decode_raw(long_by_one), FormatError);
  auto bad_magic = bytes;
  bad_magic[0] = 'X';
  CHECK_THROWS_AS(decode_raw(bad_magic), FormatError);
  auto bad_version = bytes;
  bad_version[4] = 2;
  CHECK_THROWS_AS(decode_raw(bad_version), FormatError);
  CHECK_THROWS_AS(decode_raw(std::span<const std::uint8_t>(bytes.data(), 10)), FormatError);
  CHECK_THROWS_AS(read_raw(test::scratch_dir("missing") / "nope.raw"), IoError);
}

TEST_CASE("pgm preview") {
  const fs::path dir = test::scratch_dir("pgm");
  Image f(3, 5);
  f(2, 4) = 2.0;
  f(0, 0) = -1.0;
  write_pgm(dir / "f.pgm", f);
  const std::string s = slurp(dir / "f.pgm");
  CHECK(s.rfind("P5\n5 3\n255\n", 0) == 0);
  CHECK(s.size() == std::string("P5\n5 3\n255\n").size() + 15);
  CHECK(static_cast<unsigned char>(s.back()) == 255);
  CHECK(static_cast<unsigned char>(s[11]) == 0);
}

TEST_CASE("configuration text") {
  const KeyValues kv = parse_key_values("# comment\n\ngrid.n = 64\n noise.eta=0.2 \nunet.channels = 4, 8\n");
  CHECK(kv.at("grid.n") == "64");
  CHECK(kv.at("noise.eta") == "0.2");
  ExperimentConfig c;
  apply_key_values(c, kv);
  CHECK(c.n == 64);
  CHECK(c.eta == 0.2);
  CHECK(c.unet.channels == std::vector<int>{4, 8});
  CHECK_THROWS_AS(apply_key_values(c, {{"grid.nn", "3"}}), ConfigError);
  CHECK_THROWS_AS(apply_key_values(c, {{"grid.n", "sixty"}}), ConfigError);
  CHECK_THROWS_AS(apply_key_values(c, {{"dip.selection", "best"}}), ConfigError);
  CHECK_THROWS_AS(parse_key_values("grid.n 64\n"), ConfigError);

  c.tv.variant = MeanPenalty{2.5, 0.125};
  c.dip.mean_penalty = DipMeanPenalty{0.5, std::nullopt};
  c.seed_network = 1234567890123ULL;
  c.dip.lr0 = 1.0 / 3.0;
  const KeyValues out = to_key_values(c);
  CHECK(out.size() == config_keys().size());
  ExperimentConfig back;
  apply_key_values(back, parse_key_values(format_key_values(out)));
  CHECK(to_key_values(back) == out);
  CHECK(back.dip.lr0 == c.dip.lr0);

  const fs::path dir = test::scratch_dir("config");
  write_file(dir / "run.cfg", std::string_view("grid.n = 64\nseed.noise = 9\n"));
  const fs::path file = dir / "run.cfg";
  const ExperimentConfig loaded = load_config(&file, {{"seed.noise", "11"}});
  CHECK(loaded.n == 64);
  CHECK(loaded.seed_noise == 11);
  const fs::path missing = dir / "absent.cfg";
  CHECK_THROWS_AS(load_config(&missing), IoError);
}

TEST_CASE("configuration validation") {
  ExperimentConfig c;
  CHECK_NOTHROW(c.validate());
  c.eta = 1.0;
  CHECK_THROWS_AS(c.validate(), ConfigError);
  c = {};
  c.n_active = 129;
  CHECK_THROWS_AS(c.validate(), ConfigError);
  c = {};
  c.n = 36;  // not divisible by 8
  CHECK_THROWS_AS(c.validate(), ConfigError);
  c = {};
  c.fine_factor = 1;
  CHECK_THROWS_AS(c.validate(), ConfigError);
  c = {};
  c.dt = 2e-8;
  CHECK(c.time_axis().dt == 2e-8);
  c.n_t = 17;
  CHECK(c.time_axis().n_t == 17);
}

TEST_CASE("end-to-end run is reproducible") {
  const fs::path root = test::scratch_dir("run");
  ExperimentConfig c = small_config(root / "a");
  c.eta = 0.1;
  const ExperimentResult a = run_experiment(c);
  CHECK(std::abs(a.eta_measured - 0.1) <= 1e-12);
  CHECK(a.rows.size() == 5);
  for (const char* f : {"gt.raw", "gt.pgm", "z.raw", "data.raw", "rec_tv.raw", "rec_dip_early_stop.pgm",
                        "rec_dip_converged.raw", "rec_dip_cutoff.raw", "history_dip.csv", "history_tv.csv",
                        "metrics.csv", "config.echo"})
    CHECK_MESSAGE(fs::exists(root / "a" / f), f);
  CHECK_FALSE(fs::exists(root / "a.partial"));

  const auto rows = csv_rows(slurp(root / "a" / "metrics.csv"));
  REQUIRE(rows.size() == 6);
  CHECK(rows[0][0] == "method");
  CHECK(rows[1][0] == "initial");
  CHECK(rows[2][1] == "early_stop");
  CHECK(rows[3][1] == "converged");
  CHECK(rows[4][1] == "cutoff");
  CHECK(rows[5][0] == "tv");
  CHECK(std::stod(rows[2][2]) >= std::stod(rows[4][2]));
  CHECK(std::abs(std::stod(rows[1][9]) - 0.1) <= 1e-12);

  const auto hist = csv_rows(slurp(root / "a" / "history_dip.csv"));
  CHECK(hist.size() == 1 + 7);
  CHECK(hist[1][0] == "0");

  // Same config twice, then the echoed config: identical bytes.
  c.output_dir = root / "b";
  run_experiment(c);
  const fs::path echo = root / "a" / "config.echo";
  ExperimentConfig again = load_config(&echo, {{"output.dir", (root / "c").string()}});
  run_experiment(again);
  for (const char* f : {"metrics.csv", "history_dip.csv", "history_tv.csv", "rec_tv.raw", "z.raw"}) {
    CAPTURE(f);
    CHECK(slurp(root / "a" / f) == slurp(root / "b" / f));
    CHECK(slurp(root / "a" / f) == slurp(root / "c" / f));
  }

  // Re-running into an existing output directory replaces it.
  c.method = Method::tv;
  c.output_dir = root / "a";
  CHECK(run_experiment(c).rows.size() == 2);
  CHECK_FALSE(fs::exists(root / "a" / "history_dip.csv"));
}

TEST_CASE("output directory safety") {
  const fs::path root = test::scratch_dir("safety");
  fs::create_directories(root / "foreign");
  write_file(root / "foreign" / "keep.txt", std::string_view("x"));
  ExperimentConfig c = small_config(root / "foreign");
  c.method = Method::tv;
  CHECK_THROWS_AS(run_experiment(c), ConfigError);
  CHECK(fs::exists(root / "foreign" / "keep.txt"));

  // A failing run leaves neither a staging directory nor a target.
  c.output_dir = root / "fail";
  c.eta = 0.1;
  c.method = Method::dip;
  c.dip.lr0 = 1e250;  // parameters overflow after the first step
  CHECK_THROWS_AS(run_experiment(c), NumericalError);
  CHECK_FALSE(fs::exists(root / "fail"));
  CHECK_FALSE(fs::exists(root / "fail.partial"));
}

TEST_CASE("sweep") {
  CHECK(default_sweep_counts(256) == std::vector<int>{256, 170, 112});
  CHECK(default_sweep_counts(32) == std::vector<int>{32, 21, 14});
  const fs::path root = test::scratch_dir("sweep");
  ExperimentConfig c = small_config(root / "out");
  c.method = Method::tv;
  c.tv.max_iter = 5;
  const auto results = run_sweep(c, SweepSpec{});
  CHECK(results.size() == 9);
  int metrics_files = 0;
  for (const auto& e : fs::recursive_directory_iterator(root / "out"))
    if (e.path().filename() == "metrics.csv") ++metrics_files;
  CHECK(metrics_files == 9);
  const auto rows = csv_rows(slurp(root / "out" / "sweep.csv"));
  CHECK(rows.size() == 1 + 9 * 2);
  CHECK(fs::exists(root / "out" / "eta0.2_n14" / "metrics.csv"));
  for (const auto& r : results) CHECK(std::abs(r.eta_measured - r.eta) <= 1e-12);
}

TEST_CASE("grid search") {
  const fs::path root = test::scratch_dir("grid");
  ExperimentConfig c = small_config(root / "out");
  c.tv.max_iter = 10;
  const std::vector<double> one{1e-3};
  const auto single = grid_search(c, SearchParam::alpha, one);
  REQUIRE(single.size() == 1);
  CHECK(single[0].best);

  const std::vector<double> values{1e-3, 1e-2, 1e-1, 1e0};
  const auto rows = grid_search(c, SearchParam::alpha, values);
  CHECK(rows.size() == 4);
  const auto table = csv_rows(slurp(root / "out" / "grid_search.csv"));
  REQUIRE(table.size() == 5);
  std::size_t best = 1;
  for (std::size_t k = 1; k < table.size(); ++k)
    if (std::stod(table[k][4]) > std::stod(table[best][4])) best = k;
  for (std::size_t k = 1; k < table.size(); ++k) CHECK((table[k][10] == "1") == (k == best));
  CHECK(rows[best - 1].best);

  CHECK_THROWS_AS(grid_search(c, SearchParam::lambda, std::vector<double>{}), ConfigError);
  CHECK(parse_search_param("lambda") == SearchParam::lambda);
  CHECK_THROWS_AS(parse_search_param("beta"), ConfigError);
}
