#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <functional>
#include <iterator>
#include <sstream>

#include "patk/experiment.hpp"

namespace patk {

std::string format_number(double v) {
  if (std::isnan(v)) return "nan";
  if (std::isinf(v)) return v > 0 ? "inf" : "-inf";
  char buf[64];
  const auto r = std::to_chars(buf, buf + sizeof buf, v);
  return {buf, r.ptr};
}

namespace {

std::string trim(std::string_view s) {
  const auto ws = " \t\r\n";
  const auto b = s.find_first_not_of(ws);
  if (b == std::string_view::npos) return {};
  const auto e = s.find_last_not_of(ws);
  return std::string(s.substr(b, e - b + 1));
}

template <class T>
T parse_number(const std::string& key, const std::string& s) {
  T v{};
  const auto* end = s.data() + s.size();
  const auto r = std::from_chars(s.data(), end, v);
  if (r.ec != std::errc() || r.ptr != end) throw ConfigError("config: bad value '" + s + "' for " + key);
  return v;
}

bool parse_bool(const std::string& key, const std::string& s) {
  if (s == "true" || s == "1") return true;
  if (s == "false" || s == "0") return false;
  throw ConfigError("config: bad boolean '" + s + "' for " + key);
}

std::vector<int> parse_int_list(const std::string& key, const std::string& s) {
  std::vector<int> out;
  std::stringstream ss(s);
  for (std::string item; std::getline(ss, item, ',');) out.push_back(parse_number<int>(key, trim(item)));
  return out;
}

std::string format_int_list(const std::vector<int>& v) {
  std::string out;
  for (std::size_t k = 0; k < v.size(); ++k) out += (k ? "," : "") + std::to_string(v[k]);
  return out;
}

template <class E>
struct EnumNames {
  std::vector<std::pair<E, const char*>> names;

  E parse(const std::string& key, const std::string& s) const {
    for (const auto& [e, n] : names)
      if (s == n) return e;
    throw ConfigError("config: unknown value '" + s + "' for " + key);
  }
  std::string format(E e) const {
    for (const auto& [v, n] : names)
      if (v == e) return n;
    return {};
  }
};

const EnumNames<Method> kMethods{{{Method::tv, "tv"}, {Method::dip, "dip"}, {Method::both, "both"}}};
const EnumNames<InverseMode> kInverse{
    {{InverseMode::normalized_adjoint, "normalized_adjoint"}, {InverseMode::time_reversal, "time_reversal"}}};
const EnumNames<Selection> kSelection{{{Selection::early_stop_psnr, "early_stop_psnr"},
                                       {Selection::converged_psnr, "converged_psnr"},
                                       {Selection::fixed_cutoff, "fixed_cutoff"}}};
const EnumNames<HeadKind> kHeads{{{HeadKind::conv3x3_relu, "conv3x3_relu"},
                                  {HeadKind::conv1x1_nobias_leakyrelu, "conv1x1_nobias_leakyrelu"},
                                  {HeadKind::conv1x1_nobias_linear, "conv1x1_nobias_linear"}}};
const EnumNames<PhantomKind> kPhantoms{{{PhantomKind::disks, "disks"},
                                        {PhantomKind::annulus_with_inclusions, "annulus_with_inclusions"},
                                        {PhantomKind::shepp_like, "shepp_like"}}};

struct Field {
  std::string key;
  std::function<void(ExperimentConfig&, const std::string&)> set;
  std::function<std::string(const ExperimentConfig&)> get;
};

template <class T, class Ref>
Field number(std::string key, Ref ref) {
  return {key, [ref, key](ExperimentConfig& c, const std::string& s) { ref(c) = parse_number<T>(key, s); },
          [ref](const ExperimentConfig& c) {
            const T v = ref(const_cast<ExperimentConfig&>(c));
            if constexpr (std::is_floating_point_v<T>)
              return format_number(v);
            else
              return std::to_string(v);
          }};
}

template <class E, class Ref>
Field enumeration(std::string key, const EnumNames<E>& names, Ref ref) {
  return {key, [&names, ref, key](ExperimentConfig& c, const std::string& s) { ref(c) = names.parse(key, s); },
          [&names, ref](const ExperimentConfig& c) { return names.format(ref(const_cast<ExperimentConfig&>(c))); }};
}

#define PATK_REF(T, expr) [](ExperimentConfig & c) -> T& { return expr; }

const std::vector<Field>& fields() {
  static const std::vector<Field> table = [] {
    std::vector<Field> t;
    t.push_back(number<int>("grid.n", PATK_REF(int, c.n)));
    t.push_back(number<int>("grid.fine_factor", PATK_REF(int, c.fine_factor)));
    t.push_back(number<double>("grid.dx", PATK_REF(double, c.dx)));
    t.push_back(number<double>("grid.c", PATK_REF(double, c.c)));
    t.push_back(number<int>("grid.pad_factor", PATK_REF(int, c.pad_factor)));
    t.push_back(number<int>("ring.n_total", PATK_REF(int, c.n_total)));
    t.push_back(number<double>("ring.arc_deg", PATK_REF(double, c.arc_deg)));
    t.push_back(number<double>("ring.center_deg", PATK_REF(double, c.center_deg)));
    t.push_back(number<double>("ring.radius_frac", PATK_REF(double, c.radius_frac)));
    t.push_back(number<int>("ring.n_active", PATK_REF(int, c.n_active)));
    t.push_back(number<int>("ring.offset", PATK_REF(int, c.arc_offset)));
    t.push_back(number<int>("time.n_t", PATK_REF(int, c.n_t)));
    t.push_back(number<double>("time.dt", PATK_REF(double, c.dt)));
    t.push_back(number<double>("noise.eta", PATK_REF(double, c.eta)));
    t.push_back(number<std::uint64_t>("seed.phantom", PATK_REF(std::uint64_t, c.seed_phantom)));
    t.push_back(number<std::uint64_t>("seed.noise", PATK_REF(std::uint64_t, c.seed_noise)));
    t.push_back(number<std::uint64_t>("seed.network", PATK_REF(std::uint64_t, c.seed_network)));
    t.push_back(enumeration("phantom.kind", kPhantoms, PATK_REF(PhantomKind, c.phantom)));
    t.push_back(enumeration("method", kMethods, PATK_REF(Method, c.method)));
    t.push_back(enumeration("inverse.mode", kInverse, PATK_REF(InverseMode, c.inverse)));

    t.push_back(number<double>("tv.alpha", PATK_REF(double, c.tv.alpha)));
    t.push_back(number<int>("tv.max_iter", PATK_REF(int, c.tv.max_iter)));
    t.push_back(number<double>("tv.tol", PATK_REF(double, c.tv.tol)));
    t.push_back(number<double>("tv.step_ratio", PATK_REF(double, c.tv.step_ratio)));
    t.push_back(number<double>("tv.norm_safety", PATK_REF(double, c.tv.norm_safety)));
    t.push_back(number<int>("tv.record_metrics_every", PATK_REF(int, c.tv.record_metrics_every)));
    t.push_back({"tv.constraint",
                 [](ExperimentConfig& c, const std::string& s) {
                   if (s == "nonnegative") {
                     c.tv.variant = NonNegative{};
                   } else if (s == "mean_penalty") {
                     if (!std::holds_alternative<MeanPenalty>(c.tv.variant)) c.tv.variant = MeanPenalty{};
                   } else {
                     throw ConfigError("config: unknown value '" + s + "' for tv.constraint");
                   }
                 },
                 [](const ExperimentConfig& c) {
                   return std::string(std::holds_alternative<MeanPenalty>(c.tv.variant) ? "mean_penalty"
                                                                                        : "nonnegative");
                 }});
    // Only meaningful with tv.constraint = mean_penalty; keys are applied in
    // table order, so the switch is always seen first.
    auto tv_mean = [](ExperimentConfig& c, const std::string& key) -> MeanPenalty& {
      auto* p = std::get_if<MeanPenalty>(&c.tv.variant);
      if (!p) throw ConfigError("config: " + key + " requires tv.constraint = mean_penalty");
      return *p;
    };
    for (const char* name : {"tv.mean_mu", "tv.mean_target"}) {
      const std::string key = name;
      const bool is_mu = key == "tv.mean_mu";
      t.push_back({key,
                   [=](ExperimentConfig& c, const std::string& s) {
                     auto& p = tv_mean(c, key);
                     (is_mu ? p.mu : p.target) = parse_number<double>(key, s);
                   },
                   [=](const ExperimentConfig& c) {
                     const auto* p = std::get_if<MeanPenalty>(&c.tv.variant);
                     return p ? format_number(is_mu ? p->mu : p->target) : std::string();
                   }});
    }

    t.push_back(number<double>("dip.lambda", PATK_REF(double, c.dip.lambda)));
    t.push_back(number<double>("dip.lr0", PATK_REF(double, c.dip.lr0)));
    t.push_back(number<int>("dip.max_iter", PATK_REF(int, c.dip.max_iter)));
    t.push_back(number<double>("dip.beta1", PATK_REF(double, c.dip.beta1)));
    t.push_back(number<double>("dip.beta2", PATK_REF(double, c.dip.beta2)));
    t.push_back(number<double>("dip.adam_eps", PATK_REF(double, c.dip.adam_eps)));
    t.push_back(number<double>("dip.tv_eps", PATK_REF(double, c.dip.tv_eps)));
    t.push_back(enumeration("dip.selection", kSelection, PATK_REF(Selection, c.dip.selection)));
    t.push_back(number<int>("dip.burn_in", PATK_REF(int, c.dip.burn_in)));
    t.push_back(number<int>("dip.record_metrics_every", PATK_REF(int, c.dip.record_metrics_every)));
    t.push_back({"dip.mean_mu",
                 [](ExperimentConfig& c, const std::string& s) {
                   const double mu = parse_number<double>("dip.mean_mu", s);
                   if (mu == 0.0) {
                     c.dip.mean_penalty.reset();
                   } else {
                     if (!c.dip.mean_penalty) c.dip.mean_penalty = DipMeanPenalty{};
                     c.dip.mean_penalty->mu = mu;
                   }
                 },
                 [](const ExperimentConfig& c) {
                   return c.dip.mean_penalty ? format_number(c.dip.mean_penalty->mu) : std::string("0");
                 }});
    t.push_back({"dip.mean_target",
                 [](ExperimentConfig& c, const std::string& s) {
                   if (s == "auto") {
                     if (c.dip.mean_penalty) c.dip.mean_penalty->target.reset();
                     return;
                   }
                   if (!c.dip.mean_penalty) throw ConfigError("config: dip.mean_target requires dip.mean_mu > 0");
                   c.dip.mean_penalty->target = parse_number<double>("dip.mean_target", s);
                 },
                 [](const ExperimentConfig& c) {
                   return c.dip.mean_penalty && c.dip.mean_penalty->target
                              ? format_number(*c.dip.mean_penalty->target)
                              : std::string("auto");
                 }});

    t.push_back({"unet.channels",
                 [](ExperimentConfig& c, const std::string& s) { c.unet.channels = parse_int_list("unet.channels", s); },
                 [](const ExperimentConfig& c) { return format_int_list(c.unet.channels); }});
    t.push_back(enumeration("unet.head", kHeads, PATK_REF(HeadKind, c.unet.head)));
    t.push_back(number<double>("unet.norm_eps", PATK_REF(double, c.unet.norm_eps)));

    t.push_back(number<double>("metrics.roi_threshold", PATK_REF(double, c.roi_threshold)));
    t.push_back({"output.record_seconds",
                 [](ExperimentConfig& c, const std::string& s) {
                   c.record_seconds = parse_bool("output.record_seconds", s);
                 },
                 [](const ExperimentConfig& c) { return std::string(c.record_seconds ? "true" : "false"); }});
    t.push_back({"output.dir", [](ExperimentConfig& c, const std::string& s) { c.output_dir = s; },
                 [](const ExperimentConfig& c) { return c.output_dir.string(); }});
    return t;
  }();
  return table;
}

#undef PATK_REF

// Order in which keys are applied: the table order, so that switches
// (tv.constraint, dip.mean_mu) precede their parameters.
std::size_t rank_of(const std::string& key) {
  const auto& t = fields();
  const auto it = std::find_if(t.begin(), t.end(), [&](const Field& f) { return f.key == key; });
  if (it == t.end()) throw ConfigError("config: unknown key '" + key + "'");
  return static_cast<std::size_t>(it - t.begin());
}

}  // namespace

KeyValues parse_key_values(std::string_view text) {
  KeyValues kv;
  std::size_t line_no = 0;
  std::istringstream is{std::string(text)};
  for (std::string line; std::getline(is, line);) {
    ++line_no;
    const std::string s = trim(line);
    if (s.empty() || s[0] == '#') continue;
    const auto eq = s.find('=');
    if (eq == std::string::npos)
      throw ConfigError("config: line " + std::to_string(line_no) + " is not of the form key = value");
    const std::string key = trim(std::string_view(s).substr(0, eq));
    if (key.empty()) throw ConfigError("config: line " + std::to_string(line_no) + " has an empty key");
    kv[key] = trim(std::string_view(s).substr(eq + 1));
  }
  return kv;
}

std::string format_key_values(const KeyValues& kv) {
  std::string out;
  for (const auto& key : config_keys()) {
    const auto it = kv.find(key);
    if (it != kv.end() && !it->second.empty()) out += key + " = " + it->second + "\n";
  }
  for (const auto& [k, v] : kv)
    if (std::find(config_keys().begin(), config_keys().end(), k) == config_keys().end()) out += k + " = " + v + "\n";
  return out;
}

std::vector<std::string> config_keys() {
  static const std::vector<std::string> keys = [] {
    std::vector<std::string> k;
    for (const auto& f : fields()) k.push_back(f.key);
    return k;
  }();
  return keys;
}

void apply_key_values(ExperimentConfig& config, const KeyValues& kv) {
  std::vector<std::pair<std::size_t, const std::pair<const std::string, std::string>*>> order;
  for (const auto& entry : kv) order.emplace_back(rank_of(entry.first), &entry);
  std::sort(order.begin(), order.end(), [](const auto& a, const auto& b) { return a.first < b.first; });
  for (const auto& [rank, entry] : order) fields()[rank].set(config, entry->second);
}

KeyValues to_key_values(const ExperimentConfig& config) {
  KeyValues kv;
  for (const auto& f : fields()) {
    std::string v = f.get(config);
    if (!v.empty()) kv[f.key] = std::move(v);
  }
  return kv;
}

ExperimentConfig load_config(const std::filesystem::path* file, const KeyValues& overrides) {
  ExperimentConfig config;
  KeyValues kv;
  if (file) {
    std::ifstream is(*file);
    if (!is) throw IoError("config: cannot open '" + file->string() + "'");
    const std::string text{std::istreambuf_iterator<char>(is), std::istreambuf_iterator<char>()};
    kv = parse_key_values(text);
  }
  for (const auto& [k, v] : overrides) kv[k] = v;
  apply_key_values(config, kv);
  config.validate();
  return config;
}

}  // namespace patk
