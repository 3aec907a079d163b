#include "patk/unet.hpp"

#include <Eigen/Core>

#include <algorithm>
#include <cmath>
#include <random>

namespace patk {
namespace {

using MatR = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using MapR = Eigen::Map<MatR>;
using CMapR = Eigen::Map<const MatR>;

struct Tensor {
  int c = 0, h = 0, w = 0;
  std::vector<double> v;

  Tensor() = default;
  Tensor(int c_, int h_, int w_) : c(c_), h(h_), w(w_), v(static_cast<std::size_t>(c_) * h_ * w_, 0.0) {}

  std::size_t plane() const { return static_cast<std::size_t>(h) * static_cast<std::size_t>(w); }
  double* ch(int k) { return v.data() + static_cast<std::size_t>(k) * plane(); }
  const double* ch(int k) const { return v.data() + static_cast<std::size_t>(k) * plane(); }
  MapR mat() { return MapR(v.data(), c, static_cast<Eigen::Index>(plane())); }
  CMapR mat() const { return CMapR(v.data(), c, static_cast<Eigen::Index>(plane())); }
};

struct ConvSpec {
  int cin = 0, cout = 0, k = 3;
  bool bias = true;
  std::size_t w = 0, b = 0;
};

struct NormSpec {
  int c = 0;
  std::size_t scale = 0, shift = 0;
};

struct UpSpec {
  int cin = 0, cout = 0;
  std::size_t w = 0, b = 0;
};

struct StageSpec {
  ConvSpec conv1;
  NormSpec norm1;
  ConvSpec conv2;
  NormSpec norm2;
};

struct Layout {
  std::vector<StageSpec> enc;
  std::vector<UpSpec> up;      // up[s] feeds decoder level s
  std::vector<StageSpec> dec;  // dec[s] runs at encoder level s
  ConvSpec head;
  std::vector<ParamBlock> blocks;
  std::size_t total = 0;
};

class LayoutBuilder {
 public:
  std::size_t add(const std::string& name, std::size_t n) {
    layout.blocks.push_back({name, layout.total, n});
    layout.total += n;
    return layout.blocks.back().offset;
  }

  ConvSpec conv(const std::string& name, int cin, int cout, int k, bool bias) {
    ConvSpec s{cin, cout, k, bias, 0, 0};
    s.w = add(name + ".weight", static_cast<std::size_t>(cout) * cin * k * k);
    if (bias) s.b = add(name + ".bias", static_cast<std::size_t>(cout));
    return s;
  }

  NormSpec norm(const std::string& name, int c) {
    NormSpec s{c, 0, 0};
    s.scale = add(name + ".scale", static_cast<std::size_t>(c));
    s.shift = add(name + ".shift", static_cast<std::size_t>(c));
    return s;
  }

  StageSpec stage(const std::string& name, int cin, int cout) {
    StageSpec s;
    s.conv1 = conv(name + ".conv1", cin, cout, 3, true);
    s.norm1 = norm(name + ".norm1", cout);
    s.conv2 = conv(name + ".conv2", cout, cout, 3, true);
    s.norm2 = norm(name + ".norm2", cout);
    return s;
  }

  Layout layout;
};

Layout make_layout(const UNetConfig& cfg) {
  LayoutBuilder b;
  const auto& ch = cfg.channels;
  const std::size_t levels = ch.size();
  for (std::size_t s = 0; s < levels; ++s)
    b.layout.enc.push_back(b.stage("enc" + std::to_string(s), s == 0 ? 1 : ch[s - 1], ch[s]));
  b.layout.up.resize(levels - 1);
  b.layout.dec.resize(levels - 1);
  for (std::size_t s = levels - 1; s-- > 0;) {
    const std::string name = "dec" + std::to_string(s);
    UpSpec u{ch[s + 1], ch[s], 0, 0};
    u.w = b.add(name + ".up.weight", static_cast<std::size_t>(u.cin) * u.cout * 4);
    u.b = b.add(name + ".up.bias", static_cast<std::size_t>(u.cout));
    b.layout.up[s] = u;
    b.layout.dec[s] = b.stage(name, 2 * ch[s], ch[s]);
  }
  if (cfg.head == HeadKind::conv3x3_relu)
    b.layout.head = b.conv("head", ch[0], 1, 3, true);
  else
    b.layout.head = b.conv("head", ch[0], 1, 1, false);
  return std::move(b.layout);
}

// ---- convolution (same padding, stride 1) ----

MatR im2col(const Tensor& in, int k) {
  const int r = k / 2;
  MatR col(static_cast<Eigen::Index>(in.c) * k * k, static_cast<Eigen::Index>(in.plane()));
  for (int ci = 0; ci < in.c; ++ci)
    for (int a = 0; a < k; ++a)
      for (int b = 0; b < k; ++b) {
        double* row = col.data() + (static_cast<std::size_t>(ci * k + a) * k + b) * in.plane();
        const double* src = in.ch(ci);
        for (int i = 0; i < in.h; ++i) {
          const int ii = i + a - r;
          double* dst = row + static_cast<std::size_t>(i) * in.w;
          if (ii < 0 || ii >= in.h) {
            std::fill_n(dst, in.w, 0.0);
            continue;
          }
          for (int j = 0; j < in.w; ++j) {
            const int jj = j + b - r;
            dst[j] = (jj < 0 || jj >= in.w) ? 0.0 : src[static_cast<std::size_t>(ii) * in.w + jj];
          }
        }
      }
  return col;
}

void col2im_add(const MatR& col, int k, Tensor& out) {
  const int r = k / 2;
  for (int ci = 0; ci < out.c; ++ci)
    for (int a = 0; a < k; ++a)
      for (int b = 0; b < k; ++b) {
        const double* row = col.data() + (static_cast<std::size_t>(ci * k + a) * k + b) * out.plane();
        double* dst = out.ch(ci);
        for (int i = 0; i < out.h; ++i) {
          const int ii = i + a - r;
          if (ii < 0 || ii >= out.h) continue;
          for (int j = 0; j < out.w; ++j) {
            const int jj = j + b - r;
            if (jj >= 0 && jj < out.w) dst[static_cast<std::size_t>(ii) * out.w + jj] += row[static_cast<std::size_t>(i) * out.w + j];
          }
        }
      }
}

Tensor conv_forward(const Tensor& in, const double* p, const ConvSpec& s) {
  Tensor out(s.cout, in.h, in.w);
  const CMapR w(p + s.w, s.cout, static_cast<Eigen::Index>(s.cin) * s.k * s.k);
  if (s.k == 1)
    out.mat().noalias() = w * in.mat();
  else
    out.mat().noalias() = w * im2col(in, s.k);
  if (s.bias)
    for (int co = 0; co < s.cout; ++co) {
      double* o = out.ch(co);
      const double bias = p[s.b + static_cast<std::size_t>(co)];
      for (std::size_t q = 0; q < out.plane(); ++q) o[q] += bias;
    }
  return out;
}

// Accumulates parameter gradients into g and returns the input gradient.
Tensor conv_backward(const Tensor& in, const double* p, const ConvSpec& s, const Tensor& dout, double* g) {
  const CMapR w(p + s.w, s.cout, static_cast<Eigen::Index>(s.cin) * s.k * s.k);
  MapR gw(g + s.w, s.cout, static_cast<Eigen::Index>(s.cin) * s.k * s.k);
  Tensor din(in.c, in.h, in.w);
  if (s.k == 1) {
    gw.noalias() += dout.mat() * in.mat().transpose();
    din.mat().noalias() = w.transpose() * dout.mat();
  } else {
    const MatR col = im2col(in, s.k);
    gw.noalias() += dout.mat() * col.transpose();
    const MatR dcol = w.transpose() * dout.mat();
    col2im_add(dcol, s.k, din);
  }
  if (s.bias)
    for (int co = 0; co < s.cout; ++co) {
      const double* d = dout.ch(co);
      double acc = 0.0;
      for (std::size_t q = 0; q < dout.plane(); ++q) acc += d[q];
      g[s.b + static_cast<std::size_t>(co)] += acc;
    }
  return din;
}

// ---- per-channel normalization over the spatial plane ----

struct NormCache {
  Tensor xhat;
  std::vector<double> inv_std;
};

Tensor norm_forward(const Tensor& x, const double* p, const NormSpec& s, double eps, NormCache& cache) {
  Tensor y(x.c, x.h, x.w);
  cache.xhat = Tensor(x.c, x.h, x.w);
  cache.inv_std.assign(static_cast<std::size_t>(x.c), 0.0);
  const auto n = static_cast<double>(x.plane());
  for (int k = 0; k < x.c; ++k) {
    const double* xi = x.ch(k);
    double mu = 0.0;
    for (std::size_t q = 0; q < x.plane(); ++q) mu += xi[q];
    mu /= n;
    double var = 0.0;
    for (std::size_t q = 0; q < x.plane(); ++q) var += (xi[q] - mu) * (xi[q] - mu);
    var /= n;
    const double inv = 1.0 / std::sqrt(var + eps);
    cache.inv_std[static_cast<std::size_t>(k)] = inv;
    const double gamma = p[s.scale + static_cast<std::size_t>(k)], beta = p[s.shift + static_cast<std::size_t>(k)];
    double* xh = cache.xhat.ch(k);
    double* yo = y.ch(k);
    for (std::size_t q = 0; q < x.plane(); ++q) {
      xh[q] = (xi[q] - mu) * inv;
      yo[q] = gamma * xh[q] + beta;
    }
  }
  return y;
}

Tensor norm_backward(const NormCache& cache, const double* p, const NormSpec& s, const Tensor& dy, double* g) {
  const Tensor& xhat = cache.xhat;
  Tensor dx(dy.c, dy.h, dy.w);
  const auto n = static_cast<double>(dy.plane());
  for (int k = 0; k < dy.c; ++k) {
    const double* d = dy.ch(k);
    const double* xh = xhat.ch(k);
    const double gamma = p[s.scale + static_cast<std::size_t>(k)];
    double sum_d = 0.0, sum_dx = 0.0;
    for (std::size_t q = 0; q < dy.plane(); ++q) {
      sum_d += d[q];
      sum_dx += d[q] * xh[q];
    }
    g[s.scale + static_cast<std::size_t>(k)] += sum_dx;
    g[s.shift + static_cast<std::size_t>(k)] += sum_d;
    // with dxhat = gamma dy: dx = inv/n (n dxhat - sum dxhat - xhat sum(dxhat xhat))
    const double scale = gamma * cache.inv_std[static_cast<std::size_t>(k)] / n;
    double* o = dx.ch(k);
    for (std::size_t q = 0; q < dy.plane(); ++q) o[q] = scale * (n * d[q] - sum_d - xh[q] * sum_dx);
  }
  return dx;
}

void relu_inplace(Tensor& t) {
  for (auto& v : t.v) v = v > 0.0 ? v : 0.0;
}

// Gradient through a ReLU given its output.
void relu_backward_inplace(const Tensor& out, Tensor& d) {
  for (std::size_t q = 0; q < d.v.size(); ++q)
    if (!(out.v[q] > 0.0)) d.v[q] = 0.0;
}

// ---- 2x2 max pooling ----

Tensor pool_forward(const Tensor& x, std::vector<std::uint32_t>& argmax) {
  Tensor y(x.c, x.h / 2, x.w / 2);
  argmax.assign(y.v.size(), 0);
  for (int k = 0; k < x.c; ++k)
    for (int i = 0; i < y.h; ++i)
      for (int j = 0; j < y.w; ++j) {
        std::size_t best = static_cast<std::size_t>(2 * i) * x.w + 2 * j;
        for (int a = 0; a < 2; ++a)
          for (int b = 0; b < 2; ++b) {
            const std::size_t q = static_cast<std::size_t>(2 * i + a) * x.w + 2 * j + b;
            if (x.ch(k)[q] > x.ch(k)[best]) best = q;
          }
        const std::size_t o = static_cast<std::size_t>(k) * y.plane() + static_cast<std::size_t>(i) * y.w + j;
        y.v[o] = x.ch(k)[best];
        argmax[o] = static_cast<std::uint32_t>(best);
      }
  return y;
}

void pool_backward_add(const std::vector<std::uint32_t>& argmax, const Tensor& dy, Tensor& dx) {
  for (int k = 0; k < dy.c; ++k)
    for (std::size_t q = 0; q < dy.plane(); ++q) {
      const std::size_t o = static_cast<std::size_t>(k) * dy.plane() + q;
      dx.ch(k)[argmax[o]] += dy.v[o];
    }
}

// ---- 2x2 stride-2 transposed convolution, weight layout [cin][cout][2][2] ----

MatR up_tap(const double* p, const UpSpec& s, int a, int b) {
  MatR w(s.cout, s.cin);
  for (int ci = 0; ci < s.cin; ++ci)
    for (int co = 0; co < s.cout; ++co) w(co, ci) = p[s.w + ((static_cast<std::size_t>(ci) * s.cout + co) * 2 + a) * 2 + b];
  return w;
}

Tensor up_forward(const Tensor& x, const double* p, const UpSpec& s) {
  Tensor y(s.cout, 2 * x.h, 2 * x.w);
  for (int a = 0; a < 2; ++a)
    for (int b = 0; b < 2; ++b) {
      const MatR t = up_tap(p, s, a, b) * x.mat();
      for (int co = 0; co < s.cout; ++co) {
        double* dst = y.ch(co);
        const double bias = p[s.b + static_cast<std::size_t>(co)];
        for (int i = 0; i < x.h; ++i)
          for (int j = 0; j < x.w; ++j)
            dst[static_cast<std::size_t>(2 * i + a) * y.w + 2 * j + b] = t(co, i * x.w + j) + bias;
      }
    }
  return y;
}

Tensor up_backward(const Tensor& x, const double* p, const UpSpec& s, const Tensor& dy, double* g) {
  Tensor dx(x.c, x.h, x.w);
  MatR d(s.cout, static_cast<Eigen::Index>(x.plane()));
  for (int a = 0; a < 2; ++a)
    for (int b = 0; b < 2; ++b) {
      for (int co = 0; co < s.cout; ++co) {
        const double* src = dy.ch(co);
        for (int i = 0; i < x.h; ++i)
          for (int j = 0; j < x.w; ++j) d(co, i * x.w + j) = src[static_cast<std::size_t>(2 * i + a) * dy.w + 2 * j + b];
      }
      dx.mat().noalias() += up_tap(p, s, a, b).transpose() * d;
      const MatR gw = d * x.mat().transpose();  // cout x cin
      for (int ci = 0; ci < s.cin; ++ci)
        for (int co = 0; co < s.cout; ++co)
          g[s.w + ((static_cast<std::size_t>(ci) * s.cout + co) * 2 + a) * 2 + b] += gw(co, ci);
    }
  for (int co = 0; co < s.cout; ++co) {
    double acc = 0.0;
    for (std::size_t q = 0; q < dy.plane(); ++q) acc += dy.ch(co)[q];
    g[s.b + static_cast<std::size_t>(co)] += acc;
  }
  return dx;
}

// ---- conv/norm/ReLU x 2 ----

struct StageCache {
  Tensor input;
  NormCache norm1;
  Tensor act1;
  NormCache norm2;
  Tensor act2;
};

void stage_forward(const Tensor& x, const double* p, const StageSpec& s, double eps, StageCache& c) {
  c.input = x;
  c.act1 = norm_forward(conv_forward(x, p, s.conv1), p, s.norm1, eps, c.norm1);
  relu_inplace(c.act1);
  c.act2 = norm_forward(conv_forward(c.act1, p, s.conv2), p, s.norm2, eps, c.norm2);
  relu_inplace(c.act2);
}

Tensor stage_backward(const StageCache& c, const double* p, const StageSpec& s, Tensor d, double* g) {
  relu_backward_inplace(c.act2, d);
  d = conv_backward(c.act1, p, s.conv2, norm_backward(c.norm2, p, s.norm2, d, g), g);
  relu_backward_inplace(c.act1, d);
  return conv_backward(c.input, p, s.conv1, norm_backward(c.norm1, p, s.norm1, d, g), g);
}

Tensor concat(const Tensor& a, const Tensor& b) {
  Tensor out(a.c + b.c, a.h, a.w);
  std::copy(a.v.begin(), a.v.end(), out.v.begin());
  std::copy(b.v.begin(), b.v.end(), out.v.begin() + static_cast<std::ptrdiff_t>(a.v.size()));
  return out;
}

std::pair<Tensor, Tensor> split(const Tensor& t, int first) {
  Tensor a(first, t.h, t.w), b(t.c - first, t.h, t.w);
  std::copy_n(t.v.begin(), a.v.size(), a.v.begin());
  std::copy(t.v.begin() + static_cast<std::ptrdiff_t>(a.v.size()), t.v.end(), b.v.begin());
  return {std::move(a), std::move(b)};
}

void check_input(const UNetConfig& cfg, std::size_t nx, std::size_t ny) {
  cfg.validate();
  const std::size_t div = std::size_t{1} << cfg.pooling_stages();
  if (nx == 0 || ny == 0 || nx % div != 0 || ny % div != 0)
    throw ConfigError("unet: input sides must be divisible by " + std::to_string(div));
}

}  // namespace

void UNetConfig::validate() const {
  if (channels.size() < 2) throw ConfigError("unet: need at least two channel stages");
  for (std::size_t s = 0; s < channels.size(); ++s) {
    if (channels[s] < 1) throw ConfigError("unet: channel counts must be positive");
    if (s > 0 && channels[s] <= channels[s - 1]) throw ConfigError("unet: channels must be strictly increasing");
  }
  if (conv_kernel != 3) throw ConfigError("unet: only 3x3 convolutions are supported");
  if (pool != 2) throw ConfigError("unet: only 2x2 pooling is supported");
  if (!(norm_eps > 0.0)) throw ConfigError("unet: norm_eps must be positive");
  if (head == HeadKind::conv1x1_nobias_leakyrelu && leaky_slope != 0.125)
    throw ConfigError("unet: the leaky head uses slope 0.125");
}

const ParamBlock& NetworkParams::block(std::string_view name) const {
  for (const auto& b : blocks)
    if (b.name == name) return b;
  throw ConfigError("unknown parameter block '" + std::string(name) + "'");
}

std::span<double> NetworkParams::view(std::string_view name) {
  const auto& b = block(name);
  return {values.data() + b.offset, b.size};
}

std::span<const double> NetworkParams::view(std::string_view name) const {
  const auto& b = block(name);
  return {values.data() + b.offset, b.size};
}

NetworkParams unet_init(const UNetConfig& config, std::size_t nx, std::size_t ny) {
  check_input(config, nx, ny);
  Layout layout = make_layout(config);
  NetworkParams params;
  params.values.assign(layout.total, 0.0);
  params.blocks = layout.blocks;

  std::mt19937_64 rng(config.init_seed);
  auto kaiming = [&](std::size_t offset, std::size_t n, double fan_in) {
    std::normal_distribution<double> dist(0.0, std::sqrt(2.0 / fan_in));
    for (std::size_t q = 0; q < n; ++q) params.values[offset + q] = dist(rng);
  };
  auto bias = [&](std::size_t offset, std::size_t n, double fan_in) {
    const double bound = 1.0 / std::sqrt(fan_in);
    std::uniform_real_distribution<double> dist(-bound, bound);
    for (std::size_t q = 0; q < n; ++q) params.values[offset + q] = dist(rng);
  };
  auto conv = [&](const ConvSpec& s) {
    const double fan_in = static_cast<double>(s.cin * s.k * s.k);
    kaiming(s.w, static_cast<std::size_t>(s.cout) * s.cin * s.k * s.k, fan_in);
    if (s.bias) bias(s.b, static_cast<std::size_t>(s.cout), fan_in);
  };
  auto norm = [&](const NormSpec& s) {
    std::fill_n(params.values.begin() + static_cast<std::ptrdiff_t>(s.scale), s.c, 1.0);
  };
  auto stage = [&](const StageSpec& s) {
    conv(s.conv1);
    norm(s.norm1);
    conv(s.conv2);
    norm(s.norm2);
  };

  for (const auto& s : layout.enc) stage(s);
  for (std::size_t s = layout.up.size(); s-- > 0;) {
    const UpSpec& u = layout.up[s];
    kaiming(u.w, static_cast<std::size_t>(u.cin) * u.cout * 4, static_cast<double>(u.cin));
    bias(u.b, static_cast<std::size_t>(u.cout), static_cast<double>(u.cin));
    stage(layout.dec[s]);
  }
  conv(layout.head);
  return params;
}

struct UNetPass::Tape {
  Layout layout;
  std::vector<StageCache> enc, dec;
  std::vector<std::vector<std::uint32_t>> argmax;
  std::vector<Tensor> up_in;
  Tensor head_in;
  Tensor head_pre;
  Image output;
};

UNetPass::UNetPass(const NetworkParams& params, const UNetConfig& config, const Image& z)
    : params_(params), config_(config), tape_(std::make_unique<Tape>()) {
  check_input(config, z.nx(), z.ny());
  if (!all_finite(z.values())) throw NumericalError("unet: non-finite input");
  Tape& t = *tape_;
  t.layout = make_layout(config);
  if (t.layout.total != params.size()) throw ConfigError("unet: parameter vector does not match the configuration");
  const double* p = params.values.data();
  const std::size_t levels = config.channels.size();
  const double eps = config.norm_eps;

  Tensor x(1, static_cast<int>(z.nx()), static_cast<int>(z.ny()));
  std::copy(z.values().begin(), z.values().end(), x.v.begin());

  t.enc.resize(levels);
  t.argmax.resize(levels - 1);
  for (std::size_t s = 0; s < levels; ++s) {
    stage_forward(x, p, t.layout.enc[s], eps, t.enc[s]);
    if (s + 1 < levels) x = pool_forward(t.enc[s].act2, t.argmax[s]);
  }

  t.dec.resize(levels - 1);
  t.up_in.resize(levels - 1);
  const Tensor* below = &t.enc[levels - 1].act2;
  for (std::size_t s = levels - 1; s-- > 0;) {
    t.up_in[s] = *below;
    const Tensor up = up_forward(*below, p, t.layout.up[s]);
    stage_forward(concat(t.enc[s].act2, up), p, t.layout.dec[s], eps, t.dec[s]);
    below = &t.dec[s].act2;
  }

  t.head_in = *below;
  t.head_pre = conv_forward(t.head_in, p, t.layout.head);
  t.output = Image(z.nx(), z.ny());
  for (std::size_t q = 0; q < t.output.size(); ++q) {
    const double h = t.head_pre.v[q];
    switch (config.head) {
      case HeadKind::conv3x3_relu: t.output[q] = h > 0.0 ? h : 0.0; break;
      case HeadKind::conv1x1_nobias_leakyrelu: t.output[q] = h > 0.0 ? h : config.leaky_slope * h; break;
      case HeadKind::conv1x1_nobias_linear: t.output[q] = h; break;
    }
  }
}

UNetPass::~UNetPass() = default;

const Image& UNetPass::output() const { return tape_->output; }

UNetGradients UNetPass::vjp(const Image& upstream) const {
  const Tape& t = *tape_;
  if (!upstream.same_shape(t.output)) throw ConfigError("unet_vjp: upstream shape mismatch");
  const double* p = params_.values.data();
  const std::size_t levels = config_.channels.size();
  UNetGradients out;
  out.params.assign(params_.size(), 0.0);
  double* g = out.params.data();

  Tensor d(1, t.head_pre.h, t.head_pre.w);
  for (std::size_t q = 0; q < upstream.size(); ++q) {
    const double h = t.head_pre.v[q];
    double slope = 1.0;
    if (config_.head == HeadKind::conv3x3_relu) slope = h > 0.0 ? 1.0 : 0.0;
    if (config_.head == HeadKind::conv1x1_nobias_leakyrelu) slope = h > 0.0 ? 1.0 : config_.leaky_slope;
    d.v[q] = upstream[q] * slope;
  }
  d = conv_backward(t.head_in, p, t.layout.head, d, g);

  // d now holds the gradient of the last decoder output.
  std::vector<Tensor> skip(levels);
  for (std::size_t s = 0; s + 1 < levels; ++s) {
    const Tensor dcat = stage_backward(t.dec[s], p, t.layout.dec[s], std::move(d), g);
    auto [dskip, dup] = split(dcat, config_.channels[s]);
    skip[s] = std::move(dskip);
    d = up_backward(t.up_in[s], p, t.layout.up[s], dup, g);
  }

  // d is the gradient of the bottleneck output.
  for (std::size_t s = levels; s-- > 0;) {
    if (s + 1 < levels) {
      Tensor total = std::move(skip[s]);
      pool_backward_add(t.argmax[s], d, total);
      d = std::move(total);
    }
    d = stage_backward(t.enc[s], p, t.layout.enc[s], std::move(d), g);
  }

  out.input = Image(t.output.nx(), t.output.ny());
  std::copy(d.v.begin(), d.v.end(), out.input.values().begin());
  return out;
}

Image unet_forward(const NetworkParams& params, const UNetConfig& config, const Image& z) {
  return UNetPass(params, config, z).output();
}

UNetGradients unet_vjp(const NetworkParams& params, const UNetConfig& config, const Image& z,
                       const Image& upstream) {
  return UNetPass(params, config, z).vjp(upstream);
}

}  // namespace patk
