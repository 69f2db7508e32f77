#include "coordsr/phantom.hpp"

#include <algorithm>
#include <cmath>
#include <functional>
#include <numbers>
#include <random>
#include <vector>

#include "coordsr/errors.hpp"

namespace coordsr {

PhantomKind parse_phantom_kind(std::string_view s) {
  if (s == "shepp-logan" || s == "shepp-logan-like" || s == "shepp_logan") return PhantomKind::shepp_logan;
  if (s == "texture") return PhantomKind::texture;
  if (s == "edges") return PhantomKind::edges;
  throw ConfigError("unknown phantom kind '" + std::string(s) + "'");
}

std::string to_string(PhantomKind k) {
  switch (k) {
    case PhantomKind::shepp_logan: return "shepp-logan";
    case PhantomKind::texture: return "texture";
    case PhantomKind::edges: return "edges";
  }
  return "?";
}

namespace {

constexpr double kPi = std::numbers::pi;

struct Ellipse {
  double value;  // additive intensity
  double a, b;   // semi-axes
  double x0, y0;
  double phi;    // radians
  bool inside(double x, double y) const {
    const double c = std::cos(phi), s = std::sin(phi);
    const double dx = x - x0, dy = y - y0;
    const double u = (c * dx + s * dy) / a;
    const double v = (-s * dx + c * dy) / b;
    return u * u + v * v <= 1.0;
  }
};

// 2x2 supersampled rasterization of f over [-1,1]^2 (y down).
ImageGrid rasterize(int n, const std::function<double(double, double)>& f) {
  ImageGrid img(n, n);
  for (int r = 0; r < n; ++r) {
    for (int c = 0; c < n; ++c) {
      double acc = 0.0;
      for (int sy = 0; sy < 2; ++sy) {
        for (int sx = 0; sx < 2; ++sx) {
          const double x = -1.0 + 2.0 * (c + 0.25 + 0.5 * sx) / n;
          const double y = -1.0 + 2.0 * (r + 0.25 + 0.5 * sy) / n;
          acc += f(x, y);
        }
      }
      img(r, c) = static_cast<float>(std::clamp(acc / 4.0, 0.0, 1.0));
    }
  }
  return img;
}

ImageGrid shepp_logan(int n, std::mt19937_64& rng) {
  std::uniform_real_distribution<double> jit(-1.0, 1.0);
  // modified Shepp-Logan (value, a, b, x0, y0, phi deg)
  const double base[10][6] = {
      {1.0, .69, .92, 0, 0, 0},          {-.8, .6624, .874, 0, -.0184, 0},
      {-.2, .11, .31, .22, 0, -18},      {-.2, .16, .41, -.22, 0, 18},
      {.1, .21, .25, 0, .35, 0},         {.1, .046, .046, 0, .1, 0},
      {.1, .046, .046, 0, -.1, 0},       {.1, .046, .023, -.08, -.605, 0},
      {.1, .023, .023, 0, -.606, 0},     {.1, .023, .046, .06, -.605, 0}};
  std::vector<Ellipse> es;
  for (int i = 0; i < 10; ++i) {
    const auto& p = base[i];
    const double j = i < 2 ? 0.0 : 1.0;
    es.push_back(Ellipse{p[0] * (1.0 + 0.1 * j * jit(rng)), p[1] * (1.0 + 0.1 * j * jit(rng)),
                         p[2] * (1.0 + 0.1 * j * jit(rng)), p[3] + 0.02 * j * jit(rng),
                         p[4] + 0.02 * j * jit(rng), (p[5] + 5.0 * j * jit(rng)) * kPi / 180.0});
  }
  return rasterize(n, [&](double x, double y) {
    double v = 0.0;
    for (const auto& e : es)
      if (e.inside(x, y)) v += e.value;
    return v;
  });
}

struct Grating {
  double kx, ky;  // radians per unit of the [-1,1] frame
  double phase;
  double amp;
};

ImageGrid texture(int n, std::mt19937_64& rng) {
  std::uniform_real_distribution<double> u(0.0, 1.0);
  // frequencies in cycles/pixel, converted to the [-1,1] frame (n/2 px per unit)
  auto make_grating = [&](double fmin, double fmax, double amp) {
    const double f = fmin + (fmax - fmin) * u(rng);
    const double th = u(rng) * kPi;
    const double w = 2.0 * kPi * f * n / 2.0;
    return Grating{w * std::cos(th), w * std::sin(th), u(rng) * 2.0 * kPi, amp};
  };

  const Ellipse body{0.0, 0.78 + 0.12 * u(rng), 0.82 + 0.12 * u(rng), 0.08 * (u(rng) - 0.5),
                     0.08 * (u(rng) - 0.5), (u(rng) - 0.5) * 0.6};
  const double body_level = 0.35 + 0.1 * u(rng);
  const Grating body_tex = make_grating(0.30, 0.45, 0.10 + 0.04 * u(rng));
  const double bg_level = 0.2 + 0.1 * u(rng);
  const Grating bg_tex = make_grating(0.12, 0.25, 0.05);

  struct Region {
    Ellipse shape;
    double level;
    Grating tex;
  };
  std::vector<Region> regions;
  const int count = 5 + static_cast<int>(u(rng) * 4);
  for (int i = 0; i < count; ++i) {
    const double a = 0.12 + 0.25 * u(rng);
    const double b = 0.08 + 0.2 * u(rng);
    const double ang = u(rng) * 2.0 * kPi;
    const double rad = 0.45 * u(rng);
    regions.push_back(Region{Ellipse{0.0, a, b, rad * std::cos(ang), rad * std::sin(ang), u(rng) * kPi},
                             0.25 + 0.5 * u(rng), make_grating(0.30, 0.45, 0.14 + 0.08 * u(rng))});
  }

  return rasterize(n, [&](double x, double y) {
    if (!body.inside(x, y)) {
      return bg_level + bg_tex.amp * std::sin(bg_tex.kx * x + bg_tex.ky * y + bg_tex.phase);
    }
    double v = body_level + body_tex.amp * std::sin(body_tex.kx * x + body_tex.ky * y + body_tex.phase);
    for (const auto& reg : regions) {
      if (reg.shape.inside(x, y)) {
        v = reg.level + reg.tex.amp * std::sin(reg.tex.kx * x + reg.tex.ky * y + reg.tex.phase);
      }
    }
    return v;
  });
}

ImageGrid edges(int n, std::mt19937_64& rng) {
  std::uniform_real_distribution<double> u(0.0, 1.0);
  struct Rect {
    double x0, y0, x1, y1, level;
  };
  std::vector<Rect> rects;
  const int nr = 3 + static_cast<int>(u(rng) * 3);
  for (int i = 0; i < nr; ++i) {
    const double cx = 1.6 * u(rng) - 0.8, cy = 1.6 * u(rng) - 0.8;
    const double hw = 0.1 + 0.3 * u(rng), hh = 0.1 + 0.3 * u(rng);
    rects.push_back(Rect{cx - hw, cy - hh, cx + hw, cy + hh, 0.1 + 0.8 * u(rng)});
  }
  const double ramp_angle = u(rng) * kPi;
  const double wedge_angle = u(rng) * kPi;
  const double wedge_offset = 0.4 * (u(rng) - 0.5);
  const double disk_x = 0.8 * (u(rng) - 0.5), disk_y = 0.8 * (u(rng) - 0.5);
  const double disk_r = 0.2 + 0.15 * u(rng);

  return rasterize(n, [&](double x, double y) {
    // background linear ramp
    double v = 0.25 + 0.2 * (std::cos(ramp_angle) * x + std::sin(ramp_angle) * y);
    // half-plane step
    if (std::cos(wedge_angle) * x + std::sin(wedge_angle) * y > wedge_offset) v += 0.15;
    for (const auto& r : rects)
      if (x >= r.x0 && x <= r.x1 && y >= r.y0 && y <= r.y1) v = r.level;
    const double d = std::hypot(x - disk_x, y - disk_y);
    if (d < disk_r) v = 0.9 - 0.6 * d / disk_r;  // radial ramp
    return v;
  });
}

}  // namespace

ImageGrid make_phantom(PhantomKind kind, int n, std::uint64_t seed) {
  if (n < 32) throw DomainError("phantom size must be >= 32, got " + std::to_string(n));
  std::mt19937_64 rng(seed);
  switch (kind) {
    case PhantomKind::shepp_logan: return shepp_logan(n, rng);
    case PhantomKind::texture: return texture(n, rng);
    case PhantomKind::edges: return edges(n, rng);
  }
  throw ConfigError("unknown phantom kind");
}

}  // namespace coordsr
