#include "snapture/synth.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <iomanip>
#include <sstream>

#include "snapture/image_io.hpp"
#include "snapture/rng.hpp"

namespace snapture {

namespace {

constexpr double kPi = 3.14159265358979323846;
// Scene layout is authored on a 128 x 96 canvas and scaled to the output size.
constexpr double kBaseW = 128.0;
constexpr double kBaseH = 96.0;

using Point = std::array<double, 2>;
using Poly = std::vector<Point>;
using Shape = std::vector<Poly>;

struct Rgb {
  double r, g, b;
};

Poly rect(double x0, double y0, double x1, double y1) {
  return {{x0, y0}, {x1, y0}, {x1, y1}, {x0, y1}};
}

Poly octagon(double x0, double y0, double x1, double y1, double c) {
  return {{x0 + c, y0}, {x1 - c, y0}, {x1, y0 + c}, {x1, y1 - c},
          {x1 - c, y1}, {x0 + c, y1}, {x0, y1 - c}, {x0, y0 + c}};
}

Poly ellipse(double cx, double cy, double rx, double ry, int n = 28) {
  Poly p;
  for (int i = 0; i < n; ++i) {
    const double a = 2 * kPi * i / n;
    p.push_back({cx + rx * std::cos(a), cy + ry * std::sin(a)});
  }
  return p;
}

Poly rotated(Poly p, double angle, Point pivot) {
  const double c = std::cos(angle), s = std::sin(angle);
  for (auto &q : p) {
    const double x = q[0] - pivot[0], y = q[1] - pivot[1];
    q = {pivot[0] + c * x - s * y, pivot[1] + s * x + c * y};
  }
  return p;
}

// Finger pointing up from the top edge of the palm, tilted about its base.
Poly finger(double x0, double length, double tilt = 0.0) {
  return rotated(rect(x0 - 1.3, -5.5 - length, x0 + 1.3, -4.5), tilt, {x0, -5.0});
}

Shape hand_shape(Pose pose) {
  const Poly palm = octagon(-6, -6, 6, 6, 2);
  const Poly fist = octagon(-6, -5, 6, 6, 3);
  const Poly thumb_tuck = rect(-8, -2, -5, 3);
  switch (pose) {
  case Pose::fist: return {fist, thumb_tuck};
  case Pose::open_palm:
    return {palm,           finger(-4.5, 8),  finger(-1.5, 10), finger(1.5, 10),
            finger(4.5, 8), rotated(rect(-13, -1.3, -5, 1.3), 0.6, {-6, 0})};
  case Pose::point: return {fist, thumb_tuck, finger(-2, 11)};
  case Pose::v_sign: return {fist, thumb_tuck, finger(-3, 10, -0.25), finger(1.5, 10, 0.25)};
  case Pose::curl: return {fist, thumb_tuck, finger(-4, 3), finger(-1, 3.5), finger(2, 3.5)};
  case Pose::flat: {
    Shape s = {palm, finger(-4.5, 8), finger(-1.5, 9), finger(1.5, 9), finger(4.5, 7)};
    for (auto &p : s) p = rotated(p, -kPi / 2, {0, 0});
    return s;
  }
  }
  return {fist};
}

bool inside(const Poly &p, double x, double y) {
  bool in = false;
  for (std::size_t i = 0, j = p.size() - 1; i < p.size(); j = i++) {
    const auto &a = p[i], &b = p[j];
    if ((a[1] > y) != (b[1] > y) && x < (b[0] - a[0]) * (y - a[1]) / (b[1] - a[1]) + a[0])
      in = !in;
  }
  return in;
}

bool inside(const Shape &s, double x, double y) {
  for (const auto &p : s)
    if (inside(p, x, y)) return true;
  return false;
}

// Fractional pixel coverage, accumulated with a weight, using ss x ss samples.
void accumulate_coverage(std::vector<double> &cov, int w, int h, const Shape &s, double weight,
                         int ss) {
  double x0 = 1e9, y0 = 1e9, x1 = -1e9, y1 = -1e9;
  for (const auto &p : s)
    for (const auto &q : p) {
      x0 = std::min(x0, q[0]);
      y0 = std::min(y0, q[1]);
      x1 = std::max(x1, q[0]);
      y1 = std::max(y1, q[1]);
    }
  const int c0 = std::max(0, static_cast<int>(std::floor(x0))), c1 = std::min(w - 1, static_cast<int>(std::ceil(x1)));
  const int r0 = std::max(0, static_cast<int>(std::floor(y0))), r1 = std::min(h - 1, static_cast<int>(std::ceil(y1)));
  const double step = 1.0 / ss;
  for (int r = r0; r <= r1; ++r)
    for (int c = c0; c <= c1; ++c) {
      int hits = 0;
      for (int sy = 0; sy < ss; ++sy)
        for (int sx = 0; sx < ss; ++sx)
          hits += inside(s, c + (sx + 0.5) * step, r + (sy + 0.5) * step);
      if (hits) cov[static_cast<std::size_t>(r) * w + c] += weight * hits / (ss * ss);
    }
}

void composite(std::vector<Rgb> &img, const std::vector<double> &cov, Rgb color) {
  for (std::size_t i = 0; i < img.size(); ++i) {
    const double a = std::clamp(cov[i], 0.0, 1.0);
    if (a <= 0) continue;
    img[i] = {img[i].r * (1 - a) + color.r * a, img[i].g * (1 - a) + color.g * a,
              img[i].b * (1 - a) + color.b * a};
  }
}

Shape transformed(const Shape &s, Point at, double scale, double angle) {
  Shape out = s;
  for (auto &p : out) {
    p = rotated(p, angle, {0, 0});
    for (auto &q : p) q = {at[0] + scale * q[0], at[1] + scale * q[1]};
  }
  return out;
}

Shape segment(Point a, Point b, double width) {
  const double dx = b[0] - a[0], dy = b[1] - a[1];
  const double len = std::max(std::hypot(dx, dy), 1e-9);
  const double nx = -dy / len * width / 2, ny = dx / len * width / 2;
  return {{{a[0] + nx, a[1] + ny}, {b[0] + nx, b[1] + ny}, {b[0] - nx, b[1] - ny}, {a[0] - nx, a[1] - ny}}};
}

const Point kRest{96, 90};
const Point kShoulder{84, 44};
constexpr double kLean = 7.0;

bool is_paused_path(const std::string &path) {
  return path == "raise" || path == "left" || path == "right" || path == "forward";
}

Point peak_point(const std::string &path) {
  if (path == "raise") return {90, 32};
  if (path == "left") return {38, 40};
  if (path == "right") return {114, 56};
  if (path == "forward") return {64, 62};
  throw ConfigError("unknown paused path '" + path + "'");
}

// Cyclic position for repeating paths at (real) time t.
Point cycle_point(const std::string &path, double t) {
  if (path == "beckon") return {86, 50 + 9 * std::sin(2 * kPi * t / 3)};
  if (path == "circle") return {88 + 15 * std::cos(2 * kPi * t / 4), 44 + 15 * std::sin(2 * kPi * t / 4)};
  if (path == "wave") return {92 + 12 * std::sin(2 * kPi * t / 3), 40};
  if (path == "turn") return {42 + 13 * std::cos(-2 * kPi * t / 4.5), 44 + 13 * std::sin(-2 * kPi * t / 4.5)};
  if (path == "shake") return {74 + 7 * std::sin(2 * kPi * t / 2.5), 58 + 3 * std::cos(2 * kPi * t / 2.5)};
  throw ConfigError("unknown path '" + path + "'");
}

Point lerp(Point a, Point b, double u) { return {a[0] + (b[0] - a[0]) * u, a[1] + (b[1] - a[1]) * u}; }
Point add(Point a, Point b) { return {a[0] + b[0], a[1] + b[1]}; }

struct Jitter {
  Point rest{0, 0}, peak{0, 0};
};

// Paused: rest -> peak over [0, k-3], hold until k+4, back to rest. The
// pose unfolds on frames k and k+1 only, so every pose change sits between
// fully held frames and never survives the two-sided differential AND.
// Repeating: rest -> cycle over [0, 2], cycle until n-3, back to rest.
Point path_point(const std::string &path, int n, double t, const Jitter &j) {
  t = std::clamp(t, 0.0, static_cast<double>(n - 1));
  const Point rest = add(kRest, j.rest);
  if (is_paused_path(path)) {
    const int k = n / 2;
    const double a = k - 3, b = k + 4;
    const Point peak = add(peak_point(path), j.peak);
    if (t <= a) return lerp(rest, peak, t / a);
    if (t <= b) return peak;
    return lerp(peak, rest, (t - b) / (n - 1 - b));
  }
  const double a = 2, b = n - 3;
  if (t <= a) return lerp(rest, add(cycle_point(path, a), j.peak), t / a);
  if (t <= b) return add(cycle_point(path, t), j.peak);
  return lerp(add(cycle_point(path, b), j.peak), rest, (t - b) / (n - 1 - b));
}

// Upper-body lean that accompanies arm transport, in [0, 1]; zero at rest
// and while a paused gesture holds its peak.
double sway(const std::string &path, int n, double t) {
  t = std::clamp(t, 0.0, static_cast<double>(n - 1));
  if (is_paused_path(path)) {
    const int k = n / 2;
    const double a = k - 3, b = k + 4;
    if (t <= a) return std::sin(kPi * t / a);
    if (t <= b) return 0.0;
    return std::sin(kPi * (t - b) / (n - 1 - b));
  }
  const double a = 2, b = n - 3;
  if (t <= a) return std::sin(kPi / 2 * t / a);
  if (t <= b) return 1.0;
  return std::cos(kPi / 2 * (t - b) / (n - 1 - b));
}

Rgb scaled(Rgb c, double k) { return {c.r * k, c.g * k, c.b * k}; }

} // namespace

void SynthConfig::validate() const {
  if (classes.size() < 2) throw ConfigError("synth: need at least two classes");
  if (per_class < 1) throw ConfigError("synth: per_class must be >= 1");
  if (frames < 9) throw ConfigError("synth: sequences need at least 9 frames");
  if (width < 32 || height < 24) throw ConfigError("synth: frame size too small");
  if (!(noise_sigma >= 0)) throw ConfigError("synth: noise sigma must be >= 0");
  for (const auto &c : classes) {
    if (c.name.empty()) throw ConfigError("synth: class without a name");
    const bool paused_path = is_paused_path(c.path);
    if ((c.motion == Motion::paused) != paused_path)
      throw ConfigError("synth: path '" + c.path + "' does not fit the motion of class " + c.name);
    if (!paused_path) cycle_point(c.path, 0); // validates the name
    if (c.blur_peak && c.motion != Motion::repeating)
      throw ConfigError("synth: blur_peak applies to repeating classes only");
  }
}

Pose parse_pose(const std::string &n) {
  if (n == "fist") return Pose::fist;
  if (n == "open_palm") return Pose::open_palm;
  if (n == "point") return Pose::point;
  if (n == "flat") return Pose::flat;
  if (n == "v_sign") return Pose::v_sign;
  if (n == "curl") return Pose::curl;
  throw ConfigError("unknown pose '" + n + "'");
}

const char *to_string(Pose p) noexcept {
  switch (p) {
  case Pose::fist: return "fist";
  case Pose::open_palm: return "open_palm";
  case Pose::point: return "point";
  case Pose::flat: return "flat";
  case Pose::v_sign: return "v_sign";
  case Pose::curl: return "curl";
  }
  return "?";
}

Motion parse_motion(const std::string &n) {
  if (n == "paused") return Motion::paused;
  if (n == "repeating") return Motion::repeating;
  throw ConfigError("unknown motion '" + n + "'");
}

const char *to_string(Motion m) noexcept { return m == Motion::paused ? "paused" : "repeating"; }

SynthConfig synth_preset(const std::string &name) {
  SynthConfig c;
  // stop and no share their path and differ only in the unfolded pose.
  const ClassSpec stop{"stop", Motion::paused, "raise", Pose::open_palm, false};
  const ClassSpec no{"no", Motion::paused, "raise", Pose::point, false};
  const ClassSpec left{"left", Motion::paused, "left", Pose::flat, false};
  const ClassSpec come{"come", Motion::repeating, "beckon", Pose::curl, false};
  const ClassSpec circle{"circle", Motion::repeating, "circle", Pose::point, true};
  if (name == "benchmark") {
    c.classes = {stop, no, left, come};
  } else if (name == "benchmark-blur") {
    c.classes = {stop, no, left, come, circle};
  } else if (name == "gate") {
    c.classes = {stop,
                 no,
                 left,
                 {"right", Motion::paused, "right", Pose::v_sign, false},
                 come,
                 circle,
                 {"wave", Motion::repeating, "wave", Pose::open_palm, false},
                 {"turn", Motion::repeating, "turn", Pose::point, false},
                 {"shake", Motion::repeating, "shake", Pose::fist, false}};
    c.per_class = 10;
  } else {
    throw ConfigError("unknown synth preset '" + name + "' (benchmark, benchmark-blur, gate)");
  }
  return c;
}

std::vector<Point> nominal_path(const std::string &path, int frames, int width, int height) {
  std::vector<Point> out;
  const double sx = width / kBaseW, sy = height / kBaseH;
  for (int t = 0; t < frames; ++t) {
    const auto p = path_point(path, frames, t, {});
    out.push_back({p[0] * sx, p[1] * sy});
  }
  return out;
}

std::vector<SynthSequence> generate(const SynthConfig &cfg) {
  cfg.validate();
  const int w = cfg.width, h = cfg.height, n = cfg.frames;
  const double sx = w / kBaseW, sy = h / kBaseH;
  const double unit = std::min(sx, sy);
  auto to_px = [&](Point p) { return Point{p[0] * sx, p[1] * sy}; };
  const std::size_t npix = static_cast<std::size_t>(w) * h;

  std::vector<SynthSequence> out;
  int serial = 0;
  for (std::size_t ci = 0; ci < cfg.classes.size(); ++ci) {
    const auto &spec = cfg.classes[ci];
    for (int rep = 0; rep < cfg.per_class; ++rep, ++serial) {
      Rng rng = make_rng(cfg.seed, 0x10000u * (ci + 1) + static_cast<std::uint64_t>(rep));
      Jitter jit;
      jit.rest = {uniform(rng, -3, 3), uniform(rng, -2, 2)};
      jit.peak = {uniform(rng, -4, 4), uniform(rng, -4, 4)};
      const double hand_scale = 1.25 * uniform(rng, 0.9, 1.1) * unit;
      const double hand_angle = uniform(rng, -0.14, 0.14);
      const double skin_k = uniform(rng, 0.85, 1.1);
      const Rgb skin = scaled({200, 140, 110}, skin_k);
      const Rgb shirt{45 + uniform(rng, -10, 10), 65 + uniform(rng, -10, 10), 120 + uniform(rng, -10, 10)};
      const double bg_shift = uniform(rng, -15, 15);
      const Point face_c = to_px({64 + uniform(rng, -2, 2), 18 + uniform(rng, -1.5, 1.5)});
      const double face_rx = 9 * unit * uniform(rng, 0.95, 1.05), face_ry = 12 * unit * uniform(rng, 0.95, 1.05);

      // Static layers.
      std::vector<Rgb> backdrop(npix);
      for (int r = 0; r < h; ++r) {
        const double v = static_cast<double>(r) / (h - 1);
        for (int c = 0; c < w; ++c)
          backdrop[static_cast<std::size_t>(r) * w + c] = {115 - 30 * v + bg_shift, 122 - 30 * v + bg_shift,
                                                           135 - 30 * v + bg_shift};
      }
      std::vector<double> cov(npix, 0.0);
      auto paint = [&](std::vector<Rgb> &img, const Shape &s, Rgb color) {
        std::fill(cov.begin(), cov.end(), 0.0);
        accumulate_coverage(cov, w, h, s, 1.0, 3);
        composite(img, cov, color);
      };
      auto scale_shape = [&](Shape s) {
        for (auto &p : s)
          for (auto &q : p) q = to_px(q);
        return s;
      };
      paint(backdrop, scale_shape({rect(4, 8, 26, 70)}), {90, 110, 140});
      paint(backdrop, scale_shape({rect(100, 12, 122, 30)}), {100, 140, 100});
      auto figure = [&](std::vector<Rgb> &img, Point off) {
        auto moved = [&](Shape sh) {
          for (auto &p : sh)
            for (auto &q : p) q = {q[0] + off[0], q[1] + off[1]};
          return sh;
        };
        paint(img, moved(scale_shape({{{40, 38}, {88, 38}, {100, 96}, {28, 96}}})), shirt);
        paint(img, moved({ellipse(face_c[0], face_c[1], face_rx, face_ry)}), skin);
        paint(img, moved(scale_shape({ellipse(30, 86, 6, 5)})), skin);
      };
      const double lean = kLean * unit * uniform(rng, 0.8, 1.2);
      SynthSequence seq;
      seq.class_name = spec.name;
      seq.motion = spec.motion;
      seq.sequence.id = "seq_" + std::string(4 - std::min<std::size_t>(4, std::to_string(serial).size()), '0') +
                        std::to_string(serial);
      seq.sequence.label = static_cast<int>(ci);
      seq.sequence.label_name = spec.name;
      seq.sequence.subject = "s" + std::to_string(rep % 8);
      // Covers the face under the full lean as well.
      BBox face;
      face.min_row = std::max(0, static_cast<int>(std::floor(face_c[1] - face_ry)) - 2);
      face.max_row = std::min(h - 1, static_cast<int>(std::ceil(face_c[1] + face_ry + 0.35 * lean)) + 2);
      face.min_col = std::max(0, static_cast<int>(std::floor(face_c[0] - face_rx)) - 2);
      face.max_col = std::min(w - 1, static_cast<int>(std::ceil(face_c[0] + face_rx + 0.8 * lean)) + 2);
      seq.sequence.face_bbox = face;

      const int k = n / 2;
      const Point shoulder = to_px(kShoulder);
      std::vector<double> arm_cov(npix), hand_cov(npix);
      for (int t = 0; t < n; ++t) {
        const Point centre = to_px(path_point(spec.path, n, t, jit));
        seq.trajectory.push_back(centre);
        seq.nominal.push_back(to_px(path_point(spec.path, n, t, {})));

        Pose pose = spec.pose;
        if (spec.motion == Motion::paused && (t < k || t > k + 1)) pose = Pose::fist;
        const Shape local = hand_shape(pose);

        // Exposure window around the frame time; sub-positions are averaged.
        double exposure = 1.0;
        if (spec.blur_peak && std::abs(t - k) <= 1) exposure = 2.0;
        const int subs = 8;
        std::fill(arm_cov.begin(), arm_cov.end(), 0.0);
        std::fill(hand_cov.begin(), hand_cov.end(), 0.0);
        for (int s = 0; s < subs; ++s) {
          const double u = t + exposure * ((s + 0.5) / subs - 0.5);
          const Point at = to_px(path_point(spec.path, n, u, jit));
          const double su = lean * sway(spec.path, n, u);
          const Point sh{shoulder[0] + 0.8 * su, shoulder[1] + 0.35 * su};
          accumulate_coverage(arm_cov, w, h, segment(sh, at, 7 * unit), 1.0 / subs, 2);
          accumulate_coverage(hand_cov, w, h, transformed(local, at, hand_scale, hand_angle), 1.0 / subs, 2);
        }
        std::vector<Rgb> img = backdrop;
        const double sw = lean * sway(spec.path, n, t);
        figure(img, {0.8 * sw, 0.35 * sw});
        composite(img, arm_cov, scaled(shirt, 0.9));
        composite(img, hand_cov, skin);

        Frame f(w, h, 3);
        auto px = f.data();
        for (std::size_t i = 0; i < npix; ++i) {
          const double ch[3] = {img[i].r, img[i].g, img[i].b};
          for (int c = 0; c < 3; ++c) {
            const double v = ch[c] + (cfg.noise_sigma > 0 ? normal(rng, 0.0, cfg.noise_sigma) : 0.0);
            px[i * 3 + c] = static_cast<std::uint8_t>(std::clamp(std::lround(v), 0L, 255L));
          }
        }
        seq.sequence.frames.push_back(std::move(f));
      }
      out.push_back(std::move(seq));
    }
  }
  return out;
}

void write_corpus(const std::filesystem::path &out, const SynthConfig &cfg,
                  const std::vector<SynthSequence> &corpus) {
  namespace fs = std::filesystem;
  fs::create_directories(out);
  Manifest m;
  for (const auto &c : cfg.classes) m.classes.push_back(c.name);
  std::ostringstream traj;
  traj << std::setprecision(10);
  traj << "sequence_id,label,motion,frame_index,x,y,nominal_x,nominal_y\n";
  for (const auto &s : corpus) {
    const fs::path dir = out / s.sequence.id;
    fs::create_directories(dir);
    for (std::size_t t = 0; t < s.sequence.frames.size(); ++t) {
      std::ostringstream name;
      name << "frame_" << std::setw(3) << std::setfill('0') << t << ".ppm";
      write_pnm(dir / name.str(), s.sequence.frames[t]);
      traj << s.sequence.id << ',' << s.class_name << ',' << to_string(s.motion) << ',' << t << ','
           << s.trajectory[t][0] << ',' << s.trajectory[t][1] << ',' << s.nominal[t][0] << ','
           << s.nominal[t][1] << '\n';
    }
    ManifestEntry e;
    e.id = s.sequence.id;
    e.path = dir;
    e.label = s.class_name;
    e.label_index = s.sequence.label;
    e.subject = s.sequence.subject;
    e.face_bbox = s.sequence.face_bbox;
    m.entries.push_back(std::move(e));
  }
  write_file_atomic(out / "manifest.jsonl", format_manifest(m, out));
  write_file_atomic(out / "trajectories.csv", traj.str());
}

} // namespace snapture
