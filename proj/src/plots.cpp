#include "sp3d/plots.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>

#include <json.hpp>

namespace sp3d {

namespace {

// 5x7 bitmap glyphs for the handful of characters charts need.
const char* glyph(char c) {
  switch (c) {
    case '0': return "01110100011001110101110011000101110";
    case '1': return "00100011000010000100001000010001110";
    case '2': return "01110100010000100110010001000011111";
    case '3': return "11110000100110000010000011000101110";
    case '4': return "00110010101001011111000100001000010";
    case '5': return "11111100001111000001000011000101110";
    case '6': return "01110100001111010001100011000101110";
    case '7': return "11111000010001000100010001000010000";
    case '8': return "01110100010111010001100011000101110";
    case '9': return "01110100011000101111000010000101110";
    case '.': return "00000000000000000000000000110001100";
    case '=': return "00000000001111100000111110000000000";
    case '%': return "11001110010001000100010001001110011";
    case '-': return "00000000000000011111000000000000000";
    case 'A': return "01110100011000111111100011000110001";
    case 'P': return "11110100011000111110100001000010000";
    case 'R': return "11110100011000111110101001001010001";
    case 'E': return "11111100001000011110100001000011111";
    case 'L': return "10000100001000010000100001000011111";
    case 'M': return "10001110111010110001100011000110001";
    case 'J': return "00111000100001000010000101001001100";
    case 'C': return "01110100011000010000100001000101110";
    case 'S': return "01111100001000001110000010000111110";
    case 'T': return "11111001000010000100001000010000100";
    case 'O': return "01110100011000110001100011000101110";
    case 'H': return "10001100011000111111100011000110001";
    case 'I': return "01110001000010000100001000010001110";
    case 'K': return "10001100101010011000101001001010001";
    case 'D': return "11110100011000110001100011000111110";
    case 'N': return "10001110011010110011100011000110001";
    case 'G': return "01110100011000010111100011000101111";
    default: return nullptr;
  }
}

}  // namespace

Canvas::Canvas(int width, int height, std::array<double, 3> bg) : w_(width), h_(height) {
  px_.resize(static_cast<size_t>(w_) * h_ * 3);
  for (int64_t i = 0; i < static_cast<int64_t>(px_.size()); i += 3) {
    px_[static_cast<size_t>(i)] = bg[0];
    px_[static_cast<size_t>(i) + 1] = bg[1];
    px_[static_cast<size_t>(i) + 2] = bg[2];
  }
}

void Canvas::set(int x, int y, const std::array<double, 3>& c, double alpha) {
  if (x < 0 || x >= w_ || y < 0 || y >= h_ || alpha <= 0.0) return;
  double* p = px_.data() + (static_cast<size_t>(y) * w_ + x) * 3;
  for (int ch = 0; ch < 3; ++ch)
    p[ch] = p[ch] * (1.0 - alpha) + c[static_cast<size_t>(ch)] * alpha;
}

void Canvas::line(double x0, double y0, double x1, double y1, std::array<double, 3> color,
                  double thickness) {
  const double r = thickness / 2.0;
  const int bx0 = static_cast<int>(std::floor(std::min(x0, x1) - r - 1));
  const int bx1 = static_cast<int>(std::ceil(std::max(x0, x1) + r + 1));
  const int by0 = static_cast<int>(std::floor(std::min(y0, y1) - r - 1));
  const int by1 = static_cast<int>(std::ceil(std::max(y0, y1) + r + 1));
  const double dx = x1 - x0, dy = y1 - y0;
  const double len2 = dx * dx + dy * dy;
  for (int y = by0; y <= by1; ++y)
    for (int x = bx0; x <= bx1; ++x) {
      double t = len2 > 1e-12 ? ((x - x0) * dx + (y - y0) * dy) / len2 : 0.0;
      t = std::clamp(t, 0.0, 1.0);
      const double ex = x0 + t * dx - x, ey = y0 + t * dy - y;
      set(x, y, color, std::clamp(r + 0.5 - std::sqrt(ex * ex + ey * ey), 0.0, 1.0));
    }
}

void Canvas::rect(double x0, double y0, double x1, double y1, std::array<double, 3> color) {
  for (int y = static_cast<int>(y0); y <= static_cast<int>(y1); ++y)
    for (int x = static_cast<int>(x0); x <= static_cast<int>(x1); ++x) set(x, y, color, 1.0);
}

void Canvas::text(double x, double y, const std::string& s, std::array<double, 3> color,
                  int scale) {
  double cx = x;
  for (char c : s) {
    const char* g = glyph(static_cast<char>(std::toupper(c)));
    if (g) {
      for (int row = 0; row < 7; ++row)
        for (int col = 0; col < 5; ++col)
          if (g[row * 5 + col] == '1')
            for (int sy = 0; sy < scale; ++sy)
              for (int sx = 0; sx < scale; ++sx)
                set(static_cast<int>(cx) + col * scale + sx,
                    static_cast<int>(y) + row * scale + sy, color, 1.0);
    }
    cx += 6.0 * scale;
  }
}

void Canvas::blit_image(const Tensor& img) {
  for (int y = 0; y < h_ && y < img.dim(0); ++y)
    for (int x = 0; x < w_ && x < img.dim(1); ++x)
      for (int ch = 0; ch < 3; ++ch)
        px_[(static_cast<size_t>(y) * w_ + x) * 3 + static_cast<size_t>(ch)] =
            img.at(y, x, ch);
}

void Canvas::save_ppm(const std::string& path) const {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw IoError("cannot write " + path);
  out << "P6\n" << w_ << " " << h_ << "\n255\n";
  for (double v : px_)
    out.put(static_cast<char>(std::clamp(v, 0.0, 1.0) * 255.0 + 0.5));
}

namespace {

const std::array<std::array<double, 3>, 6> kSeries = {{{0.85, 0.25, 0.2},
                                                       {0.2, 0.45, 0.85},
                                                       {0.2, 0.7, 0.3},
                                                       {0.85, 0.65, 0.1},
                                                       {0.6, 0.3, 0.8},
                                                       {0.1, 0.7, 0.7}}};

struct Axes {
  int x0 = 50, y0 = 20, x1 = 470, y1 = 300;
  double px(double t) const { return x0 + t * (x1 - x0); }
  double py(double t) const { return y1 - t * (y1 - y0); }
};

void draw_axes(Canvas& c, const Axes& a) {
  c.line(a.x0, a.y1, a.x1, a.y1, {0, 0, 0});
  c.line(a.x0, a.y0, a.x0, a.y1, {0, 0, 0});
}

}  // namespace

void plot_pr_curves(const std::vector<FramePredictions>& preds,
                    const std::vector<Pose3DSet>& gts, const std::vector<int>& thresholds,
                    const std::string& out_path) {
  Canvas c(520, 340);
  Axes a;
  draw_axes(c, a);
  c.text(200, 320, "RECALL", {0, 0, 0});
  c.text(4, 10, "PRECISION", {0, 0, 0});
  int64_t n_gt = 0;
  for (const auto& g : gts) n_gt += g.person_count();
  for (size_t ti = 0; ti < thresholds.size(); ++ti) {
    // Rebuild the raw PR points the same way average_precision ranks them.
    struct Det {
      double score;
      int frame, person;
    };
    std::vector<Det> dets;
    for (size_t f = 0; f < preds.size(); ++f)
      for (int64_t i = 0; i < preds[f].poses.person_count(); ++i)
        dets.push_back({preds[f].scores[static_cast<size_t>(i)], static_cast<int>(f),
                        static_cast<int>(i)});
    std::sort(dets.begin(), dets.end(), [](const Det& x, const Det& y) {
      if (x.score != y.score) return x.score > y.score;
      if (x.frame != y.frame) return x.frame < y.frame;
      return x.person < y.person;
    });
    std::vector<std::vector<bool>> claimed(gts.size());
    for (size_t f = 0; f < gts.size(); ++f)
      claimed[f].assign(static_cast<size_t>(gts[f].person_count()), false);
    int64_t tp = 0, fp = 0;
    double prev_x = a.px(0), prev_y = a.py(1);
    for (const auto& d : dets) {
      const auto& gt = gts[static_cast<size_t>(d.frame)];
      const MatchResult m = match_and_mpjpe(preds[static_cast<size_t>(d.frame)].poses, gt);
      int best = -1;
      double best_e = 1e30;
      for (int k = 0; k < gt.person_count(); ++k) {
        if (claimed[static_cast<size_t>(d.frame)][static_cast<size_t>(k)]) continue;
        double e = 0.0;
        for (int64_t jj = 0; jj < gt.joint_count(); ++jj)
          e += (preds[static_cast<size_t>(d.frame)].poses.joint(d.person, jj) -
                gt.joint(k, jj))
                   .norm();
        e /= static_cast<double>(gt.joint_count());
        if (e < best_e) {
          best_e = e;
          best = k;
        }
      }
      if (best >= 0 && best_e <= thresholds[ti]) {
        claimed[static_cast<size_t>(d.frame)][static_cast<size_t>(best)] = true;
        ++tp;
      } else {
        ++fp;
      }
      const double rx = n_gt ? static_cast<double>(tp) / n_gt : 0.0;
      const double py = static_cast<double>(tp) / (tp + fp);
      const double x = a.px(rx), y = a.py(py);
      c.line(prev_x, prev_y, x, y, kSeries[ti % kSeries.size()]);
      prev_x = x;
      prev_y = y;
    }
    c.text(a.x1 - 60, a.y0 + 12 * static_cast<int>(ti), std::to_string(thresholds[ti]),
           kSeries[ti % kSeries.size()]);
  }
  c.save_ppm(out_path);
}

void plot_loss_curves(const std::string& loss_log_path, const std::string& out_path) {
  std::ifstream in(loss_log_path);
  if (!in) throw IoError("cannot read " + loss_log_path);
  std::vector<double> totals;
  std::string line;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    totals.push_back(nlohmann::json::parse(line).at("loss_total").get<double>());
  }
  Canvas c(520, 340);
  Axes a;
  draw_axes(c, a);
  c.text(220, 320, "STEP", {0, 0, 0});
  c.text(4, 10, "LOSS", {0, 0, 0});
  if (totals.size() > 1) {
    const double mx = *std::max_element(totals.begin(), totals.end());
    double prev_x = a.px(0), prev_y = a.py(mx > 0 ? totals[0] / mx : 0.0);
    for (size_t i = 1; i < totals.size(); ++i) {
      const double x = a.px(static_cast<double>(i) / (totals.size() - 1));
      const double y = a.py(mx > 0 ? totals[i] / mx : 0.0);
      c.line(prev_x, prev_y, x, y, kSeries[0]);
      prev_x = x;
      prev_y = y;
    }
  }
  c.save_ppm(out_path);
}

void plot_metric_bars(const EvalReport& report, const std::string& out_path) {
  Canvas c(520, 340);
  Axes a;
  draw_axes(c, a);
  const int n = static_cast<int>(report.ap.size()) + 1;
  int i = 0;
  for (const auto& [t, v] : report.ap) {
    const double x0 = a.px((i + 0.15) / n), x1 = a.px((i + 0.85) / n);
    c.rect(x0, a.py(std::clamp(v, 0.0, 1.0)), x1, a.py(0), kSeries[1]);
    c.text(x0, a.y1 + 6, "AP" + std::to_string(t), {0, 0, 0});
    ++i;
  }
  const double x0 = a.px((i + 0.15) / n), x1 = a.px((i + 0.85) / n);
  c.rect(x0, a.py(std::clamp(report.recall_500, 0.0, 1.0)), x1, a.py(0), kSeries[2]);
  c.text(x0, a.y1 + 6, "R500", {0, 0, 0});
  char buf[48];
  std::snprintf(buf, sizeof(buf), "MPJPE=%.1f", report.mpjpe_mm);
  c.text(a.x0 + 10, a.y0, buf, {0, 0, 0});
  c.save_ppm(out_path);
}

void plot_pose_overlay(const SceneFrame& frame, const std::vector<CameraCalibration>& cams,
                       const Pose3DSet& predicted, const SkeletonSpec& skeleton,
                       const std::string& out_path_prefix) {
  for (size_t v = 0; v < cams.size() && v < frame.images.size(); ++v) {
    Canvas c(cams[v].width, cams[v].height);
    c.blit_image(frame.images[v]);
    for (int64_t p = 0; p < predicted.person_count(); ++p) {
      const auto color = kSeries[static_cast<size_t>(p) % kSeries.size()];
      for (int j = 0; j < skeleton.joint_count(); ++j) {
        const int par = skeleton.parent[static_cast<size_t>(j)];
        if (par < 0) continue;
        const Vec3 a3 = predicted.joint(p, j), b3 = predicted.joint(p, par);
        if (cams[v].depth_of(a3) <= kMinCameraDepthMm ||
            cams[v].depth_of(b3) <= kMinCameraDepthMm)
          continue;
        const Vec2 pa = project_point(cams[v], a3), pb = project_point(cams[v], b3);
        c.line(pa.x(), pa.y(), pb.x(), pb.y(), color, 1.5);
      }
    }
    c.save_ppm(out_path_prefix + "_view" + std::to_string(v) + ".ppm");
  }
}

}  // namespace sp3d
