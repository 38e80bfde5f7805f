#pragma once

#include <string>
#include <vector>

#include "sp3d/inference.hpp"
#include "sp3d/pipeline.hpp"

namespace sp3d {

// Minimal raster canvas written as binary PPM (P6). Coordinates are pixels,
// origin top-left.
class Canvas {
 public:
  Canvas(int width, int height, std::array<double, 3> bg = {1.0, 1.0, 1.0});
  void line(double x0, double y0, double x1, double y1, std::array<double, 3> color,
            double thickness = 1.5);
  void rect(double x0, double y0, double x1, double y1, std::array<double, 3> color);
  void text(double x, double y, const std::string& s, std::array<double, 3> color,
            int scale = 1);
  void blit_image(const Tensor& image_hw3);  // resizes the canvas content
  void save_ppm(const std::string& path) const;
  int width() const { return w_; }
  int height() const { return h_; }

 private:
  int w_, h_;
  std::vector<double> px_;  // rgb rows
  void set(int x, int y, const std::array<double, 3>& c, double alpha);
};

// plot artifacts: PR curves per AP threshold, loss curves from the JSONL log,
// and projected-skeleton overlays on scene views.
void plot_pr_curves(const std::vector<FramePredictions>& preds,
                    const std::vector<Pose3DSet>& gts, const std::vector<int>& thresholds,
                    const std::string& out_path);
void plot_loss_curves(const std::string& loss_log_path, const std::string& out_path);
void plot_metric_bars(const EvalReport& report, const std::string& out_path);
void plot_pose_overlay(const SceneFrame& frame, const std::vector<CameraCalibration>& cams,
                       const Pose3DSet& predicted, const SkeletonSpec& skeleton,
                       const std::string& out_path_prefix);

}  // namespace sp3d
