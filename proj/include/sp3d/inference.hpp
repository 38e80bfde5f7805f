#pragma once

#include <string>

#include "sp3d/manifest.hpp"
#include "sp3d/metrics.hpp"
#include "sp3d/models.hpp"
#include "sp3d/pose_estimator.hpp"

namespace sp3d {

// End-to-end inference on one frame under identity augmentation. Oracle mode
// replaces the learned parts: heatmaps rendered from the pseudo poses,
// root_net and pose_net bypassed (feature volumes decoded directly).
FramePredictions infer_frame(const SceneFrame& frame,
                             const std::vector<CameraCalibration>& cams,
                             ModelBundle& bundle, bool oracle);

struct SceneEvalResult {
  EvalReport report;
  int64_t frames = 0;
};

// Evaluates frames [begin, end) of a scene directory.
SceneEvalResult evaluate_scene(const SceneReader& scene, ModelBundle& bundle,
                               int64_t begin, int64_t end, bool oracle);

std::string report_to_json(const EvalReport& report, const std::string& note);
EvalReport report_from_json(const std::string& text);

}  // namespace sp3d
