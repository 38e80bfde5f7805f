#include <pybind11/numpy.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include "sp3d/hungarian.hpp"
#include "sp3d/inference.hpp"
#include "sp3d/losses.hpp"
#include "sp3d/metrics.hpp"
#include "sp3d/parallel.hpp"
#include "sp3d/pipeline.hpp"
#include "sp3d/rendering.hpp"
#include "sp3d/root_localizer.hpp"
#include "sp3d/scene_synth.hpp"

namespace py = pybind11;
using namespace sp3d;

namespace {

Tensor to_tensor(const py::array_t<double, py::array::c_style | py::array::forcecast>& a) {
  std::vector<int64_t> shape(a.ndim());
  for (py::ssize_t i = 0; i < a.ndim(); ++i) shape[static_cast<size_t>(i)] = a.shape(i);
  std::vector<double> data(a.data(), a.data() + a.size());
  return Tensor(std::move(shape), std::move(data));
}

py::array_t<double> to_array(const Tensor& t) {
  std::vector<py::ssize_t> shape(t.shape().begin(), t.shape().end());
  py::array_t<double> out(shape);
  std::copy_n(t.data(), t.numel(), out.mutable_data());
  return out;
}

Vec3 to_vec3(const py::array_t<double, py::array::c_style | py::array::forcecast>& a) {
  if (a.size() != 3) throw ShapeMismatch("expected a 3-vector");
  return Vec3(a.data()[0], a.data()[1], a.data()[2]);
}

Pose2DSet to_pose2d(const py::array_t<double>& joints, const py::array_t<double>& conf,
                    const py::array_t<double>& vis) {
  Pose2DSet p;
  p.joints = to_tensor(joints);
  p.confidence = to_tensor(conf);
  p.visibility = to_tensor(vis);
  return p;
}

}  // namespace

PYBIND11_MODULE(_core, m) {
  m.doc() = "SelfPose3d core operations";

  py::register_exception<Error>(m, "Sp3dError");

  py::class_<CameraCalibration>(m, "CameraCalibration")
      .def(py::init([](int id, py::array_t<double> K, py::array_t<double> R,
                       py::array_t<double> t, int width, int height) {
             CameraCalibration cam;
             cam.id = id;
             const Tensor kt = to_tensor(K), rt = to_tensor(R);
             if (kt.numel() != 9 || rt.numel() != 9)
               throw ShapeMismatch("K and R must be 3x3");
             for (int a = 0; a < 3; ++a)
               for (int b = 0; b < 3; ++b) {
                 cam.K(a, b) = kt[a * 3 + b];
                 cam.R(a, b) = rt[a * 3 + b];
               }
             cam.t = to_vec3(t);
             cam.width = width;
             cam.height = height;
             cam.validate();
             return cam;
           }),
           py::arg("id"), py::arg("K"), py::arg("R"), py::arg("t"), py::arg("width"),
           py::arg("height"))
      .def_readonly("id", &CameraCalibration::id)
      .def_readonly("width", &CameraCalibration::width)
      .def_readonly("height", &CameraCalibration::height)
      .def("project", [](const CameraCalibration& cam, py::array_t<double> x) {
        const Vec2 uv = project_point(cam, to_vec3(x));
        return py::make_tuple(uv.x(), uv.y());
      });

  py::class_<AffineAugmentation>(m, "AffineAugmentation")
      .def_static(
          "make",
          [](double rotation_deg, double scale, double px, double py_) {
            return AffineAugmentation::make(rotation_deg, scale, Vec2(px, py_));
          },
          py::arg("rotation_deg"), py::arg("scale"), py::arg("pivot_x"),
          py::arg("pivot_y"))
      .def_readonly("rotation_deg", &AffineAugmentation::rotation_deg)
      .def_readonly("scale", &AffineAugmentation::scale)
      .def("apply",
           [](const AffineAugmentation& t, double u, double v) {
             const Vec2 out = apply_affine(t, Vec2(u, v));
             return py::make_tuple(out.x(), out.y());
           })
      .def("inverse", [](const AffineAugmentation& t) { return invert_affine(t); })
      .def_property_readonly("matrix", [](const AffineAugmentation& t) {
        Tensor m({2, 3});
        for (int r = 0; r < 2; ++r)
          for (int c = 0; c < 3; ++c) m.at(r, c) = t.matrix(r, c);
        return to_array(m);
      });

  py::class_<VoxelGridSpec>(m, "VoxelGridSpec")
      .def(py::init([](py::array_t<double> center, py::array_t<double> extent,
                       std::array<int, 3> resolution) {
             VoxelGridSpec g;
             g.center = to_vec3(center);
             g.extent = to_vec3(extent);
             g.resolution = resolution;
             g.validate();
             return g;
           }),
           py::arg("center"), py::arg("extent"), py::arg("resolution"))
      .def("voxel_centers", [](const VoxelGridSpec& g) { return to_array(g.voxel_centers()); })
      .def("pitch", &VoxelGridSpec::pitch);

  m.def("default_coarse_grid", &default_coarse_grid);
  m.def("default_fine_grid_template", &default_fine_grid_template);

  m.def(
      "make_camera_rig",
      [](int n_views, double radius, std::pair<double, double> height_range,
         int image_width, int image_height, uint64_t seed) {
        return make_camera_rig(n_views, default_workspace(), radius, height_range,
                               image_width, image_height, seed);
      },
      py::arg("n_views"), py::arg("radius") = 4500.0,
      py::arg("height_range") = std::pair<double, double>(2300.0, 2900.0),
      py::arg("image_width") = 128, py::arg("image_height") = 128, py::arg("seed") = 1);

  m.def(
      "triangulate_dlt",
      [](const std::vector<std::pair<CameraCalibration, std::pair<double, double>>>& obs) {
        std::vector<std::pair<CameraCalibration, Vec2>> o;
        for (const auto& [cam, uv] : obs)
          o.emplace_back(cam, Vec2(uv.first, uv.second));
        const Vec3 x = triangulate_dlt(o);
        Tensor t({3}, {x.x(), x.y(), x.z()});
        return to_array(t);
      });

  m.def(
      "unproject_heatmaps",
      [](py::array_t<double> heatmaps, const std::vector<CameraCalibration>& cams,
         const VoxelGridSpec& grid, const AffineAugmentation& t) {
        return to_array(unproject_heatmaps(to_tensor(heatmaps), cams, grid, t).data);
      },
      py::arg("heatmaps"), py::arg("cams"), py::arg("grid"), py::arg("t"));

  m.def(
      "render_gaussian_heatmap",
      [](py::array_t<double> joints, py::array_t<double> weights, int hq, int wq,
         double sigma) {
        const Tensor j = to_tensor(joints);
        const Tensor w = to_tensor(weights);
        if (j.ndim() != 2 || j.dim(1) != 2) throw ShapeMismatch("joints must be (N, 2)");
        std::vector<std::pair<Vec2, double>> list;
        for (int64_t i = 0; i < j.dim(0); ++i)
          list.emplace_back(Vec2(j.at(i, 0), j.at(i, 1)), w[i]);
        return to_array(render_gaussian_heatmap(list, hq, wq, sigma));
      },
      py::arg("joints"), py::arg("weights"), py::arg("hq"), py::arg("wq"),
      py::arg("sigma") = kDefaultHeatmapSigma);

  m.def(
      "render_pose_heatmaps",
      [](py::array_t<double> joints, py::array_t<double> conf, py::array_t<double> vis,
         int hq, int wq, double sigma) {
        return to_array(render_pose_heatmaps(to_pose2d(joints, conf, vis), hq, wq, sigma));
      },
      py::arg("joints"), py::arg("confidence"), py::arg("visibility"), py::arg("hq"),
      py::arg("wq"), py::arg("sigma") = kDefaultHeatmapSigma);

  m.def(
      "soft_argmax_3d",
      [](py::array_t<double> volume, const VoxelGridSpec& grid, double beta) {
        const Vec3 p = soft_argmax_3d(to_tensor(volume), grid, beta);
        Tensor t({3}, {p.x(), p.y(), p.z()});
        return to_array(t);
      },
      py::arg("volume"), py::arg("grid"), py::arg("beta") = 100.0);

  m.def("hungarian_assign",
        [](py::array_t<double> cost) { return hungarian_assign(to_tensor(cost)); });

  m.def(
      "nms_3d",
      [](py::array_t<double> volume, const VoxelGridSpec& grid, int window,
         double threshold, int max_proposals) {
        py::list out;
        for (const auto& p : nms_3d(to_tensor(volume), grid, window, threshold,
                                    max_proposals)) {
          py::dict d;
          d["position"] = py::make_tuple(p.position.x(), p.position.y(), p.position.z());
          d["score"] = p.score;
          d["voxel_index"] = py::make_tuple(p.voxel_index[0], p.voxel_index[1],
                                            p.voxel_index[2]);
          out.append(d);
        }
        return out;
      },
      py::arg("volume"), py::arg("grid"), py::arg("window") = 3,
      py::arg("threshold") = 0.3, py::arg("max_proposals") = 10);

  m.def(
      "sample_poses",
      [](int n_persons, uint64_t seed) {
        const Pose3DSet p =
            sample_poses(SkeletonSpec::panoptic15(), n_persons, default_person_region(), seed);
        return to_array(p.joints);
      },
      py::arg("n_persons"), py::arg("seed") = 1);

  m.def(
      "simulate_pseudo_2d",
      [](py::array_t<double> poses, const std::vector<CameraCalibration>& cams,
         double sigma_px, double p_outlier, double p_drop, uint64_t seed) {
        Pose3DSet p;
        p.joints = to_tensor(poses);
        PseudoNoiseModel noise{sigma_px, p_outlier, p_drop};
        const Pose2DSet out = simulate_pseudo_2d(p, cams, noise, seed);
        return py::make_tuple(to_array(out.joints), to_array(out.confidence),
                              to_array(out.visibility));
      },
      py::arg("poses"), py::arg("cams"), py::arg("sigma_px") = 0.0,
      py::arg("p_outlier") = 0.0, py::arg("p_drop") = 0.0, py::arg("seed") = 1);

  m.def(
      "match_and_mpjpe",
      [](py::array_t<double> pred, py::array_t<double> gt) {
        Pose3DSet a, b;
        a.joints = to_tensor(pred);
        b.joints = to_tensor(gt);
        const MatchResult r = match_and_mpjpe(a, b);
        return py::make_tuple(r.pairs, r.mpjpe);
      },
      py::arg("pred"), py::arg("gt"));

  m.def("mse", [](py::array_t<double> a, py::array_t<double> b) {
    return mse_value(to_tensor(a), to_tensor(b));
  });

  m.def(
      "filter_pseudo_labels",
      [](py::array_t<double> joints, py::array_t<double> conf, py::array_t<double> vis,
         const std::string& mode, double threshold) {
        const Pose2DSet out =
            filter_pseudo_labels(to_pose2d(joints, conf, vis), mode, threshold);
        return py::make_tuple(to_array(out.joints), to_array(out.confidence),
                              to_array(out.visibility));
      },
      py::arg("joints"), py::arg("confidence"), py::arg("visibility"), py::arg("mode"),
      py::arg("threshold") = 0.7);

  m.def("set_thread_count", &set_thread_count);
  m.attr("HEATMAP_STRIDE") = kHeatmapStride;
  m.attr("DEFAULT_SIGMA") = kDefaultHeatmapSigma;
}
