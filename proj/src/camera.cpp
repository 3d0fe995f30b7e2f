#include "uvsplat/camera.hpp"

#include <fstream>

#include "json.hpp"

namespace uvsplat {

void Camera::validate() const {
  require(fx > 0 && fy > 0, ErrorCode::invalid_config, "camera focal lengths must be > 0");
  require(width >= 1 && height >= 1, ErrorCode::invalid_config, "camera size must be >= 1");
  const Mat3 rtr = rotation.transpose() * rotation;
  for (int i = 0; i < 3; ++i)
    for (int j = 0; j < 3; ++j) {
      const double want = i == j ? 1.0 : 0.0;
      require(std::abs(rtr(i, j) - want) <= 1e-6, ErrorCode::invalid_config,
              "camera rotation is not orthonormal");
    }
  require(std::abs(rotation.det() - 1.0) <= 1e-6, ErrorCode::invalid_config,
          "camera rotation must have determinant +1");
}

Vec3 Camera::center() const { return rotation.transpose() * (-translation); }

Camera Camera::look_at(const Vec3& eye, const Vec3& target, const Vec3& up, double fx_, double fy_,
                       int width_, int height_) {
  const Vec3 forward = normalized(target - eye);
  const Vec3 right = normalized(cross(forward, up));
  const Vec3 down = cross(forward, right);
  Camera cam;
  cam.fx = fx_;
  cam.fy = fy_;
  cam.width = width_;
  cam.height = height_;
  cam.cx = width_ * 0.5;
  cam.cy = height_ * 0.5;
  for (int j = 0; j < 3; ++j) {
    cam.rotation(0, j) = right[j];
    cam.rotation(1, j) = down[j];
    cam.rotation(2, j) = forward[j];
  }
  cam.translation = -(cam.rotation * eye);
  return cam;
}

ProjectedPoint project_point(const Camera& camera, const Vec3& p) {
  const Vec3 pc = camera.rotation * p + camera.translation;
  ProjectedPoint out;
  out.depth = pc.z;
  if (pc.z <= 1e-8) {
    out.behind = true;
    return out;
  }
  out.x = camera.fx * pc.x / pc.z + camera.cx;
  out.y = camera.fy * pc.y / pc.z + camera.cy;
  return out;
}

std::vector<ProjectedPoint> project(const Camera& camera, std::span<const Vec3> points) {
  std::vector<ProjectedPoint> out(points.size());
  for (size_t i = 0; i < points.size(); ++i) out[i] = project_point(camera, points[i]);
  return out;
}

void CaptureSet::validate() const {
  require(!views.empty(), ErrorCode::invalid_config, "capture set needs at least one view");
  for (size_t i = 0; i < views.size(); ++i) {
    const View& v = views[i];
    v.camera.validate();
    require(v.image.height == v.camera.height && v.image.width == v.camera.width &&
                v.image.channels == 3,
            ErrorCode::shape_mismatch, "view " + std::to_string(i) + ": image/camera size mismatch");
    require(v.mask.height == v.camera.height && v.mask.width == v.camera.width &&
                v.mask.channels == 1,
            ErrorCode::shape_mismatch, "view " + std::to_string(i) + ": mask/camera size mismatch");
  }
}

std::vector<Camera> CaptureSet::cameras() const {
  std::vector<Camera> out;
  out.reserve(views.size());
  for (const auto& v : views) out.push_back(v.camera);
  return out;
}

std::vector<Camera> load_cameras_json(const std::string& path) {
  std::ifstream in(path);
  require(in.good(), ErrorCode::missing_input, "cannot open camera file: " + path);
  nlohmann::json doc;
  try {
    in >> doc;
  } catch (const std::exception& e) {
    fail(ErrorCode::parse_error, "camera JSON parse error in " + path + ": " + e.what());
  }
  require(doc.is_array(), ErrorCode::parse_error, "camera file must hold a JSON array: " + path);

  std::vector<Camera> cams;
  for (size_t i = 0; i < doc.size(); ++i) {
    const auto& j = doc[i];
    try {
      Camera cam;
      cam.fx = j.at("fx").get<double>();
      cam.fy = j.at("fy").get<double>();
      cam.cx = j.at("cx").get<double>();
      cam.cy = j.at("cy").get<double>();
      cam.width = j.at("width").get<int>();
      cam.height = j.at("height").get<int>();
      const auto R = j.at("R").get<std::vector<double>>();
      const auto t = j.at("t").get<std::vector<double>>();
      require(R.size() == 9 && t.size() == 3, ErrorCode::parse_error,
              "camera " + std::to_string(i) + ": R must have 9 entries and t 3");
      for (int r = 0; r < 3; ++r)
        for (int c = 0; c < 3; ++c) cam.rotation(r, c) = R[r * 3 + c];
      cam.translation = {t[0], t[1], t[2]};
      cam.validate();
      cams.push_back(cam);
    } catch (const nlohmann::json::exception& e) {
      fail(ErrorCode::parse_error, "camera " + std::to_string(i) + " in " + path + ": " + e.what());
    }
  }
  return cams;
}

void save_cameras_json(const std::vector<Camera>& cameras, const std::string& path) {
  nlohmann::json doc = nlohmann::json::array();
  for (const auto& cam : cameras) {
    nlohmann::json j;
    j["fx"] = cam.fx;
    j["fy"] = cam.fy;
    j["cx"] = cam.cx;
    j["cy"] = cam.cy;
    j["width"] = cam.width;
    j["height"] = cam.height;
    std::vector<double> R, t = {cam.translation.x, cam.translation.y, cam.translation.z};
    for (int r = 0; r < 3; ++r)
      for (int c = 0; c < 3; ++c) R.push_back(cam.rotation(r, c));
    j["R"] = R;
    j["t"] = t;
    doc.push_back(j);
  }
  std::ofstream out(path);
  require(out.good(), ErrorCode::io_error, "cannot write camera file: " + path);
  out << doc.dump(2) << "\n";
}

}  // namespace uvsplat
