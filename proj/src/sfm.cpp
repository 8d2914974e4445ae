#include "trajnerf/sfm.hpp"

#include <cstdio>
#include <fstream>
#include <sstream>
#include <unordered_map>

namespace trajnerf {

namespace {

std::vector<std::string> split_tokens(const std::string& line) {
  std::istringstream ss(line);
  std::vector<std::string> tokens;
  std::string tok;
  while (ss >> tok) tokens.push_back(tok);
  return tokens;
}

bool parse_double(const std::string& tok, double& out) {
  try {
    size_t used = 0;
    out = std::stod(tok, &used);
    return used == tok.size();
  } catch (const std::exception&) {
    return false;
  }
}

bool parse_int(const std::string& tok, int& out) {
  try {
    size_t used = 0;
    out = std::stoi(tok, &used);
    return used == tok.size();
  } catch (const std::exception&) {
    return false;
  }
}

bool all_numeric(const std::vector<std::string>& tokens) {
  double v;
  for (const std::string& t : tokens)
    if (!parse_double(t, v)) return false;
  return true;
}

std::string format_double(double v) {
  char buf[40];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  return buf;
}

}  // namespace

const SfmCamera& SfmExport::camera_by_id(int id) const {
  for (const SfmCamera& c : cameras)
    if (c.camera_id == id) return c;
  throw InvalidInputError("sfm export: unknown camera id " + std::to_string(id));
}

SfmExport parse_sfm_export(const std::string& cameras_path, const std::string& images_path) {
  SfmExport exp;

  {
    std::ifstream in(cameras_path);
    if (!in) throw IoError("sfm cameras file not found: " + cameras_path);
    std::string line;
    long line_no = 0;
    while (std::getline(in, line)) {
      ++line_no;
      const auto tokens = split_tokens(line);
      if (tokens.empty() || tokens[0][0] == '#') continue;
      SfmCamera cam;
      if (!parse_int(tokens[0], cam.camera_id))
        throw ParseError(cameras_path, line_no, "bad camera id '" + tokens[0] + "'");
      if (tokens.size() < 4)
        throw ParseError(cameras_path, line_no, "camera line too short");
      const std::string& model = tokens[1];
      double w, h;
      if (!parse_double(tokens[2], w) || !parse_double(tokens[3], h))
        throw ParseError(cameras_path, line_no, "bad image size");
      cam.intrinsics.width = static_cast<int>(w);
      cam.intrinsics.height = static_cast<int>(h);
      std::vector<double> params;
      for (size_t i = 4; i < tokens.size(); ++i) {
        double v;
        if (!parse_double(tokens[i], v))
          throw ParseError(cameras_path, line_no, "bad camera parameter '" + tokens[i] + "'");
        params.push_back(v);
      }
      if (model == "PINHOLE" && params.size() == 4) {
        cam.intrinsics.fx = params[0];
        cam.intrinsics.fy = params[1];
        cam.intrinsics.cx = params[2];
        cam.intrinsics.cy = params[3];
      } else if (model == "SIMPLE_PINHOLE" && params.size() == 3) {
        cam.intrinsics.fx = cam.intrinsics.fy = params[0];
        cam.intrinsics.cx = params[1];
        cam.intrinsics.cy = params[2];
      } else {
        throw ParseError(cameras_path, line_no,
                         "unsupported camera model '" + model + "' (pinhole family only)");
      }
      exp.cameras.push_back(cam);
    }
  }

  {
    std::ifstream in(images_path);
    if (!in) throw IoError("sfm images file not found: " + images_path);
    std::string line;
    long line_no = 0;
    bool last_was_pose = false;
    while (std::getline(in, line)) {
      ++line_no;
      const auto tokens = split_tokens(line);
      if (tokens.empty() || tokens[0][0] == '#') continue;
      // Observation lines (all numeric, triplets) directly after a pose
      // line are skipped.
      if (last_was_pose && all_numeric(tokens) && tokens.size() % 3 == 0) {
        last_was_pose = false;
        continue;
      }
      if (tokens.size() != 10)
        throw ParseError(images_path, line_no,
                         "expected `ID qw qx qy qz tx ty tz CAM_ID NAME`, got " +
                             std::to_string(tokens.size()) + " fields");
      SfmImage img;
      double q[4], t[3];
      if (!parse_int(tokens[0], img.image_id))
        throw ParseError(images_path, line_no, "bad image id '" + tokens[0] + "'");
      for (int i = 0; i < 4; ++i)
        if (!parse_double(tokens[1 + i], q[i]))
          throw ParseError(images_path, line_no, "bad quaternion component '" + tokens[1 + i] + "'");
      for (int i = 0; i < 3; ++i)
        if (!parse_double(tokens[5 + i], t[i]))
          throw ParseError(images_path, line_no, "bad translation component '" + tokens[5 + i] + "'");
      if (!parse_int(tokens[8], img.camera_id))
        throw ParseError(images_path, line_no, "bad camera id '" + tokens[8] + "'");
      img.name = tokens[9];

      const double norm = std::sqrt(q[0] * q[0] + q[1] * q[1] + q[2] * q[2] + q[3] * q[3]);
      if (!std::isfinite(norm) || std::abs(norm - 1.0) > 1e-6)
        throw ParseError(images_path, line_no, "quaternion is not unit norm");
      img.rotation = Eigen::Quaterniond(q[0] / norm, q[1] / norm, q[2] / norm, q[3] / norm);
      img.translation = Eigen::Vector3d(t[0], t[1], t[2]);

      bool camera_known = false;
      for (const SfmCamera& c : exp.cameras) camera_known |= (c.camera_id == img.camera_id);
      if (!camera_known)
        throw ParseError(images_path, line_no,
                         "image references undeclared camera id " + std::to_string(img.camera_id));
      exp.images.push_back(std::move(img));
      last_was_pose = true;
    }
  }
  return exp;
}

std::vector<CameraPose> sfm_to_camera_poses(const SfmExport& exp) {
  std::vector<CameraPose> poses;
  poses.reserve(exp.images.size());
  for (const SfmImage& img : exp.images) {
    const Eigen::Matrix3d r_w2c = img.rotation.toRotationMatrix();
    Eigen::Matrix3d r = r_w2c.transpose();
    const Eigen::Vector3d position = -r * img.translation;
    // Vision convention (y down, z forward) to OpenGL style (y up, -z view).
    r.col(1) = -r.col(1);
    r.col(2) = -r.col(2);
    poses.push_back(CameraPose::from_rt(r, position, Convention::OpenGLStyle));
  }
  return poses;
}

std::pair<Eigen::Quaterniond, Eigen::Vector3d> camera_pose_to_sfm(const CameraPose& pose) {
  Eigen::Matrix3d r = pose.rotation();
  r.col(1) = -r.col(1);
  r.col(2) = -r.col(2);
  const Eigen::Matrix3d r_w2c = r.transpose();
  const Eigen::Vector3d t = -r_w2c * pose.translation();
  Eigen::Quaterniond q(r_w2c);
  if (q.w() < 0.0) q.coeffs() = -q.coeffs();
  return {q, t};
}

void write_sfm_export(const SfmExport& exp, const std::string& cameras_path,
                      const std::string& images_path) {
  {
    std::ofstream out(cameras_path);
    if (!out) throw IoError("cannot write: " + cameras_path);
    out << "# CAMERA_ID MODEL WIDTH HEIGHT fx fy cx cy\n";
    for (const SfmCamera& c : exp.cameras) {
      out << c.camera_id << " PINHOLE " << c.intrinsics.width << ' ' << c.intrinsics.height << ' '
          << format_double(c.intrinsics.fx) << ' ' << format_double(c.intrinsics.fy) << ' '
          << format_double(c.intrinsics.cx) << ' ' << format_double(c.intrinsics.cy) << '\n';
    }
  }
  {
    std::ofstream out(images_path);
    if (!out) throw IoError("cannot write: " + images_path);
    out << "# IMAGE_ID qw qx qy qz tx ty tz CAMERA_ID NAME\n";
    for (const SfmImage& img : exp.images) {
      out << img.image_id << ' ' << format_double(img.rotation.w()) << ' '
          << format_double(img.rotation.x()) << ' ' << format_double(img.rotation.y()) << ' '
          << format_double(img.rotation.z()) << ' ' << format_double(img.translation.x()) << ' '
          << format_double(img.translation.y()) << ' ' << format_double(img.translation.z()) << ' '
          << img.camera_id << ' ' << img.name << '\n';
    }
  }
}

}  // namespace trajnerf
