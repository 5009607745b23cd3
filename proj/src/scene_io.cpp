#include "pinet/scene_io.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <set>
#include <sstream>

#include <json.hpp>

namespace pinet {

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

/// Translate a nlohmann byte offset into "line:column" for error messages.
std::string locate(const std::string& text, std::size_t byte) {
  std::size_t line = 1, col = 1;
  for (std::size_t i = 0; i < byte && i < text.size(); ++i) {
    if (text[i] == '\n') {
      ++line;
      col = 1;
    } else {
      ++col;
    }
  }
  return std::to_string(line) + ":" + std::to_string(col);
}

Pose parse_pose(const json& arr, int num_joints, const std::string& where) {
  if (!arr.is_array() || static_cast<int>(arr.size()) != num_joints)
    throw DataError(where + ": expected " + std::to_string(num_joints) +
                    " joints, got " +
                    (arr.is_array() ? std::to_string(arr.size()) : "non-array"));
  Mat joints(num_joints, 3);
  for (int j = 0; j < num_joints; ++j) {
    const json& triple = arr[static_cast<std::size_t>(j)];
    if (!triple.is_array() || triple.size() != 3)
      throw DataError(where + ", joint " + std::to_string(j) +
                      ": expected [x,y,z]");
    for (int c = 0; c < 3; ++c) {
      const json& v = triple[static_cast<std::size_t>(c)];
      if (!v.is_number())
        throw DataError(where + ", joint " + std::to_string(j) +
                        ": coordinate is not a number");
      const double x = v.get<double>();
      if (!std::isfinite(x))
        throw DataError(where + ", joint " + std::to_string(j) +
                        ": non-finite coordinate");
      joints(j, c) = x;
    }
  }
  return Pose(std::move(joints));
}

json pose_to_json(const Pose& pose) {
  json arr = json::array();
  for (int j = 0; j < pose.joint_count(); ++j)
    arr.push_back({pose.joints(j, 0), pose.joints(j, 1), pose.joints(j, 2)});
  return arr;
}

}  // namespace

std::string scene_file_to_json(const SceneFile& file) {
  json root;
  root["num_joints"] = file.num_joints;
  json scenes = json::array();
  for (const Scene& scene : file.scenes) {
    json s;
    json persons = json::array();
    for (const Person& person : scene.persons)
      persons.push_back({{"id", person.id}, {"joints", pose_to_json(person.pose)}});
    s["persons"] = std::move(persons);
    if (scene.has_gt()) {
      json gt = json::array();
      for (const Pose& pose : scene.gt) gt.push_back(pose_to_json(pose));
      s["gt"] = std::move(gt);
    } else {
      s["gt"] = nullptr;
    }
    scenes.push_back(std::move(s));
  }
  root["scenes"] = std::move(scenes);
  return root.dump(2) + "\n";
}

SceneFile scene_file_from_json(const std::string& text, const std::string& origin) {
  json root;
  try {
    root = json::parse(text);
  } catch (const json::parse_error& e) {
    throw DataError(origin + ":" + locate(text, e.byte) + ": " + e.what());
  }

  if (!root.is_object() || !root.contains("num_joints") ||
      !root["num_joints"].is_number_integer())
    throw DataError(origin + ": missing integer field 'num_joints'");

  SceneFile file;
  file.num_joints = root["num_joints"].get<int>();
  if (file.num_joints < 1)
    throw DataError(origin + ": num_joints must be >= 1");
  if (!root.contains("scenes") || !root["scenes"].is_array())
    throw DataError(origin + ": missing array field 'scenes'");

  int scene_idx = 0;
  for (const json& s : root["scenes"]) {
    const std::string scene_where = origin + ": scene " + std::to_string(scene_idx);
    if (!s.is_object() || !s.contains("persons") || !s["persons"].is_array() ||
        s["persons"].empty())
      throw DataError(scene_where + ": needs a nonempty 'persons' array");

    Scene scene;
    std::set<int> seen_ids;
    int person_idx = 0;
    for (const json& p : s["persons"]) {
      const std::string where = scene_where + ", person " + std::to_string(person_idx);
      if (!p.is_object() || !p.contains("id") || !p["id"].is_number_integer() ||
          !p.contains("joints"))
        throw DataError(where + ": needs integer 'id' and 'joints' array");
      Person person;
      person.id = p["id"].get<int>();
      if (!seen_ids.insert(person.id).second)
        throw DataError(where + ": duplicate person id " + std::to_string(person.id));
      person.pose = parse_pose(p["joints"], file.num_joints, where);
      scene.persons.push_back(std::move(person));
      ++person_idx;
    }

    if (s.contains("gt") && !s["gt"].is_null()) {
      if (!s["gt"].is_array() ||
          s["gt"].size() != scene.persons.size())
        throw DataError(scene_where + ": 'gt' length must equal persons length");
      int gt_idx = 0;
      for (const json& g : s["gt"]) {
        scene.gt.push_back(parse_pose(
            g, file.num_joints, scene_where + ", gt " + std::to_string(gt_idx)));
        ++gt_idx;
      }
    }
    file.scenes.push_back(std::move(scene));
    ++scene_idx;
  }
  return file;
}

std::string read_text_file(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open " + path.string());
  std::ostringstream buf;
  buf << in.rdbuf();
  if (in.bad()) throw IoError("read failure on " + path.string());
  return buf.str();
}

void write_text_file(const fs::path& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw IoError("cannot open " + path.string() + " for writing");
  out << text;
  if (!out) throw IoError("write failure on " + path.string());
}

void save_scene_file(const fs::path& path, const SceneFile& file) {
  write_text_file(path, scene_file_to_json(file));
}

SceneFile load_scene_file(const fs::path& path) {
  return scene_file_from_json(read_text_file(path), path.string());
}

SceneFile load_scenes(const fs::path& path) {
  if (!fs::exists(path)) throw IoError("no such path: " + path.string());
  if (!fs::is_directory(path)) return load_scene_file(path);

  std::vector<fs::path> files;
  for (const auto& entry : fs::directory_iterator(path)) {
    if (!entry.is_regular_file() || entry.path().extension() != ".json") continue;
    const std::string stem = entry.path().stem().string();
    if (stem.find("manifest") != std::string::npos ||
        stem.find("config") != std::string::npos)
      continue;
    files.push_back(entry.path());
  }
  if (files.empty())
    throw IoError("no scene .json files under " + path.string());
  std::sort(files.begin(), files.end());

  SceneFile merged;
  bool first = true;
  for (const fs::path& f : files) {
    SceneFile part = load_scene_file(f);
    if (first) {
      merged.num_joints = part.num_joints;
      first = false;
    } else if (part.num_joints != merged.num_joints) {
      throw DataError(f.string() + ": num_joints " + std::to_string(part.num_joints) +
                      " disagrees with " + std::to_string(merged.num_joints));
    }
    for (Scene& s : part.scenes) merged.scenes.push_back(std::move(s));
  }
  return merged;
}

void save_scenes_per_file(const fs::path& dir, const SceneFile& file) {
  fs::create_directories(dir);
  int idx = 0;
  for (const Scene& scene : file.scenes) {
    char name[32];
    std::snprintf(name, sizeof(name), "scene_%04d.json", idx);
    SceneFile single;
    single.num_joints = file.num_joints;
    single.scenes.push_back(scene);
    save_scene_file(dir / name, single);
    ++idx;
  }
}

}  // namespace pinet
