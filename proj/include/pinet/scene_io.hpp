#pragma once

#include <filesystem>
#include <string>
#include <vector>

#include "pinet/pose.hpp"

namespace pinet {

/// On-disk scene container: a joint count shared by every pose plus one or
/// more scenes. Coordinates are millimeters in the camera frame.
struct SceneFile {
  int num_joints = 17;
  std::vector<Scene> scenes;
};

/// Serialize to the scene JSON schema:
/// {"num_joints": J, "scenes": [{"persons": [{"id": 0, "joints": [[x,y,z],...]}],
///  "gt": [[[x,y,z],...],...] | null}]}
std::string scene_file_to_json(const SceneFile& file);

/// Parse and validate scene JSON. Parse failures carry line:column; content
/// violations (wrong joint count, non-finite coordinate, duplicate person id,
/// gt length mismatch) name the offending scene/person path.
SceneFile scene_file_from_json(const std::string& text,
                               const std::string& origin = "<string>");

void save_scene_file(const std::filesystem::path& path, const SceneFile& file);
SceneFile load_scene_file(const std::filesystem::path& path);

/// Load a single scene file or every "*.json" scene file in a directory
/// (sorted by name, manifest/config files skipped), concatenating scenes.
SceneFile load_scenes(const std::filesystem::path& path);

/// Write one file per scene: <dir>/scene_0000.json, scene_0001.json, ...
void save_scenes_per_file(const std::filesystem::path& dir, const SceneFile& file);

std::string read_text_file(const std::filesystem::path& path);
void write_text_file(const std::filesystem::path& path, const std::string& text);

}  // namespace pinet
