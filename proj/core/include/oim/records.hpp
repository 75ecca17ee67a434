#ifndef OIM_RECORDS_HPP_
#define OIM_RECORDS_HPP_

#include <string>
#include <vector>

#include "oim/synth.hpp"

namespace oim {

// Line-delimited JSON record files. The first line is a typed, versioned
// header; every following line is one scene (worlds) or one detection
// (detection sets). Numbers round-trip exactly, so load(save(x)) == x.

void save_world(const SynthWorld& world, const std::string& path);
SynthWorld load_world(const std::string& path);

void save_detections(const std::vector<std::vector<Detection>>& per_scene,
                     const std::string& path);
std::vector<std::vector<Detection>> load_detections(const std::string& path);

}  // namespace oim

#endif  // OIM_RECORDS_HPP_
