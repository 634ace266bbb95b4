#pragma once

#include <string>
#include <vector>

namespace rdlab {

struct Preset {
    std::string name;
    std::string description;
    std::string config;
};

const std::vector<Preset>& presets();
const Preset* find_preset(const std::string& name);

}  // namespace rdlab
