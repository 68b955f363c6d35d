#pragma once

#include <filesystem>
#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

#include "mclnn/features.hpp"
#include "mclnn/net.hpp"

namespace mclnn {

// Everything a deployment needs alongside the weights: the label order the
// output indices mean, and the feature standardizer fitted at train time.
struct SavedModel {
    ModelParams params;
    std::vector<std::string> classes;
    std::optional<Standardizer> standardizer;
};

// Container layout: magic `MCLNN1\n`, little-endian u32 header length, a JSON
// header describing shapes/masks/classes, then each parameter array as raw
// little-endian float32, matrices row-major, in header order.
void save_model(std::ostream& out, const SavedModel& model);
void save_model(const std::filesystem::path& path, const SavedModel& model);

SavedModel load_model(std::istream& in, const std::string& source = "<stream>");
SavedModel load_model(const std::filesystem::path& path);

}  // namespace mclnn
