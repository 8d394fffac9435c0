#pragma once

#include <filesystem>
#include <vector>

#include "expctr/data/samples.hpp"

namespace expctr::data {

// One JSON object per line: user, target_item, liked, disliked, label,
// rating, oracle_explanation.
void write_samples(const std::filesystem::path& path, const std::vector<InteractionSample>& samples);
std::vector<InteractionSample> read_samples(const std::filesystem::path& path);

void write_world(const std::filesystem::path& path, const World& world);
World read_world(const std::filesystem::path& path);

void write_interactions(const std::filesystem::path& path, const std::vector<Interaction>& interactions);
std::vector<Interaction> read_interactions(const std::filesystem::path& path);

}  // namespace expctr::data
