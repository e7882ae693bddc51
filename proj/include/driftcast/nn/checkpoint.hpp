#pragma once

#include "driftcast/nn/param.hpp"

#include <filesystem>
#include <iosfwd>
#include <string>
#include <utility>
#include <vector>

namespace driftcast::nn {

inline constexpr const char* kCheckpointVersion = "driftcast-ckpt-v1";

struct CheckpointSection {
    std::string tag;
    std::vector<std::pair<std::string, std::string>> meta;
    ParamStore params;

    [[nodiscard]] const std::string* find_meta(const std::string& key) const;
};

/// Text checkpoint; see docs/checkpoint-format.md for the exact layout.
struct Checkpoint {
    std::vector<CheckpointSection> sections;

    [[nodiscard]] const CheckpointSection* find(const std::string& tag) const;
};

void write_checkpoint(std::ostream& out, const Checkpoint& ckpt);
[[nodiscard]] Checkpoint read_checkpoint(std::istream& in);

void save_checkpoint(const std::filesystem::path& path, const Checkpoint& ckpt);
[[nodiscard]] Checkpoint load_checkpoint(const std::filesystem::path& path);

/// Copies values of `from` into `into`; layouts must match exactly.
void restore_values(ParamStore& into, const ParamStore& from);

}  // namespace driftcast::nn
