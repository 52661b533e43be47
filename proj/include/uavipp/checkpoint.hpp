#pragma once

#include <torch/torch.h>

#include <cstdint>
#include <filesystem>
#include <map>
#include <string>
#include <utility>
#include <vector>

namespace uavipp {

inline constexpr std::uint32_t kCheckpointVersion = 1;

// Versioned binary blob: magic, version, kind, key=value descriptor, named tensors.
struct Checkpoint {
    std::string kind;
    std::map<std::string, std::string> meta;
    std::vector<std::pair<std::string, torch::Tensor>> tensors;

    const std::string& get(const std::string& key) const;
    int get_int(const std::string& key) const;
    double get_double(const std::string& key) const;
};

void write_checkpoint(const std::filesystem::path& path, const Checkpoint& ckpt);
// Throws ConfigError for a missing file, bad magic, unsupported version or a
// kind other than `expected_kind` (when non-empty).
Checkpoint read_checkpoint(const std::filesystem::path& path, const std::string& expected_kind = "");

// Parameters and buffers of `module`, names prefixed with `prefix`.
void append_module(Checkpoint& ckpt, const std::string& prefix, const torch::nn::Module& module);
// Copies tensors named `prefix` + <param name> into `module`. Throws ConfigError
// on missing names or shape mismatch.
void load_module(const Checkpoint& ckpt, const std::string& prefix, torch::nn::Module& module);

} // namespace uavipp
