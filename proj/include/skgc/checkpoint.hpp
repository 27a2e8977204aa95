#pragma once

#include <Eigen/Dense>
#include <cstdint>
#include <filesystem>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include "skgc/nn.hpp"

namespace skgc {

class CheckpointError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

inline constexpr char kCheckpointMagic[8] = {'S', 'K', 'G', 'C', 'C', 'K', 'P', 'T'};
inline constexpr std::uint32_t kCheckpointVersion = 1;

/// Layout (little endian):
///   magic[8] version:u32
///   config:  u64 length + bytes (resolved config text)
///   info:    u64 length + bytes (JSON metadata)
///   count:u32, then per section: name (u32 length + bytes), rows:u64, cols:u64, rows*cols f64 column-major
struct CheckpointData {
  std::string config_text;
  std::string info_json;
  std::vector<std::pair<std::string, Eigen::MatrixXd>> sections;
};

void write_checkpoint(const std::filesystem::path& path, const CheckpointData& data);
CheckpointData read_checkpoint(const std::filesystem::path& path);

CheckpointData snapshot(const ParameterStore& store, std::string config_text, std::string info_json);

/// Copies every section into the store; names and shapes must match exactly.
void restore(const CheckpointData& data, ParameterStore& store);

}  // namespace skgc
