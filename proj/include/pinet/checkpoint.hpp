#pragma once

#include <cstdint>
#include <filesystem>

#include "pinet/model.hpp"

namespace pinet {

/// Versioned binary container: magic + format version + JSON config block
/// (model config, PRNG seed/algorithm, training-step counter) followed by
/// little-endian float64 tensors with shape headers (normalization stats,
/// then every parameter in store order). Round-trips bitwise on one platform.
struct CheckpointMeta {
  std::uint64_t seed = 0;
  std::string prng_id = Rng::kAlgorithmId;
  long step_counter = 0;
};

inline constexpr char kCheckpointMagic[8] = {'P', 'I', 'N', 'E', 'T', 'C', 'K', 'P'};
inline constexpr std::uint32_t kCheckpointVersion = 1;

void save_checkpoint(const std::filesystem::path& path, const PiNet& net,
                     const CheckpointMeta& meta);

struct LoadedCheckpoint {
  PiNet net;
  CheckpointMeta meta;
};

/// Rejects wrong magic, unknown versions, and any tensor name/shape that does
/// not match the config the file declares.
LoadedCheckpoint load_checkpoint(const std::filesystem::path& path);

}  // namespace pinet
