#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "nsub/modal_baseline.hpp"
#include "nsub/subspace_fit.hpp"

namespace nsub {

// Binary layout, all integers and floats little-endian:
//
//   "NSUB"  u32 version
//   u32 n, u32 d, u32 m, f64 sigma
//   u32 L, L x u32 layer sizes
//   per layer: weights row-major f64, then biases f64
//   u32 len + name bytes, u64 config hash
//   i64 steps, f64 loss, f64 potential, f64 penalty, f64 log ratio, i64 energy clamps
//   u64 FNV-1a of every preceding byte
inline constexpr std::uint32_t kCheckpointVersion = 1;

std::vector<unsigned char> encode_model(const SubspaceModel& model);
// Throws FormatError on a bad magic, version, size or checksum.
SubspaceModel decode_model(const std::vector<unsigned char>& bytes);

void save_model(const std::filesystem::path& path, const SubspaceModel& model);
SubspaceModel load_model(const std::filesystem::path& path);

// An affine subspace as a network without hidden layers.
SubspaceModel model_from_affine(const AffineSubspace& affine);

}  // namespace nsub
