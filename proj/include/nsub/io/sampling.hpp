#pragma once

#include <filesystem>
#include <random>
#include <vector>

#include "nsub/subspace_map.hpp"

namespace nsub {

enum class SampleMode { Normal, Sinusoidal };

// Normal: z_i ~ N(0, stddev^2 I).
// Sinusoidal: one smooth path z_k(t) = a_k sin(2 pi w_k t + p_k) sampled at
// t = i / count, with a_k ~ U(0, min(2, 2 stddev)), w_k ~ U(0.5, 3) cycles
// over the path and p_k ~ U(0, 2 pi).
std::vector<Vec> sample_latents(long count, int d, double latent_stddev, std::mt19937_64& rng,
                                SampleMode mode = SampleMode::Normal);

// f(z_i, c) for the latents above.
std::vector<Vec> sample_states(const SubspaceMap& map, long count, double latent_stddev, std::mt19937_64& rng,
                               SampleMode mode = SampleMode::Normal, ConditionView c = {});

// Uniform Catmull-Rom through the keyframes, samples_per_segment points per
// segment at u = j / samples_per_segment.
//
// Cyclic (>= 4 keyframes): k segments with wrapped neighbours, k * sps
// points; the point after the last one is the first keyframe again.
// Clamped (>= 2 keyframes): endpoints are duplicated as outer neighbours,
// (k - 1) * sps + 1 points ending on the last keyframe.
std::vector<Vec> catmull_rom_path(const std::vector<Vec>& keyframes, int samples_per_segment, bool cyclic);

// Point on segment `segment` (from keyframe `segment` to the next) at u in [0, 1].
Vec catmull_rom_point(const std::vector<Vec>& keyframes, int segment, double u, bool cyclic);

// One latent vector per line, whitespace or comma separated; blank lines and
// lines starting with '#' are skipped.
std::vector<Vec> load_keyframes(const std::filesystem::path& path);

}  // namespace nsub
