#include "nsub/io/sampling.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <numbers>
#include <sstream>

#include "nsub/errors.hpp"

namespace nsub {

std::vector<Vec> sample_latents(long count, int d, double latent_stddev, std::mt19937_64& rng, SampleMode mode) {
  if (count < 0) throw ConfigError("sample: count must be >= 0");
  if (d < 1) throw ConfigError("sample: latent dimension must be >= 1");
  if (!(latent_stddev >= 0.0) || !std::isfinite(latent_stddev)) {
    throw ConfigError("sample: latent_stddev must be finite and >= 0");
  }
  std::vector<Vec> out;
  out.reserve(static_cast<std::size_t>(count));
  if (mode == SampleMode::Normal) {
    std::normal_distribution<double> normal(0.0, 1.0);
    for (long i = 0; i < count; ++i) {
      Vec z(d);
      for (int k = 0; k < d; ++k) z[k] = latent_stddev * normal(rng);
      out.push_back(std::move(z));
    }
    return out;
  }

  const double amp_max = std::min(2.0, 2.0 * latent_stddev);
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  Vec amp(d), freq(d), phase(d);
  for (int k = 0; k < d; ++k) {
    amp[k] = amp_max * unit(rng);
    freq[k] = 0.5 + 2.5 * unit(rng);
    phase[k] = 2.0 * std::numbers::pi * unit(rng);
  }
  for (long i = 0; i < count; ++i) {
    const double t = static_cast<double>(i) / static_cast<double>(count);
    Vec z(d);
    for (int k = 0; k < d; ++k) z[k] = amp[k] * std::sin(2.0 * std::numbers::pi * freq[k] * t + phase[k]);
    out.push_back(std::move(z));
  }
  return out;
}

std::vector<Vec> sample_states(const SubspaceMap& map, long count, double latent_stddev, std::mt19937_64& rng,
                               SampleMode mode, ConditionView c) {
  if (static_cast<int>(c.size()) != map.condition_dim()) throw ConfigError("sample: condition size mismatch");
  std::vector<Vec> out;
  for (const Vec& z : sample_latents(count, map.latent_dim(), latent_stddev, rng, mode)) {
    out.push_back(map.evaluate(z, c));
  }
  return out;
}

namespace {

void check_keyframes(const std::vector<Vec>& keyframes, bool cyclic) {
  const std::size_t need = cyclic ? 4 : 2;
  if (keyframes.size() < need) {
    throw ConfigError(std::string("catmull_rom: ") + (cyclic ? "cyclic" : "clamped") + " paths need at least " +
                      std::to_string(need) + " keyframes, got " + std::to_string(keyframes.size()));
  }
  for (const Vec& k : keyframes) {
    if (k.size() != keyframes.front().size()) throw ConfigError("catmull_rom: keyframes differ in dimension");
    if (!k.allFinite()) throw ConfigError("catmull_rom: keyframe is not finite");
  }
}

}  // namespace

Vec catmull_rom_point(const std::vector<Vec>& keyframes, int segment, double u, bool cyclic) {
  const int k = static_cast<int>(keyframes.size());
  const int segments = cyclic ? k : k - 1;
  if (segment < 0 || segment >= segments) throw ConfigError("catmull_rom: segment out of range");
  auto at = [&](int i) -> const Vec& {
    if (cyclic) return keyframes[static_cast<std::size_t>(((i % k) + k) % k)];
    return keyframes[static_cast<std::size_t>(std::clamp(i, 0, k - 1))];
  };
  const Vec& p0 = at(segment - 1);
  const Vec& p1 = at(segment);
  const Vec& p2 = at(segment + 1);
  const Vec& p3 = at(segment + 2);
  // Basis weights; at u = 0 and u = 1 they are exactly (0,1,0,0) and (0,0,1,0).
  const double u2 = u * u, u3 = u2 * u;
  const double w0 = 0.5 * (-u + 2.0 * u2 - u3);
  const double w1 = 0.5 * (2.0 - 5.0 * u2 + 3.0 * u3);
  const double w2 = 0.5 * (u + 4.0 * u2 - 3.0 * u3);
  const double w3 = 0.5 * (-u2 + u3);
  return w0 * p0 + w1 * p1 + w2 * p2 + w3 * p3;
}

std::vector<Vec> catmull_rom_path(const std::vector<Vec>& keyframes, int samples_per_segment, bool cyclic) {
  check_keyframes(keyframes, cyclic);
  if (samples_per_segment < 1) throw ConfigError("catmull_rom: samples_per_segment must be >= 1");
  const int k = static_cast<int>(keyframes.size());
  const int segments = cyclic ? k : k - 1;
  std::vector<Vec> out;
  out.reserve(static_cast<std::size_t>(segments * samples_per_segment + 1));
  for (int s = 0; s < segments; ++s) {
    for (int j = 0; j < samples_per_segment; ++j) {
      const double u = static_cast<double>(j) / static_cast<double>(samples_per_segment);
      out.push_back(catmull_rom_point(keyframes, s, u, cyclic));
    }
  }
  if (!cyclic) out.push_back(keyframes.back());
  return out;
}

std::vector<Vec> load_keyframes(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot read keyframes '" + path.string() + "'");
  std::vector<Vec> out;
  std::string line;
  int lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    std::replace(line.begin(), line.end(), ',', ' ');
    std::istringstream ss(line);
    std::string first;
    if (!(ss >> first) || first[0] == '#') continue;
    std::vector<double> values;
    ss.clear();
    ss.str(line);
    std::string tok;
    while (ss >> tok) {
      try {
        std::size_t used = 0;
        values.push_back(std::stod(tok, &used));
        if (used != tok.size()) throw std::invalid_argument(tok);
      } catch (const std::exception&) {
        throw ConfigError(path.string() + ":" + std::to_string(lineno) + ": '" + tok + "' is not a number");
      }
    }
    if (!out.empty() && static_cast<std::size_t>(out.front().size()) != values.size()) {
      throw ConfigError(path.string() + ":" + std::to_string(lineno) + ": keyframe dimension differs from line 1");
    }
    out.push_back(Eigen::Map<const Vec>(values.data(), static_cast<Eigen::Index>(values.size())));
  }
  return out;
}

}  // namespace nsub
