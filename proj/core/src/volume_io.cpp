// Copyright 2026 The deap3d Authors.
// SPDX-License-Identifier: Apache-2.0

#include "deap/volume_io.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <cstdio>
#include <cstring>
#include <deque>
#include <fstream>
#include <iterator>
#include <numbers>
#include <random>
#include <sstream>
#include <unordered_set>

#include "deap/error.hpp"

namespace deap {

static_assert(std::endian::native == std::endian::little,
              "payload I/O assumes a little-endian host");

namespace {

constexpr const char* kMagic = "DEAPVOL1";

void check_spacing(const Spacing& spacing) {
  for (double s : spacing) {
    require(std::isfinite(s) && s > 0.0, ErrorCode::kInvalidArgument,
            "spacing components must be finite and positive");
  }
}

struct Header {
  Index3 dims{};
  std::size_t channels = 0;
  Spacing spacing{};
  std::string dtype;
};

std::string format_double(double v) {
  char buf[64];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  return buf;
}

void write_container(const std::filesystem::path& path, const Header& h, const void* payload,
                     std::size_t bytes) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  require(out.good(), ErrorCode::kIo, "cannot open for writing: " + path.string());
  out << kMagic << '\n'
      << "dims " << h.dims[0] << ' ' << h.dims[1] << ' ' << h.dims[2] << '\n'
      << "channels " << h.channels << '\n'
      << "spacing " << format_double(h.spacing[0]) << ' ' << format_double(h.spacing[1]) << ' '
      << format_double(h.spacing[2]) << '\n'
      << "dtype " << h.dtype << '\n';
  out.write(static_cast<const char*>(payload), static_cast<std::streamsize>(bytes));
  require(out.good(), ErrorCode::kIo, "write failed: " + path.string());
}

std::string read_line(std::istream& in, const char* what) {
  std::string line;
  if (!std::getline(in, line)) fail(ErrorCode::kMalformedHeader, std::string("missing header line: ") + what);
  return line;
}

// Parses "<key> v1 v2 ..." and requires exactly `count` values.
std::vector<std::string> header_fields(const std::string& line, const char* key, std::size_t count) {
  std::istringstream ss(line);
  std::string k;
  ss >> k;
  require(k == key, ErrorCode::kMalformedHeader, std::string("expected header field '") + key + "'");
  std::vector<std::string> values;
  std::string v;
  while (ss >> v) values.push_back(v);
  require(values.size() == count, ErrorCode::kMalformedHeader,
          std::string("wrong value count for header field '") + key + "'");
  return values;
}

std::size_t parse_size(const std::string& s) {
  require(!s.empty() && std::all_of(s.begin(), s.end(), [](char c) { return c >= '0' && c <= '9'; }),
          ErrorCode::kMalformedHeader, "not an unsigned integer: " + s);
  return static_cast<std::size_t>(std::stoull(s));
}

double parse_double(const std::string& s) {
  std::size_t used = 0;
  double v = 0.0;
  try {
    v = std::stod(s, &used);
  } catch (const std::exception&) {
    fail(ErrorCode::kMalformedHeader, "not a real number: " + s);
  }
  require(used == s.size(), ErrorCode::kMalformedHeader, "not a real number: " + s);
  return v;
}

Header read_container(const std::filesystem::path& path, std::vector<char>& payload) {
  std::ifstream in(path, std::ios::binary);
  require(in.good(), ErrorCode::kIo, "cannot open for reading: " + path.string());
  std::string magic;
  if (!std::getline(in, magic) || magic != kMagic) {
    fail(ErrorCode::kBadMagic, "bad magic in " + path.string());
  }
  Header h;
  auto dims = header_fields(read_line(in, "dims"), "dims", 3);
  for (int a = 0; a < 3; ++a) h.dims[a] = parse_size(dims[a]);
  h.channels = parse_size(header_fields(read_line(in, "channels"), "channels", 1)[0]);
  auto spacing = header_fields(read_line(in, "spacing"), "spacing", 3);
  for (int a = 0; a < 3; ++a) h.spacing[a] = parse_double(spacing[a]);
  h.dtype = header_fields(read_line(in, "dtype"), "dtype", 1)[0];
  require(h.dtype == "f32" || h.dtype == "u8", ErrorCode::kMalformedHeader,
          "unknown dtype tag: " + h.dtype);
  require(h.dims[0] > 0 && h.dims[1] > 0 && h.dims[2] > 0 && h.channels > 0,
          ErrorCode::kMalformedHeader, "dims and channels must be positive");
  payload.assign(std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>());
  const std::size_t elem = h.dtype == "f32" ? 4 : 1;
  const std::size_t expected = h.dims[0] * h.dims[1] * h.dims[2] * h.channels * elem;
  require(payload.size() == expected, ErrorCode::kPayloadMismatch,
          "payload length mismatch: header implies " + std::to_string(expected) +
              " bytes, file has " + std::to_string(payload.size()));
  return h;
}

}  // namespace

void Volume::validate() const {
  require(dims[0] > 0 && dims[1] > 0 && dims[2] > 0 && channels > 0,
          ErrorCode::kInvalidArgument, "volume dims and channels must be positive");
  require(data.size() == voxel_count() * channels, ErrorCode::kShapeMismatch,
          "volume data length does not match dims");
  check_spacing(spacing);
  for (float v : data) {
    require(std::isfinite(v), ErrorCode::kNonFinite, "volume contains non-finite values");
  }
}

std::size_t Mask::foreground() const {
  return static_cast<std::size_t>(std::count(data.begin(), data.end(), std::uint8_t{1}));
}

void Mask::validate() const {
  require(dims[0] > 0 && dims[1] > 0 && dims[2] > 0, ErrorCode::kInvalidArgument,
          "mask dims must be positive");
  require(data.size() == voxel_count(), ErrorCode::kShapeMismatch,
          "mask data length does not match dims");
  check_spacing(spacing);
  for (auto v : data) {
    require(v <= 1, ErrorCode::kInvalidArgument, "mask values must be 0 or 1");
  }
}

void write_volume(const Volume& volume, const std::filesystem::path& path) {
  volume.validate();
  write_container(path, {volume.dims, volume.channels, volume.spacing, "f32"},
                  volume.data.data(), volume.data.size() * sizeof(float));
}

Volume read_volume(const std::filesystem::path& path) {
  std::vector<char> payload;
  Header h = read_container(path, payload);
  require(h.dtype == "f32", ErrorCode::kMalformedHeader, "expected dtype f32, got " + h.dtype);
  Volume v;
  v.dims = h.dims;
  v.channels = h.channels;
  v.spacing = h.spacing;
  v.data.resize(payload.size() / sizeof(float));
  std::memcpy(v.data.data(), payload.data(), payload.size());
  for (float x : v.data) {
    require(std::isfinite(x), ErrorCode::kNonFinite, "non-finite value in " + path.string());
  }
  check_spacing(v.spacing);
  return v;
}

void write_mask(const Mask& mask, const std::filesystem::path& path) {
  mask.validate();
  write_container(path, {mask.dims, 1, mask.spacing, "u8"}, mask.data.data(), mask.data.size());
}

Mask read_mask(const std::filesystem::path& path) {
  std::vector<char> payload;
  Header h = read_container(path, payload);
  require(h.dtype == "u8", ErrorCode::kMalformedHeader, "expected dtype u8, got " + h.dtype);
  require(h.channels == 1, ErrorCode::kMalformedHeader, "masks have exactly one channel");
  Mask m;
  m.dims = h.dims;
  m.spacing = h.spacing;
  m.data.assign(payload.begin(), payload.end());
  m.validate();
  return m;
}

bool LesionShape::contains(double h, double w, double d) const {
  const double u[3] = {(h - center[0]) / radii[0], (w - center[1]) / radii[1],
                       (d - center[2]) / radii[2]};
  const double r2 = u[0] * u[0] + u[1] * u[1] + u[2] * u[2];
  if (r2 == 0.0) return true;
  const double norm = std::pow(std::pow(std::abs(u[0]), exponent) +
                                   std::pow(std::abs(u[1]), exponent) +
                                   std::pow(std::abs(u[2]), exponent),
                               1.0 / exponent);
  const double polar = std::acos(std::clamp(u[2] / std::sqrt(r2), -1.0, 1.0));
  const double azimuth = std::atan2(u[1], u[0]);
  const double threshold = 1.0 + amplitude * std::sin(polar_freq * polar + polar_phase) *
                                     std::sin(azimuth_freq * azimuth + azimuth_phase);
  return norm <= threshold;
}

double LesionShape::bounding_radius() const {
  const double rmax = std::max({radii[0], radii[1], radii[2]});
  // A unit p-ball with p >= 2 reaches 3^(1/2 - 1/p) in Euclidean norm.
  const double stretch = exponent > 2.0 ? std::pow(3.0, 0.5 - 1.0 / exponent) : 1.0;
  return rmax * (1.0 + amplitude) * stretch;
}

Mask rasterize_lesion(const LesionShape& lesion, const Index3& dims) {
  Mask m;
  m.dims = dims;
  m.data.assign(dims[0] * dims[1] * dims[2], 0);
  std::array<std::ptrdiff_t, 3> seed{};
  for (int a = 0; a < 3; ++a) {
    seed[a] = static_cast<std::ptrdiff_t>(std::lround(lesion.center[a]));
    if (seed[a] < 0 || seed[a] >= static_cast<std::ptrdiff_t>(dims[a])) return m;
  }
  if (!lesion.contains(seed[0], seed[1], seed[2])) return m;
  std::deque<std::array<std::ptrdiff_t, 3>> queue{seed};
  m.data[m.index(seed[0], seed[1], seed[2])] = 1;
  constexpr std::ptrdiff_t kSteps[6][3] = {{1, 0, 0},  {-1, 0, 0}, {0, 1, 0},
                                           {0, -1, 0}, {0, 0, 1},  {0, 0, -1}};
  while (!queue.empty()) {
    const auto p = queue.front();
    queue.pop_front();
    for (const auto& s : kSteps) {
      const std::ptrdiff_t q[3] = {p[0] + s[0], p[1] + s[1], p[2] + s[2]};
      bool inside = true;
      for (int a = 0; a < 3; ++a) {
        if (q[a] < 0 || q[a] >= static_cast<std::ptrdiff_t>(dims[a])) inside = false;
      }
      if (!inside) continue;
      const std::size_t idx = m.index(q[0], q[1], q[2]);
      if (m.data[idx] || !lesion.contains(q[0], q[1], q[2])) continue;
      m.data[idx] = 1;
      queue.push_back({q[0], q[1], q[2]});
    }
  }
  return m;
}

Phantom generate_phantom(std::uint64_t seed, const Index3& dims, std::size_t lesion_count,
                         double noise_sd) {
  for (auto d : dims) {
    require(d >= 16, ErrorCode::kInvalidArgument, "phantom dims must each be >= 16");
  }
  require(lesion_count >= 1, ErrorCode::kInvalidArgument, "lesion_count must be >= 1");
  require(std::isfinite(noise_sd) && noise_sd >= 0.0, ErrorCode::kInvalidArgument,
          "noise_sd must be >= 0");

  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  auto uniform = [&](double lo, double hi) { return lo + (hi - lo) * unit(rng); };
  constexpr double kTwoPi = 2.0 * std::numbers::pi;

  // Background: a few low-frequency cosines.
  struct Wave {
    double freq[3];
    double phase;
  };
  Wave waves[3];
  for (auto& wv : waves) {
    for (auto& f : wv.freq) f = uniform(0.3, 1.2);
    wv.phase = uniform(0.0, kTwoPi);
  }

  // Organ ellipsoid around the volume center.
  double organ_center[3], organ_axes[3];
  for (int a = 0; a < 3; ++a) {
    organ_center[a] = (dims[a] - 1) / 2.0 + uniform(-0.05, 0.05) * dims[a];
    organ_axes[a] = uniform(0.32, 0.42) * dims[a];
  }

  const double min_dim = static_cast<double>(std::min({dims[0], dims[1], dims[2]}));
  std::vector<LesionShape> lesions;
  for (std::size_t k = 0; k < lesion_count; ++k) {
    LesionShape les;
    // Shrink with the count so several blobs still fit side by side.
    const double r0 = uniform(0.14, 0.2) * min_dim / std::sqrt(static_cast<double>(lesion_count));
    for (auto& r : les.radii) r = r0 * uniform(0.85, 1.15);
    les.exponent = uniform(1.6, 2.6);
    les.amplitude = uniform(0.05, 0.15);
    les.polar_freq = 2 + static_cast<int>(rng() % 2);
    les.azimuth_freq = 1 + static_cast<int>(rng() % 3);
    les.polar_phase = uniform(0.0, kTwoPi);
    les.azimuth_phase = uniform(0.0, kTwoPi);
    const double reach = les.bounding_radius() + 1.0;
    bool placed = false;
    for (int attempt = 0; attempt < 200 && !placed; ++attempt) {
      bool fits = true;
      for (int a = 0; a < 3; ++a) {
        const double lo = std::max(reach, organ_center[a] - 0.5 * organ_axes[a]);
        const double hi = std::min(dims[a] - 1.0 - reach, organ_center[a] + 0.5 * organ_axes[a]);
        if (lo > hi) {
          fits = false;
          break;
        }
        les.center[a] = uniform(lo, hi);
      }
      if (!fits) break;
      placed = true;
      for (const auto& other : lesions) {
        double dist2 = 0.0;
        for (int a = 0; a < 3; ++a) dist2 += std::pow(les.center[a] - other.center[a], 2);
        if (std::sqrt(dist2) <= reach + other.bounding_radius() + 1.0) {
          placed = false;
          break;
        }
      }
    }
    require(placed, ErrorCode::kInvalidArgument,
            "dims too small to fit lesion " + std::to_string(k + 1) + " of " +
                std::to_string(lesion_count) + " at disjoint positions");
    lesions.push_back(les);
  }

  Phantom out;
  out.lesions = lesions;
  out.mask.dims = dims;
  out.mask.data.assign(dims[0] * dims[1] * dims[2], 0);
  for (const auto& les : lesions) {
    const Mask blob = rasterize_lesion(les, dims);
    for (std::size_t i = 0; i < blob.data.size(); ++i) out.mask.data[i] |= blob.data[i];
  }

  Volume& vol = out.volume;
  vol.dims = dims;
  vol.channels = 1;
  vol.data.resize(vol.voxel_count());
  std::normal_distribution<double> normal(0.0, 1.0);
  for (std::size_t h = 0; h < dims[0]; ++h) {
    for (std::size_t w = 0; w < dims[1]; ++w) {
      for (std::size_t d = 0; d < dims[2]; ++d) {
        const double p[3] = {static_cast<double>(h), static_cast<double>(w),
                             static_cast<double>(d)};
        double value = 0.15;
        for (const auto& wv : waves) {
          double arg = wv.phase;
          for (int a = 0; a < 3; ++a) arg += kTwoPi * wv.freq[a] * p[a] / dims[a];
          value += 0.03 * std::cos(arg);
        }
        double r2 = 0.0;
        for (int a = 0; a < 3; ++a) r2 += std::pow((p[a] - organ_center[a]) / organ_axes[a], 2);
        if (r2 <= 1.0) value += 0.3;
        const std::size_t idx = vol.index(h, w, d);
        if (out.mask.data[idx]) value += 0.3;
        if (noise_sd > 0.0) value += noise_sd * normal(rng);
        vol.data[idx] = static_cast<float>(value);
      }
    }
  }
  const auto [lo_it, hi_it] = std::minmax_element(vol.data.begin(), vol.data.end());
  const float lo = *lo_it, hi = *hi_it;
  if (hi > lo) {
    for (auto& v : vol.data) v = (v - lo) / (hi - lo);
  }
  return out;
}

std::vector<std::string> shuffle_ids(const std::vector<std::string>& ids, std::uint64_t seed) {
  std::vector<std::string> out = ids;
  std::mt19937_64 rng(seed);
  for (std::size_t i = out.size(); i > 1; --i) {
    const std::size_t j = static_cast<std::size_t>(rng() % i);
    std::swap(out[i - 1], out[j]);
  }
  return out;
}

namespace {

void check_unique(const std::vector<std::string>& ids) {
  std::unordered_set<std::string> seen;
  for (const auto& id : ids) {
    require(seen.insert(id).second, ErrorCode::kDuplicateId, "duplicate case id: " + id);
  }
}

}  // namespace

DatasetSplit split_dataset(const std::vector<std::string>& case_ids,
                           const std::array<double, 3>& ratios, std::uint64_t seed) {
  require(!case_ids.empty(), ErrorCode::kInvalidArgument, "split_dataset: no cases");
  for (double r : ratios) {
    require(std::isfinite(r) && r >= 0.0, ErrorCode::kInvalidArgument,
            "split_dataset: ratios must be non-negative");
  }
  require(std::abs(ratios[0] + ratios[1] + ratios[2] - 1.0) < 1e-9, ErrorCode::kInvalidArgument,
          "split_dataset: ratios must sum to 1");
  check_unique(case_ids);
  const std::size_t n = case_ids.size();
  std::size_t n_val = static_cast<std::size_t>(std::llround(ratios[1] * n));
  std::size_t n_test = static_cast<std::size_t>(std::llround(ratios[2] * n));
  if (n_val + n_test > n) n_test = n - n_val;
  const auto order = shuffle_ids(case_ids, seed);
  DatasetSplit split;
  split.seed = seed;
  const std::size_t n_train = n - n_val - n_test;
  split.train.assign(order.begin(), order.begin() + n_train);
  split.val.assign(order.begin() + n_train, order.begin() + n_train + n_val);
  split.test.assign(order.begin() + n_train + n_val, order.end());
  return split;
}

std::vector<Fold> kfold(const std::vector<std::string>& case_ids, std::size_t k,
                        std::uint64_t seed) {
  require(k >= 2, ErrorCode::kInvalidArgument, "kfold: k must be >= 2");
  require(case_ids.size() >= k, ErrorCode::kInvalidArgument,
          "kfold: need at least k cases, got " + std::to_string(case_ids.size()));
  check_unique(case_ids);
  const auto order = shuffle_ids(case_ids, seed);
  const std::size_t n = order.size();
  std::vector<Fold> folds(k);
  std::size_t begin = 0;
  for (std::size_t f = 0; f < k; ++f) {
    const std::size_t size = n / k + (f < n % k ? 1 : 0);
    for (std::size_t i = 0; i < n; ++i) {
      if (i >= begin && i < begin + size) {
        folds[f].holdout.push_back(order[i]);
      } else {
        folds[f].train.push_back(order[i]);
      }
    }
    begin += size;
  }
  return folds;
}

}  // namespace deap
