// Copyright 2026 The deap3d Authors.
// SPDX-License-Identifier: Apache-2.0
//
// Volumetric containers, the DEAPVOL1 file format, synthetic phantoms and
// dataset partitioning.
//
// DEAPVOL1 layout (all header lines end in '\n'):
//
//   DEAPVOL1
//   dims <H> <W> <D>
//   channels <N>
//   spacing <sh> <sw> <sd>
//   dtype <f32|u8>
//   <payload>
//
// The payload holds H*W*D*N little-endian values, H-major, then W, then D,
// then channel. Masks use dtype u8 with N = 1.

#ifndef DEAP_VOLUME_IO_HPP_
#define DEAP_VOLUME_IO_HPP_

#include <array>
#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "deap/ops.hpp"

namespace deap {

using Spacing = std::array<double, 3>;

struct Volume {
  Index3 dims{};
  std::size_t channels = 1;
  Spacing spacing{1.0, 1.0, 1.0};
  std::vector<float> data;

  std::size_t voxel_count() const { return dims[0] * dims[1] * dims[2]; }
  std::size_t index(std::size_t h, std::size_t w, std::size_t d, std::size_t c = 0) const {
    return ((h * dims[1] + w) * dims[2] + d) * channels + c;
  }
  // Throws on broken invariants: size, spacing, finiteness.
  void validate() const;

  bool operator==(const Volume&) const = default;
};

struct Mask {
  Index3 dims{};
  Spacing spacing{1.0, 1.0, 1.0};
  std::vector<std::uint8_t> data;

  std::size_t voxel_count() const { return dims[0] * dims[1] * dims[2]; }
  std::size_t index(std::size_t h, std::size_t w, std::size_t d) const {
    return (h * dims[1] + w) * dims[2] + d;
  }
  std::size_t foreground() const;
  void validate() const;

  bool operator==(const Mask&) const = default;
};

void write_volume(const Volume& volume, const std::filesystem::path& path);
Volume read_volume(const std::filesystem::path& path);
void write_mask(const Mask& mask, const std::filesystem::path& path);
Mask read_mask(const std::filesystem::path& path);

// A randomized superellipsoid with a smooth angular perturbation of its
// surface. Coordinates are in voxel units.
struct LesionShape {
  std::array<double, 3> center{};
  std::array<double, 3> radii{};
  double exponent = 2.0;
  double amplitude = 0.0;
  int polar_freq = 1;
  int azimuth_freq = 1;
  double polar_phase = 0.0;
  double azimuth_phase = 0.0;

  bool contains(double h, double w, double d) const;
  // Radius of a sphere around `center` that encloses the shape.
  double bounding_radius() const;
};

// Voxels of the shape's 6-connected component that contains its center.
Mask rasterize_lesion(const LesionShape& lesion, const Index3& dims);

struct Phantom {
  Volume volume;
  Mask mask;
  std::vector<LesionShape> lesions;
};

// Smooth background, one ellipsoidal organ and `lesion_count` brighter
// blobs at disjoint centers, normalized to [0, 1]. A pure function of its
// arguments.
Phantom generate_phantom(std::uint64_t seed, const Index3& dims, std::size_t lesion_count,
                         double noise_sd);

struct DatasetSplit {
  std::vector<std::string> train;
  std::vector<std::string> val;
  std::vector<std::string> test;
  std::uint64_t seed = 0;
};

// Fisher-Yates driven by mt19937_64(seed), drawing j = rng() % (i + 1) for
// i = n-1 down to 1.
std::vector<std::string> shuffle_ids(const std::vector<std::string>& ids, std::uint64_t seed);

// Validation and test sizes are the rounded ratios; the remainder goes to
// train. Rejects duplicate ids.
DatasetSplit split_dataset(const std::vector<std::string>& case_ids,
                           const std::array<double, 3>& ratios, std::uint64_t seed);

struct Fold {
  std::vector<std::string> train;
  std::vector<std::string> holdout;
};

// Shuffles, then deals contiguous holdout blocks; the first n % k folds get
// one extra case.
std::vector<Fold> kfold(const std::vector<std::string>& case_ids, std::size_t k,
                        std::uint64_t seed);

}  // namespace deap

#endif  // DEAP_VOLUME_IO_HPP_
