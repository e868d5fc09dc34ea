#pragma once

// Image loading/saving, degradation synthesis and grid patch extraction.

#include <cstddef>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "trnr/rng.hpp"

namespace trnr::imageio {

/// Planar (channel-major, then row-major) image with intensities in [0,1].
struct Image {
  int height = 0;
  int width = 0;
  int channels = 0;
  std::vector<double> data;

  Image() = default;
  Image(int h, int w, int c, double fill = 0.0);

  [[nodiscard]] std::size_t plane_size() const {
    return static_cast<std::size_t>(height) * static_cast<std::size_t>(width);
  }
  [[nodiscard]] std::size_t size() const { return data.size(); }

  double& at(int c, int row, int col) {
    return data[static_cast<std::size_t>(c) * plane_size() +
                static_cast<std::size_t>(row) * static_cast<std::size_t>(width) +
                static_cast<std::size_t>(col)];
  }
  [[nodiscard]] double at(int c, int row, int col) const {
    return data[static_cast<std::size_t>(c) * plane_size() +
                static_cast<std::size_t>(row) * static_cast<std::size_t>(width) +
                static_cast<std::size_t>(col)];
  }

  [[nodiscard]] bool same_shape(const Image& other) const {
    return height == other.height && width == other.width && channels == other.channels;
  }
};

struct PairedSample {
  Image clean;
  Image degraded;
  std::string id;
};

struct Patch {
  std::string source_id;
  int row_offset = 0;
  int col_offset = 0;
  int size = 0;
  int channels = 0;
  std::vector<double> clean;     // channels x size x size, planar
  std::vector<double> degraded;  // same shape as clean
  std::optional<int> cluster_id;

  /// Stable identifier "source_id:row:col".
  [[nodiscard]] std::string id() const;
};

Image load_image(const std::filesystem::path& path);

/// Writes PNG (by .png extension) or binary PGM/PPM (.pgm/.ppm/.pnm).
/// Intensities are quantized to 8 bits.
void save_image(const Image& image, const std::filesystem::path& path);

Image to_grayscale(const Image& image);

/// Number of stride-aligned size x size crops: floor((H-s)/t+1) * floor((W-s)/t+1).
long long patch_grid_count(int height, int width, int size, int stride);

/// Crops every grid patch in row-major offset order. cluster_id is left unset.
std::vector<Patch> extract_patches(const PairedSample& sample, int size, int stride);

/// out = clamp(in + n/255, 0, 1), n ~ N(0, sigma^2) i.i.d., sigma on the 0-255 scale.
Image add_gaussian_noise(const Image& image, double sigma, Rng& rng);

/// One record of a paired-dataset manifest: `id <tab> clean <tab> degraded`.
struct ManifestRecord {
  std::string id;
  std::filesystem::path clean_path;
  std::optional<std::filesystem::path> degraded_path;  // nullopt for "-"
};

/// Parses a dataset manifest. Relative paths resolve against the manifest's
/// directory. Blank lines and lines starting with '#' are skipped.
std::vector<ManifestRecord> read_manifest(const std::filesystem::path& path);

void write_manifest(const std::vector<ManifestRecord>& records,
                    const std::filesystem::path& path);

struct NoiseSpec {
  double sigma = 25.0;
  /// When set, each image draws its own sigma uniformly from [0, blind_max].
  std::optional<double> blind_max;
};

/// Loads every record. Records without a degraded path get synthetic Gaussian
/// noise; sample i uses a generator derived from (seed, i).
std::vector<PairedSample> load_dataset(const std::vector<ManifestRecord>& records,
                                       bool grayscale, const NoiseSpec& noise,
                                       std::uint64_t seed);

/// Piecewise-smooth test image: a linear ramp with a few flat discs and
/// rectangles on top. Used for fixtures and desk-scale runs.
Image synthetic_image(int height, int width, int channels, Rng& rng);

/// `count` clean synthetic images paired with sigma-noise copies; image i is
/// drawn from (seed, i).
std::vector<PairedSample> synthetic_dataset(int count, int height, int width, int channels, double sigma,
                                            std::uint64_t seed);

}  // namespace trnr::imageio
