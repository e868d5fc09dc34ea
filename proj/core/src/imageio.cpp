#include "trnr/imageio.hpp"

#include <png.h>

#include <algorithm>
#include <array>
#include <cctype>
#include <cmath>
#include <cstdio>
#include <cstring>
#include <fstream>
#include <sstream>

#include "trnr/error.hpp"

namespace trnr::imageio {

namespace fs = std::filesystem;

Image::Image(int h, int w, int c, double fill)
    : height(h), width(w), channels(c),
      data(static_cast<std::size_t>(h) * static_cast<std::size_t>(w) * static_cast<std::size_t>(c),
           fill) {}

std::string Patch::id() const {
  return source_id + ":" + std::to_string(row_offset) + ":" + std::to_string(col_offset);
}

namespace {

bool has_png_signature(const std::string& head) {
  static constexpr std::array<unsigned char, 8> kSig = {0x89, 'P', 'N', 'G', '\r', '\n', 0x1a, '\n'};
  return head.size() >= kSig.size() && std::memcmp(head.data(), kSig.data(), kSig.size()) == 0;
}

Image load_png(const fs::path& path) {
  png_image png;
  std::memset(&png, 0, sizeof png);
  png.version = PNG_IMAGE_VERSION;
  if (!png_image_begin_read_from_file(&png, path.c_str())) {
    fail("unreadable file", path.string() + " (" + png.message + ")");
  }
  const bool color = (png.format & PNG_FORMAT_FLAG_COLOR) != 0;
  png.format = color ? PNG_FORMAT_RGB : PNG_FORMAT_GRAY;
  if (png.width == 0 || png.height == 0) {
    png_image_free(&png);
    fail("zero-dimension image", path.string());
  }
  std::vector<unsigned char> buffer(PNG_IMAGE_SIZE(png));
  if (!png_image_finish_read(&png, nullptr, buffer.data(), 0, nullptr)) {
    std::string msg = png.message;
    png_image_free(&png);
    fail("unreadable file", path.string() + " (" + msg + ")");
  }
  const int h = static_cast<int>(png.height);
  const int w = static_cast<int>(png.width);
  const int c = color ? 3 : 1;
  Image img(h, w, c);
  for (int r = 0; r < h; ++r)
    for (int x = 0; x < w; ++x)
      for (int ch = 0; ch < c; ++ch)
        img.at(ch, r, x) =
            buffer[(static_cast<std::size_t>(r) * w + x) * c + ch] / 255.0;
  return img;
}

// Reads one whitespace-separated header token of a PNM file, skipping comments.
bool pnm_token(std::istream& in, std::string& token) {
  token.clear();
  int ch;
  while ((ch = in.get()) != EOF) {
    if (ch == '#') {
      while ((ch = in.get()) != EOF && ch != '\n') {
      }
      continue;
    }
    if (!std::isspace(ch)) break;
  }
  if (ch == EOF) return false;
  token.push_back(static_cast<char>(ch));
  while ((ch = in.peek()) != EOF && !std::isspace(ch) && ch != '#') {
    token.push_back(static_cast<char>(in.get()));
  }
  return true;
}

Image load_pnm(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) fail("unreadable file", path.string());
  std::string magic, ws, hs, ms;
  if (!pnm_token(in, magic) || !pnm_token(in, ws) || !pnm_token(in, hs) || !pnm_token(in, ms)) {
    fail("unreadable file", path.string() + " (truncated header)");
  }
  const int c = magic == "P5" ? 1 : 3;
  long w = 0, h = 0, maxval = 0;
  try {
    w = std::stol(ws);
    h = std::stol(hs);
    maxval = std::stol(ms);
  } catch (const std::exception&) {
    fail("unreadable file", path.string() + " (bad header)");
  }
  if (w <= 0 || h <= 0) fail("zero-dimension image", path.string());
  if (maxval <= 0 || maxval > 65535) fail("unreadable file", path.string() + " (bad maxval)");
  in.get();  // single whitespace after maxval
  const std::size_t bytes_per = maxval > 255 ? 2 : 1;
  const std::size_t n = static_cast<std::size_t>(w) * static_cast<std::size_t>(h) * c;
  std::vector<unsigned char> raw(n * bytes_per);
  in.read(reinterpret_cast<char*>(raw.data()), static_cast<std::streamsize>(raw.size()));
  if (static_cast<std::size_t>(in.gcount()) != raw.size()) {
    fail("unreadable file", path.string() + " (truncated pixel data)");
  }
  Image img(static_cast<int>(h), static_cast<int>(w), c);
  for (long r = 0; r < h; ++r)
    for (long x = 0; x < w; ++x)
      for (int ch = 0; ch < c; ++ch) {
        const std::size_t idx = (static_cast<std::size_t>(r) * w + x) * c + ch;
        const unsigned v = bytes_per == 2 ? (raw[2 * idx] << 8U) | raw[2 * idx + 1] : raw[idx];
        img.at(ch, static_cast<int>(r), static_cast<int>(x)) =
            std::min(1.0, static_cast<double>(v) / static_cast<double>(maxval));
      }
  return img;
}

unsigned char quantize(double v) {
  return static_cast<unsigned char>(std::lround(std::clamp(v, 0.0, 1.0) * 255.0));
}

std::vector<unsigned char> interleave(const Image& image) {
  std::vector<unsigned char> out(image.size());
  for (int r = 0; r < image.height; ++r)
    for (int x = 0; x < image.width; ++x)
      for (int ch = 0; ch < image.channels; ++ch)
        out[(static_cast<std::size_t>(r) * image.width + x) * image.channels + ch] =
            quantize(image.at(ch, r, x));
  return out;
}

std::string lower(std::string s) {
  std::transform(s.begin(), s.end(), s.begin(),
                 [](unsigned char c) { return static_cast<char>(std::tolower(c)); });
  return s;
}

}  // namespace

Image load_image(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) fail("unreadable file", path.string());
  std::string head(8, '\0');
  in.read(head.data(), static_cast<std::streamsize>(head.size()));
  head.resize(static_cast<std::size_t>(in.gcount()));
  in.close();
  if (head.empty()) fail("unreadable file", path.string() + " (empty)");
  if (has_png_signature(head)) return load_png(path);
  if (head.size() >= 2 && head[0] == 'P' && (head[1] == '5' || head[1] == '6')) return load_pnm(path);
  fail("unsupported format", path.string());
}

void save_image(const Image& image, const fs::path& path) {
  require(image.channels == 1 || image.channels == 3, "unsupported format",
          "channel count " + std::to_string(image.channels));
  require(image.height > 0 && image.width > 0, "zero-dimension image");
  const std::string ext = lower(path.extension().string());
  const auto pixels = interleave(image);
  if (ext == ".png") {
    png_image png;
    std::memset(&png, 0, sizeof png);
    png.version = PNG_IMAGE_VERSION;
    png.width = static_cast<png_uint_32>(image.width);
    png.height = static_cast<png_uint_32>(image.height);
    png.format = image.channels == 3 ? PNG_FORMAT_RGB : PNG_FORMAT_GRAY;
    if (!png_image_write_to_file(&png, path.c_str(), 0, pixels.data(), 0, nullptr)) {
      fail("write failed", path.string() + " (" + png.message + ")");
    }
    return;
  }
  if (ext == ".pgm" || ext == ".ppm" || ext == ".pnm") {
    std::ofstream out(path, std::ios::binary);
    if (!out) fail("write failed", path.string());
    out << (image.channels == 1 ? "P5" : "P6") << "\n"
        << image.width << " " << image.height << "\n255\n";
    out.write(reinterpret_cast<const char*>(pixels.data()), static_cast<std::streamsize>(pixels.size()));
    if (!out) fail("write failed", path.string());
    return;
  }
  fail("unsupported format", path.string());
}

Image to_grayscale(const Image& image) {
  if (image.channels == 1) return image;
  Image out(image.height, image.width, 1);
  for (int r = 0; r < image.height; ++r)
    for (int x = 0; x < image.width; ++x)
      out.at(0, r, x) = 0.299 * image.at(0, r, x) + 0.587 * image.at(1, r, x) +
                        0.114 * image.at(2, r, x);
  return out;
}

long long patch_grid_count(int height, int width, int size, int stride) {
  require(stride >= 1, "invalid stride", std::to_string(stride));
  require(size >= 1, "invalid patch size", std::to_string(size));
  if (size > height || size > width) {
    fail("size larger than image", std::to_string(size) + " > min(" + std::to_string(height) +
                                       ", " + std::to_string(width) + ")");
  }
  const long long rows = (height - size) / stride + 1;
  const long long cols = (width - size) / stride + 1;
  return rows * cols;
}

std::vector<Patch> extract_patches(const PairedSample& sample, int size, int stride) {
  require(sample.clean.same_shape(sample.degraded), "shape mismatch",
          "clean and degraded images of " + sample.id + " differ");
  const long long count = patch_grid_count(sample.clean.height, sample.clean.width, size, stride);
  const int c = sample.clean.channels;
  std::vector<Patch> patches;
  patches.reserve(static_cast<std::size_t>(count));
  for (int r = 0; r + size <= sample.clean.height; r += stride) {
    for (int x = 0; x + size <= sample.clean.width; x += stride) {
      Patch p;
      p.source_id = sample.id;
      p.row_offset = r;
      p.col_offset = x;
      p.size = size;
      p.channels = c;
      p.clean.resize(static_cast<std::size_t>(c) * size * size);
      p.degraded.resize(p.clean.size());
      std::size_t k = 0;
      for (int ch = 0; ch < c; ++ch)
        for (int i = 0; i < size; ++i)
          for (int j = 0; j < size; ++j, ++k) {
            p.clean[k] = sample.clean.at(ch, r + i, x + j);
            p.degraded[k] = sample.degraded.at(ch, r + i, x + j);
          }
      patches.push_back(std::move(p));
    }
  }
  return patches;
}

Image add_gaussian_noise(const Image& image, double sigma, Rng& rng) {
  require(sigma >= 0.0, "negative sigma", std::to_string(sigma));
  if (sigma == 0.0) return image;
  std::normal_distribution<double> noise(0.0, sigma);
  Image out = image;
  for (double& v : out.data) v = std::clamp(v + noise(rng) / 255.0, 0.0, 1.0);
  return out;
}

std::vector<ManifestRecord> read_manifest(const fs::path& path) {
  std::ifstream in(path);
  if (!in) fail("unreadable file", path.string());
  const fs::path base = path.parent_path();
  auto resolve = [&](const std::string& p) {
    fs::path q(p);
    return q.is_absolute() ? q : base / q;
  };
  std::vector<ManifestRecord> records;
  std::string line;
  int lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty() || line[0] == '#') continue;
    std::vector<std::string> fields;
    std::stringstream ss(line);
    std::string f;
    while (std::getline(ss, f, '\t')) fields.push_back(f);
    if (fields.size() != 3) {
      fail("malformed manifest", path.string() + ":" + std::to_string(lineno) +
                                     " expects 3 tab-separated fields");
    }
    ManifestRecord rec;
    rec.id = fields[0];
    rec.clean_path = resolve(fields[1]);
    if (fields[2] != "-") rec.degraded_path = resolve(fields[2]);
    records.push_back(std::move(rec));
  }
  return records;
}

void write_manifest(const std::vector<ManifestRecord>& records, const fs::path& path) {
  std::ofstream out(path);
  if (!out) fail("write failed", path.string());
  for (const auto& r : records) {
    out << r.id << '\t' << r.clean_path.string() << '\t'
        << (r.degraded_path ? r.degraded_path->string() : std::string("-")) << '\n';
  }
}

std::vector<PairedSample> load_dataset(const std::vector<ManifestRecord>& records, bool grayscale,
                                       const NoiseSpec& noise, std::uint64_t seed) {
  std::vector<PairedSample> out;
  out.reserve(records.size());
  for (std::size_t i = 0; i < records.size(); ++i) {
    const auto& rec = records[i];
    PairedSample s;
    s.id = rec.id;
    s.clean = load_image(rec.clean_path);
    if (grayscale) s.clean = to_grayscale(s.clean);
    if (rec.degraded_path) {
      s.degraded = load_image(*rec.degraded_path);
      if (grayscale) s.degraded = to_grayscale(s.degraded);
      require(s.clean.same_shape(s.degraded), "shape mismatch",
              "clean and degraded images of " + rec.id + " differ");
    } else {
      Rng rng = make_rng(seed, i);
      double sigma = noise.sigma;
      if (noise.blind_max) sigma = std::uniform_real_distribution<double>(0.0, *noise.blind_max)(rng);
      s.degraded = add_gaussian_noise(s.clean, sigma, rng);
    }
    out.push_back(std::move(s));
  }
  return out;
}

Image synthetic_image(int height, int width, int channels, Rng& rng) {
  require(height > 0 && width > 0 && channels > 0, "zero-dimension image");
  std::uniform_real_distribution<double> u(0.0, 1.0);
  Image img(height, width, channels);
  for (int c = 0; c < channels; ++c) {
    const double base = 0.2 + 0.6 * u(rng);
    const double gy = (u(rng) - 0.5) * 0.4;
    const double gx = (u(rng) - 0.5) * 0.4;
    for (int r = 0; r < height; ++r) {
      for (int q = 0; q < width; ++q) {
        img.at(c, r, q) = base + gy * r / height + gx * q / width;
      }
    }
  }
  std::uniform_int_distribution<int> shapes(3, 6);
  const int n = shapes(rng);
  for (int s = 0; s < n; ++s) {
    const bool disc = u(rng) < 0.5;
    const double cy = u(rng) * height;
    const double cx = u(rng) * width;
    const double ry = (0.08 + 0.25 * u(rng)) * height;
    const double rx = (0.08 + 0.25 * u(rng)) * width;
    std::vector<double> level(static_cast<std::size_t>(channels));
    for (auto& l : level) l = u(rng);
    for (int r = 0; r < height; ++r) {
      for (int q = 0; q < width; ++q) {
        const double dy = (r - cy) / ry;
        const double dx = (q - cx) / rx;
        const bool inside = disc ? dy * dy + dx * dx <= 1.0 : std::abs(dy) <= 1.0 && std::abs(dx) <= 1.0;
        if (!inside) continue;
        for (int c = 0; c < channels; ++c) img.at(c, r, q) = level[static_cast<std::size_t>(c)];
      }
    }
  }
  for (auto& v : img.data) v = std::clamp(v, 0.0, 1.0);
  return img;
}

std::vector<PairedSample> synthetic_dataset(int count, int height, int width, int channels, double sigma,
                                            std::uint64_t seed) {
  require(count >= 0, "invalid config", "negative image count");
  std::vector<PairedSample> out;
  out.reserve(static_cast<std::size_t>(count));
  for (int i = 0; i < count; ++i) {
    Rng rng = make_rng(seed, static_cast<std::uint64_t>(i));
    PairedSample s;
    s.id = "syn" + std::to_string(i);
    s.clean = synthetic_image(height, width, channels, rng);
    s.degraded = add_gaussian_noise(s.clean, sigma, rng);
    out.push_back(std::move(s));
  }
  return out;
}

}  // namespace trnr::imageio
