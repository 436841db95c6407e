#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <span>
#include <vector>

namespace mmsyn {

inline constexpr std::uint32_t kIdxImageMagic = 0x00000803;  // 2051
inline constexpr std::uint32_t kIdxLabelMagic = 0x00000801;  // 2049

struct MnistSet {
    std::size_t rows = 28;
    std::size_t cols = 28;
    std::vector<std::uint8_t> pixels;  // image-major, row-major within an image
    std::vector<std::uint8_t> labels;

    std::size_t size() const { return labels.size(); }
    std::size_t image_size() const { return rows * cols; }
    std::span<const std::uint8_t> image(std::size_t i) const {
        return {pixels.data() + i * image_size(), image_size()};
    }
};

struct Mnist {
    MnistSet train;
    MnistSet test;
};

struct IdxImages {
    std::size_t count = 0;
    std::size_t rows = 0;
    std::size_t cols = 0;
    std::vector<std::uint8_t> pixels;
};

/// Big-endian IDX readers; gzip-compressed files are read transparently.
/// Throw IngestError naming the file on a missing file, bad magic, or
/// truncated payload.
IdxImages read_idx_images(const std::filesystem::path& file);
std::vector<std::uint8_t> read_idx_labels(const std::filesystem::path& file);

/// Loads train-{images-idx3,labels-idx1}-ubyte and t10k-* from `dir`
/// (optionally with a .gz suffix) and checks the 60,000 / 10,000 counts.
Mnist load_mnist(const std::filesystem::path& dir);

/// Environment variable naming the dataset root.
inline constexpr const char* kMnistDirEnv = "MMSYN_MNIST_DIR";

}  // namespace mmsyn
