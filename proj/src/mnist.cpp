#include "mmsyn/mnist.hpp"

#include <array>
#include <memory>
#include <string>

#include <zlib.h>

#include "mmsyn/error.hpp"

namespace mmsyn {

namespace {

struct GzCloser {
    void operator()(gzFile f) const { gzclose(f); }
};
using GzHandle = std::unique_ptr<gzFile_s, GzCloser>;

class IdxReader {
public:
    explicit IdxReader(const std::filesystem::path& file) : name_(file.string()) {
        if (!std::filesystem::exists(file)) throw IngestError(name_ + ": file not found");
        handle_.reset(gzopen(name_.c_str(), "rb"));
        if (!handle_) throw IngestError(name_ + ": cannot open");
    }

    std::uint32_t read_u32() {
        std::array<unsigned char, 4> b{};
        read_exact(b.data(), b.size(), "header");
        return (std::uint32_t{b[0]} << 24) | (std::uint32_t{b[1]} << 16) | (std::uint32_t{b[2]} << 8) | b[3];
    }

    void read_exact(void* dst, std::size_t n, const char* what) {
        auto* out = static_cast<unsigned char*>(dst);
        std::size_t done = 0;
        while (done < n) {
            const unsigned chunk = static_cast<unsigned>(std::min<std::size_t>(n - done, 1u << 30));
            const int got = gzread(handle_.get(), out + done, chunk);
            if (got <= 0)
                throw IngestError(name_ + ": truncated " + what + " (expected " + std::to_string(n) +
                                  " bytes, got " + std::to_string(done) + ")");
            done += static_cast<std::size_t>(got);
        }
    }

    const std::string& name() const { return name_; }

private:
    std::string name_;
    GzHandle handle_;
};

std::filesystem::path resolve(const std::filesystem::path& dir, const std::string& stem) {
    const auto plain = dir / stem;
    if (std::filesystem::exists(plain)) return plain;
    const auto gz = dir / (stem + ".gz");
    if (std::filesystem::exists(gz)) return gz;
    return plain;
}

}  // namespace

IdxImages read_idx_images(const std::filesystem::path& file) {
    IdxReader in(file);
    const std::uint32_t magic = in.read_u32();
    if (magic != kIdxImageMagic)
        throw IngestError(in.name() + ": bad magic " + std::to_string(magic) + " (expected 2051)");
    IdxImages out;
    out.count = in.read_u32();
    out.rows = in.read_u32();
    out.cols = in.read_u32();
    out.pixels.resize(out.count * out.rows * out.cols);
    in.read_exact(out.pixels.data(), out.pixels.size(), "pixel data");
    return out;
}

std::vector<std::uint8_t> read_idx_labels(const std::filesystem::path& file) {
    IdxReader in(file);
    const std::uint32_t magic = in.read_u32();
    if (magic != kIdxLabelMagic)
        throw IngestError(in.name() + ": bad magic " + std::to_string(magic) + " (expected 2049)");
    std::vector<std::uint8_t> labels(in.read_u32());
    in.read_exact(labels.data(), labels.size(), "label data");
    for (auto l : labels)
        if (l > 9) throw IngestError(in.name() + ": label out of range");
    return labels;
}

namespace {

MnistSet load_split(const std::filesystem::path& dir, const std::string& prefix, std::size_t expected) {
    const auto image_file = resolve(dir, prefix + "-images-idx3-ubyte");
    const auto label_file = resolve(dir, prefix + "-labels-idx1-ubyte");
    IdxImages images = read_idx_images(image_file);
    MnistSet set;
    set.labels = read_idx_labels(label_file);
    if (images.count != expected)
        throw IngestError(image_file.string() + ": expected " + std::to_string(expected) + " images, found " +
                          std::to_string(images.count));
    if (set.labels.size() != expected)
        throw IngestError(label_file.string() + ": expected " + std::to_string(expected) + " labels, found " +
                          std::to_string(set.labels.size()));
    set.rows = images.rows;
    set.cols = images.cols;
    set.pixels = std::move(images.pixels);
    return set;
}

}  // namespace

Mnist load_mnist(const std::filesystem::path& dir) {
    if (!std::filesystem::is_directory(dir)) throw IngestError(dir.string() + ": dataset directory not found");
    Mnist m;
    m.train = load_split(dir, "train", 60000);
    m.test = load_split(dir, "t10k", 10000);
    return m;
}

}  // namespace mmsyn
