#pragma once

#include <cstdint>
#include <fstream>
#include <stdexcept>
#include <string>
#include <vector>

#include "tensor.hpp"

namespace lipnext {

/// Labeled image set held as raw bytes; images are materialized on demand as
/// [0, 1]-scaled tensors. Pixel storage is channel-fastest per image, matching
/// the Tensor layout.
struct Dataset {
    std::size_t h = 0, w = 0, c = 0;
    std::vector<std::uint8_t> pixels;
    std::vector<std::uint8_t> labels;

    std::size_t size() const { return labels.size(); }

    Tensor image(std::size_t i) const {
        Tensor t(h, w, c);
        const std::size_t n = h * w * c;
        const std::uint8_t* src = pixels.data() + i * n;
        double* dst = t.data();
        for (std::size_t k = 0; k < n; ++k) dst[k] = static_cast<double>(src[k]) / 255.0;
        return t;
    }
};

namespace detail {

inline std::uint32_t read_be_u32(std::istream& is, const std::string& path) {
    std::uint8_t b[4];
    if (!is.read(reinterpret_cast<char*>(b), 4))
        throw std::runtime_error("unexpected end of file in " + path);
    return (std::uint32_t(b[0]) << 24) | (std::uint32_t(b[1]) << 16) |
           (std::uint32_t(b[2]) << 8) | std::uint32_t(b[3]);
}

}  // namespace detail

/// IDX image/label pair (the MNIST container format: big-endian header,
/// magic 0x803 for u8 rank-3 images, 0x801 for u8 rank-1 labels).
inline Dataset load_mnist_idx(const std::string& images_path, const std::string& labels_path) {
    std::ifstream imgs(images_path, std::ios::binary);
    if (!imgs) throw std::runtime_error("cannot open " + images_path);
    if (detail::read_be_u32(imgs, images_path) != 0x00000803u)
        throw std::runtime_error(images_path + ": bad magic, expected IDX u8 images (0x803)");
    const std::uint32_t n = detail::read_be_u32(imgs, images_path);
    const std::uint32_t rows = detail::read_be_u32(imgs, images_path);
    const std::uint32_t cols = detail::read_be_u32(imgs, images_path);

    Dataset ds;
    ds.h = rows;
    ds.w = cols;
    ds.c = 1;
    ds.pixels.resize(std::size_t(n) * rows * cols);
    if (!imgs.read(reinterpret_cast<char*>(ds.pixels.data()),
                   static_cast<std::streamsize>(ds.pixels.size())))
        throw std::runtime_error(images_path + ": truncated pixel data");

    std::ifstream labs(labels_path, std::ios::binary);
    if (!labs) throw std::runtime_error("cannot open " + labels_path);
    if (detail::read_be_u32(labs, labels_path) != 0x00000801u)
        throw std::runtime_error(labels_path + ": bad magic, expected IDX u8 labels (0x801)");
    const std::uint32_t nl = detail::read_be_u32(labs, labels_path);
    if (nl != n)
        throw std::runtime_error("image/label count mismatch: " + std::to_string(n) + " vs " +
                                 std::to_string(nl));
    ds.labels.resize(nl);
    if (!labs.read(reinterpret_cast<char*>(ds.labels.data()),
                   static_cast<std::streamsize>(ds.labels.size())))
        throw std::runtime_error(labels_path + ": truncated label data");
    return ds;
}

/// CIFAR-10 binary batches: 3073-byte records (label byte + 32x32x3 pixels,
/// plane-major RGB). Converted to channel-fastest on load.
inline Dataset load_cifar_bin(const std::vector<std::string>& paths) {
    Dataset ds;
    ds.h = 32;
    ds.w = 32;
    ds.c = 3;
    const std::size_t plane = 32 * 32;
    std::vector<std::uint8_t> record(1 + 3 * plane);
    for (const auto& path : paths) {
        std::ifstream f(path, std::ios::binary);
        if (!f) throw std::runtime_error("cannot open " + path);
        while (f.read(reinterpret_cast<char*>(record.data()),
                      static_cast<std::streamsize>(record.size()))) {
            ds.labels.push_back(record[0]);
            const std::size_t base = ds.pixels.size();
            ds.pixels.resize(base + 3 * plane);
            for (std::size_t p = 0; p < plane; ++p)
                for (std::size_t ch = 0; ch < 3; ++ch)
                    ds.pixels[base + p * 3 + ch] = record[1 + ch * plane + p];
        }
        if (f.gcount() != 0)
            throw std::runtime_error(path + ": trailing partial record (" +
                                     std::to_string(f.gcount()) + " bytes)");
    }
    if (ds.labels.empty()) throw std::runtime_error("load_cifar_bin: no records read");
    return ds;
}

}  // namespace lipnext
