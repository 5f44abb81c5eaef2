#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <iterator>
#include <numeric>
#include <span>
#include <string>
#include <vector>

#include "starpath/error.hpp"
#include "starpath/hash.hpp"
#include "starpath/rng.hpp"

namespace starpath {

/// Labelled samples, inputs row-major count x input_dim.
struct Dataset {
    std::string name;
    std::size_t count = 0;
    std::size_t input_dim = 0;
    std::uint32_t num_classes = 0;
    std::vector<double> inputs;
    std::vector<std::uint32_t> labels;
    std::uint64_t checksum = 0;

    std::span<const double> input(std::size_t i) const {
        return {inputs.data() + i * input_dim, input_dim};
    }

    /// Content hash over dimensions, input bit patterns and labels.
    std::uint64_t compute_checksum() const {
        Fnv1a h;
        h.u64(count).u64(input_dim).u64(num_classes).f64s(inputs);
        for (auto l : labels) h.u64(l);
        return h.value();
    }

    void seal() {
        if (count == 0) throw InputError("dataset must hold at least one sample");
        if (inputs.size() != count * input_dim || labels.size() != count)
            throw InputError("dataset storage does not match its dimensions");
        for (auto l : labels)
            if (l >= num_classes) throw InputError("dataset label out of class range");
        for (double v : inputs)
            if (!std::isfinite(v)) throw InputError("dataset input is not finite");
        checksum = compute_checksum();
    }
};

inline constexpr std::uint32_t kIdxImagesMagic = 0x00000803;
inline constexpr std::uint32_t kIdxLabelsMagic = 0x00000801;

namespace detail {

inline std::vector<unsigned char> read_file(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw InputError("cannot open " + path.string());
    return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

inline std::uint32_t read_be32(const std::vector<unsigned char>& buf, std::size_t offset,
                               const std::string& file) {
    if (buf.size() < offset + 4)
        throw ParseError(file + ": truncated header", buf.size());
    return (std::uint32_t{buf[offset]} << 24) | (std::uint32_t{buf[offset + 1]} << 16) |
           (std::uint32_t{buf[offset + 2]} << 8) | std::uint32_t{buf[offset + 3]};
}

inline std::string magic_hex(std::uint32_t m) {
    static const char* digits = "0123456789abcdef";
    std::string s = "0x";
    for (int shift = 28; shift >= 0; shift -= 4) s += digits[(m >> shift) & 0xF];
    return s;
}

}  // namespace detail

/// Loads an IDX image/label pair (MNIST layout). Pixels are scaled by 1/255.
inline Dataset load_idx(const std::filesystem::path& images_path,
                        const std::filesystem::path& labels_path) {
    const auto img = detail::read_file(images_path);
    const auto lab = detail::read_file(labels_path);
    const std::string img_name = images_path.filename().string();
    const std::string lab_name = labels_path.filename().string();

    const auto img_magic = detail::read_be32(img, 0, img_name);
    if (img_magic == kIdxLabelsMagic)
        throw ParseError(img_name + ": label magic " + detail::magic_hex(img_magic) +
                             " in images file (files swapped?)",
                         0);
    if (img_magic != kIdxImagesMagic)
        throw ParseError(img_name + ": bad images magic " + detail::magic_hex(img_magic), 0);

    const auto lab_magic = detail::read_be32(lab, 0, lab_name);
    if (lab_magic == kIdxImagesMagic)
        throw ParseError(lab_name + ": image magic " + detail::magic_hex(lab_magic) +
                             " in labels file (files swapped?)",
                         0);
    if (lab_magic != kIdxLabelsMagic)
        throw ParseError(lab_name + ": bad labels magic " + detail::magic_hex(lab_magic), 0);

    const std::uint64_t count = detail::read_be32(img, 4, img_name);
    const std::uint64_t rows = detail::read_be32(img, 8, img_name);
    const std::uint64_t cols = detail::read_be32(img, 12, img_name);
    const std::uint64_t label_count = detail::read_be32(lab, 4, lab_name);
    if (label_count != count)
        throw ParseError(lab_name + ": label count " + std::to_string(label_count) +
                             " does not match image count " + std::to_string(count),
                         4);

    const std::uint64_t pixels = rows * cols;
    const std::uint64_t img_end = 16 + count * pixels;
    if (img.size() < img_end)
        throw ParseError(img_name + ": truncated image payload, expected " +
                             std::to_string(img_end) + " bytes",
                         img.size());
    const std::uint64_t lab_end = 8 + count;
    if (lab.size() < lab_end)
        throw ParseError(lab_name + ": truncated label payload, expected " +
                             std::to_string(lab_end) + " bytes",
                         lab.size());

    Dataset ds;
    ds.name = img_name;
    ds.count = count;
    ds.input_dim = pixels;
    ds.inputs.resize(count * pixels);
    for (std::uint64_t j = 0; j < count * pixels; ++j) ds.inputs[j] = img[16 + j] / 255.0;
    ds.labels.resize(count);
    std::uint32_t max_label = 0;
    for (std::uint64_t i = 0; i < count; ++i) {
        ds.labels[i] = lab[8 + i];
        max_label = std::max(max_label, ds.labels[i]);
    }
    ds.num_classes = max_label + 1;
    ds.seal();
    return ds;
}

/// Seeded sample without replacement, kept in the source's canonical order.
/// Balanced mode draws count / num_classes samples from every class.
inline Dataset subset(const Dataset& ds, std::size_t count, std::uint64_t seed, bool balanced) {
    if (count == 0 || count > ds.count)
        throw InputError("subset: count must be in [1, " + std::to_string(ds.count) + "]");
    std::vector<std::size_t> chosen;
    chosen.reserve(count);

    auto draw = [&](std::vector<std::size_t> pool, std::size_t take, std::uint64_t stream) {
        CounterRng rng(seed, Stream::subset, stream);
        for (std::size_t i = 0; i < take; ++i) {
            const auto j = i + rng.below(pool.size() - i);
            std::swap(pool[i], pool[j]);
            chosen.push_back(pool[i]);
        }
    };

    if (balanced) {
        if (count % ds.num_classes != 0)
            throw InputError("subset: balanced count must be divisible by the class count " +
                             std::to_string(ds.num_classes));
        const std::size_t per_class = count / ds.num_classes;
        for (std::uint32_t c = 0; c < ds.num_classes; ++c) {
            std::vector<std::size_t> pool;
            for (std::size_t i = 0; i < ds.count; ++i)
                if (ds.labels[i] == c) pool.push_back(i);
            if (pool.size() < per_class)
                throw InputError("subset: class " + std::to_string(c) + " has only " +
                                 std::to_string(pool.size()) + " samples");
            draw(std::move(pool), per_class, c);
        }
    } else {
        std::vector<std::size_t> pool(ds.count);
        std::iota(pool.begin(), pool.end(), std::size_t{0});
        draw(std::move(pool), count, 0);
    }
    std::sort(chosen.begin(), chosen.end());

    Dataset out;
    out.name = ds.name + "[" + std::to_string(count) + (balanced ? ",balanced" : "") + "]";
    out.count = count;
    out.input_dim = ds.input_dim;
    out.num_classes = ds.num_classes;
    out.inputs.reserve(count * ds.input_dim);
    for (auto i : chosen) {
        const auto row = ds.input(i);
        out.inputs.insert(out.inputs.end(), row.begin(), row.end());
        out.labels.push_back(ds.labels[i]);
    }
    out.seal();
    return out;
}

/// Gaussian clusters (unit variance) whose means are pairwise `separation` apart.
/// Samples are interleaved by class (label of sample i is i mod classes) and the
/// whole set is mapped into [0,1] by one global affine rescale.
inline Dataset make_blobs(std::size_t n_per_class, std::uint32_t classes, std::size_t d_in,
                          double separation, std::uint64_t seed) {
    if (n_per_class == 0 || classes == 0 || d_in == 0 || !(separation > 0.0))
        throw InputError("make_blobs: all arguments must be positive");
    CounterRng rng(seed, Stream::blobs);
    const double radius = separation / std::sqrt(2.0);
    std::vector<double> means(std::size_t{classes} * d_in, 0.0);
    if (d_in >= classes) {
        for (std::uint32_t c = 0; c < classes; ++c) means[c * d_in + c] = radius;
    } else {
        // Not enough axes for a simplex: random directions on the sphere of that radius.
        for (std::uint32_t c = 0; c < classes; ++c) {
            double nrm = 0.0;
            for (std::size_t j = 0; j < d_in; ++j) {
                means[c * d_in + j] = rng.normal();
                nrm += means[c * d_in + j] * means[c * d_in + j];
            }
            nrm = std::sqrt(nrm);
            for (std::size_t j = 0; j < d_in; ++j) means[c * d_in + j] *= radius / nrm;
        }
    }

    Dataset ds;
    ds.name = "blobs";
    ds.count = n_per_class * classes;
    ds.input_dim = d_in;
    ds.num_classes = classes;
    ds.inputs.resize(ds.count * d_in);
    ds.labels.resize(ds.count);
    for (std::size_t i = 0; i < ds.count; ++i) {
        const auto c = static_cast<std::uint32_t>(i % classes);
        ds.labels[i] = c;
        for (std::size_t j = 0; j < d_in; ++j)
            ds.inputs[i * d_in + j] = means[c * d_in + j] + rng.normal();
    }
    const auto [lo, hi] = std::minmax_element(ds.inputs.begin(), ds.inputs.end());
    const double lo_v = *lo, span = *hi - *lo;
    for (double& v : ds.inputs) v = span > 0.0 ? (v - lo_v) / span : 0.5;
    ds.seal();
    return ds;
}

}  // namespace starpath
