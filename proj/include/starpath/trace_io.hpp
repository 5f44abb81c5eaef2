#pragma once

#include <bit>
#include <cstdint>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <iterator>
#include <string>
#include <vector>

#include "starpath/error.hpp"
#include "starpath/sgdrun.hpp"

namespace starpath {

inline constexpr char kTraceMagic[4] = {'S', 'P', 'T', 'H'};
inline constexpr std::uint32_t kTraceVersion = 1;

namespace detail {

class ByteWriter {
public:
    explicit ByteWriter(std::ostream& out) : out_(out) {}

    void raw(const void* p, std::size_t len) { out_.write(static_cast<const char*>(p), static_cast<std::streamsize>(len)); }
    void u8(std::uint8_t v) { raw(&v, 1); }
    void u32(std::uint32_t v) {
        unsigned char b[4];
        for (int i = 0; i < 4; ++i) b[i] = static_cast<unsigned char>(v >> (8 * i));
        raw(b, 4);
    }
    void u64(std::uint64_t v) {
        unsigned char b[8];
        for (int i = 0; i < 8; ++i) b[i] = static_cast<unsigned char>(v >> (8 * i));
        raw(b, 8);
    }
    void f64(double v) { u64(std::bit_cast<std::uint64_t>(v)); }
    void vec(const ParamVector& x) {
        for (double v : x) f64(v);
    }

private:
    std::ostream& out_;
};

class ByteReader {
public:
    explicit ByteReader(std::vector<unsigned char> buf) : buf_(std::move(buf)) {}

    std::uint64_t offset() const { return pos_; }

    void need(std::size_t len, const char* what) {
        if (buf_.size() - pos_ < len)
            throw ParseError(std::string("trace truncated while reading ") + what, buf_.size());
    }
    std::uint8_t u8(const char* what) {
        need(1, what);
        return buf_[pos_++];
    }
    std::uint32_t u32(const char* what) {
        need(4, what);
        std::uint32_t v = 0;
        for (int i = 0; i < 4; ++i) v |= std::uint32_t{buf_[pos_ + i]} << (8 * i);
        pos_ += 4;
        return v;
    }
    std::uint64_t u64(const char* what) {
        need(8, what);
        std::uint64_t v = 0;
        for (int i = 0; i < 8; ++i) v |= std::uint64_t{buf_[pos_ + i]} << (8 * i);
        pos_ += 8;
        return v;
    }
    double f64(const char* what) { return std::bit_cast<double>(u64(what)); }
    ParamVector vec(std::uint64_t d, const char* what) {
        need_records(d, 8, what);
        ParamVector x(d);
        for (std::uint64_t j = 0; j < d; ++j) x[j] = f64(what);
        return x;
    }
    std::string str(std::uint32_t len, const char* what) {
        need(len, what);
        std::string s(reinterpret_cast<const char*>(buf_.data() + pos_), len);
        pos_ += len;
        return s;
    }
    bool at_end() const { return pos_ == buf_.size(); }

    /// Throws unless `count` records of `record_size` bytes fit in what is left.
    void need_records(std::uint64_t count, std::uint64_t record_size, const char* what) {
        if (record_size != 0 && count > (buf_.size() - pos_) / record_size)
            throw ParseError(std::string("trace truncated while reading ") + what, buf_.size());
    }

private:
    std::vector<unsigned char> buf_;
    std::size_t pos_ = 0;
};

}  // namespace detail

/// Binary trace layout, all integers little-endian:
///
///   "SPTH"  u32 version(=1)  u64 n  u64 d
///   config: u64 fingerprint  f64 eta  u64 epochs  u64 seed
///           u64 boundary_every  u8 record_full  u64 detail_every
///           u32 reference_kind  u64 reference_epoch
///   u64 checkpoint_count, then per checkpoint: u64 k, d x f64
///   u64 step_count, then per step: u64 k, u32 xi, f64 loss
///   u64 final_k, d x f64 final iterate, u32 status, u32 len, diagnostic bytes
inline void write_trace(const Trace& t, std::ostream& out) {
    detail::ByteWriter w(out);
    w.raw(kTraceMagic, 4);
    w.u32(kTraceVersion);
    w.u64(t.n);
    w.u64(t.d);
    w.u64(t.fingerprint);
    w.f64(t.config.eta);
    w.u64(t.config.epochs);
    w.u64(t.config.seed);
    w.u64(t.config.record.boundary_every);
    w.u8(t.config.record.full ? 1 : 0);
    w.u64(t.config.record.detail_every);
    w.u32(static_cast<std::uint32_t>(t.config.reference.kind));
    w.u64(t.config.reference.epoch);
    w.u64(t.checkpoints.size());
    for (const auto& [k, x] : t.checkpoints) {
        if (x.dim() != t.d) throw InputError("write_trace: checkpoint dimension mismatch");
        w.u64(k);
        w.vec(x);
    }
    w.u64(t.steps.size());
    for (const auto& s : t.steps) {
        w.u64(s.k);
        w.u32(s.xi);
        w.f64(s.loss);
    }
    if (t.final_iterate.dim() != t.d) throw InputError("write_trace: final iterate dimension mismatch");
    w.u64(t.final_k);
    w.vec(t.final_iterate);
    w.u32(static_cast<std::uint32_t>(t.status));
    w.u32(static_cast<std::uint32_t>(t.diagnostic.size()));
    w.raw(t.diagnostic.data(), t.diagnostic.size());
}

inline void save_trace(const Trace& t, const std::filesystem::path& path) {
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw InputError("cannot write trace to " + path.string());
    write_trace(t, out);
    out.flush();
    if (!out) throw InputError("failed writing trace to " + path.string());
}

inline Trace parse_trace(std::vector<unsigned char> bytes) {
    detail::ByteReader r(std::move(bytes));
    r.need(4, "magic");
    char magic[4];
    for (char& c : magic) c = static_cast<char>(r.u8("magic"));
    if (std::memcmp(magic, kTraceMagic, 4) != 0) throw ParseError("not a trace file (bad magic)", 0);
    const std::uint64_t version_at = r.offset();
    const std::uint32_t version = r.u32("version");
    if (version != kTraceVersion) throw UnsupportedVersionError(version, version_at);

    Trace t;
    t.n = r.u64("n");
    t.d = r.u64("d");
    t.fingerprint = r.u64("fingerprint");
    t.config.eta = r.f64("eta");
    t.config.epochs = r.u64("epochs");
    t.config.seed = r.u64("seed");
    t.config.record.boundary_every = r.u64("record policy");
    t.config.record.full = r.u8("record policy") != 0;
    t.config.record.detail_every = r.u64("record policy");
    const std::uint64_t kind_at = r.offset();
    const std::uint32_t kind = r.u32("reference kind");
    if (kind > 2) throw ParseError("unknown reference kind " + std::to_string(kind), kind_at);
    t.config.reference.kind = static_cast<ReferenceMode::Kind>(kind);
    t.config.reference.epoch = r.u64("reference epoch");

    const std::uint64_t cp_count = r.u64("checkpoint count");
    r.need_records(cp_count, 8 + 8 * t.d, "checkpoints");
    for (std::uint64_t c = 0; c < cp_count; ++c) {
        const std::uint64_t at = r.offset();
        const std::uint64_t k = r.u64("checkpoint k");
        if (!t.checkpoints.empty() && k <= t.checkpoints.rbegin()->first)
            throw ParseError("checkpoint keys not strictly increasing", at);
        t.checkpoints.emplace_hint(t.checkpoints.end(), k, r.vec(t.d, "checkpoint"));
    }
    const std::uint64_t step_count = r.u64("step count");
    r.need_records(step_count, 20, "per-iteration table");
    t.steps.reserve(step_count);
    for (std::uint64_t s = 0; s < step_count; ++s) {
        const std::uint64_t at = r.offset();
        StepRecord rec;
        rec.k = r.u64("step k");
        rec.xi = r.u32("step xi");
        rec.loss = r.f64("step loss");
        if (!t.steps.empty() && rec.k <= t.steps.back().k)
            throw ParseError("per-iteration k not strictly increasing", at);
        t.steps.push_back(rec);
    }
    t.final_k = r.u64("final k");
    t.final_iterate = r.vec(t.d, "final iterate");
    const std::uint64_t status_at = r.offset();
    const std::uint32_t status = r.u32("status");
    if (status > 1) throw ParseError("unknown run status " + std::to_string(status), status_at);
    t.status = static_cast<RunStatus>(status);
    const std::uint32_t len = r.u32("diagnostic length");
    t.diagnostic = r.str(len, "diagnostic");
    if (!r.at_end()) throw ParseError("trailing bytes after trace", r.offset());
    return t;
}

inline Trace load_trace(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw InputError("cannot open trace " + path.string());
    return parse_trace({std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()});
}

}  // namespace starpath
