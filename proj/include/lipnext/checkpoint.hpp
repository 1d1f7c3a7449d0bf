#pragma once

#include <cstdint>
#include <cstring>
#include <fstream>
#include <istream>
#include <ostream>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

#include "model.hpp"
#include "orthogonal.hpp"

namespace lipnext {

namespace detail {

// All multi-byte values little-endian, written explicitly so the format does
// not depend on host endianness.
inline void put_u32(std::ostream& os, std::uint32_t v) {
    char b[4] = {char(v & 0xff), char((v >> 8) & 0xff), char((v >> 16) & 0xff),
                 char((v >> 24) & 0xff)};
    os.write(b, 4);
}

inline void put_u64(std::ostream& os, std::uint64_t v) {
    char b[8];
    for (int i = 0; i < 8; ++i) b[i] = char((v >> (8 * i)) & 0xff);
    os.write(b, 8);
}

inline void put_f64(std::ostream& os, double d) {
    std::uint64_t v;
    std::memcpy(&v, &d, 8);
    put_u64(os, v);
}

inline std::uint32_t get_u32(std::istream& is) {
    unsigned char b[4];
    if (!is.read(reinterpret_cast<char*>(b), 4))
        throw std::runtime_error("checkpoint: unexpected end of file");
    return std::uint32_t(b[0]) | (std::uint32_t(b[1]) << 8) | (std::uint32_t(b[2]) << 16) |
           (std::uint32_t(b[3]) << 24);
}

inline std::uint64_t get_u64(std::istream& is) {
    unsigned char b[8];
    if (!is.read(reinterpret_cast<char*>(b), 8))
        throw std::runtime_error("checkpoint: unexpected end of file");
    std::uint64_t v = 0;
    for (int i = 0; i < 8; ++i) v |= std::uint64_t(b[i]) << (8 * i);
    return v;
}

inline double get_f64(std::istream& is) {
    const std::uint64_t v = get_u64(is);
    double d;
    std::memcpy(&d, &v, 8);
    return d;
}

// Named tensor record: u32 name length, name bytes, u8 dtype (0 = f64),
// u8 rank, u64 dims, then the payload.
inline void put_record(std::ostream& os, const std::string& name, const double* data,
                       std::vector<std::uint64_t> dims) {
    put_u32(os, static_cast<std::uint32_t>(name.size()));
    os.write(name.data(), static_cast<std::streamsize>(name.size()));
    os.put(0);  // dtype f64
    os.put(static_cast<char>(dims.size()));
    std::uint64_t total = 1;
    for (auto d : dims) {
        put_u64(os, d);
        total *= d;
    }
    for (std::uint64_t i = 0; i < total; ++i) put_f64(os, data[i]);
}

inline void put_record(std::ostream& os, const std::string& name, const Matrix& m) {
    put_record(os, name, m.data(), {m.rows(), m.cols()});
}

inline void put_record(std::ostream& os, const std::string& name, const std::vector<double>& v) {
    put_record(os, name, v.data(), {v.size()});
}

struct RawRecord {
    std::string name;
    std::vector<std::uint64_t> dims;
    std::vector<double> data;
};

inline RawRecord get_record(std::istream& is) {
    RawRecord r;
    const std::uint32_t len = get_u32(is);
    r.name.resize(len);
    if (!is.read(r.name.data(), len)) throw std::runtime_error("checkpoint: truncated name");
    const int dtype = is.get();
    if (dtype != 0)
        throw std::runtime_error("checkpoint: unsupported dtype tag " + std::to_string(dtype) +
                                 " for '" + r.name + "'");
    const int rank = is.get();
    if (rank < 0) throw std::runtime_error("checkpoint: truncated record header");
    std::uint64_t total = 1;
    for (int i = 0; i < rank; ++i) {
        r.dims.push_back(get_u64(is));
        total *= r.dims.back();
    }
    r.data.resize(total);
    for (auto& d : r.data) d = get_f64(is);
    return r;
}

inline RawRecord expect_record(std::istream& is, const std::string& name,
                               std::vector<std::uint64_t> dims) {
    RawRecord r = get_record(is);
    if (r.name != name)
        throw std::runtime_error("checkpoint: expected tensor '" + name + "', found '" + r.name +
                                 "'");
    if (r.dims != dims)
        throw std::runtime_error("checkpoint: tensor '" + name + "' has unexpected shape");
    return r;
}

inline Matrix record_to_matrix(const RawRecord& r) {
    Matrix m(r.dims[0], r.dims[1]);
    std::copy(r.data.begin(), r.data.end(), m.data());
    return m;
}

inline void put_adam(std::ostream& os, const std::string& prefix, const AdamState& st) {
    put_record(os, prefix + ".m", st.m);
    put_record(os, prefix + ".v", st.v);
    put_record(os, prefix + ".t", std::vector<double>{static_cast<double>(st.t)});
}

inline AdamState get_adam(std::istream& is, const std::string& prefix, std::uint64_t n) {
    AdamState st(n);
    st.m = expect_record(is, prefix + ".m", {n}).data;
    st.v = expect_record(is, prefix + ".v", {n}).data;
    st.t = static_cast<std::int64_t>(expect_record(is, prefix + ".t", {1}).data[0]);
    return st;
}

inline void put_manifold(std::ostream& os, const std::string& prefix,
                         const ManifoldAdamState& st) {
    put_record(os, prefix + ".m", st.m);
    put_record(os, prefix + ".v", st.v);
    put_record(os, prefix + ".buffer", st.buffer);
    put_record(os, prefix + ".x_slow", st.x_slow);
    put_record(os, prefix + ".t", std::vector<double>{static_cast<double>(st.t)});
}

inline ManifoldAdamState get_manifold(std::istream& is, const std::string& prefix,
                                      std::uint64_t d) {
    ManifoldAdamState st;
    st.m = record_to_matrix(expect_record(is, prefix + ".m", {d, d}));
    st.v = record_to_matrix(expect_record(is, prefix + ".v", {d, d}));
    st.buffer = record_to_matrix(expect_record(is, prefix + ".buffer", {d, d}));
    st.x_slow = record_to_matrix(expect_record(is, prefix + ".x_slow", {d, d}));
    st.t = static_cast<std::int64_t>(expect_record(is, prefix + ".t", {1}).data[0]);
    return st;
}

}  // namespace detail

inline constexpr std::uint32_t kCheckpointVersion = 1;

struct Checkpoint {
    LipNextModel model;
    std::uint64_t epoch = 0;
    bool has_optimizer = false;
    ModelOptimizerState optimizer;
};

inline void save_checkpoint(std::ostream& os, const LipNextModel& model, std::uint64_t epoch,
                            const ModelOptimizerState* opt = nullptr) {
    using namespace detail;
    os.write("LPNX", 4);
    put_u32(os, kCheckpointVersion);

    const ModelSpec& s = model.spec;
    put_u64(os, s.input_h);
    put_u64(os, s.input_w);
    put_u64(os, s.input_c);
    put_u64(os, s.patch);
    put_u64(os, s.channels);
    put_u64(os, s.depth);
    put_u64(os, s.num_classes);
    put_f64(os, s.shift.alpha);
    put_f64(os, s.activation.beta);
    os.put(s.shift.padding == ShiftPadding::zero ? 1 : 0);
    os.put(s.activation.kind == ActivationKind::minmax ? 1 : 0);
    os.put(s.use_pos ? 1 : 0);
    put_u64(os, epoch);

    put_u32(os, static_cast<std::uint32_t>(4 * s.depth + 2));
    for (std::size_t l = 0; l < s.depth; ++l) {
        const std::string p = "block" + std::to_string(l);
        put_record(os, p + ".R", model.blocks[l].r);
        put_record(os, p + ".M", model.blocks[l].m);
        put_record(os, p + ".b", model.blocks[l].b);
        put_record(os, p + ".pos", model.blocks[l].pos);
    }
    put_record(os, "head.V", model.head_v);
    put_record(os, "head.c", model.head_c);

    os.put(opt ? 1 : 0);
    if (opt) {
        for (std::size_t l = 0; l < s.depth; ++l) {
            const std::string p = "opt.block" + std::to_string(l);
            put_manifold(os, p + ".R", opt->r[l]);
            put_manifold(os, p + ".M", opt->m[l]);
            put_adam(os, p + ".b", opt->b[l]);
            put_adam(os, p + ".pos", opt->pos[l]);
        }
        put_adam(os, "opt.head.V", opt->head_v);
        put_adam(os, "opt.head.c", opt->head_c);
    }
}

inline void save_checkpoint(const std::string& path, const LipNextModel& model,
                            std::uint64_t epoch, const ModelOptimizerState* opt = nullptr) {
    std::ofstream f(path, std::ios::binary);
    if (!f) throw std::runtime_error("cannot open " + path + " for writing");
    save_checkpoint(f, model, epoch, opt);
    if (!f) throw std::runtime_error("write failed on " + path);
}

/// Load and validate. Orthogonal tensors are checked on the way in: drift
/// beyond 0.1 means the file does not hold orthogonal mixers at all; beyond
/// the loose runtime tolerance it is a stale or corrupt save. Both name the
/// offending tensor.
inline Checkpoint load_checkpoint(std::istream& is) {
    using namespace detail;
    char magic[4];
    if (!is.read(magic, 4) || std::string(magic, 4) != "LPNX")
        throw std::runtime_error("checkpoint: bad magic, not a model file");
    const std::uint32_t version = get_u32(is);
    if (version != kCheckpointVersion)
        throw std::runtime_error("checkpoint: unsupported version " + std::to_string(version));

    ModelSpec s;
    s.input_h = get_u64(is);
    s.input_w = get_u64(is);
    s.input_c = get_u64(is);
    s.patch = get_u64(is);
    s.channels = get_u64(is);
    s.depth = get_u64(is);
    s.num_classes = get_u64(is);
    s.shift.alpha = get_f64(is);
    s.activation.beta = get_f64(is);
    s.shift.padding = is.get() == 1 ? ShiftPadding::zero : ShiftPadding::circular;
    s.activation.kind = is.get() == 1 ? ActivationKind::minmax : ActivationKind::beta_abs;
    s.use_pos = is.get() == 1;

    Checkpoint ck;
    ck.model = LipNextModel(s);
    ck.epoch = get_u64(is);

    const std::uint32_t count = get_u32(is);
    if (count != 4 * s.depth + 2)
        throw std::runtime_error("checkpoint: tensor count " + std::to_string(count) +
                                 " does not match architecture");
    const std::uint64_t d = s.channels;
    const std::uint64_t hw = s.grid_h() * s.grid_w();
    for (std::size_t l = 0; l < s.depth; ++l) {
        const std::string p = "block" + std::to_string(l);
        ck.model.blocks[l].r = record_to_matrix(expect_record(is, p + ".R", {d, d}));
        ck.model.blocks[l].m = record_to_matrix(expect_record(is, p + ".M", {d, d}));
        ck.model.blocks[l].b = expect_record(is, p + ".b", {d}).data;
        ck.model.blocks[l].pos = expect_record(is, p + ".pos", {hw}).data;

        for (const char* which : {".R", ".M"}) {
            const Matrix& mat = which[1] == 'R' ? ck.model.blocks[l].r : ck.model.blocks[l].m;
            const double drift = orthogonality_drift(mat);
            if (drift > 0.1)
                throw std::runtime_error("checkpoint: tensor '" + p + which +
                                         "' is not orthogonal (drift " + std::to_string(drift) +
                                         "), file rejected");
            if (drift > kDriftTolLoose)
                throw std::runtime_error("checkpoint: tensor '" + p + which +
                                         "' has orthogonality drift " + std::to_string(drift) +
                                         " beyond tolerance " + std::to_string(kDriftTolLoose));
        }
    }
    ck.model.head_v =
        record_to_matrix(expect_record(is, "head.V", {s.num_classes, d}));
    ck.model.head_c = expect_record(is, "head.c", {s.num_classes}).data;

    const int has_opt = is.get();
    if (has_opt == 1) {
        ck.has_optimizer = true;
        for (std::size_t l = 0; l < s.depth; ++l) {
            const std::string p = "opt.block" + std::to_string(l);
            ck.optimizer.r.push_back(get_manifold(is, p + ".R", d));
            ck.optimizer.m.push_back(get_manifold(is, p + ".M", d));
            ck.optimizer.b.push_back(get_adam(is, p + ".b", d));
            ck.optimizer.pos.push_back(get_adam(is, p + ".pos", hw));
        }
        ck.optimizer.head_v = get_adam(is, "opt.head.V", s.num_classes * d);
        ck.optimizer.head_c = get_adam(is, "opt.head.c", s.num_classes);
    } else if (has_opt != 0) {
        throw std::runtime_error("checkpoint: truncated optimizer flag");
    }
    return ck;
}

inline Checkpoint load_checkpoint(const std::string& path) {
    std::ifstream f(path, std::ios::binary);
    if (!f) throw std::runtime_error("cannot open " + path);
    return load_checkpoint(f);
}

}  // namespace lipnext
