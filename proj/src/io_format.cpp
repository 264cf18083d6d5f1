#include "dan/io_format.hpp"

#include "dan/error.hpp"

#include <bit>
#include <cmath>
#include <cstring>
#include <fstream>
#include <limits>
#include <string>

namespace dan {

namespace {

static_assert(std::numeric_limits<float>::is_iec559 && std::numeric_limits<double>::is_iec559);

constexpr char kDanfMagic[4] = {'D', 'A', 'N', 'F'};
constexpr char kDansMagic[4] = {'D', 'A', 'N', 'S'};

class Writer {
public:
    explicit Writer(std::size_t reserve) { bytes_.reserve(reserve); }

    void magic(const char (&m)[4]) {
        for (char c : m) bytes_.push_back(static_cast<std::byte>(c));
    }
    template <typename U>
    void uint(U value) {
        for (std::size_t k = 0; k < sizeof(U); ++k) bytes_.push_back(static_cast<std::byte>((value >> (8 * k)) & 0xFFu));
    }
    void u8(std::uint8_t v) { uint(v); }
    void u16(std::uint16_t v) { uint(v); }
    void u32(std::uint32_t v) { uint(v); }
    void u64(std::uint64_t v) { uint(v); }
    void i32(std::int32_t v) { u32(static_cast<std::uint32_t>(v)); }
    void f32(float v) { u32(std::bit_cast<std::uint32_t>(v)); }
    void f64(double v) { u64(std::bit_cast<std::uint64_t>(v)); }

    std::vector<std::byte> take() { return std::move(bytes_); }

private:
    std::vector<std::byte> bytes_;
};

class Reader {
public:
    explicit Reader(std::span<const std::byte> bytes) : bytes_(bytes) {}

    std::size_t offset() const { return pos_; }

    bool magic(const char (&m)[4]) {
        const bool ok = std::memcmp(bytes_.data() + pos_, m, 4) == 0;
        pos_ += 4;
        return ok;
    }
    template <typename U>
    U uint() {
        U value = 0;
        for (std::size_t k = 0; k < sizeof(U); ++k)
            value |= static_cast<U>(static_cast<U>(std::to_integer<std::uint8_t>(bytes_[pos_ + k])) << (8 * k));
        pos_ += sizeof(U);
        return value;
    }
    std::uint8_t u8() { return uint<std::uint8_t>(); }
    std::uint16_t u16() { return uint<std::uint16_t>(); }
    std::uint32_t u32() { return uint<std::uint32_t>(); }
    std::uint64_t u64() { return uint<std::uint64_t>(); }
    std::int32_t i32() { return static_cast<std::int32_t>(u32()); }
    float f32() { return std::bit_cast<float>(u32()); }
    double f64() { return std::bit_cast<double>(u64()); }

private:
    std::span<const std::byte> bytes_;
    std::size_t pos_ = 0;
};

std::uint64_t checked_mul(std::uint64_t a, std::uint64_t b) {
    if (a != 0 && b > std::numeric_limits<std::uint64_t>::max() / a)
        throw Error(ErrorCode::CorruptFile, "declared shape overflows a 64-bit size");
    return a * b;
}

std::uint64_t checked_add(std::uint64_t a, std::uint64_t b) {
    if (b > std::numeric_limits<std::uint64_t>::max() - a)
        throw Error(ErrorCode::CorruptFile, "declared shape overflows a 64-bit size");
    return a + b;
}

std::uint32_t narrow_u32(std::size_t value, const char* what) {
    if (value > std::numeric_limits<std::uint32_t>::max())
        throw Error(ErrorCode::InvalidConfig, std::string(what) + " does not fit in 32 bits");
    return static_cast<std::uint32_t>(value);
}

void check_magic_and_version(Reader& in, std::span<const std::byte> bytes, const char (&magic)[4], const char* kind,
                             std::uint64_t header_bytes) {
    if (bytes.size() < 4)
        throw Error(ErrorCode::TruncatedFile, std::string(kind) + " file ends at byte " + std::to_string(bytes.size()) +
                                                  " before the magic");
    if (!in.magic(magic)) throw Error(ErrorCode::BadMagic, std::string("not a ") + kind + " file");
    if (bytes.size() < header_bytes)
        throw Error(ErrorCode::TruncatedFile, std::string(kind) + " header truncated at byte " +
                                                  std::to_string(bytes.size()) + " of " +
                                                  std::to_string(header_bytes));
    const auto version = in.u32();
    if (version != kFormatVersion)
        throw Error(ErrorCode::UnsupportedVersion, std::string(kind) + " version " + std::to_string(version));
}

void check_size(std::span<const std::byte> bytes, std::uint64_t expected, std::uint64_t header_bytes,
                std::uint64_t record_bytes, const char* kind, const char* record_name) {
    const std::uint64_t actual = bytes.size();
    if (actual < expected) {
        const auto record = record_bytes == 0 ? 0 : (actual - header_bytes) / record_bytes;
        throw Error(ErrorCode::TruncatedFile, std::string(kind) + " file truncated at byte offset " +
                                                  std::to_string(actual) + " inside " + record_name + " " +
                                                  std::to_string(record) + "; expected " + std::to_string(expected) +
                                                  " bytes");
    }
    if (actual > expected)
        throw Error(ErrorCode::SizeMismatch, std::string(kind) + " file has " + std::to_string(actual) +
                                                 " bytes; header implies " + std::to_string(expected));
}

}  // namespace

std::uint64_t danf_file_size(std::uint64_t n_samples, std::uint64_t n_layers, std::uint64_t dim) {
    const auto record = checked_add(8, checked_mul(4, checked_mul(n_layers, dim)));
    return checked_add(kDanfHeaderBytes, checked_mul(n_samples, record));
}

std::uint64_t dans_file_size(std::uint64_t n_layers, std::uint64_t dim, std::uint64_t n_classes) {
    const auto floats = checked_add(checked_mul(n_classes, dim), checked_mul(dim, dim));
    const auto layer = checked_add(checked_mul(4, floats), 16);
    return checked_add(kDansHeaderBytes, checked_mul(n_layers, layer));
}

std::vector<std::byte> encode_danf(const FeatureBank& bank) {
    bank.validate();
    const auto n = bank.n_samples();
    Writer out(danf_file_size(n, bank.n_layers, bank.dim));
    out.magic(kDanfMagic);
    out.u32(kFormatVersion);
    out.u32(narrow_u32(bank.n_layers, "L"));
    out.u32(narrow_u32(bank.dim, "d"));
    out.u64(n);
    out.u32(narrow_u32(bank.n_classes, "C"));
    const auto width = bank.features.cols();
    for (std::size_t s = 0; s < n; ++s) {
        out.i32(bank.true_labels[s]);
        out.i32(bank.predicted_labels[s]);
        const auto row = static_cast<Eigen::Index>(s);
        for (Eigen::Index k = 0; k < width; ++k) out.f32(bank.features(row, k));
    }
    return out.take();
}

FeatureBank decode_danf(std::span<const std::byte> bytes) {
    Reader in(bytes);
    check_magic_and_version(in, bytes, kDanfMagic, "DANF", kDanfHeaderBytes);
    const std::uint64_t n_layers = in.u32();
    const std::uint64_t dim = in.u32();
    const std::uint64_t n = in.u64();
    const std::uint64_t n_classes = in.u32();
    if (n_layers < 1 || dim < 1 || n_classes < 2)
        throw Error(ErrorCode::CorruptFile, "DANF header declares L=" + std::to_string(n_layers) + ", d=" +
                                                std::to_string(dim) + ", C=" + std::to_string(n_classes));
    const auto record_bytes = checked_add(8, checked_mul(4, checked_mul(n_layers, dim)));
    check_size(bytes, danf_file_size(n, n_layers, dim), kDanfHeaderBytes, record_bytes, "DANF", "record");

    FeatureBank bank(n_layers, dim, n_classes, n);
    const auto width = bank.features.cols();
    for (std::size_t s = 0; s < n; ++s) {
        bank.true_labels[s] = in.i32();
        bank.predicted_labels[s] = in.i32();
        const auto row = static_cast<Eigen::Index>(s);
        for (Eigen::Index k = 0; k < width; ++k) bank.features(row, k) = in.f32();
    }
    bank.validate();
    return bank;
}

std::vector<std::byte> encode_dans(const DetectorModel& model) {
    model.validate();
    const auto n_layers = model.n_layers();
    const auto d = model.dim();
    const auto c = model.n_classes();
    Writer out(dans_file_size(n_layers, d, c));
    out.magic(kDansMagic);
    out.u32(kFormatVersion);
    out.u32(narrow_u32(n_layers, "L"));
    out.u32(narrow_u32(d, "d"));
    out.u32(narrow_u32(c, "C"));
    out.u8(static_cast<std::uint8_t>(model.aggregation));
    out.u8(model.normalization_enabled ? 1 : 0);
    out.u16(0);
    out.f64(model.ridge.kind == Ridge::Kind::Absolute ? model.ridge.value : -model.ridge.value);
    out.f64(model.threshold.value_or(std::numeric_limits<double>::quiet_NaN()));
    out.i32(model.target_label.value_or(kUnknownLabel));
    out.f64(model.split_fraction);
    out.u64(model.split_seed);
    for (const auto& layer : model.layers) {
        for (Eigen::Index j = 0; j < layer.centroids.rows(); ++j)
            for (Eigen::Index k = 0; k < layer.centroids.cols(); ++k) out.f32(static_cast<float>(layer.centroids(j, k)));
        for (Eigen::Index r = 0; r < layer.cov_factor.rows(); ++r)
            for (Eigen::Index k = 0; k < layer.cov_factor.cols(); ++k)
                out.f32(k > r ? 0.0f : static_cast<float>(layer.cov_factor(r, k)));
        out.f64(layer.norm_mean);
        out.f64(layer.norm_std);
    }
    return out.take();
}

DetectorModel decode_dans(std::span<const std::byte> bytes) {
    Reader in(bytes);
    check_magic_and_version(in, bytes, kDansMagic, "DANS", kDansHeaderBytes);
    const std::uint64_t n_layers = in.u32();
    const std::uint64_t d = in.u32();
    const std::uint64_t c = in.u32();
    const auto aggregation = in.u8();
    const auto normalization = in.u8();
    const auto reserved = in.u16();
    if (reserved != 0)
        throw Error(ErrorCode::UnsupportedVersion, "DANS reserved field is " + std::to_string(reserved));
    if (n_layers < 1 || d < 1 || c < 2)
        throw Error(ErrorCode::CorruptFile, "DANS header declares L=" + std::to_string(n_layers) + ", d=" +
                                                std::to_string(d) + ", C=" + std::to_string(c));
    if (aggregation > 1) throw Error(ErrorCode::CorruptFile, "unknown aggregation code " + std::to_string(aggregation));
    if (normalization > 1)
        throw Error(ErrorCode::CorruptFile, "normalization flag is " + std::to_string(normalization));
    const auto layer_bytes = dans_file_size(1, d, c) - kDansHeaderBytes;
    check_size(bytes, dans_file_size(n_layers, d, c), kDansHeaderBytes, layer_bytes, "DANS", "layer");

    DetectorModel model;
    model.aggregation = static_cast<Aggregation>(aggregation);
    model.normalization_enabled = normalization == 1;
    const double ridge = in.f64();
    if (!std::isfinite(ridge)) throw Error(ErrorCode::CorruptFile, "ridge is not finite");
    model.ridge = std::signbit(ridge) ? Ridge::relative(-ridge) : Ridge::absolute(ridge);
    const double threshold = in.f64();
    if (std::isinf(threshold)) throw Error(ErrorCode::CorruptFile, "threshold is infinite");
    if (!std::isnan(threshold)) model.threshold = threshold;
    const auto target = in.i32();
    if (target != kUnknownLabel) {
        if (target < 0 || static_cast<std::uint64_t>(target) >= c)
            throw Error(ErrorCode::CorruptFile, "target label " + std::to_string(target) + " out of range");
        model.target_label = target;
    }
    model.split_fraction = in.f64();
    model.split_seed = in.u64();

    const auto di = static_cast<Eigen::Index>(d);
    const auto ci = static_cast<Eigen::Index>(c);
    model.layers.resize(n_layers);
    for (std::size_t i = 0; i < n_layers; ++i) {
        auto& layer = model.layers[i];
        layer.layer_index = i + 1;
        layer.centroids.resize(ci, di);
        layer.cov_factor.resize(di, di);
        for (Eigen::Index j = 0; j < ci; ++j)
            for (Eigen::Index k = 0; k < di; ++k) layer.centroids(j, k) = in.f32();
        for (Eigen::Index r = 0; r < di; ++r)
            for (Eigen::Index k = 0; k < di; ++k) {
                const auto offset = in.offset();
                layer.cov_factor(r, k) = in.f32();
                if (k > r && layer.cov_factor(r, k) != 0.0)
                    throw Error(ErrorCode::CorruptFile, "layer " + std::to_string(i + 1) +
                                                            " factor has a non-zero upper entry at byte " +
                                                            std::to_string(offset));
            }
        layer.norm_mean = in.f64();
        layer.norm_std = in.f64();
        if (model.ridge.kind == Ridge::Kind::Absolute) {
            layer.ridge = model.ridge.value;
        } else {
            // trace(LLᵀ) = trace(Σ̂)(1 + f) when ε = f·trace(Σ̂)/d
            const double f = model.ridge.value;
            layer.ridge = f * layer.cov_factor.squaredNorm() / (static_cast<double>(d) * (1.0 + f));
        }
    }
    model.validate();
    return model;
}

std::vector<std::byte> read_file_bytes(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw Error(ErrorCode::Io, "cannot open " + path.string());
    in.seekg(0, std::ios::end);
    const auto size = in.tellg();
    if (size < 0) throw Error(ErrorCode::Io, "cannot size " + path.string());
    in.seekg(0, std::ios::beg);
    std::vector<std::byte> bytes(static_cast<std::size_t>(size));
    if (!bytes.empty() && !in.read(reinterpret_cast<char*>(bytes.data()), size))
        throw Error(ErrorCode::Io, "cannot read " + path.string());
    return bytes;
}

void write_file_bytes(std::span<const std::byte> bytes, const std::filesystem::path& path) {
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw Error(ErrorCode::Io, "cannot create " + path.string());
    out.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
    if (!out) throw Error(ErrorCode::Io, "cannot write " + path.string());
}

FeatureBank read_danf(const std::filesystem::path& path) { return decode_danf(read_file_bytes(path)); }

void write_danf(const FeatureBank& bank, const std::filesystem::path& path) {
    write_file_bytes(encode_danf(bank), path);
}

DetectorModel read_dans(const std::filesystem::path& path) { return decode_dans(read_file_bytes(path)); }

void write_dans(const DetectorModel& model, const std::filesystem::path& path) {
    write_file_bytes(encode_dans(model), path);
}

}  // namespace dan
