#pragma once

#include <bit>
#include <cmath>
#include <cstdint>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <iterator>
#include <sstream>
#include <string>
#include <string_view>
#include <vector>

#include "tpc/dataset.hpp"
#include "tpc/error.hpp"
#include "tpc/model.hpp"

namespace tpc {

static_assert(std::endian::native == std::endian::little, "binary formats assume a little-endian host");

namespace detail {

class ByteWriter {
public:
    template <typename T>
    void put(T v) {
        const auto* p = reinterpret_cast<const char*>(&v);
        bytes_.append(p, sizeof(T));
    }
    void put_raw(std::string_view s) { bytes_.append(s); }
    std::string take() { return std::move(bytes_); }

private:
    std::string bytes_;
};

class ByteReader {
public:
    ByteReader(std::string_view bytes, std::string what) : bytes_(bytes), what_(std::move(what)) {}

    template <typename T>
    T get(const char* field) {
        need(sizeof(T), field);
        T v;
        std::memcpy(&v, bytes_.data() + pos_, sizeof(T));
        pos_ += sizeof(T);
        return v;
    }

    std::string_view get_raw(std::size_t n, const char* field) {
        need(n, field);
        auto s = bytes_.substr(pos_, n);
        pos_ += n;
        return s;
    }

    std::size_t remaining() const noexcept { return bytes_.size() - pos_; }
    std::size_t offset() const noexcept { return pos_; }

    [[noreturn]] void bad(const std::string& msg) const {
        fail(Errc::format, what_ + ": " + msg + " (at byte " + std::to_string(pos_) + ")");
    }

private:
    void need(std::size_t n, const char* field) const {
        if (remaining() < n) fail(Errc::format, what_ + ": truncated while reading " + field);
    }

    std::string_view bytes_;
    std::size_t pos_ = 0;
    std::string what_;
};

inline std::string read_file(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    require(static_cast<bool>(in), Errc::io, "cannot open " + path.string());
    return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

inline void write_file(const std::filesystem::path& path, std::string_view bytes) {
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    require(static_cast<bool>(out), Errc::io, "cannot write " + path.string());
    out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
    require(static_cast<bool>(out), Errc::io, "short write to " + path.string());
}

inline double parse_double(std::string_view s, std::size_t row, std::size_t col) {
    // strtod needs a terminated buffer.
    const std::string tmp(s);
    char* end = nullptr;
    const double v = std::strtod(tmp.c_str(), &end);
    if (tmp.empty() || end != tmp.c_str() + tmp.size())
        fail(Errc::format, "row " + std::to_string(row) + ", column " + std::to_string(col) + ": not a number '" + tmp + "'");
    return v;
}

inline std::vector<std::string_view> split_commas(std::string_view line) {
    std::vector<std::string_view> out;
    std::size_t start = 0;
    for (;;) {
        const auto pos = line.find(',', start);
        out.push_back(line.substr(start, pos == std::string_view::npos ? std::string_view::npos : pos - start));
        if (pos == std::string_view::npos) break;
        start = pos + 1;
    }
    return out;
}

} // namespace detail

inline constexpr std::uint32_t kDatasetVersion = 1;
inline constexpr std::uint32_t kModelVersion = 1;
inline constexpr std::uint8_t kFlagMeanPooled = 0x1;

// ---------------------------------------------------------------------------
// CSV: header f0,...,f{D-1},label then one row per example. Rows in error
// messages are 1-based data rows (the header is not counted).

inline LabeledDataset parse_csv(std::string_view text, std::string source = "csv") {
    std::istringstream in{std::string(text)};
    std::string line;
    detail::require(static_cast<bool>(std::getline(in, line)), Errc::format, "missing CSV header");
    if (!line.empty() && line.back() == '\r') line.pop_back();
    const auto header = detail::split_commas(line);
    detail::require(header.size() >= 2 && header.back() == "label", Errc::format,
                    "malformed header: expected f0,...,f{D-1},label");
    const std::size_t dim = header.size() - 1;
    for (std::size_t d = 0; d < dim; ++d)
        detail::require(header[d] == "f" + std::to_string(d), Errc::format,
                        "malformed header: column " + std::to_string(d) + " should be f" + std::to_string(d));

    std::vector<double> values;
    std::vector<std::uint8_t> labels;
    std::size_t row = 0;
    while (std::getline(in, line)) {
        if (!line.empty() && line.back() == '\r') line.pop_back();
        if (line.empty()) continue;
        ++row;
        const auto cells = detail::split_commas(line);
        detail::require(cells.size() == dim + 1, Errc::format,
                        "row " + std::to_string(row) + ": expected " + std::to_string(dim + 1) + " columns, got " +
                            std::to_string(cells.size()));
        for (std::size_t d = 0; d < dim; ++d) {
            const double v = detail::parse_double(cells[d], row, d);
            detail::require(std::isfinite(v), Errc::format, "row " + std::to_string(row) + ": non-finite feature f" + std::to_string(d));
            values.push_back(v);
        }
        const auto& lab = cells[dim];
        detail::require(lab == "0" || lab == "1", Errc::format,
                        "row " + std::to_string(row) + ": label '" + std::string(lab) + "' is not 0 or 1");
        labels.push_back(lab == "1" ? 1 : 0);
    }
    detail::require(!labels.empty(), Errc::format, "empty dataset");

    LabeledDataset out;
    out.features = Matrix<double>(labels.size(), dim);
    out.features.data() = std::move(values);
    out.labels = std::move(labels);
    out.metadata.source = std::move(source);
    return out;
}

inline std::string format_csv(const LabeledDataset& data) {
    std::string out;
    for (std::size_t d = 0; d < data.dim(); ++d) out += "f" + std::to_string(d) + ",";
    out += "label\n";
    char buf[32];
    for (std::size_t i = 0; i < data.size(); ++i) {
        for (double v : data.features.row(i)) {
            std::snprintf(buf, sizeof buf, "%.17g,", v);
            out += buf;
        }
        out += data.labels[i] ? "1\n" : "0\n";
    }
    return out;
}

inline LabeledDataset load_csv(const std::filesystem::path& path) {
    return parse_csv(detail::read_file(path), path.filename().string());
}

inline void save_csv(const LabeledDataset& data, const std::filesystem::path& path) {
    detail::write_file(path, format_csv(data));
}

// ---------------------------------------------------------------------------
// Binary dataset: "TPCD", u32 version, u64 I, u32 D, u8 flags, I*D float32
// features row-major, I u8 labels. Little-endian throughout.

inline std::string encode_dataset(const LabeledDataset& data) {
    data.validate();
    detail::ByteWriter w;
    w.put_raw("TPCD");
    w.put<std::uint32_t>(kDatasetVersion);
    w.put<std::uint64_t>(data.size());
    w.put<std::uint32_t>(static_cast<std::uint32_t>(data.dim()));
    w.put<std::uint8_t>(data.metadata.pooling == std::optional<std::string>("mean") ? kFlagMeanPooled : 0);
    for (double v : data.features.data()) w.put<float>(static_cast<float>(v));
    for (auto l : data.labels) w.put<std::uint8_t>(l);
    return w.take();
}

inline LabeledDataset decode_dataset(std::string_view bytes, std::string source = "binary") {
    detail::ByteReader r(bytes, "dataset");
    if (r.get_raw(4, "magic") != "TPCD") r.bad("bad magic, expected TPCD");
    const auto version = r.get<std::uint32_t>("version");
    if (version != kDatasetVersion) r.bad("unsupported version " + std::to_string(version));
    const auto rows = r.get<std::uint64_t>("row count");
    const auto dim = r.get<std::uint32_t>("feature dimension");
    const auto flags = r.get<std::uint8_t>("flags");
    if (flags & ~kFlagMeanPooled) r.bad("unknown flag bits " + std::to_string(flags));
    if (rows == 0) r.bad("empty dataset");
    if (dim == 0) r.bad("zero feature dimension");
    // Check the payload size before allocating anything.
    const std::uint64_t per_row = std::uint64_t{dim} * sizeof(float) + 1;
    if (rows > r.remaining() / per_row || rows * per_row != r.remaining())
        r.bad("payload size " + std::to_string(r.remaining()) + " does not match " + std::to_string(rows) + " rows of width " +
              std::to_string(dim));

    LabeledDataset out;
    out.features = Matrix<double>(rows, dim);
    for (std::uint64_t i = 0; i < rows; ++i)
        for (std::uint32_t d = 0; d < dim; ++d) {
            const float v = r.get<float>("features");
            if (!std::isfinite(v)) r.bad("non-finite feature at row " + std::to_string(i));
            out.features(i, d) = v;
        }
    out.labels.resize(rows);
    for (std::uint64_t i = 0; i < rows; ++i) {
        const auto l = r.get<std::uint8_t>("labels");
        if (l > 1) r.bad("label " + std::to_string(l) + " outside {0,1} at row " + std::to_string(i));
        out.labels[i] = l;
    }
    out.metadata.source = std::move(source);
    if (flags & kFlagMeanPooled) out.metadata.pooling = "mean";
    return out;
}

inline void save_binary(const LabeledDataset& data, const std::filesystem::path& path) {
    detail::write_file(path, encode_dataset(data));
}

inline LabeledDataset load_binary(const std::filesystem::path& path) {
    return decode_dataset(detail::read_file(path), path.filename().string());
}

/// Picks the reader by extension: .csv is text, anything else binary.
inline LabeledDataset load_dataset(const std::filesystem::path& path) {
    return path.extension() == ".csv" ? load_csv(path) : load_binary(path);
}

// ---------------------------------------------------------------------------
// Model file: "TPCM", u32 version, u32 D, u32 R, u32 N, u32 trained_through,
// scaler mean and scale (f64 x D each), w0 (f64), w1 (f64 x D), then for
// k = 2..N: lambda (f64 x R) and U (f64 x R x D, row-major).

inline std::string encode_model(const TpcModel& model) {
    detail::ByteWriter w;
    w.put_raw("TPCM");
    w.put<std::uint32_t>(kModelVersion);
    w.put<std::uint32_t>(static_cast<std::uint32_t>(model.input_dim()));
    w.put<std::uint32_t>(static_cast<std::uint32_t>(model.rank()));
    w.put<std::uint32_t>(static_cast<std::uint32_t>(model.max_degree()));
    w.put<std::uint32_t>(static_cast<std::uint32_t>(model.trained_through()));
    for (double v : model.scaler().mean()) w.put(v);
    for (double v : model.scaler().scale()) w.put(v);
    w.put(model.bias());
    for (double v : model.linear()) w.put(v);
    for (std::size_t k = 2; k <= model.max_degree(); ++k) {
        for (double v : model.term(k).lambda) w.put(v);
        for (double v : model.term(k).factors.data()) w.put(v);
    }
    return w.take();
}

/// Bytes of the parameters of degrees below k (scaler, bias, linear, and
/// degree terms 2..k-1), in file order.
inline std::string encode_frozen_prefix(const TpcModel& model, std::size_t k) {
    detail::ByteWriter w;
    for (double v : model.scaler().mean()) w.put(v);
    for (double v : model.scaler().scale()) w.put(v);
    w.put(model.bias());
    for (double v : model.linear()) w.put(v);
    for (std::size_t j = 2; j < k && j <= model.max_degree(); ++j) {
        for (double v : model.term(j).lambda) w.put(v);
        for (double v : model.term(j).factors.data()) w.put(v);
    }
    return w.take();
}

inline TpcModel decode_model(std::string_view bytes) {
    detail::ByteReader r(bytes, "model");
    if (r.get_raw(4, "magic") != "TPCM") r.bad("bad magic, expected TPCM");
    const auto version = r.get<std::uint32_t>("version");
    if (version != kModelVersion) r.bad("unsupported version " + std::to_string(version));
    const auto dim = r.get<std::uint32_t>("D");
    const auto rank = r.get<std::uint32_t>("R");
    const auto degree = r.get<std::uint32_t>("N");
    const auto trained = r.get<std::uint32_t>("trained_through");
    if (dim == 0 || rank == 0 || degree == 0) r.bad("D, R and N must be positive");
    if (trained < 1 || trained > degree) r.bad("trained_through " + std::to_string(trained) + " outside [1, N]");
    const std::uint64_t per_term = std::uint64_t{rank} * (std::uint64_t{dim} + 1);
    std::uint64_t doubles = 0;
    if (__builtin_mul_overflow(std::uint64_t{degree - 1}, per_term, &doubles) ||
        __builtin_add_overflow(doubles, 3ull * dim + 1, &doubles) || doubles > r.remaining() / sizeof(double) ||
        doubles * sizeof(double) != r.remaining())
        r.bad("payload size " + std::to_string(r.remaining()) + " does not match header dimensions");

    auto next = [&](const char* field) {
        const double v = r.get<double>(field);
        if (!std::isfinite(v)) r.bad(std::string("non-finite value in ") + field);
        return v;
    };
    std::vector<double> mean(dim), scale(dim);
    for (auto& v : mean) v = next("scaler mean");
    for (auto& v : scale) {
        v = next("scaler scale");
        if (!(v > 0.0)) r.bad("scaler scale must be positive");
    }
    TpcModel model(dim, degree, rank);
    model.set_scaler(FeatureScaler(std::move(mean), std::move(scale)));
    model.bias() = next("bias");
    for (auto& v : model.linear()) v = next("linear weights");
    for (std::size_t k = 2; k <= degree; ++k) {
        for (auto& v : model.term(k).lambda) v = next("lambda");
        for (auto& v : model.term(k).factors.data()) v = next("factors");
    }
    model.set_trained_through(trained);
    return model;
}

inline void save_model(const TpcModel& model, const std::filesystem::path& path) {
    detail::write_file(path, encode_model(model));
}

inline TpcModel load_model(const std::filesystem::path& path) { return decode_model(detail::read_file(path)); }

} // namespace tpc
