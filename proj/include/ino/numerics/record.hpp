#pragma once

#include <bit>
#include <cstdint>
#include <cstring>
#include <istream>
#include <ostream>
#include <stdexcept>
#include <string>
#include <type_traits>
#include <vector>

#include "ino/numerics/tensor.hpp"

// Tensor record layout (all integers little-endian):
//   "INOT"            4 bytes magic
//   version           u8 (currently 1)
//   rank              u8
//   extents           rank x u32
//   dtype             u8 (0 = f32, 1 = f64)
//   values            numel x (4 or 8) bytes, IEEE-754 little-endian

namespace ino {

inline constexpr char kRecordMagic[4] = {'I', 'N', 'O', 'T'};
inline constexpr std::uint8_t kRecordVersion = 1;

class FormatError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

namespace io {

template <class U>
void put_le(std::ostream& os, U v) {
    using Bits = std::conditional_t<sizeof(U) == 8, std::uint64_t, std::conditional_t<sizeof(U) == 4, std::uint32_t, std::uint8_t>>;
    const auto bits = std::bit_cast<Bits>(v);
    char buf[sizeof(U)];
    for (std::size_t i = 0; i < sizeof(U); ++i) buf[i] = static_cast<char>((bits >> (8 * i)) & 0xFF);
    os.write(buf, sizeof(U));
}

template <class U>
U get_le(std::istream& is) {
    using Bits = std::conditional_t<sizeof(U) == 8, std::uint64_t, std::conditional_t<sizeof(U) == 4, std::uint32_t, std::uint8_t>>;
    unsigned char buf[sizeof(U)];
    if (!is.read(reinterpret_cast<char*>(buf), sizeof(U))) throw FormatError("unexpected end of stream");
    Bits bits = 0;
    for (std::size_t i = 0; i < sizeof(U); ++i) bits |= static_cast<Bits>(buf[i]) << (8 * i);
    return std::bit_cast<U>(bits);
}

inline void put_string(std::ostream& os, const std::string& s) {
    put_le<std::uint32_t>(os, static_cast<std::uint32_t>(s.size()));
    os.write(s.data(), static_cast<std::streamsize>(s.size()));
}

inline std::string get_string(std::istream& is) {
    const auto n = get_le<std::uint32_t>(is);
    std::string s(n, '\0');
    if (n && !is.read(s.data(), n)) throw FormatError("unexpected end of stream in string");
    return s;
}

}  // namespace io

template <class T>
constexpr std::uint8_t dtype_tag() {
    static_assert(std::is_same_v<T, float> || std::is_same_v<T, double>);
    return std::is_same_v<T, float> ? 0 : 1;
}

template <class T>
void write_record(std::ostream& os, const Tensor<T>& t) {
    os.write(kRecordMagic, 4);
    io::put_le<std::uint8_t>(os, kRecordVersion);
    io::put_le<std::uint8_t>(os, static_cast<std::uint8_t>(t.rank()));
    for (auto e : t.shape()) io::put_le<std::uint32_t>(os, static_cast<std::uint32_t>(e));
    io::put_le<std::uint8_t>(os, dtype_tag<T>());
    for (T v : t.data()) io::put_le<T>(os, v);
}

/// Reads one record, converting to T if the stored dtype differs.
template <class T>
Tensor<T> read_record(std::istream& is) {
    char magic[4];
    if (!is.read(magic, 4) || std::memcmp(magic, kRecordMagic, 4) != 0) throw FormatError("bad tensor record magic");
    const auto version = io::get_le<std::uint8_t>(is);
    if (version != kRecordVersion) throw FormatError("unsupported tensor record version " + std::to_string(version));
    const auto rank = io::get_le<std::uint8_t>(is);
    Shape shape(rank);
    for (auto& e : shape) e = io::get_le<std::uint32_t>(is);
    const auto dtype = io::get_le<std::uint8_t>(is);
    if (dtype > 1) throw FormatError("unknown dtype tag " + std::to_string(dtype));
    std::vector<T> data(shape_numel(shape));
    for (auto& v : data) v = dtype == 0 ? static_cast<T>(io::get_le<float>(is)) : static_cast<T>(io::get_le<double>(is));
    return Tensor<T>(std::move(shape), std::move(data));
}

}  // namespace ino
