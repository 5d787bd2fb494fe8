#include "alens/npy.hpp"

#include <algorithm>
#include <bit>
#include <cctype>
#include <cstdint>
#include <cstring>
#include <fstream>
#include <iterator>
#include <json.hpp>
#include <sstream>

#include "alens/error.hpp"

namespace alens::npy {

static_assert(std::endian::native == std::endian::little, "NPY I/O assumes a little-endian host");

namespace {

constexpr char kMagic[] = "\x93NUMPY";
constexpr std::size_t kMagicLen = 6;
constexpr std::size_t kAlign = 64;

struct Header {
    std::string descr;
    bool fortran_order = false;
    std::vector<std::size_t> shape;
};

// Minimal parser for the Python-literal dict NumPy writes, e.g.
// {'descr': '<f8', 'fortran_order': False, 'shape': (3, 4), }
class HeaderParser {
public:
    HeaderParser(std::string_view text, std::size_t base) : text_(text), base_(base) {}

    Header parse() {
        Header header;
        bool seen_descr = false, seen_order = false, seen_shape = false;
        skip_ws();
        expect('{');
        while (true) {
            skip_ws();
            if (peek() == '}') {
                ++pos_;
                break;
            }
            const auto key = parse_string();
            skip_ws();
            expect(':');
            skip_ws();
            if (key == "descr") {
                header.descr = parse_string();
                seen_descr = true;
            } else if (key == "fortran_order") {
                header.fortran_order = parse_bool();
                seen_order = true;
            } else if (key == "shape") {
                header.shape = parse_shape();
                seen_shape = true;
            } else {
                fail("unexpected header key '" + key + "'");
            }
            skip_ws();
            if (peek() == ',') {
                ++pos_;
            } else if (peek() != '}') {
                fail("expected ',' or '}' in header");
            }
        }
        if (!seen_descr || !seen_order || !seen_shape) {
            fail("header is missing descr, fortran_order or shape");
        }
        return header;
    }

private:
    [[noreturn]] void fail(const std::string& what) const { throw ParseError("npy: " + what, base_ + pos_); }

    char peek() const { return pos_ < text_.size() ? text_[pos_] : '\0'; }

    void skip_ws() {
        while (pos_ < text_.size() && (text_[pos_] == ' ' || text_[pos_] == '\t')) {
            ++pos_;
        }
    }

    void expect(char c) {
        if (peek() != c) {
            fail(std::string("expected '") + c + "'");
        }
        ++pos_;
    }

    std::string parse_string() {
        const char quote = peek();
        if (quote != '\'' && quote != '"') {
            fail("expected quoted string");
        }
        ++pos_;
        const auto end = text_.find(quote, pos_);
        if (end == std::string_view::npos) {
            fail("unterminated string");
        }
        std::string out(text_.substr(pos_, end - pos_));
        pos_ = end + 1;
        return out;
    }

    bool parse_bool() {
        if (text_.substr(pos_, 4) == "True") {
            pos_ += 4;
            return true;
        }
        if (text_.substr(pos_, 5) == "False") {
            pos_ += 5;
            return false;
        }
        fail("expected True or False");
    }

    std::vector<std::size_t> parse_shape() {
        std::vector<std::size_t> shape;
        expect('(');
        while (true) {
            skip_ws();
            if (peek() == ')') {
                ++pos_;
                return shape;
            }
            if (!std::isdigit(static_cast<unsigned char>(peek()))) {
                fail("expected dimension in shape");
            }
            std::size_t value = 0;
            while (std::isdigit(static_cast<unsigned char>(peek()))) {
                value = value * 10 + static_cast<std::size_t>(peek() - '0');
                ++pos_;
            }
            shape.push_back(value);
            skip_ws();
            if (peek() == ',') {
                ++pos_;
            } else if (peek() != ')') {
                fail("expected ',' or ')' in shape");
            }
        }
    }

    std::string_view text_;
    std::size_t base_;
    std::size_t pos_ = 0;
};

std::string shape_literal(const std::vector<std::size_t>& shape) {
    std::ostringstream out;
    out << '(';
    for (std::size_t i = 0; i < shape.size(); ++i) {
        out << shape[i];
        if (shape.size() == 1 || i + 1 < shape.size()) {
            out << (i + 1 < shape.size() ? ", " : ",");
        }
    }
    out << ')';
    return out.str();
}

std::string read_bytes(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) {
        throw IoError("cannot open " + path.string());
    }
    return std::string(std::istreambuf_iterator<char>(in), {});
}

void write_bytes(const std::filesystem::path& path, const std::string& bytes) {
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) {
        throw IoError("cannot write " + path.string());
    }
    out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
    if (!out) {
        throw IoError("write failed for " + path.string());
    }
}

}  // namespace

std::size_t Array::element_count() const {
    std::size_t n = 1;
    for (auto d : shape) {
        n *= d;
    }
    return n;
}

std::string encode(const Array& array) {
    if (array.data.size() != array.element_count()) {
        throw InvalidInputError("npy: data size does not match shape");
    }
    std::string dict = "{'descr': '<f8', 'fortran_order': False, 'shape': " + shape_literal(array.shape) + ", }";
    const std::size_t preamble = kMagicLen + 2 + 2;
    std::size_t total = preamble + dict.size() + 1;
    const std::size_t padded = (total + kAlign - 1) / kAlign * kAlign;
    dict.append(padded - total, ' ');
    dict.push_back('\n');

    std::string out(kMagic, kMagicLen);
    out.push_back('\x01');
    out.push_back('\x00');
    const auto header_len = static_cast<std::uint16_t>(dict.size());
    out.push_back(static_cast<char>(header_len & 0xff));
    out.push_back(static_cast<char>(header_len >> 8));
    out += dict;
    const auto payload = out.size();
    out.resize(payload + array.data.size() * sizeof(double));
    std::memcpy(out.data() + payload, array.data.data(), array.data.size() * sizeof(double));
    return out;
}

Array decode(std::span<const char> bytes) {
    if (bytes.size() < kMagicLen + 4 || std::memcmp(bytes.data(), kMagic, kMagicLen) != 0) {
        throw ParseError("npy: missing magic string", 0);
    }
    const auto major = static_cast<unsigned char>(bytes[kMagicLen]);
    std::size_t header_len = 0;
    std::size_t header_start = 0;
    if (major == 1) {
        header_len = static_cast<unsigned char>(bytes[8]) | (static_cast<std::size_t>(static_cast<unsigned char>(bytes[9])) << 8);
        header_start = 10;
    } else if (major == 2 || major == 3) {
        if (bytes.size() < 12) {
            throw ParseError("npy: truncated header length", 8);
        }
        for (std::size_t i = 0; i < 4; ++i) {
            header_len |= static_cast<std::size_t>(static_cast<unsigned char>(bytes[8 + i])) << (8 * i);
        }
        header_start = 12;
    } else {
        throw ParseError("npy: unsupported format version " + std::to_string(major), kMagicLen);
    }
    if (header_start + header_len > bytes.size()) {
        throw ParseError("npy: header extends past end of file", bytes.size());
    }
    const std::string_view text(bytes.data() + header_start, header_len);
    const auto header = HeaderParser(text, header_start).parse();
    if (header.fortran_order) {
        throw ParseError("npy: Fortran-ordered arrays are not supported", header_start);
    }
    std::size_t width = 0;
    if (header.descr == "<f8") {
        width = 8;
    } else if (header.descr == "<f4") {
        width = 4;
    } else {
        throw ParseError("npy: unsupported dtype '" + header.descr + "' (expected <f8 or <f4)", header_start);
    }

    Array array;
    array.shape = header.shape;
    const auto count = array.element_count();
    const auto payload = header_start + header_len;
    if (bytes.size() - payload != count * width) {
        throw ParseError("npy: payload holds " + std::to_string(bytes.size() - payload) + " bytes, expected " +
                             std::to_string(count * width),
                         payload);
    }
    array.data.resize(count);
    if (width == 8) {
        std::memcpy(array.data.data(), bytes.data() + payload, count * 8);
    } else {
        for (std::size_t i = 0; i < count; ++i) {
            float f;
            std::memcpy(&f, bytes.data() + payload + i * 4, 4);
            array.data[i] = static_cast<double>(f);
        }
    }
    return array;
}

Array read(const std::filesystem::path& path) {
    const auto bytes = read_bytes(path);
    return decode(bytes);
}

void write(const std::filesystem::path& path, const Array& array) { write_bytes(path, encode(array)); }

Array from_map(const AttributionMap& map) {
    return Array{{map.height(), map.width()}, {map.values().begin(), map.values().end()}};
}

AttributionMap to_map(const Array& array) {
    if (array.shape.size() != 2) {
        throw InvalidInputError("expected a 2-D array for an attribution map, got " +
                                std::to_string(array.shape.size()) + " dims");
    }
    return AttributionMap(array.shape[0], array.shape[1], array.data);
}

void save_map(const std::filesystem::path& path, const AttributionMap& map) { write(path, from_map(map)); }

AttributionMap load_map(const std::filesystem::path& path) { return to_map(read(path)); }

void save_image(const std::filesystem::path& path, const ImageSample& image) {
    const auto& t = image.tensor();
    write(path, Array{{t.height(), t.width(), t.channels()}, {t.values().begin(), t.values().end()}});
}

ImageSample load_image(const std::filesystem::path& path) {
    auto array = read(path);
    if (array.shape.size() == 2) {
        array.shape.push_back(1);
    }
    if (array.shape.size() != 3) {
        throw InvalidInputError("expected an HxWxd image array in " + path.string());
    }
    return ImageSample(Shape{array.shape[0], array.shape[1], array.shape[2]}, std::move(array.data));
}

std::filesystem::path stack_sidecar(const std::filesystem::path& npy_path) {
    auto sidecar = npy_path;
    sidecar.replace_extension(".json");
    return sidecar;
}

void save_stack(const std::filesystem::path& path, const AttributionStack& stack) {
    Array array;
    array.shape = {stack.size(), stack.height(), stack.width()};
    array.data.reserve(array.element_count());
    for (const auto& m : stack.maps()) {
        array.data.insert(array.data.end(), m.values().begin(), m.values().end());
    }
    write(path, array);
    nlohmann::json sidecar;
    sidecar["class_ids"] = stack.class_ids();
    write_bytes(stack_sidecar(path), sidecar.dump(2) + "\n");
}

AttributionStack load_stack(const std::filesystem::path& path) {
    const auto array = read(path);
    if (array.shape.size() != 3) {
        throw InvalidInputError("expected a C'xHxW stack array in " + path.string());
    }
    const auto sidecar_path = stack_sidecar(path);
    const auto text = read_bytes(sidecar_path);
    nlohmann::json sidecar;
    try {
        sidecar = nlohmann::json::parse(text);
    } catch (const nlohmann::json::parse_error& e) {
        throw ParseError(sidecar_path.string() + ": " + e.what(), e.byte);
    }
    if (!sidecar.is_object() || !sidecar.contains("class_ids") || !sidecar["class_ids"].is_array()) {
        throw ParseError(sidecar_path.string() + ": missing class_ids array", 0);
    }
    std::vector<ClassId> ids;
    for (const auto& v : sidecar["class_ids"]) {
        if (!v.is_number_integer() || v.get<std::int64_t>() < 0) {
            throw ParseError(sidecar_path.string() + ": class ids must be non-negative integers", 0);
        }
        ids.push_back(v.get<ClassId>());
    }
    const auto [count, height, width] = std::tuple{array.shape[0], array.shape[1], array.shape[2]};
    if (ids.size() != count) {
        throw InvalidStackError("sidecar lists " + std::to_string(ids.size()) + " class ids for " +
                                std::to_string(count) + " maps");
    }
    std::vector<AttributionMap> maps;
    const auto plane = height * width;
    for (std::size_t c = 0; c < count; ++c) {
        maps.emplace_back(height, width,
                          std::vector<double>(array.data.begin() + static_cast<std::ptrdiff_t>(c * plane),
                                              array.data.begin() + static_cast<std::ptrdiff_t>((c + 1) * plane)));
    }
    return AttributionStack(std::move(ids), std::move(maps));
}

void save_masks(const std::filesystem::path& path, std::span<const RegionMask> masks) {
    if (masks.empty()) {
        throw InvalidInputError("no masks to save");
    }
    Array array;
    array.shape = {masks.size(), masks.front().height(), masks.front().width()};
    for (const auto& m : masks) {
        for (std::size_t i = 0; i < m.height() * m.width(); ++i) {
            array.data.push_back(m[i] ? 1.0 : 0.0);
        }
    }
    write(path, array);
}

std::vector<RegionMask> load_masks(const std::filesystem::path& path) {
    const auto array = read(path);
    if (array.shape.size() != 3) {
        throw InvalidInputError("expected a KxHxW mask array in " + path.string());
    }
    std::vector<RegionMask> masks;
    const auto plane = array.shape[1] * array.shape[2];
    for (std::size_t k = 0; k < array.shape[0]; ++k) {
        std::vector<bool> cells(plane);
        for (std::size_t i = 0; i < plane; ++i) {
            cells[i] = array.data[k * plane + i] != 0.0;
        }
        masks.emplace_back(array.shape[1], array.shape[2], std::move(cells));
    }
    return masks;
}

}  // namespace alens::npy
