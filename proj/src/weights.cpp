#include "drnet/weights.hpp"

#include <cstring>
#include <fstream>
#include <stdexcept>

#include "drnet/io_util.hpp"

namespace drnet {

namespace {

template <typename T>
void write_le(std::ofstream& out, T v) {
    out.write(reinterpret_cast<const char*>(&v), sizeof(T));
}

template <typename T>
T read_le(std::ifstream& in, const std::string& path) {
    T v{};
    in.read(reinterpret_cast<char*>(&v), sizeof(T));
    if (!in) throw IoError(path + ": truncated DRNW file");
    return v;
}

}  // namespace

void save_drnw(const std::string& path, const NamedTensors& tensors) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw IoError("cannot write " + path);
    out.write("DRNW", 4);
    write_le<std::uint32_t>(out, kDrnwVersion);
    write_le<std::uint32_t>(out, static_cast<std::uint32_t>(tensors.size()));
    for (const auto& [name, t] : tensors) {
        if (name.size() > 0xffff) throw std::invalid_argument("tensor name too long: " + name);
        write_le<std::uint16_t>(out, static_cast<std::uint16_t>(name.size()));
        out.write(name.data(), static_cast<std::streamsize>(name.size()));
        write_le<std::uint8_t>(out, static_cast<std::uint8_t>(t.ndim()));
        for (int d = 0; d < t.ndim(); ++d) write_le<std::uint32_t>(out, static_cast<std::uint32_t>(t.dim(d)));
        for (double v : t.data()) write_le<float>(out, static_cast<float>(v));
    }
    if (!out) throw IoError("write failed for " + path);
}

NamedTensors load_drnw(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw IoError("cannot open " + path);
    char magic[4];
    in.read(magic, 4);
    if (!in || std::memcmp(magic, "DRNW", 4) != 0) throw IoError(path + ": not a DRNW file");
    const auto version = read_le<std::uint32_t>(in, path);
    if (version != kDrnwVersion) {
        throw IoError(path + ": unsupported DRNW version " + std::to_string(version));
    }
    const auto count = read_le<std::uint32_t>(in, path);
    NamedTensors tensors;
    tensors.reserve(count);
    for (std::uint32_t i = 0; i < count; ++i) {
        const auto name_len = read_le<std::uint16_t>(in, path);
        std::string name(name_len, '\0');
        in.read(name.data(), name_len);
        if (!in) throw IoError(path + ": truncated tensor name");
        const auto ndim = read_le<std::uint8_t>(in, path);
        Shape shape;
        for (int d = 0; d < ndim; ++d) {
            shape.push_back(static_cast<int>(read_le<std::uint32_t>(in, path)));
        }
        const std::int64_t n = shape_numel(shape);
        std::vector<double> data(static_cast<size_t>(n));
        for (auto& v : data) v = static_cast<double>(read_le<float>(in, path));
        tensors.emplace_back(std::move(name), Tensor::from_data(std::move(shape), std::move(data)));
    }
    return tensors;
}

const Tensor& find_tensor(const NamedTensors& tensors, const std::string& name) {
    for (const auto& [n, t] : tensors) {
        if (n == name) return t;
    }
    throw std::invalid_argument("tensor '" + name + "' not found in weight map");
}

void assign_from(NamedTensors& dst, const NamedTensors& src) {
    for (auto& [name, t] : dst) {
        const Tensor& s = find_tensor(src, name);
        if (s.shape() != t.shape()) {
            throw std::invalid_argument("tensor '" + name + "' shape mismatch: file " +
                                        shape_str(s.shape()) + " vs model " + shape_str(t.shape()));
        }
        auto d = t.data_mut();
        auto sv = s.data();
        std::copy(sv.begin(), sv.end(), d.begin());
    }
}

}  // namespace drnet
