#include "s5vh/io.hpp"

#include <cstring>
#include <fstream>

namespace s5vh::io {

namespace {

constexpr char kMagic[4] = {'S', '5', 'V', 'T'};

TensorHeader read_header(std::istream& is, const std::filesystem::path& path) {
    char magic[4];
    is.read(magic, 4);
    if (!is || std::memcmp(magic, kMagic, 4) != 0) throw FormatError("tensor file: bad magic in " + path.string());
    auto version = read_le<std::uint8_t>(is);
    auto dtype = read_le<std::uint8_t>(is);
    auto rank = read_le<std::uint8_t>(is);
    if (!is) throw FormatError("tensor file: truncated header in " + path.string());
    if (version != kTensorFormatVersion) {
        throw FormatError("tensor file: unsupported version " + std::to_string(version) + " in " + path.string());
    }
    if (dtype > 1) throw FormatError("tensor file: unknown dtype code " + std::to_string(dtype) + " in " + path.string());
    TensorHeader h{static_cast<DType>(dtype), Shape(rank)};
    for (auto& d : h.shape) d = static_cast<std::size_t>(read_le<std::uint64_t>(is));
    if (!is) throw FormatError("tensor file: truncated dims in " + path.string());
    return h;
}

}  // namespace

void write_tensor(const std::filesystem::path& path, const Tensor& tensor) {
    if (tensor.rank() > 255) throw FormatError("tensor file: rank exceeds 255");
    std::ofstream os(path, std::ios::binary);
    if (!os) throw IoError("tensor file: cannot open " + path.string() + " for writing");
    os.write(kMagic, 4);
    write_le<std::uint8_t>(os, kTensorFormatVersion);
    write_le<std::uint8_t>(os, static_cast<std::uint8_t>(tensor.dtype()));
    write_le<std::uint8_t>(os, static_cast<std::uint8_t>(tensor.rank()));
    for (auto d : tensor.shape()) write_le<std::uint64_t>(os, d);
    for (double v : tensor.data()) {
        if (tensor.dtype() == DType::F32) {
            write_le<float>(os, static_cast<float>(v));
        } else {
            write_le<double>(os, v);
        }
    }
    if (!os) throw IoError("tensor file: write failed for " + path.string());
}

TensorHeader read_tensor_header(const std::filesystem::path& path) {
    std::ifstream is(path, std::ios::binary);
    if (!is) throw IoError("tensor file: cannot open " + path.string());
    return read_header(is, path);
}

Tensor read_tensor(const std::filesystem::path& path) {
    std::ifstream is(path, std::ios::binary);
    if (!is) throw IoError("tensor file: cannot open " + path.string());
    auto h = read_header(is, path);
    std::vector<double> data(numel(h.shape));
    for (auto& v : data) v = h.dtype == DType::F32 ? static_cast<double>(read_le<float>(is)) : read_le<double>(is);
    if (!is) throw FormatError("tensor file: truncated payload in " + path.string());
    if (is.peek() != std::ifstream::traits_type::eof()) throw FormatError("tensor file: trailing bytes in " + path.string());
    return Tensor::from(std::move(h.shape), std::move(data), h.dtype);
}

void save_checkpoint(const std::filesystem::path& dir, const nn::ParameterList& params) {
    std::filesystem::create_directories(dir);
    nlohmann::json index = nlohmann::json::object();
    for (const auto& [name, tensor] : params) {
        std::string file = name + ".s5vt";
        write_tensor(dir / file, tensor);
        index[name] = {{"file", file}, {"shape", tensor.shape()}};
    }
    write_json(dir / "index.json", index);
}

void load_checkpoint(const std::filesystem::path& dir, const nn::ParameterList& params) {
    auto index = read_json(dir / "index.json");
    for (const auto& [name, tensor] : params) {
        if (!index.contains(name)) throw FormatError("checkpoint: missing parameter '" + name + "' in " + dir.string());
        Tensor stored = read_tensor(dir / index[name]["file"].get<std::string>());
        if (stored.shape() != tensor.shape()) {
            throw FormatError("checkpoint: parameter '" + name + "' has shape " + to_string(stored.shape()) +
                              ", model expects " + to_string(tensor.shape()));
        }
        Tensor target = tensor;
        auto dst = target.mutable_data();
        std::copy(stored.data().begin(), stored.data().end(), dst.begin());
        target.round_to_dtype();
    }
}

nlohmann::json read_json(const std::filesystem::path& path) {
    std::ifstream is(path);
    if (!is) throw IoError("cannot open " + path.string());
    try {
        return nlohmann::json::parse(is);
    } catch (const nlohmann::json::exception& e) {
        throw FormatError("invalid JSON in " + path.string() + ": " + e.what());
    }
}

void write_json(const std::filesystem::path& path, const nlohmann::json& value) {
    std::ofstream os(path);
    if (!os) throw IoError("cannot open " + path.string() + " for writing");
    os << value.dump(2) << '\n';
}

std::filesystem::path sidecar_path(const std::filesystem::path& path) {
    auto p = path;
    p += ".json";
    return p;
}

}  // namespace s5vh::io
