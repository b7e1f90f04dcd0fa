#pragma once

#include <bit>
#include <cstdint>
#include <filesystem>
#include <istream>
#include <nlohmann/json.hpp>
#include <ostream>
#include <string>

#include "s5vh/nn.hpp"
#include "s5vh/tensor.hpp"

namespace s5vh::io {

class IoError : public Error {
public:
    using Error::Error;
};

class FormatError : public Error {
public:
    using Error::Error;
};

static_assert(std::endian::native == std::endian::little, "file formats assume a little-endian host");

template <class T>
void write_le(std::ostream& os, T value) {
    os.write(reinterpret_cast<const char*>(&value), sizeof(T));
}

template <class T>
T read_le(std::istream& is) {
    T value{};
    is.read(reinterpret_cast<char*>(&value), sizeof(T));
    return value;
}

struct TensorHeader {
    DType dtype;
    Shape shape;
};

/// "S5VT" tensor file: magic, version u8, dtype u8 (0 f32, 1 f64), rank u8,
/// dims as u64, then the row-major payload, all little endian.
void write_tensor(const std::filesystem::path& path, const Tensor& tensor);
Tensor read_tensor(const std::filesystem::path& path);
TensorHeader read_tensor_header(const std::filesystem::path& path);

inline constexpr std::uint8_t kTensorFormatVersion = 1;

/// Checkpoint archive: one tensor file per parameter plus `index.json`
/// mapping name -> {file, shape}.
void save_checkpoint(const std::filesystem::path& dir, const nn::ParameterList& params);
/// Copies stored values into the matching parameters. Every name in
/// `params` must be present in the archive with an identical shape.
void load_checkpoint(const std::filesystem::path& dir, const nn::ParameterList& params);

nlohmann::json read_json(const std::filesystem::path& path);
void write_json(const std::filesystem::path& path, const nlohmann::json& value);
std::filesystem::path sidecar_path(const std::filesystem::path& path);

}  // namespace s5vh::io
