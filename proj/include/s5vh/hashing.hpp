#pragma once

#include <cstdint>
#include <filesystem>
#include <random>
#include <span>
#include <string>
#include <vector>

#include "s5vh/nn.hpp"
#include "s5vh/tensor.hpp"

namespace s5vh::hashing {

/// Binary code in {-1, +1}^K.
using HashCode = std::vector<std::int8_t>;

/// Frame-level soft hashing: H = tanh(E W + b), entries in (-1, 1).
class HashLayer {
public:
    HashLayer() = default;
    HashLayer(std::size_t embed_dim, std::size_t code_bits, DType dtype, std::mt19937_64& rng);

    /// E: (B, T, embed_dim) -> H: (B, T, K).
    Tensor forward(const Tensor& embeddings) const;
    void collect(const std::string& prefix, nn::ParameterList& out) const;

    std::size_t code_bits() const { return proj.out_features(); }

    nn::Linear proj;
};

/// Differentiable video code: sign(mean over time of H) with a
/// straight-through backward. H: (B, T, K) -> (B, K) in {-1, +1}.
Tensor video_hash(const Tensor& frame_codes);

/// Sign with sign(0) = +1.
inline std::int8_t sign_bit(double v) { return v >= 0.0 ? 1 : -1; }

/// Inference-time pooling of one video's soft codes, (T, K) row-major.
HashCode pool_codes(std::span<const double> frame_codes, std::size_t frames, std::size_t bits);

/// Bit-packed code table: ceil(K/8) bytes per item, bit i of item j stored
/// in byte i/8 at position i%8 (LSB first), 1 <=> +1.
class PackedCodes {
public:
    PackedCodes() = default;
    explicit PackedCodes(std::size_t bits) : bits_(bits) {}

    static std::size_t bytes_for(std::size_t bits) { return (bits + 7) / 8; }

    void push_back(std::span<const std::int8_t> code);
    HashCode unpack(std::size_t item) const;
    std::span<const std::uint8_t> row(std::size_t item) const;

    std::size_t bits() const { return bits_; }
    std::size_t stride() const { return bytes_for(bits_); }
    std::size_t size() const { return bits_ ? bytes_.size() / stride() : 0; }
    bool empty() const { return size() == 0; }
    const std::vector<std::uint8_t>& bytes() const { return bytes_; }

    friend bool operator==(const PackedCodes&, const PackedCodes&) = default;

private:
    friend PackedCodes read_codes(const std::filesystem::path&, std::vector<std::string>*);
    std::size_t bits_ = 0;
    std::vector<std::uint8_t> bytes_;
};

/// Writes `{num_items u64, K u16}` then the packed rows, little endian, and
/// a `<path>.json` sidecar mapping row -> video id.
void write_codes(const std::filesystem::path& path, const PackedCodes& codes, const std::vector<std::string>& ids);
PackedCodes read_codes(const std::filesystem::path& path, std::vector<std::string>* ids = nullptr);

}  // namespace s5vh::hashing
