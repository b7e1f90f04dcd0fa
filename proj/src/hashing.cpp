#include "s5vh/hashing.hpp"

#include <fstream>
#include <nlohmann/json.hpp>

#include "s5vh/io.hpp"
#include "s5vh/ops.hpp"

namespace s5vh::hashing {

HashLayer::HashLayer(std::size_t embed_dim, std::size_t code_bits, DType dtype, std::mt19937_64& rng)
    : proj(embed_dim, code_bits, true, dtype, rng) {}

Tensor HashLayer::forward(const Tensor& embeddings) const { return ops::tanh(proj.forward(embeddings)); }

void HashLayer::collect(const std::string& prefix, nn::ParameterList& out) const { proj.collect(prefix + ".proj", out); }

Tensor video_hash(const Tensor& frame_codes) {
    if (frame_codes.rank() != 3 || frame_codes.dim(1) == 0) {
        throw ShapeError("video_hash: expected (B, T >= 1, K), got " + to_string(frame_codes.shape()));
    }
    return ops::sign_ste(ops::mean(frame_codes, 1));
}

HashCode pool_codes(std::span<const double> frame_codes, std::size_t frames, std::size_t bits) {
    if (frames == 0 || frame_codes.size() != frames * bits) {
        throw ShapeError("pool_codes: " + std::to_string(frame_codes.size()) + " values for " +
                         std::to_string(frames) + " frames of " + std::to_string(bits) + " bits");
    }
    HashCode code(bits);
    for (std::size_t k = 0; k < bits; ++k) {
        double acc = 0.0;
        for (std::size_t t = 0; t < frames; ++t) acc += frame_codes[t * bits + k];
        code[k] = sign_bit(acc / static_cast<double>(frames));
    }
    return code;
}

void PackedCodes::push_back(std::span<const std::int8_t> code) {
    if (code.size() != bits_) {
        throw ShapeError("PackedCodes: code of " + std::to_string(code.size()) + " bits into table of " +
                         std::to_string(bits_));
    }
    std::size_t base = bytes_.size();
    bytes_.resize(base + stride(), 0);
    for (std::size_t i = 0; i < bits_; ++i) {
        if (code[i] != 1 && code[i] != -1) throw Error("PackedCodes: code entries must be +1 or -1");
        if (code[i] == 1) bytes_[base + i / 8] |= static_cast<std::uint8_t>(1u << (i % 8));
    }
}

std::span<const std::uint8_t> PackedCodes::row(std::size_t item) const {
    return std::span<const std::uint8_t>(bytes_).subspan(item * stride(), stride());
}

HashCode PackedCodes::unpack(std::size_t item) const {
    auto r = row(item);
    HashCode code(bits_);
    for (std::size_t i = 0; i < bits_; ++i) code[i] = (r[i / 8] >> (i % 8)) & 1u ? 1 : -1;
    return code;
}

void write_codes(const std::filesystem::path& path, const PackedCodes& codes, const std::vector<std::string>& ids) {
    if (!ids.empty() && ids.size() != codes.size()) {
        throw Error("write_codes: " + std::to_string(ids.size()) + " ids for " + std::to_string(codes.size()) + " codes");
    }
    if (codes.bits() > 0xFFFF) throw Error("write_codes: K does not fit in u16");
    std::ofstream os(path, std::ios::binary);
    if (!os) throw io::IoError("write_codes: cannot open " + path.string());
    io::write_le<std::uint64_t>(os, codes.size());
    io::write_le<std::uint16_t>(os, static_cast<std::uint16_t>(codes.bits()));
    os.write(reinterpret_cast<const char*>(codes.bytes().data()), static_cast<std::streamsize>(codes.bytes().size()));
    if (!os) throw io::IoError("write_codes: write failed for " + path.string());

    nlohmann::json sidecar = nlohmann::json::array();
    for (const auto& id : ids) sidecar.push_back(id);
    io::write_json(io::sidecar_path(path), sidecar);
}

PackedCodes read_codes(const std::filesystem::path& path, std::vector<std::string>* ids) {
    std::ifstream is(path, std::ios::binary);
    if (!is) throw io::IoError("read_codes: cannot open " + path.string());
    auto n = io::read_le<std::uint64_t>(is);
    auto k = io::read_le<std::uint16_t>(is);
    if (!is) throw io::FormatError("read_codes: truncated header in " + path.string());
    PackedCodes codes(k);
    codes.bytes_.resize(static_cast<std::size_t>(n) * codes.stride());
    is.read(reinterpret_cast<char*>(codes.bytes_.data()), static_cast<std::streamsize>(codes.bytes_.size()));
    if (!is) throw io::FormatError("read_codes: truncated payload in " + path.string());
    if (is.peek() != std::ifstream::traits_type::eof()) throw io::FormatError("read_codes: trailing bytes in " + path.string());
    if (ids) {
        ids->clear();
        auto side = io::sidecar_path(path);
        if (std::filesystem::exists(side)) {
            for (const auto& v : io::read_json(side)) ids->push_back(v.get<std::string>());
            if (ids->size() != codes.size()) throw io::FormatError("read_codes: sidecar length mismatch for " + path.string());
        }
    }
    return codes;
}

}  // namespace s5vh::hashing
