#pragma once

#include <bit>
#include <cstdint>
#include <cstdio>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "json.hpp"
#include "textcnn/common.hpp"
#include "textcnn/nn/hyperparams.hpp"
#include "textcnn/nn/params.hpp"

namespace textcnn::nn {

inline constexpr char kCheckpointMagic[8] = {'T', 'C', 'N', 'N', 'C', 'K', 'P', 'T'};
inline constexpr char kCheckpointEnd[8] = {'T', 'C', 'N', 'N', 'E', 'N', 'D', '\0'};
inline constexpr std::uint32_t kCheckpointVersion = 1;

struct CheckpointMeta {
    HyperParams hp;
    std::uint64_t vocab_hash = 0;
    std::vector<std::string> labels;
    std::size_t padded_length = 0;
    std::uint64_t step = 0;

    bool operator==(const CheckpointMeta&) const = default;
};

struct Checkpoint {
    ModelParams<double> params;
    CheckpointMeta meta;
};

namespace detail {

inline void put_u64(std::ostream& out, std::uint64_t v) {
    unsigned char b[8];
    for (int i = 0; i < 8; ++i) {
        b[i] = static_cast<unsigned char>(v >> (8 * i));
    }
    out.write(reinterpret_cast<const char*>(b), 8);
}

inline std::uint64_t get_u64(std::istream& in, const std::string& path) {
    unsigned char b[8];
    if (!in.read(reinterpret_cast<char*>(b), 8)) {
        throw IoError("checkpoint '" + path + "' is truncated");
    }
    std::uint64_t v = 0;
    for (int i = 0; i < 8; ++i) {
        v |= static_cast<std::uint64_t>(b[i]) << (8 * i);
    }
    return v;
}

}  // namespace detail

/// Layout: magic(8) | version u32 | header length u64 | JSON header |
/// tensors as little-endian float64 in for_each_tensor order | end marker(8).
/// Written to a temporary file and renamed into place.
template <typename T>
void save_checkpoint(const ParameterSet<T>& params, const CheckpointMeta& meta, const std::string& path) {
    nlohmann::json header;
    header["format"] = "textcnn-checkpoint";
    header["hyperparams"] = meta.hp;
    header["vocab_hash"] = meta.vocab_hash;
    header["labels"] = meta.labels;
    header["padded_length"] = meta.padded_length;
    header["step"] = meta.step;
    nlohmann::json shapes = nlohmann::json::array();
    params.for_each_tensor([&](const TensorRef<const T>& t) {
        shapes.push_back({{"name", t.name}, {"rows", t.rows}, {"cols", t.cols}});
    });
    header["tensors"] = shapes;
    header["widths"] = params.widths;
    const std::string header_text = header.dump();

    const std::string tmp = path + ".tmp";
    {
        std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
        if (!out) {
            throw IoError("cannot write checkpoint '" + path + "'");
        }
        out.write(kCheckpointMagic, 8);
        const std::uint32_t version = kCheckpointVersion;
        for (int i = 0; i < 4; ++i) {
            out.put(static_cast<char>(version >> (8 * i)));
        }
        detail::put_u64(out, header_text.size());
        out.write(header_text.data(), static_cast<std::streamsize>(header_text.size()));
        params.for_each_tensor([&](const TensorRef<const T>& t) {
            for (T v : t.values) {
                detail::put_u64(out, std::bit_cast<std::uint64_t>(static_cast<double>(v)));
            }
        });
        out.write(kCheckpointEnd, 8);
        if (!out) {
            throw IoError("failed writing checkpoint '" + path + "'");
        }
    }
    std::filesystem::rename(tmp, path);
}

/// Reads a checkpoint. When `expected_vocab_hash` is given, a mismatch is an error.
inline Checkpoint load_checkpoint(const std::string& path,
                                  std::optional<std::uint64_t> expected_vocab_hash = std::nullopt) {
    std::ifstream in(path, std::ios::binary);
    if (!in) {
        throw IoError("cannot open checkpoint '" + path + "'");
    }
    char magic[8];
    if (!in.read(magic, 8) || std::memcmp(magic, kCheckpointMagic, 8) != 0) {
        throw IoError("'" + path + "' is not a checkpoint (bad magic bytes)");
    }
    unsigned char vb[4];
    if (!in.read(reinterpret_cast<char*>(vb), 4)) {
        throw IoError("checkpoint '" + path + "' is truncated");
    }
    const std::uint32_t version = vb[0] | (vb[1] << 8) | (vb[2] << 16) | (static_cast<std::uint32_t>(vb[3]) << 24);
    if (version != kCheckpointVersion) {
        throw IoError("checkpoint '" + path + "' has version " + std::to_string(version) +
                      ", expected " + std::to_string(kCheckpointVersion));
    }
    const std::uint64_t header_len = detail::get_u64(in, path);
    if (header_len > (std::uint64_t{1} << 30)) {
        throw IoError("checkpoint '" + path + "' has an implausible header length");
    }
    std::string header_text(header_len, '\0');
    if (!in.read(header_text.data(), static_cast<std::streamsize>(header_len))) {
        throw IoError("checkpoint '" + path + "' is truncated");
    }
    nlohmann::json header;
    try {
        header = nlohmann::json::parse(header_text);
    } catch (const nlohmann::json::exception& e) {
        throw IoError("checkpoint '" + path + "' has a corrupt header: " + e.what());
    }

    Checkpoint ck;
    try {
        ck.meta.hp = header.at("hyperparams").get<HyperParams>();
        ck.meta.vocab_hash = header.at("vocab_hash").get<std::uint64_t>();
        ck.meta.labels = header.at("labels").get<std::vector<std::string>>();
        ck.meta.padded_length = header.at("padded_length").get<std::size_t>();
        ck.meta.step = header.at("step").get<std::uint64_t>();
        const auto widths = header.at("widths").get<std::vector<std::size_t>>();
        const auto& tensors = header.at("tensors");
        const std::size_t vocab = tensors.at(0).at("rows").get<std::size_t>();
        const std::size_t dim = tensors.at(0).at("cols").get<std::size_t>();
        const std::size_t filters = widths.empty() ? 0 : tensors.at(1).at("rows").get<std::size_t>();
        const std::size_t classes = tensors.back().at("cols").get<std::size_t>();
        ck.params = ModelParams<double>(ParameterSet<double>::zeros(widths, vocab, dim, filters, classes));
        std::size_t k = 0;
        bool shapes_ok = true;
        ck.params.for_each_tensor([&](TensorRef<double> t) {
            if (k >= tensors.size() || tensors[k].at("name").get<std::string>() != t.name ||
                tensors[k].at("rows").get<std::size_t>() != t.rows ||
                tensors[k].at("cols").get<std::size_t>() != t.cols) {
                shapes_ok = false;
            }
            ++k;
        });
        if (!shapes_ok || k != tensors.size()) {
            throw IoError("checkpoint '" + path + "' declares inconsistent tensor shapes");
        }
    } catch (const nlohmann::json::exception& e) {
        throw IoError("checkpoint '" + path + "' header is missing fields: " + e.what());
    }

    ck.params.for_each_tensor([&](TensorRef<double> t) {
        for (auto& v : t.values) {
            v = std::bit_cast<double>(detail::get_u64(in, path));
        }
    });
    char end[8];
    if (!in.read(end, 8) || std::memcmp(end, kCheckpointEnd, 8) != 0) {
        throw IoError("checkpoint '" + path + "' is truncated or has trailing corruption");
    }
    if (in.peek() != std::char_traits<char>::eof()) {
        throw IoError("checkpoint '" + path + "' has unexpected trailing bytes");
    }
    if (expected_vocab_hash && *expected_vocab_hash != ck.meta.vocab_hash) {
        throw IoError("checkpoint '" + path + "' was trained with a different vocabulary");
    }
    return ck;
}

}  // namespace textcnn::nn
