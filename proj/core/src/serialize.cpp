#include "fcl/serialize.hpp"

#include <bit>
#include <cstring>
#include <fstream>
#include <limits>

#include "fcl/errors.hpp"

namespace fcl {

namespace {

constexpr std::uint32_t kFormatVersion = 1;

void put_u16(std::vector<std::uint8_t>& out, std::uint16_t v) {
    out.push_back(static_cast<std::uint8_t>(v));
    out.push_back(static_cast<std::uint8_t>(v >> 8));
}

void put_u32(std::vector<std::uint8_t>& out, std::uint32_t v) {
    for (int shift = 0; shift < 32; shift += 8) {
        out.push_back(static_cast<std::uint8_t>(v >> shift));
    }
}

void put_f32(std::vector<std::uint8_t>& out, float v) {
    put_u32(out, std::bit_cast<std::uint32_t>(v));
}

void put_u64(std::vector<std::uint8_t>& out, std::uint64_t v) {
    for (int shift = 0; shift < 64; shift += 8) {
        out.push_back(static_cast<std::uint8_t>(v >> shift));
    }
}

void put_f64(std::vector<std::uint8_t>& out, double v) {
    put_u64(out, std::bit_cast<std::uint64_t>(v));
}

class Reader {
public:
    Reader(std::span<const std::uint8_t> bytes, const char* format)
        : bytes_(bytes), format_(format) {}

    std::uint16_t u16() {
        need(2);
        std::uint16_t v = static_cast<std::uint16_t>(bytes_[pos_] | (bytes_[pos_ + 1] << 8));
        pos_ += 2;
        return v;
    }

    std::uint32_t u32() {
        need(4);
        std::uint32_t v = 0;
        for (int i = 3; i >= 0; --i) {
            v = (v << 8) | bytes_[pos_ + static_cast<std::size_t>(i)];
        }
        pos_ += 4;
        return v;
    }

    std::uint64_t u64() {
        need(8);
        std::uint64_t v = 0;
        for (int i = 7; i >= 0; --i) {
            v = (v << 8) | bytes_[pos_ + static_cast<std::size_t>(i)];
        }
        pos_ += 8;
        return v;
    }

    float f32() { return std::bit_cast<float>(u32()); }
    double f64() { return std::bit_cast<double>(u64()); }

    void magic(const char expected[4]) {
        need(4);
        if (std::memcmp(bytes_.data() + pos_, expected, 4) != 0) {
            throw IoError(std::string(format_) + ": bad magic");
        }
        pos_ += 4;
    }

    void version(std::uint32_t expected) {
        const std::uint32_t v = u32();
        if (v != expected) {
            throw IoError(std::string(format_) + ": unsupported version " + std::to_string(v));
        }
    }

    void finish() const {
        if (pos_ != bytes_.size()) {
            throw IoError(std::string(format_) + ": trailing bytes after payload");
        }
    }

private:
    void need(std::size_t n) const {
        if (pos_ + n > bytes_.size()) {
            throw IoError(std::string(format_) + ": truncated input");
        }
    }

    std::span<const std::uint8_t> bytes_;
    const char* format_;
    std::size_t pos_ = 0;
};

std::vector<std::uint8_t> read_file(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) {
        throw IoError("cannot open file: " + path);
    }
    std::vector<std::uint8_t> bytes((std::istreambuf_iterator<char>(in)),
                                    std::istreambuf_iterator<char>());
    return bytes;
}

void write_file(const std::string& path, const std::vector<std::uint8_t>& bytes) {
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) {
        throw IoError("cannot open file for writing: " + path);
    }
    out.write(reinterpret_cast<const char*>(bytes.data()),
              static_cast<std::streamsize>(bytes.size()));
    if (!out) {
        throw IoError("write failed: " + path);
    }
}

}  // namespace

std::vector<std::uint8_t> encode_exchange_message(const ExchangeMessage& msg) {
    const std::size_t embed_dim = msg.features.empty() ? 0 : msg.features.front().vec.size();
    for (const Feature& f : msg.features) {
        if (f.vec.size() != embed_dim) {
            throw DimensionError("encode_exchange_message: inconsistent embedding lengths");
        }
    }
    std::vector<std::uint8_t> out;
    out.reserve(exchange_message_size(msg.features.size(), embed_dim));
    out.insert(out.end(), {'F', 'C', 'L', 'X'});
    put_u32(out, kFormatVersion);
    put_u32(out, msg.sender_id);
    put_u32(out, msg.round_index);
    put_u32(out, static_cast<std::uint32_t>(msg.features.size()));
    put_u32(out, static_cast<std::uint32_t>(embed_dim));
    for (const Feature& f : msg.features) {
        for (double v : f.vec) {
            put_f32(out, static_cast<float>(v));
        }
    }
    for (const Feature& f : msg.features) {
        put_u32(out, f.volume_id);
        put_u16(out, f.partition_id);
    }
    return out;
}

ExchangeMessage decode_exchange_message(std::span<const std::uint8_t> bytes) {
    Reader r(bytes, "FCLX");
    r.magic("FCLX");
    r.version(kFormatVersion);
    ExchangeMessage msg;
    msg.sender_id = r.u32();
    msg.round_index = r.u32();
    const std::uint32_t count = r.u32();
    const std::uint32_t embed_dim = r.u32();
    if (bytes.size() != exchange_message_size(count, embed_dim)) {
        throw IoError("FCLX: length does not match header counts");
    }
    msg.features.resize(count);
    for (Feature& f : msg.features) {
        f.client_id = msg.sender_id;
        f.vec.resize(embed_dim);
        for (double& v : f.vec) {
            v = static_cast<double>(r.f32());
        }
    }
    for (Feature& f : msg.features) {
        f.volume_id = r.u32();
        f.partition_id = r.u16();
    }
    r.finish();
    return msg;
}

std::vector<std::uint8_t> encode_checkpoint(const EncoderParams& params) {
    std::vector<std::uint8_t> out;
    const Vec64 flat = params.flatten();
    out.reserve(20 + flat.size() * 8);
    out.insert(out.end(), {'F', 'C', 'L', 'P'});
    put_u32(out, kFormatVersion);
    put_u32(out, static_cast<std::uint32_t>(params.dims.input));
    put_u32(out, static_cast<std::uint32_t>(params.dims.hidden));
    put_u32(out, static_cast<std::uint32_t>(params.dims.embed));
    for (double v : flat) {
        put_f64(out, v);
    }
    return out;
}

EncoderParams decode_checkpoint(std::span<const std::uint8_t> bytes) {
    Reader r(bytes, "FCLP");
    r.magic("FCLP");
    r.version(kFormatVersion);
    EncoderDims dims;
    dims.input = r.u32();
    dims.hidden = r.u32();
    dims.embed = r.u32();
    if (dims.input == 0 || dims.hidden == 0 || dims.embed == 0) {
        throw IoError("FCLP: zero dimension in header");
    }

    EncoderParams probe = EncoderParams::zeros(dims);
    Vec64 flat(probe.param_count());
    if (bytes.size() != 20 + flat.size() * 8) {
        throw IoError("FCLP: length does not match dims");
    }
    for (double& v : flat) {
        v = r.f64();
    }
    r.finish();
    return EncoderParams::unflatten(dims, flat);
}

void save_checkpoint(const std::string& path, const EncoderParams& params) {
    write_file(path, encode_checkpoint(params));
}

EncoderParams load_checkpoint(const std::string& path) {
    return decode_checkpoint(read_file(path));
}

void save_client_volumes(const std::string& path, const std::vector<Volume>& shard) {
    if (shard.empty()) {
        throw ContractError("save_client_volumes: empty shard");
    }
    const std::size_t slices = shard.front().slices.size();
    const std::size_t side = shard.front().image_side;
    std::vector<std::uint8_t> out;
    out.insert(out.end(), {'F', 'C', 'L', 'D'});
    put_u32(out, kFormatVersion);
    put_u32(out, shard.front().client_id);
    put_u32(out, static_cast<std::uint32_t>(shard.size()));
    put_u32(out, static_cast<std::uint32_t>(slices));
    put_u32(out, static_cast<std::uint32_t>(side));
    for (const Volume& v : shard) {
        if (v.slices.size() != slices || v.image_side != side) {
            throw DimensionError("save_client_volumes: ragged shard");
        }
        put_u32(out, v.volume_id);
        for (const Vec64& slice : v.slices) {
            for (double p : slice) {
                put_f32(out, static_cast<float>(p));
            }
        }
    }
    write_file(path, out);
}

std::vector<Volume> load_client_volumes(const std::string& path) {
    const std::vector<std::uint8_t> bytes = read_file(path);
    Reader r(bytes, "FCLD");
    r.magic("FCLD");
    r.version(kFormatVersion);
    const std::uint32_t client_id = r.u32();
    const std::uint32_t num_volumes = r.u32();
    const std::uint32_t slices = r.u32();
    const std::uint32_t side = r.u32();
    std::vector<Volume> shard;
    shard.reserve(num_volumes);
    for (std::uint32_t v = 0; v < num_volumes; ++v) {
        Volume volume;
        volume.client_id = client_id;
        volume.volume_id = r.u32();
        volume.image_side = side;
        volume.slices.resize(slices);
        for (Vec64& slice : volume.slices) {
            slice.resize(static_cast<std::size_t>(side) * side);
            for (double& p : slice) {
                p = static_cast<double>(r.f32());
            }
        }
        shard.push_back(std::move(volume));
    }
    r.finish();
    return shard;
}

}  // namespace fcl
