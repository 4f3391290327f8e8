#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "fcl/contrastive.hpp"
#include "fcl/data.hpp"
#include "fcl/encoder.hpp"

namespace fcl {

// Feature vectors shared between clients. Embeddings are quantized to f32 on
// the wire; everything else in the system stays f64.
struct ExchangeMessage {
    std::uint32_t sender_id = 0;
    std::uint32_t round_index = 0;
    std::vector<Feature> features;  // all tagged with sender_id, unit norm
};

// --- FCLX exchange wire format (bit-exact) ---------------------------------
// magic "FCLX" | version u32 | sender u32 | round u32 | count u32 |
// embed_dim u32 | count x embed_dim f32 (vectors, in order) |
// count x { volume_id u32, partition_id u16 }
// All integers and floats little-endian. Total size is exactly
// 24 + count * (4 * embed_dim + 6) bytes; decode rejects anything else.
std::vector<std::uint8_t> encode_exchange_message(const ExchangeMessage& msg);
ExchangeMessage decode_exchange_message(std::span<const std::uint8_t> bytes);

constexpr std::size_t exchange_message_size(std::size_t count, std::size_t embed_dim) {
    return 24 + count * (4 * embed_dim + 6);
}

// --- FCLP parameter checkpoint ----------------------------------------------
// magic "FCLP" | version u32 | input u32 | hidden u32 | embed u32 |
// f64 little-endian parameters in flatten order.
void save_checkpoint(const std::string& path, const EncoderParams& params);
EncoderParams load_checkpoint(const std::string& path);

std::vector<std::uint8_t> encode_checkpoint(const EncoderParams& params);
EncoderParams decode_checkpoint(std::span<const std::uint8_t> bytes);

// --- FCLD dataset dump (debugging only, never read by the protocol) --------
// magic "FCLD" | version u32 | client_id u32 | num_volumes u32 |
// slices_per_volume u32 | image_side u32 | per volume:
// { volume_id u32, slices_per_volume x side^2 f32 pixels }.
void save_client_volumes(const std::string& path, const std::vector<Volume>& shard);
std::vector<Volume> load_client_volumes(const std::string& path);

}  // namespace fcl
