#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <cstdio>
#include <filesystem>

#include "fcl/errors.hpp"
#include "fcl/rng.hpp"
#include "fcl/serialize.hpp"

using namespace fcl;

namespace {

std::filesystem::path temp_file(const char* name) {
    return std::filesystem::temp_directory_path() / name;
}

ExchangeMessage sample_message(std::size_t count, std::size_t dim, std::uint64_t seed) {
    Rng rng(seed);
    ExchangeMessage msg;
    msg.sender_id = 3;
    msg.round_index = 7;
    for (std::size_t i = 0; i < count; ++i) {
        Vec64 v(dim);
        for (double& x : v) {
            x = rng.normal();
        }
        msg.features.push_back(Feature{l2_normalize(v), msg.sender_id,
                                       static_cast<std::uint32_t>(i),
                                       static_cast<std::uint16_t>(i % 4)});
    }
    return msg;
}

}  // namespace

TEST_CASE("FCLX byte layout is pinned") {
    ExchangeMessage msg;
    msg.sender_id = 3;
    msg.round_index = 7;
    // 0.5 and -0.25 are exact in f32, so the fixture is stable.
    msg.features.push_back(Feature{{0.5, -0.25}, 3, 9, 2});

    const std::vector<std::uint8_t> bytes = encode_exchange_message(msg);
    const std::vector<std::uint8_t> expected = {
        'F',  'C',  'L',  'X',              // magic
        0x01, 0x00, 0x00, 0x00,             // version
        0x03, 0x00, 0x00, 0x00,             // sender
        0x07, 0x00, 0x00, 0x00,             // round
        0x01, 0x00, 0x00, 0x00,             // count
        0x02, 0x00, 0x00, 0x00,             // embed_dim
        0x00, 0x00, 0x00, 0x3f,             // f32 0.5
        0x00, 0x00, 0x80, 0xbe,             // f32 -0.25
        0x09, 0x00, 0x00, 0x00,             // volume_id
        0x02, 0x00,                         // partition_id
    };
    CHECK(bytes == expected);
    CHECK(bytes.size() == exchange_message_size(1, 2));

    const ExchangeMessage back = decode_exchange_message(bytes);
    CHECK(back.sender_id == 3);
    CHECK(back.round_index == 7);
    REQUIRE(back.features.size() == 1);
    CHECK(back.features[0].vec == Vec64{0.5, -0.25});
    CHECK(back.features[0].client_id == 3);
    CHECK(back.features[0].volume_id == 9);
    CHECK(back.features[0].partition_id == 2);
}

TEST_CASE("FCLX round-trip stays within f32 quantization") {
    const ExchangeMessage msg = sample_message(24, 32, 11);
    const ExchangeMessage back = decode_exchange_message(encode_exchange_message(msg));
    REQUIRE(back.features.size() == msg.features.size());
    double worst = 0.0;
    for (std::size_t i = 0; i < msg.features.size(); ++i) {
        CHECK(back.features[i].volume_id == msg.features[i].volume_id);
        CHECK(back.features[i].partition_id == msg.features[i].partition_id);
        CHECK(back.features[i].client_id == msg.sender_id);
        for (std::size_t d = 0; d < 32; ++d) {
            worst = std::max(worst, std::abs(back.features[i].vec[d] - msg.features[i].vec[d]));
        }
    }
    CHECK(worst < 1e-6);

    // A second pass through the codec is lossless: f32 values survive.
    const ExchangeMessage again = decode_exchange_message(encode_exchange_message(back));
    for (std::size_t i = 0; i < back.features.size(); ++i) {
        CHECK(again.features[i].vec == back.features[i].vec);
    }
}

TEST_CASE("FCLX rejects malformed buffers") {
    std::vector<std::uint8_t> bytes = encode_exchange_message(sample_message(4, 8, 3));

    std::vector<std::uint8_t> bad_magic = bytes;
    bad_magic[0] = 'X';
    CHECK_THROWS_AS(decode_exchange_message(bad_magic), IoError);

    std::vector<std::uint8_t> bad_version = bytes;
    bad_version[4] = 9;
    CHECK_THROWS_AS(decode_exchange_message(bad_version), IoError);

    std::vector<std::uint8_t> truncated(bytes.begin(), bytes.end() - 3);
    CHECK_THROWS_AS(decode_exchange_message(truncated), IoError);

    // Any extra payload is rejected outright; there is no room for
    // anything except features in this format.
    std::vector<std::uint8_t> padded = bytes;
    padded.push_back(0);
    CHECK_THROWS_AS(decode_exchange_message(padded), IoError);

    const ExchangeMessage empty_ok =
        decode_exchange_message(encode_exchange_message(ExchangeMessage{5, 2, {}}));
    CHECK(empty_ok.features.empty());
}

TEST_CASE("FCLP checkpoint round-trips bit-exactly") {
    const EncoderDims dims{6, 5, 4};
    Rng rng(21);
    const EncoderParams params = EncoderParams::init(dims, rng);

    const std::vector<std::uint8_t> bytes = encode_checkpoint(params);
    CHECK(bytes.size() == 20 + params.param_count() * 8);
    const EncoderParams back = decode_checkpoint(bytes);
    CHECK(back == params);

    const auto path = temp_file("fcl_test_checkpoint.fclp");
    save_checkpoint(path.string(), params);
    CHECK(load_checkpoint(path.string()) == params);
    std::filesystem::remove(path);

    std::vector<std::uint8_t> corrupt = bytes;
    corrupt[1] = 'X';
    CHECK_THROWS_AS(decode_checkpoint(corrupt), IoError);
    std::vector<std::uint8_t> short_payload(bytes.begin(), bytes.end() - 8);
    CHECK_THROWS_AS(decode_checkpoint(short_payload), IoError);
    CHECK_THROWS_AS(load_checkpoint("/nonexistent/path.fclp"), IoError);
}

TEST_CASE("FCLD dataset dump round-trips within f32") {
    SyntheticConfig cfg;
    cfg.num_clients = 1;
    cfg.volumes_per_client = 3;
    cfg.slices_per_volume = 4;
    cfg.partitions = 2;
    cfg.image_side = 4;
    cfg.seed = 5;
    const auto data = generate_dataset(cfg);

    const auto path = temp_file("fcl_test_client0.fcld");
    save_client_volumes(path.string(), data[0]);
    const std::vector<Volume> back = load_client_volumes(path.string());
    std::filesystem::remove(path);

    REQUIRE(back.size() == data[0].size());
    for (std::size_t v = 0; v < back.size(); ++v) {
        CHECK(back[v].volume_id == data[0][v].volume_id);
        CHECK(back[v].client_id == data[0][v].client_id);
        REQUIRE(back[v].slices.size() == data[0][v].slices.size());
        for (std::size_t i = 0; i < back[v].slices.size(); ++i) {
            for (std::size_t p = 0; p < back[v].slices[i].size(); ++p) {
                CHECK(std::abs(back[v].slices[i][p] - data[0][v].slices[i][p]) < 1e-6);
            }
        }
    }
}
