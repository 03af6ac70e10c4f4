#include "oblivagg/transport.hpp"

#include <gtest/gtest.h>

#include <algorithm>
#include <cstdint>
#include <fstream>
#include <sstream>
#include <vector>

#include "oblivagg/dealer.hpp"
#include "oblivagg/errors.hpp"
#include "oblivagg/field.hpp"
#include "oblivagg/protocol.hpp"
#include "oblivagg/rng.hpp"

namespace oblivagg {
namespace {

FieldVector vec(std::uint64_t q, std::vector<std::uint64_t> elems) {
    return FieldVector(FieldSpec(q), std::move(elems));
}

std::vector<std::uint8_t> read_file(const std::string& name) {
    std::ifstream in(std::string(OBLIVAGG_GOLDEN_DIR) + "/" + name, std::ios::binary);
    EXPECT_TRUE(in.is_open()) << name;
    return std::vector<std::uint8_t>(std::istreambuf_iterator<char>(in),
                                     std::istreambuf_iterator<char>());
}

TEST(Frames, RoundTrip) {
    const Frame frame{FrameType::PhaseOne, {1, 2, 3, 0xFF}};
    EXPECT_EQ(decode_frame(encode_frame(frame)), frame);
    const Frame empty{FrameType::SessionHello, {}};
    EXPECT_EQ(decode_frame(encode_frame(empty)), empty);
}

TEST(Frames, RejectsMalformedBytes) {
    EXPECT_THROW(decode_frame(std::vector<std::uint8_t>{1, 0, 0}), WireFormatError);

    std::vector<std::uint8_t> unknown_tag = encode_frame(Frame{FrameType::PhaseOne, {7}});
    unknown_tag[4] = 0x77;
    EXPECT_THROW(decode_frame(unknown_tag), WireFormatError);

    std::vector<std::uint8_t> truncated = encode_frame(Frame{FrameType::PhaseOne, {7, 8}});
    truncated.pop_back();
    EXPECT_THROW(decode_frame(truncated), WireFormatError);

    std::vector<std::uint8_t> trailing = encode_frame(Frame{FrameType::PhaseOne, {7}});
    trailing.push_back(0);
    EXPECT_THROW(decode_frame(trailing), WireFormatError);
}

TEST(PhaseOneCodec, GoldenBytes) {
    const SessionParams params(8, FieldSpec(257), 2, Scheme::NoDropout);
    const PhaseOneMsg msg{7, vec(257, {255, 256})};
    const std::vector<std::uint8_t> payload = encode_phase_one(msg, params);
    const std::vector<std::uint8_t> expected = {0x07, 0x00, 0x00, 0x00, 0xFF, 0x00, 0x00, 0x01};
    EXPECT_EQ(payload, expected);

    const std::vector<std::uint8_t> frame_bytes =
        encode_frame(Frame{FrameType::PhaseOne, payload});
    EXPECT_EQ(frame_bytes, read_file("phase_one_frame.bin"));

    const Frame frame = decode_frame(read_file("phase_one_frame.bin"));
    ASSERT_EQ(frame.type, FrameType::PhaseOne);
    EXPECT_EQ(decode_phase_one(frame.payload, params), msg);
}

TEST(PhaseTwoCodec, GoldenBytes) {
    const SessionParams params(3, FieldSpec(5), 1, Scheme::DropoutTolerant);
    const PhaseTwoMsg msg{SurvivorSet({1, 3}, 3), vec(5, {0})};
    const std::vector<std::uint8_t> payload = encode_phase_two(msg, params);
    const std::vector<std::uint8_t> expected = {0x02, 0x00, 0x00, 0x00, 0x01, 0x00, 0x00,
                                                0x00, 0x03, 0x00, 0x00, 0x00, 0x00};
    EXPECT_EQ(payload, expected);

    EXPECT_EQ(encode_frame(Frame{FrameType::PhaseTwo, payload}),
              read_file("phase_two_frame.bin"));

    const Frame frame = decode_frame(read_file("phase_two_frame.bin"));
    ASSERT_EQ(frame.type, FrameType::PhaseTwo);
    EXPECT_EQ(decode_phase_two(frame.payload, params), msg);
}

TEST(PhaseOneCodec, RejectsMalformedPayloads) {
    const SessionParams params(3, FieldSpec(5), 1, Scheme::NoDropout);
    const std::vector<std::uint8_t> good = encode_phase_one(PhaseOneMsg{2, vec(5, {4})}, params);

    std::vector<std::uint8_t> bad_id = good;
    bad_id[0] = 9;
    EXPECT_THROW(decode_phase_one(bad_id, params), WireFormatError);

    std::vector<std::uint8_t> element_at_modulus = good;
    element_at_modulus[4] = 5;
    EXPECT_THROW(decode_phase_one(element_at_modulus, params), WireFormatError);

    std::vector<std::uint8_t> truncated(good.begin(), good.end() - 1);
    EXPECT_THROW(decode_phase_one(truncated, params), WireFormatError);

    std::vector<std::uint8_t> trailing = good;
    trailing.push_back(0);
    EXPECT_THROW(decode_phase_one(trailing, params), WireFormatError);
}

TEST(PhaseTwoCodec, RejectsMalformedSurvivorSets) {
    const SessionParams params(3, FieldSpec(5), 1, Scheme::DropoutTolerant);
    const PhaseTwoMsg msg{SurvivorSet({1, 3}, 3), vec(5, {0})};
    const std::vector<std::uint8_t> good = encode_phase_two(msg, params);

    std::vector<std::uint8_t> duplicate = good;
    duplicate[8] = 1;  // ids become {1, 1}
    EXPECT_THROW(decode_phase_two(duplicate, params), WireFormatError);

    std::vector<std::uint8_t> unsorted = good;
    unsorted[4] = 3;
    unsorted[8] = 1;
    EXPECT_THROW(decode_phase_two(unsorted, params), WireFormatError);

    std::vector<std::uint8_t> out_of_range = good;
    out_of_range[8] = 4;
    EXPECT_THROW(decode_phase_two(out_of_range, params), WireFormatError);

    std::vector<std::uint8_t> empty_set = good;
    empty_set[0] = 0;
    EXPECT_THROW(decode_phase_two(empty_set, params), WireFormatError);
}

TEST(SessionHelloCodec, GoldenBytesAndRoundTrip) {
    const SessionParams params(3, FieldSpec(5), 1, Scheme::DropoutTolerant);
    const SessionHello hello = SessionHello::for_session(params);
    const std::vector<std::uint8_t> bytes = encode_session_hello(hello);
    const std::vector<std::uint8_t> expected = {0x01, 0x01, 0x03, 0x00, 0x00, 0x00, 0x01, 0x00,
                                                0x00, 0x00, 0x05, 0x00, 0x00, 0x00, 0x00, 0x00,
                                                0x00, 0x00};
    EXPECT_EQ(bytes, expected);
    EXPECT_EQ(decode_session_hello(bytes), hello);
}

TEST(Codecs, RoundTripUnderFuzz) {
    DeterministicRng rng(8080);
    const std::vector<std::uint64_t> primes = {2, 5, 257, 65537, 9223372036854775783ULL};
    for (int iter = 0; iter < 2000; ++iter) {
        const FieldSpec spec(primes[rng.below(primes.size())]);
        const auto user_count = static_cast<std::uint32_t>(2 + rng.below(7));
        const auto input_len = static_cast<std::uint32_t>(1 + rng.below(4));
        const Scheme scheme = rng.below(2) == 0 ? Scheme::NoDropout : Scheme::DropoutTolerant;
        const SessionParams params(user_count, spec, input_len, scheme);

        const PhaseOneMsg uplink{static_cast<std::uint32_t>(1 + rng.below(user_count)),
                                 sample_uniform(spec, input_len, rng)};
        const Frame uplink_frame{FrameType::PhaseOne, encode_phase_one(uplink, params)};
        const Frame uplink_back = decode_frame(encode_frame(uplink_frame));
        EXPECT_EQ(decode_phase_one(uplink_back.payload, params), uplink);

        std::vector<std::uint32_t> ids;
        for (std::uint32_t id = 1; id <= user_count; ++id) {
            if (rng.below(2) == 0) {
                ids.push_back(id);
            }
        }
        if (ids.empty()) {
            ids.push_back(static_cast<std::uint32_t>(1 + rng.below(user_count)));
        }
        const PhaseTwoMsg downlink{SurvivorSet(ids, user_count),
                                   sample_uniform(spec, input_len, rng)};
        const Frame downlink_frame{FrameType::PhaseTwo, encode_phase_two(downlink, params)};
        const Frame downlink_back = decode_frame(encode_frame(downlink_frame));
        EXPECT_EQ(decode_phase_two(downlink_back.payload, params), downlink);

        const SessionHello hello = SessionHello::for_session(params);
        EXPECT_EQ(decode_session_hello(encode_session_hello(hello)), hello);
    }
}

TEST(StreamAdapter, CarriesFramesBackToBack) {
    std::stringstream channel(std::ios::in | std::ios::out | std::ios::binary);
    const Frame a{FrameType::PhaseOne, {1, 2, 3}};
    const Frame b{FrameType::SessionHello, {}};
    const Frame c{FrameType::PhaseTwo, {9}};
    write_frame(channel, a);
    write_frame(channel, b);
    write_frame(channel, c);
    channel.seekg(0);
    EXPECT_EQ(read_frame(channel), a);
    EXPECT_EQ(read_frame(channel), b);
    EXPECT_EQ(read_frame(channel), c);
    EXPECT_EQ(read_frame(channel), std::nullopt);
}

TEST(StreamAdapter, TruncationIsAnError) {
    std::stringstream channel(std::ios::in | std::ios::out | std::ios::binary);
    const std::vector<std::uint8_t> bytes = encode_frame(Frame{FrameType::PhaseOne, {1, 2, 3}});
    channel.write(reinterpret_cast<const char*>(bytes.data()),
                  static_cast<std::streamsize>(bytes.size() - 1));
    channel.seekg(0);
    EXPECT_THROW(read_frame(channel), WireFormatError);
}

TEST(RunSession, FullGroupSum) {
    const SessionParams params(3, FieldSpec(5), 1, Scheme::NoDropout);
    const std::vector<FieldVector> inputs = {vec(5, {1}), vec(5, {2}), vec(5, {3})};
    const SessionOutcome outcome = run_session(params, inputs, DropPlan{}, 7);
    EXPECT_TRUE(outcome.survivors.is_full(3));
    ASSERT_EQ(outcome.decoded.size(), 3U);
    for (const auto& [id, sum] : outcome.decoded) {
        EXPECT_EQ(sum, vec(5, {1}));
    }
}

TEST(RunSession, SurvivorsDecodeTheSubsetSum) {
    const SessionParams params(3, FieldSpec(5), 1, Scheme::DropoutTolerant);
    const std::vector<FieldVector> inputs = {vec(5, {1}), vec(5, {2}), vec(5, {3})};
    DropPlan plan;
    plan.before_send = {2};
    const SessionOutcome outcome = run_session(params, inputs, plan, 7);
    EXPECT_EQ(outcome.survivors, SurvivorSet({1, 3}, 3));
    ASSERT_EQ(outcome.decoded.size(), 2U);
    EXPECT_EQ(outcome.decoded.at(1), vec(5, {4}));
    EXPECT_EQ(outcome.decoded.at(3), vec(5, {4}));
}

TEST(RunSession, AfterSendDropsStayInSurvivorSetButDoNotDecode) {
    const SessionParams params(3, FieldSpec(5), 1, Scheme::DropoutTolerant);
    const std::vector<FieldVector> inputs = {vec(5, {1}), vec(5, {2}), vec(5, {3})};
    DropPlan plan;
    plan.after_send = {2};
    const SessionOutcome outcome = run_session(params, inputs, plan, 7);
    EXPECT_TRUE(outcome.survivors.is_full(3));
    EXPECT_FALSE(outcome.decoded.contains(2));
    EXPECT_EQ(outcome.decoded.at(1), vec(5, {1}));  // 6 mod 5: user 2 counted
    EXPECT_EQ(outcome.decoded.at(3), vec(5, {1}));
}

TEST(RunSession, NoDropoutSchemePropagatesTheHardError) {
    const SessionParams params(3, FieldSpec(5), 1, Scheme::NoDropout);
    const std::vector<FieldVector> inputs = {vec(5, {1}), vec(5, {2}), vec(5, {3})};
    DropPlan plan;
    plan.before_send = {2};
    EXPECT_THROW(run_session(params, inputs, plan, 7), DroppedUserUnderNoDropoutScheme);
}

TEST(RunSession, RejectsIncoherentDropPlans) {
    const SessionParams params(3, FieldSpec(5), 1, Scheme::DropoutTolerant);
    const std::vector<FieldVector> inputs = {vec(5, {1}), vec(5, {2}), vec(5, {3})};
    DropPlan overlapping;
    overlapping.before_send = {2};
    overlapping.after_send = {2};
    EXPECT_THROW(run_session(params, inputs, overlapping, 7), ConfigError);
    DropPlan unknown;
    unknown.before_send = {9};
    EXPECT_THROW(run_session(params, inputs, unknown, 7), ConfigError);
}

TEST(RunSession, MatchesDirectRecomputationUnderRandomDrops) {
    const SessionParams params(5, FieldSpec(97), 8, Scheme::DropoutTolerant);
    DeterministicRng rng(2025);
    for (int trial = 0; trial < 1000; ++trial) {
        std::vector<FieldVector> inputs;
        for (int k = 0; k < 5; ++k) {
            inputs.push_back(sample_uniform(params.spec, params.input_len, rng));
        }
        DropPlan plan;
        for (std::uint32_t k = 1; k <= 5; ++k) {
            const std::uint64_t die = rng.below(5);
            if (die == 0) {
                plan.before_send.insert(k);
            } else if (die == 1) {
                plan.after_send.insert(k);
            }
        }
        if (plan.before_send.size() == 5) {
            plan.before_send.erase(1);
        }
        const SessionOutcome outcome = run_session(params, inputs, plan, 50000 + trial);

        std::vector<FieldVector> surviving;
        for (std::uint32_t k = 1; k <= 5; ++k) {
            if (!plan.before_send.contains(k)) {
                surviving.push_back(inputs[k - 1]);
            }
        }
        const FieldVector expected = sum_vectors(surviving);
        ASSERT_EQ(outcome.survivors.size(), surviving.size());
        for (std::uint32_t id : outcome.survivors.ids()) {
            if (plan.after_send.contains(id)) {
                EXPECT_FALSE(outcome.decoded.contains(id));
            } else {
                EXPECT_EQ(outcome.decoded.at(id), expected);
            }
        }
    }
}

TEST(RunSession, BroadcastAndUnicastAgree) {
    const std::vector<FieldVector> inputs = {vec(97, {10}), vec(97, {20}), vec(97, {30}),
                                             vec(97, {96})};
    DropPlan plan;
    plan.before_send = {3};
    const SessionParams unicast(4, FieldSpec(97), 1, Scheme::DropoutTolerant, false);
    const SessionParams broadcast(4, FieldSpec(97), 1, Scheme::DropoutTolerant, true);
    EXPECT_EQ(run_session(unicast, inputs, plan, 15), run_session(broadcast, inputs, plan, 15));
}

TEST(RunSession, DeterministicUnderFixedSeed) {
    const SessionParams params(4, FieldSpec(257), 2, Scheme::DropoutTolerant);
    DeterministicRng rng(64);
    std::vector<FieldVector> inputs;
    for (int k = 0; k < 4; ++k) {
        inputs.push_back(sample_uniform(params.spec, params.input_len, rng));
    }
    DropPlan plan;
    plan.before_send = {4};
    EXPECT_EQ(run_session(params, inputs, plan, 123), run_session(params, inputs, plan, 123));
}

TEST(RunSession, ByteStreamTransportAgreesWithInProcess) {
    const SessionParams params(3, FieldSpec(65537), 4, Scheme::DropoutTolerant);
    DeterministicRng rng(77);
    std::vector<FieldVector> inputs;
    for (int k = 0; k < 3; ++k) {
        inputs.push_back(sample_uniform(params.spec, params.input_len, rng));
    }
    DropPlan plan;
    plan.after_send = {1};
    EXPECT_EQ(run_session(params, inputs, plan, 5, TransportKind::InProcess),
              run_session(params, inputs, plan, 5, TransportKind::ByteStream));
}

// Delivery order within a phase must not matter: feed the server the same
// uplinks in every permutation and compare replies.
TEST(DeliveryOrder, ShuffledUplinksGiveIdenticalReplies) {
    const SessionParams params(4, FieldSpec(11), 1, Scheme::DropoutTolerant);
    DeterministicRng rng(31);
    const SourceKey src = generate_source_key(params, rng);
    std::vector<PhaseOneMsg> msgs;
    for (std::uint32_t k = 1; k <= 4; ++k) {
        UserState st(params, k, sample_uniform(params.spec, 1, rng),
                     derive_user_key(src, k, params));
        msgs.push_back(user_phase_one(st));
    }

    std::vector<std::size_t> order = {0, 1, 2, 3};
    std::map<std::uint32_t, PhaseTwoMsg> first_replies;
    bool have_first = false;
    do {
        ServerState server(params);
        for (std::size_t i : order) {
            server.receive(msgs[i]);
        }
        const auto replies = server_close_and_reply(server);
        if (!have_first) {
            first_replies = replies;
            have_first = true;
        } else {
            EXPECT_EQ(replies, first_replies);
        }
    } while (std::next_permutation(order.begin(), order.end()));
}

}  // namespace
}  // namespace oblivagg
