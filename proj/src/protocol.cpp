#include "oblivagg/protocol.hpp"

#include <algorithm>
#include <numeric>
#include <string>
#include <utility>

#include "oblivagg/errors.hpp"

namespace oblivagg {

namespace {

void check_payload_shape(const FieldVector& payload, const SessionParams& params) {
    if (payload.spec() != params.spec) {
        throw SpecMismatchError("payload field does not match session");
    }
    if (payload.size() != params.input_len) {
        throw LengthMismatchError("payload length " + std::to_string(payload.size()) +
                                  " does not match session length " +
                                  std::to_string(params.input_len));
    }
}

const FieldVector& own_noise_of(const UserKey& key, std::uint32_t user_id) {
    if (const auto* nd = std::get_if<NoDropoutKey>(&key.payload)) {
        return nd->own_noise;
    }
    return std::get<DropoutTolerantKey>(key.payload).all_noise[user_id - 1];
}

}  // namespace

SurvivorSet::SurvivorSet(std::vector<std::uint32_t> ids, std::uint32_t user_count)
    : ids_(std::move(ids)) {
    if (ids_.empty()) {
        throw SurvivorSetError("survivor set must be nonempty");
    }
    std::sort(ids_.begin(), ids_.end());
    if (std::adjacent_find(ids_.begin(), ids_.end()) != ids_.end()) {
        throw SurvivorSetError("survivor set has duplicate ids");
    }
    if (ids_.front() < 1 || ids_.back() > user_count) {
        throw SurvivorSetError("survivor ids must lie in 1.." + std::to_string(user_count));
    }
}

SurvivorSet SurvivorSet::full(std::uint32_t user_count) {
    std::vector<std::uint32_t> ids(user_count);
    std::iota(ids.begin(), ids.end(), 1U);
    return SurvivorSet(std::move(ids), user_count);
}

bool SurvivorSet::contains(std::uint32_t id) const {
    return std::binary_search(ids_.begin(), ids_.end(), id);
}

bool SurvivorSet::is_full(std::uint32_t user_count) const {
    return ids_.size() == user_count;
}

UserState::UserState(SessionParams params, std::uint32_t user_id, FieldVector input, UserKey key)
    : params_(std::move(params)), user_id_(user_id), input_(std::move(input)), key_(std::move(key)) {
    if (user_id_ < 1 || user_id_ > params_.user_count) {
        throw ConfigError("user id " + std::to_string(user_id_) + " is outside 1.." +
                          std::to_string(params_.user_count));
    }
    check_payload_shape(input_, params_);
    if (key_.scheme() != params_.scheme) {
        throw KeyMismatchError("key scheme does not match session scheme");
    }
    if (key_.user_id != user_id_) {
        throw KeyMismatchError("key belongs to user " + std::to_string(key_.user_id) +
                               ", not user " + std::to_string(user_id_));
    }
    const std::size_t expected = params_.scheme == Scheme::NoDropout
                                     ? 2ULL * params_.input_len
                                     : static_cast<std::size_t>(params_.user_count) *
                                           params_.input_len;
    if (key_.symbol_count() != expected) {
        throw KeyMismatchError("key holds " + std::to_string(key_.symbol_count()) +
                               " symbols, session requires " + std::to_string(expected));
    }
}

PhaseOneMsg user_phase_one(UserState& st) {
    if (st.phase_ != UserPhase::Fresh) {
        throw PhaseError("user " + std::to_string(st.user_id_) + " already sent its uplink");
    }
    PhaseOneMsg msg{st.user_id_, add(st.input_, own_noise_of(st.key_, st.user_id_))};
    st.phase_ = UserPhase::Sent;
    return msg;
}

ServerState::ServerState(SessionParams params) : params_(std::move(params)) {}

void ServerState::receive(PhaseOneMsg msg) {
    if (phase_ != ServerPhase::Collecting) {
        throw PhaseError("server already closed collection");
    }
    if (msg.user_id < 1 || msg.user_id > params_.user_count) {
        throw ProtocolError("uplink from unknown user " + std::to_string(msg.user_id));
    }
    check_payload_shape(msg.payload, params_);
    if (received_.contains(msg.user_id)) {
        throw ProtocolError("duplicate uplink from user " + std::to_string(msg.user_id));
    }
    received_.emplace(msg.user_id, std::move(msg));
}

std::map<std::uint32_t, PhaseTwoMsg> server_close_and_reply(ServerState& st) {
    if (st.phase_ != ServerPhase::Collecting) {
        throw PhaseError("server already closed collection");
    }
    if (st.received_.empty()) {
        throw ProtocolError("no uplinks received; there is nobody to reply to");
    }
    if (st.params_.scheme == Scheme::NoDropout &&
        st.received_.size() != st.params_.user_count) {
        throw DroppedUserUnderNoDropoutScheme(
            "no-dropout session closed with " + std::to_string(st.received_.size()) + " of " +
            std::to_string(st.params_.user_count) + " uplinks");
    }

    std::vector<std::uint32_t> ids;
    std::vector<FieldVector> payloads;
    ids.reserve(st.received_.size());
    payloads.reserve(st.received_.size());
    for (const auto& [id, msg] : st.received_) {
        ids.push_back(id);
        payloads.push_back(msg.payload);
    }
    const SurvivorSet survivors(std::move(ids), st.params_.user_count);
    const FieldVector masked_sum = sum_vectors(payloads);

    std::map<std::uint32_t, PhaseTwoMsg> replies;
    for (std::uint32_t id : survivors.ids()) {
        replies.emplace(id, PhaseTwoMsg{survivors, masked_sum});
    }
    st.phase_ = ServerPhase::Closed;
    return replies;
}

FieldVector user_decode(UserState& st, const PhaseTwoMsg& msg) {
    if (st.phase_ != UserPhase::Sent) {
        throw PhaseError("user " + std::to_string(st.user_id_) +
                         " cannot decode in its current phase");
    }
    check_payload_shape(msg.payload, st.params_);
    if (!msg.survivors.contains(st.user_id_)) {
        throw SurvivorSetError("user " + std::to_string(st.user_id_) +
                               " is not in the survivor set");
    }

    FieldVector survivor_noise = [&] {
        if (const auto* nd = std::get_if<NoDropoutKey>(&st.key_.payload)) {
            if (!msg.survivors.is_full(st.params_.user_count)) {
                throw SurvivorSetError(
                    "no-dropout keys only decode the full-group sum, got a subset reply");
            }
            return nd->noise_total;
        }
        const auto& all = std::get<DropoutTolerantKey>(st.key_.payload).all_noise;
        std::vector<FieldVector> selected;
        selected.reserve(msg.survivors.size());
        for (std::uint32_t id : msg.survivors.ids()) {
            selected.push_back(all[id - 1]);
        }
        return sum_vectors(selected);
    }();

    FieldVector sum = sub(msg.payload, survivor_noise);
    st.phase_ = UserPhase::Decoded;
    return sum;
}

std::vector<FieldVector> reconstruct_inputs(const FieldVector& first_input,
                                            std::span<const FieldVector> subset_sums,
                                            std::uint32_t user_count) {
    if (user_count < 2) {
        throw ConfigError("reconstruction needs at least 2 users");
    }
    if (subset_sums.size() != user_count - 1) {
        throw LengthMismatchError("expected " + std::to_string(user_count - 1) +
                                  " subset sums, got " + std::to_string(subset_sums.size()));
    }
    const FieldVector& total = subset_sums[0];
    for (const FieldVector& v : subset_sums) {
        if (v.spec() != first_input.spec()) {
            throw SpecMismatchError("subset sums must share the first input's field");
        }
        if (v.size() != first_input.size()) {
            throw LengthMismatchError("subset sums must share the first input's length");
        }
    }

    // subset_sums[i] for i >= 1 omits user K+1-i, so that user's input is
    // total - subset_sums[i]; user 2's input is whatever remains.
    std::vector<FieldVector> inputs;
    inputs.reserve(user_count);
    inputs.push_back(first_input);

    std::vector<FieldVector> tail;  // W_3..W_K in ascending user order
    for (std::uint32_t j = 3; j <= user_count; ++j) {
        tail.push_back(sub(total, subset_sums[user_count + 1 - j]));
    }
    FieldVector second = sub(total, first_input);
    for (const FieldVector& w : tail) {
        second = sub(second, w);
    }
    inputs.push_back(std::move(second));
    for (FieldVector& w : tail) {
        inputs.push_back(std::move(w));
    }
    return inputs;
}

}  // namespace oblivagg
