#pragma once

#include <cstdint>
#include <map>
#include <span>
#include <vector>

#include "oblivagg/dealer.hpp"
#include "oblivagg/field.hpp"

namespace oblivagg {

/// Uplink message: the user's input masked by its own noise vector.
struct PhaseOneMsg {
    std::uint32_t user_id = 0;
    FieldVector payload;

    friend bool operator==(const PhaseOneMsg&, const PhaseOneMsg&) = default;
};

/// Nonempty sorted subset of [1, K]: the users whose uplink the server saw.
class SurvivorSet {
public:
    SurvivorSet(std::vector<std::uint32_t> ids, std::uint32_t user_count);

    static SurvivorSet full(std::uint32_t user_count);

    const std::vector<std::uint32_t>& ids() const noexcept { return ids_; }
    std::size_t size() const noexcept { return ids_.size(); }
    bool contains(std::uint32_t id) const;
    bool is_full(std::uint32_t user_count) const;

    friend bool operator==(const SurvivorSet&, const SurvivorSet&) = default;

private:
    std::vector<std::uint32_t> ids_;
};

/// Downlink message: the survivor set and the masked survivor sum. The
/// payload is identical for every recipient in a session.
struct PhaseTwoMsg {
    SurvivorSet survivors;
    FieldVector payload;

    friend bool operator==(const PhaseTwoMsg&, const PhaseTwoMsg&) = default;
};

enum class UserPhase { Fresh, Sent, Decoded };
enum class ServerPhase { Collecting, Closed };

/// One user's view of a session. Phases only move Fresh -> Sent -> Decoded.
class UserState {
public:
    UserState(SessionParams params, std::uint32_t user_id, FieldVector input, UserKey key);

    const SessionParams& params() const noexcept { return params_; }
    std::uint32_t user_id() const noexcept { return user_id_; }
    const FieldVector& input() const noexcept { return input_; }
    const UserKey& key() const noexcept { return key_; }
    UserPhase phase() const noexcept { return phase_; }

    friend PhaseOneMsg user_phase_one(UserState& st);
    friend FieldVector user_decode(UserState& st, const PhaseTwoMsg& msg);

private:
    SessionParams params_;
    std::uint32_t user_id_;
    FieldVector input_;
    UserKey key_;
    UserPhase phase_ = UserPhase::Fresh;
};

/// The oblivious server: collects uplinks, then replies with their sum.
/// Deliveries from concurrent sources must be serialized by the caller.
class ServerState {
public:
    explicit ServerState(SessionParams params);

    const SessionParams& params() const noexcept { return params_; }
    ServerPhase phase() const noexcept { return phase_; }
    const std::map<std::uint32_t, PhaseOneMsg>& received() const noexcept { return received_; }

    /// Accepts one uplink per user while collecting.
    void receive(PhaseOneMsg msg);

    friend std::map<std::uint32_t, PhaseTwoMsg> server_close_and_reply(ServerState& st);

private:
    SessionParams params_;
    std::map<std::uint32_t, PhaseOneMsg> received_;
    ServerPhase phase_ = ServerPhase::Collecting;
};

/// Masks the input with the user's own noise and advances to Sent.
PhaseOneMsg user_phase_one(UserState& st);

/// Fixes the survivor set as the ids received, and hands every survivor the
/// same masked sum. Under NoDropout a missing user is a hard error: those
/// keys cannot decode subset sums.
std::map<std::uint32_t, PhaseTwoMsg> server_close_and_reply(ServerState& st);

/// Strips the noise total for the survivor set and returns the survivor
/// input sum; advances to Decoded.
FieldVector user_decode(UserState& st, const PhaseTwoMsg& msg);

/// Inverts the map from inputs to leave-one-out subset sums: given W_1 and
/// (sum over [K], sum over [K]\{K}, sum over [K]\{K-1}, ..., sum over
/// [K]\{3}), recovers (W_1, ..., W_K). Test-facing.
std::vector<FieldVector> reconstruct_inputs(const FieldVector& first_input,
                                            std::span<const FieldVector> subset_sums,
                                            std::uint32_t user_count);

}  // namespace oblivagg
