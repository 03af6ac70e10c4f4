#pragma once

#include <cstdint>
#include <memory>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "oblivagg/dealer.hpp"
#include "oblivagg/protocol.hpp"

namespace oblivagg {

// Every verdict below comes from exact integer counting over the full
// product space of inputs and noise, F_q^{KL} x F_q^{KL}. Independence is
// decided by count cross-multiplication and entropy identities by
// uniformity of counts; no floating point, no tolerances.

inline constexpr std::uint64_t kDefaultAuditBudget = 1ULL << 26;

struct AuditOptions {
    /// Hard ceiling on q^(2KL); exceeding it refuses before any allocation.
    std::uint64_t max_states = kDefaultAuditBudget;
    /// Enumeration worker count; 0 picks the hardware concurrency. Results
    /// never depend on this.
    unsigned threads = 0;
};

enum class AuditVerdict {
    Pass,
    /// The constraint held, but conditioning pinned the protected variable
    /// in every cell, so it held vacuously. Distinguished on purpose.
    PassDegenerate,
    Fail,
};

std::string to_string(AuditVerdict verdict);

/// The concrete cell a failed check can point to.
struct Counterexample {
    std::string cell;      // the conditioning assignment, or "(unconditioned)"
    std::string observed;  // the (protected, observed) value pair
    std::uint64_t joint_scaled;      // joint count times the cell total
    std::uint64_t marginal_product;  // product of the two marginal counts
};

struct AuditEntry {
    std::string name;
    std::string statement;  // the identity being checked, spelled out
    AuditVerdict verdict = AuditVerdict::Fail;
    std::uint64_t states_enumerated = 0;
    std::uint64_t cells_examined = 0;
    std::uint64_t degenerate_cells = 0;
    std::optional<Counterexample> counterexample;

    bool passed() const { return verdict != AuditVerdict::Fail; }
};

struct AuditReport {
    std::vector<AuditEntry> entries;

    bool all_passed() const;
    std::string to_text() const;
    std::string to_json_string() const;
};

/// A protocol as the auditor sees it: maps enumerated (inputs, noise)
/// coordinates to keys, messages, and the server's view. The shipped
/// implementation routes through the real dealer and protocol code so the
/// audit exercises the artifact, not a restatement of it.
class SchemeModel {
public:
    explicit SchemeModel(SessionParams params);
    virtual ~SchemeModel() = default;

    const SessionParams& params() const noexcept { return params_; }

    /// The noise the dealer is fed, given the enumerated noise coordinates.
    virtual std::vector<std::uint64_t> effective_noise(
        std::span<const std::uint64_t> noise) const;

    /// Flat key symbols handed to user k.
    virtual std::vector<std::uint64_t> user_key_symbols(std::span<const std::uint64_t> noise,
                                                        std::uint32_t user_id) const;

    /// Flat uplink tuple (x_1 .. x_K).
    virtual std::vector<std::uint64_t> uplink_symbols(std::span<const std::uint64_t> inputs,
                                                      std::span<const std::uint64_t> noise) const;

    /// The reply payload every survivor receives.
    virtual std::vector<std::uint64_t> reply_symbols(std::span<const std::uint64_t> inputs,
                                                     std::span<const std::uint64_t> noise,
                                                     const SurvivorSet& survivors) const;

    /// Symbols the server sees beyond the uplink tuple. Empty for the
    /// shipped schemes.
    virtual std::vector<std::uint64_t> server_view_extra(
        std::span<const std::uint64_t> noise) const;

protected:
    SourceKey source_key_from(std::span<const std::uint64_t> noise) const;

private:
    SessionParams params_;
};

/// The scheme exactly as dealt and run by this library.
std::unique_ptr<SchemeModel> make_scheme_model(const SessionParams& params);

/// Test double with a planted flaw: the dealer hands user K a copy of user
/// 1's noise. Server security must catch this.
std::unique_ptr<SchemeModel> make_noise_reuse_double(const SessionParams& params);

/// Test double with a planted flaw: the reply is additionally masked with
/// user 1's key noise, which the server must therefore hold. Server
/// security must catch this.
std::unique_ptr<SchemeModel> make_reply_noise_reuse_double(const SessionParams& params);

/// Is the server's view independent of the inputs?
AuditEntry check_server_security(const SchemeModel& model, const AuditOptions& options = {});

/// Does user k's reply reveal anything beyond the survivor sum, given what
/// the user already holds? NoDropout requires the full survivor set.
AuditEntry check_user_security(const SchemeModel& model, std::uint32_t user_id,
                               const SurvivorSet& survivors, const AuditOptions& options = {});

/// Uplink entropy identities: each uplink is exactly L symbols of fresh
/// uncertainty given everything else, at least L given only the sender's
/// key, and jointly the K uplinks fill all KL symbols. Returns K+2 entries.
std::vector<AuditEntry> check_uplink_entropy(const SchemeModel& model,
                                             const AuditOptions& options = {});

/// With the server colluding with users C (no-dropout scheme only): are the
/// non-colluders' inputs independent of the coalition's view given the
/// group sum and the colluders' inputs? Under the dropout-tolerant scheme
/// collusion is not audited: one colluding user's decodable subset sums
/// already reconstruct every input.
AuditEntry check_collusion(const SchemeModel& model, std::span<const std::uint32_t> colluders,
                           const AuditOptions& options = {});

/// Runs every applicable check for the session. For the dropout-tolerant
/// scheme, user security runs for each survivor set given (or for all
/// nonempty subsets when none are given).
AuditReport run_full_audit(const SessionParams& params, const AuditOptions& options = {},
                           std::span<const SurvivorSet> survivor_sets = {},
                           std::span<const std::uint32_t> colluders = {});

// --- What a plain sum leaks -------------------------------------------------

struct LeakageRow {
    std::uint64_t sum = 0;
    std::vector<std::vector<std::uint64_t>> input_tuples;
    /// True when the sum pins the inputs: the posterior is a point mass.
    bool deterministic = false;
};

struct LeakageTable {
    std::uint64_t modulus = 0;
    std::vector<std::vector<std::uint64_t>> alphabets;
    std::vector<LeakageRow> rows;

    std::size_t deterministic_rows() const;
    std::string to_text() const;
    std::string to_json_string() const;
};

/// Exact posterior of independent uniform inputs given their sum mod q,
/// by enumeration of the alphabet product (at least two alphabets).
LeakageTable sum_leakage(const FieldSpec& spec,
                         const std::vector<std::vector<std::uint64_t>>& alphabets,
                         std::uint64_t max_tuples = 1ULL << 22);

}  // namespace oblivagg
