#include "oblivagg/auditor.hpp"

#include <algorithm>
#include <future>
#include <map>
#include <sstream>
#include <thread>
#include <unordered_map>
#include <utility>

#include <json.hpp>

#include "oblivagg/errors.hpp"

namespace oblivagg {

namespace {

using Json = nlohmann::ordered_json;

struct SatValue {
    std::uint64_t value = 0;
    bool saturated = false;
};

SatValue saturating_mul(std::uint64_t a, std::uint64_t b) {
    const __uint128_t p = static_cast<__uint128_t>(a) * b;
    if (p > ~0ULL) {
        return {~0ULL, true};
    }
    return {static_cast<std::uint64_t>(p), false};
}

SatValue saturating_pow(std::uint64_t base, std::uint64_t exp) {
    SatValue acc{1, false};
    for (std::uint64_t i = 0; i < exp; ++i) {
        acc = saturating_mul(acc.value, base);
        if (acc.saturated) {
            return acc;
        }
    }
    return acc;
}

std::uint64_t mod_add(std::uint64_t a, std::uint64_t b, std::uint64_t q) {
    return a >= q - b && b != 0 ? a - (q - b) : a + b;
}

void decode_digits(std::uint64_t code, std::uint64_t q, std::span<std::uint64_t> out) {
    for (std::uint64_t& d : out) {
        d = code % q;
        code /= q;
    }
}

std::uint64_t encode_digits(std::span<const std::uint64_t> digits, std::uint64_t q) {
    std::uint64_t code = 0;
    for (std::size_t i = digits.size(); i-- > 0;) {
        code = code * q + digits[i];
    }
    return code;
}

bool increment_odometer(std::span<std::uint64_t> digits, std::uint64_t q) {
    for (std::uint64_t& d : digits) {
        if (++d < q) {
            return true;
        }
        d = 0;
    }
    return false;
}

std::string render_digits(std::span<const std::uint64_t> digits) {
    std::ostringstream out;
    out << "(";
    for (std::size_t i = 0; i < digits.size(); ++i) {
        if (i > 0) {
            out << ",";
        }
        out << digits[i];
    }
    out << ")";
    return out.str();
}

std::string render_code(std::uint64_t code, std::uint64_t q, std::size_t width) {
    std::vector<std::uint64_t> digits(width);
    decode_digits(code, q, digits);
    return render_digits(digits);
}

std::string render_id_set(std::span<const std::uint32_t> ids) {
    std::ostringstream out;
    out << "{";
    for (std::size_t i = 0; i < ids.size(); ++i) {
        if (i > 0) {
            out << ",";
        }
        out << ids[i];
    }
    out << "}";
    return out.str();
}

std::uint64_t clamp_u128(__uint128_t v) {
    return v > ~0ULL ? ~0ULL : static_cast<std::uint64_t>(v);
}

using Census = std::unordered_map<std::uint64_t, std::uint64_t>;

struct CellCensus {
    std::uint64_t total = 0;
    Census a;
    Census b;
    Census ab;
};

using CellMap = std::unordered_map<std::uint64_t, CellCensus>;
using GroupCensus = std::unordered_map<std::uint64_t, Census>;

void merge_census(Census& into, Census&& from) {
    for (const auto& [key, count] : from) {
        into[key] += count;
    }
}

void merge_cells(CellMap& into, CellMap&& from) {
    for (auto& [key, cell] : from) {
        CellCensus& dst = into[key];
        dst.total += cell.total;
        merge_census(dst.a, std::move(cell.a));
        merge_census(dst.b, std::move(cell.b));
        merge_census(dst.ab, std::move(cell.ab));
    }
}

void merge_groups(GroupCensus& into, GroupCensus&& from) {
    for (auto& [key, census] : from) {
        merge_census(into[key], std::move(census));
    }
}

template <typename Map>
std::vector<std::uint64_t> sorted_keys(const Map& map) {
    std::vector<std::uint64_t> keys;
    keys.reserve(map.size());
    for (const auto& [key, value] : map) {
        keys.push_back(key);
    }
    std::sort(keys.begin(), keys.end());
    return keys;
}

/// Checks the state-count budget and returns the exact state count.
std::uint64_t require_states_within_budget(const SessionParams& params,
                                           const AuditOptions& options) {
    const std::uint64_t symbols = 2ULL * params.user_count * params.input_len;
    const SatValue states = saturating_pow(params.spec.modulus(), symbols);
    if (states.saturated || states.value > options.max_states) {
        throw BudgetExceededError(states.value, options.max_states, states.saturated);
    }
    return states.value;
}

std::uint64_t require_code_space(std::uint64_t q, std::uint64_t width,
                                 const AuditOptions& options) {
    const SatValue space = saturating_pow(q, width);
    if (space.saturated) {
        throw BudgetExceededError(space.value, options.max_states, true);
    }
    return space.value;
}

/// Runs visit(accum, input_digits, noise_digits, input_code) over the whole
/// product space, partitioned over the input coordinate. Merging partial
/// accumulators is associative and commutative, so the result (and every
/// verdict derived from it) is independent of the partitioning.
template <typename Accum, typename Visit, typename Merge>
Accum enumerate_space(const SessionParams& params, const AuditOptions& options, Visit&& visit,
                      Merge&& merge) {
    const std::uint64_t q = params.spec.modulus();
    const std::size_t symbol_count =
        static_cast<std::size_t>(params.user_count) * params.input_len;
    const std::uint64_t half_space = saturating_pow(q, symbol_count).value;

    unsigned threads = options.threads != 0 ? options.threads
                                            : std::max(1U, std::thread::hardware_concurrency());
    threads = static_cast<unsigned>(
        std::min<std::uint64_t>(threads, half_space));

    const auto run_chunk = [&](std::uint64_t lo, std::uint64_t hi) {
        Accum acc;
        std::vector<std::uint64_t> inputs(symbol_count);
        std::vector<std::uint64_t> noise(symbol_count);
        decode_digits(lo, q, inputs);
        for (std::uint64_t input_code = lo; input_code < hi; ++input_code) {
            std::fill(noise.begin(), noise.end(), 0);
            for (std::uint64_t noise_code = 0; noise_code < half_space; ++noise_code) {
                visit(acc, std::span<const std::uint64_t>(inputs),
                      std::span<const std::uint64_t>(noise), input_code);
                increment_odometer(noise, q);
            }
            increment_odometer(inputs, q);
        }
        return acc;
    };

    if (threads <= 1) {
        return run_chunk(0, half_space);
    }

    const std::uint64_t chunk = (half_space + threads - 1) / threads;
    std::vector<std::future<Accum>> futures;
    for (unsigned t = 0; t < threads; ++t) {
        const std::uint64_t lo = t * chunk;
        const std::uint64_t hi = std::min(half_space, lo + chunk);
        if (lo >= hi) {
            break;
        }
        futures.push_back(std::async(std::launch::async, run_chunk, lo, hi));
    }
    Accum total = futures.front().get();
    for (std::size_t i = 1; i < futures.size(); ++i) {
        merge(total, futures[i].get());
    }
    return total;
}

}  // namespace

std::string to_string(AuditVerdict verdict) {
    switch (verdict) {
        case AuditVerdict::Pass:
            return "PASS";
        case AuditVerdict::PassDegenerate:
            return "PASS-degenerate";
        case AuditVerdict::Fail:
            return "FAIL";
    }
    return "FAIL";
}

bool AuditReport::all_passed() const {
    return std::all_of(entries.begin(), entries.end(),
                       [](const AuditEntry& e) { return e.passed(); });
}

std::string AuditReport::to_text() const {
    std::ostringstream out;
    for (const AuditEntry& entry : entries) {
        out << "[" << to_string(entry.verdict) << "] " << entry.name << ": " << entry.statement
            << " (states=" << entry.states_enumerated << ", cells=" << entry.cells_examined
            << ", degenerate=" << entry.degenerate_cells << ")\n";
        if (entry.counterexample.has_value()) {
            const Counterexample& ce = *entry.counterexample;
            out << "    counterexample: cell=" << ce.cell << " observed=" << ce.observed
                << " joint*total=" << ce.joint_scaled
                << " marginal-product=" << ce.marginal_product << "\n";
        }
    }
    out << (all_passed() ? "all constraints hold\n" : "CONSTRAINT VIOLATION DETECTED\n");
    return out.str();
}

std::string AuditReport::to_json_string() const {
    Json doc;
    doc["entries"] = Json::array();
    for (const AuditEntry& entry : entries) {
        Json e;
        e["name"] = entry.name;
        e["statement"] = entry.statement;
        e["verdict"] = to_string(entry.verdict);
        e["states_enumerated"] = entry.states_enumerated;
        e["cells_examined"] = entry.cells_examined;
        e["degenerate_cells"] = entry.degenerate_cells;
        if (entry.counterexample.has_value()) {
            Json ce;
            ce["cell"] = entry.counterexample->cell;
            ce["observed"] = entry.counterexample->observed;
            ce["joint_scaled"] = entry.counterexample->joint_scaled;
            ce["marginal_product"] = entry.counterexample->marginal_product;
            e["counterexample"] = ce;
        } else {
            e["counterexample"] = nullptr;
        }
        doc["entries"].push_back(e);
    }
    doc["all_passed"] = all_passed();
    return doc.dump(2);
}

SchemeModel::SchemeModel(SessionParams params) : params_(std::move(params)) {}

SourceKey SchemeModel::source_key_from(std::span<const std::uint64_t> noise) const {
    const std::vector<std::uint64_t> effective = effective_noise(noise);
    const std::uint32_t len = params_.input_len;
    SourceKey src;
    src.noise.reserve(params_.user_count);
    for (std::uint32_t k = 0; k < params_.user_count; ++k) {
        src.noise.emplace_back(
            params_.spec,
            std::vector<std::uint64_t>(effective.begin() + static_cast<std::ptrdiff_t>(k * len),
                                       effective.begin() +
                                           static_cast<std::ptrdiff_t>((k + 1) * len)));
    }
    return src;
}

std::vector<std::uint64_t> SchemeModel::effective_noise(
    std::span<const std::uint64_t> noise) const {
    return {noise.begin(), noise.end()};
}

std::vector<std::uint64_t> SchemeModel::user_key_symbols(std::span<const std::uint64_t> noise,
                                                         std::uint32_t user_id) const {
    const UserKey key = derive_user_key(source_key_from(noise), user_id, params_);
    std::vector<std::uint64_t> out;
    out.reserve(key.symbol_count());
    if (const auto* nd = std::get_if<NoDropoutKey>(&key.payload)) {
        out.insert(out.end(), nd->own_noise.elems().begin(), nd->own_noise.elems().end());
        out.insert(out.end(), nd->noise_total.elems().begin(), nd->noise_total.elems().end());
    } else {
        for (const FieldVector& n : std::get<DropoutTolerantKey>(key.payload).all_noise) {
            out.insert(out.end(), n.elems().begin(), n.elems().end());
        }
    }
    return out;
}

namespace {

FieldVector input_slice(const SessionParams& params, std::span<const std::uint64_t> inputs,
                        std::uint32_t user_id) {
    const std::uint32_t len = params.input_len;
    return FieldVector(
        params.spec,
        std::vector<std::uint64_t>(
            inputs.begin() + static_cast<std::ptrdiff_t>((user_id - 1) * len),
            inputs.begin() + static_cast<std::ptrdiff_t>(user_id * len)));
}

}  // namespace

std::vector<std::uint64_t> SchemeModel::uplink_symbols(std::span<const std::uint64_t> inputs,
                                                       std::span<const std::uint64_t> noise) const {
    const SourceKey src = source_key_from(noise);
    std::vector<std::uint64_t> out;
    out.reserve(inputs.size());
    for (std::uint32_t k = 1; k <= params_.user_count; ++k) {
        UserState user(params_, k, input_slice(params_, inputs, k),
                       derive_user_key(src, k, params_));
        const PhaseOneMsg msg = user_phase_one(user);
        out.insert(out.end(), msg.payload.elems().begin(), msg.payload.elems().end());
    }
    return out;
}

std::vector<std::uint64_t> SchemeModel::reply_symbols(std::span<const std::uint64_t> inputs,
                                                      std::span<const std::uint64_t> noise,
                                                      const SurvivorSet& survivors) const {
    const SourceKey src = source_key_from(noise);
    ServerState server(params_);
    for (std::uint32_t id : survivors.ids()) {
        UserState user(params_, id, input_slice(params_, inputs, id),
                       derive_user_key(src, id, params_));
        server.receive(user_phase_one(user));
    }
    const auto replies = server_close_and_reply(server);
    const FieldVector& payload = replies.begin()->second.payload;
    return {payload.elems().begin(), payload.elems().end()};
}

std::vector<std::uint64_t> SchemeModel::server_view_extra(
    std::span<const std::uint64_t>) const {
    return {};
}

namespace {

/// Planted flaw: user K is dealt user 1's noise verbatim.
class NoiseReuseDouble : public SchemeModel {
public:
    using SchemeModel::SchemeModel;

    std::vector<std::uint64_t> effective_noise(
        std::span<const std::uint64_t> noise) const override {
        std::vector<std::uint64_t> out(noise.begin(), noise.end());
        const std::uint32_t len = params().input_len;
        std::copy(out.begin(), out.begin() + len, out.end() - len);
        return out;
    }
};

/// Planted flaw: the reply reuses user 1's key noise as a second mask, so
/// the server must hold that noise to build the reply.
class ReplyNoiseReuseDouble : public SchemeModel {
public:
    using SchemeModel::SchemeModel;

    std::vector<std::uint64_t> reply_symbols(std::span<const std::uint64_t> inputs,
                                             std::span<const std::uint64_t> noise,
                                             const SurvivorSet& survivors) const override {
        std::vector<std::uint64_t> out = SchemeModel::reply_symbols(inputs, noise, survivors);
        const std::vector<std::uint64_t> extra = server_view_extra(noise);
        const std::uint64_t q = params().spec.modulus();
        for (std::size_t i = 0; i < out.size(); ++i) {
            out[i] = mod_add(out[i], extra[i], q);
        }
        return out;
    }

    std::vector<std::uint64_t> server_view_extra(
        std::span<const std::uint64_t> noise) const override {
        const std::vector<std::uint64_t> effective = effective_noise(noise);
        return {effective.begin(), effective.begin() + params().input_len};
    }
};

}  // namespace

std::unique_ptr<SchemeModel> make_scheme_model(const SessionParams& params) {
    return std::make_unique<SchemeModel>(params);
}

std::unique_ptr<SchemeModel> make_noise_reuse_double(const SessionParams& params) {
    return std::make_unique<NoiseReuseDouble>(params);
}

std::unique_ptr<SchemeModel> make_reply_noise_reuse_double(const SessionParams& params) {
    return std::make_unique<ReplyNoiseReuseDouble>(params);
}

AuditEntry check_server_security(const SchemeModel& model, const AuditOptions& options) {
    const SessionParams& params = model.params();
    const std::uint64_t q = params.spec.modulus();
    const std::uint64_t states = require_states_within_budget(params, options);
    const std::size_t symbol_count =
        static_cast<std::size_t>(params.user_count) * params.input_len;

    const std::vector<std::uint64_t> zero_noise(symbol_count, 0);
    const std::size_t extra_len = model.server_view_extra(zero_noise).size();
    const std::uint64_t view_space = require_code_space(q, symbol_count + extra_len, options);
    require_code_space(q, 2 * symbol_count + extra_len, options);  // joint key space

    struct Accum {
        Census inputs;
        Census view;
        Census joint;
    };
    Accum census = enumerate_space<Accum>(
        params, options,
        [&](Accum& acc, std::span<const std::uint64_t> inputs,
            std::span<const std::uint64_t> noise, std::uint64_t input_code) {
            std::vector<std::uint64_t> view = model.uplink_symbols(inputs, noise);
            const std::vector<std::uint64_t> extra = model.server_view_extra(noise);
            view.insert(view.end(), extra.begin(), extra.end());
            const std::uint64_t view_code = encode_digits(view, q);
            ++acc.inputs[input_code];
            ++acc.view[view_code];
            ++acc.joint[input_code * view_space + view_code];
        },
        [](Accum& into, Accum&& from) {
            merge_census(into.inputs, std::move(from.inputs));
            merge_census(into.view, std::move(from.view));
            merge_census(into.joint, std::move(from.joint));
        });

    AuditEntry entry;
    entry.name = "server-security";
    entry.statement = "I(inputs; server view) = 0";
    entry.states_enumerated = states;

    const std::vector<std::uint64_t> input_keys = sorted_keys(census.inputs);
    const std::vector<std::uint64_t> view_keys = sorted_keys(census.view);
    entry.cells_examined =
        static_cast<std::uint64_t>(input_keys.size()) * view_keys.size();

    for (std::uint64_t input_code : input_keys) {
        const std::uint64_t input_count = census.inputs.at(input_code);
        for (std::uint64_t view_code : view_keys) {
            const auto it = census.joint.find(input_code * view_space + view_code);
            const std::uint64_t joint = it == census.joint.end() ? 0 : it->second;
            const __uint128_t lhs = static_cast<__uint128_t>(joint) * states;
            const __uint128_t rhs =
                static_cast<__uint128_t>(input_count) * census.view.at(view_code);
            if (lhs != rhs) {
                entry.verdict = AuditVerdict::Fail;
                entry.counterexample = Counterexample{
                    "(unconditioned)",
                    "inputs=" + render_code(input_code, q, symbol_count) +
                        " view=" + render_code(view_code, q, symbol_count + extra_len),
                    clamp_u128(lhs), clamp_u128(rhs)};
                return entry;
            }
        }
    }
    entry.verdict = AuditVerdict::Pass;
    return entry;
}

namespace {

struct CellLayout {
    std::vector<std::pair<std::string, std::size_t>> parts;  // label, digit width

    std::size_t width() const {
        std::size_t total = 0;
        for (const auto& [label, w] : parts) {
            total += w;
        }
        return total;
    }

    std::string render(std::uint64_t code, std::uint64_t q) const {
        std::vector<std::uint64_t> digits(width());
        decode_digits(code, q, digits);
        std::ostringstream out;
        std::size_t offset = 0;
        for (std::size_t i = 0; i < parts.size(); ++i) {
            if (i > 0) {
                out << " ";
            }
            out << parts[i].first << "="
                << render_digits(std::span<const std::uint64_t>(digits).subspan(offset,
                                                                                parts[i].second));
            offset += parts[i].second;
        }
        return out.str();
    }
};

struct ConditionalCheckSpec {
    std::string name;
    std::string statement;
    CellLayout cell_layout;
    std::string a_label;
    std::size_t a_width = 0;
    std::string b_label;
    std::size_t b_width = 0;
};

/// Shared verdict logic: within every conditioning cell, the joint counts
/// of (a, b) must factor into the within-cell marginals, exactly. A cell
/// whose protected variable is pinned counts as degenerate.
AuditEntry verify_cells(const CellMap& cells, const ConditionalCheckSpec& spec, std::uint64_t q,
                        std::uint64_t b_space, std::uint64_t states) {
    AuditEntry entry;
    entry.name = spec.name;
    entry.statement = spec.statement;
    entry.states_enumerated = states;
    entry.cells_examined = cells.size();

    for (std::uint64_t cell_code : sorted_keys(cells)) {
        const CellCensus& cell = cells.at(cell_code);
        const std::vector<std::uint64_t> a_keys = sorted_keys(cell.a);
        const std::vector<std::uint64_t> b_keys = sorted_keys(cell.b);
        if (a_keys.size() == 1) {
            ++entry.degenerate_cells;
        }
        for (std::uint64_t a_code : a_keys) {
            const std::uint64_t a_count = cell.a.at(a_code);
            for (std::uint64_t b_code : b_keys) {
                const auto it = cell.ab.find(a_code * b_space + b_code);
                const std::uint64_t joint = it == cell.ab.end() ? 0 : it->second;
                const __uint128_t lhs = static_cast<__uint128_t>(joint) * cell.total;
                const __uint128_t rhs =
                    static_cast<__uint128_t>(a_count) * cell.b.at(b_code);
                if (lhs != rhs) {
                    entry.verdict = AuditVerdict::Fail;
                    entry.counterexample = Counterexample{
                        spec.cell_layout.render(cell_code, q),
                        spec.a_label + "=" + render_code(a_code, q, spec.a_width) + " " +
                            spec.b_label + "=" + render_code(b_code, q, spec.b_width),
                        clamp_u128(lhs), clamp_u128(rhs)};
                    return entry;
                }
            }
        }
    }
    entry.verdict = entry.degenerate_cells == entry.cells_examined
                        ? AuditVerdict::PassDegenerate
                        : AuditVerdict::Pass;
    return entry;
}

}  // namespace

AuditEntry check_user_security(const SchemeModel& model, std::uint32_t user_id,
                               const SurvivorSet& survivors, const AuditOptions& options) {
    const SessionParams& params = model.params();
    const std::uint64_t q = params.spec.modulus();
    const std::uint32_t len = params.input_len;

    if (!survivors.contains(user_id)) {
        throw ConfigError("user security is defined for surviving users only");
    }
    if (params.scheme == Scheme::NoDropout && !survivors.is_full(params.user_count)) {
        throw ConfigError(
            "the no-dropout scheme never serves a strict subset, so there is nothing to audit");
    }

    const std::uint64_t states = require_states_within_budget(params, options);
    const std::size_t symbol_count =
        static_cast<std::size_t>(params.user_count) * params.input_len;

    const std::vector<std::uint64_t> zero_noise(symbol_count, 0);
    const std::size_t key_len = model.user_key_symbols(zero_noise, user_id).size();
    require_code_space(q, 2 * len + key_len, options);  // cell space
    const std::uint64_t reply_space = require_code_space(q, len, options);
    require_code_space(q, symbol_count + len, options);  // joint (a,b) space

    CellMap cells = enumerate_space<CellMap>(
        params, options,
        [&](CellMap& acc, std::span<const std::uint64_t> inputs,
            std::span<const std::uint64_t> noise, std::uint64_t input_code) {
            std::vector<std::uint64_t> cell_digits;
            cell_digits.reserve(2 * len + key_len);
            for (std::uint32_t i = 0; i < len; ++i) {
                std::uint64_t s = 0;
                for (std::uint32_t u : survivors.ids()) {
                    s = mod_add(s, inputs[(u - 1) * len + i], q);
                }
                cell_digits.push_back(s);
            }
            cell_digits.insert(cell_digits.end(), inputs.begin() + (user_id - 1) * len,
                               inputs.begin() + user_id * len);
            const std::vector<std::uint64_t> key = model.user_key_symbols(noise, user_id);
            cell_digits.insert(cell_digits.end(), key.begin(), key.end());

            const std::uint64_t cell_code = encode_digits(cell_digits, q);
            const std::uint64_t reply_code =
                encode_digits(model.reply_symbols(inputs, noise, survivors), q);

            CellCensus& cell = acc[cell_code];
            ++cell.total;
            ++cell.a[input_code];
            ++cell.b[reply_code];
            ++cell.ab[input_code * reply_space + reply_code];
        },
        [](CellMap& into, CellMap&& from) { merge_cells(into, std::move(from)); });

    ConditionalCheckSpec spec;
    spec.name = "user-security[k=" + std::to_string(user_id) +
                ",U=" + render_id_set(survivors.ids()) + "]";
    spec.statement = "I(inputs; reply | survivor sum, own input, own key) = 0";
    spec.cell_layout.parts = {{"survivor_sum", len}, {"own_input", len}, {"own_key", key_len}};
    spec.a_label = "inputs";
    spec.a_width = symbol_count;
    spec.b_label = "reply";
    spec.b_width = len;
    return verify_cells(cells, spec, q, reply_space, states);
}

std::vector<AuditEntry> check_uplink_entropy(const SchemeModel& model,
                                             const AuditOptions& options) {
    const SessionParams& params = model.params();
    const std::uint64_t q = params.spec.modulus();
    const std::uint32_t len = params.input_len;
    const std::uint32_t user_count = params.user_count;
    const std::uint64_t states = require_states_within_budget(params, options);
    const std::size_t symbol_count = static_cast<std::size_t>(user_count) * len;

    const std::vector<std::uint64_t> zero_noise(symbol_count, 0);
    const std::size_t key_len = model.user_key_symbols(zero_noise, 1).size();
    require_code_space(q, (user_count - 1) * len + user_count * key_len, options);
    require_code_space(q, key_len, options);
    const std::uint64_t uplink_value_space = require_code_space(q, len, options);
    const std::uint64_t uplink_tuple_space = require_code_space(q, symbol_count, options);

    struct Accum {
        std::vector<GroupCensus> conditioned_on_rest;  // per user u
        GroupCensus first_given_own_key;
        Census joint_tuples;
    };

    Accum census = enumerate_space<Accum>(
        params, options,
        [&](Accum& acc, std::span<const std::uint64_t> inputs,
            std::span<const std::uint64_t> noise, std::uint64_t) {
            if (acc.conditioned_on_rest.empty()) {
                acc.conditioned_on_rest.resize(user_count);
            }
            const std::vector<std::uint64_t> uplinks = model.uplink_symbols(inputs, noise);
            std::vector<std::vector<std::uint64_t>> keys;
            keys.reserve(user_count);
            for (std::uint32_t k = 1; k <= user_count; ++k) {
                keys.push_back(model.user_key_symbols(noise, k));
            }

            for (std::uint32_t u = 1; u <= user_count; ++u) {
                // Cell: every input but W_u, plus every user's key.
                std::vector<std::uint64_t> cell_digits;
                cell_digits.reserve((user_count - 1) * len + user_count * key_len);
                for (std::uint32_t k = 1; k <= user_count; ++k) {
                    if (k != u) {
                        cell_digits.insert(cell_digits.end(), inputs.begin() + (k - 1) * len,
                                           inputs.begin() + k * len);
                    }
                }
                for (const auto& key : keys) {
                    cell_digits.insert(cell_digits.end(), key.begin(), key.end());
                }
                const std::uint64_t cell_code = encode_digits(cell_digits, q);
                const std::uint64_t x_code = encode_digits(
                    std::span<const std::uint64_t>(uplinks).subspan((u - 1) * len, len), q);
                ++acc.conditioned_on_rest[u - 1][cell_code][x_code];
            }

            const std::uint64_t z1_code = encode_digits(keys.front(), q);
            const std::uint64_t x1_code = encode_digits(
                std::span<const std::uint64_t>(uplinks).subspan(0, len), q);
            ++acc.first_given_own_key[z1_code][x1_code];
            ++acc.joint_tuples[encode_digits(uplinks, q)];
        },
        [](Accum& into, Accum&& from) {
            if (into.conditioned_on_rest.empty()) {
                into.conditioned_on_rest = std::move(from.conditioned_on_rest);
            } else if (!from.conditioned_on_rest.empty()) {
                for (std::size_t u = 0; u < into.conditioned_on_rest.size(); ++u) {
                    merge_groups(into.conditioned_on_rest[u],
                                 std::move(from.conditioned_on_rest[u]));
                }
            }
            merge_groups(into.first_given_own_key, std::move(from.first_given_own_key));
            merge_census(into.joint_tuples, std::move(from.joint_tuples));
        });

    // A census is flat-uniform over `expected_support` values iff the
    // variable carries exactly log_q(expected_support) q-ary symbols of
    // entropy within that cell.
    const auto verify_uniform =
        [&](const Census& census_map, std::uint64_t expected_support, const std::string& cell_desc,
            AuditEntry& entry) {
            const std::vector<std::uint64_t> keys = sorted_keys(census_map);
            const std::uint64_t first_count = census_map.at(keys.front());
            if (keys.size() != expected_support) {
                entry.verdict = AuditVerdict::Fail;
                entry.counterexample =
                    Counterexample{cell_desc, "support size", keys.size(), expected_support};
                return false;
            }
            for (std::uint64_t key : keys) {
                if (census_map.at(key) != first_count) {
                    entry.verdict = AuditVerdict::Fail;
                    entry.counterexample =
                        Counterexample{cell_desc,
                                       "count at value " + render_code(key, q, len),
                                       census_map.at(key), first_count};
                    return false;
                }
            }
            return true;
        };

    std::vector<AuditEntry> entries;

    for (std::uint32_t u = 1; u <= user_count; ++u) {
        AuditEntry entry;
        entry.name = "uplink-entropy-given-rest[u=" + std::to_string(u) + "]";
        entry.statement = "H(X_u | Z_u, inputs and keys of all other users) = L";
        entry.states_enumerated = states;
        const GroupCensus& groups = census.conditioned_on_rest[u - 1];
        entry.cells_examined = groups.size();
        entry.verdict = AuditVerdict::Pass;
        for (std::uint64_t cell_code : sorted_keys(groups)) {
            if (!verify_uniform(groups.at(cell_code), uplink_value_space,
                                "cell#" + std::to_string(cell_code), entry)) {
                break;
            }
        }
        entries.push_back(std::move(entry));
    }

    {
        AuditEntry entry;
        entry.name = "uplink-entropy-given-own-key";
        entry.statement = "H(X_1 | Z_1) >= L";
        entry.states_enumerated = states;
        entry.cells_examined = census.first_given_own_key.size();
        entry.verdict = AuditVerdict::Pass;
        for (std::uint64_t cell_code : sorted_keys(census.first_given_own_key)) {
            if (!verify_uniform(census.first_given_own_key.at(cell_code), uplink_value_space,
                                "Z_1=" + render_code(cell_code, q, key_len), entry)) {
                break;
            }
        }
        entries.push_back(std::move(entry));
    }

    {
        AuditEntry entry;
        entry.name = "uplink-joint-entropy";
        entry.statement = "H(X_1..X_K) >= K*L";
        entry.states_enumerated = states;
        entry.cells_examined = 1;
        entry.verdict = AuditVerdict::Pass;
        verify_uniform(census.joint_tuples, uplink_tuple_space, "(unconditioned)", entry);
        entries.push_back(std::move(entry));
    }

    return entries;
}

AuditEntry check_collusion(const SchemeModel& model, std::span<const std::uint32_t> colluders,
                           const AuditOptions& options) {
    const SessionParams& params = model.params();
    const std::uint64_t q = params.spec.modulus();
    const std::uint32_t len = params.input_len;
    const std::uint32_t user_count = params.user_count;

    if (params.scheme != Scheme::NoDropout) {
        throw ConfigError(
            "collusion is audited for the no-dropout scheme only: with dropouts, one colluding "
            "user's decodable subset sums already reconstruct every input");
    }
    std::vector<std::uint32_t> coalition(colluders.begin(), colluders.end());
    std::sort(coalition.begin(), coalition.end());
    if (coalition.empty() || coalition.size() >= user_count) {
        throw ConfigError("colluders must form a nonempty proper subset of the users");
    }
    if (std::adjacent_find(coalition.begin(), coalition.end()) != coalition.end()) {
        throw ConfigError("duplicate colluder id");
    }
    if (coalition.front() < 1 || coalition.back() > user_count) {
        throw ConfigError("colluder ids must lie in 1.." + std::to_string(user_count));
    }
    std::vector<std::uint32_t> honest;
    for (std::uint32_t k = 1; k <= user_count; ++k) {
        if (!std::binary_search(coalition.begin(), coalition.end(), k)) {
            honest.push_back(k);
        }
    }

    const std::uint64_t states = require_states_within_budget(params, options);
    const std::size_t symbol_count = static_cast<std::size_t>(user_count) * len;
    const std::vector<std::uint64_t> zero_noise(symbol_count, 0);
    const std::size_t key_len = model.user_key_symbols(zero_noise, 1).size();

    const std::size_t a_width = honest.size() * len;
    const std::size_t b_width = symbol_count + len + coalition.size() * (len + key_len);
    require_code_space(q, (1 + coalition.size()) * len, options);  // cell space
    const std::uint64_t b_space = require_code_space(q, b_width, options);
    require_code_space(q, a_width + b_width, options);

    const SurvivorSet everyone = SurvivorSet::full(user_count);

    CellMap cells = enumerate_space<CellMap>(
        params, options,
        [&](CellMap& acc, std::span<const std::uint64_t> inputs,
            std::span<const std::uint64_t> noise, std::uint64_t) {
            std::vector<std::uint64_t> cell_digits;
            cell_digits.reserve((1 + coalition.size()) * len);
            for (std::uint32_t i = 0; i < len; ++i) {
                std::uint64_t s = 0;
                for (std::uint32_t u = 1; u <= user_count; ++u) {
                    s = mod_add(s, inputs[(u - 1) * len + i], q);
                }
                cell_digits.push_back(s);
            }
            for (std::uint32_t c : coalition) {
                cell_digits.insert(cell_digits.end(), inputs.begin() + (c - 1) * len,
                                   inputs.begin() + c * len);
            }

            std::vector<std::uint64_t> a_digits;
            a_digits.reserve(a_width);
            for (std::uint32_t h : honest) {
                a_digits.insert(a_digits.end(), inputs.begin() + (h - 1) * len,
                                inputs.begin() + h * len);
            }

            std::vector<std::uint64_t> b_digits = model.uplink_symbols(inputs, noise);
            const std::vector<std::uint64_t> reply = model.reply_symbols(inputs, noise, everyone);
            b_digits.insert(b_digits.end(), reply.begin(), reply.end());
            for (std::uint32_t c : coalition) {
                b_digits.insert(b_digits.end(), inputs.begin() + (c - 1) * len,
                                inputs.begin() + c * len);
                const std::vector<std::uint64_t> key = model.user_key_symbols(noise, c);
                b_digits.insert(b_digits.end(), key.begin(), key.end());
            }

            CellCensus& cell = acc[encode_digits(cell_digits, q)];
            const std::uint64_t a_code = encode_digits(a_digits, q);
            const std::uint64_t b_code = encode_digits(b_digits, q);
            ++cell.total;
            ++cell.a[a_code];
            ++cell.b[b_code];
            ++cell.ab[a_code * b_space + b_code];
        },
        [](CellMap& into, CellMap&& from) { merge_cells(into, std::move(from)); });

    ConditionalCheckSpec spec;
    spec.name = "collusion-resilience[C=" + render_id_set(coalition) + "]";
    spec.statement =
        "I(non-colluding inputs; coalition view | group sum, colluding inputs) = 0";
    spec.cell_layout.parts = {{"group_sum", len},
                              {"colluding_inputs", coalition.size() * len}};
    spec.a_label = "non_colluding_inputs";
    spec.a_width = a_width;
    spec.b_label = "coalition_view";
    spec.b_width = b_width;
    return verify_cells(cells, spec, q, b_space, states);
}

AuditReport run_full_audit(const SessionParams& params, const AuditOptions& options,
                           std::span<const SurvivorSet> survivor_sets,
                           std::span<const std::uint32_t> colluders) {
    const std::unique_ptr<SchemeModel> model = make_scheme_model(params);
    AuditReport report;
    report.entries.push_back(check_server_security(*model, options));

    if (params.scheme == Scheme::NoDropout) {
        const SurvivorSet everyone = SurvivorSet::full(params.user_count);
        for (std::uint32_t k = 1; k <= params.user_count; ++k) {
            report.entries.push_back(check_user_security(*model, k, everyone, options));
        }
    } else {
        std::vector<SurvivorSet> sets(survivor_sets.begin(), survivor_sets.end());
        if (sets.empty()) {
            for (std::uint32_t mask = 1; mask < (1U << params.user_count); ++mask) {
                std::vector<std::uint32_t> ids;
                for (std::uint32_t k = 1; k <= params.user_count; ++k) {
                    if (mask & (1U << (k - 1))) {
                        ids.push_back(k);
                    }
                }
                sets.emplace_back(std::move(ids), params.user_count);
            }
        }
        for (const SurvivorSet& survivors : sets) {
            for (std::uint32_t k : survivors.ids()) {
                report.entries.push_back(check_user_security(*model, k, survivors, options));
            }
        }
    }

    for (AuditEntry& entry : check_uplink_entropy(*model, options)) {
        report.entries.push_back(std::move(entry));
    }

    if (!colluders.empty()) {
        report.entries.push_back(check_collusion(*model, colluders, options));
    }
    return report;
}

std::size_t LeakageTable::deterministic_rows() const {
    return static_cast<std::size_t>(
        std::count_if(rows.begin(), rows.end(),
                      [](const LeakageRow& r) { return r.deterministic; }));
}

std::string LeakageTable::to_text() const {
    std::ostringstream out;
    out << "posterior of the inputs given their sum mod " << modulus << "\n";
    for (const LeakageRow& row : rows) {
        out << "  sum=" << row.sum << ": " << row.input_tuples.size() << " input tuple"
            << (row.input_tuples.size() == 1 ? "" : "s");
        if (row.deterministic) {
            out << " -> inputs determined: " << render_digits(row.input_tuples.front());
        } else if (row.input_tuples.size() <= 8) {
            out << " ->";
            for (const auto& tuple : row.input_tuples) {
                out << " " << render_digits(tuple);
            }
        }
        out << "\n";
    }
    out << deterministic_rows() << " of " << rows.size()
        << " sum values pin the inputs completely\n";
    return out.str();
}

std::string LeakageTable::to_json_string() const {
    Json doc;
    doc["modulus"] = modulus;
    doc["alphabets"] = alphabets;
    doc["rows"] = Json::array();
    for (const LeakageRow& row : rows) {
        Json r;
        r["sum"] = row.sum;
        r["input_tuples"] = row.input_tuples;
        r["deterministic"] = row.deterministic;
        doc["rows"].push_back(r);
    }
    doc["deterministic_rows"] = deterministic_rows();
    return doc.dump(2);
}

LeakageTable sum_leakage(const FieldSpec& spec,
                         const std::vector<std::vector<std::uint64_t>>& alphabets,
                         std::uint64_t max_tuples) {
    if (alphabets.size() < 2) {
        throw ConfigError("leakage analysis needs at least 2 input alphabets");
    }
    SatValue tuple_count{1, false};
    for (const auto& alphabet : alphabets) {
        if (alphabet.empty()) {
            throw ConfigError("input alphabets must be nonempty");
        }
        std::vector<std::uint64_t> sorted = alphabet;
        std::sort(sorted.begin(), sorted.end());
        if (std::adjacent_find(sorted.begin(), sorted.end()) != sorted.end()) {
            throw ConfigError("input alphabets must not repeat values");
        }
        for (std::uint64_t v : alphabet) {
            if (v >= spec.modulus()) {
                throw ConfigError("alphabet value " + std::to_string(v) +
                                  " is outside the field mod " + std::to_string(spec.modulus()));
            }
        }
        tuple_count = saturating_mul(tuple_count.value, alphabet.size());
    }
    if (tuple_count.saturated || tuple_count.value > max_tuples) {
        throw BudgetExceededError(tuple_count.value, max_tuples, tuple_count.saturated);
    }

    std::map<std::uint64_t, LeakageRow> rows;
    std::vector<std::size_t> index(alphabets.size(), 0);
    while (true) {
        std::vector<std::uint64_t> tuple;
        tuple.reserve(alphabets.size());
        std::uint64_t sum = 0;
        for (std::size_t i = 0; i < alphabets.size(); ++i) {
            const std::uint64_t v = alphabets[i][index[i]];
            tuple.push_back(v);
            sum = mod_add(sum, v, spec.modulus());
        }
        LeakageRow& row = rows[sum];
        row.sum = sum;
        row.input_tuples.push_back(std::move(tuple));

        std::size_t pos = 0;
        while (pos < index.size() && ++index[pos] == alphabets[pos].size()) {
            index[pos] = 0;
            ++pos;
        }
        if (pos == index.size()) {
            break;
        }
    }

    LeakageTable table;
    table.modulus = spec.modulus();
    table.alphabets = alphabets;
    table.rows.reserve(rows.size());
    for (auto& [sum, row] : rows) {
        row.deterministic = row.input_tuples.size() == 1;
        table.rows.push_back(std::move(row));
    }
    return table;
}

}  // namespace oblivagg
