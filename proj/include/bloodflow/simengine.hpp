#pragma once

// Day-stepped simulation of blood requests and donations across a bank network
// under one of three allocation policies.

#include "bloodflow/date.hpp"
#include "bloodflow/domain.hpp"
#include "bloodflow/error.hpp"
#include "bloodflow/random.hpp"
#include "bloodflow/records.hpp"
#include "bloodflow/store.hpp"
#include "bloodflow/synthgen.hpp"

#include <nlohmann/json.hpp>

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <limits>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

namespace bloodflow {

enum class Policy : std::uint8_t { random, heuristic_proximity_expiry, heuristic_rarity };

constexpr std::string_view to_string(Policy p) noexcept {
    switch (p) {
        case Policy::random: return "random";
        case Policy::heuristic_proximity_expiry: return "heuristic_proximity_expiry";
        case Policy::heuristic_rarity: return "heuristic_rarity";
    }
    return "";
}

inline Policy parse_policy(std::string_view s) {
    for (Policy p : {Policy::random, Policy::heuristic_proximity_expiry, Policy::heuristic_rarity})
        if (to_string(p) == s) return p;
    throw ValidationError("unknown policy '" + std::string(s) + "'", "policy");
}

struct ScenarioConfig {
    Date start_date = Date::from_ymd(2023, 1, 1);
    int n_days = 30;
    int daily_events_min = 40;
    int daily_events_max = 50;
    double request_probability = 0.5;
    double proximity_fraction = 0.15;
    Policy policy = Policy::heuristic_rarity;
    long request_quantity = 1;
    long donation_quantity = 1;
    std::uint64_t seed = 0;

    void validate() const {
        if (n_days < 1) throw ValidationError("must be at least 1", "n_days");
        if (daily_events_min < 0 || daily_events_max < daily_events_min)
            throw ValidationError("need 0 <= min <= max", "daily_events");
        if (!(request_probability > 0.0 && request_probability < 1.0))
            throw ValidationError("must lie in (0,1)", "request_probability");
        if (!(proximity_fraction > 0.0 && proximity_fraction <= 1.0))
            throw ValidationError("must lie in (0,1]", "proximity_fraction");
        if (request_quantity < 1) throw ValidationError("must be at least 1", "request_quantity");
        if (donation_quantity < 1) throw ValidationError("must be at least 1", "donation_quantity");
    }
};

struct Request {
    int user_id = 0;
    Coord user_coord;
    BloodType blood_type = BloodType::OPos;
    Component component = Component::RBC;
    long quantity = 1;
};

struct BatchDraw {
    std::string batch_id;
    BloodType blood_type = BloodType::OPos;
    long quantity = 0;
    friend bool operator==(const BatchDraw&, const BatchDraw&) = default;
};

struct AllocationDecision {
    int bank_id = 0;
    std::vector<BatchDraw> draws;
    BloodType served_blood_type = BloodType::OPos;
    double distance = 0.0;
    friend bool operator==(const AllocationDecision&, const AllocationDecision&) = default;
};

// nullopt means the request is denied.
using AllocationResult = std::optional<AllocationDecision>;

// Per-bank cumulative accepted/requested through each day. Days before the first
// request carry 1.0; days without requests carry the previous value.
struct AcceptanceSeries {
    int bank_id = 0;
    std::vector<double> values;
    friend bool operator==(const AcceptanceSeries&, const AcceptanceSeries&) = default;
};

struct SimReport {
    Policy policy = Policy::random;
    Date start_date;
    int n_days = 0;
    std::uint64_t seed = 0;

    long requests = 0;
    long accepted = 0;
    long denied = 0;
    double acceptance_ratio = 0.0;

    double total_distance = 0.0;
    double request_distance = 0.0;
    double donation_distance = 0.0;

    long initial_units = 0;
    long donated_units = 0;
    long dispensed_units = 0;
    long expired_units = 0;
    long final_units = 0;

    std::vector<AcceptanceSeries> per_bank_daily;
    std::vector<TransactionRecord> transactions;
};

// ---- building blocks -----------------------------------------------------

// Zeroes every batch whose expiration_date is before `date`; a unit is still
// usable on its expiration date. Returns the units removed.
inline long purge_expired(Store& store, Date date) {
    long removed = 0;
    for (const InventoryBatch& b : store.inventory()) {
        if (b.quantity > 0 && b.expiration_date < date) {
            store.apply_inventory_delta(b.batch_id, -b.quantity);
            removed += b.quantity;
        }
    }
    return removed;
}

// The ceil(fraction * |banks|) banks nearest to `from`, ascending by distance then bank_id.
inline std::vector<int> candidate_banks(Coord from, std::span<const BloodBank> banks, double fraction) {
    if (banks.empty()) throw ValidationError("must be non-empty", "banks");
    if (!(fraction > 0.0 && fraction <= 1.0)) throw ValidationError("must lie in (0,1]", "fraction");
    std::vector<std::pair<double, int>> ranked;
    ranked.reserve(banks.size());
    for (const BloodBank& b : banks) ranked.emplace_back(distance(from, b.coord), b.bank_id);
    std::sort(ranked.begin(), ranked.end());
    // The epsilon keeps products such as 0.15 * 20 from rounding up past an integer.
    const auto wanted = static_cast<std::size_t>(std::ceil(fraction * static_cast<double>(banks.size()) - 1e-9));
    const std::size_t n = std::clamp<std::size_t>(wanted, 1, banks.size());
    std::vector<int> out;
    out.reserve(n);
    for (std::size_t i = 0; i < n; ++i) out.push_back(ranked[i].second);
    return out;
}

inline int nearest_bank(Coord from, std::span<const BloodBank> banks) {
    return candidate_banks(from, banks, std::numeric_limits<double>::min()).front();
}

namespace detail {

inline const BloodBank& bank_by_id(std::span<const BloodBank> banks, int bank_id) {
    for (const BloodBank& b : banks)
        if (b.bank_id == bank_id) return b;
    throw NotFoundError("unknown bank " + std::to_string(bank_id));
}

// Batches usable on `date` for the predicate, preserving the store's expiry order.
template <class Pred>
std::vector<InventoryBatch> usable_batches(const Store& store, int bank_id, Date date, Component component,
                                           Pred accept_type) {
    std::vector<InventoryBatch> out;
    for (InventoryBatch& b : store.query_inventory_by_bank(bank_id))
        if (b.quantity > 0 && b.expiration_date >= date && b.component == component && accept_type(b.blood_type))
            out.push_back(std::move(b));
    return out;
}

inline long units_in(const std::vector<InventoryBatch>& batches) {
    long n = 0;
    for (const auto& b : batches) n += b.quantity;
    return n;
}

// Draws `quantity` units from batches in the given order. Caller guarantees coverage.
inline AllocationDecision draw_in_order(const BloodBank& bank, Coord user, const std::vector<InventoryBatch>& batches,
                                        long quantity) {
    AllocationDecision d;
    d.bank_id = bank.bank_id;
    d.distance = distance(user, bank.coord);
    long remaining = quantity;
    for (const InventoryBatch& b : batches) {
        if (remaining == 0) break;
        const long take = std::min(remaining, b.quantity);
        d.draws.push_back({b.batch_id, b.blood_type, take});
        remaining -= take;
    }
    d.served_blood_type = d.draws.front().blood_type;
    return d;
}

}  // namespace detail

// Decides how a request would be served without touching the store.
//
//  random: one uniformly drawn bank; exact type and component only.
//  heuristic_proximity_expiry: candidate banks in proximity order; the first bank
//    whose compatible batches cover the quantity serves it, drawing strictly by
//    expiry across types.
//  heuristic_rarity: same bank scan, but a bank serves only if one compatible type
//    covers the quantity on its own; types are tried most-common first (rarity
//    score descending, canonical order on ties) and drawn by expiry.
inline AllocationResult decide_allocation(Policy policy, const Request& req, const Store& store, Date date, Rng& rng,
                                          double proximity_fraction) {
    if (req.quantity < 1) throw ValidationError("must be at least 1", "quantity");
    const std::vector<BloodBank> banks = store.banks();
    if (banks.empty()) return std::nullopt;

    if (policy == Policy::random) {
        const BloodBank& bank = banks[rng.index(banks.size())];
        auto batches = detail::usable_batches(store, bank.bank_id, date, req.component,
                                              [&](BloodType t) { return t == req.blood_type; });
        if (detail::units_in(batches) < req.quantity) return std::nullopt;
        return detail::draw_in_order(bank, req.user_coord, batches, req.quantity);
    }

    const BloodTypeSet donors = compatible_donors(req.blood_type);
    for (int bank_id : candidate_banks(req.user_coord, banks, proximity_fraction)) {
        const BloodBank& bank = detail::bank_by_id(banks, bank_id);
        auto batches = detail::usable_batches(store, bank_id, date, req.component,
                                              [&](BloodType t) { return donors.contains(t); });
        if (detail::units_in(batches) < req.quantity) continue;

        if (policy == Policy::heuristic_proximity_expiry)
            return detail::draw_in_order(bank, req.user_coord, batches, req.quantity);

        std::vector<BloodType> types = donors.to_vector();
        std::stable_sort(types.begin(), types.end(),
                         [](BloodType a, BloodType b) { return rarity_score(a) > rarity_score(b); });
        for (BloodType t : types) {
            std::vector<InventoryBatch> of_type;
            for (const auto& b : batches)
                if (b.blood_type == t) of_type.push_back(b);
            if (detail::units_in(of_type) >= req.quantity)
                return detail::draw_in_order(bank, req.user_coord, of_type, req.quantity);
        }
    }
    return std::nullopt;
}

// decide_allocation followed by the inventory deltas of an accepted decision.
inline AllocationResult select_allocation(Policy policy, const Request& req, Store& store, Date date, Rng& rng,
                                          double proximity_fraction) {
    AllocationResult decision = decide_allocation(policy, req, store, date, rng, proximity_fraction);
    if (decision)
        for (const BatchDraw& d : decision->draws) store.apply_inventory_delta(d.batch_id, -d.quantity);
    return decision;
}

// Random policy: any bank uniformly; heuristics: the nearest bank (lowest id on ties).
inline int select_donation_bank(Policy policy, Coord user, std::span<const BloodBank> banks, Rng& rng) {
    if (banks.empty()) throw ValidationError("must be non-empty", "banks");
    if (policy == Policy::random) return banks[rng.index(banks.size())].bank_id;
    return nearest_bank(user, banks);
}

// ---- run -----------------------------------------------------------------

inline SimReport run_simulation(const ScenarioConfig& cfg, Store& store) {
    cfg.validate();
    const std::vector<BloodBank> banks = store.banks();
    const std::vector<User> users = store.users();
    if (banks.empty()) throw ValidationError("dataset has no banks", "banks");

    std::vector<const User*> patients, donors;
    for (const User& u : users) {
        if (can_request(u.role)) patients.push_back(&u);
        if (can_donate(u.role)) donors.push_back(&u);
    }
    if (patients.empty() || donors.empty()) throw ValidationError("dataset needs both donors and patients", "users");

    // Events and policy randomness use separate streams so every policy sees the
    // same event sequence for a given seed.
    Rng events(splitmix64(cfg.seed));
    Rng policy_rng(splitmix64(cfg.seed ^ 0xA5A5A5A5DEADBEEFULL));

    SimReport rep;
    rep.policy = cfg.policy;
    rep.start_date = cfg.start_date;
    rep.n_days = cfg.n_days;
    rep.seed = cfg.seed;
    rep.initial_units = store.total_units();

    std::unordered_map<int, std::size_t> series_index;
    std::vector<long> bank_requests(banks.size(), 0), bank_accepted(banks.size(), 0);
    for (std::size_t i = 0; i < banks.size(); ++i) {
        series_index[banks[i].bank_id] = i;
        rep.per_bank_daily.push_back({banks[i].bank_id, {}});
    }
    std::unordered_map<int, int> home_bank;
    auto home_of = [&](const User& u) {
        auto [it, inserted] = home_bank.try_emplace(u.user_id, 0);
        if (inserted) it->second = nearest_bank(u.coord, banks);
        return it->second;
    };

    std::size_t next_tx = 1, next_batch = 1;
    for (int day = 0; day < cfg.n_days; ++day) {
        const Date date = cfg.start_date + day;
        store.set_current_date(date);
        rep.expired_units += purge_expired(store, date);

        const auto n_events = events.uniform_int(cfg.daily_events_min, cfg.daily_events_max);
        for (std::int64_t e = 0; e < n_events; ++e) {
            TransactionRecord tx;
            tx.tx_id = detail::format_id("STX", next_tx++);
            tx.date = date;

            if (events.bernoulli(cfg.request_probability)) {
                const User& patient = *patients[events.index(patients.size())];
                const Component comp = kAllComponents[events.index(kAllComponents.size())];
                const Request req{patient.user_id, patient.coord, patient.blood_type, comp, cfg.request_quantity};
                const AllocationResult result =
                    select_allocation(cfg.policy, req, store, date, policy_rng, cfg.proximity_fraction);

                tx.kind = TxKind::request;
                tx.user_id = patient.user_id;
                tx.blood_type = patient.blood_type;
                tx.component = comp;
                tx.quantity = req.quantity;
                // Requests are attributed to the patient's nearest bank in the daily series.
                const std::size_t si = series_index.at(home_of(patient));
                ++bank_requests[si];
                ++rep.requests;
                if (result) {
                    tx.outcome = TxOutcome::accepted;
                    tx.bank_id = result->bank_id;
                    tx.distance = result->distance;
                    for (const BatchDraw& d : result->draws) {
                        tx.batch_ids.push_back(d.batch_id);
                        tx.batch_quantities.push_back(d.quantity);
                    }
                    ++rep.accepted;
                    ++bank_accepted[si];
                    rep.dispensed_units += req.quantity;
                    rep.request_distance += result->distance;
                } else {
                    tx.outcome = TxOutcome::denied;
                    tx.bank_id = home_of(patient);
                    tx.distance = 0.0;
                    ++rep.denied;
                }
            } else {
                const User& donor = *donors[events.index(donors.size())];
                const Component comp = kAllComponents[events.index(kAllComponents.size())];
                const int bank_id = select_donation_bank(cfg.policy, donor.coord, banks, policy_rng);
                const BloodBank& bank = detail::bank_by_id(banks, bank_id);

                InventoryBatch batch;
                batch.batch_id = detail::format_id("SB", next_batch++);
                batch.bank_id = bank_id;
                batch.blood_type = donor.blood_type;
                batch.component = comp;
                batch.quantity = cfg.donation_quantity;
                batch.entry_date = date;
                batch.expiration_date = date + shelf_life_days(comp);
                store.insert(batch);

                tx.kind = TxKind::donation;
                tx.user_id = donor.user_id;
                tx.bank_id = bank_id;
                tx.blood_type = donor.blood_type;
                tx.component = comp;
                tx.quantity = cfg.donation_quantity;
                tx.outcome = TxOutcome::accepted;
                tx.distance = distance(donor.coord, bank.coord);
                tx.batch_ids = {batch.batch_id};
                tx.batch_quantities = {cfg.donation_quantity};
                rep.donated_units += cfg.donation_quantity;
                rep.donation_distance += tx.distance;
            }
            store.insert(tx);
            rep.transactions.push_back(std::move(tx));
        }

        for (std::size_t i = 0; i < banks.size(); ++i) {
            auto& values = rep.per_bank_daily[i].values;
            const double prev = values.empty() ? 1.0 : values.back();
            values.push_back(bank_requests[i] == 0 ? prev
                                                   : static_cast<double>(bank_accepted[i]) /
                                                         static_cast<double>(bank_requests[i]));
        }
    }

    rep.total_distance = rep.request_distance + rep.donation_distance;
    rep.acceptance_ratio = rep.requests == 0 ? std::numeric_limits<double>::quiet_NaN()
                                             : static_cast<double>(rep.accepted) / static_cast<double>(rep.requests);
    rep.final_units = store.total_units();
    return rep;
}

inline SimReport run_simulation(const ScenarioConfig& cfg, const Dataset& dataset) {
    cfg.validate();
    Store store;
    store.load(dataset);
    return run_simulation(cfg, store);
}

// ---- outputs -------------------------------------------------------------

inline nlohmann::json report_to_json(const SimReport& r) {
    nlohmann::json j;
    j["policy"] = to_string(r.policy);
    j["start_date"] = r.start_date.iso();
    j["n_days"] = r.n_days;
    j["seed"] = r.seed;
    j["requests"] = r.requests;
    j["accepted"] = r.accepted;
    j["denied"] = r.denied;
    j["acceptance_ratio"] = r.acceptance_ratio;
    j["total_distance"] = r.total_distance;
    j["request_distance"] = r.request_distance;
    j["donation_distance"] = r.donation_distance;
    j["initial_units"] = r.initial_units;
    j["donated_units"] = r.donated_units;
    j["dispensed_units"] = r.dispensed_units;
    j["expired_units"] = r.expired_units;
    j["final_units"] = r.final_units;
    nlohmann::json finals = nlohmann::json::array();
    for (const auto& s : r.per_bank_daily)
        finals.push_back({{"bank_id", s.bank_id}, {"final_ratio", s.values.empty() ? 1.0 : s.values.back()}});
    j["per_bank_final"] = std::move(finals);
    j["transaction_count"] = r.transactions.size();
    return j;
}

inline nlohmann::json summary_line(const SimReport& r) {
    return {{"accepted", r.accepted},
            {"denied", r.denied},
            {"acceptance_ratio", r.acceptance_ratio},
            {"total_distance", r.total_distance},
            {"expired_units", r.expired_units}};
}

inline void write_acceptance_series(const std::filesystem::path& path, const std::vector<AcceptanceSeries>& series) {
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw Error("cannot write " + path.string());
    out << "bank_id,day,ratio\n";
    char buf[64];
    for (const auto& s : series) {
        for (std::size_t d = 0; d < s.values.size(); ++d) {
            std::snprintf(buf, sizeof buf, "%d,%zu,%.10f\n", s.bank_id, d + 1, s.values[d]);
            out << buf;
        }
    }
    if (!out) throw Error("write failed for " + path.string());
}

}  // namespace bloodflow
