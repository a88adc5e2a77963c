#include "bloodflow/simengine.hpp"
#include "oracles.hpp"

#include <gtest/gtest.h>

#include <map>

using namespace bloodflow;

namespace {

const Date kDay = Date::from_ymd(2023, 3, 1);

BloodBank bank(int id, Coord c) { return {id, "Bank " + std::to_string(id), "10000", c, "555-0100"}; }

InventoryBatch expiring(std::string id, int bank_id, BloodType t, Component c, long qty, Date expiry) {
    return {std::move(id), bank_id, t, c, qty, expiry - shelf_life_days(c), expiry};
}

Request request(BloodType t, Component c, long qty = 1, Coord at = {0, 0}) { return {1, at, t, c, qty}; }

const Dataset& default_dataset() {
    static const Dataset ds = generate_dataset(GenConfig{});
    return ds;
}

ScenarioConfig scenario(Policy p, int days = 30, std::uint64_t seed = 1) {
    ScenarioConfig cfg;
    cfg.policy = p;
    cfg.n_days = days;
    cfg.seed = seed;
    return cfg;
}

constexpr Policy kPolicies[] = {Policy::random, Policy::heuristic_proximity_expiry, Policy::heuristic_rarity};

}  // namespace

TEST(Purge, UnitUsableOnExpiryDayRemovedAfter) {
    Store s;
    s.insert(bank(1, {0, 0}));
    s.insert(expiring("A", 1, BloodType::OPos, Component::RBC, 2, kDay));
    EXPECT_EQ(purge_expired(s, kDay), 0);
    EXPECT_EQ(s.find_batch("A")->quantity, 2);
    EXPECT_EQ(purge_expired(s, kDay + 1), 2);
    EXPECT_EQ(s.find_batch("A")->quantity, 0);
}

TEST(Purge, PlateletsDonatedOnDayDGoneOnDayDPlus6) {
    Store s;
    s.insert(bank(1, {0, 0}));
    const Date d = kDay;
    s.insert(InventoryBatch{"P", 1, BloodType::OPos, Component::PLAT, 1, d, d + 5});
    Rng rng(1);
    for (int k = 0; k <= 5; ++k) {
        EXPECT_EQ(purge_expired(s, d + k), 0) << k;
        ASSERT_TRUE(decide_allocation(Policy::heuristic_proximity_expiry, request(BloodType::OPos, Component::PLAT), s,
                                      d + k, rng, 1.0));
    }
    EXPECT_EQ(purge_expired(s, d + 6), 1);
}

TEST(Candidates, FifteenPercentOfTwentyIsThree) {
    std::vector<BloodBank> banks;
    for (int i = 1; i <= 20; ++i) banks.push_back(bank(i, {static_cast<double>(i * 10), 0}));
    EXPECT_EQ(candidate_banks({0, 0}, banks, 0.15), (std::vector<int>{1, 2, 3}));
    EXPECT_EQ(candidate_banks({0, 0}, banks, 1.0).size(), 20u);
    EXPECT_EQ(candidate_banks({0, 0}, banks, 0.01).size(), 1u);
    EXPECT_THROW(candidate_banks({0, 0}, banks, 0.0), ValidationError);
}

TEST(Candidates, TiesBreakOnBankId) {
    const std::vector<BloodBank> banks{bank(5, {10, 0}), bank(2, {0, 10}), bank(9, {3, 0})};
    EXPECT_EQ(candidate_banks({0, 0}, banks, 1.0), (std::vector<int>{9, 2, 5}));
}

TEST(Candidates, MatchBruteForce) {
    Rng rng(3);
    for (int trial = 0; trial < 200; ++trial) {
        std::vector<BloodBank> banks;
        for (int i = 1; i <= 7; ++i)
            banks.push_back(bank(i, {static_cast<double>(rng.uniform_int(0, 5)), static_cast<double>(rng.uniform_int(0, 5))}));
        rng.shuffle(banks);
        const Coord user{static_cast<double>(rng.uniform_int(0, 5)), static_cast<double>(rng.uniform_int(0, 5))};
        EXPECT_EQ(candidate_banks(user, banks, 0.3), oracle::brute_force_candidates(user, banks, 0.3));
    }
}

TEST(Allocation, RandomPolicyNeedsExactTypeAndComponent) {
    Store s;
    s.insert(bank(1, {0, 0}));
    s.insert(expiring("O", 1, BloodType::ONeg, Component::PLAS, 5, kDay + 30));
    Rng rng(1);
    EXPECT_FALSE(decide_allocation(Policy::random, request(BloodType::ANeg, Component::PLAS), s, kDay, rng, 0.15));
    s.insert(expiring("A", 1, BloodType::ANeg, Component::RBC, 5, kDay + 30));
    EXPECT_FALSE(decide_allocation(Policy::random, request(BloodType::ANeg, Component::PLAS), s, kDay, rng, 0.15));
    s.insert(expiring("A2", 1, BloodType::ANeg, Component::PLAS, 5, kDay + 30));
    const auto d = decide_allocation(Policy::random, request(BloodType::ANeg, Component::PLAS), s, kDay, rng, 0.15);
    ASSERT_TRUE(d);
    EXPECT_EQ(d->draws.front().batch_id, "A2");
}

TEST(Allocation, HeuristicFallsBackToUniversalDonor) {
    Store s;
    s.insert(bank(1, {0, 0}));
    s.insert(expiring("O", 1, BloodType::ONeg, Component::RBC, 5, kDay + 30));
    Rng rng(1);
    for (Policy p : {Policy::heuristic_proximity_expiry, Policy::heuristic_rarity}) {
        const auto d = decide_allocation(p, request(BloodType::ABPos, Component::RBC), s, kDay, rng, 0.15);
        ASSERT_TRUE(d);
        EXPECT_EQ(d->served_blood_type, BloodType::ONeg);
    }
}

TEST(Allocation, RarityPrefersCommonType) {
    Store s;
    s.insert(bank(1, {0, 0}));
    // O- expires first, so expiry order alone would pick it.
    s.insert(expiring("ON", 1, BloodType::ONeg, Component::PLAS, 5, kDay + 10));
    s.insert(expiring("OP", 1, BloodType::OPos, Component::PLAS, 5, kDay + 200));
    Rng rng(1);
    const auto rarity = decide_allocation(Policy::heuristic_rarity, request(BloodType::OPos, Component::PLAS), s, kDay, rng, 0.15);
    ASSERT_TRUE(rarity);
    EXPECT_EQ(rarity->served_blood_type, BloodType::OPos);
    const auto expiry = decide_allocation(Policy::heuristic_proximity_expiry, request(BloodType::OPos, Component::PLAS), s,
                                          kDay, rng, 0.15);
    ASSERT_TRUE(expiry);
    EXPECT_EQ(expiry->served_blood_type, BloodType::ONeg);
}

TEST(Allocation, SkipsBankThatCannotCoverQuantity) {
    Store s;
    s.insert(bank(1, {0, 0}));
    s.insert(bank(2, {50, 0}));
    s.insert(expiring("near", 1, BloodType::OPos, Component::RBC, 1, kDay + 5));
    s.insert(expiring("far", 2, BloodType::OPos, Component::RBC, 3, kDay + 5));
    Rng rng(1);
    const auto d = decide_allocation(Policy::heuristic_proximity_expiry, request(BloodType::OPos, Component::RBC, 2), s, kDay,
                                     rng, 1.0);
    ASSERT_TRUE(d);
    EXPECT_EQ(d->bank_id, 2);
    EXPECT_DOUBLE_EQ(d->distance, 50.0);
    EXPECT_FALSE(decide_allocation(Policy::heuristic_proximity_expiry, request(BloodType::OPos, Component::RBC, 2), s, kDay,
                                   rng, 0.5));
}

TEST(Allocation, NeverDispensesExpiredUnits) {
    Store s;
    s.insert(bank(1, {0, 0}));
    s.insert(expiring("old", 1, BloodType::OPos, Component::RBC, 5, kDay - 1));
    Rng rng(1);
    for (Policy p : kPolicies)
        EXPECT_FALSE(decide_allocation(p, request(BloodType::OPos, Component::RBC), s, kDay, rng, 1.0));
}

TEST(Allocation, SelectAppliesDeltas) {
    Store s;
    s.insert(bank(1, {0, 0}));
    s.insert(expiring("A", 1, BloodType::OPos, Component::RBC, 2, kDay + 3));
    s.insert(expiring("B", 1, BloodType::OPos, Component::RBC, 2, kDay + 9));
    Rng rng(1);
    const auto d = select_allocation(Policy::heuristic_rarity, request(BloodType::OPos, Component::RBC, 3), s, kDay, rng, 1.0);
    ASSERT_TRUE(d);
    ASSERT_EQ(d->draws.size(), 2u);
    EXPECT_EQ(s.find_batch("A")->quantity, 0);
    EXPECT_EQ(s.find_batch("B")->quantity, 1);
}

TEST(Allocation, MatchesBruteForceOnMicroInstances) {
    Rng gen(2024);
    int accepted = 0;
    for (int trial = 0; trial < 200; ++trial) {
        const oracle::MicroInstance inst = oracle::random_micro_instance(gen);
        Store s;
        oracle::load_micro_instance(s, inst);
        for (Policy p : kPolicies) {
            Rng rng(static_cast<std::uint64_t>(trial));
            Rng peek = rng;
            const std::size_t idx = peek.index(inst.banks.size());
            const auto got = decide_allocation(p, inst.request, s, inst.date, rng, inst.fraction);
            const auto want = oracle::brute_force_allocation(p, inst, idx);
            ASSERT_EQ(got.has_value(), want.has_value()) << "trial " << trial << " policy " << to_string(p);
            if (got) {
                EXPECT_EQ(*got, *want) << "trial " << trial << " policy " << to_string(p);
                ++accepted;
            }
        }
    }
    EXPECT_GT(accepted, 50);
}

TEST(DonationBank, HeuristicPicksNearest) {
    const std::vector<BloodBank> banks{bank(1, {100, 100}), bank(2, {0, 5}), bank(3, {0, 5})};
    Rng rng(1);
    EXPECT_EQ(select_donation_bank(Policy::heuristic_rarity, {0, 0}, banks, rng), 2);
    EXPECT_EQ(select_donation_bank(Policy::heuristic_proximity_expiry, {100, 99}, banks, rng), 1);
}

TEST(DonationBank, HeuristicNeverFartherThanRandom) {
    std::vector<BloodBank> banks;
    Rng layout(8);
    for (int i = 1; i <= 20; ++i)
        banks.push_back(bank(i, {layout.uniform01() * kPlaneSize, layout.uniform01() * kPlaneSize}));
    Rng a(1), b(1);
    for (int k = 0; k < 1000; ++k) {
        const Coord donor{layout.uniform01() * kPlaneSize, layout.uniform01() * kPlaneSize};
        const int near = select_donation_bank(Policy::heuristic_rarity, donor, banks, a);
        const int rand = select_donation_bank(Policy::random, donor, banks, b);
        EXPECT_LE(distance(donor, banks[static_cast<std::size_t>(near - 1)].coord),
                  distance(donor, banks[static_cast<std::size_t>(rand - 1)].coord));
    }
}

TEST(Scenario, RejectsBadConfig) {
    ScenarioConfig cfg = scenario(Policy::random);
    cfg.n_days = 0;
    try {
        cfg.validate();
        FAIL() << "expected ValidationError";
    } catch (const ValidationError& e) {
        EXPECT_EQ(e.field(), "n_days");
    }
    cfg = scenario(Policy::random);
    cfg.daily_events_min = 60;
    EXPECT_THROW(cfg.validate(), ValidationError);
    cfg = scenario(Policy::random);
    cfg.proximity_fraction = 1.5;
    EXPECT_THROW(cfg.validate(), ValidationError);
    EXPECT_THROW(parse_policy("greedy"), ValidationError);
}

TEST(Simulation, ThirtyDayRunStaysInRange) {
    const SimReport r = run_simulation(scenario(Policy::random), default_dataset());
    const long events = static_cast<long>(r.transactions.size());
    EXPECT_GE(events, 30 * 40);
    EXPECT_LE(events, 30 * 50);
    EXPECT_EQ(r.accepted + r.denied, r.requests);
    EXPECT_GT(r.acceptance_ratio, 0.0);
    EXPECT_LT(r.acceptance_ratio, 1.0);
    EXPECT_EQ(r.per_bank_daily.size(), 20u);
    for (const auto& s : r.per_bank_daily) EXPECT_EQ(s.values.size(), 30u);
}

TEST(Simulation, ConservesUnits) {
    for (Policy p : kPolicies) {
        Store store;
        store.load(default_dataset());
        const SimReport r = run_simulation(scenario(p, 45, 4), store);
        EXPECT_EQ(r.initial_units + r.donated_units - r.dispensed_units - r.expired_units, r.final_units);
        EXPECT_EQ(store.total_units(), r.final_units);
        long drawn = 0;
        for (const auto& t : r.transactions)
            if (t.kind == TxKind::request && t.outcome == TxOutcome::accepted)
                for (long q : t.batch_quantities) drawn += q;
        EXPECT_EQ(drawn, r.dispensed_units);
    }
}

TEST(Simulation, SameSeedSameReport) {
    for (Policy p : kPolicies) {
        const SimReport a = run_simulation(scenario(p, 20, 9), default_dataset());
        const SimReport b = run_simulation(scenario(p, 20, 9), default_dataset());
        EXPECT_EQ(report_to_json(a).dump(), report_to_json(b).dump());
        EXPECT_EQ(a.transactions, b.transactions);
        EXPECT_EQ(a.per_bank_daily, b.per_bank_daily);
    }
}

TEST(Simulation, PoliciesSeeTheSameEventStream) {
    const SimReport a = run_simulation(scenario(Policy::random, 10, 5), default_dataset());
    const SimReport b = run_simulation(scenario(Policy::heuristic_rarity, 10, 5), default_dataset());
    ASSERT_EQ(a.transactions.size(), b.transactions.size());
    for (std::size_t i = 0; i < a.transactions.size(); ++i) {
        EXPECT_EQ(a.transactions[i].kind, b.transactions[i].kind);
        EXPECT_EQ(a.transactions[i].user_id, b.transactions[i].user_id);
        EXPECT_EQ(a.transactions[i].component, b.transactions[i].component);
    }
}

TEST(Simulation, AcceptanceSeriesIsCumulativePerHomeBank) {
    const SimReport r = run_simulation(scenario(Policy::heuristic_rarity, 15, 2), default_dataset());
    const std::vector<BloodBank>& banks = default_dataset().banks;
    std::map<int, const User*> users;
    for (const auto& u : default_dataset().users) users[u.user_id] = &u;
    std::map<int, long> req, acc;
    std::map<int, std::vector<double>> series;
    for (int day = 0; day < 15; ++day) {
        const Date date = ScenarioConfig{}.start_date + day;
        for (const auto& t : r.transactions) {
            if (t.date != date || t.kind != TxKind::request) continue;
            // Nearest bank; banks are listed by id, so a strict < keeps the smaller id on ties.
            int home = 0;
            double best = 1e300;
            for (const auto& b : banks) {
                const double dist = distance(users[t.user_id]->coord, b.coord);
                if (dist < best) best = dist, home = b.bank_id;
            }
            ++req[home];
            acc[home] += t.outcome == TxOutcome::accepted;
        }
        for (const auto& b : banks) {
            auto& v = series[b.bank_id];
            const double prev = v.empty() ? 1.0 : v.back();
            v.push_back(req[b.bank_id] ? static_cast<double>(acc[b.bank_id]) / req[b.bank_id] : prev);
        }
    }
    for (const auto& s : r.per_bank_daily) EXPECT_EQ(s.values, series[s.bank_id]) << s.bank_id;
}
