#include "bloodflow/store.hpp"
#include "oracles.hpp"

#include <gtest/gtest.h>

#include <atomic>
#include <filesystem>
#include <thread>

using namespace bloodflow;
namespace fs = std::filesystem;

namespace {

const Dataset& default_dataset() {
    static const Dataset ds = generate_dataset(GenConfig{});
    return ds;
}

fs::path scratch_dir(const std::string& name) {
    const fs::path dir = fs::temp_directory_path() / ("bloodflow_store_" + name);
    fs::remove_all(dir);
    return dir;
}

BloodBank bank(int id) {
    return {id, "Bank " + std::to_string(id), "1000" + std::to_string(id % 10), {10.0 * id, 20.0}, "555-0100"};
}

InventoryBatch batch(std::string id, int bank_id, BloodType t, Component c, long qty, Date entry) {
    return {std::move(id), bank_id, t, c, qty, entry, entry + shelf_life_days(c)};
}

std::string dump(const std::vector<InventoryBatch>& v) { return nlohmann::json(v).dump(); }

}  // namespace

TEST(Store, InsertThenFindReturnsEqualRecord) {
    Store s;
    const BloodBank b = bank(1);
    EXPECT_EQ(s.insert(b), "1");
    EXPECT_EQ(s.find_bank(1), b);
    EXPECT_FALSE(s.find_bank(2).has_value());
}

TEST(Store, DuplicateKeyConflicts) {
    Store s;
    s.insert(bank(1));
    EXPECT_THROW(s.insert(bank(1)), ConflictError);
    EXPECT_EQ(s.count(Table::blood_banks), 1u);
}

TEST(Store, SchemaMismatchIsValidationError) {
    Store s;
    nlohmann::json j = bank(1);
    j.erase("zip");
    try {
        s.insert_record(Table::blood_banks, j);
        FAIL() << "expected ValidationError";
    } catch (const ValidationError& e) {
        EXPECT_EQ(e.field(), "zip");
    }
    nlohmann::json bad = bank(1);
    bad["zip"] = "12";
    EXPECT_THROW(s.insert_record(Table::blood_banks, bad), ValidationError);
}

TEST(Store, UnknownBankReferenceRejected) {
    Store s;
    s.insert(bank(1));
    EXPECT_THROW(s.insert(batch("X1", 9, BloodType::OPos, Component::RBC, 1, Date::from_ymd(2023, 1, 1))),
                 ValidationError);
    EXPECT_EQ(s.count(Table::blood_inventory), 0u);
}

TEST(Store, LoadsDefaultDataset) {
    Store s;
    s.load(default_dataset());
    EXPECT_EQ(s.count(Table::blood_transactions), 4200u);
    EXPECT_EQ(s.count(Table::blood_banks), 20u);
    EXPECT_EQ(s.count(Table::users), 1000u);
}

TEST(Store, QueryByBankOrdersByExpiryThenId) {
    Store s;
    s.insert(bank(1));
    s.insert(bank(2));
    const Date d = Date::from_ymd(2023, 1, 1);
    s.insert(batch("C", 1, BloodType::OPos, Component::RBC, 1, d + 5));
    s.insert(batch("A", 1, BloodType::OPos, Component::RBC, 1, d));
    s.insert(batch("B", 1, BloodType::APos, Component::RBC, 0, d));
    s.insert(batch("Z", 2, BloodType::APos, Component::RBC, 4, d));
    const auto rows = s.query_inventory_by_bank(1);
    ASSERT_EQ(rows.size(), 3u);
    EXPECT_EQ(rows[0].batch_id, "A");
    EXPECT_EQ(rows[1].batch_id, "B");
    EXPECT_EQ(rows[2].batch_id, "C");
}

TEST(Store, QueryEmptyAndUnknownBank) {
    Store s;
    s.insert(bank(1));
    EXPECT_TRUE(s.query_inventory_by_bank(1).empty());
    EXPECT_THROW(s.query_inventory_by_bank(99), NotFoundError);
}

TEST(Store, QueryByBankMatchesFullScan) {
    Store s;
    s.load(default_dataset());
    for (int id : {1, 7, 20})
        EXPECT_EQ(dump(s.query_inventory_by_bank(id)), dump(oracle::full_scan_bank(default_dataset().inventory, id)));
}

TEST(Store, AggregateMatchesFullScan) {
    Store s;
    s.load(default_dataset());
    for (BloodType t : kAllBloodTypes)
        for (Component c : kAllComponents)
            EXPECT_EQ(s.aggregate_quantity(t, c), oracle::full_scan_aggregate(default_dataset().inventory, t, c, {}));

    const Date today = GenConfig{}.start_date;
    s.set_current_date(today);
    for (BloodType t : kAllBloodTypes)
        for (Component c : kAllComponents)
            EXPECT_EQ(s.aggregate_quantity(t, c), oracle::full_scan_aggregate(default_dataset().inventory, t, c, today));
}

TEST(Store, AggregateOfAbsentPairIsZero) {
    Store s;
    s.insert(bank(1));
    s.insert(batch("A", 1, BloodType::APos, Component::RBC, 3, Date::from_ymd(2023, 1, 1)));
    EXPECT_EQ(s.aggregate_quantity(BloodType::OPos, Component::WB), 0);
}

TEST(Store, AggregateReflectsDeltas) {
    Store s;
    s.load(default_dataset());
    const long before = s.aggregate_quantity(BloodType::OPos, Component::RBC);
    std::string id;
    for (const auto& b : default_dataset().inventory)
        if (b.blood_type == BloodType::OPos && b.component == Component::RBC && b.quantity >= 2) {
            id = b.batch_id;
            break;
        }
    ASSERT_FALSE(id.empty());
    s.apply_inventory_delta(id, -2);
    EXPECT_EQ(s.aggregate_quantity(BloodType::OPos, Component::RBC), before - 2);
}

TEST(Store, DeltaArithmeticAndUnderflow) {
    Store s;
    s.insert(bank(1));
    const Date d = Date::from_ymd(2023, 1, 1);
    s.insert(batch("A", 1, BloodType::OPos, Component::RBC, 5, d));
    s.insert(batch("B", 1, BloodType::OPos, Component::RBC, 3, d));
    EXPECT_EQ(s.apply_inventory_delta("A", -5), 0);
    EXPECT_THROW(s.apply_inventory_delta("B", -4), UnderflowError);
    EXPECT_EQ(s.find_batch("B")->quantity, 3);
    EXPECT_THROW(s.apply_inventory_delta("nope", 1), NotFoundError);
}

TEST(Store, RandomDeltasMatchReference) {
    Store s;
    s.insert(bank(1));
    const Date d = Date::from_ymd(2023, 1, 1);
    std::vector<long> ref(4, 2);
    for (int i = 0; i < 4; ++i) s.insert(batch("K" + std::to_string(i), 1, BloodType::OPos, Component::PLAS, 2, d));
    Rng rng(11);
    for (int step = 0; step < 100; ++step) {
        const std::size_t k = rng.index(4);
        const long delta = rng.uniform_int(-3, 3);
        const std::string id = "K" + std::to_string(k);
        if (ref[k] + delta < 0) {
            EXPECT_THROW(s.apply_inventory_delta(id, delta), UnderflowError);
        } else {
            ref[k] += delta;
            EXPECT_EQ(s.apply_inventory_delta(id, delta), ref[k]);
        }
        for (std::size_t j = 0; j < 4; ++j) ASSERT_EQ(s.find_batch("K" + std::to_string(j))->quantity, ref[j]);
    }
}

TEST(Store, TransactionsByDay) {
    Store s;
    s.load(default_dataset());
    const Date day = GenConfig{}.start_date - 10;
    std::size_t expected = 0;
    for (const auto& t : default_dataset().transactions) expected += t.date == day;
    const auto got = s.transactions_on(day);
    EXPECT_EQ(got.size(), expected);
    for (const auto& t : got) EXPECT_EQ(t.date, day);
}

TEST(Store, WiderBucketsGiveSameAnswers) {
    Store s(StoreOptions{7});
    s.load(default_dataset());
    const Date day = GenConfig{}.start_date - 3;
    std::size_t expected = 0;
    for (const auto& t : default_dataset().transactions) expected += t.date == day;
    EXPECT_EQ(s.transactions_on(day).size(), expected);
    EXPECT_THROW(Store(StoreOptions{0}), ValidationError);
}

TEST(Store, CloseReopenIsByteIdentical) {
    const fs::path dir = scratch_dir("reopen");
    std::vector<std::string> before;
    {
        Store s(dir);
        s.load(default_dataset());
        s.apply_inventory_delta(default_dataset().inventory.front().batch_id, -1);
        s.apply_inventory_delta(default_dataset().inventory.back().batch_id, 2);
        for (int id = 1; id <= 20; ++id) before.push_back(dump(s.query_inventory_by_bank(id)));
        before.push_back(nlohmann::json(s.transactions()).dump());
        s.close();
        EXPECT_THROW(s.insert(bank(99)), Error);
    }
    EXPECT_FALSE(fs::exists(dir / "blood_inventory.deltas.jsonl"));
    Store r(dir);
    std::vector<std::string> after;
    for (int id = 1; id <= 20; ++id) after.push_back(dump(r.query_inventory_by_bank(id)));
    after.push_back(nlohmann::json(r.transactions()).dump());
    EXPECT_EQ(before, after);
}

TEST(Store, UncompactedDeltasAreReplayed) {
    const fs::path dir = scratch_dir("crash"), copy = scratch_dir("crash_copy");
    Store s(dir);
    s.insert(bank(1));
    s.insert(batch("A", 1, BloodType::OPos, Component::RBC, 5, Date::from_ymd(2023, 1, 1)));
    s.apply_inventory_delta("A", -3);
    s.apply_inventory_delta("A", 1);
    // Snapshot the directory before close() compacts it.
    fs::copy(dir, copy, fs::copy_options::recursive);
    Store r(copy);
    EXPECT_EQ(r.find_batch("A")->quantity, 3);
}

TEST(Store, ConcurrentReadersSeeConsistentTotals) {
    Store s;
    s.insert(bank(1));
    s.insert(batch("A", 1, BloodType::OPos, Component::RBC, 1000, Date::from_ymd(2023, 1, 1)));
    std::atomic<bool> done{false};
    std::atomic<int> bad{0};
    std::vector<std::thread> readers;
    for (int r = 0; r < 4; ++r)
        readers.emplace_back([&] {
            long last = 1000;
            while (!done) {
                const long now = s.aggregate_quantity(BloodType::OPos, Component::RBC);
                if (now > last || now < 0) ++bad;
                last = now;
            }
        });
    for (int i = 0; i < 1000; ++i) s.apply_inventory_delta("A", -1);
    done = true;
    for (auto& t : readers) t.join();
    EXPECT_EQ(bad, 0);
    EXPECT_EQ(s.total_units(), 0);
}
