#include "bloodflow/synthgen.hpp"

#include <gtest/gtest.h>

#include <cmath>
#include <cstdio>
#include <filesystem>
#include <map>
#include <set>

using namespace bloodflow;
namespace fs = std::filesystem;

namespace {

const Dataset& default_dataset() {
    static const Dataset ds = generate_dataset(GenConfig{});
    return ds;
}

fs::path scratch_dir(const std::string& name) {
    const fs::path dir = fs::temp_directory_path() / ("bloodflow_synthgen_" + name);
    fs::remove_all(dir);
    return dir;
}

}  // namespace

TEST(ZipToCoord, DeterministicAndInPlane) {
    const Coord a = zip_to_coord("10001", 42), b = zip_to_coord("10001", 42);
    EXPECT_EQ(a.x, b.x);
    EXPECT_EQ(a.y, b.y);
    EXPECT_GE(a.x, 0.0);
    EXPECT_LE(a.x, kPlaneSize);
    const Coord c = zip_to_coord("10002", 42);
    EXPECT_FALSE(a.x == c.x && a.y == c.y);
}

TEST(ZipToCoord, NoCollisionsAcrossAllZips) {
    std::set<std::pair<double, double>> seen;
    char zip[8];
    for (int i = 0; i < 100000; ++i) {
        std::snprintf(zip, sizeof zip, "%05d", i);
        const Coord c = zip_to_coord(zip, 42);
        ASSERT_TRUE(seen.emplace(c.x, c.y).second) << zip;
    }
}

TEST(ZipToCoord, ApproximatelyUniform) {
    Rng rng(5);
    double sx = 0.0, sy = 0.0;
    constexpr int n = 10000;
    char zip[8];
    for (int i = 0; i < n; ++i) {
        std::snprintf(zip, sizeof zip, "%05d", static_cast<int>(rng.uniform_int(0, 99999)));
        const Coord c = zip_to_coord(zip, 42);
        sx += c.x;
        sy += c.y;
    }
    EXPECT_NEAR(sx / n, 500.0, 10.0);
    EXPECT_NEAR(sy / n, 500.0, 10.0);
}

TEST(ZipToCoord, RejectsMalformedZip) {
    EXPECT_THROW(zip_to_coord("1234", 42), ValidationError);
    EXPECT_THROW(zip_to_coord("12a45", 42), ValidationError);
    EXPECT_THROW(zip_to_coord("123456", 42), ValidationError);
}

TEST(Generate, DefaultCounts) {
    const Dataset& ds = default_dataset();
    EXPECT_EQ(ds.banks.size(), 20u);
    EXPECT_EQ(ds.users.size(), 1000u);
    EXPECT_EQ(ds.transactions.size(), 4200u);
}

TEST(Generate, EveryRecordValidates) {
    const Dataset& ds = default_dataset();
    for (const auto& b : ds.banks) EXPECT_NO_THROW(validate(b));
    for (const auto& u : ds.users) EXPECT_NO_THROW(validate(u));
    for (const auto& b : ds.inventory) EXPECT_NO_THROW(validate(b));
    for (const auto& t : ds.transactions) EXPECT_NO_THROW(validate(t));
}

TEST(Generate, SameSeedSameBytes) {
    GenConfig cfg;
    cfg.seed = 7;
    const fs::path a = scratch_dir("a"), b = scratch_dir("b");
    write_dataset(a, generate_dataset(cfg));
    write_dataset(b, generate_dataset(cfg));
    EXPECT_EQ(dataset_hash(a), dataset_hash(b));
    cfg.seed = 8;
    const fs::path c = scratch_dir("c");
    write_dataset(c, generate_dataset(cfg));
    EXPECT_NE(dataset_hash(a), dataset_hash(c));
}

TEST(Generate, ReadBackEqualsWritten) {
    const fs::path dir = scratch_dir("roundtrip");
    write_dataset(dir, default_dataset());
    EXPECT_EQ(read_dataset(dir), default_dataset());
}

TEST(Generate, ReferentialIntegrity) {
    const Dataset& ds = default_dataset();
    std::map<int, const User*> users;
    for (const auto& u : ds.users) users[u.user_id] = &u;
    std::set<int> banks;
    for (const auto& b : ds.banks) banks.insert(b.bank_id);
    std::map<std::string, const InventoryBatch*> batches;
    for (const auto& b : ds.inventory) batches[b.batch_id] = &b;

    for (const auto& t : ds.transactions) {
        ASSERT_TRUE(users.count(t.user_id));
        EXPECT_TRUE(banks.count(t.bank_id));
        EXPECT_EQ(t.kind, TxKind::donation);
        EXPECT_TRUE(can_donate(users[t.user_id]->role));
        EXPECT_EQ(t.blood_type, users[t.user_id]->blood_type);
        ASSERT_EQ(t.batch_ids.size(), 1u);
        ASSERT_TRUE(batches.count(t.batch_ids[0]));
        const InventoryBatch& b = *batches[t.batch_ids[0]];
        EXPECT_EQ(b.bank_id, t.bank_id);
        EXPECT_EQ(b.blood_type, t.blood_type);
        EXPECT_EQ(b.component, t.component);
        EXPECT_EQ(b.entry_date, t.date);
        EXPECT_LT(t.date, GenConfig{}.start_date);
        EXPECT_GE(GenConfig{}.start_date - t.date, 1);
        EXPECT_LE(GenConfig{}.start_date - t.date, 60);
    }
}

TEST(Generate, InventoryConservesDonatedUnits) {
    const Dataset& ds = default_dataset();
    std::map<std::string, long> donated;
    for (const auto& t : ds.transactions) donated[t.batch_ids[0]] += t.quantity;
    long total = 0;
    for (const auto& b : ds.inventory) {
        EXPECT_EQ(b.quantity, donated[b.batch_id]);
        total += b.quantity;
    }
    EXPECT_EQ(total, 4200);
}

TEST(Generate, BankZipsAreUnique) {
    std::set<std::string> zips;
    for (const auto& b : default_dataset().banks) EXPECT_TRUE(zips.insert(b.zip).second);
}

TEST(Generate, BloodTypesFollowPopulationDistribution) {
    GenConfig cfg;
    cfg.n_users = 20000;
    cfg.n_seed_transactions = 10;
    const Dataset ds = generate_dataset(cfg);
    std::map<BloodType, int> counts;
    for (const auto& u : ds.users) ++counts[u.blood_type];
    const double n = static_cast<double>(cfg.n_users);
    for (BloodType t : kAllBloodTypes) {
        const double p = type_probability(t);
        const double sd = std::sqrt(n * p * (1.0 - p));
        EXPECT_LE(std::abs(counts[t] - n * p), 4.0 * sd) << to_string(t);
    }
}

TEST(Generate, RoleMix) {
    GenConfig cfg;
    cfg.n_users = 20000;
    cfg.n_seed_transactions = 10;
    const Dataset ds = generate_dataset(cfg);
    int donors = 0, patients = 0, both = 0;
    for (const auto& u : ds.users) {
        donors += u.role == UserRole::donor;
        patients += u.role == UserRole::patient;
        both += u.role == UserRole::both;
    }
    EXPECT_NEAR(donors / 20000.0, 0.45, 0.015);
    EXPECT_NEAR(patients / 20000.0, 0.45, 0.015);
    EXPECT_NEAR(both / 20000.0, 0.10, 0.01);
}

TEST(Generate, RejectsBadConfig) {
    GenConfig cfg;
    cfg.n_banks = 0;
    try {
        generate_dataset(cfg);
        FAIL() << "expected ValidationError";
    } catch (const ValidationError& e) {
        EXPECT_EQ(e.field(), "n_banks");
    }
    cfg = {};
    cfg.n_users = -1;
    EXPECT_THROW(generate_dataset(cfg), ValidationError);
}
