#pragma once

// Seeded synthetic dataset: blood banks, users, seed donations and the
// inventory batches they create.

#include "bloodflow/date.hpp"
#include "bloodflow/domain.hpp"
#include "bloodflow/error.hpp"
#include "bloodflow/random.hpp"
#include "bloodflow/records.hpp"

#include <nlohmann/json.hpp>

#include <algorithm>
#include <array>
#include <cstdint>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <map>
#include <set>
#include <sstream>
#include <string>
#include <string_view>
#include <tuple>
#include <vector>

namespace bloodflow {

struct GenConfig {
    int n_banks = 20;
    int n_users = 1000;
    int n_seed_transactions = 4200;
    Date start_date = Date::from_ymd(2023, 1, 1);
    // Seed donations are spread uniformly over the days preceding start_date.
    int pre_window_days = 60;
    std::uint64_t seed = 42;

    void validate() const {
        if (n_banks <= 0) throw ValidationError("must be positive", "n_banks");
        if (n_users <= 0) throw ValidationError("must be positive", "n_users");
        if (n_seed_transactions <= 0) throw ValidationError("must be positive", "n_seed_transactions");
        if (pre_window_days <= 0) throw ValidationError("must be positive", "pre_window_days");
    }
};

struct Dataset {
    std::vector<BloodBank> banks;
    std::vector<User> users;
    std::vector<InventoryBatch> inventory;
    std::vector<TransactionRecord> transactions;
    friend bool operator==(const Dataset&, const Dataset&) = default;
};

// Deterministic ZIP -> point in the [0,1000]^2 plane.
inline Coord zip_to_coord(std::string_view zip, std::uint64_t seed) {
    if (!is_valid_zip(zip)) throw ValidationError("must match [0-9]{5}", "zip");
    std::uint64_t code = 0;
    for (char c : zip) code = code * 10 + static_cast<std::uint64_t>(c - '0');
    const std::uint64_t hx = splitmix64(splitmix64(seed) ^ code);
    const std::uint64_t hy = splitmix64(hx);
    return {unit_interval(hx) * kPlaneSize, unit_interval(hy) * kPlaneSize};
}

namespace detail {

inline constexpr std::array<std::string_view, 24> kFirstNames{
    "Amara", "Bilal", "Chen",  "Daria", "Elena", "Farid", "Grace", "Hugo",
    "Imani", "Jonas", "Kenji", "Leila", "Mateo", "Nadia", "Omar",  "Priya",
    "Quinn", "Rosa",  "Samir", "Tala",  "Umar",  "Vera",  "Wen",   "Yusuf"};

inline constexpr std::array<std::string_view, 20> kLastNames{
    "Abara",  "Bianchi", "Castro", "Dubois", "Eze",     "Fischer", "Garcia",
    "Haddad", "Ivanova", "Jensen", "Kato",   "Lindqvist", "Mensah", "Novak",
    "Okafor", "Petrov",  "Rahman", "Silva",  "Tanaka",  "Usman"};

inline constexpr std::array<std::string_view, 16> kPlaces{
    "Riverside", "Hillcrest", "Lakeview", "Northgate", "Southfield", "Eastwood",
    "Westbrook", "Cedar",     "Maple",    "Harbor",    "Summit",     "Valley",
    "Pinecrest", "Oakridge",  "Meadow",   "Stonebridge"};

inline std::string random_zip(Rng& rng) {
    char buf[8];
    std::snprintf(buf, sizeof buf, "%05d", static_cast<int>(rng.uniform_int(0, 99999)));
    return buf;
}

inline std::string random_phone(Rng& rng) {
    char buf[24];
    std::snprintf(buf, sizeof buf, "555-%03d-%04d", static_cast<int>(rng.uniform_int(100, 999)),
                  static_cast<int>(rng.uniform_int(0, 9999)));
    return buf;
}

template <std::size_t N>
std::string_view pick_word(Rng& rng, const std::array<std::string_view, N>& words) {
    return words[rng.index(N)];
}

inline std::string lowercase(std::string_view s) {
    std::string out(s);
    for (char& c : out)
        if (c >= 'A' && c <= 'Z') c = static_cast<char>(c - 'A' + 'a');
    return out;
}

inline std::string format_id(const char* prefix, std::size_t n) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "%s%06zu", prefix, n);
    return buf;
}

}  // namespace detail

inline Dataset generate_dataset(const GenConfig& cfg) {
    cfg.validate();
    Rng rng(cfg.seed);
    Dataset ds;

    std::set<std::string> bank_zips;
    for (int i = 1; i <= cfg.n_banks; ++i) {
        BloodBank b;
        b.bank_id = i;
        b.name = std::string(detail::pick_word(rng, detail::kPlaces)) + " Blood Center " + std::to_string(i);
        do {
            b.zip = detail::random_zip(rng);
        } while (cfg.n_banks <= 100000 && !bank_zips.insert(b.zip).second);
        b.coord = zip_to_coord(b.zip, cfg.seed);
        b.contact = detail::random_phone(rng);
        ds.banks.push_back(std::move(b));
    }

    for (int i = 1; i <= cfg.n_users; ++i) {
        User u;
        u.user_id = i;
        const double r = rng.uniform01();
        u.role = r < 0.45 ? UserRole::donor : (r < 0.90 ? UserRole::patient : UserRole::both);
        u.blood_type = sample_blood_type(rng);
        u.zip = detail::random_zip(rng);
        u.coord = zip_to_coord(u.zip, cfg.seed);
        const auto first = detail::pick_word(rng, detail::kFirstNames);
        const auto last = detail::pick_word(rng, detail::kLastNames);
        u.name = std::string(first) + " " + std::string(last);
        u.phone = detail::random_phone(rng);
        u.email = detail::lowercase(first) + "." + detail::lowercase(last) + std::to_string(i) + "@example.org";
        ds.users.push_back(std::move(u));
    }

    std::vector<const User*> donors;
    for (const User& u : ds.users)
        if (can_donate(u.role)) donors.push_back(&u);
    if (donors.empty()) throw ValidationError("population contains no donors", "n_users");

    struct SeedDonation {
        Date date;
        int user_id;
        BloodType type;
        int bank_id;
        Component component;
    };
    std::vector<SeedDonation> events;
    events.reserve(static_cast<std::size_t>(cfg.n_seed_transactions));
    for (int k = 0; k < cfg.n_seed_transactions; ++k) {
        const User& donor = *donors[rng.index(donors.size())];
        const int bank_id = static_cast<int>(rng.uniform_int(1, cfg.n_banks));
        const Component comp = kAllComponents[rng.index(kAllComponents.size())];
        const Date date = cfg.start_date - static_cast<int>(rng.uniform_int(1, cfg.pre_window_days));
        events.push_back({date, donor.user_id, donor.blood_type, bank_id, comp});
    }
    std::stable_sort(events.begin(), events.end(),
                     [](const SeedDonation& a, const SeedDonation& b) { return a.date < b.date; });

    // One batch per (bank, type, component, entry date); repeat donations top it up.
    std::map<std::tuple<int, BloodType, Component, long>, std::size_t> batch_index;
    for (std::size_t k = 0; k < events.size(); ++k) {
        const SeedDonation& e = events[k];
        const auto key = std::make_tuple(e.bank_id, e.type, e.component, e.date.serial());
        auto [it, inserted] = batch_index.try_emplace(key, ds.inventory.size());
        if (inserted) {
            InventoryBatch b;
            b.batch_id = detail::format_id("B", ds.inventory.size() + 1);
            b.bank_id = e.bank_id;
            b.blood_type = e.type;
            b.component = e.component;
            b.entry_date = e.date;
            b.expiration_date = e.date + shelf_life_days(e.component);
            ds.inventory.push_back(std::move(b));
        }
        InventoryBatch& batch = ds.inventory[it->second];
        batch.quantity += 1;

        TransactionRecord t;
        t.tx_id = detail::format_id("TX", k + 1);
        t.kind = TxKind::donation;
        t.user_id = e.user_id;
        t.bank_id = e.bank_id;
        t.blood_type = e.type;
        t.component = e.component;
        t.quantity = 1;
        t.date = e.date;
        t.outcome = TxOutcome::accepted;
        t.distance = distance(ds.users[static_cast<std::size_t>(e.user_id - 1)].coord,
                              ds.banks[static_cast<std::size_t>(e.bank_id - 1)].coord);
        t.batch_ids = {batch.batch_id};
        t.batch_quantities = {1};
        ds.transactions.push_back(std::move(t));
    }
    return ds;
}

// ---- JSON-lines files ----------------------------------------------------

inline constexpr std::array<std::string_view, 4> kDatasetFiles{"banks.jsonl", "users.jsonl",
                                                               "inventory.jsonl", "transactions.jsonl"};

template <class T>
void write_jsonl(const std::filesystem::path& path, const std::vector<T>& records) {
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw Error("cannot write " + path.string());
    for (const T& r : records) out << nlohmann::json(r).dump() << '\n';
    if (!out) throw Error("write failed for " + path.string());
}

template <class T>
std::vector<T> read_jsonl(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw NotFoundError("cannot open " + path.string());
    std::vector<T> out;
    std::string line;
    std::size_t line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        if (line.empty()) continue;
        try {
            out.push_back(nlohmann::json::parse(line).get<T>());
        } catch (const nlohmann::json::parse_error& e) {
            throw ValidationError(path.filename().string() + ":" + std::to_string(line_no) + ": " + e.what());
        } catch (const ValidationError& e) {
            throw ValidationError(path.filename().string() + ":" + std::to_string(line_no) + ": " + e.what());
        }
    }
    return out;
}

inline void write_dataset(const std::filesystem::path& dir, const Dataset& ds) {
    std::filesystem::create_directories(dir);
    write_jsonl(dir / kDatasetFiles[0], ds.banks);
    write_jsonl(dir / kDatasetFiles[1], ds.users);
    write_jsonl(dir / kDatasetFiles[2], ds.inventory);
    write_jsonl(dir / kDatasetFiles[3], ds.transactions);
}

inline Dataset read_dataset(const std::filesystem::path& dir) {
    Dataset ds;
    ds.banks = read_jsonl<BloodBank>(dir / kDatasetFiles[0]);
    ds.users = read_jsonl<User>(dir / kDatasetFiles[1]);
    ds.inventory = read_jsonl<InventoryBatch>(dir / kDatasetFiles[2]);
    ds.transactions = read_jsonl<TransactionRecord>(dir / kDatasetFiles[3]);
    return ds;
}

// FNV-1a over the files' bytes in a fixed order, as 16 hex digits.
inline std::string hash_files(const std::vector<std::filesystem::path>& files) {
    std::uint64_t h = 0xcbf29ce484222325ULL;
    for (const auto& path : files) {
        std::ifstream in(path, std::ios::binary);
        if (!in) throw NotFoundError("cannot open " + path.string());
        char buf[1 << 14];
        while (in.read(buf, sizeof buf) || in.gcount() > 0) {
            for (std::streamsize i = 0; i < in.gcount(); ++i) {
                h ^= static_cast<unsigned char>(buf[i]);
                h *= 0x100000001b3ULL;
            }
        }
    }
    char out[20];
    std::snprintf(out, sizeof out, "%016llx", static_cast<unsigned long long>(h));
    return out;
}

inline std::string dataset_hash(const std::filesystem::path& dir) {
    std::vector<std::filesystem::path> files;
    for (auto name : kDatasetFiles) files.push_back(dir / name);
    return hash_files(files);
}

}  // namespace bloodflow
