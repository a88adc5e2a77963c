#pragma once

// Partition-keyed record store over the four tables blood_banks, users,
// blood_inventory and blood_transactions.
//
// Backends: in-memory, or a directory of append-only JSON-lines segments
// (<dir>/<table>.jsonl). Inventory quantity changes are appended to
// blood_inventory.deltas.jsonl and folded into blood_inventory.jsonl on close().
// Opening a directory rebuilds the partition index and replays pending deltas.
//
// Consistency: one writer at a time, any number of readers. Every read returns
// a copy taken under a shared lock, so readers see a consistent snapshot and a
// writer always reads its own writes.

#include "bloodflow/date.hpp"
#include "bloodflow/domain.hpp"
#include "bloodflow/error.hpp"
#include "bloodflow/records.hpp"
#include "bloodflow/synthgen.hpp"

#include <nlohmann/json.hpp>

#include <algorithm>
#include <array>
#include <filesystem>
#include <fstream>
#include <map>
#include <mutex>
#include <optional>
#include <shared_mutex>
#include <tuple>
#include <string>
#include <unordered_map>
#include <vector>

namespace bloodflow {

enum class Table : std::uint8_t { blood_banks, users, blood_inventory, blood_transactions };

inline constexpr std::array<Table, 4> kAllTables{Table::blood_banks, Table::users, Table::blood_inventory,
                                                 Table::blood_transactions};

constexpr std::string_view table_name(Table t) noexcept {
    constexpr std::array<std::string_view, 4> names{"blood_banks", "users", "blood_inventory",
                                                    "blood_transactions"};
    return names[static_cast<std::size_t>(t)];
}

inline Table parse_table(std::string_view name) {
    for (Table t : kAllTables)
        if (table_name(t) == name) return t;
    throw ValidationError("unknown table '" + std::string(name) + "'", "table");
}

struct StoreOptions {
    // Width of a blood_transactions partition, in days.
    int transaction_bucket_days = 1;
};

class Store {
public:
    Store() = default;
    explicit Store(StoreOptions options) : options_(options) { check_options(); }

    // Opens (creating if needed) a file-backed store rooted at `dir`.
    explicit Store(std::filesystem::path dir, StoreOptions options = {})
        : options_(options), dir_(std::move(dir)) {
        check_options();
        std::filesystem::create_directories(*dir_);
        load_from_disk();
    }

    Store(const Store&) = delete;
    Store& operator=(const Store&) = delete;

    ~Store() {
        try {
            close();
        } catch (...) {
        }
    }

    bool persistent() const noexcept { return dir_.has_value(); }
    const std::optional<std::filesystem::path>& directory() const noexcept { return dir_; }

    // Compacts pending inventory deltas and releases the segment files. Idempotent;
    // a closed store rejects further writes.
    void close() {
        std::unique_lock lock(mutex_);
        if (closed_) return;
        closed_ = true;
        if (!dir_) return;
        for (auto& s : segments_) s.close();
        if (dirty_inventory_) {
            const auto target = path_of(Table::blood_inventory);
            const auto tmp = target.string() + ".tmp";
            {
                std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
                for (const InventoryBatch& b : batches_) out << nlohmann::json(b).dump() << '\n';
                if (!out) throw Error("compaction failed for " + target.string());
            }
            std::filesystem::rename(tmp, target);
        }
        std::filesystem::remove(deltas_path());
    }

    // ---- writes ------------------------------------------------------------

    std::string insert(const BloodBank& b) {
        std::unique_lock lock(mutex_);
        ensure_open();
        add_bank(b);
        append(Table::blood_banks, nlohmann::json(b));
        return std::to_string(b.bank_id);
    }

    std::string insert(const User& u) {
        std::unique_lock lock(mutex_);
        ensure_open();
        add_user(u);
        append(Table::users, nlohmann::json(u));
        return std::to_string(u.user_id);
    }

    std::string insert(const InventoryBatch& b) {
        std::unique_lock lock(mutex_);
        ensure_open();
        add_batch(b);
        append(Table::blood_inventory, nlohmann::json(b));
        return b.batch_id;
    }

    std::string insert(const TransactionRecord& t) {
        std::unique_lock lock(mutex_);
        ensure_open();
        add_transaction(t);
        append(Table::blood_transactions, nlohmann::json(t));
        return t.tx_id;
    }

    // Untyped entry point: the record must parse as the table's schema.
    std::string insert_record(Table table, const nlohmann::json& record) {
        switch (table) {
            case Table::blood_banks: return insert(record.get<BloodBank>());
            case Table::users: return insert(record.get<User>());
            case Table::blood_inventory: return insert(record.get<InventoryBatch>());
            case Table::blood_transactions: return insert(record.get<TransactionRecord>());
        }
        throw ValidationError("unknown table", "table");
    }

    void load(const Dataset& ds) {
        for (const auto& b : ds.banks) insert(b);
        for (const auto& u : ds.users) insert(u);
        for (const auto& b : ds.inventory) insert(b);
        for (const auto& t : ds.transactions) insert(t);
    }

    // Adjusts one batch's quantity. Rejects (state unchanged) if the result would be negative.
    long apply_inventory_delta(const std::string& batch_id, long delta) {
        std::unique_lock lock(mutex_);
        ensure_open();
        auto it = batch_pos_.find(batch_id);
        if (it == batch_pos_.end()) throw NotFoundError("unknown batch " + batch_id);
        InventoryBatch& batch = batches_[it->second];
        if (batch.quantity + delta < 0)
            throw UnderflowError("batch " + batch_id + " holds " + std::to_string(batch.quantity) +
                                 ", cannot apply delta " + std::to_string(delta));
        if (dir_) {
            auto& out = delta_stream();
            out << nlohmann::json{{"batch_id", batch_id}, {"delta", delta}}.dump() << '\n';
            out.flush();
            dirty_inventory_ = true;
        }
        batch.quantity += delta;
        return batch.quantity;
    }

    void set_current_date(Date d) {
        std::unique_lock lock(mutex_);
        current_date_ = d;
    }

    // ---- reads -------------------------------------------------------------

    std::optional<Date> current_date() const {
        std::shared_lock lock(mutex_);
        return current_date_;
    }

    std::size_t count(Table table) const {
        std::shared_lock lock(mutex_);
        switch (table) {
            case Table::blood_banks: return banks_.size();
            case Table::users: return users_.size();
            case Table::blood_inventory: return batches_.size();
            case Table::blood_transactions: return transactions_.size();
        }
        return 0;
    }

    std::optional<BloodBank> find_bank(int bank_id) const {
        std::shared_lock lock(mutex_);
        auto it = banks_.find(bank_id);
        return it == banks_.end() ? std::nullopt : std::optional(it->second);
    }

    std::optional<User> find_user(int user_id) const {
        std::shared_lock lock(mutex_);
        auto it = users_.find(user_id);
        return it == users_.end() ? std::nullopt : std::optional(it->second);
    }

    std::optional<InventoryBatch> find_batch(const std::string& batch_id) const {
        std::shared_lock lock(mutex_);
        auto it = batch_pos_.find(batch_id);
        return it == batch_pos_.end() ? std::nullopt : std::optional(batches_[it->second]);
    }

    std::optional<TransactionRecord> find_transaction(const std::string& tx_id) const {
        std::shared_lock lock(mutex_);
        auto it = tx_pos_.find(tx_id);
        return it == tx_pos_.end() ? std::nullopt : std::optional(transactions_[it->second]);
    }

    // Ordered by bank_id.
    std::vector<BloodBank> banks() const {
        std::shared_lock lock(mutex_);
        std::vector<BloodBank> out;
        out.reserve(banks_.size());
        for (const auto& [id, b] : banks_) out.push_back(b);
        return out;
    }

    // Ordered by user_id.
    std::vector<User> users() const {
        std::shared_lock lock(mutex_);
        std::vector<User> out;
        out.reserve(users_.size());
        for (const auto& [id, u] : users_) out.push_back(u);
        return out;
    }

    // Insertion order.
    std::vector<InventoryBatch> inventory() const {
        std::shared_lock lock(mutex_);
        return batches_;
    }

    // Insertion order.
    std::vector<TransactionRecord> transactions() const {
        std::shared_lock lock(mutex_);
        return transactions_;
    }

    // Transactions dated `day`, read from its date-bucket partition.
    std::vector<TransactionRecord> transactions_on(Date day) const {
        std::shared_lock lock(mutex_);
        std::vector<TransactionRecord> out;
        auto it = tx_partitions_.find(bucket_of(day));
        if (it == tx_partitions_.end()) return out;
        for (std::size_t pos : it->second)
            if (transactions_[pos].date == day) out.push_back(transactions_[pos]);
        return out;
    }

    // Every batch in the bank's partition, zero-quantity ones included, ordered by
    // (expiration_date, batch_id).
    std::vector<InventoryBatch> query_inventory_by_bank(int bank_id) const {
        std::shared_lock lock(mutex_);
        if (!banks_.contains(bank_id)) throw NotFoundError("unknown bank " + std::to_string(bank_id));
        std::vector<InventoryBatch> out;
        if (auto it = inventory_partitions_.find(bank_id); it != inventory_partitions_.end()) {
            out.reserve(it->second.size());
            for (std::size_t pos : it->second) out.push_back(batches_[pos]);
        }
        std::sort(out.begin(), out.end(), [](const InventoryBatch& a, const InventoryBatch& b) {
            return std::tie(a.expiration_date, a.batch_id) < std::tie(b.expiration_date, b.batch_id);
        });
        return out;
    }

    // Network-wide units of (type, component), skipping batches expired as of the
    // current date. With no current date set nothing counts as expired.
    long aggregate_quantity(BloodType type, Component component) const {
        std::shared_lock lock(mutex_);
        long total = 0;
        for (const auto& [bank, positions] : inventory_partitions_) {
            for (std::size_t pos : positions) {
                const InventoryBatch& b = batches_[pos];
                if (b.blood_type != type || b.component != component) continue;
                if (current_date_ && b.expiration_date < *current_date_) continue;
                total += b.quantity;
            }
        }
        return total;
    }

    long total_units() const {
        std::shared_lock lock(mutex_);
        long total = 0;
        for (const InventoryBatch& b : batches_) total += b.quantity;
        return total;
    }

private:
    void check_options() const {
        if (options_.transaction_bucket_days < 1)
            throw ValidationError("must be at least 1", "transaction_bucket_days");
    }

    void ensure_open() const {
        if (closed_) throw Error("store is closed");
    }

    long bucket_of(Date d) const {
        const long days = options_.transaction_bucket_days;
        const long s = d.serial();
        return s >= 0 ? s / days : -((-s + days - 1) / days);
    }

    std::filesystem::path path_of(Table t) const { return *dir_ / (std::string(table_name(t)) + ".jsonl"); }
    std::filesystem::path deltas_path() const { return *dir_ / "blood_inventory.deltas.jsonl"; }

    std::ofstream& segment(Table t) {
        auto& s = segments_[static_cast<std::size_t>(t)];
        if (!s.is_open()) {
            s.open(path_of(t), std::ios::binary | std::ios::app);
            if (!s) throw Error("cannot open segment " + path_of(t).string());
        }
        return s;
    }

    std::ofstream& delta_stream() {
        if (!deltas_.is_open()) {
            deltas_.open(deltas_path(), std::ios::binary | std::ios::app);
            if (!deltas_) throw Error("cannot open " + deltas_path().string());
        }
        return deltas_;
    }

    void append(Table t, const nlohmann::json& record) {
        if (!dir_) return;
        auto& out = segment(t);
        out << record.dump() << '\n';
        out.flush();
        if (!out) throw Error("write failed for " + path_of(t).string());
    }

    void add_bank(const BloodBank& b) {
        validate(b);
        if (banks_.contains(b.bank_id)) throw ConflictError("duplicate bank_id " + std::to_string(b.bank_id));
        banks_.emplace(b.bank_id, b);
    }

    void add_user(const User& u) {
        validate(u);
        if (users_.contains(u.user_id)) throw ConflictError("duplicate user_id " + std::to_string(u.user_id));
        users_.emplace(u.user_id, u);
    }

    void add_batch(const InventoryBatch& b) {
        validate(b);
        if (batch_pos_.contains(b.batch_id)) throw ConflictError("duplicate batch_id " + b.batch_id);
        if (!banks_.contains(b.bank_id))
            throw ValidationError("references unknown bank " + std::to_string(b.bank_id), "bank_id");
        batch_pos_.emplace(b.batch_id, batches_.size());
        inventory_partitions_[b.bank_id].push_back(batches_.size());
        batches_.push_back(b);
    }

    void add_transaction(const TransactionRecord& t) {
        validate(t);
        if (tx_pos_.contains(t.tx_id)) throw ConflictError("duplicate tx_id " + t.tx_id);
        if (!banks_.contains(t.bank_id))
            throw ValidationError("references unknown bank " + std::to_string(t.bank_id), "bank_id");
        if (!users_.contains(t.user_id))
            throw ValidationError("references unknown user " + std::to_string(t.user_id), "user_id");
        for (const auto& id : t.batch_ids)
            if (!batch_pos_.contains(id)) throw ValidationError("references unknown batch " + id, "batch_ids");
        tx_pos_.emplace(t.tx_id, transactions_.size());
        tx_partitions_[bucket_of(t.date)].push_back(transactions_.size());
        transactions_.push_back(t);
    }

    template <class T, class Add>
    void replay(Table t, Add add) {
        const auto path = path_of(t);
        if (!std::filesystem::exists(path)) return;
        for (const T& record : read_jsonl<T>(path)) (this->*add)(record);
    }

    void load_from_disk() {
        replay<BloodBank>(Table::blood_banks, &Store::add_bank);
        replay<User>(Table::users, &Store::add_user);
        replay<InventoryBatch>(Table::blood_inventory, &Store::add_batch);
        replay<TransactionRecord>(Table::blood_transactions, &Store::add_transaction);

        if (std::filesystem::exists(deltas_path())) {
            std::ifstream in(deltas_path(), std::ios::binary);
            std::string line;
            while (std::getline(in, line)) {
                if (line.empty()) continue;
                const auto j = nlohmann::json::parse(line);
                const auto id = j.at("batch_id").get<std::string>();
                auto it = batch_pos_.find(id);
                if (it == batch_pos_.end()) throw ValidationError("delta for unknown batch " + id, "batch_id");
                batches_[it->second].quantity += j.at("delta").get<long>();
            }
            dirty_inventory_ = true;
        }
    }

    StoreOptions options_{};
    std::optional<std::filesystem::path> dir_;
    bool closed_ = false;
    bool dirty_inventory_ = false;
    std::optional<Date> current_date_;

    std::map<int, BloodBank> banks_;
    std::map<int, User> users_;

    std::vector<InventoryBatch> batches_;
    std::unordered_map<std::string, std::size_t> batch_pos_;
    std::map<int, std::vector<std::size_t>> inventory_partitions_;

    std::vector<TransactionRecord> transactions_;
    std::unordered_map<std::string, std::size_t> tx_pos_;
    std::map<long, std::vector<std::size_t>> tx_partitions_;

    std::array<std::ofstream, 4> segments_;
    std::ofstream deltas_;
    mutable std::shared_mutex mutex_;
};

}  // namespace bloodflow
