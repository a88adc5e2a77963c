#pragma once

// Record types shared by the generator, the store and the simulator, together
// with their JSON forms and invariant checks.

#include "bloodflow/date.hpp"
#include "bloodflow/domain.hpp"
#include "bloodflow/error.hpp"

#include <nlohmann/json.hpp>

#include <cmath>
#include <string>
#include <vector>

namespace bloodflow {

inline constexpr double kPlaneSize = 1000.0;

struct Coord {
    double x = 0.0;
    double y = 0.0;
    friend bool operator==(const Coord&, const Coord&) = default;
};

inline double distance(Coord a, Coord b) noexcept { return std::hypot(a.x - b.x, a.y - b.y); }

enum class UserRole : std::uint8_t { donor, patient, both };
enum class TxKind : std::uint8_t { donation, request };
enum class TxOutcome : std::uint8_t { accepted, denied, na };

constexpr std::string_view to_string(UserRole r) noexcept {
    switch (r) {
        case UserRole::donor: return "donor";
        case UserRole::patient: return "patient";
        case UserRole::both: return "both";
    }
    return "";
}
constexpr std::string_view to_string(TxKind k) noexcept {
    return k == TxKind::donation ? "donation" : "request";
}
constexpr std::string_view to_string(TxOutcome o) noexcept {
    switch (o) {
        case TxOutcome::accepted: return "accepted";
        case TxOutcome::denied: return "denied";
        case TxOutcome::na: return "n/a";
    }
    return "";
}

constexpr bool can_donate(UserRole r) noexcept { return r != UserRole::patient; }
constexpr bool can_request(UserRole r) noexcept { return r != UserRole::donor; }

inline bool is_valid_zip(std::string_view zip) noexcept {
    if (zip.size() != 5) return false;
    for (char c : zip)
        if (c < '0' || c > '9') return false;
    return true;
}

struct BloodBank {
    int bank_id = 0;
    std::string name;
    std::string zip;
    Coord coord;
    std::string contact;
    friend bool operator==(const BloodBank&, const BloodBank&) = default;
};

struct User {
    int user_id = 0;
    UserRole role = UserRole::donor;
    BloodType blood_type = BloodType::OPos;
    std::string zip;
    Coord coord;
    std::string name;
    std::string phone;
    std::string email;
    friend bool operator==(const User&, const User&) = default;
};

// entry_date is carried so the expiry invariant can be checked per batch.
struct InventoryBatch {
    std::string batch_id;
    int bank_id = 0;
    BloodType blood_type = BloodType::OPos;
    Component component = Component::RBC;
    long quantity = 0;
    Date entry_date;
    Date expiration_date;
    friend bool operator==(const InventoryBatch&, const InventoryBatch&) = default;
};

// batch_quantities runs parallel to batch_ids: units drawn from (or added to) each batch.
struct TransactionRecord {
    std::string tx_id;
    TxKind kind = TxKind::donation;
    int user_id = 0;
    int bank_id = 0;
    BloodType blood_type = BloodType::OPos;
    Component component = Component::RBC;
    long quantity = 0;
    Date date;
    TxOutcome outcome = TxOutcome::accepted;
    double distance = 0.0;
    std::vector<std::string> batch_ids;
    std::vector<long> batch_quantities;
    friend bool operator==(const TransactionRecord&, const TransactionRecord&) = default;
};

// ---- invariants ----------------------------------------------------------

inline void validate_coord(Coord c, const char* field) {
    auto in_plane = [](double v) { return std::isfinite(v) && v >= 0.0 && v <= kPlaneSize; };
    if (!in_plane(c.x) || !in_plane(c.y)) throw ValidationError("must lie in [0,1000]^2", field);
}

inline void validate(const BloodBank& b) {
    if (b.bank_id <= 0) throw ValidationError("must be positive", "bank_id");
    if (!is_valid_zip(b.zip)) throw ValidationError("must be 5 digits", "zip");
    validate_coord(b.coord, "coord");
}

inline void validate(const User& u) {
    if (u.user_id <= 0) throw ValidationError("must be positive", "user_id");
    if (!is_valid_zip(u.zip)) throw ValidationError("must be 5 digits", "zip");
    validate_coord(u.coord, "coord");
}

inline void validate(const InventoryBatch& b) {
    if (b.batch_id.empty()) throw ValidationError("must be non-empty", "batch_id");
    if (b.bank_id <= 0) throw ValidationError("must be positive", "bank_id");
    if (b.quantity < 0) throw ValidationError("must be non-negative", "quantity");
    if (b.expiration_date != b.entry_date + shelf_life_days(b.component))
        throw ValidationError("must equal entry_date + shelf life of component", "expiration_date");
}

inline void validate(const TransactionRecord& t) {
    if (t.tx_id.empty()) throw ValidationError("must be non-empty", "tx_id");
    if (t.quantity < 1) throw ValidationError("must be at least 1", "quantity");
    if (!(t.distance >= 0.0) || !std::isfinite(t.distance))
        throw ValidationError("must be finite and non-negative", "distance");
    if (t.batch_ids.size() != t.batch_quantities.size())
        throw ValidationError("must parallel batch_ids", "batch_quantities");
    if (t.kind == TxKind::donation && t.outcome != TxOutcome::accepted)
        throw ValidationError("donations are always accepted", "outcome");
    if (t.kind == TxKind::request && t.outcome == TxOutcome::na)
        throw ValidationError("requests are accepted or denied", "outcome");
    const bool needs_batches = t.kind == TxKind::donation || t.outcome == TxOutcome::accepted;
    if (needs_batches == t.batch_ids.empty())
        throw ValidationError(needs_batches ? "must be non-empty" : "must be empty for denied requests",
                              "batch_ids");
    long drawn = 0;
    for (long q : t.batch_quantities) {
        if (q < 1) throw ValidationError("entries must be positive", "batch_quantities");
        drawn += q;
    }
    if (needs_batches && drawn != t.quantity)
        throw ValidationError("must sum to quantity", "batch_quantities");
}

// ---- JSON ------------------------------------------------------------------

namespace detail {

template <class T>
T get_field(const nlohmann::json& j, const char* key) {
    if (!j.is_object() || !j.contains(key)) throw ValidationError("missing field", key);
    try {
        return j.at(key).get<T>();
    } catch (const nlohmann::json::exception&) {
        throw ValidationError("wrong type", key);
    }
}

template <class Enum, class Parse>
Enum get_enum(const nlohmann::json& j, const char* key, Parse parse) {
    const auto text = get_field<std::string>(j, key);
    try {
        return parse(text);
    } catch (const ValidationError&) {
        throw ValidationError("invalid value '" + text + "'", key);
    }
}

inline Date get_date(const nlohmann::json& j, const char* key) {
    const auto text = get_field<std::string>(j, key);
    try {
        return Date::parse(text);
    } catch (const ValidationError&) {
        throw ValidationError("invalid date '" + text + "'", key);
    }
}

inline UserRole parse_role(std::string_view s) {
    for (UserRole r : {UserRole::donor, UserRole::patient, UserRole::both})
        if (to_string(r) == s) return r;
    throw ValidationError("unknown role");
}

inline TxKind parse_kind(std::string_view s) {
    for (TxKind k : {TxKind::donation, TxKind::request})
        if (to_string(k) == s) return k;
    throw ValidationError("unknown kind");
}

inline TxOutcome parse_outcome(std::string_view s) {
    for (TxOutcome o : {TxOutcome::accepted, TxOutcome::denied, TxOutcome::na})
        if (to_string(o) == s) return o;
    throw ValidationError("unknown outcome");
}

inline Coord get_coord(const nlohmann::json& j) {
    const auto c = get_field<nlohmann::json>(j, "coord");
    return {get_field<double>(c, "x"), get_field<double>(c, "y")};
}

}  // namespace detail

inline void to_json(nlohmann::json& j, const Coord& c) { j = {{"x", c.x}, {"y", c.y}}; }

inline void to_json(nlohmann::json& j, const BloodBank& b) {
    j = nlohmann::json{{"bank_id", b.bank_id}, {"name", b.name},   {"zip", b.zip},
                       {"coord", b.coord},     {"contact", b.contact}};
}

inline void from_json(const nlohmann::json& j, BloodBank& b) {
    b.bank_id = detail::get_field<int>(j, "bank_id");
    b.name = detail::get_field<std::string>(j, "name");
    b.zip = detail::get_field<std::string>(j, "zip");
    b.coord = detail::get_coord(j);
    b.contact = detail::get_field<std::string>(j, "contact");
}

inline void to_json(nlohmann::json& j, const User& u) {
    j = nlohmann::json{{"user_id", u.user_id},
                       {"role", to_string(u.role)},
                       {"blood_type", to_string(u.blood_type)},
                       {"zip", u.zip},
                       {"coord", u.coord},
                       {"name", u.name},
                       {"phone", u.phone},
                       {"email", u.email}};
}

inline void from_json(const nlohmann::json& j, User& u) {
    u.user_id = detail::get_field<int>(j, "user_id");
    u.role = detail::get_enum<UserRole>(j, "role", detail::parse_role);
    u.blood_type = detail::get_enum<BloodType>(j, "blood_type", parse_blood_type);
    u.zip = detail::get_field<std::string>(j, "zip");
    u.coord = detail::get_coord(j);
    u.name = detail::get_field<std::string>(j, "name");
    u.phone = detail::get_field<std::string>(j, "phone");
    u.email = detail::get_field<std::string>(j, "email");
}

inline void to_json(nlohmann::json& j, const InventoryBatch& b) {
    j = nlohmann::json{{"batch_id", b.batch_id},
                       {"bank_id", b.bank_id},
                       {"blood_type", to_string(b.blood_type)},
                       {"component", to_string(b.component)},
                       {"quantity", b.quantity},
                       {"entry_date", b.entry_date.iso()},
                       {"expiration_date", b.expiration_date.iso()}};
}

inline void from_json(const nlohmann::json& j, InventoryBatch& b) {
    b.batch_id = detail::get_field<std::string>(j, "batch_id");
    b.bank_id = detail::get_field<int>(j, "bank_id");
    b.blood_type = detail::get_enum<BloodType>(j, "blood_type", parse_blood_type);
    b.component = detail::get_enum<Component>(j, "component", parse_component);
    b.quantity = detail::get_field<long>(j, "quantity");
    b.entry_date = detail::get_date(j, "entry_date");
    b.expiration_date = detail::get_date(j, "expiration_date");
}

inline void to_json(nlohmann::json& j, const TransactionRecord& t) {
    j = nlohmann::json{{"tx_id", t.tx_id},
                       {"kind", to_string(t.kind)},
                       {"user_id", t.user_id},
                       {"bank_id", t.bank_id},
                       {"blood_type", to_string(t.blood_type)},
                       {"component", to_string(t.component)},
                       {"quantity", t.quantity},
                       {"date", t.date.iso()},
                       {"outcome", to_string(t.outcome)},
                       {"distance", t.distance},
                       {"batch_ids", t.batch_ids},
                       {"batch_quantities", t.batch_quantities}};
}

inline void from_json(const nlohmann::json& j, TransactionRecord& t) {
    t.tx_id = detail::get_field<std::string>(j, "tx_id");
    t.kind = detail::get_enum<TxKind>(j, "kind", detail::parse_kind);
    t.user_id = detail::get_field<int>(j, "user_id");
    t.bank_id = detail::get_field<int>(j, "bank_id");
    t.blood_type = detail::get_enum<BloodType>(j, "blood_type", parse_blood_type);
    t.component = detail::get_enum<Component>(j, "component", parse_component);
    t.quantity = detail::get_field<long>(j, "quantity");
    t.date = detail::get_date(j, "date");
    t.outcome = detail::get_enum<TxOutcome>(j, "outcome", detail::parse_outcome);
    t.distance = detail::get_field<double>(j, "distance");
    t.batch_ids = detail::get_field<std::vector<std::string>>(j, "batch_ids");
    t.batch_quantities = detail::get_field<std::vector<long>>(j, "batch_quantities");
}

}  // namespace bloodflow
