#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <span>
#include <stdexcept>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

#include "lastmile/rng.hpp"

namespace lastmile {

// ---------------------------------------------------------------------------
// Errors
// ---------------------------------------------------------------------------

// Root of the library error hierarchy.  UsageError means the caller violated
// a contract (bad flag, bad config); DataError means the input data cannot be
// processed; InternalError means an invariant of the library itself broke.
class Error : public std::runtime_error {
public:
    explicit Error(const std::string& what) : std::runtime_error(what) {}
};

class UsageError : public Error {
public:
    using Error::Error;
};

class DataError : public Error {
public:
    using Error::Error;
};

class InternalError : public Error {
public:
    using Error::Error;
};

class IoError : public DataError {
public:
    using DataError::DataError;
};

class MissingColumn : public DataError {
public:
    explicit MissingColumn(const std::string& column)
        : DataError("missing required column: " + column), column_(column) {}
    const std::string& column() const { return column_; }

private:
    std::string column_;
};

class WidthMismatch : public DataError {
public:
    using DataError::DataError;
};

class InconsistentStopFeatures : public DataError {
public:
    explicit InconsistentStopFeatures(const std::string& stop_id)
        : DataError("stop " + stop_id + " has conflicting stop-level feature values"),
          stop_id_(stop_id) {}
    const std::string& stop_id() const { return stop_id_; }

private:
    std::string stop_id_;
};

class EmptyClass : public DataError {
public:
    using DataError::DataError;
};

class TooFewMinority : public DataError {
public:
    using DataError::DataError;
};

class DegenerateTraining : public DataError {
public:
    using DataError::DataError;
};

class InvalidConfig : public UsageError {
public:
    using UsageError::UsageError;
};

class UndefinedMetric : public DataError {
public:
    using DataError::DataError;
};

class ZeroSupport : public InternalError {
public:
    using InternalError::InternalError;
};

// ---------------------------------------------------------------------------
// Feature schema
// ---------------------------------------------------------------------------

enum class FeatureKind : std::uint8_t { Numerical, Categorical };

struct FeatureSpec {
    std::string code;  // short stable identifier, e.g. "R9"
    std::string name;  // column name in CSV files, e.g. "TimeWindowSize"
    FeatureKind kind = FeatureKind::Numerical;
    bool service_level = false;  // true for features observed per service record
    std::string unit;            // optional display unit, e.g. "s"
};

// Immutable list of features; index order is the column order of every
// dataset, CSV file and model trained by this library.
class FeatureSchema {
public:
    FeatureSchema() = default;
    explicit FeatureSchema(std::vector<FeatureSpec> specs) : specs_(std::move(specs)) {
        for (std::size_t i = 0; i < specs_.size(); ++i) {
            if (!by_code_.emplace(specs_[i].code, i).second)
                throw InvalidConfig("duplicate feature code: " + specs_[i].code);
            if (!by_name_.emplace(specs_[i].name, i).second)
                throw InvalidConfig("duplicate feature name: " + specs_[i].name);
        }
    }

    std::size_t size() const { return specs_.size(); }
    const FeatureSpec& at(std::size_t i) const { return specs_.at(i); }
    const std::vector<FeatureSpec>& specs() const { return specs_; }

    std::optional<std::size_t> index_of_code(std::string_view code) const {
        auto it = by_code_.find(std::string(code));
        return it == by_code_.end() ? std::nullopt : std::optional<std::size_t>(it->second);
    }

    std::optional<std::size_t> index_of_name(std::string_view name) const {
        auto it = by_name_.find(std::string(name));
        return it == by_name_.end() ? std::nullopt : std::optional<std::size_t>(it->second);
    }

    // Stable content hash: feature order, codes, names and kinds.  Stored in
    // model files so a model is never applied to a differently shaped table.
    std::uint64_t hash() const {
        std::uint64_t h = detail::kFnvOffset;
        for (const auto& s : specs_) {
            h = detail::fnv1a(h, s.code);
            h = detail::fnv1a(h, s.name);
            h = detail::fnv1a(h, static_cast<std::uint64_t>(s.kind));
            h = detail::fnv1a(h, static_cast<std::uint64_t>(s.service_level ? 1 : 0));
            h = detail::fnv1a(h, s.unit);
        }
        return h;
    }

private:
    std::vector<FeatureSpec> specs_;
    std::unordered_map<std::string, std::size_t> by_code_;
    std::unordered_map<std::string, std::size_t> by_name_;
};

// The 32-column feature table used throughout: 26 stop-level features
// (customer, route, phone, date) followed by 6 service-level features.
inline const FeatureSchema& builtin_schema() {
    static const FeatureSchema schema{std::vector<FeatureSpec>{
        {"C1", "Longitude", FeatureKind::Numerical, false},
        {"C2", "Latitude", FeatureKind::Numerical, false},
        {"C3", "DoorNumber", FeatureKind::Categorical, false},
        {"C4", "Street", FeatureKind::Categorical, false},
        {"C5", "AptUnit", FeatureKind::Categorical, false},
        {"C6", "City", FeatureKind::Categorical, false},
        {"C7", "IdProvince", FeatureKind::Categorical, false},
        {"C8", "PostalCode", FeatureKind::Categorical, false},
        {"C9", "IdZone", FeatureKind::Categorical, false},
        {"R1", "Quantity", FeatureKind::Numerical, false},
        {"R2", "CubicFeet", FeatureKind::Numerical, false},
        {"R3", "RoadOrder", FeatureKind::Numerical, false},
        {"R4", "ServiceTime", FeatureKind::Numerical, false},
        {"R5", "TravelTime", FeatureKind::Numerical, false},
        {"R6", "WaitingTime", FeatureKind::Numerical, false},
        {"R7", "TimeWindowPickupStartTime", FeatureKind::Numerical, false},
        {"R8", "TimeWindowPickupEndTime", FeatureKind::Numerical, false},
        {"R9", "TimeWindowSize", FeatureKind::Numerical, false},
        {"R10", "StartSlack", FeatureKind::Numerical, false},
        {"R11", "EndSlack", FeatureKind::Numerical, false},
        {"P1", "PhoneKnown", FeatureKind::Categorical, false},
        {"P2", "IdOutboundCallStatus", FeatureKind::Categorical, false},
        {"P3", "IdOutboundCallAttemptResult", FeatureKind::Categorical, false},
        {"D1", "WeekOfYear", FeatureKind::Numerical, false},
        {"D2", "TimeOfDay", FeatureKind::Numerical, false},
        {"D3", "Day", FeatureKind::Categorical, false},
        {"S1", "IdServiceType", FeatureKind::Categorical, true},
        {"S2", "IdCompany", FeatureKind::Categorical, true},
        {"S3", "NumberOfItems", FeatureKind::Numerical, true},
        {"S4", "WeightOfItems", FeatureKind::Numerical, true},
        {"S5", "IdManufacturer", FeatureKind::Categorical, true},
        {"S6", "EstimatedJobTime", FeatureKind::Numerical, true},
    }};
    return schema;
}

// ---------------------------------------------------------------------------
// Outcomes
// ---------------------------------------------------------------------------

// Stop outcome: success or one of five failure categories, plus a catch-all
// for failures outside those categories.
enum class Outcome : std::uint8_t {
    Success = 0,
    NotAtHome = 1,       // NAH
    ServiceRefused = 2,  // SR
    RescheduledByCustomer = 3,  // RC
    CancelledByCustomer = 4,    // CC
    NoSpaceForService = 5,      // NS
    OtherFailure = 6,
};

constexpr int kOutcomeCount = 7;

// The five modeled failure types, in canonical order.
inline const std::vector<Outcome>& failure_types() {
    static const std::vector<Outcome> kTypes{
        Outcome::NotAtHome, Outcome::ServiceRefused, Outcome::RescheduledByCustomer,
        Outcome::CancelledByCustomer, Outcome::NoSpaceForService};
    return kTypes;
}

constexpr bool is_failure(Outcome o) { return o != Outcome::Success; }

inline std::string_view outcome_token(Outcome o) {
    switch (o) {
        case Outcome::Success: return "SUCCESS";
        case Outcome::NotAtHome: return "NAH";
        case Outcome::ServiceRefused: return "SR";
        case Outcome::RescheduledByCustomer: return "RC";
        case Outcome::CancelledByCustomer: return "CC";
        case Outcome::NoSpaceForService: return "NS";
        case Outcome::OtherFailure: return "OTHER";
    }
    throw InternalError("invalid outcome value");
}

// Token used as the consequent of an association rule, e.g. "FAIL_NAH".
inline std::string fail_token(Outcome o) {
    if (!is_failure(o)) throw UsageError("fail_token requires a failure outcome");
    return "FAIL_" + std::string(outcome_token(o));
}

inline std::optional<Outcome> outcome_from_token(std::string_view token) {
    for (int i = 0; i < kOutcomeCount; ++i) {
        auto o = static_cast<Outcome>(i);
        if (outcome_token(o) == token) return o;
    }
    return std::nullopt;
}

// Long-form display names used in reports.
inline std::string_view outcome_label(Outcome o) {
    switch (o) {
        case Outcome::Success: return "Success";
        case Outcome::NotAtHome: return "Not at home";
        case Outcome::ServiceRefused: return "Service refused";
        case Outcome::RescheduledByCustomer: return "Rescheduled by customer";
        case Outcome::CancelledByCustomer: return "Cancelled by customer";
        case Outcome::NoSpaceForService: return "No space for service";
        case Outcome::OtherFailure: return "Other failure";
    }
    throw InternalError("invalid outcome value");
}

// ---------------------------------------------------------------------------
// Encoding of categorical values
// ---------------------------------------------------------------------------

// Missing values are represented by this sentinel and participate in all
// numeric computation (splits, distances, binning) as an ordinary value.
constexpr double kMissingSentinel = -100.0;

// Dense integer encoding for categorical features, assigned in first
// occurrence order per feature.  The sentinel is never given a code; it
// passes through encode/decode as the literal -100.
class EncodingMap {
public:
    // Returns the code for `raw`, inserting a new one on first sight.
    double encode(std::size_t feature, const std::string& raw) {
        auto& f = features_[feature];
        auto it = f.codes.find(raw);
        if (it != f.codes.end()) return static_cast<double>(it->second);
        int code = static_cast<int>(f.raws.size());
        f.codes.emplace(raw, code);
        f.raws.push_back(raw);
        return static_cast<double>(code);
    }

    std::optional<double> lookup(std::size_t feature, const std::string& raw) const {
        auto fit = features_.find(feature);
        if (fit == features_.end()) return std::nullopt;
        auto it = fit->second.codes.find(raw);
        if (it == fit->second.codes.end()) return std::nullopt;
        return static_cast<double>(it->second);
    }

    // Raw string for a code previously produced by encode().
    const std::string& decode(std::size_t feature, int code) const {
        auto fit = features_.find(feature);
        if (fit == features_.end() || code < 0 ||
            static_cast<std::size_t>(code) >= fit->second.raws.size())
            throw InternalError("decode of unknown categorical code");
        return fit->second.raws[static_cast<std::size_t>(code)];
    }

    std::size_t cardinality(std::size_t feature) const {
        auto fit = features_.find(feature);
        return fit == features_.end() ? 0 : fit->second.raws.size();
    }

    // Ordered view for serialization: feature index -> list of raw values.
    const std::map<std::size_t, std::vector<std::string>> entries() const {
        std::map<std::size_t, std::vector<std::string>> out;
        for (const auto& [k, v] : features_) out.emplace(k, v.raws);
        return out;
    }

private:
    struct FeatureCodes {
        std::vector<std::string> raws;
        std::unordered_map<std::string, int> codes;
    };
    std::map<std::size_t, FeatureCodes> features_;
};

// ---------------------------------------------------------------------------
// Datasets
// ---------------------------------------------------------------------------

// Fully prepared stop-level table: numeric matrix (row major), one outcome
// per row, plus the categorical encoding used to produce the matrix.
struct Dataset {
    FeatureSchema schema;
    std::vector<std::string> stop_ids;
    std::vector<double> values;  // n_rows() * width(), row major
    std::vector<Outcome> labels;
    EncodingMap encoding;

    std::size_t width() const { return schema.size(); }
    std::size_t n_rows() const { return labels.size(); }

    std::span<const double> row(std::size_t r) const {
        return {values.data() + r * width(), width()};
    }

    double at(std::size_t r, std::size_t c) const { return values[r * width() + c]; }

    void append_row(std::string stop_id, std::span<const double> row_values, Outcome label) {
        if (row_values.size() != width())
            throw WidthMismatch("row width " + std::to_string(row_values.size()) +
                                " does not match schema width " + std::to_string(width()));
        stop_ids.push_back(std::move(stop_id));
        values.insert(values.end(), row_values.begin(), row_values.end());
        labels.push_back(label);
    }

    std::size_t count(Outcome o) const {
        std::size_t n = 0;
        for (Outcome l : labels)
            if (l == o) ++n;
        return n;
    }
};

// Row-index view over a Dataset (used for the failed subset F of a corpus C).
struct DatasetView {
    const Dataset* data = nullptr;
    std::vector<std::uint32_t> rows;

    std::size_t size() const { return rows.size(); }
};

inline DatasetView failed_subset(const Dataset& data, Outcome type) {
    if (!is_failure(type)) throw UsageError("failed_subset requires a failure outcome");
    DatasetView v;
    v.data = &data;
    for (std::uint32_t r = 0; r < data.n_rows(); ++r)
        if (data.labels[r] == type) v.rows.push_back(r);
    return v;
}

// Row id given to rows that were synthesized (e.g. by SMOTE) rather than
// drawn from the source table.
constexpr std::uint32_t kSyntheticRowId = 0xffffffffU;

// Binary classification table used by the resamplers and the forest: the
// positive class is one failure type, the negative class is everything else.
struct BinaryDataset {
    std::size_t width = 0;
    std::vector<double> values;       // n_rows() * width, row major
    std::vector<std::uint8_t> labels; // 1 = positive
    std::vector<std::uint32_t> row_ids;  // source row in the originating Dataset

    std::size_t n_rows() const { return labels.size(); }

    std::span<const double> row(std::size_t r) const { return {values.data() + r * width, width}; }

    double at(std::size_t r, std::size_t c) const { return values[r * width + c]; }

    void append_row(std::span<const double> row_values, std::uint8_t label, std::uint32_t row_id) {
        if (row_values.size() != width)
            throw WidthMismatch("row width " + std::to_string(row_values.size()) +
                                " does not match table width " + std::to_string(width));
        values.insert(values.end(), row_values.begin(), row_values.end());
        labels.push_back(label);
        row_ids.push_back(row_id);
    }

    std::size_t count_positive() const {
        std::size_t n = 0;
        for (auto l : labels) n += l;
        return n;
    }
};

// One-vs-rest view of a Dataset for a given failure type.
inline BinaryDataset binarize(const Dataset& data, Outcome type) {
    if (!is_failure(type)) throw UsageError("binarize requires a failure outcome");
    BinaryDataset b;
    b.width = data.width();
    b.values = data.values;
    b.labels.resize(data.n_rows());
    b.row_ids.resize(data.n_rows());
    for (std::size_t r = 0; r < data.n_rows(); ++r) {
        b.labels[r] = data.labels[r] == type ? 1 : 0;
        b.row_ids[r] = static_cast<std::uint32_t>(r);
    }
    return b;
}

}  // namespace lastmile
