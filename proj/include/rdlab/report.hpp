#pragma once

#include <complex>
#include <map>
#include <memory>
#include <string>
#include <vector>

namespace rdlab {

// minimal JSON value with 17-significant-digit number formatting
class Json {
public:
    enum class Kind { null, boolean, number, integer, text, array, object };

    Json() : kind_(Kind::null) {}
    static Json of(bool b);
    static Json of(double v);
    static Json of(long v);
    static Json of(const std::string& s);
    static Json of(const char* s) { return of(std::string(s)); }
    static Json array();
    static Json object();

    Json& set(const std::string& key, Json v);  // object
    Json& push(Json v);                         // array

    template <typename T>
    Json& set(const std::string& key, T v) { return set(key, Json::of(v)); }
    template <typename T>
    Json& push(T v) { return push(Json::of(v)); }

    std::string dump(int indent = 0) const;

private:
    void emit(std::string& out, int indent, int depth) const;
    Kind kind_;
    bool b_ = false;
    double num_ = 0.0;
    long int_ = 0;
    std::string text_;
    std::vector<Json> arr_;
    std::vector<std::pair<std::string, Json>> obj_;
};

// '.' decimal, no locale, %.17g cells
void write_csv(const std::string& path, const std::vector<std::string>& header,
               const std::vector<std::vector<double>>& rows);

struct Assertion {
    std::string name;
    double measured = 0.0;
    double bound = 0.0;
    bool pass = false;
    std::string note;
};

struct RunReport {
    std::string config_text;
    std::uint64_t config_hash = 0;
    Json analyses = Json::object();
    std::vector<Assertion> assertions;
    double wall_time_ms = 0.0;  // excluded from the determinism contract

    bool all_pass() const;
    Json to_json() const;
    std::uint64_t stable_hash() const;  // hash of the report without wall time
};

}  // namespace rdlab
