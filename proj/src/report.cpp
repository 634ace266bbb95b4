#include "rdlab/report.hpp"

#include <cmath>
#include <fstream>

#include "rdlab/errors.hpp"
#include "rdlab/util.hpp"

namespace rdlab {

Json Json::of(bool b) {
    Json j;
    j.kind_ = Kind::boolean;
    j.b_ = b;
    return j;
}

Json Json::of(double v) {
    Json j;
    j.kind_ = Kind::number;
    j.num_ = v;
    return j;
}

Json Json::of(long v) {
    Json j;
    j.kind_ = Kind::integer;
    j.int_ = v;
    return j;
}

Json Json::of(const std::string& s) {
    Json j;
    j.kind_ = Kind::text;
    j.text_ = s;
    return j;
}

Json Json::array() {
    Json j;
    j.kind_ = Kind::array;
    return j;
}

Json Json::object() {
    Json j;
    j.kind_ = Kind::object;
    return j;
}

Json& Json::set(const std::string& key, Json v) {
    obj_.emplace_back(key, std::move(v));
    return *this;
}

Json& Json::push(Json v) {
    arr_.push_back(std::move(v));
    return *this;
}

namespace {

void emit_string(std::string& out, const std::string& s) {
    out += '"';
    for (char c : s) {
        switch (c) {
            case '"': out += "\\\""; break;
            case '\\': out += "\\\\"; break;
            case '\n': out += "\\n"; break;
            case '\t': out += "\\t"; break;
            case '\r': out += "\\r"; break;
            default: out += c;
        }
    }
    out += '"';
}

}  // namespace

void Json::emit(std::string& out, int indent, int depth) const {
    auto pad = [&](int d) {
        if (indent > 0) {
            out += '\n';
            out.append(std::size_t(indent * d), ' ');
        }
    };
    switch (kind_) {
        case Kind::null: out += "null"; break;
        case Kind::boolean: out += b_ ? "true" : "false"; break;
        case Kind::integer: out += std::to_string(int_); break;
        case Kind::number:
            if (std::isfinite(num_)) out += format_g17(num_);
            else if (std::isnan(num_)) out += "\"nan\"";
            else out += num_ > 0 ? "\"inf\"" : "\"-inf\"";
            break;
        case Kind::text: emit_string(out, text_); break;
        case Kind::array: {
            out += '[';
            for (std::size_t i = 0; i < arr_.size(); ++i) {
                if (i) out += ',';
                pad(depth + 1);
                arr_[i].emit(out, indent, depth + 1);
            }
            if (!arr_.empty()) pad(depth);
            out += ']';
            break;
        }
        case Kind::object: {
            out += '{';
            for (std::size_t i = 0; i < obj_.size(); ++i) {
                if (i) out += ',';
                pad(depth + 1);
                emit_string(out, obj_[i].first);
                out += indent > 0 ? ": " : ":";
                obj_[i].second.emit(out, indent, depth + 1);
            }
            if (!obj_.empty()) pad(depth);
            out += '}';
            break;
        }
    }
}

std::string Json::dump(int indent) const {
    std::string out;
    emit(out, indent, 0);
    return out;
}

void write_csv(const std::string& path, const std::vector<std::string>& header,
               const std::vector<std::vector<double>>& rows) {
    std::ofstream f(path);
    if (!f) throw ArgumentError("cannot open output file: " + path);
    for (std::size_t i = 0; i < header.size(); ++i) {
        if (i) f << ',';
        f << header[i];
    }
    f << '\n';
    for (const auto& row : rows) {
        for (std::size_t i = 0; i < row.size(); ++i) {
            if (i) f << ',';
            f << format_g17(row[i]);
        }
        f << '\n';
    }
}

bool RunReport::all_pass() const {
    for (const auto& a : assertions)
        if (!a.pass) return false;
    return true;
}

Json RunReport::to_json() const {
    Json j = Json::object();
    j.set("config_hash", Json::of(std::string("0x") + [this] {
              char buf[32];
              std::snprintf(buf, sizeof buf, "%016llx",
                            static_cast<unsigned long long>(config_hash));
              return std::string(buf);
          }()));
    Json checks = Json::array();
    for (const auto& a : assertions) {
        Json c = Json::object();
        c.set("name", a.name);
        c.set("measured", a.measured);
        c.set("bound", a.bound);
        c.set("pass", a.pass);
        if (!a.note.empty()) c.set("note", a.note);
        checks.push(std::move(c));
    }
    j.set("assertions", std::move(checks));
    j.set("analyses", analyses);
    j.set("all_pass", all_pass());
    j.set("config_echo", config_text);
    j.set("wall_time_ms", wall_time_ms);
    return j;
}

std::uint64_t RunReport::stable_hash() const {
    RunReport copy = *this;
    copy.wall_time_ms = 0.0;
    return fnv1a(copy.to_json().dump());
}

}  // namespace rdlab
