#pragma once

#include <cstdio>
#include <fstream>
#include <initializer_list>
#include <string>

#include "km/errors.hpp"

namespace km {

/// Minimal CSV emitter; doubles are written with round-trip precision so
/// reruns with the same seed produce byte-identical artifacts.
class CsvWriter {
  public:
    CsvWriter(const std::string& path,
              std::initializer_list<const char*> header)
        : out_(path) {
        if (!out_) throw ConfigError("cannot open output file: " + path);
        bool first = true;
        for (const char* h : header) {
            if (!first) out_ << ',';
            out_ << h;
            first = false;
        }
        out_ << '\n';
    }

    template <typename... Ts>
    void row(Ts... fields) {
        bool first = true;
        ((write_field(fields, first), first = false), ...);
        out_ << '\n';
    }

  private:
    std::ofstream out_;

    void write_field(double v, bool first) {
        char buf[40];
        std::snprintf(buf, sizeof buf, "%.17g", v);
        if (!first) out_ << ',';
        out_ << buf;
    }
    void write_field(std::size_t v, bool first) {
        if (!first) out_ << ',';
        out_ << v;
    }
    void write_field(long v, bool first) {
        if (!first) out_ << ',';
        out_ << v;
    }
    void write_field(int v, bool first) {
        if (!first) out_ << ',';
        out_ << v;
    }
    void write_field(const char* v, bool first) {
        if (!first) out_ << ',';
        out_ << v;
    }
    void write_field(const std::string& v, bool first) {
        if (!first) out_ << ',';
        out_ << v;
    }
};

} // namespace km
