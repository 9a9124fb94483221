#pragma once

#include <cstdio>
#include <cstring>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

#include "sclab/grid.hpp"

namespace sclab {

// Grid snapshots: one textual header line, then the node values as raw
// little-endian float64 in x-fastest order. The header round-trips every
// descriptor field exactly (%.17g).
//
//   sclab-field dim=2 extent=401,401 spacing=0.0025 origin=0,0
//   <payload>

inline std::string format_g17(double v) {
    char buf[40];
    std::snprintf(buf, sizeof(buf), "%.17g", v);
    return buf;
}

inline void save_field(const ScalarField& f, const std::string& path) {
    std::ofstream out(path, std::ios::binary);
    require(out.good(), "save_field: cannot open " + path);
    std::ostringstream hdr;
    hdr << "sclab-field dim=" << f.grid.dim << " extent=" << f.grid.extent[0] << ","
        << f.grid.extent[1] << " spacing=" << format_g17(f.grid.spacing) << " origin="
        << format_g17(f.grid.origin[0]) << "," << format_g17(f.grid.origin[1]) << "\n";
    out << hdr.str();
    out.write(reinterpret_cast<const char*>(f.values.data()),
              static_cast<std::streamsize>(f.values.size() * sizeof(double)));
    require(out.good(), "save_field: write failed for " + path);
}

inline ScalarField load_field(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    require(in.good(), "load_field: cannot open " + path);
    std::string header;
    std::getline(in, header);
    GridDesc g;
    {
        std::istringstream hs(header);
        std::string tag;
        hs >> tag;
        require(tag == "sclab-field", "load_field: bad header in " + path);
        std::string kv;
        while (hs >> kv) {
            auto eq = kv.find('=');
            require(eq != std::string::npos, "load_field: malformed header field " + kv);
            std::string key = kv.substr(0, eq), val = kv.substr(eq + 1);
            if (key == "dim") g.dim = std::stoi(val);
            else if (key == "extent") {
                auto comma = val.find(',');
                g.extent[0] = std::stoi(val.substr(0, comma));
                g.extent[1] = std::stoi(val.substr(comma + 1));
            } else if (key == "spacing") g.spacing = std::stod(val);
            else if (key == "origin") {
                auto comma = val.find(',');
                g.origin[0] = std::stod(val.substr(0, comma));
                g.origin[1] = std::stod(val.substr(comma + 1));
            } else
                throw Error("load_field: unknown header key " + key);
        }
    }
    g.validate();
    ScalarField f(g);
    in.read(reinterpret_cast<char*>(f.values.data()),
            static_cast<std::streamsize>(f.values.size() * sizeof(double)));
    require(in.gcount() == static_cast<std::streamsize>(f.values.size() * sizeof(double)),
            "load_field: payload size does not match header extent in " + path);
    return f;
}

// Check that a field file matches an expected grid before accepting it.
inline ScalarField load_field_on(const GridDesc& expected, const std::string& path) {
    ScalarField f = load_field(path);
    require(f.grid == expected, "load_field: grid mismatch between file and configuration");
    return f;
}

// Minimal CSV writer; values are written with %.17g so reruns with the same
// seed are byte-identical.
class CsvWriter {
public:
    CsvWriter(const std::string& path, const std::vector<std::string>& columns) : out_(path) {
        require(out_.good(), "csv: cannot open " + path);
        for (std::size_t i = 0; i < columns.size(); ++i)
            out_ << columns[i] << (i + 1 < columns.size() ? "," : "\n");
    }
    void row(const std::vector<double>& vals) {
        for (std::size_t i = 0; i < vals.size(); ++i)
            out_ << format_g17(vals[i]) << (i + 1 < vals.size() ? "," : "\n");
    }
    void row_strings(const std::vector<std::string>& vals) {
        for (std::size_t i = 0; i < vals.size(); ++i)
            out_ << vals[i] << (i + 1 < vals.size() ? "," : "\n");
    }

private:
    std::ofstream out_;
};

}  // namespace sclab
