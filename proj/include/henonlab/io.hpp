#ifndef HENONLAB_IO_HPP
#define HENONLAB_IO_HPP

#include <array>
#include <cstdio>
#include <fstream>
#include <ostream>
#include <string>
#include <vector>

#include <json.hpp>

#include "continuation.hpp"

namespace henonlab {
namespace io {

// 17 significant digits round-trip doubles exactly.
inline std::string fmt17(double v) {
    char buf[40];
    std::snprintf(buf, sizeof buf, "%.17g", v);
    return buf;
}

struct PpmImage {
    int width = 0, height = 0;
    std::vector<std::array<unsigned char, 3>> pixels;  // row-major, top row first

    PpmImage() = default;
    PpmImage(int w, int h) : width(w), height(h), pixels(std::size_t(w) * h, {0, 0, 0}) {}

    std::array<unsigned char, 3>& at(int x, int y) {
        return pixels[std::size_t(y) * width + x];
    }
};

inline void write_ppm(const PpmImage& img, std::ostream& os) {
    os << "P6\n" << img.width << ' ' << img.height << "\n255\n";
    for (const auto& px : img.pixels)
        os.write(reinterpret_cast<const char*>(px.data()), 3);
}

// Fixed scan palette (documented in the README):
//   no-crossing          -> (32, 160, 64)   green
//   crossing             -> (220, 48, 32)   red
//   continuation-failure -> (240, 200, 48)  yellow
inline std::array<unsigned char, 3> verdict_color(continuation::CellVerdict v) {
    switch (v) {
        case continuation::CellVerdict::no_crossing: return {32, 160, 64};
        case continuation::CellVerdict::crossing: return {220, 48, 32};
        default: return {240, 200, 48};
    }
}

inline void write_scan_csv(const continuation::ScanResult& res, std::ostream& os) {
    os << "lambda_re,lambda_im,verdict,n_orbits,min_multiplier_gap\n";
    for (const auto& cell : res.cells)
        os << fmt17(cell.lambda.real()) << ',' << fmt17(cell.lambda.imag()) << ','
           << continuation::to_string(cell.verdict) << ',' << cell.n_orbits << ','
           << fmt17(cell.min_multiplier_gap) << '\n';
}

inline void write_scan_ppm(const continuation::ScanResult& res, std::ostream& os) {
    PpmImage img(res.grid.nx, res.grid.ny);
    for (const auto& cell : res.cells)
        img.at(cell.i, res.grid.ny - 1 - cell.j) = verdict_color(cell.verdict);  // im up
    write_ppm(img, os);
}

}  // namespace io
}  // namespace henonlab

#endif
