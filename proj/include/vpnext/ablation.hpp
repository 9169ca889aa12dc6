#pragma once

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <map>
#include <string>
#include <vector>

#include "vpnext/checkpoint.hpp"
#include "vpnext/trainer.hpp"

namespace vpnext {

// ---------------------------------------------------------------------------
// tiny 3x5 bitmap font for plot labels (lowercase drawn as small caps)
// ---------------------------------------------------------------------------
namespace plotfont {

inline std::uint16_t glyph(char c) {
    switch (c) {
        case 'a': return 0b010'101'111'101'101;
        case 'b': return 0b110'101'110'101'110;
        case 'c': return 0b011'100'100'100'011;
        case 'd': return 0b110'101'101'101'110;
        case 'e': return 0b111'100'110'100'111;
        case 'f': return 0b111'100'110'100'100;
        case 'g': return 0b011'100'101'101'011;
        case 'h': return 0b101'101'111'101'101;
        case 'i': return 0b111'010'010'010'111;
        case 'j': return 0b001'001'001'101'010;
        case 'k': return 0b101'110'100'110'101;
        case 'l': return 0b100'100'100'100'111;
        case 'm': return 0b101'111'111'101'101;
        case 'n': return 0b110'101'101'101'101;
        case 'o': return 0b010'101'101'101'010;
        case 'p': return 0b110'101'110'100'100;
        case 'q': return 0b010'101'101'110'011;
        case 'r': return 0b110'101'110'110'101;
        case 's': return 0b011'100'010'001'110;
        case 't': return 0b111'010'010'010'010;
        case 'u': return 0b101'101'101'101'111;
        case 'v': return 0b101'101'101'101'010;
        case 'w': return 0b101'101'111'111'101;
        case 'x': return 0b101'101'010'101'101;
        case 'y': return 0b101'101'010'010'010;
        case 'z': return 0b111'001'010'100'111;
        case '0': return 0b111'101'101'101'111;
        case '1': return 0b010'110'010'010'111;
        case '2': return 0b111'001'111'100'111;
        case '3': return 0b111'001'111'001'111;
        case '4': return 0b101'101'111'001'001;
        case '5': return 0b111'100'111'001'111;
        case '6': return 0b111'100'111'101'111;
        case '7': return 0b111'001'001'001'001;
        case '8': return 0b111'101'111'101'111;
        case '9': return 0b111'101'111'001'111;
        case '+': return 0b000'010'111'010'000;
        case '-': return 0b000'000'111'000'000;
        case '.': return 0b000'000'000'000'010;
        default: return 0;
    }
}

inline void draw_text(PixelBuffer& img, int x, int y, const std::string& text, std::uint8_t r, std::uint8_t g,
                      std::uint8_t b) {
    for (char c : text) {
        std::uint16_t bits = glyph(c);
        for (int row = 0; row < 5; ++row)
            for (int col = 0; col < 3; ++col)
                if (bits & (1u << (14 - row * 3 - col))) {
                    int px = x + col, py = y + row;
                    if (px >= 0 && px < img.width && py >= 0 && py < img.height) {
                        img.at(py, px, 0) = r;
                        img.at(py, px, 1) = g;
                        img.at(py, px, 2) = b;
                    }
                }
        x += 4;
    }
}

}  // namespace plotfont

struct AblationRow {
    std::string variant;
    std::uint64_t seed = 0;
    double miou = 0.0;
    std::int64_t train_flops = 0;
    std::int64_t infer_flops = 0;
    std::int64_t params = 0;
    bool failed = false;
};

struct AblationSpec {
    std::vector<std::string> variants;
    std::vector<std::uint64_t> seeds;
    TrainConfig tc;    // seed field is overridden per run
    ModelConfig base;  // shared architecture knobs
};

struct AblationResult {
    std::vector<AblationRow> rows;
    std::vector<std::pair<std::string, double>> medians;  // variant order preserved
    std::string csv_path;
    std::string plot_path;
};

inline void write_ablation_csv(const std::string& path, const std::vector<AblationRow>& rows) {
    std::ofstream out(path);
    if (!out) throw IoError("ablation: cannot write " + path);
    out << "variant,seed,miou,trainFlops,inferFlops,params\n";
    for (const auto& r : rows) {
        out << r.variant << "," << r.seed << ",";
        if (r.failed)
            out << "nan";
        else
            out << r.miou;
        out << "," << r.train_flops << "," << r.infer_flops << "," << r.params << "\n";
    }
}

/// Bar chart of median mIoU per variant, written as a binary PPM.
inline void write_ablation_plot(const std::string& path, const std::vector<std::pair<std::string, double>>& medians) {
    int label_w = 0;
    for (const auto& [name, _] : medians) label_w = std::max(label_w, static_cast<int>(name.size()) * 4);
    int slot = std::max(26, label_w + 6);
    int margin = 10;
    int plot_h = 120;
    PixelBuffer img;
    img.width = margin * 2 + slot * std::max<int>(1, static_cast<int>(medians.size()));
    img.height = margin + plot_h + 18;
    img.channels = 3;
    img.bytes.assign(static_cast<std::size_t>(img.width) * img.height * 3, 255);

    int base_y = margin + plot_h;
    for (int x = margin / 2; x < img.width - margin / 2; ++x)
        for (int c = 0; c < 3; ++c) img.at(base_y, x, c) = 40;

    for (std::size_t i = 0; i < medians.size(); ++i) {
        const auto& [name, value] = medians[i];
        int x0 = margin + static_cast<int>(i) * slot + (slot - 18) / 2;
        bool ok = std::isfinite(value);
        int h = ok ? static_cast<int>(std::round(std::min(std::max(value, 0.0), 1.0) * plot_h)) : 4;
        for (int y = base_y - h; y < base_y; ++y)
            for (int x = x0; x < x0 + 18; ++x) {
                img.at(y, x, 0) = ok ? 70 : 200;
                img.at(y, x, 1) = ok ? 110 : 60;
                img.at(y, x, 2) = ok ? 190 : 60;
            }
        char buf[16];
        std::snprintf(buf, sizeof buf, ok ? "%.3f" : "nan", value);
        plotfont::draw_text(img, x0 - 2, base_y - h - 7, buf, 20, 20, 20);
        int lx = margin + static_cast<int>(i) * slot + (slot - static_cast<int>(name.size()) * 4) / 2;
        plotfont::draw_text(img, lx, base_y + 4, name, 20, 20, 20);
    }
    write_ppm(path, img);
}

/// Trains every (variant, seed) cell, three seeds median-reported. Runs are
/// independent, so they parallelize across workers with single-threaded
/// training inside each. A non-finite run is marked failed and the matrix
/// continues.
inline AblationResult run_ablation(const AblationSpec& spec, const Dataset& data, const std::string& out_dir,
                                   int threads) {
    require(!spec.variants.empty() && !spec.seeds.empty(), "ablation: empty variant or seed list");
    namespace fs = std::filesystem;
    std::error_code ec;
    fs::create_directories(fs::path(out_dir) / "runs", ec);

    int n_var = static_cast<int>(spec.variants.size());
    int n_seed = static_cast<int>(spec.seeds.size());
    int jobs = n_var * n_seed;
    std::vector<AblationRow> rows(static_cast<std::size_t>(jobs));

    parallel_for(jobs, threads, [&](int job) {
        int vi = job / n_seed;
        int si = job % n_seed;
        AblationRow& row = rows[static_cast<std::size_t>(job)];
        row.variant = spec.variants[static_cast<std::size_t>(vi)];
        row.seed = spec.seeds[static_cast<std::size_t>(si)];
        ModelConfig cfg = ModelConfig::from_variant(row.variant, spec.base);
        auto model = VPNextModel<float>::build(cfg, row.seed);
        row.train_flops = model.cost(true).flops;
        row.infer_flops = model.cost(false).flops;
        row.params = model.param_count();
        TrainConfig tc = spec.tc;
        tc.seed = row.seed;
        try {
            auto tr = train(model, data, tc, 1);
            row.miou = tr.manifest.best_miou;
            std::ofstream mo(fs::path(out_dir) / "runs" / (row.variant + "_s" + std::to_string(row.seed) + ".json"));
            mo << tr.manifest.to_json().dump(2) << "\n";
        } catch (const NonFiniteError&) {
            row.failed = true;
            row.miou = std::nan("");
        }
    });

    AblationResult res;
    res.rows = rows;
    for (const auto& v : spec.variants) {
        std::vector<double> vals;
        for (const auto& r : rows)
            if (r.variant == v && !r.failed) vals.push_back(r.miou);
        double median = std::nan("");
        if (!vals.empty()) {
            std::sort(vals.begin(), vals.end());
            median = vals[vals.size() / 2];
            if (vals.size() % 2 == 0) median = 0.5 * (median + vals[vals.size() / 2 - 1]);
        }
        res.medians.push_back({v, median});
    }

    res.csv_path = (fs::path(out_dir) / "ablation.csv").string();
    write_ablation_csv(res.csv_path, rows);
    res.plot_path = (fs::path(out_dir) / "ablation.ppm").string();
    write_ablation_plot(res.plot_path, res.medians);

    nlohmann::json summary;
    for (const auto& [name, m] : res.medians) summary[name] = m;
    std::ofstream so(fs::path(out_dir) / "ablation_summary.json");
    so << summary.dump(2) << "\n";
    return res;
}

}  // namespace vpnext
