#pragma once

#include <filesystem>
#include <string>
#include <vector>

#include <json.hpp>

#include "vpnext/netpbm.hpp"
#include "vpnext/rng.hpp"
#include "vpnext/seg.hpp"

namespace vpnext {

/// Synthetic corpus: textured geometric shapes over a noisy background.
/// Classes: 0 background, then one class per shape kind. Boundary pixels are
/// marked ignore, VOC-style. Generation is a pure function of the seed.
struct SynthSpec {
    int num_train = 200;
    int num_eval = 50;
    int image_size = 64;
    int num_classes = 5;
    std::vector<std::string> shape_kinds = {"disc", "rectangle", "triangle", "stripes"};
    std::uint64_t seed = 7;
    double min_class_frac = 0.01;
    // shape extents sized against the 16px token cell: large enough that a
    // coarse-grid model has signal, small enough that boundaries matter
    double min_radius = 9.0;
    double max_radius = 20.0;
    int min_shapes = 2;
    int max_shapes = 4;

    void validate() const {
        require(image_size % 16 == 0, "synth: image size must be divisible by 16");
        require(num_train >= 1 && num_eval >= 1, "synth: need at least one image per split");
        require(num_classes == static_cast<int>(shape_kinds.size()) + 1,
                "synth: num_classes must be shape kinds + background");
        require(min_radius > 0 && max_radius >= min_radius, "synth: bad radius range");
        require(min_shapes >= 1 && max_shapes >= min_shapes, "synth: bad shape count range");
    }

    std::vector<std::string> class_names() const {
        std::vector<std::string> names = {"background"};
        names.insert(names.end(), shape_kinds.begin(), shape_kinds.end());
        return names;
    }
};

struct LabeledImage {
    PixelBuffer image;  // rgb
    PixelBuffer mask;   // single channel labels, 255 ignore
};

namespace detail {

struct ShapeSpec {
    int kind;  // 0 disc, 1 rectangle, 2 triangle, 3 stripes
    double cx, cy, r;
    double angles[3];   // triangle vertices
    double rot;         // rectangle aspect skew / stripe direction
    double color[3];    // base fill
    double color2[3];   // stripe alternate fill
};

inline bool shape_contains(const ShapeSpec& s, double x, double y) {
    double dx = x - s.cx, dy = y - s.cy;
    switch (s.kind) {
        case 0:
            return dx * dx + dy * dy <= s.r * s.r;
        case 1: {
            double w = s.r * (1.0 + 0.5 * std::sin(s.rot));
            double h = s.r * (1.0 - 0.4 * std::sin(s.rot));
            return std::abs(dx) <= w && std::abs(dy) <= h;
        }
        case 2: {
            double px[3], py[3];
            for (int i = 0; i < 3; ++i) {
                px[i] = s.cx + s.r * 1.3 * std::cos(s.angles[i]);
                py[i] = s.cy + s.r * 1.3 * std::sin(s.angles[i]);
            }
            auto side = [&](int i, int j) {
                return (px[j] - px[i]) * (y - py[i]) - (py[j] - py[i]) * (x - px[i]);
            };
            double a = side(0, 1), b = side(1, 2), c = side(2, 0);
            return (a >= 0 && b >= 0 && c >= 0) || (a <= 0 && b <= 0 && c <= 0);
        }
        case 3:
            return dx * dx + dy * dy <= s.r * s.r;  // striped disc region
    }
    return false;
}

inline void shape_color(const ShapeSpec& s, double x, double y, double out[3]) {
    if (s.kind == 3) {
        // diagonal stripe texture; the texture, not the hue, identifies it
        double phase = (x * std::cos(s.rot) + y * std::sin(s.rot)) / 3.0;
        bool odd = (static_cast<long long>(std::floor(phase)) % 2) != 0;
        const double* c = odd ? s.color2 : s.color;
        out[0] = c[0];
        out[1] = c[1];
        out[2] = c[2];
        return;
    }
    out[0] = s.color[0];
    out[1] = s.color[1];
    out[2] = s.color[2];
}

inline LabeledImage render_one(const SynthSpec& spec, Rng rng) {
    int n = spec.image_size;
    LabeledImage out;
    out.image.width = out.image.height = n;
    out.image.channels = 3;
    out.image.bytes.resize(static_cast<std::size_t>(n) * n * 3);
    out.mask.width = out.mask.height = n;
    out.mask.channels = 1;
    out.mask.bytes.assign(static_cast<std::size_t>(n) * n, 0);

    // mixed color cue: a shape usually carries its class tint but sometimes
    // draws from a shared confuser palette, so hue is a prior rather than a
    // label and ambiguous shapes require geometry or texture context
    const double hue[4][3] = {{0.78, 0.26, 0.24},   // disc tint
                              {0.24, 0.66, 0.30},   // rectangle tint
                              {0.26, 0.36, 0.78},   // triangle tint
                              {0.80, 0.72, 0.24}};  // stripes base tint
    const double palette[6][3] = {{0.78, 0.26, 0.24}, {0.24, 0.66, 0.30}, {0.26, 0.36, 0.78},
                                  {0.80, 0.72, 0.24}, {0.72, 0.30, 0.68}, {0.28, 0.66, 0.66}};
    const double color_cue_prob = 0.6;

    int num_shapes = rng.uniform_int(spec.min_shapes, spec.max_shapes);
    std::vector<ShapeSpec> shapes;
    for (int si = 0; si < num_shapes; ++si) {
        ShapeSpec s{};
        // the first two kinds cycle deterministically so every class keeps
        // healthy corpus coverage; the rest are free
        s.kind = si < 2 ? static_cast<int>((rng.seed() + static_cast<std::uint64_t>(si)) & 3) : rng.uniform_int(0, 3);
        s.cx = rng.uniform(8, n - 8);
        s.cy = rng.uniform(8, n - 8);
        s.r = rng.uniform(spec.min_radius, spec.max_radius);
        s.rot = rng.uniform(0, 6.2831853);
        double base = rng.uniform(0, 6.2831853);
        s.angles[0] = base;
        s.angles[1] = base + rng.uniform(1.4, 2.6);
        s.angles[2] = base + rng.uniform(3.4, 5.0);
        bool cued = rng.next_double() < color_cue_prob;
        int ci = rng.uniform_int(0, 5);
        int ci2 = (ci + rng.uniform_int(1, 5)) % 6;
        for (int c = 0; c < 3; ++c) {
            double base = cued ? hue[s.kind][c] : palette[ci][c];
            s.color[c] = base + rng.uniform(-0.10, 0.10);
            s.color2[c] = palette[ci2][c] + rng.uniform(-0.10, 0.10);
        }
        shapes.push_back(s);
    }

    double bg[3] = {rng.uniform(0.38, 0.55), rng.uniform(0.38, 0.55), rng.uniform(0.42, 0.60)};
    double grad = rng.uniform(-0.12, 0.12);
    double brightness = rng.uniform(0.85, 1.1);

    for (int y = 0; y < n; ++y) {
        for (int x = 0; x < n; ++x) {
            double col[3] = {bg[0] + grad * (y - n / 2.0) / n, bg[1] + grad * (x - n / 2.0) / n, bg[2]};
            int label = 0;
            for (const auto& s : shapes) {
                if (shape_contains(s, x + 0.5, y + 0.5)) {
                    shape_color(s, x + 0.5, y + 0.5, col);
                    label = s.kind + 1;
                }
            }
            for (int c = 0; c < 3; ++c) {
                double v = (col[c] + rng.uniform(-0.05, 0.05)) * brightness;
                v = std::min(std::max(v, 0.0), 1.0);
                out.image.at(y, x, c) = static_cast<std::uint8_t>(v * 255.0 + 0.5);
            }
            out.mask.at(y, x, 0) = static_cast<std::uint8_t>(label);
        }
    }

    // VOC-style ignore ring on label boundaries
    PixelBuffer marked = out.mask;
    for (int y = 0; y < n; ++y)
        for (int x = 0; x < n; ++x) {
            std::uint8_t v = out.mask.at(y, x, 0);
            bool boundary = (x > 0 && out.mask.at(y, x - 1, 0) != v) || (x + 1 < n && out.mask.at(y, x + 1, 0) != v) ||
                            (y > 0 && out.mask.at(y - 1, x, 0) != v) || (y + 1 < n && out.mask.at(y + 1, x, 0) != v);
            if (boundary) marked.at(y, x, 0) = ClassMask::kIgnore;
        }
    out.mask = marked;
    return out;
}

}  // namespace detail

struct DatasetSplit {
    std::vector<TensorData<float>> images;  // each [1,h,w,3]
    std::vector<ClassMask> masks;           // each [1,h,w]

    std::size_t size() const { return images.size(); }
};

struct Dataset {
    DatasetSplit train;
    DatasetSplit eval;
    int image_size = 0;
    int num_classes = 0;
    std::vector<std::string> class_names;
};

inline ClassMask mask_from_buffer(const PixelBuffer& buf) {
    ClassMask m(1, buf.height, buf.width);
    m.labels.assign(buf.bytes.begin(), buf.bytes.end());
    return m;
}

inline std::string checksum_hex(const std::vector<std::uint8_t>& bytes) {
    char buf[17];
    std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(fnv1a64(bytes.data(), bytes.size())));
    return buf;
}

/// Generates the corpus on disk (PPM images, PGM masks, JSON manifest) and
/// returns the manifest. Regenerates with a derived seed when a class falls
/// under the minimum pixel share, recording the attempt count.
inline nlohmann::json gen_dataset(const SynthSpec& spec, const std::string& out_dir) {
    spec.validate();
    namespace fs = std::filesystem;
    std::error_code ec;
    fs::create_directories(fs::path(out_dir) / "train", ec);
    fs::create_directories(fs::path(out_dir) / "eval", ec);
    if (!fs::exists(fs::path(out_dir) / "train") || !fs::exists(fs::path(out_dir) / "eval"))
        throw IoError("gen_dataset: cannot create output directories under " + out_dir);

    const int max_attempts = 8;
    for (int attempt = 0; attempt < max_attempts; ++attempt) {
        Rng root = Rng(spec.seed).fork(static_cast<std::uint64_t>(attempt));
        std::vector<LabeledImage> train, eval;
        std::vector<std::int64_t> class_pixels(static_cast<std::size_t>(spec.num_classes), 0);
        std::int64_t total_pixels = 0;
        auto render_split = [&](std::vector<LabeledImage>& split, int count, std::uint64_t stream_base) {
            for (int i = 0; i < count; ++i) {
                split.push_back(detail::render_one(spec, root.fork(stream_base + static_cast<std::uint64_t>(i))));
                for (std::uint8_t v : split.back().mask.bytes) {
                    ++total_pixels;
                    if (v != ClassMask::kIgnore) ++class_pixels[v];
                }
            }
        };
        render_split(train, spec.num_train, 1u << 20);
        render_split(eval, spec.num_eval, 1u << 21);

        std::vector<double> fractions;
        bool starved = false;
        for (int c = 0; c < spec.num_classes; ++c) {
            double f = static_cast<double>(class_pixels[static_cast<std::size_t>(c)]) / static_cast<double>(total_pixels);
            fractions.push_back(f);
            if (f < spec.min_class_frac) starved = true;
        }
        if (starved && attempt + 1 < max_attempts) continue;
        if (starved)
            throw ValueError("gen_dataset: class starved below " + std::to_string(spec.min_class_frac) +
                             " after " + std::to_string(max_attempts) + " attempts; spec is degenerate");

        nlohmann::json manifest;
        manifest["seed"] = spec.seed;
        manifest["attempt"] = attempt;
        manifest["image_size"] = spec.image_size;
        manifest["num_classes"] = spec.num_classes;
        manifest["class_names"] = spec.class_names();
        manifest["ignore_index"] = 255;
        manifest["class_pixel_fractions"] = fractions;
        auto write_split = [&](const char* name, std::vector<LabeledImage>& split) {
            nlohmann::json files = nlohmann::json::array();
            char buf[64];
            for (std::size_t i = 0; i < split.size(); ++i) {
                std::snprintf(buf, sizeof buf, "%s/img_%05zu.ppm", name, i);
                std::string img_rel = buf;
                std::snprintf(buf, sizeof buf, "%s/mask_%05zu.pgm", name, i);
                std::string mask_rel = buf;
                write_ppm((fs::path(out_dir) / img_rel).string(), split[i].image);
                write_pgm((fs::path(out_dir) / mask_rel).string(), split[i].mask);
                files.push_back({{"image", img_rel},
                                 {"mask", mask_rel},
                                 {"image_checksum", checksum_hex(split[i].image.bytes)},
                                 {"mask_checksum", checksum_hex(split[i].mask.bytes)}});
            }
            manifest["splits"][name] = files;
        };
        write_split("train", train);
        write_split("eval", eval);

        std::ofstream out(fs::path(out_dir) / "manifest.json");
        if (!out) throw IoError("gen_dataset: cannot write manifest under " + out_dir);
        out << manifest.dump(2) << "\n";
        return manifest;
    }
    throw ValueError("gen_dataset: unreachable");
}

/// Loads a generated corpus, re-verifying every file checksum.
inline Dataset load_dataset(const std::string& manifest_path) {
    std::ifstream in(manifest_path);
    if (!in) throw IoError("load_dataset: cannot open " + manifest_path);
    nlohmann::json manifest = nlohmann::json::parse(in);
    namespace fs = std::filesystem;
    fs::path base = fs::path(manifest_path).parent_path();

    Dataset ds;
    ds.image_size = manifest.at("image_size").get<int>();
    ds.num_classes = manifest.at("num_classes").get<int>();
    ds.class_names = manifest.at("class_names").get<std::vector<std::string>>();

    auto load_split = [&](const char* name, DatasetSplit& split) {
        for (const auto& f : manifest.at("splits").at(name)) {
            PixelBuffer img = read_ppm((base / f.at("image").get<std::string>()).string());
            PixelBuffer msk = read_pgm((base / f.at("mask").get<std::string>()).string());
            if (checksum_hex(img.bytes) != f.at("image_checksum").get<std::string>())
                throw IoError("load_dataset: checksum mismatch for " + f.at("image").get<std::string>());
            if (checksum_hex(msk.bytes) != f.at("mask_checksum").get<std::string>())
                throw IoError("load_dataset: checksum mismatch for " + f.at("mask").get<std::string>());
            split.images.push_back(image_to_tensor<float>(img));
            split.masks.push_back(mask_from_buffer(msk));
        }
    };
    load_split("train", ds.train);
    load_split("eval", ds.eval);
    return ds;
}

}  // namespace vpnext
