#include "dtnet/data.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <random>
#include <stdexcept>

namespace fs = std::filesystem;

namespace dtnet {

void Sample::validate() const {
    if (image.c != 3) throw std::invalid_argument("sample: image must have 3 channels");
    if (area_mask.c != 1 || edge_mask.c != 1)
        throw std::invalid_argument("sample: masks must have 1 channel");
    if (image.h != area_mask.h || image.w != area_mask.w || image.h != edge_mask.h ||
        image.w != edge_mask.w)
        throw std::invalid_argument("sample: image/mask size mismatch");
    for (const Tensor* m : {&area_mask, &edge_mask})
        for (Real e : m->v)
            if (e != 0.0 && e != 1.0)
                throw std::invalid_argument("sample: masks must be binary");
}

void TileSpec::validate() const {
    if (crop_size < 16) throw std::invalid_argument("tile: crop_size must be >= 16");
    if (resize_to != 0 && resize_to < 16)
        throw std::invalid_argument("tile: resize_to must be >= 16");
    if (strategy == Strategy::Random && count < 1)
        throw std::invalid_argument("tile: random strategy needs count >= 1");
}

namespace {

RasterPair crop(const RasterPair& src, int oy, int ox, int size) {
    RasterPair out;
    out.image = ImageU8(size, size, 3);
    out.mask = ImageU8(size, size, 1);
    for (int y = 0; y < size; ++y) {
        for (int x = 0; x < size; ++x) {
            for (int c = 0; c < 3; ++c) out.image.at(y, x, c) = src.image.at(oy + y, ox + x, c);
            out.mask.at(y, x, 0) = src.mask.at(oy + y, ox + x, 0);
        }
    }
    return out;
}

void maybe_resize(RasterPair& t, int target) {
    if (target == 0 || (t.image.h == target && t.image.w == target)) return;
    t.image = resize_bilinear(t.image, target, target, false);
    t.mask = resize_bilinear(t.mask, target, target, true);
}

}  // namespace

std::vector<Tile> tile(const RasterPair& raster, const TileSpec& spec) {
    spec.validate();
    const int h = raster.image.h, w = raster.image.w;
    if (raster.mask.h != h || raster.mask.w != w)
        throw std::invalid_argument("tile: image/mask size mismatch");
    if (h < spec.crop_size || w < spec.crop_size)
        throw std::invalid_argument("tile: raster " + std::to_string(w) + "x" +
                                    std::to_string(h) + " smaller than crop " +
                                    std::to_string(spec.crop_size));
    std::vector<Tile> out;
    if (spec.strategy == TileSpec::Strategy::Grid) {
        for (int oy = 0; oy + spec.crop_size <= h; oy += spec.crop_size)
            for (int ox = 0; ox + spec.crop_size <= w; ox += spec.crop_size) {
                Tile t{crop(raster, oy, ox, spec.crop_size), oy, ox};
                maybe_resize(t.data, spec.resize_to);
                out.push_back(std::move(t));
            }
    } else {
        std::mt19937_64 rng(spec.seed);
        std::uniform_int_distribution<int> dy(0, h - spec.crop_size);
        std::uniform_int_distribution<int> dx(0, w - spec.crop_size);
        for (int i = 0; i < spec.count; ++i) {
            const int oy = dy(rng);
            const int ox = dx(rng);
            Tile t{crop(raster, oy, ox, spec.crop_size), oy, ox};
            maybe_resize(t.data, spec.resize_to);
            out.push_back(std::move(t));
        }
    }
    return out;
}

ImageU8 resize_bilinear(const ImageU8& src, int out_h, int out_w, bool is_mask) {
    if (out_h < 1 || out_w < 1) throw std::invalid_argument("resize: target must be positive");
    if (out_h == src.h && out_w == src.w) return src;
    ImageU8 out(out_h, out_w, src.channels);
    const double sy = double(src.h) / out_h;
    const double sx = double(src.w) / out_w;
    for (int oy = 0; oy < out_h; ++oy) {
        const double fy = (oy + 0.5) * sy - 0.5;
        int y0 = int(std::floor(fy));
        const double wy = fy - y0;
        int y1 = std::min(y0 + 1, src.h - 1);
        y0 = std::clamp(y0, 0, src.h - 1);
        for (int ox = 0; ox < out_w; ++ox) {
            const double fx = (ox + 0.5) * sx - 0.5;
            int x0 = int(std::floor(fx));
            const double wx = fx - x0;
            int x1 = std::min(x0 + 1, src.w - 1);
            x0 = std::clamp(x0, 0, src.w - 1);
            for (int c = 0; c < src.channels; ++c) {
                const double top = src.at(y0, x0, c) * (1.0 - wx) + src.at(y0, x1, c) * wx;
                const double bot = src.at(y1, x0, c) * (1.0 - wx) + src.at(y1, x1, c) * wx;
                const double v = top * (1.0 - wy) + bot * wy;
                out.at(oy, ox, c) = is_mask ? (v >= 127.5 ? 255 : 0)
                                            : uint8_t(std::clamp(std::lround(v), 0l, 255l));
            }
        }
    }
    return out;
}

namespace {

void check_binary_mask(const Tensor& m, const char* what) {
    if (m.c != 1) throw std::invalid_argument(std::string(what) + ": mask must be HxWx1");
    for (Real e : m.v)
        if (e != 0.0 && e != 1.0)
            throw std::invalid_argument(std::string(what) + ": mask must be binary");
}

// Separable running min/max filter with clamped (replicate) borders.
template <class Op>
Tensor window_filter(const Tensor& m, int k, Op op, Real init) {
    Tensor tmp(m.h, m.w, 1), out(m.h, m.w, 1);
    for (int y = 0; y < m.h; ++y)
        for (int x = 0; x < m.w; ++x) {
            Real acc = init;
            for (int dx = -k; dx <= k; ++dx)
                acc = op(acc, m.at(y, std::clamp(x + dx, 0, m.w - 1), 0));
            tmp.at(y, x, 0) = acc;
        }
    for (int y = 0; y < m.h; ++y)
        for (int x = 0; x < m.w; ++x) {
            Real acc = init;
            for (int dy = -k; dy <= k; ++dy)
                acc = op(acc, tmp.at(std::clamp(y + dy, 0, m.h - 1), x, 0));
            out.at(y, x, 0) = acc;
        }
    return out;
}

}  // namespace

Tensor binary_dilate(const Tensor& mask, int k) {
    check_binary_mask(mask, "binary_dilate");
    if (k < 1) throw std::invalid_argument("binary_dilate: k must be >= 1");
    return window_filter(mask, k, [](Real a, Real b) { return std::max(a, b); }, 0.0);
}

Tensor binary_erode(const Tensor& mask, int k) {
    check_binary_mask(mask, "binary_erode");
    if (k < 1) throw std::invalid_argument("binary_erode: k must be >= 1");
    return window_filter(mask, k, [](Real a, Real b) { return std::min(a, b); }, 1.0);
}

Tensor derive_edge_mask(const Tensor& area_mask, int k) {
    Tensor dil = binary_dilate(area_mask, k);
    Tensor ero = binary_erode(area_mask, k);
    Tensor edge(area_mask.h, area_mask.w, 1);
    for (size_t i = 0; i < edge.size(); ++i) edge.v[i] = dil.v[i] != ero.v[i] ? 1.0 : 0.0;
    return edge;
}

// ---------------------------------------------------------------------------
// synthetic scenes

namespace {

struct Vec2 {
    double x, y;
};

void stamp_disk(Tensor& mask, double cx, double cy, double radius) {
    const int x0 = std::max(0, int(std::floor(cx - radius)));
    const int x1 = std::min(mask.w - 1, int(std::ceil(cx + radius)));
    const int y0 = std::max(0, int(std::floor(cy - radius)));
    const int y1 = std::min(mask.h - 1, int(std::ceil(cy + radius)));
    const double r2 = radius * radius;
    for (int y = y0; y <= y1; ++y)
        for (int x = x0; x <= x1; ++x) {
            const double dx = x - cx, dy = y - cy;
            if (dx * dx + dy * dy <= r2) mask.at(y, x, 0) = 1.0;
        }
}

void rasterize_curve(Tensor& mask, const Vec2& a, const Vec2& b, const Vec2& c, double width,
                     int size) {
    const int steps = 4 * size;
    for (int i = 0; i <= steps; ++i) {
        const double t = double(i) / steps;
        const double u = 1.0 - t;
        const double px = u * u * a.x + 2.0 * u * t * b.x + t * t * c.x;
        const double py = u * u * a.y + 2.0 * u * t * b.y + t * t * c.y;
        stamp_disk(mask, px, py, width / 2.0);
    }
}

// Low-frequency shading: a coarse random grid sampled bilinearly.
Tensor coarse_noise(int size, int grid, std::mt19937_64& rng) {
    std::uniform_real_distribution<double> u01(0.0, 1.0);
    std::vector<double> g(size_t(grid) * grid);
    for (double& e : g) e = u01(rng);
    Tensor out(size, size, 1);
    for (int y = 0; y < size; ++y)
        for (int x = 0; x < size; ++x) {
            const double fy = double(y) / size * (grid - 1);
            const double fx = double(x) / size * (grid - 1);
            const int y0 = std::min(int(fy), grid - 2);
            const int x0 = std::min(int(fx), grid - 2);
            const double wy = fy - y0, wx = fx - x0;
            const double top =
                g[size_t(y0) * grid + x0] * (1 - wx) + g[size_t(y0) * grid + x0 + 1] * wx;
            const double bot = g[size_t(y0 + 1) * grid + x0] * (1 - wx) +
                               g[size_t(y0 + 1) * grid + x0 + 1] * wx;
            out.at(y, x, 0) = top * (1 - wy) + bot * wy;
        }
    return out;
}

}  // namespace

std::vector<Sample> synth_generate(int n, int size, uint64_t seed) {
    if (size < 16 || size % 16 != 0)
        throw std::invalid_argument("synth_generate: size must be a positive multiple of 16");
    if (n < 1) throw std::invalid_argument("synth_generate: n must be >= 1");

    std::vector<Sample> out;
    out.reserve(size_t(n));
    for (int i = 0; i < n; ++i) {
        std::mt19937_64 rng(mix_seed(seed, uint64_t(i)));
        std::uniform_real_distribution<double> u01(0.0, 1.0);

        Sample s;
        s.image = Tensor(size, size, 3);
        s.area_mask = Tensor(size, size, 1);

        Tensor shade = coarse_noise(size, 5, rng);
        const double tint_r = 0.02 * (u01(rng) - 0.5);
        const double tint_g = 0.02 * (u01(rng) - 0.5);
        const double tint_b = 0.02 * (u01(rng) - 0.5);

        const int curves = 1 + int(rng() % 3);
        for (int c = 0; c < curves; ++c) {
            // middle control point inside the frame keeps the curve on-image
            for (;;) {
                auto edge_pt = [&]() {
                    return Vec2{-0.1 * size + 1.2 * size * u01(rng),
                                -0.1 * size + 1.2 * size * u01(rng)};
                };
                Vec2 a = edge_pt(), c2 = edge_pt();
                Vec2 b{0.15 * size + 0.7 * size * u01(rng), 0.15 * size + 0.7 * size * u01(rng)};
                const double width = 3.0 + 4.0 * u01(rng);
                Tensor before = s.area_mask;
                rasterize_curve(s.area_mask, a, b, c2, width, size);
                if (!bitwise_equal(before, s.area_mask)) break;  // curve touched the image
            }
        }

        for (int y = 0; y < size; ++y)
            for (int x = 0; x < size; ++x) {
                const bool road = s.area_mask.at(y, x, 0) > 0.5;
                const double noise = 0.06 * (u01(rng) - 0.5);
                double base;
                if (road) {
                    base = 0.18 + 0.10 * shade.at(y, x, 0) + noise;
                } else {
                    base = 0.52 + 0.30 * shade.at(y, x, 0) + noise;
                }
                s.image.at(y, x, 0) = std::clamp(base + tint_r, 0.0, 1.0);
                s.image.at(y, x, 1) = std::clamp(base + tint_g, 0.0, 1.0);
                s.image.at(y, x, 2) = std::clamp(base + tint_b, 0.0, 1.0);
            }

        s.edge_mask = derive_edge_mask(s.area_mask, 1);
        s.validate();
        out.push_back(std::move(s));
    }
    return out;
}

// ---------------------------------------------------------------------------
// conversions and disk layout

ImageU8 image_to_u8(const Tensor& image) {
    ImageU8 out(image.h, image.w, image.c);
    for (size_t i = 0; i < image.size(); ++i)
        out.pixels[i] = uint8_t(std::clamp(std::lround(image.v[i] * 255.0), 0l, 255l));
    return out;
}

ImageU8 mask_to_u8(const Tensor& mask) {
    ImageU8 out(mask.h, mask.w, 1);
    for (size_t i = 0; i < mask.size(); ++i) out.pixels[i] = mask.v[i] >= 0.5 ? 255 : 0;
    return out;
}

Tensor u8_to_image(const ImageU8& img) {
    Tensor out(img.h, img.w, img.channels);
    for (size_t i = 0; i < out.size(); ++i) out.v[i] = img.pixels[i] / 255.0;
    return out;
}

Tensor u8_to_mask(const ImageU8& img) {
    if (img.channels != 1) throw std::invalid_argument("u8_to_mask: mask png must be grayscale");
    Tensor out(img.h, img.w, 1);
    for (size_t i = 0; i < out.size(); ++i) out.v[i] = img.pixels[i] >= 128 ? 1.0 : 0.0;
    return out;
}

Sample sample_from_raster(const RasterPair& raster, int edge_width) {
    Sample s;
    s.image = u8_to_image(raster.image);
    s.area_mask = u8_to_mask(raster.mask);
    s.edge_mask = derive_edge_mask(s.area_mask, edge_width);
    s.validate();
    return s;
}

void save_dataset(const std::string& root, const std::string& split,
                  const std::vector<Sample>& samples) {
    const fs::path base = fs::path(root) / split;
    for (const char* sub : {"images", "masks", "edges"}) fs::create_directories(base / sub);
    std::ofstream manifest(base / "manifest.txt");
    if (!manifest) throw std::runtime_error("save_dataset: cannot write manifest under " + root);
    char name[32];
    for (size_t i = 0; i < samples.size(); ++i) {
        samples[i].validate();
        std::snprintf(name, sizeof(name), "s%05zu.png", i);
        write_png((base / "images" / name).string(), image_to_u8(samples[i].image));
        write_png((base / "masks" / name).string(), mask_to_u8(samples[i].area_mask));
        write_png((base / "edges" / name).string(), mask_to_u8(samples[i].edge_mask));
        manifest << "images/" << name << " masks/" << name << " edges/" << name << "\n";
    }
}

DatasetManifest load_manifest(const std::string& root, const std::string& split) {
    DatasetManifest m;
    m.root = root;
    m.split = split;
    const fs::path path = fs::path(root) / split / "manifest.txt";
    std::ifstream in(path);
    if (!in) throw std::runtime_error("load_manifest: cannot open " + path.string());
    std::string img, msk, edg;
    while (in >> img >> msk >> edg) m.entries.push_back({img, msk, edg});
    if (m.entries.empty())
        throw std::runtime_error("load_manifest: empty manifest " + path.string());
    return m;
}

std::vector<Sample> load_samples(const DatasetManifest& manifest) {
    std::vector<Sample> out;
    const fs::path base = fs::path(manifest.root) / manifest.split;
    for (const auto& e : manifest.entries) {
        Sample s;
        s.image = u8_to_image(read_png((base / e.image).string()));
        s.area_mask = u8_to_mask(read_png((base / e.mask).string()));
        s.edge_mask = u8_to_mask(read_png((base / e.edge).string()));
        s.validate();
        out.push_back(std::move(s));
    }
    return out;
}

PrepResult prep_dataset(const std::vector<RasterPair>& rasters, const PrepRecipe& recipe,
                        const std::string& out_root) {
    if (rasters.empty()) throw std::invalid_argument("prep_dataset: no input rasters");
    if (!(recipe.train_fraction > 0.0 && recipe.train_fraction < 1.0 + 1e-12))
        throw std::invalid_argument("prep_dataset: train_fraction must be in (0, 1]");

    std::vector<Sample> all;
    for (size_t r = 0; r < rasters.size(); ++r) {
        TileSpec spec = recipe.tile;
        spec.seed = mix_seed(recipe.tile.seed, r);  // independent draws per raster
        for (Tile& t : tile(rasters[r], spec))
            all.push_back(sample_from_raster(t.data, recipe.edge_width));
    }
    std::vector<size_t> order(all.size());
    for (size_t i = 0; i < order.size(); ++i) order[i] = i;
    std::mt19937_64 rng(recipe.split_seed);
    std::shuffle(order.begin(), order.end(), rng);

    const size_t n_train = std::min(all.size(), size_t(std::llround(
                                                    recipe.train_fraction * double(all.size()))));
    std::vector<Sample> train, test;
    for (size_t i = 0; i < order.size(); ++i)
        (i < n_train ? train : test).push_back(std::move(all[order[i]]));
    if (!train.empty()) save_dataset(out_root, "train", train);
    if (!test.empty()) save_dataset(out_root, "test", test);
    return {int(train.size()), int(test.size())};
}

}  // namespace dtnet
