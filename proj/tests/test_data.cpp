#include <cstdio>
#include <filesystem>
#include <random>

#include "doctest.h"
#include "dtnet/data.hpp"
#include "gradcheck.hpp"

using namespace dtnet;
using namespace dtnet::testutil;

namespace {

// raster whose pixel values encode their coordinates, for alignment checks
RasterPair coordinate_raster(int h, int w) {
    RasterPair r;
    r.image = ImageU8(h, w, 3);
    r.mask = ImageU8(h, w, 1);
    for (int y = 0; y < h; ++y)
        for (int x = 0; x < w; ++x) {
            r.image.at(y, x, 0) = uint8_t(y & 0xff);
            r.image.at(y, x, 1) = uint8_t(x & 0xff);
            r.image.at(y, x, 2) = uint8_t((y + x) & 0xff);
            r.mask.at(y, x, 0) = ((y / 3 + x / 5) % 2) ? 255 : 0;
        }
    return r;
}

std::filesystem::path temp_dir(const char* tag) {
    auto p = std::filesystem::temp_directory_path() / (std::string("dtnet_test_") + tag);
    std::filesystem::remove_all(p);
    std::filesystem::create_directories(p);
    return p;
}

}  // namespace

TEST_CASE("grid tiling arithmetic: 1024x512 raster, crop 512") {
    RasterPair r = coordinate_raster(512, 1024);
    TileSpec spec;
    spec.crop_size = 512;
    spec.strategy = TileSpec::Strategy::Grid;
    auto tiles = tile(r, spec);
    REQUIRE(tiles.size() == 2);
    CHECK(tiles[0].offset_y == 0);
    CHECK(tiles[0].offset_x == 0);
    CHECK(tiles[1].offset_y == 0);
    CHECK(tiles[1].offset_x == 512);
    CHECK(tiles[0].data.image.h == 512);
    CHECK(tiles[0].data.image.w == 512);
}

TEST_CASE("grid tiling discards partial edge tiles") {
    RasterPair r = coordinate_raster(100, 70);
    TileSpec spec;
    spec.crop_size = 32;
    spec.strategy = TileSpec::Strategy::Grid;
    auto tiles = tile(r, spec);
    CHECK(tiles.size() == 6);  // 3 rows x 2 cols
}

TEST_CASE("tiling alignment is exact (exhaustive on 64x64)") {
    RasterPair r = coordinate_raster(64, 64);
    TileSpec spec;
    spec.crop_size = 16;
    spec.strategy = TileSpec::Strategy::Random;
    spec.count = 25;
    spec.seed = 9;
    for (const Tile& t : tile(r, spec)) {
        for (int y = 0; y < 16; ++y)
            for (int x = 0; x < 16; ++x) {
                CHECK(t.data.mask.at(y, x, 0) == r.mask.at(t.offset_y + y, t.offset_x + x, 0));
                for (int c = 0; c < 3; ++c)
                    CHECK(t.data.image.at(y, x, c) ==
                          r.image.at(t.offset_y + y, t.offset_x + x, c));
            }
    }
}

TEST_CASE("random tiling is fully determined by the seed") {
    RasterPair r = coordinate_raster(128, 96);
    TileSpec spec;
    spec.crop_size = 32;
    spec.strategy = TileSpec::Strategy::Random;
    spec.count = 10;
    spec.seed = 1234;
    auto a = tile(r, spec);
    auto b = tile(r, spec);
    REQUIRE(a.size() == b.size());
    for (size_t i = 0; i < a.size(); ++i) {
        CHECK(a[i].offset_y == b[i].offset_y);
        CHECK(a[i].offset_x == b[i].offset_x);
        CHECK(a[i].data.image.pixels == b[i].data.image.pixels);
    }
    spec.seed = 1235;
    auto c = tile(r, spec);
    bool same = true;
    for (size_t i = 0; i < a.size(); ++i)
        if (a[i].offset_y != c[i].offset_y || a[i].offset_x != c[i].offset_x) same = false;
    CHECK_FALSE(same);
}

TEST_CASE("tiling rejects rasters smaller than the crop") {
    RasterPair r = coordinate_raster(30, 300);
    TileSpec spec;
    spec.crop_size = 32;
    spec.strategy = TileSpec::Strategy::Grid;
    CHECK_THROWS_AS(tile(r, spec), std::invalid_argument);
}

TEST_CASE("dataset recipes: crop/resize geometry") {
    // Munich-style: 512 crops resized to 256
    RasterPair munich = coordinate_raster(640, 704);
    TileSpec m;
    m.crop_size = 512;
    m.resize_to = 256;
    m.strategy = TileSpec::Strategy::Random;
    m.count = 3;
    m.seed = 5;
    for (const Tile& t : tile(munich, m)) {
        CHECK(t.data.image.h == 256);
        CHECK(t.data.image.w == 256);
        CHECK(t.data.mask.h == 256);
    }

    // LoveDA-style: whole 1024 raster resized to 512
    RasterPair loveda = coordinate_raster(1024, 1024);
    TileSpec l;
    l.crop_size = 1024;
    l.resize_to = 512;
    l.strategy = TileSpec::Strategy::Grid;
    auto tiles = tile(loveda, l);
    REQUIRE(tiles.size() == 1);
    CHECK(tiles[0].data.image.h == 512);
    CHECK(tiles[0].data.image.w == 512);
}

TEST_CASE("bilinear resize: identity, constancy, mask re-binarization") {
    RasterPair r = coordinate_raster(40, 56);
    ImageU8 same = resize_bilinear(r.image, 40, 56, false);
    CHECK(same.pixels == r.image.pixels);

    ImageU8 cst(33, 21, 3);
    std::fill(cst.pixels.begin(), cst.pixels.end(), uint8_t(77));
    for (auto [th, tw] : {std::pair{16, 16}, {64, 48}, {100, 7}}) {
        ImageU8 out = resize_bilinear(cst, th, tw, false);
        for (uint8_t p : out.pixels) CHECK(p == 77);
    }

    // masks stay binary after resize
    ImageU8 mk = resize_bilinear(r.mask, 23, 31, true);
    for (uint8_t p : mk.pixels) CHECK((p == 0 || p == 255));

    // re-binarization at the identity size is idempotent
    ImageU8 mk_same = resize_bilinear(r.mask, 40, 56, true);
    CHECK(mk_same.pixels == r.mask.pixels);
}

TEST_CASE("edge mask: degenerate cases and hand case") {
    Tensor empty(8, 8, 1);
    Tensor e1 = derive_edge_mask(empty, 2);
    for (Real v : e1.v) CHECK(v == 0.0);

    Tensor full(8, 8, 1);
    full.fill(1.0);
    Tensor e2 = derive_edge_mask(full, 2);
    for (Real v : e2.v) CHECK(v == 0.0);  // replicate padding: dilation == erosion

    Tensor single(7, 7, 1);
    single.at(3, 3, 0) = 1.0;
    Tensor e3 = derive_edge_mask(single, 1);
    for (int y = 0; y < 7; ++y)
        for (int x = 0; x < 7; ++x) {
            const bool in_block = std::abs(y - 3) <= 1 && std::abs(x - 3) <= 1;
            CHECK(e3.at(y, x, 0) == (in_block ? 1.0 : 0.0));
        }
}

TEST_CASE("edge mask is inside the dilation and misses the erosion") {
    std::mt19937_64 rng(3);
    for (int trial = 0; trial < 5; ++trial) {
        Tensor m(16, 16, 1);
        for (Real& e : m.v) e = (rng() % 4 == 0) ? 1.0 : 0.0;
        for (int k : {1, 2}) {
            Tensor edge = derive_edge_mask(m, k);
            Tensor dil = binary_dilate(m, k);
            Tensor ero = binary_erode(m, k);
            for (size_t i = 0; i < edge.size(); ++i) {
                if (edge.v[i] == 1.0) {
                    CHECK(dil.v[i] == 1.0);   // subset of dilation
                    CHECK(ero.v[i] == 0.0);   // disjoint from erosion
                }
            }
        }
    }
}

TEST_CASE("synthetic generator: determinism, nonempty roads, edge oracle") {
    auto a = synth_generate(6, 64, 42);
    auto b = synth_generate(6, 64, 42);
    REQUIRE(a.size() == 6);
    for (size_t i = 0; i < a.size(); ++i) {
        CHECK(bitwise_equal(a[i].image, b[i].image));
        CHECK(bitwise_equal(a[i].area_mask, b[i].area_mask));
        CHECK(bitwise_equal(a[i].edge_mask, b[i].edge_mask));

        Real road_pixels = 0.0;
        for (Real e : a[i].area_mask.v) road_pixels += e;
        CHECK(road_pixels >= 1.0);

        CHECK(bitwise_equal(a[i].edge_mask, derive_edge_mask(a[i].area_mask, 1)));
        a[i].validate();
    }
    auto c = synth_generate(6, 64, 43);
    CHECK_FALSE(bitwise_equal(a[0].image, c[0].image));

    CHECK_THROWS_AS(synth_generate(2, 60, 1), std::invalid_argument);
    CHECK_THROWS_AS(synth_generate(0, 64, 1), std::invalid_argument);
}

TEST_CASE("png round trip preserves bytes") {
    auto dir = temp_dir("png");
    RasterPair r = coordinate_raster(21, 34);
    write_png((dir / "rgb.png").string(), r.image);
    write_png((dir / "gray.png").string(), r.mask);
    ImageU8 rgb = read_png((dir / "rgb.png").string());
    ImageU8 gray = read_png((dir / "gray.png").string());
    CHECK(rgb.pixels == r.image.pixels);
    CHECK(rgb.channels == 3);
    CHECK(gray.pixels == r.mask.pixels);
    CHECK(gray.channels == 1);
    CHECK_THROWS_AS(read_png((dir / "missing.png").string()), std::runtime_error);
    std::filesystem::remove_all(dir);
}

TEST_CASE("dataset save/load round trip") {
    auto dir = temp_dir("dataset");
    auto samples = synth_generate(4, 32, 7);
    save_dataset(dir.string(), "train", samples);

    DatasetManifest m = load_manifest(dir.string(), "train");
    REQUIRE(m.entries.size() == 4);
    auto loaded = load_samples(m);
    for (size_t i = 0; i < loaded.size(); ++i) {
        // masks survive exactly; images are 8-bit quantized
        CHECK(bitwise_equal(loaded[i].area_mask, samples[i].area_mask));
        CHECK(bitwise_equal(loaded[i].edge_mask, samples[i].edge_mask));
        CHECK(max_abs_diff(loaded[i].image, samples[i].image) <= 0.5 / 255.0 + 1e-12);
    }
    CHECK_THROWS_AS(load_manifest(dir.string(), "test"), std::runtime_error);
    std::filesystem::remove_all(dir);
}

TEST_CASE("prep pipeline: counts, sizes and determinism") {
    auto dir = temp_dir("prep");
    std::vector<RasterPair> rasters = {coordinate_raster(300, 300), coordinate_raster(300, 300)};
    PrepRecipe recipe;
    recipe.tile.crop_size = 64;
    recipe.tile.resize_to = 32;
    recipe.tile.strategy = TileSpec::Strategy::Random;
    recipe.tile.count = 10;
    recipe.tile.seed = 3;
    recipe.edge_width = 2;
    recipe.train_fraction = 0.8;
    recipe.split_seed = 4;
    PrepResult res = prep_dataset(rasters, recipe, dir.string());
    CHECK(res.train_count == 16);
    CHECK(res.test_count == 4);

    auto train = load_samples(load_manifest(dir.string(), "train"));
    CHECK(train.size() == 16);
    for (const Sample& s : train) {
        CHECK(s.image.h == 32);
        CHECK(s.image.w == 32);
        CHECK(bitwise_equal(s.edge_mask, derive_edge_mask(s.area_mask, 2)));
    }
    std::filesystem::remove_all(dir);
}
