#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "dtnet/image_io.hpp"
#include "dtnet/tensor.hpp"

namespace dtnet {

// Aligned triple: RGB image in [0,1], binary road-area mask, binary
// road-edge mask, all sharing HxW.
struct Sample {
    Tensor image;      // HxWx3
    Tensor area_mask;  // HxWx1, {0,1}
    Tensor edge_mask;  // HxWx1, {0,1}
    void validate() const;
};

struct TileSpec {
    enum class Strategy { Grid, Random };
    int crop_size = 256;
    int resize_to = 0;  // 0 = keep crop size
    Strategy strategy = Strategy::Random;
    int count = 0;  // tiles to draw under the random strategy
    uint64_t seed = 0;
    void validate() const;
};

// Aligned source raster (image + mask at identical size).
struct RasterPair {
    ImageU8 image;  // 3-channel
    ImageU8 mask;   // 1-channel, 0/255
};

struct Tile {
    RasterPair data;
    int offset_y = 0;
    int offset_x = 0;
};

// Identical crops from image and mask; grid strategy tiles at stride
// crop_size discarding partial edge tiles, random strategy draws count
// uniform top-left offsets from the seed.
std::vector<Tile> tile(const RasterPair& raster, const TileSpec& spec);

// Half-pixel-center bilinear resize. Masks are resized then re-binarized
// at the midpoint; a same-size target returns the input unchanged.
ImageU8 resize_bilinear(const ImageU8& src, int out_h, int out_w, bool is_mask);

// Binary morphology with a (2k+1)-square structuring element and
// replicate border handling; masks are HxWx1 with {0,1} entries.
Tensor binary_dilate(const Tensor& mask, int k);
Tensor binary_erode(const Tensor& mask, int k);

// Morphological gradient: dilation XOR erosion.
Tensor derive_edge_mask(const Tensor& area_mask, int k = 2);

// Seeded synthetic road scenes: textured background, 1-3 rasterized
// curves of width 3-7 px as the road class. Every sample contains at
// least one road pixel; identical (n, size, seed) gives bitwise-identical
// output.
std::vector<Sample> synth_generate(int n, int size, uint64_t seed);

// --- on-disk layout: <root>/<split>/{images,masks,edges}/<name>.png ---

struct DatasetManifest {
    struct Entry {
        std::string image, mask, edge;  // paths relative to the split dir
    };
    std::string root;
    std::string split;
    std::vector<Entry> entries;
};

void save_dataset(const std::string& root, const std::string& split,
                  const std::vector<Sample>& samples);
DatasetManifest load_manifest(const std::string& root, const std::string& split);
std::vector<Sample> load_samples(const DatasetManifest& manifest);

// Tile -> Sample conversion; the edge mask is derived from the tile mask.
Sample sample_from_raster(const RasterPair& raster, int edge_width);

ImageU8 image_to_u8(const Tensor& image);
ImageU8 mask_to_u8(const Tensor& mask);
Tensor u8_to_image(const ImageU8& img);
Tensor u8_to_mask(const ImageU8& img);  // threshold at 128

// Tiling + edge derivation + train/test split + save, in one pass.
struct PrepRecipe {
    TileSpec tile;
    int edge_width = 2;
    double train_fraction = 0.9;
    uint64_t split_seed = 0;
};

struct PrepResult {
    int train_count = 0;
    int test_count = 0;
};

PrepResult prep_dataset(const std::vector<RasterPair>& rasters, const PrepRecipe& recipe,
                        const std::string& out_root);

}  // namespace dtnet
