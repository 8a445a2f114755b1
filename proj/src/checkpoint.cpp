#include "dtnet/checkpoint.hpp"

#include <filesystem>
#include <fstream>

namespace fs = std::filesystem;

namespace dtnet {

namespace {

constexpr char kMagic[4] = {'D', 'T', 'N', 'P'};
constexpr uint32_t kVersion = 1;
constexpr uint8_t kDtypeF64 = 1;

template <class T>
void write_pod(std::ostream& os, const T& v) {
    os.write(reinterpret_cast<const char*>(&v), sizeof(T));
}

template <class T>
T read_pod(std::istream& is) {
    T v{};
    is.read(reinterpret_cast<char*>(&v), sizeof(T));
    if (!is) throw std::runtime_error("checkpoint: truncated params.bin");
    return v;
}

}  // namespace

void save_checkpoint(const std::string& dir, const Network& net, int64_t step) {
    fs::create_directories(dir);
    {
        std::ofstream cfg(fs::path(dir) / "config.txt");
        if (!cfg) throw std::runtime_error("checkpoint: cannot write config under " + dir);
        cfg << net.config().to_kv();
    }
    {
        std::ofstream st(fs::path(dir) / "step.txt");
        st << step << "\n";
    }
    std::ofstream out(fs::path(dir) / "params.bin", std::ios::binary);
    if (!out) throw std::runtime_error("checkpoint: cannot write params under " + dir);
    out.write(kMagic, 4);
    write_pod(out, kVersion);
    write_pod(out, uint64_t(net.params().count()));
    for (const Param& p : net.params().all()) {
        write_pod(out, uint32_t(p.name.size()));
        out.write(p.name.data(), std::streamsize(p.name.size()));
        write_pod(out, kDtypeF64);
        write_pod(out, uint32_t(p.dims.size()));
        for (int d : p.dims) write_pod(out, uint32_t(d));
        write_pod(out, uint8_t(p.trainable ? 1 : 0));
        out.write(reinterpret_cast<const char*>(p.value.data()),
                  std::streamsize(p.value.size() * sizeof(Real)));
    }
    if (!out) throw std::runtime_error("checkpoint: write failure under " + dir);
}

NetworkConfig read_checkpoint_config(const std::string& dir) {
    std::ifstream cfg(fs::path(dir) / "config.txt");
    if (!cfg) throw std::runtime_error("checkpoint: cannot read config under " + dir);
    std::string text((std::istreambuf_iterator<char>(cfg)), std::istreambuf_iterator<char>());
    return NetworkConfig::from_kv(text);
}

int64_t load_checkpoint_params(const std::string& dir, Network& net) {
    std::ifstream in(fs::path(dir) / "params.bin", std::ios::binary);
    if (!in) throw std::runtime_error("checkpoint: cannot read params under " + dir);
    char magic[4];
    in.read(magic, 4);
    if (!in || std::string(magic, 4) != std::string(kMagic, 4))
        throw std::runtime_error("checkpoint: bad magic in params.bin");
    if (read_pod<uint32_t>(in) != kVersion)
        throw std::runtime_error("checkpoint: unsupported params.bin version");
    const uint64_t count = read_pod<uint64_t>(in);
    if (count != net.params().count())
        throw std::runtime_error("checkpoint: parameter count mismatch (file " +
                                 std::to_string(count) + ", network " +
                                 std::to_string(net.params().count()) + ")");
    for (uint64_t i = 0; i < count; ++i) {
        const uint32_t name_len = read_pod<uint32_t>(in);
        std::string name(name_len, '\0');
        in.read(name.data(), name_len);
        if (read_pod<uint8_t>(in) != kDtypeF64)
            throw std::runtime_error("checkpoint: unsupported dtype for " + name);
        const uint32_t ndims = read_pod<uint32_t>(in);
        std::vector<int> dims(ndims);
        for (uint32_t d = 0; d < ndims; ++d) dims[d] = int(read_pod<uint32_t>(in));
        read_pod<uint8_t>(in);  // trainable flag, informational

        Param* p = net.params().find(name);
        if (!p) throw std::runtime_error("checkpoint: unknown parameter '" + name + "'");
        if (p->dims != dims)
            throw std::runtime_error("checkpoint: shape mismatch for '" + name + "'");
        in.read(reinterpret_cast<char*>(p->value.data()),
                std::streamsize(p->value.size() * sizeof(Real)));
        if (!in) throw std::runtime_error("checkpoint: truncated data for '" + name + "'");
    }

    std::ifstream st(fs::path(dir) / "step.txt");
    int64_t step = 0;
    if (st) st >> step;
    return step;
}

std::unique_ptr<Network> load_checkpoint(const std::string& dir, int64_t* step) {
    auto net = std::make_unique<Network>(read_checkpoint_config(dir));
    const int64_t s = load_checkpoint_params(dir, *net);
    if (step) *step = s;
    return net;
}

}  // namespace dtnet
