#include <cstring>
#include <fstream>

#include "glowsign/error.hpp"
#include "glowsign/model.hpp"

namespace glowsign {

namespace {

// Checkpoint layout (little-endian):
//   8-byte magic "GSCKPT01", u32 descriptor length + bytes,
//   u32 class count, per class u32 length + bytes,
//   u64 parameter count, raw float64 parameters.
constexpr char kMagic[8] = {'G', 'S', 'C', 'K', 'P', 'T', '0', '1'};

void write_u32(std::ofstream& out, uint32_t v) {
    out.write(reinterpret_cast<const char*>(&v), sizeof(v));
}

void write_u64(std::ofstream& out, uint64_t v) {
    out.write(reinterpret_cast<const char*>(&v), sizeof(v));
}

uint32_t read_u32(std::ifstream& in) {
    uint32_t v = 0;
    in.read(reinterpret_cast<char*>(&v), sizeof(v));
    return v;
}

uint64_t read_u64(std::ifstream& in) {
    uint64_t v = 0;
    in.read(reinterpret_cast<char*>(&v), sizeof(v));
    return v;
}

void write_string(std::ofstream& out, const std::string& s) {
    write_u32(out, static_cast<uint32_t>(s.size()));
    out.write(s.data(), static_cast<std::streamsize>(s.size()));
}

std::string read_string(std::ifstream& in) {
    const uint32_t n = read_u32(in);
    std::string s(n, '\0');
    in.read(s.data(), n);
    return s;
}

}  // namespace

void save_checkpoint(const ConvNet& net, const std::filesystem::path& path) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw IoError("cannot write checkpoint '" + path.string() + "'");
    out.write(kMagic, sizeof(kMagic));
    write_string(out, net.arch().descriptor());
    write_u32(out, static_cast<uint32_t>(net.class_names().size()));
    for (const auto& name : net.class_names()) write_string(out, name);
    write_u64(out, net.params().size());
    out.write(reinterpret_cast<const char*>(net.params().data()),
              static_cast<std::streamsize>(net.params().size() * sizeof(double)));
    if (!out) throw IoError("failed writing checkpoint '" + path.string() + "'");
}

ConvNet load_checkpoint(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw StageDependencyError("missing checkpoint '" + path.string() + "'");
    char magic[8] = {0};
    in.read(magic, sizeof(magic));
    if (std::memcmp(magic, kMagic, sizeof(kMagic)) != 0)
        throw IoError("'" + path.string() + "' is not a checkpoint (bad magic)");

    const Architecture arch = Architecture::from_descriptor(read_string(in));
    const uint32_t n_classes = read_u32(in);
    std::vector<std::string> names(n_classes);
    for (auto& name : names) name = read_string(in);
    const uint64_t n_params = read_u64(in);

    ConvNet net(arch, 0);
    if (net.params().size() != n_params)
        throw IoError("checkpoint parameter count does not match architecture");
    in.read(reinterpret_cast<char*>(net.params().data()),
            static_cast<std::streamsize>(n_params * sizeof(double)));
    if (!in) throw IoError("truncated checkpoint '" + path.string() + "'");
    net.class_names() = std::move(names);
    return net;
}

}  // namespace glowsign
