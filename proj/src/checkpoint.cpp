#include "kgml/checkpoint.hpp"

#include <cstdint>
#include <fstream>

namespace kgml {

namespace {

constexpr char kMagic[8] = {'K', 'G', 'M', 'L', 'C', 'K', 'P', 'T'};
constexpr std::uint32_t kVersion = 1;

void write_u32(std::ofstream& out, std::uint32_t v) {
    out.write(reinterpret_cast<const char*>(&v), sizeof(v));
}

std::uint32_t read_u32(std::ifstream& in) {
    std::uint32_t v = 0;
    in.read(reinterpret_cast<char*>(&v), sizeof(v));
    return v;
}

void write_string(std::ofstream& out, const std::string& s) {
    write_u32(out, static_cast<std::uint32_t>(s.size()));
    out.write(s.data(), static_cast<std::streamsize>(s.size()));
}

std::string read_string(std::ifstream& in) {
    const std::uint32_t len = read_u32(in);
    std::string s(len, '\0');
    in.read(s.data(), static_cast<std::streamsize>(len));
    return s;
}

}  // namespace

void save_checkpoint(const std::string& path, const ParameterStore& store,
                     const std::string& config_snapshot) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw DataError("cannot write checkpoint: " + path);
    out.write(kMagic, sizeof(kMagic));
    write_u32(out, kVersion);
    write_string(out, config_snapshot);
    write_u32(out, static_cast<std::uint32_t>(store.all().size()));
    for (const auto& p : store.all()) {
        write_string(out, group_name(p.group));
        write_string(out, p.name);
        write_u32(out, static_cast<std::uint32_t>(p.value.rows()));
        write_u32(out, static_cast<std::uint32_t>(p.value.cols()));
        out.write(reinterpret_cast<const char*>(p.value.data()),
                  static_cast<std::streamsize>(sizeof(double) * p.value.size()));
    }
    if (!out) throw DataError("checkpoint write failed: " + path);
}

Checkpoint load_checkpoint(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw DataError("cannot open checkpoint: " + path);
    char magic[8];
    in.read(magic, sizeof(magic));
    if (!in || std::string(magic, 8) != std::string(kMagic, 8))
        throw DataError("not a checkpoint file: " + path);
    if (read_u32(in) != kVersion) throw DataError("unsupported checkpoint version: " + path);

    Checkpoint ckpt;
    ckpt.config_snapshot = read_string(in);
    const std::uint32_t count = read_u32(in);
    for (std::uint32_t i = 0; i < count; ++i) {
        const Group group = group_from_name(read_string(in));
        const std::string name = read_string(in);
        const std::uint32_t rows = read_u32(in);
        const std::uint32_t cols = read_u32(in);
        Mat m(rows, cols);
        in.read(reinterpret_cast<char*>(m.data()),
                static_cast<std::streamsize>(sizeof(double) * m.size()));
        if (!in) throw DataError("truncated checkpoint: " + path);
        ckpt.store.add(name, group, std::move(m));
    }
    return ckpt;
}

void restore_into(ParameterStore& dst, const ParameterStore& src) {
    for (auto& p : dst.all()) {
        if (!src.has(p.name))
            throw DataError("checkpoint is missing parameter: " + p.name);
        const Param& s = src.at(p.name);
        if (s.value.rows() != p.value.rows() || s.value.cols() != p.value.cols())
            throw DataError("checkpoint shape mismatch for " + p.name + ": " +
                            shape_str(s.value) + " vs " + shape_str(p.value));
        p.value = s.value;
    }
}

}  // namespace kgml
