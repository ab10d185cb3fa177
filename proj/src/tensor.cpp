#include "dmsrd/tensor.hpp"

#include <cstdint>
#include <cstring>
#include <fstream>
#include <numeric>

namespace dmsrd {

namespace {
constexpr char kMagic[] = "DMSRD-CKPT-v1";
}

Tensor::Tensor(std::vector<std::size_t> s, double fill) : shape(std::move(s)) {
    std::size_t n = 1;
    for (std::size_t d : shape) n *= d;
    data.assign(n, fill);
}

void ParamSet::add(const std::string& name, Tensor t) {
    check(!has(name), "ParamSet: duplicate tensor name " + name);
    entries_.emplace_back(name, std::move(t));
}

bool ParamSet::has(const std::string& name) const {
    for (const auto& [n, t] : entries_)
        if (n == name) return true;
    return false;
}

Tensor& ParamSet::get(const std::string& name) {
    for (auto& [n, t] : entries_)
        if (n == name) return t;
    throw ContractError("ParamSet: unknown tensor " + name);
}

const Tensor& ParamSet::get(const std::string& name) const {
    for (const auto& [n, t] : entries_)
        if (n == name) return t;
    throw ContractError("ParamSet: unknown tensor " + name);
}

std::size_t ParamSet::total_size() const {
    std::size_t n = 0;
    for (const auto& [name, t] : entries_) n += t.size();
    return n;
}

Vec ParamSet::flatten() const {
    Vec out;
    out.reserve(total_size());
    for (const auto& [name, t] : entries_)
        out.insert(out.end(), t.data.begin(), t.data.end());
    return out;
}

void ParamSet::unflatten(const Vec& flat) {
    check(flat.size() == total_size(), "ParamSet: flat size mismatch");
    std::size_t off = 0;
    for (auto& [name, t] : entries_) {
        std::copy(flat.begin() + off, flat.begin() + off + t.size(), t.data.begin());
        off += t.size();
    }
}

ParamSet ParamSet::zeros_like() const {
    ParamSet out;
    for (const auto& [name, t] : entries_) out.add(name, Tensor(t.shape));
    return out;
}

bool ParamSet::finite() const {
    for (const auto& [name, t] : entries_)
        if (!all_finite(t.data)) return false;
    return true;
}

void ParamSet::add_scaled(const ParamSet& other, double a) {
    check(other.count() == count(), "ParamSet: entry count mismatch");
    for (std::size_t i = 0; i < count(); ++i) {
        Tensor& dst = entries_[i].second;
        const Tensor& src = other.tensor(i);
        check(src.size() == dst.size(), "ParamSet: tensor size mismatch");
        for (std::size_t k = 0; k < dst.size(); ++k) dst.data[k] += a * src.data[k];
    }
}

void save_checkpoint(const ParamSet& params, const std::string& path) {
    std::ofstream f(path, std::ios::binary);
    if (!f) throw IntegrityError("cannot open checkpoint for writing: " + path);
    f.write(kMagic, sizeof(kMagic));
    std::uint64_t n = params.count();
    f.write(reinterpret_cast<const char*>(&n), sizeof(n));
    for (std::size_t i = 0; i < params.count(); ++i) {
        const std::string& name = params.name(i);
        const Tensor& t = params.tensor(i);
        std::uint64_t len = name.size();
        f.write(reinterpret_cast<const char*>(&len), sizeof(len));
        f.write(name.data(), static_cast<std::streamsize>(len));
        std::uint64_t rank = t.shape.size();
        f.write(reinterpret_cast<const char*>(&rank), sizeof(rank));
        for (std::size_t d : t.shape) {
            std::uint64_t dim = d;
            f.write(reinterpret_cast<const char*>(&dim), sizeof(dim));
        }
        f.write(reinterpret_cast<const char*>(t.data.data()),
                static_cast<std::streamsize>(t.data.size() * sizeof(double)));
    }
    if (!f) throw IntegrityError("checkpoint write failed: " + path);
}

ParamSet load_checkpoint(const std::string& path) {
    std::ifstream f(path, std::ios::binary);
    if (!f) throw IntegrityError("cannot open checkpoint: " + path);
    char magic[sizeof(kMagic)];
    f.read(magic, sizeof(kMagic));
    if (!f || std::memcmp(magic, kMagic, sizeof(kMagic)) != 0)
        throw IntegrityError("bad checkpoint magic: " + path);
    std::uint64_t n = 0;
    f.read(reinterpret_cast<char*>(&n), sizeof(n));
    ParamSet out;
    for (std::uint64_t i = 0; i < n; ++i) {
        std::uint64_t len = 0;
        f.read(reinterpret_cast<char*>(&len), sizeof(len));
        std::string name(len, '\0');
        f.read(name.data(), static_cast<std::streamsize>(len));
        std::uint64_t rank = 0;
        f.read(reinterpret_cast<char*>(&rank), sizeof(rank));
        std::vector<std::size_t> shape(rank);
        for (auto& d : shape) {
            std::uint64_t dim = 0;
            f.read(reinterpret_cast<char*>(&dim), sizeof(dim));
            d = dim;
        }
        Tensor t(shape);
        f.read(reinterpret_cast<char*>(t.data.data()),
               static_cast<std::streamsize>(t.data.size() * sizeof(double)));
        if (!f) throw IntegrityError("truncated checkpoint: " + path);
        out.add(name, std::move(t));
    }
    return out;
}

}  // namespace dmsrd
