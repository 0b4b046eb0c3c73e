#ifndef EVO_CHECKPOINT_HPP
#define EVO_CHECKPOINT_HPP

#include <evo/tensor.hpp>

#include <cstdint>
#include <cstring>
#include <fstream>
#include <map>
#include <string>
#include <utility>
#include <vector>

namespace evo {

/// Self-describing binary parameter bundle: magic, version, hyperparameter
/// table, then named tensor records (name, shape, raw little-endian f64).
/// Round trips are bit-exact.
struct Checkpoint {
    static constexpr char kMagic[8] = {'E', 'V', 'O', 'C', 'K', 'P', 'T', '\0'};
    static constexpr std::uint32_t kVersion = 1;

    std::map<std::string, double> hyper;
    std::vector<std::pair<std::string, Tensor>> tensors;

    void add_tensor(const std::string& name, const Tensor& t) { tensors.emplace_back(name, t); }

    const Tensor& tensor(const std::string& name) const {
        for (const auto& [n, t] : tensors)
            if (n == name) return t;
        throw std::runtime_error("checkpoint: missing tensor '" + name + "'");
    }

    double hyperparam(const std::string& name) const {
        auto it = hyper.find(name);
        if (it == hyper.end()) throw std::runtime_error("checkpoint: missing hyperparameter '" + name + "'");
        return it->second;
    }

    void save(const std::string& path) const {
        std::ofstream out(path, std::ios::binary);
        if (!out) throw std::runtime_error("checkpoint: cannot open '" + path + "' for writing");
        out.write(kMagic, sizeof(kMagic));
        write_u32(out, kVersion);
        write_u32(out, std::uint32_t(hyper.size()));
        for (const auto& [name, value] : hyper) {
            write_string(out, name);
            write_f64(out, value);
        }
        write_u32(out, std::uint32_t(tensors.size()));
        for (const auto& [name, t] : tensors) {
            write_string(out, name);
            write_u32(out, std::uint32_t(t.shape.size()));
            for (auto d : t.shape) write_u64(out, d);
            for (double v : t.values) write_f64(out, v);
        }
        if (!out) throw std::runtime_error("checkpoint: write failed for '" + path + "'");
    }

    static Checkpoint load(const std::string& path) {
        std::ifstream in(path, std::ios::binary);
        if (!in) throw std::runtime_error("checkpoint: cannot open '" + path + "'");
        char magic[8];
        in.read(magic, sizeof(magic));
        if (!in || std::memcmp(magic, kMagic, sizeof(kMagic)) != 0)
            throw std::runtime_error("checkpoint: bad magic in '" + path + "'");
        std::uint32_t version = read_u32(in);
        if (version != kVersion)
            throw std::runtime_error("checkpoint: unsupported version " + std::to_string(version));
        Checkpoint ck;
        std::uint32_t n_hyper = read_u32(in);
        for (std::uint32_t i = 0; i < n_hyper; ++i) {
            std::string name = read_string(in);
            ck.hyper[name] = read_f64(in);
        }
        std::uint32_t n_tensors = read_u32(in);
        for (std::uint32_t i = 0; i < n_tensors; ++i) {
            std::string name = read_string(in);
            std::uint32_t ndim = read_u32(in);
            if (ndim > 8) throw std::runtime_error("checkpoint: corrupt tensor rank");
            std::vector<std::size_t> shape;
            for (std::uint32_t d = 0; d < ndim; ++d) shape.push_back(std::size_t(read_u64(in)));
            std::size_t n = Tensor::numel_of(shape);
            std::vector<double> values(n);
            for (std::size_t j = 0; j < n; ++j) values[j] = read_f64(in);
            if (!in) throw std::runtime_error("checkpoint: truncated file '" + path + "'");
            ck.tensors.emplace_back(name, Tensor(std::move(shape), std::move(values)));
        }
        return ck;
    }

    /// Copies a stored tensor into dst; shape mismatch is an explicit error.
    void restore_into(const std::string& name, Tensor& dst) const {
        const Tensor& src = tensor(name);
        if (src.shape != dst.shape)
            throw std::runtime_error("checkpoint: tensor '" + name + "' shape " +
                                     Tensor::shape_str(src.shape) + " does not match expected " +
                                     Tensor::shape_str(dst.shape));
        dst.values = src.values;
    }

private:
    static void write_u32(std::ostream& o, std::uint32_t v) { o.write(reinterpret_cast<char*>(&v), 4); }
    static void write_u64(std::ostream& o, std::uint64_t v) { o.write(reinterpret_cast<char*>(&v), 8); }
    static void write_f64(std::ostream& o, double v) { o.write(reinterpret_cast<char*>(&v), 8); }
    static void write_string(std::ostream& o, const std::string& s) {
        write_u32(o, std::uint32_t(s.size()));
        o.write(s.data(), std::streamsize(s.size()));
    }
    static std::uint32_t read_u32(std::istream& i) {
        std::uint32_t v = 0;
        i.read(reinterpret_cast<char*>(&v), 4);
        if (!i) throw std::runtime_error("checkpoint: truncated file");
        return v;
    }
    static std::uint64_t read_u64(std::istream& i) {
        std::uint64_t v = 0;
        i.read(reinterpret_cast<char*>(&v), 8);
        if (!i) throw std::runtime_error("checkpoint: truncated file");
        return v;
    }
    static double read_f64(std::istream& i) {
        double v = 0;
        i.read(reinterpret_cast<char*>(&v), 8);
        if (!i) throw std::runtime_error("checkpoint: truncated file");
        return v;
    }
    static std::string read_string(std::istream& i) {
        std::uint32_t len = read_u32(i);
        if (len > 4096) throw std::runtime_error("checkpoint: corrupt string length");
        std::string s(len, '\0');
        i.read(s.data(), len);
        if (!i) throw std::runtime_error("checkpoint: truncated file");
        return s;
    }
};

}  // namespace evo

#endif  // EVO_CHECKPOINT_HPP
