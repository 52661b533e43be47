#include "uavipp/checkpoint.hpp"

#include "uavipp/errors.hpp"

#include <array>
#include <fstream>

namespace uavipp {

namespace {

constexpr std::array<char, 8> kMagic = {'U', 'A', 'V', 'I', 'P', 'P', 'C', 'K'};

enum class DType : std::uint8_t { f32 = 0, f64 = 1 };

template <typename T>
void put(std::ostream& out, T v)
{
    out.write(reinterpret_cast<const char*>(&v), sizeof(T));
}

void put_string(std::ostream& out, const std::string& s)
{
    put<std::uint32_t>(out, static_cast<std::uint32_t>(s.size()));
    out.write(s.data(), static_cast<std::streamsize>(s.size()));
}

template <typename T>
T get(std::istream& in)
{
    T v{};
    in.read(reinterpret_cast<char*>(&v), sizeof(T));
    if (!in) {
        throw ConfigError("checkpoint is truncated");
    }
    return v;
}

std::string get_string(std::istream& in)
{
    const auto n = get<std::uint32_t>(in);
    if (n > (1u << 24)) {
        throw ConfigError("checkpoint string length is implausible");
    }
    std::string s(n, '\0');
    in.read(s.data(), n);
    if (!in) {
        throw ConfigError("checkpoint is truncated");
    }
    return s;
}

} // namespace

const std::string& Checkpoint::get(const std::string& key) const
{
    const auto it = meta.find(key);
    if (it == meta.end()) {
        throw ConfigError("checkpoint descriptor lacks '" + key + "'");
    }
    return it->second;
}

int Checkpoint::get_int(const std::string& key) const { return std::stoi(get(key)); }

double Checkpoint::get_double(const std::string& key) const { return std::stod(get(key)); }

void write_checkpoint(const std::filesystem::path& path, const Checkpoint& ckpt)
{
    if (path.has_parent_path()) {
        std::filesystem::create_directories(path.parent_path());
    }
    std::ofstream out(path, std::ios::binary);
    if (!out) {
        throw std::runtime_error("cannot write checkpoint " + path.string());
    }
    out.write(kMagic.data(), kMagic.size());
    put<std::uint32_t>(out, kCheckpointVersion);
    put_string(out, ckpt.kind);
    put<std::uint32_t>(out, static_cast<std::uint32_t>(ckpt.meta.size()));
    for (const auto& [k, v] : ckpt.meta) {
        put_string(out, k);
        put_string(out, v);
    }
    put<std::uint32_t>(out, static_cast<std::uint32_t>(ckpt.tensors.size()));
    for (const auto& [name, tensor] : ckpt.tensors) {
        const bool f64 = tensor.scalar_type() == torch::kFloat64;
        const torch::Tensor t = tensor.detach().to(torch::kCPU, f64 ? torch::kFloat64 : torch::kFloat32).contiguous();
        put_string(out, name);
        put<std::uint8_t>(out, static_cast<std::uint8_t>(f64 ? DType::f64 : DType::f32));
        put<std::uint32_t>(out, static_cast<std::uint32_t>(t.dim()));
        for (auto d : t.sizes()) {
            put<std::int64_t>(out, d);
        }
        out.write(static_cast<const char*>(t.data_ptr()), static_cast<std::streamsize>(t.nbytes()));
    }
    if (!out) {
        throw std::runtime_error("failed writing checkpoint " + path.string());
    }
}

Checkpoint read_checkpoint(const std::filesystem::path& path, const std::string& expected_kind)
{
    std::ifstream in(path, std::ios::binary);
    if (!in) {
        throw ConfigError("checkpoint not found: " + path.string());
    }
    std::array<char, 8> magic{};
    in.read(magic.data(), magic.size());
    if (!in || magic != kMagic) {
        throw ConfigError(path.string() + " is not a uavipp checkpoint");
    }
    const auto version = get<std::uint32_t>(in);
    if (version != kCheckpointVersion) {
        throw ConfigError("unsupported checkpoint version " + std::to_string(version));
    }
    Checkpoint ckpt;
    ckpt.kind = get_string(in);
    if (!expected_kind.empty() && ckpt.kind != expected_kind) {
        throw ConfigError(path.string() + " holds a '" + ckpt.kind + "' checkpoint, expected '" + expected_kind + "'");
    }
    const auto n_meta = get<std::uint32_t>(in);
    for (std::uint32_t i = 0; i < n_meta; ++i) {
        auto k = get_string(in);
        ckpt.meta[k] = get_string(in);
    }
    const auto n_tensors = get<std::uint32_t>(in);
    for (std::uint32_t i = 0; i < n_tensors; ++i) {
        auto name = get_string(in);
        const auto dtype = static_cast<DType>(get<std::uint8_t>(in));
        if (dtype != DType::f32 && dtype != DType::f64) {
            throw ConfigError("checkpoint tensor '" + name + "' has an unknown dtype");
        }
        const auto ndim = get<std::uint32_t>(in);
        std::vector<std::int64_t> sizes;
        for (std::uint32_t d = 0; d < ndim; ++d) {
            sizes.push_back(get<std::int64_t>(in));
        }
        auto t = torch::empty(sizes, dtype == DType::f64 ? torch::kFloat64 : torch::kFloat32);
        in.read(static_cast<char*>(t.data_ptr()), static_cast<std::streamsize>(t.nbytes()));
        if (!in) {
            throw ConfigError("checkpoint is truncated");
        }
        ckpt.tensors.emplace_back(std::move(name), std::move(t));
    }
    return ckpt;
}

void append_module(Checkpoint& ckpt, const std::string& prefix, const torch::nn::Module& module)
{
    for (const auto& p : module.named_parameters(true)) {
        ckpt.tensors.emplace_back(prefix + p.key(), p.value().detach().clone());
    }
    for (const auto& b : module.named_buffers(true)) {
        ckpt.tensors.emplace_back(prefix + b.key(), b.value().detach().clone());
    }
}

void load_module(const Checkpoint& ckpt, const std::string& prefix, torch::nn::Module& module)
{
    std::map<std::string, const torch::Tensor*> by_name;
    for (const auto& [name, t] : ckpt.tensors) {
        by_name[name] = &t;
    }
    torch::NoGradGuard no_grad;
    auto copy_into = [&](const std::string& key, torch::Tensor& dst) {
        const auto it = by_name.find(prefix + key);
        if (it == by_name.end()) {
            throw ConfigError("checkpoint lacks tensor '" + prefix + key + "'");
        }
        if (it->second->sizes() != dst.sizes()) {
            throw ConfigError("checkpoint tensor '" + prefix + key + "' has the wrong shape");
        }
        dst.copy_(*it->second);
    };
    for (auto& p : module.named_parameters(true)) {
        copy_into(p.key(), p.value());
    }
    for (auto& b : module.named_buffers(true)) {
        copy_into(b.key(), b.value());
    }
}

} // namespace uavipp
