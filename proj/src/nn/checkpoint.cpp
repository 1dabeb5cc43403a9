#include "oxy/nn/checkpoint.hpp"

#include <bit>
#include <cstring>
#include <fstream>
#include <stdexcept>

namespace oxy::nn {

static_assert(std::endian::native == std::endian::little, "checkpoint I/O assumes a little-endian host");

namespace {

constexpr char kMagic[4] = {'O', 'X', 'C', 'K'};

template <class U>
void put(std::ostream& os, U v) {
    os.write(reinterpret_cast<const char*>(&v), sizeof v);
}

void put_string(std::ostream& os, const std::string& s) {
    put<std::uint32_t>(os, static_cast<std::uint32_t>(s.size()));
    os.write(s.data(), static_cast<std::streamsize>(s.size()));
}

void put_record(std::ostream& os, const TensorRecord& r) {
    if (r.data.size() != r.shape.size()) throw std::invalid_argument("tensor record " + r.name + " has inconsistent size");
    put_string(os, r.name);
    for (int d : {r.shape.n, r.shape.c, r.shape.h, r.shape.w}) put<std::int32_t>(os, d);
    os.write(reinterpret_cast<const char*>(r.data.data()), static_cast<std::streamsize>(r.data.size() * sizeof(float)));
}

class Reader {
public:
    Reader(std::istream& is, std::string path) : is_(is), path_(std::move(path)) {}

    template <class U>
    U get() {
        U v{};
        read(&v, sizeof v);
        return v;
    }
    std::string get_string() {
        const auto n = get<std::uint32_t>();
        if (n > (1u << 20)) fail("implausible string length");
        std::string s(n, '\0');
        read(s.data(), n);
        return s;
    }
    TensorRecord get_record() {
        TensorRecord r;
        r.name = get_string();
        r.shape.n = get<std::int32_t>();
        r.shape.c = get<std::int32_t>();
        r.shape.h = get<std::int32_t>();
        r.shape.w = get<std::int32_t>();
        if (r.shape.n < 0 || r.shape.c < 0 || r.shape.h < 0 || r.shape.w < 0) fail("negative dimension in " + r.name);
        r.data.resize(r.shape.size());
        read(r.data.data(), r.data.size() * sizeof(float));
        return r;
    }
    [[noreturn]] void fail(const std::string& what) const { throw std::runtime_error(path_ + ": " + what); }

private:
    void read(void* dst, std::size_t n) {
        is_.read(static_cast<char*>(dst), static_cast<std::streamsize>(n));
        if (static_cast<std::size_t>(is_.gcount()) != n) fail("truncated checkpoint");
    }

    std::istream& is_;
    std::string path_;
};

}  // namespace

void Checkpoint::save(const std::filesystem::path& path) const {
    std::ofstream os(path, std::ios::binary);
    if (!os) throw std::runtime_error("cannot write checkpoint " + path.string());
    os.write(kMagic, 4);
    put<std::uint32_t>(os, kVersion);
    put<std::uint64_t>(os, parameters.size());
    for (const auto& r : parameters) put_record(os, r);
    put<std::uint64_t>(os, optimizer.size());
    for (const auto& r : optimizer) put_record(os, r);
    put<std::uint64_t>(os, meta.size());
    for (const auto& [k, v] : meta) {
        put_string(os, k);
        put_string(os, v);
    }
    if (!os) throw std::runtime_error("failed writing checkpoint " + path.string());
}

Checkpoint Checkpoint::load(const std::filesystem::path& path) {
    std::ifstream is(path, std::ios::binary);
    if (!is) throw std::runtime_error("cannot open checkpoint " + path.string());
    Reader rd(is, path.string());
    char magic[4];
    for (char& c : magic) c = rd.get<char>();
    if (std::memcmp(magic, kMagic, 4) != 0) rd.fail("not a checkpoint file");
    const auto version = rd.get<std::uint32_t>();
    if (version != kVersion) rd.fail("unsupported checkpoint version " + std::to_string(version));
    Checkpoint ck;
    const auto n_params = rd.get<std::uint64_t>();
    for (std::uint64_t i = 0; i < n_params; ++i) ck.parameters.push_back(rd.get_record());
    const auto n_opt = rd.get<std::uint64_t>();
    for (std::uint64_t i = 0; i < n_opt; ++i) ck.optimizer.push_back(rd.get_record());
    const auto n_meta = rd.get<std::uint64_t>();
    for (std::uint64_t i = 0; i < n_meta; ++i) {
        auto k = rd.get_string();
        ck.meta[k] = rd.get_string();
    }
    return ck;
}

const TensorRecord& Checkpoint::parameter(const std::string& name) const {
    for (const auto& r : parameters) {
        if (r.name == name) return r;
    }
    throw std::runtime_error("checkpoint has no parameter " + name);
}

void export_parameters(const std::vector<Parameter<float>*>& params, Checkpoint& ck) {
    for (const auto* p : params) ck.parameters.push_back({p->name, p->tensor->shape, p->tensor->value});
}

void import_parameters(const Checkpoint& ck, const std::vector<Parameter<float>*>& params) {
    for (auto* p : params) {
        const auto& r = ck.parameter(p->name);
        if (!(r.shape == p->tensor->shape)) {
            throw std::runtime_error("checkpoint/config mismatch for " + p->name + ": " + r.shape.str() + " vs " +
                                     p->tensor->shape.str());
        }
        p->tensor->value = r.data;
    }
}

void export_optimizer(const Adam<float>& opt, const std::string& prefix, Checkpoint& ck) {
    const auto& params = opt.parameters();
    const auto& st = opt.state();
    for (std::size_t k = 0; k < params.size(); ++k) {
        ck.optimizer.push_back({prefix + "m/" + params[k]->name, params[k]->tensor->shape, st.m[k]});
        ck.optimizer.push_back({prefix + "v/" + params[k]->name, params[k]->tensor->shape, st.v[k]});
    }
    ck.meta[prefix + "t"] = std::to_string(st.t);
}

void import_optimizer(const Checkpoint& ck, const std::string& prefix, Adam<float>& opt) {
    const auto find = [&](const std::string& name) -> const TensorRecord& {
        for (const auto& r : ck.optimizer) {
            if (r.name == name) return r;
        }
        throw std::runtime_error("checkpoint has no optimizer record " + name);
    };
    const auto& params = opt.parameters();
    auto& st = opt.state();
    for (std::size_t k = 0; k < params.size(); ++k) {
        const auto& m = find(prefix + "m/" + params[k]->name);
        const auto& v = find(prefix + "v/" + params[k]->name);
        if (m.data.size() != params[k]->tensor->value.size() || v.data.size() != m.data.size()) {
            throw std::runtime_error("checkpoint/config mismatch in optimizer state for " + params[k]->name);
        }
        st.m[k] = m.data;
        st.v[k] = v.data;
    }
    const auto it = ck.meta.find(prefix + "t");
    if (it == ck.meta.end()) throw std::runtime_error("checkpoint lacks optimizer step counter " + prefix + "t");
    st.t = std::stoll(it->second);
}

}  // namespace oxy::nn
