#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <string>
#include <vector>

#include "oxy/nn/adam.hpp"
#include "oxy/nn/tensor.hpp"

namespace oxy::nn {

struct TensorRecord {
    std::string name;
    Shape shape;
    std::vector<float> data;
};

/// Binary checkpoint: "OXCK", u32 version, u64 parameter count, parameter
/// records, u64 optimizer record count, optimizer records, u64 meta count,
/// meta strings. A record is u32 name length, name bytes, four i32 dims and
/// raw little-endian float32 data. Writing the same state twice gives the same
/// bytes.
struct Checkpoint {
    static constexpr std::uint32_t kVersion = 1;

    std::vector<TensorRecord> parameters;
    std::vector<TensorRecord> optimizer;
    std::map<std::string, std::string> meta;

    void save(const std::filesystem::path& path) const;
    static Checkpoint load(const std::filesystem::path& path);

    const TensorRecord& parameter(const std::string& name) const;
};

void export_parameters(const std::vector<Parameter<float>*>& params, Checkpoint& ck);
/// Copies matching records into the parameters; throws on a missing name or a
/// shape mismatch.
void import_parameters(const Checkpoint& ck, const std::vector<Parameter<float>*>& params);

/// Adam moments are stored as optimizer records "<prefix>m/<param>" and
/// "<prefix>v/<param>", the step counter as meta "<prefix>t".
void export_optimizer(const Adam<float>& opt, const std::string& prefix, Checkpoint& ck);
void import_optimizer(const Checkpoint& ck, const std::string& prefix, Adam<float>& opt);

}  // namespace oxy::nn
