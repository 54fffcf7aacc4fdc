#include "tryon/checkpoint.hpp"

namespace tryon {

namespace {

torch::Tensor encode_string(const std::string& s) {
    auto t = torch::empty({static_cast<int64_t>(s.size())}, torch::kUInt8);
    std::copy(s.begin(), s.end(), t.data_ptr<uint8_t>());
    return t;
}

std::string decode_string(const torch::Tensor& t) {
    auto c = t.contiguous();
    const auto* p = c.data_ptr<uint8_t>();
    return {p, p + c.numel()};
}

void write_meta(torch::serialize::OutputArchive& ar, const CheckpointMeta& m) {
    ar.write("meta/version", torch::tensor(m.version));
    ar.write("meta/kind", encode_string(m.kind));
    ar.write("meta/palette", encode_string(m.palette));
    ar.write("meta/config", encode_string(m.config));
    ar.write("meta/resolution",
             torch::tensor({int64_t{m.condition.height}, int64_t{m.condition.width}, int64_t{m.output.height},
                            int64_t{m.output.width}}));
    ar.write("meta/iteration", torch::tensor(m.iteration));
}

CheckpointMeta read_meta(torch::serialize::InputArchive& ar) {
    auto get = [&](const char* key) {
        torch::Tensor t;
        ar.read(key, t);
        return t;
    };
    CheckpointMeta m;
    m.version = get("meta/version").item<int64_t>();
    if (m.version != kCheckpointFormatVersion) {
        throw CheckpointError("unsupported checkpoint version " + std::to_string(m.version));
    }
    m.kind = decode_string(get("meta/kind"));
    m.palette = decode_string(get("meta/palette"));
    m.config = decode_string(get("meta/config"));
    const auto res = get("meta/resolution");
    auto r = res.accessor<int64_t, 1>();
    m.condition = {static_cast<int>(r[0]), static_cast<int>(r[1])};
    m.output = {static_cast<int>(r[2]), static_cast<int>(r[3])};
    m.iteration = get("meta/iteration").item<int64_t>();
    return m;
}

torch::serialize::InputArchive open(const std::filesystem::path& path) {
    if (!std::filesystem::exists(path)) throw CheckpointError("checkpoint not found: " + path.string());
    torch::serialize::InputArchive ar;
    try {
        ar.load_from(path.string());
    } catch (const c10::Error& e) {
        throw CheckpointError("cannot read checkpoint " + path.string() + ": " + e.what_without_backtrace());
    }
    return ar;
}

}  // namespace

void save_checkpoint(const std::filesystem::path& path, const CheckpointMeta& meta,
                     const std::vector<NamedModule>& modules, const std::vector<NamedOptimizer>& optimizers) {
    torch::serialize::OutputArchive ar;
    write_meta(ar, meta);
    for (const auto& [name, module] : modules) {
        for (const auto& p : module->named_parameters(true)) ar.write(name + "/" + p.key(), p.value().detach());
        for (const auto& b : module->named_buffers(true)) ar.write(name + "/" + b.key(), b.value(), true);
    }
    for (const auto& [name, optimizer] : optimizers) {
        torch::serialize::OutputArchive sub;
        optimizer->save(sub);
        ar.write("optim/" + name, sub);
    }
    if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
    const auto tmp = path.string() + ".tmp";
    ar.save_to(tmp);
    std::filesystem::rename(tmp, path);
}

CheckpointMeta read_checkpoint_meta(const std::filesystem::path& path) {
    auto ar = open(path);
    try {
        return read_meta(ar);
    } catch (const c10::Error& e) {
        throw CheckpointError("malformed checkpoint " + path.string() + ": " + e.what_without_backtrace());
    }
}

CheckpointMeta load_checkpoint(const std::filesystem::path& path, const std::vector<NamedModule>& modules,
                               const std::vector<NamedOptimizer>& optimizers) {
    auto ar = open(path);
    try {
        auto meta = read_meta(ar);
        torch::NoGradGuard no_grad;
        auto restore = [&](const std::string& key, torch::Tensor& dst, bool is_buffer) {
            torch::Tensor src;
            if (!ar.try_read(key, src, is_buffer)) throw CheckpointError("checkpoint lacks " + key);
            if (src.sizes() != dst.sizes()) throw CheckpointError("shape mismatch for " + key);
            dst.copy_(src);
        };
        for (const auto& [name, module] : modules) {
            for (auto& p : module->named_parameters(true)) restore(name + "/" + p.key(), p.value(), false);
            for (auto& b : module->named_buffers(true)) restore(name + "/" + b.key(), b.value(), true);
        }
        for (const auto& [name, optimizer] : optimizers) {
            torch::serialize::InputArchive sub;
            if (!ar.try_read("optim/" + name, sub)) throw CheckpointError("checkpoint lacks optimizer " + name);
            optimizer->load(sub);
        }
        return meta;
    } catch (const c10::Error& e) {
        throw CheckpointError("malformed checkpoint " + path.string() + ": " + e.what_without_backtrace());
    }
}

}  // namespace tryon
