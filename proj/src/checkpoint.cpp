#include "coopdiff/checkpoint.hpp"

#include <cstring>
#include <filesystem>
#include <fstream>

namespace coopdiff {

namespace {

constexpr char magic[4] = {'S', 'R', 'D', 'F'};

void put_u32(std::string& out, uint32_t v) {
    for (int i = 0; i < 4; ++i) out.push_back(char((v >> (8 * i)) & 0xff));
}

void put_u64(std::string& out, uint64_t v) {
    for (int i = 0; i < 8; ++i) out.push_back(char((v >> (8 * i)) & 0xff));
}

uint32_t get_u32(const char* p) {
    uint32_t v = 0;
    for (int i = 0; i < 4; ++i) v |= uint32_t(uint8_t(p[i])) << (8 * i);
    return v;
}

uint64_t get_u64(const char* p) {
    uint64_t v = 0;
    for (int i = 0; i < 8; ++i) v |= uint64_t(uint8_t(p[i])) << (8 * i);
    return v;
}

}  // namespace

nlohmann::json training_metadata::to_json() const {
    nlohmann::json j;
    j["dataset_seed"] = dataset_seed;
    j["dataset_size"] = dataset_size;
    j["epochs"] = epochs;
    j["steps"] = steps;
    j["batch_size"] = batch_size;
    j["learning_rate"] = learning_rate;
    j["uncond_dropout_prob"] = uncond_dropout_prob;
    j["train_seed"] = train_seed;
    j["untrained_val_loss"] = untrained_val_loss;
    j["final_val_loss"] = final_val_loss;
    j["val_interval"] = val_interval;
    j["val_loss_tail"] = val_loss_tail;
    return j;
}

training_metadata training_metadata::from_json(const nlohmann::json& j) {
    training_metadata m;
    m.dataset_seed = j.at("dataset_seed").get<uint64_t>();
    m.dataset_size = j.at("dataset_size").get<int>();
    m.epochs = j.at("epochs").get<int>();
    m.steps = j.at("steps").get<int>();
    m.batch_size = j.at("batch_size").get<int>();
    m.learning_rate = j.at("learning_rate").get<double>();
    m.uncond_dropout_prob = j.at("uncond_dropout_prob").get<double>();
    m.train_seed = j.at("train_seed").get<uint64_t>();
    m.untrained_val_loss = j.at("untrained_val_loss").get<double>();
    m.final_val_loss = j.at("final_val_loss").get<double>();
    m.val_interval = j.at("val_interval").get<int>();
    m.val_loss_tail = j.at("val_loss_tail").get<std::vector<double>>();
    return m;
}

void save_checkpoint(const checkpoint& ckpt, const std::string& path) {
    COOPDIFF_CHECK(ckpt.weights.size() == param_count(ckpt.config), error_kind::config,
                   "save_checkpoint: weight count does not match config");
    COOPDIFF_CHECK(!ckpt.fingerprint.empty(), error_kind::config,
                   "save_checkpoint: missing data-space fingerprint");

    nlohmann::json header;
    header["config"] = ckpt.config.to_json();
    header["metadata"] = ckpt.metadata.to_json();
    header["fingerprint"] = ckpt.fingerprint;
    header["weight_count"] = ckpt.weights.size();
    std::string header_str = header.dump();

    std::string blob;
    blob.reserve(16 + header_str.size() + ckpt.weights.size() * 4);
    blob.append(magic, 4);
    put_u32(blob, checkpoint_format_version);
    put_u64(blob, header_str.size());
    blob += header_str;
    size_t wbytes = ckpt.weights.size() * sizeof(float);
    size_t at = blob.size();
    blob.resize(at + wbytes);
    std::memcpy(blob.data() + at, ckpt.weights.data(), wbytes);

    // Atomic: write sibling temp file, then rename over the target.
    std::filesystem::path target(path);
    std::filesystem::path tmp = target;
    tmp += ".tmp";
    {
        std::ofstream f(tmp, std::ios::binary | std::ios::trunc);
        COOPDIFF_CHECK(f.good(), error_kind::io, "save_checkpoint: cannot open " + tmp.string());
        f.write(blob.data(), std::streamsize(blob.size()));
        COOPDIFF_CHECK(f.good(), error_kind::io, "save_checkpoint: write failed " + tmp.string());
    }
    std::error_code ec;
    std::filesystem::rename(tmp, target, ec);
    COOPDIFF_CHECK(!ec, error_kind::io, "save_checkpoint: rename failed: " + ec.message());
}

checkpoint load_checkpoint(const std::string& path) {
    std::ifstream f(path, std::ios::binary);
    COOPDIFF_CHECK(f.good(), error_kind::io, "load_checkpoint: cannot open " + path);
    std::string blob((std::istreambuf_iterator<char>(f)), std::istreambuf_iterator<char>());

    COOPDIFF_CHECK(blob.size() >= 16, error_kind::io, "load_checkpoint: truncated file " + path);
    COOPDIFF_CHECK(std::memcmp(blob.data(), magic, 4) == 0, error_kind::io,
                   "load_checkpoint: bad magic in " + path);
    uint32_t version = get_u32(blob.data() + 4);
    COOPDIFF_CHECK(version == checkpoint_format_version, error_kind::io,
                   "load_checkpoint: unsupported format version " + std::to_string(version));
    uint64_t header_len = get_u64(blob.data() + 8);
    COOPDIFF_CHECK(blob.size() >= 16 + header_len, error_kind::io,
                   "load_checkpoint: truncated header in " + path);

    nlohmann::json header;
    try {
        header = nlohmann::json::parse(blob.substr(16, header_len));
    } catch (const nlohmann::json::exception& e) {
        throw_io("load_checkpoint: corrupt header in " + path + ": " + e.what());
    }

    checkpoint ckpt;
    try {
        ckpt.config = denoiser_config::from_json(header.at("config"));
        ckpt.metadata = training_metadata::from_json(header.at("metadata"));
        COOPDIFF_CHECK(header.contains("fingerprint"), error_kind::io,
                       "load_checkpoint: fingerprint missing in " + path);
        ckpt.fingerprint = header.at("fingerprint").get<std::string>();
        ckpt.config.validate();
        uint64_t count = header.at("weight_count").get<uint64_t>();
        COOPDIFF_CHECK(count == param_count(ckpt.config), error_kind::io,
                       "load_checkpoint: weight count does not match config in " + path);
        size_t wbytes = size_t(count) * sizeof(float);
        COOPDIFF_CHECK(blob.size() == 16 + header_len + wbytes, error_kind::io,
                       "load_checkpoint: truncated weights in " + path);
        ckpt.weights.resize(count);
        std::memcpy(ckpt.weights.data(), blob.data() + 16 + header_len, wbytes);
    } catch (const nlohmann::json::exception& e) {
        throw_io("load_checkpoint: malformed header fields in " + path + ": " + e.what());
    }
    return ckpt;
}

}  // namespace coopdiff
