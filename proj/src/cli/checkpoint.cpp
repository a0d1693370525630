#include <cstring>
#include <fstream>

#include <json.hpp>

#include "nmrl/checkpoint.hpp"
#include "nmrl/common.hpp"

namespace nmrl {

namespace {

constexpr char kMagic[] = "NMRLCKP1";
using json = nlohmann::json;

} // namespace

std::string encode_checkpoint(const Checkpoint& ck) {
    const json meta{{"config", render_config(ck.cfg)},
                    {"tag", ck.tag},
                    {"iteration", ck.iteration}};
    const std::string meta_s = meta.dump();

    std::string s(kMagic, 8);
    std::uint64_t len = meta_s.size();
    for (int i = 0; i < 8; ++i) s.push_back(static_cast<char>((len >> (8 * i)) & 0xff));
    s += meta_s;

    const auto family = make_family(ck.cfg);
    const PolicySpec spec = build_policy_spec(ck.cfg, *family);
    s += encode_tensors(pack_params(ck.params, spec));
    return s;
}

Checkpoint decode_checkpoint(const std::string& bytes) {
    if (bytes.size() < 16 || bytes.compare(0, 8, kMagic, 8) != 0)
        throw ConfigError("checkpoint: bad magic");
    std::uint64_t len = 0;
    for (int i = 0; i < 8; ++i)
        len |= static_cast<std::uint64_t>(static_cast<unsigned char>(bytes[8 + i])) << (8 * i);
    if (16 + len > bytes.size()) throw ConfigError("checkpoint: truncated metadata");

    json meta;
    try {
        meta = json::parse(bytes.substr(16, len));
    } catch (const json::exception& e) {
        throw ConfigError(std::string("checkpoint: bad metadata: ") + e.what());
    }

    Checkpoint ck;
    try {
        ck.cfg = parse_run_config(meta.at("config").get<std::string>());
        ck.tag = meta.at("tag").get<std::string>();
        ck.iteration = meta.at("iteration").get<std::size_t>();
    } catch (const json::exception& e) {
        throw ConfigError(std::string("checkpoint: missing metadata field: ") + e.what());
    }

    const auto family = make_family(ck.cfg);
    const PolicySpec spec = build_policy_spec(ck.cfg, *family);
    try {
        ck.params = unpack_params(decode_tensors(bytes.substr(16 + len)), spec);
    } catch (const ContractError& e) {
        throw ConfigError(std::string("checkpoint: ") + e.what());
    }
    return ck;
}

void save_checkpoint(const std::string& path, const Checkpoint& ck) {
    const std::string bytes = encode_checkpoint(ck);
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw ConfigError("cannot open checkpoint file '" + path + "' for writing");
    out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
    if (!out) throw ConfigError("failed writing checkpoint '" + path + "'");
}

Checkpoint load_checkpoint(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw ConfigError("cannot open checkpoint file '" + path + "'");
    std::string bytes((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
    return decode_checkpoint(bytes);
}

} // namespace nmrl
