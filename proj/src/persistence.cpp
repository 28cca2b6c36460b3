#include "fuselab/persistence.hpp"

#include <bit>
#include <cstring>
#include <fstream>
#include <iterator>
#include <sstream>

#include <boost/crc.hpp>

#include "config_json.hpp"
#include "fuselab/errors.hpp"

namespace fuselab {

using detail::json;

namespace {

static_assert(std::endian::native == std::endian::little, "model files are written little-endian");

constexpr char kMagic[8] = {'F', 'U', 'S', 'E', 'L', 'A', 'B', '\0'};

template <class T>
void put(std::string& out, T value) {
    char bytes[sizeof(T)];
    std::memcpy(bytes, &value, sizeof(T));
    out.append(bytes, sizeof(T));
}

template <class T>
T take(const std::string& in, std::size_t& pos) {
    if (pos + sizeof(T) > in.size()) throw FormatError("model file is truncated");
    T value;
    std::memcpy(&value, in.data() + pos, sizeof(T));
    pos += sizeof(T);
    return value;
}

std::uint32_t crc32(const char* data, std::size_t n) {
    boost::crc_32_type crc;
    crc.process_bytes(data, n);
    return crc.checksum();
}

}  // namespace

std::string config_hash(const ModelConfig& config) {
    const std::string canonical = detail::to_json(config).dump();
    std::ostringstream out;
    out << std::hex;
    out.width(8);
    out.fill('0');
    out << crc32(canonical.data(), canonical.size());
    return out.str();
}

void save_model(const FusionModel& model, const std::filesystem::path& path) {
    json params = json::array();
    model.for_each_parameter([&params](const std::string& name, const Tensor& t) {
        params.push_back({{"name", name}, {"shape", t.shape()}});
    });
    const json header{{"format", "fuselab-model"},
                      {"model", detail::to_json(model.config())},
                      {"config_hash", config_hash(model.config())},
                      {"vocabulary", model.vocabulary().tokens()},
                      {"labels", detail::to_json(model.labels())},
                      {"parameters", params}};
    const std::string head = header.dump();

    std::string blob(kMagic, sizeof(kMagic));
    put<std::uint32_t>(blob, kModelFormatVersion);
    put<std::uint64_t>(blob, head.size());
    blob += head;
    model.for_each_parameter([&blob](const std::string&, const Tensor& t) {
        for (double v : t.data()) put<double>(blob, v);
    });
    put<std::uint32_t>(blob, crc32(blob.data(), blob.size()));

    std::ofstream out(path, std::ios::binary);
    if (!out) throw ConfigError("cannot write model file " + path.string());
    out.write(blob.data(), static_cast<std::streamsize>(blob.size()));
    if (!out) throw ConfigError("failed writing model file " + path.string());
}

FusionModel load_model(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw ConfigError("cannot open model file " + path.string());
    const std::string blob((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());

    if (blob.size() < sizeof(kMagic) || std::memcmp(blob.data(), kMagic, sizeof(kMagic)) != 0)
        throw FormatError(path.string() + " is not a fuselab model file");
    std::size_t pos = sizeof(kMagic);
    const auto version = take<std::uint32_t>(blob, pos);
    if (version != kModelFormatVersion)
        throw FormatError("model format version " + std::to_string(version) + " is not supported (expected " +
                          std::to_string(kModelFormatVersion) + ")");
    if (blob.size() < pos + sizeof(std::uint64_t) + sizeof(std::uint32_t))
        throw FormatError("checksum failure: model file is truncated");
    const std::size_t body = blob.size() - sizeof(std::uint32_t);
    std::size_t crc_pos = body;
    if (take<std::uint32_t>(blob, crc_pos) != crc32(blob.data(), body))
        throw FormatError("checksum failure: model file is corrupt or truncated");

    const auto head_len = take<std::uint64_t>(blob, pos);
    if (head_len > body - pos) throw FormatError("model header length exceeds the file");
    json header;
    try {
        header = json::parse(blob.substr(pos, head_len));
    } catch (const json::exception& e) {
        throw FormatError(std::string("model header is not valid JSON: ") + e.what());
    }
    pos += head_len;

    try {
        if (header.at("format") != "fuselab-model") throw FormatError("unknown model header format");
        const ModelConfig config = detail::model_config_from_json(header.at("model"));
        if (header.at("config_hash").get<std::string>() != config_hash(config))
            throw FormatError("model config hash mismatch");
        Vocabulary vocab(header.at("vocabulary").get<std::vector<std::string>>());
        LabelSpace labels = detail::label_space_from_json(header.at("labels"));
        FusionModel model(config, std::move(vocab), std::move(labels));

        const json& params = header.at("parameters");
        std::size_t index = 0;
        model.for_each_parameter([&](const std::string& name, Tensor& t) {
            if (index >= params.size()) throw FormatError("model file lacks parameter " + name);
            const json& entry = params.at(index++);
            if (entry.at("name").get<std::string>() != name || entry.at("shape").get<Shape>() != t.shape())
                throw FormatError("model parameter " + name + " does not match the header");
            for (double& v : t.data()) v = take<double>(blob, pos);
        });
        if (index != params.size()) throw FormatError("model file has extra parameters");
        if (pos != body) throw FormatError("model file has trailing data");
        return model;
    } catch (const json::exception& e) {
        throw FormatError(std::string("malformed model header: ") + e.what());
    } catch (const ConfigError& e) {
        throw FormatError(std::string("model header config is invalid: ") + e.what());
    }
}

}  // namespace fuselab
