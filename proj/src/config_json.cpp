#include "config_json.hpp"

#include <algorithm>
#include <cstring>

#include "fuselab/errors.hpp"

namespace fuselab::detail {

void check_keys(const json& obj, std::initializer_list<const char*> allowed, const std::string& section) {
    if (!obj.is_object()) throw ConfigError("section '" + section + "' must be an object");
    for (const auto& [key, value] : obj.items()) {
        const bool known = std::any_of(allowed.begin(), allowed.end(), [&key](const char* a) { return key == a; });
        if (!known) throw ConfigError("unknown key '" + key + "' in section '" + section + "'");
    }
}

namespace {

template <class T>
T read(const json& obj, const char* key, T fallback, const std::string& section) {
    if (!obj.contains(key)) return fallback;
    const json& v = obj.at(key);
    const std::string where = "'" + section + "." + key + "'";
    if constexpr (std::is_same_v<T, bool>) {
        if (!v.is_boolean()) throw ConfigError(where + " must be true or false");
    } else if constexpr (std::is_same_v<T, std::string>) {
        if (!v.is_string()) throw ConfigError(where + " must be a string");
    } else if constexpr (std::is_integral_v<T>) {
        if (!v.is_number_unsigned()) throw ConfigError(where + " must be a non-negative integer");
    } else {
        if (!v.is_number()) throw ConfigError(where + " must be a number");
    }
    return v.get<T>();
}

}  // namespace

json to_json(const ModelConfig& c) {
    json fusion{{"kind", to_string(c.fusion.kind)},
                {"fuse_dim", c.fusion.fuse_dim},
                {"concat_projection", c.fusion.concat_projection},
                {"noise_dim", c.fusion.noise_dim},
                {"gan_hidden", c.fusion.gan_hidden},
                {"nonsaturating", c.fusion.nonsaturating},
                {"combiner_raw_latents", c.fusion.combiner_raw_latents}};
    json j{{"inputs", to_string(c.inputs)},
           {"latent_dim", c.latent_dim},
           {"embed_dim", c.embed_dim},
           {"hidden_dim", c.hidden_dim},
           {"use_caption", c.use_caption},
           {"channels", c.channels},
           {"conv1_channels", c.conv1_channels},
           {"conv2_channels", c.conv2_channels},
           {"pool_cells", c.pool_cells},
           {"max_grid", c.max_grid},
           {"visual_features", c.visual_features},
           {"entity_feature_dim", c.entity_feature_dim},
           {"fusion", fusion}};
    j["entity_tuple"] = c.entity_tuple ? json(*c.entity_tuple) : json(nullptr);
    return j;
}

ModelConfig model_config_from_json(const json& j) {
    const std::string s = "model";
    check_keys(j,
               {"inputs", "latent_dim", "embed_dim", "hidden_dim", "use_caption", "channels", "conv1_channels",
                "conv2_channels", "pool_cells", "max_grid", "visual_features", "entity_tuple", "entity_feature_dim",
                "fusion"},
               s);
    ModelConfig c;
    c.inputs = input_mode_from_string(read<std::string>(j, "inputs", to_string(c.inputs), s));
    c.latent_dim = read(j, "latent_dim", c.latent_dim, s);
    c.embed_dim = read(j, "embed_dim", c.embed_dim, s);
    c.hidden_dim = read(j, "hidden_dim", c.hidden_dim, s);
    c.use_caption = read(j, "use_caption", c.use_caption, s);
    c.channels = read(j, "channels", c.channels, s);
    c.conv1_channels = read(j, "conv1_channels", c.conv1_channels, s);
    c.conv2_channels = read(j, "conv2_channels", c.conv2_channels, s);
    c.pool_cells = read(j, "pool_cells", c.pool_cells, s);
    c.max_grid = read(j, "max_grid", c.max_grid, s);
    c.visual_features = read(j, "visual_features", c.visual_features, s);
    c.entity_feature_dim = read(j, "entity_feature_dim", c.entity_feature_dim, s);
    if (j.contains("entity_tuple") && !j.at("entity_tuple").is_null()) c.entity_tuple = read(j, "entity_tuple", false, s);
    // Unimodal models default to no fusion, multimodal ones to concat.
    c.fusion.kind = c.inputs == InputMode::multimodal ? FusionKind::concat : FusionKind::none;
    if (j.contains("fusion")) {
        const json& f = j.at("fusion");
        const std::string fs = "model.fusion";
        check_keys(f, {"kind", "fuse_dim", "concat_projection", "noise_dim", "gan_hidden", "nonsaturating", "combiner_raw_latents"},
                   fs);
        if (f.contains("kind")) c.fusion.kind = fusion_kind_from_string(read<std::string>(f, "kind", "", fs));
        c.fusion.fuse_dim = read(f, "fuse_dim", c.fusion.fuse_dim, fs);
        c.fusion.concat_projection = read(f, "concat_projection", c.fusion.concat_projection, fs);
        c.fusion.noise_dim = read(f, "noise_dim", c.fusion.noise_dim, fs);
        c.fusion.gan_hidden = read(f, "gan_hidden", c.fusion.gan_hidden, fs);
        c.fusion.nonsaturating = read(f, "nonsaturating", c.fusion.nonsaturating, fs);
        c.fusion.combiner_raw_latents = read(f, "combiner_raw_latents", c.fusion.combiner_raw_latents, fs);
    }
    c.fusion.latent_dim = c.latent_dim;
    c.validate();
    return c;
}

json to_json(const TrainConfig& c) {
    json j{{"epochs", c.epochs},
           {"batch_size", c.batch_size},
           {"max_steps", c.max_steps},
           {"optimizer", to_string(c.optimizer)},
           {"beta1", c.beta1},
           {"beta2", c.beta2},
           {"epsilon", c.epsilon},
           {"lambda", c.lambda},
           {"k", c.k},
           {"seed", c.seed},
           {"clip_norm", c.clip_norm},
           {"class_weights", c.class_weights},
           {"adv_to_encoders", c.adv_to_encoders}};
    j["learning_rate"] = c.resolved_learning_rate();
    j["discriminator_learning_rate"] = c.resolved_discriminator_learning_rate();
    return j;
}

TrainConfig train_config_from_json(const json& j) {
    const std::string s = "train";
    check_keys(j,
               {"epochs", "batch_size", "max_steps", "optimizer", "learning_rate", "discriminator_learning_rate", "beta1",
                "beta2", "epsilon", "lambda", "k", "seed", "clip_norm", "class_weights", "adv_to_encoders"},
               s);
    TrainConfig c;
    c.epochs = read(j, "epochs", c.epochs, s);
    c.batch_size = read(j, "batch_size", c.batch_size, s);
    c.max_steps = read(j, "max_steps", c.max_steps, s);
    c.optimizer = optimizer_from_string(read<std::string>(j, "optimizer", to_string(c.optimizer), s));
    if (j.contains("learning_rate")) c.learning_rate = read(j, "learning_rate", 0.0, s);
    if (j.contains("discriminator_learning_rate"))
        c.discriminator_learning_rate = read(j, "discriminator_learning_rate", 0.0, s);
    c.beta1 = read(j, "beta1", c.beta1, s);
    c.beta2 = read(j, "beta2", c.beta2, s);
    c.epsilon = read(j, "epsilon", c.epsilon, s);
    c.lambda = read(j, "lambda", c.lambda, s);
    c.k = read(j, "k", c.k, s);
    c.seed = read(j, "seed", c.seed, s);
    c.clip_norm = read(j, "clip_norm", c.clip_norm, s);
    c.adv_to_encoders = read(j, "adv_to_encoders", c.adv_to_encoders, s);
    if (j.contains("class_weights")) {
        const json& w = j.at("class_weights");
        if (!w.is_array()) throw ConfigError("'train.class_weights' must be an array of numbers");
        for (const auto& v : w) {
            if (!v.is_number()) throw ConfigError("'train.class_weights' must be an array of numbers");
            c.class_weights.push_back(v.get<double>());
        }
    }
    c.validate();
    return c;
}

json to_json(const LabelSpace& s) {
    json j{{"names", s.names()}, {"mode", s.mode() == LabelMode::binary ? "binary" : "multi"}};
    if (s.has_merge()) j["merge"] = s.merge_map();
    return j;
}

LabelSpace label_space_from_json(const json& j) {
    if (j.is_string()) {
        const auto name = j.get<std::string>();
        if (name == "mmhs150k") return LabelSpace::mmhs150k();
        if (name == "hate-binary") return LabelSpace::hate_binary();
        throw ConfigError("unknown label space preset '" + name + "' (mmhs150k, hate-binary)");
    }
    const std::string s = "labels";
    check_keys(j, {"names", "mode", "merge"}, s);
    if (!j.contains("names") || !j.at("names").is_array()) throw ConfigError("'labels.names' must be an array of strings");
    std::vector<std::string> names;
    for (const auto& n : j.at("names")) {
        if (!n.is_string()) throw ConfigError("'labels.names' must be an array of strings");
        names.push_back(n.get<std::string>());
    }
    const auto mode_name = read<std::string>(j, "mode", names.size() == 2 ? "binary" : "multi", s);
    if (mode_name != "binary" && mode_name != "multi") throw ConfigError("'labels.mode' must be binary or multi");
    std::map<std::string, std::string> merge;
    if (j.contains("merge")) {
        const json& m = j.at("merge");
        if (!m.is_object()) throw ConfigError("'labels.merge' must map class names to binary names");
        for (const auto& [from, to] : m.items()) {
            if (!to.is_string()) throw ConfigError("'labels.merge' values must be strings");
            merge[from] = to.get<std::string>();
        }
    }
    try {
        return LabelSpace(std::move(names), mode_name == "binary" ? LabelMode::binary : LabelMode::multi, std::move(merge));
    } catch (const SchemaError& e) {
        throw ConfigError(e.what());
    }
}

}  // namespace fuselab::detail
