#include "wsmil/config.hpp"

#include "wsmil/error.hpp"

#include <json.hpp>

#include <fstream>
#include <set>
#include <sstream>

namespace wsmil {

using nlohmann::json;

namespace {

class Section {
public:
    Section(const json& root, std::string path) : path_(std::move(path)) {
        if (!root.is_object()) throw Error("config", path_.empty() ? "top level must be an object" : path_ + " must be an object");
        obj_ = &root;
    }

    bool has(const char* key) const { return obj_->contains(key); }

    template <class T>
    void get(const char* key, T& out) {
        used_.insert(key);
        auto it = obj_->find(key);
        if (it == obj_->end()) return;
        try {
            out = it->template get<T>();
        } catch (const json::exception&) {
            throw Error("config", "bad value for " + name(key) + ": " + it->dump());
        }
    }

    template <class T, class Parse>
    void get_enum(const char* key, T& out, Parse parse) {
        std::string text;
        if (!has(key)) {
            used_.insert(key);
            return;
        }
        get(key, text);
        try {
            out = parse(text);
        } catch (const Error& e) {
            throw Error("config", name(key) + ": " + e.what());
        }
    }

    Section child(const char* key) {
        used_.insert(key);
        static const json empty = json::object();
        auto it = obj_->find(key);
        return Section(it == obj_->end() ? empty : *it, name(key));
    }

    void finish() const {
        for (auto it = obj_->begin(); it != obj_->end(); ++it)
            if (!used_.count(it.key())) throw Error("config", "unknown key '" + name(it.key().c_str()) + "'");
    }

private:
    std::string name(const char* key) const { return path_.empty() ? key : path_ + "." + key; }

    const json* obj_ = nullptr;
    std::string path_;
    std::set<std::string, std::less<>> used_;
};

void read_schedule(Section& s, TrainConfig& t) {
    s.get("epochs", t.epochs);
    s.get_enum("optimizer", t.optimizer, parse_optimizer);
    s.get("momentum", t.momentum);
    s.get("lr_init", t.lr_init);
    s.get("lr_drop_factor", t.lr_drop_factor);
    s.get("decay_tail_epochs", t.decay_tail_epochs);
    s.get("tail_index_from_start", t.tail_index_from_start);
}

json schedule_json(const TrainConfig& t) {
    return {{"epochs", t.epochs},
            {"optimizer", std::string(to_string(t.optimizer))},
            {"momentum", t.momentum},
            {"lr_init", t.lr_init},
            {"lr_drop_factor", t.lr_drop_factor},
            {"decay_tail_epochs", t.decay_tail_epochs},
            {"tail_index_from_start", t.tail_index_from_start}};
}

} // namespace

void PipelineConfig::apply_seed(std::uint64_t s) {
    seed = s;
    teacher.seed = s;
    student.seed = s;
    scoring.mlp.seed = s;
    synth.seed = s;
}

void PipelineConfig::validate() const {
    if (tiling.window < 1 || tiling.stride < 1) throw Error("config", "tiling.window and tiling.stride must be >= 1");
    if (tiling.min_tissue < 0.0 || tiling.min_tissue > 1.0) throw Error("config", "tiling.min_tissue must be in [0, 1]");
    try {
        model.validate();
    } catch (const Error& e) {
        throw Error("config", std::string("model: ") + e.what());
    }
    if (aggregation == Aggregation::Attention && model.attention_dim < 1)
        throw Error("config", "teacher.aggregation=attention needs model.attention_dim >= 1");
    try {
        teacher.validate();
    } catch (const Error& e) {
        throw Error("config", std::string("teacher: ") + e.what());
    }
    try {
        student.validate();
    } catch (const Error& e) {
        throw Error("config", std::string("student: ") + e.what());
    }
    if (scoring.k < 1) throw Error("config", "scoring.k must be >= 1");
    if (scoring.mlp.hidden < 1 || scoring.mlp.epochs < 1 || scoring.mlp.batch_size < 1 || !(scoring.mlp.learning_rate > 0))
        throw Error("config", "scoring.mlp_* values must be positive");
    try {
        synth.validate();
    } catch (const Error& e) {
        throw Error("config", std::string("synth: ") + e.what());
    }
}

PipelineConfig default_config() {
    PipelineConfig c;
    c.model.attention_dim = 16;
    c.apply_seed(0);
    return c;
}

PipelineConfig parse_config(const std::string& json_text, const std::string& source) {
    json root;
    try {
        root = json::parse(json_text);
    } catch (const json::parse_error& e) {
        throw Error("config", source + ": " + e.what());
    }
    PipelineConfig c = default_config();
    Section top(root, "");
    std::uint64_t seed = 0;
    top.get("seed", seed);

    Section tiling = top.child("tiling");
    tiling.get("window", c.tiling.window);
    tiling.get("stride", c.tiling.stride);
    tiling.get("min_tissue", c.tiling.min_tissue);
    tiling.finish();

    Section stain = top.child("stain");
    stain.get("pool_per_slide", c.stain.pool_per_slide);
    stain.finish();

    Section model = top.child("model");
    model.get("input_side", c.model.input_side);
    model.get("hidden_channels", c.model.hidden_channels);
    model.get("feature_dim", c.model.feature_dim);
    model.get("attention_dim", c.model.attention_dim);
    model.get_enum("head", c.model.head, parse_head_activation);
    model.get_enum("attention_norm", c.model.attention_norm, parse_attention_norm);
    model.finish();

    Section teacher = top.child("teacher");
    read_schedule(teacher, c.teacher);
    teacher.get("max_patches_per_bag", c.teacher.max_patches_per_bag);
    teacher.get_enum("aggregation", c.aggregation, parse_aggregation);
    teacher.finish();

    Section student = top.child("student");
    read_schedule(student, c.student);
    student.get("batch_size", c.student.batch_size);
    student.finish();

    Section baseline = top.child("baseline");
    baseline.get("class_weighted", c.baseline_class_weighted);
    baseline.finish();

    Section scoring = top.child("scoring");
    scoring.get("k", c.scoring.k);
    scoring.get("soft_percentages", c.scoring.soft_percentages);
    scoring.get("mlp_hidden", c.scoring.mlp.hidden);
    scoring.get("mlp_learning_rate", c.scoring.mlp.learning_rate);
    scoring.get("mlp_epochs", c.scoring.mlp.epochs);
    scoring.get("mlp_batch_size", c.scoring.mlp.batch_size);
    scoring.finish();

    Section synth = top.child("synth");
    synth.get("n_slides", c.synth.n_slides);
    synth.get("min_instances", c.synth.min_instances);
    synth.get("max_instances", c.synth.max_instances);
    synth.get("patch_side", c.synth.patch_side);
    synth.get("train_fraction", c.synth.train_fraction);
    synth.get("val_fraction", c.synth.val_fraction);
    synth.get("min_nc_fraction", c.synth.min_nc_fraction);
    synth.get("max_nc_fraction", c.synth.max_nc_fraction);
    synth.get("min_primary_share", c.synth.min_primary_share);
    synth.get("max_primary_share", c.synth.max_primary_share);
    synth.get("score_prior", c.synth.score_prior);
    synth.get("hue_jitter", c.synth.texture.hue_jitter);
    synth.get("noise_sigma", c.synth.texture.noise_sigma);
    synth.get("structure_gain", c.synth.texture.structure_gain);
    synth.get("color_shift", c.synth.color_shift);
    synth.finish();

    top.finish();
    c.apply_seed(seed);
    c.validate();
    return c;
}

PipelineConfig load_config(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw Error("config", "cannot open " + path.string());
    std::stringstream ss;
    ss << in.rdbuf();
    return parse_config(ss.str(), path.string());
}

PipelineConfig load_config_or_default(const std::optional<std::filesystem::path>& path) {
    return path ? load_config(*path) : default_config();
}

std::string dump_config(const PipelineConfig& c) {
    json teacher = schedule_json(c.teacher);
    teacher["max_patches_per_bag"] = c.teacher.max_patches_per_bag;
    teacher["aggregation"] = std::string(to_string(c.aggregation));
    json student = schedule_json(c.student);
    student["batch_size"] = c.student.batch_size;
    json j = {
        {"seed", c.seed},
        {"tiling", {{"window", c.tiling.window}, {"stride", c.tiling.stride}, {"min_tissue", c.tiling.min_tissue}}},
        {"stain", {{"pool_per_slide", c.stain.pool_per_slide}}},
        {"model",
         {{"input_side", c.model.input_side},
          {"hidden_channels", c.model.hidden_channels},
          {"feature_dim", c.model.feature_dim},
          {"attention_dim", c.model.attention_dim},
          {"head", std::string(to_string(c.model.head))},
          {"attention_norm", std::string(to_string(c.model.attention_norm))}}},
        {"teacher", teacher},
        {"student", student},
        {"baseline", {{"class_weighted", c.baseline_class_weighted}}},
        {"scoring",
         {{"k", c.scoring.k},
          {"soft_percentages", c.scoring.soft_percentages},
          {"mlp_hidden", c.scoring.mlp.hidden},
          {"mlp_learning_rate", c.scoring.mlp.learning_rate},
          {"mlp_epochs", c.scoring.mlp.epochs},
          {"mlp_batch_size", c.scoring.mlp.batch_size}}},
        {"synth",
         {{"n_slides", c.synth.n_slides},
          {"min_instances", c.synth.min_instances},
          {"max_instances", c.synth.max_instances},
          {"patch_side", c.synth.patch_side},
          {"train_fraction", c.synth.train_fraction},
          {"val_fraction", c.synth.val_fraction},
          {"min_nc_fraction", c.synth.min_nc_fraction},
          {"max_nc_fraction", c.synth.max_nc_fraction},
          {"min_primary_share", c.synth.min_primary_share},
          {"max_primary_share", c.synth.max_primary_share},
          {"score_prior", c.synth.score_prior},
          {"hue_jitter", c.synth.texture.hue_jitter},
          {"noise_sigma", c.synth.texture.noise_sigma},
          {"structure_gain", c.synth.texture.structure_gain},
          {"color_shift", c.synth.color_shift}}},
    };
    return j.dump(2);
}

} // namespace wsmil
