#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <string>

#include <CLI11.hpp>

#include <vpnext/vpnext.hpp>

namespace fs = std::filesystem;
using namespace vpnext;

namespace {

constexpr int kExitOk = 0;
constexpr int kExitValidation = 1;
constexpr int kExitRuntime = 2;

nlohmann::json read_config(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw ValueError("config file not found: " + path);
    try {
        return nlohmann::json::parse(in);
    } catch (const nlohmann::json::exception& e) {
        throw ValueError("config file " + path + " is not valid JSON: " + e.what());
    }
}

void ensure_out_dir(const std::string& out) {
    std::error_code ec;
    fs::create_directories(out, ec);
    if (!fs::exists(out)) throw IoError("cannot create output directory: " + out);
}

Dataset load_data_for(const nlohmann::json& cfg, const std::string& config_path) {
    if (!cfg.contains("data")) throw ValueError("config missing 'data' (path to a dataset manifest)");
    fs::path p = cfg.at("data").get<std::string>();
    if (p.is_relative()) p = fs::path(config_path).parent_path() / p;
    return load_dataset(p.string());
}

struct CommonFlags {
    std::string config_path;
    std::string out_dir = "out";
    std::optional<std::uint64_t> seed;
    std::optional<int> steps;
    std::optional<std::string> variant;
};

int cmd_gen_data(const CommonFlags& f) {
    nlohmann::json cfg = f.config_path.empty() ? nlohmann::json::object() : read_config(f.config_path);
    if (f.seed) cfg["seed"] = *f.seed;
    SynthSpec spec = synth_spec_from_json(cfg);
    ensure_out_dir(f.out_dir);
    auto manifest = gen_dataset(spec, f.out_dir);
    std::cout << "wrote " << manifest["splits"]["train"].size() << " train and " << manifest["splits"]["eval"].size()
              << " eval pairs under " << f.out_dir << " (attempt " << manifest["attempt"] << ")\n";
    return kExitOk;
}

// friendly aliases: bare supervision names map onto the flagship decoder
std::string normalize_variant(std::string v) {
    if (v == "vcr") v = "vcr2";
    if (v.find('+') == std::string::npos) v += "+real3";
    return v;
}

ModelConfig model_from(const nlohmann::json& cfg, const std::optional<std::string>& variant_flag) {
    ModelConfig base = model_config_from_json(cfg.contains("model") ? cfg.at("model") : nlohmann::json::object());
    std::string variant = "vcr2+real3";
    if (cfg.contains("variant")) variant = cfg.at("variant").get<std::string>();
    if (variant_flag) variant = *variant_flag;
    return ModelConfig::from_variant(normalize_variant(variant), base);
}

int cmd_train(const CommonFlags& f) {
    nlohmann::json cfg = read_config(f.config_path);
    Dataset data = load_data_for(cfg, f.config_path);
    ModelConfig mc = model_from(cfg, f.variant);
    require(mc.image_size == data.image_size, "model image_size does not match the dataset");
    require(mc.num_classes == data.num_classes, "model num_classes does not match the dataset");
    TrainConfig tc = train_config_from_json(cfg.contains("train") ? cfg.at("train") : nlohmann::json::object());
    if (f.seed) tc.seed = *f.seed;
    if (f.steps) tc.steps = *f.steps;
    ensure_out_dir(f.out_dir);

    auto model = VPNextModel<float>::build(mc, tc.seed);
    auto result = train(model, data, tc, worker_count());
    restore_params(model, result.best_params);
    save_checkpoint((fs::path(f.out_dir) / "checkpoint.bin").string(), model.params);
    std::ofstream mo(fs::path(f.out_dir) / "manifest.json");
    mo << result.manifest.to_json().dump(2) << "\n";
    std::cout << "variant " << mc.variant_name() << ": best mIoU " << result.manifest.best_miou << " at step "
              << result.manifest.best_step << ", final " << result.manifest.final_miou << "\n";
    return kExitOk;
}

int cmd_eval(const CommonFlags& f, const std::string& checkpoint) {
    nlohmann::json cfg = read_config(f.config_path);
    Dataset data = load_data_for(cfg, f.config_path);
    ModelConfig mc = model_from(cfg, f.variant);
    auto model = VPNextModel<float>::build(mc, f.seed.value_or(1));
    std::string ckpt = checkpoint;
    if (ckpt.empty() && cfg.contains("checkpoint")) ckpt = cfg.at("checkpoint").get<std::string>();
    require(!ckpt.empty(), "eval needs --checkpoint or a 'checkpoint' config field");
    load_checkpoint(ckpt, model.params);
    ensure_out_dir(f.out_dir);

    auto iou = evaluate(model, data.eval, data.num_classes, worker_count());
    nlohmann::json j;
    j["miou"] = iou.miou;
    j["per_class_iou"] = iou.per_class;
    j["class_names"] = data.class_names;
    j["variant"] = mc.variant_name();
    std::ofstream mo(fs::path(f.out_dir) / "eval.json");
    mo << j.dump(2) << "\n";
    std::cout << j.dump(2) << "\n";
    return kExitOk;
}

int cmd_ablate(const CommonFlags& f) {
    nlohmann::json cfg = read_config(f.config_path);
    Dataset data = load_data_for(cfg, f.config_path);
    AblationSpec spec;
    spec.base = model_config_from_json(cfg.contains("model") ? cfg.at("model") : nlohmann::json::object());
    spec.tc = train_config_from_json(cfg.contains("train") ? cfg.at("train") : nlohmann::json::object());
    if (f.steps) spec.tc.steps = *f.steps;
    if (!cfg.contains("variants")) throw ValueError("ablate config needs a 'variants' array");
    spec.variants = cfg.at("variants").get<std::vector<std::string>>();
    if (f.variant) spec.variants = {*f.variant};
    spec.seeds = cfg.contains("seeds") ? cfg.at("seeds").get<std::vector<std::uint64_t>>()
                                       : std::vector<std::uint64_t>{1, 2, 3};
    if (f.seed) spec.seeds = {*f.seed};
    ensure_out_dir(f.out_dir);

    auto res = run_ablation(spec, data, f.out_dir, worker_count());
    std::cout << "variant,median_miou\n";
    for (const auto& [name, m] : res.medians) std::cout << name << "," << m << "\n";
    std::cout << "rows: " << res.rows.size() << " -> " << res.csv_path << ", plot: " << res.plot_path << "\n";
    return kExitOk;
}

int cmd_flops(const CommonFlags& f, const std::string& phase, int image_size) {
    nlohmann::json cfg = f.config_path.empty() ? nlohmann::json::object() : read_config(f.config_path);
    ModelConfig mc = model_from(cfg, f.variant);
    if (image_size > 0) mc.image_size = image_size;
    mc.validate();
    require(phase == "inference" || phase == "training", "phase must be 'inference' or 'training'");
    auto model = VPNextModel<float>::build(mc, 1);
    auto report = model.cost(phase == "training");
    nlohmann::json j = report.to_json();
    j["variant"] = mc.variant_name();
    j["phase"] = phase;
    j["image_size"] = mc.image_size;
    std::cout << j.dump(2) << "\n";
    return kExitOk;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"VPNeXt desk-scale training and ablation harness"};
    app.require_subcommand(1);

    CommonFlags flags;
    std::string checkpoint;
    std::string phase = "inference";
    int image_size = 0;

    auto add_common = [&](CLI::App* sub, bool config_required) {
        auto* opt = sub->add_option("--config", flags.config_path, "JSON config path");
        if (config_required) opt->required();
        sub->add_option("--out", flags.out_dir, "output directory");
        sub->add_option("--seed", flags.seed, "seed override");
        sub->add_option("--steps", flags.steps, "training step override");
        sub->add_option("--variant", flags.variant, "model variant, e.g. vcr2+real3");
    };

    auto* gen = app.add_subcommand("gen-data", "generate the synthetic corpus");
    add_common(gen, false);
    auto* tr = app.add_subcommand("train", "train one variant");
    add_common(tr, true);
    auto* ev = app.add_subcommand("eval", "evaluate a checkpoint");
    add_common(ev, true);
    ev->add_option("--checkpoint", checkpoint, "checkpoint path");
    auto* ab = app.add_subcommand("ablate", "run the ablation matrix");
    add_common(ab, true);
    auto* fl = app.add_subcommand("flops", "print the analytic cost report");
    add_common(fl, false);
    fl->add_option("--phase", phase, "inference or training");
    fl->add_option("--image-size", image_size, "input size for the cost model");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        int code = app.exit(e);
        return code == 0 ? kExitOk : kExitValidation;
    }

    try {
        if (gen->parsed()) return cmd_gen_data(flags);
        if (tr->parsed()) return cmd_train(flags);
        if (ev->parsed()) return cmd_eval(flags, checkpoint);
        if (ab->parsed()) return cmd_ablate(flags);
        if (fl->parsed()) return cmd_flops(flags, phase, image_size);
    } catch (const ValueError& e) {
        std::cerr << "error: " << e.what() << "\n";
        return kExitValidation;
    } catch (const ShapeError& e) {
        std::cerr << "error: " << e.what() << "\n";
        return kExitValidation;
    } catch (const std::exception& e) {
        std::cerr << "runtime error: " << e.what() << "\n";
        return kExitRuntime;
    }
    return kExitValidation;
}
