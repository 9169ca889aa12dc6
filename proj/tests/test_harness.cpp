#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cstdio>
#include <filesystem>

#include <vpnext/vpnext.hpp>

using namespace vpnext;
namespace fs = std::filesystem;

namespace {

std::string temp_dir(const std::string& tag) {
    auto p = fs::temp_directory_path() / ("vpnx_test_" + tag);
    fs::remove_all(p);
    fs::create_directories(p);
    return p.string();
}

std::vector<std::uint8_t> slurp(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    REQUIRE(in.good());
    return std::vector<std::uint8_t>(std::istreambuf_iterator<char>(in), {});
}

SynthSpec small_spec(std::uint64_t seed) {
    SynthSpec s;
    s.num_train = 12;
    s.num_eval = 4;
    s.image_size = 32;
    s.seed = seed;
    return s;
}

ModelConfig small_model() {
    ModelConfig cfg;
    cfg.image_size = 32;
    cfg.num_classes = 5;
    cfg.encoder.num_layers = 3;
    cfg.encoder.embed_dim = 16;
    cfg.encoder.heads = 2;
    cfg.encoder.tap_indices = {1, 2};
    cfg.hiclr.fuse_channels = 16;
    cfg.hiclr.iterations = 1;
    return cfg;
}

TrainConfig small_train(int steps) {
    TrainConfig tc;
    tc.batch_size = 4;
    tc.steps = steps;
    tc.base_lr = 3e-3;
    tc.eval_every = 50;
    tc.seed = 5;
    return tc;
}

}  // namespace

TEST_CASE("netpbm round trip preserves bytes and rejects damage") {
    std::string dir = temp_dir("pnm");
    PixelBuffer img;
    img.width = 5;
    img.height = 3;
    img.channels = 3;
    Rng rng(1);
    img.bytes.resize(45);
    for (auto& b : img.bytes) b = static_cast<std::uint8_t>(rng.uniform_int(0, 255));
    write_ppm(dir + "/a.ppm", img);
    auto back = read_ppm(dir + "/a.ppm");
    CHECK(back.width == 5);
    CHECK(back.height == 3);
    CHECK(back.bytes == img.bytes);

    PixelBuffer mask;
    mask.width = 4;
    mask.height = 4;
    mask.channels = 1;
    mask.bytes.assign(16, 7);
    mask.bytes[3] = 255;
    write_pgm(dir + "/m.pgm", mask);
    CHECK(read_pgm(dir + "/m.pgm").bytes == mask.bytes);

    // truncated payload
    std::ofstream bad(dir + "/bad.ppm", std::ios::binary);
    bad << "P6\n5 3\n255\nxx";
    bad.close();
    CHECK_THROWS_AS(read_ppm(dir + "/bad.ppm"), IoError);
    CHECK_THROWS_AS(read_ppm(dir + "/missing.ppm"), IoError);
    CHECK_THROWS_AS(read_pgm(dir + "/a.ppm"), IoError);  // wrong magic
}

TEST_CASE("gen_dataset: determinism, counts, coverage, checksum loading") {
    std::string d1 = temp_dir("gen1");
    std::string d2 = temp_dir("gen2");
    SynthSpec spec = small_spec(7);
    auto m1 = gen_dataset(spec, d1);
    auto m2 = gen_dataset(spec, d2);

    // byte-identical regeneration from the same seed
    CHECK(slurp(d1 + "/train/img_00000.ppm") == slurp(d2 + "/train/img_00000.ppm"));
    CHECK(slurp(d1 + "/train/mask_00005.pgm") == slurp(d2 + "/train/mask_00005.pgm"));
    CHECK(m1["splits"]["train"].size() == 12);
    CHECK(m1["splits"]["eval"].size() == 4);
    CHECK(m1["splits"]["train"].size() + m1["splits"]["eval"].size() == 16);

    // independent pixel-count oracle over the emitted PGM files
    std::vector<std::int64_t> counts(5, 0);
    std::int64_t total = 0;
    for (const char* split : {"train", "eval"}) {
        for (const auto& f : m1["splits"][split]) {
            auto mask = read_pgm((fs::path(d1) / f["mask"].get<std::string>()).string());
            for (std::uint8_t v : mask.bytes) {
                ++total;
                if (v != ClassMask::kIgnore) counts[v]++;
            }
        }
    }
    for (int c = 0; c < 5; ++c)
        CHECK(static_cast<double>(counts[static_cast<std::size_t>(c)]) / static_cast<double>(total) >= 0.01);

    auto ds = load_dataset(d1 + "/manifest.json");
    CHECK(ds.train.size() == 12);
    CHECK(ds.eval.size() == 4);
    CHECK(ds.image_size == 32);
    CHECK(ds.class_names.size() == 5);

    // checksum verification catches tampering
    {
        std::fstream f(d1 + "/train/img_00000.ppm", std::ios::in | std::ios::out | std::ios::binary);
        f.seekp(-1, std::ios::end);
        f.put('\x7f');
    }
    CHECK_THROWS_AS(load_dataset(d1 + "/manifest.json"), IoError);
}

TEST_CASE("seed changes the corpus") {
    std::string d1 = temp_dir("gen3");
    std::string d2 = temp_dir("gen4");
    gen_dataset(small_spec(7), d1);
    gen_dataset(small_spec(8), d2);
    CHECK(slurp(d1 + "/train/img_00000.ppm") != slurp(d2 + "/train/img_00000.ppm"));
}

TEST_CASE("checkpoint: round trip is byte-identical; errors name the offender") {
    std::string dir = temp_dir("ckpt");
    auto model = VPNextModel<float>::build(ModelConfig::from_variant("vcr2+real1", small_model()), 3);
    std::string p1 = dir + "/a.bin";
    save_checkpoint(p1, model.params);

    auto model2 = VPNextModel<float>::build(ModelConfig::from_variant("vcr2+real1", small_model()), 99);
    load_checkpoint(p1, model2.params);
    std::string p2 = dir + "/b.bin";
    save_checkpoint(p2, model2.params);
    CHECK(slurp(p1) == slurp(p2));  // load -> save round-trip byte equality

    // mismatched architecture: first offending tensor is named
    auto strange = small_model();
    strange.hiclr.fuse_channels = 8;
    auto model3 = VPNextModel<float>::build(ModelConfig::from_variant("vcr2+real1", strange), 3);
    CHECK_THROWS_WITH_AS(load_checkpoint(p1, model3.params), doctest::Contains("hiclr.proj.kernel"), ValueError);

    // magic / version / truncation
    {
        std::ofstream bad(dir + "/bad.bin", std::ios::binary);
        bad << "NOPE";
    }
    CHECK_THROWS_AS(read_checkpoint(dir + "/bad.bin"), IoError);
    auto bytes = slurp(p1);
    {
        std::ofstream trunc(dir + "/trunc.bin", std::ios::binary);
        trunc.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size() / 2));
    }
    CHECK_THROWS_AS(read_checkpoint(dir + "/trunc.bin"), IoError);
    {
        auto corrupted = bytes;
        corrupted[4] = 9;  // version
        std::ofstream vf(dir + "/ver.bin", std::ios::binary);
        vf.write(reinterpret_cast<const char*>(corrupted.data()), static_cast<std::streamsize>(corrupted.size()));
    }
    CHECK_THROWS_AS(read_checkpoint(dir + "/ver.bin"), IoError);
}

TEST_CASE("poly schedule and global-norm clipping contracts") {
    CHECK(poly_lr(0.01, 0, 100, 0.9) == doctest::Approx(0.01));
    CHECK(poly_lr(0.01, 100, 100, 0.9) == doctest::Approx(0.0));
    CHECK(poly_lr(0.01, 50, 100, 1.0) == doctest::Approx(0.005));

    std::vector<TensorData<float>> grads;
    grads.push_back(TensorData<float>({3}, {3.0f, 4.0f, 0.0f}));
    grads.push_back(TensorData<float>({1}, {12.0f}));
    double pre = clip_global_norm(grads, 1e-9);
    CHECK(pre == doctest::Approx(13.0));
    double sq = 0;
    for (const auto& g : grads)
        for (float v : g.data) sq += static_cast<double>(v) * v;
    CHECK(std::sqrt(sq) <= 1e-9 + 1e-15);

    std::vector<TensorData<float>> small;
    small.push_back(TensorData<float>({2}, {0.1f, 0.1f}));
    auto kept = small[0].data;
    clip_global_norm(small, 10.0);
    CHECK(small[0].data == kept);  // under the cap: untouched
}

TEST_CASE("adamw: lr=0 leaves parameters identical (decay scales with lr)") {
    ParamStore<float> ps;
    Rng rng(4);
    ps.add("w", normal_init<float>({4, 4}, 1.0, rng, "w"), true);
    ps.add("b", normal_init<float>({4}, 1.0, rng, "b"), false);
    auto w0 = ps.at("w").data;
    auto b0 = ps.at("b").data;
    AdamW opt(0.9, 0.999, 1e-8, 0.5);
    std::vector<TensorData<float>> grads;
    grads.push_back(TensorData<float>::full({4, 4}, 1.5f));
    grads.push_back(TensorData<float>::full({4}, -2.0f));
    for (int i = 0; i < 5; ++i) opt.step(ps, grads, 0.0);
    CHECK(ps.at("w").data == w0);
    CHECK(ps.at("b").data == b0);
    opt.step(ps, grads, 0.1);
    CHECK(ps.at("w").data != w0);
}

TEST_CASE("training is deterministic and independent of the worker count") {
    std::string dir = temp_dir("train_det");
    gen_dataset(small_spec(11), dir);
    auto data = load_dataset(dir + "/manifest.json");
    auto cfg = ModelConfig::from_variant("vcr2+bilinear", small_model());

    auto run = [&](int threads) {
        auto model = VPNextModel<float>::build(cfg, 5);
        auto r = train(model, data, small_train(6), threads);
        return std::make_pair(r.manifest.step_losses, r.manifest.final_miou);
    };
    auto a = run(1);
    auto b = run(1);
    auto c = run(2);
    CHECK(a.first == b.first);    // bit-identical loss curves
    CHECK(a.second == b.second);
    CHECK(a.first == c.first);    // schedule independence
    CHECK(a.second == c.second);
}

TEST_CASE("train then eval on the saved checkpoint reproduces the manifest mIoU exactly") {
    std::string dir = temp_dir("train_eval");
    gen_dataset(small_spec(13), dir);
    auto data = load_dataset(dir + "/manifest.json");
    auto cfg = ModelConfig::from_variant("vcr2+real1", small_model());
    auto model = VPNextModel<float>::build(cfg, 5);
    auto r = train(model, data, small_train(8), 2);
    restore_params(model, r.best_params);
    save_checkpoint(dir + "/ckpt.bin", model.params);

    auto fresh = VPNextModel<float>::build(cfg, 123);
    load_checkpoint(dir + "/ckpt.bin", fresh.params);
    auto iou = evaluate(fresh, data.eval, data.num_classes, 1);
    CHECK(iou.miou == r.manifest.best_miou);  // 0 ulp

    // save -> load -> evaluate round trip is also evaluation-identical
    save_checkpoint(dir + "/ckpt2.bin", fresh.params);
    CHECK(slurp(dir + "/ckpt.bin") == slurp(dir + "/ckpt2.bin"));
}

TEST_CASE("training aborts on non-finite loss with the step named") {
    std::string dir = temp_dir("train_nan");
    gen_dataset(small_spec(17), dir);
    auto data = load_dataset(dir + "/manifest.json");
    auto cfg = ModelConfig::from_variant("ds+bilinear", small_model());
    auto model = VPNextModel<float>::build(cfg, 5);
    auto tc = small_train(5);
    tc.base_lr = 1e9;  // guaranteed blow-up
    CHECK_THROWS_WITH_AS(train(model, data, tc, 1), doctest::Contains("step"), NonFiniteError);
}

TEST_CASE("ablation runner: row counts, csv columns, flops invariants, plot file") {
    std::string dir = temp_dir("ablate");
    gen_dataset(small_spec(19), dir);
    auto data = load_dataset(dir + "/manifest.json");

    AblationSpec spec;
    spec.base = small_model();
    spec.tc = small_train(4);
    spec.variants = {"ds+bilinear", "vcr2+bilinear", "vcr2+real1", "vcr2+real2"};
    spec.seeds = {1, 2, 3};
    auto res = run_ablation(spec, data, dir + "/ab", 2);

    CHECK(res.rows.size() == 12);  // variants x seeds
    CHECK(res.medians.size() == 4);

    std::map<std::string, std::vector<AblationRow>> by_variant;
    for (const auto& r : res.rows) {
        CHECK(!r.failed);
        by_variant[r.variant].push_back(r);
    }
    CHECK(by_variant["ds+bilinear"][0].infer_flops == by_variant["vcr2+bilinear"][0].infer_flops);
    CHECK(by_variant["vcr2+real1"][0].infer_flops < by_variant["vcr2+real2"][0].infer_flops);
    CHECK(by_variant["vcr2+bilinear"][0].train_flops > by_variant["ds+bilinear"][0].infer_flops);

    std::ifstream csv(res.csv_path);
    std::string header;
    std::getline(csv, header);
    CHECK(header == "variant,seed,miou,trainFlops,inferFlops,params");
    int lines = 0;
    for (std::string line; std::getline(csv, line);)
        if (!line.empty()) ++lines;
    CHECK(lines == 12);

    auto plot = read_ppm(res.plot_path);
    CHECK(plot.width > 0);
    CHECK(plot.height > 0);

    // per-run manifests landed
    CHECK(fs::exists(fs::path(dir) / "ab" / "runs" / "ds+bilinear_s1.json"));
}

TEST_CASE("worker_count respects VPNX_THREADS") {
    setenv("VPNX_THREADS", "3", 1);
    CHECK(worker_count() == 3);
    unsetenv("VPNX_THREADS");
    CHECK(worker_count() >= 1);
}
