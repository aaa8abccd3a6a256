// Acceptance suite: runs every gate criterion end to end and prints one
// PASS/FAIL line per criterion. Exits nonzero if any criterion fails.
//
// The heavy criteria share one desk-scale workspace: a 10-class synthetic
// dataset with 300 images per class, poisoned at ratio 0.05 with alpha 0.9
// and trained with the mixed objective at lambda 0.5.

#include <chrono>
#include <cmath>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iostream>
#include <sstream>
#include <vector>

#include "glowsign/defense.hpp"
#include "glowsign/error.hpp"
#include "glowsign/pipeline.hpp"
#include "glowsign/rng.hpp"
#include "../pr_oracle.hpp"

using namespace glowsign;
namespace fs = std::filesystem;

namespace {

int g_failures = 0;

void report(int index, const std::string& name, bool pass, const std::string& detail) {
    std::cout << (pass ? "[PASS] " : "[FAIL] ") << "C" << index << " " << name;
    if (!detail.empty()) std::cout << " -- " << detail;
    std::cout << std::endl;
    if (!pass) ++g_failures;
}

void run(int index, const std::string& name, const std::function<std::pair<bool, std::string>()>& fn) {
    try {
        const auto [ok, detail] = fn();
        report(index, name, ok, detail);
    } catch (const std::exception& e) {
        report(index, name, false, std::string("exception: ") + e.what());
    }
}

std::string fmt(double v) {
    char buf[32];
    std::snprintf(buf, sizeof(buf), "%.4f", v);
    return buf;
}

std::vector<char> file_bytes(const fs::path& p) {
    std::ifstream in(p, std::ios::binary);
    return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

// ---- shared desk-scale workspace -----------------------------------------

struct Workspace {
    fs::path root;
    PipelineConfig misrec;    // out dir root/out
    PipelineConfig hiding;    // out dir root/hid
    PipelineConfig generative;
    double e2e_seconds = 0.0;
    bool ready = false;
};

PipelineConfig base_config(const fs::path& root) {
    PipelineConfig config;
    config.out_dir = (root / "out").string();
    config.dataset_dir = (root / "train").string();
    config.eval_dataset_dir = (root / "eval").string();
    config.gen.classes = 10;
    config.gen.per_class = 300;
    config.gen.image_size = 96;
    config.gen.seed = 7;
    config.poison_ratio = 0.05;
    config.alpha = 0.9;
    config.train.lambda_mix = 0.5;
    config.train.epochs = 8;
    config.train.seed = 1;
    return config;
}

Workspace& workspace() {
    static Workspace ws = [] {
        Workspace w;
        w.root = fs::temp_directory_path() / "glowsign_acceptance";
        fs::remove_all(w.root);
        fs::create_directories(w.root);
        w.misrec = base_config(w.root);

        const auto t0 = std::chrono::steady_clock::now();
        pipeline::cmd_generate(w.misrec, w.misrec.dataset_dir);
        PipelineConfig eval_gen = w.misrec;
        eval_gen.gen.seed = 8;
        eval_gen.gen.per_class = 60;
        pipeline::cmd_generate(eval_gen, w.misrec.eval_dataset_dir);
        pipeline::cmd_poison(w.misrec);
        pipeline::cmd_train(w.misrec);
        pipeline::cmd_eval(w.misrec);
        w.e2e_seconds =
            std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();

        pipeline::cmd_train(w.misrec, /*baseline=*/true);

        w.hiding = w.misrec;
        w.hiding.out_dir = (w.root / "hid").string();
        w.hiding.goal = "hiding";
        w.generative = w.misrec;
        w.generative.out_dir = (w.root / "gen").string();
        w.generative.goal = "generative";
        w.ready = true;
        return w;
    }();
    return ws;
}

double eval_asr(const PipelineConfig& config) {
    const ConvNet net = load_checkpoint(config.model_path());
    const Dataset eval_ds = load_dataset(config.eval_dataset_dir);
    const std::vector<Crop> crops = crops_from_dataset(eval_ds, config.train.crop_size);
    const AttackGoal goal = pipeline::goal_from_config(config, eval_ds);
    const std::vector<Crop> poisoned = pipeline::poisoned_eval_crops(config, net, crops, goal);
    std::vector<std::string> labels;
    for (int p : predict_batch(net, poisoned)) labels.push_back(net.class_names()[p]);
    return compute_asr(labels, goal);
}

SweepTable sweep_on_misrec(SweepFactor factor, const std::vector<std::string>& values) {
    const PipelineConfig& config = workspace().misrec;
    const ConvNet net = load_checkpoint(config.model_path());
    const Dataset eval_ds = load_dataset(config.eval_dataset_dir);
    const std::vector<Crop> crops = crops_from_dataset(eval_ds, config.train.crop_size);
    SweepContext ctx;
    ctx.fluor = config.fluor;
    ctx.base = config.env;
    ctx.goal = pipeline::goal_from_config(config, eval_ds);
    ctx.alpha = config.alpha;
    ctx.camera_distance_ref = config.env.camera_distance;
    return run_sweep(net, crops, factor, values, ctx);
}

// ---- criteria -------------------------------------------------------------

std::pair<bool, std::string> c1_geometry() {
    const auto t0 = std::chrono::steady_clock::now();
    Rng rng(12345);
    size_t checked = 0, contained = 0;
    for (int i = 0; i < 1000; ++i) {
        SignBox box;
        box.u = static_cast<int>(rng.below(100));
        box.v = static_cast<int>(rng.below(100));
        box.w = 8 + static_cast<int>(rng.below(505));
        box.h = 8 + static_cast<int>(rng.below(505));
        box.label = "x";
        for (SignShape shape : {SignShape::circle, SignShape::triangle, SignShape::octagon,
                                SignShape::rectangle}) {
            box.shape = shape;
            ++checked;
            if (verify_containment(box, plan_placement(box))) ++contained;
        }
    }
    const double secs =
        std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    const bool ok = contained == checked && secs < 60.0;
    std::ostringstream detail;
    detail << contained << "/" << checked << " contained in " << fmt(secs) << "s";
    return {ok, detail.str()};
}

std::pair<bool, std::string> c2_blending() {
    Rng rng(777);
    // Opaque flat trigger with integral color for exact replacement.
    TriggerAsset trigger;
    trigger.side = 24;
    trigger.rgba.resize(4u * 24 * 24);
    for (int i = 0; i < 24 * 24; ++i) {
        trigger.rgba[4 * i + 0] = 210.0;
        trigger.rgba[4 * i + 1] = 15.0;
        trigger.rgba[4 * i + 2] = 70.0;
        trigger.rgba[4 * i + 3] = 1.0;
    }
    size_t identity_ok = 0, replace_ok = 0;
    for (int i = 0; i < 100; ++i) {
        Image img(64, 64, 3);
        for (auto& b : img.data) b = static_cast<uint8_t>(rng.below(256));
        SignBox box;
        box.u = static_cast<int>(rng.below(20));
        box.v = static_cast<int>(rng.below(20));
        box.w = 24 + static_cast<int>(rng.below(20));
        box.h = 24 + static_cast<int>(rng.below(20));
        box.shape = SignShape::rectangle;
        box.label = "x";

        Image zero = img;
        blend_trigger(zero, box, trigger, 0.0);
        if (zero.data == img.data) ++identity_ok;

        Image one = img;
        const PixelRect r = blend_trigger(one, box, trigger, 1.0);
        bool good = true;
        for (int y = 0; y < 64 && good; ++y)
            for (int x = 0; x < 64 && good; ++x) {
                const bool inside =
                    x >= r.x0 && x < r.x0 + r.w && y >= r.y0 && y < r.y0 + r.h;
                const uint8_t* p = one.pixel(x, y);
                if (inside)
                    good = p[0] == 210 && p[1] == 15 && p[2] == 70;
                else
                    good = std::memcmp(p, img.pixel(x, y), 3) == 0;
            }
        if (good) ++replace_ok;
    }

    // Interpolation endpoints return the keyframes bit-exactly.
    EnvironmentCondition ca, cb;
    ca.uv_power = 120;
    cb.uv_power = 40;
    cb.ambient_lux = 2500;
    const TriggerAsset ka = render_parametric(ca, 32);
    const TriggerAsset kb = render_parametric(cb, 32);
    const bool endpoints_ok =
        interpolate(ka, kb, 0.0).rgba == ka.rgba && interpolate(ka, kb, 1.0).rgba == kb.rgba;

    const bool ok = identity_ok == 100 && replace_ok == 100 && endpoints_ok;
    std::ostringstream detail;
    detail << "identity " << identity_ok << "/100, replacement " << replace_ok
           << "/100, endpoints " << (endpoints_ok ? "exact" : "DIFFER");
    return {ok, detail.str()};
}

std::pair<bool, std::string> c3_map_oracle() {
    Rng rng(424242);
    size_t instances = 0;
    double worst = 0.0;
    for (int it = 0; it < 400; ++it) {
        const int n_classes = 1 + static_cast<int>(rng.below(3));
        const int n_images = 1 + static_cast<int>(rng.below(3));
        std::vector<GroundTruth> gts;
        std::vector<DetectionRecord> dets;
        const int n_gt = static_cast<int>(rng.below(5));
        for (int g = 0; g < n_gt; ++g) {
            GroundTruth gt;
            gt.image_id = "img" + std::to_string(rng.below(n_images));
            gt.box.u = static_cast<int>(rng.below(40));
            gt.box.v = static_cast<int>(rng.below(40));
            gt.box.w = 5 + static_cast<int>(rng.below(20));
            gt.box.h = 5 + static_cast<int>(rng.below(20));
            gt.box.shape = SignShape::rectangle;
            gt.box.label = "c" + std::to_string(rng.below(n_classes));
            gts.push_back(gt);
        }
        const int n_det = static_cast<int>(rng.below(11));
        for (int d = 0; d < n_det; ++d) {
            DetectionRecord det;
            det.image_id = "img" + std::to_string(rng.below(n_images));
            det.box = {rng.uniform(0, 40), rng.uniform(0, 40), rng.uniform(5, 25),
                       rng.uniform(5, 25)};
            det.label = "c" + std::to_string(rng.below(n_classes));
            det.confidence = rng.uniform();
            dets.push_back(det);
        }
        if (gts.empty() && dets.empty()) continue;
        ++instances;
        const double expected = glowsign_test::oracle_map(dets, gts, 0.5);
        const double actual = compute_map(dets, gts, 0.5).map;
        worst = std::max(worst, std::abs(actual - expected));
    }
    std::ostringstream detail;
    detail << instances << " instances, max |diff| " << worst;
    return {worst <= 1e-9, detail.str()};
}

std::pair<bool, std::string> c4_gradient_check() {
    Architecture arch;
    arch.in_channels = 1;
    arch.input_size = 6;
    arch.conv_channels = {2};
    arch.fc_hidden = 0;
    arch.num_classes = 4;
    ConvNet net(arch, 31337);

    Rng rng(5150);
    std::vector<std::vector<double>> clean_in(3), bd_in(2);
    for (auto& v : clean_in) {
        v.resize(36);
        for (auto& x : v) x = rng.uniform();
    }
    for (auto& v : bd_in) {
        v.resize(36);
        for (auto& x : v) x = rng.uniform();
    }
    BatchView clean, backdoor;
    clean.push(clean_in[0].data(), 1);
    clean.push(clean_in[1].data(), 0);
    clean.push(clean_in[2].data(), 2);
    backdoor.push(bd_in[0].data(), 3);
    backdoor.push(bd_in[1].data(), 3);

    const double lambda = 0.35;
    std::vector<double> grad(net.params().size(), 0.0);
    mixed_loss(net, clean, backdoor, lambda, &grad);

    const double h = 1e-5;
    double worst = 0.0;
    for (size_t k = 0; k < net.params().size(); ++k) {
        const double saved = net.params()[k];
        net.params()[k] = saved + h;
        const double up = mixed_loss(net, clean, backdoor, lambda);
        net.params()[k] = saved - h;
        const double down = mixed_loss(net, clean, backdoor, lambda);
        net.params()[k] = saved;
        const double numeric = (up - down) / (2 * h);
        const double denom = std::max({std::abs(numeric), std::abs(grad[k]), 1e-8});
        worst = std::max(worst, std::abs(numeric - grad[k]) / denom);
    }
    std::ostringstream detail;
    detail << net.params().size() << " params, worst relative error " << worst;
    return {worst <= 1e-4, detail.str()};
}

std::pair<bool, std::string> c5_misrecognition_e2e() {
    Workspace& ws = workspace();
    const double asr = eval_asr(ws.misrec);

    const ConvNet backdoored = load_checkpoint(ws.misrec.model_path());
    const ConvNet baseline = load_checkpoint(ws.misrec.baseline_path());
    const Dataset eval_ds = load_dataset(ws.misrec.eval_dataset_dir);
    const std::vector<Crop> crops = crops_from_dataset(eval_ds, ws.misrec.train.crop_size);
    const double acc_backdoored = accuracy(backdoored, crops);
    const double acc_baseline = accuracy(baseline, crops);
    const double drop = acc_baseline - acc_backdoored;

    const bool ok = asr >= 0.90 && drop <= 0.02 && ws.e2e_seconds <= 1200.0;
    std::ostringstream detail;
    detail << "ASR " << fmt(asr) << ", clean acc " << fmt(acc_backdoored) << " vs baseline "
           << fmt(acc_baseline) << " (drop " << fmt(drop) << "), e2e " << fmt(ws.e2e_seconds)
           << "s";
    return {ok, detail.str()};
}

std::pair<bool, std::string> c6_hiding_generative() {
    Workspace& ws = workspace();
    pipeline::cmd_poison(ws.hiding);
    pipeline::cmd_train(ws.hiding);
    const double hiding_asr = eval_asr(ws.hiding);

    pipeline::cmd_poison(ws.generative);
    pipeline::cmd_train(ws.generative);
    const double generative_asr = eval_asr(ws.generative);

    const bool ok = hiding_asr >= 0.90 && generative_asr >= 0.90;
    std::ostringstream detail;
    detail << "hiding ASR " << fmt(hiding_asr) << ", generative ASR " << fmt(generative_asr);
    return {ok, detail.str()};
}

std::pair<bool, std::string> c7_size_ablation() {
    const SweepTable table =
        sweep_on_misrec(SweepFactor::trigger_size, {"0.25", "0.5", "0.75", "1.0"});
    const auto& p = table.points;
    bool ordered_enough = true;
    int inversions = 0;
    for (size_t i = 1; i < p.size(); ++i) {
        if (p[i].asr + 1e-12 < p[i - 1].asr) {
            ++inversions;
            if (p[i - 1].asr - p[i].asr > 0.02) ordered_enough = false;
        }
    }
    if (inversions > 1) ordered_enough = false;
    const bool ok = ordered_enough && p.back().asr >= p.front().asr;
    std::ostringstream detail;
    for (const auto& pt : p) detail << pt.value_text << ":" << fmt(pt.asr) << " ";
    detail << "(" << inversions << " inversion(s))";
    return {ok, detail.str()};
}

std::pair<bool, std::string> c8_environment_sweeps() {
    const SweepTable lux = sweep_on_misrec(SweepFactor::ambient_lux, {"300", "3000"});
    const bool lux_ok = lux.points.front().asr >= lux.points.back().asr;

    const SweepTable power = sweep_on_misrec(SweepFactor::uv_power, {"40", "120"});
    const bool power_ok = power.points.back().asr >= power.points.front().asr;

    // Below the saturation distance the rendered trigger is identical, so
    // ASR must plateau exactly; past it ASR must not rise.
    const SweepTable dist =
        sweep_on_misrec(SweepFactor::uv_distance, {"1", "2", "5", "20"});
    const double d1 = dist.points[0].asr, d2 = dist.points[1].asr, d5 = dist.points[2].asr,
                 d20 = dist.points[3].asr;
    const bool plateau_ok = std::abs(d1 - d2) <= 1e-12 && std::abs(d2 - d5) <= 1e-12;
    const bool far_ok = d20 <= d5 + 1e-12;

    const bool ok = lux_ok && power_ok && plateau_ok && far_ok;
    std::ostringstream detail;
    detail << "lux 300:" << fmt(lux.points.front().asr) << " 3000:" << fmt(lux.points.back().asr)
           << "; power 40:" << fmt(power.points.front().asr)
           << " 120:" << fmt(power.points.back().asr) << "; d2 1/2/5/20: " << fmt(d1) << "/"
           << fmt(d2) << "/" << fmt(d5) << "/" << fmt(d20);
    return {ok, detail.str()};
}

std::pair<bool, std::string> c9_jpeg_defense() {
    Workspace& ws = workspace();
    const PipelineConfig& config = ws.misrec;
    const EvaluationReport report = pipeline::cmd_defend(config);
    const double asr = report.defense["jpeg"]["asr_after_retraining"].get<double>();
    std::ostringstream detail;
    detail << "quality " << config.jpeg_quality << ", ASR after retraining " << fmt(asr);
    return {asr >= 0.85, detail.str()};
}

std::pair<bool, std::string> c10_strip() {
    Workspace& ws = workspace();
    // cmd_defend ran in C9 and stored the STRIP block in the report.
    std::ifstream in(ws.misrec.report_json_path());
    std::stringstream buffer;
    buffer << in.rdbuf();
    const EvaluationReport report = report_from_json(Json::parse(buffer.str()));
    const double raw = report.defense["strip"]["raw_asr"].get<double>();
    const double residual = report.defense["strip"]["residual_asr"].get<double>();
    const double flag_rate = report.defense["strip"]["clean_flag_rate"].get<double>();

    const bool ok = (raw - residual) <= 0.10 && flag_rate <= 0.07;
    std::ostringstream detail;
    detail << "raw ASR " << fmt(raw) << ", residual " << fmt(residual) << ", clean flag rate "
           << fmt(flag_rate);
    return {ok, detail.str()};
}

std::pair<bool, std::string> c11_determinism() {
    const fs::path root = fs::temp_directory_path() / "glowsign_acceptance_det";
    fs::remove_all(root);

    auto run_chain = [&](const std::string& tag) {
        PipelineConfig config;
        config.out_dir = (root / tag / "out").string();
        config.dataset_dir = (root / tag / "train").string();
        config.eval_dataset_dir = (root / tag / "eval").string();
        config.gen.classes = 4;
        config.gen.per_class = 40;
        config.gen.image_size = 80;
        config.gen.seed = 21;
        config.poison_ratio = 0.1;
        config.train.epochs = 3;
        config.train.crop_size = 16;
        config.sweep_factor = "trigger_size";
        config.sweep_values = {"0.5", "1.0"};
        config.strip.num_overlays = 8;
        pipeline::cmd_generate(config, config.dataset_dir);
        PipelineConfig eval_gen = config;
        eval_gen.gen.seed = 22;
        pipeline::cmd_generate(eval_gen, config.eval_dataset_dir);
        pipeline::cmd_poison(config);
        pipeline::cmd_train(config);
        pipeline::cmd_eval(config);
        pipeline::cmd_sweep(config);
        pipeline::cmd_defend(config);
        return config;
    };

    const PipelineConfig a = run_chain("a");
    const PipelineConfig b = run_chain("b");

    const bool manifest_ok = file_bytes(a.poisoned_dir() / kManifestFileName) ==
                             file_bytes(b.poisoned_dir() / kManifestFileName);
    const bool vqa_ok =
        file_bytes(a.poisoned_dir() / "vqa.jsonl") == file_bytes(b.poisoned_dir() / "vqa.jsonl");
    const bool model_ok = file_bytes(a.model_path()) == file_bytes(b.model_path());
    const bool jpeg_model_ok = file_bytes(a.defense_dir() / "jpeg_model.ckpt") ==
                               file_bytes(b.defense_dir() / "jpeg_model.ckpt");
    const bool report_ok =
        file_bytes(a.report_json_path()) == file_bytes(b.report_json_path());

    const bool ok = manifest_ok && vqa_ok && model_ok && jpeg_model_ok && report_ok;
    std::ostringstream detail;
    detail << "manifest " << (manifest_ok ? "ok" : "DIFFERS") << ", vqa "
           << (vqa_ok ? "ok" : "DIFFERS") << ", checkpoint " << (model_ok ? "ok" : "DIFFERS")
           << ", defense checkpoint " << (jpeg_model_ok ? "ok" : "DIFFERS") << ", report "
           << (report_ok ? "ok" : "DIFFERS");
    return {ok, detail.str()};
}

}  // namespace

int main() {
    std::cout << "== acceptance suite ==" << std::endl;
    run(1, "geometry containment (1000 boxes x 4 shapes)", c1_geometry);
    run(2, "blending and interpolation identities", c2_blending);
    run(3, "mAP matches the exhaustive PR oracle", c3_map_oracle);
    run(4, "mixed-loss gradients match finite differences", c4_gradient_check);
    run(5, "end-to-end misrecognition attack", c5_misrecognition_e2e);
    run(6, "hiding and generative goals", c6_hiding_generative);
    run(7, "trigger-size ablation trend", c7_size_ablation);
    run(8, "environment sweep orderings", c8_environment_sweeps);
    run(9, "JPEG-compression defense leaves ASR high", c9_jpeg_defense);
    run(10, "STRIP leaves residual ASR near raw", c10_strip);
    run(11, "pipeline determinism (byte-identical artifacts)", c11_determinism);

    std::cout << (g_failures == 0 ? "ALL CRITERIA PASSED"
                                  : std::to_string(g_failures) + " CRITERIA FAILED")
              << std::endl;
    return g_failures == 0 ? 0 : 1;
}
