// Command-line front end for the latent fingerprint enhancement toolkit.

#include "lfe/eval.hpp"
#include "lfe/gabor.hpp"
#include "lfe/gradcheck.hpp"
#include "lfe/minutiae.hpp"
#include "lfe/synth.hpp"
#include "lfe/trainer.hpp"

#include <CLI11.hpp>

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>
#include <sstream>

#ifdef _OPENMP
#include <omp.h>
#endif

namespace fs = std::filesystem;

namespace {

using lfe::GrayImage;

constexpr const char* kVersion = "1.0.0";

// Reproducibility header: tool version plus the effective key=value config
// of the subcommand after flag/file/default resolution.
void print_header(const std::string& subcommand,
                  const std::vector<std::pair<std::string, std::string>>& kv) {
    std::cout << "# lfe " << kVersion << " " << subcommand << "\n";
    for (const auto& [k, v] : kv) std::cout << "# " << k << "=" << v << "\n";
}

std::string fmt(double v) {
    std::ostringstream os;
    os.precision(17);
    os << v;
    return os.str();
}

GrayImage classical_enhance(const GrayImage& img) {
    const auto orient = lfe::estimate_orientation(img, 16);
    const auto freq = lfe::estimate_frequency(img, orient);
    return lfe::gabor_enhance(img, orient, freq, lfe::GaborBankConfig{});
}

lfe::GeneratorParams load_generator(const std::string& checkpoint_path,
                                    int base_channels) {
    lfe::GeneratorParams gen =
        lfe::make_generator({4, base_channels, {}}, 0);
    auto state = gen.named_state();
    lfe::load_checkpoint_into(checkpoint_path, state);
    gen.set_training(false);
    return gen;
}

std::vector<lfe::Minutia> skeleton_minutiae(const GrayImage& img) {
    return lfe::extract_minutiae(lfe::thin(lfe::binarize(img)));
}

// TSV of `name<TAB>template_path` (gallery) or
// `name<TAB>template_path<TAB>mate_name` (probes).
std::vector<std::pair<std::string, std::vector<lfe::Minutia>>>
load_template_list(const std::string& path,
                   std::map<std::string, std::string>* mate_map) {
    std::ifstream is(path);
    if (!is) throw lfe::ImageError("cannot open template list: " + path);
    std::vector<std::pair<std::string, std::vector<lfe::Minutia>>> out;
    std::string line;
    while (std::getline(is, line)) {
        if (line.empty() || line[0] == '#') continue;
        std::istringstream ls(line);
        std::string name, tpath, mate;
        if (!std::getline(ls, name, '\t') || !std::getline(ls, tpath, '\t')) {
            throw lfe::ImageError("malformed template list line: " + line);
        }
        if (mate_map) {
            if (!std::getline(ls, mate, '\t')) {
                throw lfe::ImageError("probe line missing mate name: " + line);
            }
            (*mate_map)[name] = mate;
        }
        out.emplace_back(name, lfe::load_template(tpath));
    }
    if (out.empty()) throw lfe::ImageError("empty template list: " + path);
    return out;
}

std::vector<lfe::NoiseRecipe> default_recipes(int count, std::uint64_t seed) {
    std::vector<lfe::NoiseRecipe> recipes;
    for (int r = 0; r < count; ++r) {
        lfe::NoiseRecipe recipe;
        recipe.seed = seed * 1000 + r;
        // progressively harsher impressions
        recipe.line_count = 4 + 2 * r;
        recipe.blob_count = 3 + r;
        recipe.occlusion_fraction = 0.08 + 0.03 * r;
        recipe.contrast_scale = 0.65 - 0.05 * r;
        recipe.background_amplitude = 0.12 + 0.04 * r;
        recipes.push_back(recipe);
    }
    return recipes;
}

// CLI11 only processes config files for the root command, so each
// subcommand applies its own key=value file here after parsing.
// Explicit command-line flags always win over file values.
void apply_config_file(CLI::App* sub, const std::string& path) {
    std::ifstream is(path);
    if (!is) {
        throw std::runtime_error("cannot open config file: " + path);
    }
    auto trim = [](std::string s) {
        const auto b = s.find_first_not_of(" \t\r");
        const auto e = s.find_last_not_of(" \t\r");
        return b == std::string::npos ? std::string{} : s.substr(b, e - b + 1);
    };
    std::string line;
    int lineno = 0;
    while (std::getline(is, line)) {
        ++lineno;
        const auto hash = line.find('#');
        if (hash != std::string::npos) line.erase(hash);
        line = trim(line);
        if (line.empty()) continue;
        const auto eq = line.find('=');
        if (eq == std::string::npos) {
            throw std::runtime_error(path + ":" + std::to_string(lineno) +
                                     ": expected key=value");
        }
        const std::string key = trim(line.substr(0, eq));
        CLI::Option* opt = sub->get_option_no_throw("--" + key);
        if (opt == nullptr || key == "config") {
            throw std::runtime_error(path + ":" + std::to_string(lineno) +
                                     ": unknown option '" + key + "' for " +
                                     sub->get_name());
        }
        if (opt->count() > 0) continue;  // the explicit flag already won
        opt->add_result(trim(line.substr(eq + 1)));
        opt->run_callback();
    }
}

int run(int argc, char** argv) {
    CLI::App app{"Latent fingerprint enhancement toolkit"};
    app.require_subcommand(1);
    app.set_version_flag("--version", kVersion);

    int threads = 0;
    std::string config_path;
    app.add_option("--threads", threads, "Cap worker thread count (0 = auto)");

    // --- synth ---
    auto* synth = app.add_subcommand(
        "synth", "Generate a synthetic master/latent training corpus");
    synth->add_option("--config", config_path,
                     "key=value config file (explicit flags win)");
    std::string synth_out;
    int synth_subjects = 8, synth_recipes = 4, synth_w = 192, synth_h = 192;
    std::uint64_t synth_seed = 0;
    synth->add_option("--out", synth_out, "Output corpus directory")
        ->required();
    synth->add_option("--subjects", synth_subjects, "Number of subjects");
    synth->add_option("--recipes", synth_recipes,
                      "Degradation recipes (latents per subject)");
    synth->add_option("--width", synth_w, "Master width in pixels");
    synth->add_option("--height", synth_h, "Master height in pixels");
    synth->add_option("--seed", synth_seed, "Master RNG seed");

    // --- train ---
    auto* train = app.add_subcommand(
        "train", "Adversarial training on a corpus manifest");
    train->add_option("--config", config_path,
                     "key=value config file (explicit flags win)");
    std::string train_manifest, train_ckpt_dir, train_log_path;
    lfe::TrainConfig tcfg;
    train->add_option("--manifest", train_manifest, "Corpus manifest TSV")
        ->required();
    train->add_option("--checkpoint-dir", train_ckpt_dir,
                      "Directory for generator/discriminator checkpoints")
        ->required();
    train->add_option("--log", train_log_path, "Training log path (TSV)");
    train->add_option("--max-steps", tcfg.max_steps, "Training steps");
    train->add_option("--batch", tcfg.batch_size, "Batch size");
    train->add_option("--window", tcfg.window, "Training crop size");
    train->add_option("--lr", tcfg.learning_rate, "Adam learning rate");
    train->add_option("--lambda", tcfg.recon_weight,
                      "Reconstruction (L1) loss weight");
    train->add_option("--minutiae-weight", tcfg.minutiae_weight,
                      "Auxiliary skeleton L1 weight");
    train->add_option("--seed", tcfg.seed, "Training seed");
    train->add_option("--checkpoint-every", tcfg.checkpoint_every,
                      "Checkpoint interval in steps (0 = final only)");
    train->add_option("--gen-base", tcfg.gen_base_channels,
                      "Generator base channel count");
    train->add_option("--disc-base", tcfg.disc_base_channels,
                      "Discriminator base channel count");
    train->add_option("--disc-blocks", tcfg.disc_blocks,
                      "Discriminator block count");

    // --- enhance ---
    auto* enhance = app.add_subcommand(
        "enhance", "Enhance a latent image (GAN or classical Gabor path)");
    enhance->add_option("--config", config_path,
                     "key=value config file (explicit flags win)");
    std::string enh_in, enh_out, enh_method = "gan", enh_ckpt;
    int enh_window = 192, enh_stride = 96, enh_gen_base = 16;
    enhance->add_option("--input", enh_in, "Input PGM image")->required();
    enhance->add_option("--output", enh_out, "Output PGM image")->required();
    enhance->add_option("--method", enh_method, "gan or gabor")
        ->check(CLI::IsMember({"gan", "gabor"}));
    enhance->add_option("--checkpoint", enh_ckpt,
                        "Generator checkpoint (gan method)");
    enhance->add_option("--window", enh_window, "Sliding window size");
    enhance->add_option("--stride", enh_stride, "Sliding window stride");
    enhance->add_option("--gen-base", enh_gen_base,
                        "Generator base channel count");

    // --- minutiae ---
    auto* minutiae = app.add_subcommand(
        "minutiae", "Extract a minutiae template from an enhanced image");
    minutiae->add_option("--config", config_path,
                     "key=value config file (explicit flags win)");
    std::string min_in, min_out, min_render;
    minutiae->add_option("--input", min_in, "Input PGM image")->required();
    minutiae->add_option("--output", min_out, "Output template path")
        ->required();
    minutiae->add_option("--render", min_render,
                         "Optional PPM overlay of the detections");

    // --- match ---
    auto* match = app.add_subcommand(
        "match", "Compare an extracted template against ground truth");
    match->add_option("--config", config_path,
                     "key=value config file (explicit flags win)");
    std::string match_gt, match_probe, match_out;
    double match_tol_px = 12.0, match_tol_rad = M_PI / 6.0;
    match->add_option("--gt", match_gt, "Ground-truth template")->required();
    match->add_option("--probe", match_probe, "Extracted template")
        ->required();
    match->add_option("--out", match_out, "Match report path")->required();
    match->add_option("--tol-px", match_tol_px, "Pairing distance tolerance");
    match->add_option("--tol-rad", match_tol_rad, "Pairing angle tolerance");

    // --- cmc ---
    auto* cmc_cmd = app.add_subcommand(
        "cmc", "Closed-set identification: score matrix and CMC curve");
    cmc_cmd->add_option("--config", config_path,
                     "key=value config file (explicit flags win)");
    std::string cmc_probes, cmc_gallery, cmc_out, cmc_matrix,
        cmc_label = "enhanced";
    cmc_cmd
        ->add_option("--probes", cmc_probes,
                     "TSV: name, template path, mate name")
        ->required();
    cmc_cmd
        ->add_option("--gallery", cmc_gallery, "TSV: name, template path")
        ->required();
    cmc_cmd->add_option("--out", cmc_out, "Output base path (.tsv/.svg)")
        ->required();
    cmc_cmd->add_option("--matrix", cmc_matrix,
                        "Optional score matrix output path");
    cmc_cmd->add_option("--label", cmc_label, "Curve label");

    // --- gradcheck ---
    auto* gradcheck = app.add_subcommand(
        "gradcheck", "Finite-difference audit of the autodiff engine");
    gradcheck->add_option("--config", config_path,
                     "key=value config file (explicit flags win)");
    int gc_seeds = 20;
    double gc_tol_ops = 1e-4, gc_tol_nets = 1e-3;
    gradcheck->add_option("--seeds", gc_seeds, "Random draws per check");
    gradcheck->add_option("--tol-ops", gc_tol_ops,
                          "Tolerance for individual ops");
    gradcheck->add_option("--tol-nets", gc_tol_nets,
                          "Tolerance for full-network checks");

    // --- report ---
    auto* report = app.add_subcommand(
        "report", "End-to-end experiment summary over a corpus");
    report->add_option("--config", config_path,
                     "key=value config file (explicit flags win)");
    std::string rep_manifest, rep_out_dir, rep_ckpt;
    int rep_window = 192, rep_stride = 96, rep_gen_base = 16;
    double rep_tol_px = 12.0, rep_tol_rad = M_PI / 6.0;
    report->add_option("--manifest", rep_manifest, "Corpus manifest TSV")
        ->required();
    report->add_option("--out", rep_out_dir, "Output directory")->required();
    report->add_option("--checkpoint", rep_ckpt,
                       "Generator checkpoint; omit for classical path only");
    report->add_option("--window", rep_window, "Sliding window size");
    report->add_option("--stride", rep_stride, "Sliding window stride");
    report->add_option("--gen-base", rep_gen_base,
                       "Generator base channel count");
    report->add_option("--tol-px", rep_tol_px, "Pairing distance tolerance");
    report->add_option("--tol-rad", rep_tol_rad, "Pairing angle tolerance");

    try {
        app.parse(argc, argv);
    } catch (const CLI::CallForHelp& e) {
        return app.exit(e);
    } catch (const CLI::CallForVersion& e) {
        return app.exit(e);
    } catch (const CLI::ParseError& e) {
        app.exit(e);
        return 1;  // usage errors map to exit 1
    }

    if (!config_path.empty()) {
        for (CLI::App* sub : app.get_subcommands()) {
            apply_config_file(sub, config_path);
        }
    }

#ifdef _OPENMP
    if (threads > 0) omp_set_num_threads(threads);
#endif

    if (*synth) {
        print_header("synth", {{"out", synth_out},
                               {"subjects", std::to_string(synth_subjects)},
                               {"recipes", std::to_string(synth_recipes)},
                               {"width", std::to_string(synth_w)},
                               {"height", std::to_string(synth_h)},
                               {"seed", std::to_string(synth_seed)}});
        std::vector<GrayImage> masters;
        for (int s = 0; s < synth_subjects; ++s) {
            masters.push_back(
                lfe::synthesize_master(synth_seed + s, synth_w, synth_h));
        }
        auto manifest = lfe::build_corpus(
            masters, default_recipes(synth_recipes, synth_seed), synth_out);
        std::cout << "wrote " << manifest.entries.size() << " latents to "
                  << synth_out << "\n";
        return 0;
    }

    if (*train) {
        tcfg.checkpoint_dir = train_ckpt_dir;
        print_header(
            "train",
            {{"manifest", train_manifest},
             {"checkpoint_dir", train_ckpt_dir},
             {"max_steps", std::to_string(tcfg.max_steps)},
             {"batch", std::to_string(tcfg.batch_size)},
             {"window", std::to_string(tcfg.window)},
             {"lr", fmt(tcfg.learning_rate)},
             {"lambda", fmt(tcfg.recon_weight)},
             {"minutiae_weight", fmt(tcfg.minutiae_weight)},
             {"seed", std::to_string(tcfg.seed)},
             {"checkpoint_every", std::to_string(tcfg.checkpoint_every)},
             {"gen_base", std::to_string(tcfg.gen_base_channels)},
             {"disc_base", std::to_string(tcfg.disc_base_channels)},
             {"disc_blocks", std::to_string(tcfg.disc_blocks)}});
        auto corpus = lfe::load_manifest(train_manifest);
        auto result = lfe::train(corpus, tcfg);
        if (!train_log_path.empty()) {
            lfe::save_train_log(result.log, train_log_path);
        }
        if (!result.log.records.empty()) {
            const auto& last = result.log.records.back();
            std::cout << "final step " << last.step
                      << " loss_G_recon=" << last.loss_g_recon
                      << " loss_D=" << last.loss_d << "\n";
        }
        std::cout << "checkpoints in " << train_ckpt_dir << "\n";
        return 0;
    }

    if (*enhance) {
        print_header("enhance", {{"input", enh_in},
                                 {"output", enh_out},
                                 {"method", enh_method},
                                 {"checkpoint", enh_ckpt},
                                 {"window", std::to_string(enh_window)},
                                 {"stride", std::to_string(enh_stride)},
                                 {"gen_base", std::to_string(enh_gen_base)}});
        GrayImage img = lfe::load_image(enh_in);
        GrayImage out;
        if (enh_method == "gabor") {
            out = classical_enhance(img);
        } else {
            if (enh_ckpt.empty()) {
                throw lfe::ImageError(
                    "--checkpoint is required with --method gan");
            }
            auto gen = load_generator(enh_ckpt, enh_gen_base);
            out = lfe::enhance_full(img, gen, enh_window, enh_stride);
        }
        lfe::save_image(out, enh_out);
        std::cout << "wrote " << enh_out << "\n";
        return 0;
    }

    if (*minutiae) {
        print_header("minutiae", {{"input", min_in},
                                  {"output", min_out},
                                  {"render", min_render}});
        GrayImage img = lfe::load_image(min_in);
        auto found = skeleton_minutiae(img);
        lfe::save_template(found, min_out);
        if (!min_render.empty()) {
            lfe::save_ppm(lfe::render_minutiae(img, found), min_render);
        }
        std::cout << "extracted " << found.size() << " minutiae\n";
        return 0;
    }

    if (*match) {
        print_header("match", {{"gt", match_gt},
                               {"probe", match_probe},
                               {"out", match_out},
                               {"tol_px", fmt(match_tol_px)},
                               {"tol_rad", fmt(match_tol_rad)}});
        auto gt = lfe::load_template(match_gt);
        auto probe = lfe::load_template(match_probe);
        auto rep = lfe::match_minutiae(gt, probe, match_tol_px, match_tol_rad);
        lfe::save_match_report(rep, match_out);
        std::cout << "genuine recovered\t" << rep.genuine_recovered << "\n"
                  << "fake introduced\t" << rep.fake_introduced << "\n";
        return 0;
    }

    if (*cmc_cmd) {
        print_header("cmc", {{"probes", cmc_probes},
                             {"gallery", cmc_gallery},
                             {"out", cmc_out},
                             {"matrix", cmc_matrix},
                             {"label", cmc_label}});
        std::map<std::string, std::string> mates;
        auto probes = load_template_list(cmc_probes, &mates);
        auto gallery = load_template_list(cmc_gallery, nullptr);
        auto matrix = lfe::build_score_matrix(probes, gallery, mates);
        if (!cmc_matrix.empty()) lfe::save_score_matrix(matrix, cmc_matrix);
        auto curve = lfe::cmc(matrix, cmc_label);
        lfe::emit_cmc_plot({curve}, cmc_out);
        std::cout << "rank-1 rate\t" << curve.rates.front() << "\n";
        for (const auto& ref : lfe::reference_rank1_annotations()) {
            std::cout << "reference\t" << ref.label << "\t" << ref.rank1_rate
                      << "\n";
        }
        return 0;
    }

    if (*gradcheck) {
        print_header("gradcheck", {{"seeds", std::to_string(gc_seeds)},
                                   {"tol_ops", fmt(gc_tol_ops)},
                                   {"tol_nets", fmt(gc_tol_nets)}});
        auto reports =
            lfe::run_gradcheck_suite(gc_seeds, gc_tol_ops, gc_tol_nets);
        bool all_pass = true;
        for (const auto& r : reports) {
            std::cout << (r.pass ? "PASS" : "FAIL") << "\t" << r.name
                      << "\tmax_err=" << r.max_err << "\ttol=" << r.tolerance
                      << "\n";
            all_pass = all_pass && r.pass;
        }
        if (!all_pass) {
            throw lfe::NumericError("gradient check failed");
        }
        return 0;
    }

    if (*report) {
        print_header("report", {{"manifest", rep_manifest},
                                {"out", rep_out_dir},
                                {"checkpoint", rep_ckpt},
                                {"window", std::to_string(rep_window)},
                                {"stride", std::to_string(rep_stride)},
                                {"gen_base", std::to_string(rep_gen_base)},
                                {"tol_px", fmt(rep_tol_px)},
                                {"tol_rad", fmt(rep_tol_rad)}});
        auto corpus = lfe::load_manifest(rep_manifest);
        fs::create_directories(rep_out_dir);

        lfe::GeneratorParams gen;
        const bool use_gan = !rep_ckpt.empty();
        if (use_gan) gen = load_generator(rep_ckpt, rep_gen_base);

        long raw_genuine = 0, raw_fake = 0;
        long enh_genuine = 0, enh_fake = 0;
        std::vector<std::pair<std::string, std::vector<lfe::Minutia>>>
            raw_probes, enh_probes, gallery;
        std::map<std::string, std::string> mates;
        std::map<int, bool> gallery_done;

        for (const auto& e : corpus.entries) {
            GrayImage latent = lfe::load_image(e.latent_path);
            GrayImage gt_img = lfe::load_image(e.gt_path);
            GrayImage enhanced =
                use_gan ? lfe::enhance_full(latent, gen, rep_window, rep_stride)
                        : classical_enhance(latent);

            auto gt_min = skeleton_minutiae(gt_img);
            auto raw_min = skeleton_minutiae(latent);
            auto enh_min = skeleton_minutiae(enhanced);

            auto raw_rep =
                lfe::match_minutiae(gt_min, raw_min, rep_tol_px, rep_tol_rad);
            auto enh_rep =
                lfe::match_minutiae(gt_min, enh_min, rep_tol_px, rep_tol_rad);
            raw_genuine += raw_rep.genuine_recovered;
            raw_fake += raw_rep.fake_introduced;
            enh_genuine += enh_rep.genuine_recovered;
            enh_fake += enh_rep.fake_introduced;

            const std::string gal_name = "subject_" + std::to_string(e.subject_id);
            if (!gallery_done[e.subject_id]) {
                gallery.emplace_back(gal_name, gt_min);
                gallery_done[e.subject_id] = true;
            }
            const std::string probe_name =
                gal_name + "_imp_" + std::to_string(e.impression_id);
            raw_probes.emplace_back(probe_name, raw_min);
            enh_probes.emplace_back(probe_name, enh_min);
            mates[probe_name] = gal_name;
        }

        auto raw_matrix = lfe::build_score_matrix(raw_probes, gallery, mates);
        auto enh_matrix = lfe::build_score_matrix(enh_probes, gallery, mates);
        auto raw_curve = lfe::cmc(raw_matrix, "raw latents");
        auto enh_curve = lfe::cmc(enh_matrix, use_gan ? "gan enhanced"
                                                      : "gabor enhanced");
        lfe::emit_cmc_plot({raw_curve, enh_curve}, rep_out_dir + "/cmc");
        lfe::save_score_matrix(raw_matrix, rep_out_dir + "/scores_raw.tsv");
        lfe::save_score_matrix(enh_matrix,
                               rep_out_dir + "/scores_enhanced.tsv");

        std::ofstream sum(rep_out_dir + "/summary.tsv", std::ios::trunc);
        if (!sum) {
            throw lfe::ImageError("cannot write " + rep_out_dir +
                                  "/summary.tsv");
        }
        sum << "series\tgenuine_recovered\tfake_introduced\trank1_rate\n";
        sum << "raw latents\t" << raw_genuine << '\t' << raw_fake << '\t'
            << raw_curve.rates.front() << '\n';
        sum << (use_gan ? "gan enhanced" : "gabor enhanced") << '\t'
            << enh_genuine << '\t' << enh_fake << '\t'
            << enh_curve.rates.front() << '\n';
        for (const auto& ref : lfe::reference_minutiae_counts()) {
            sum << ref.label << '\t' << ref.genuine_recovered << '\t'
                << ref.fake_introduced << '\t';
            for (const auto& ann : lfe::reference_rank1_annotations()) {
                if (ann.label == ref.label) sum << ann.rank1_rate;
            }
            sum << '\n';
        }
        std::cout << "report written to " << rep_out_dir << "\n";
        return 0;
    }

    return 0;
}

}  // namespace

int main(int argc, char** argv) {
    try {
        return run(argc, argv);
    } catch (const lfe::NumericError& e) {
        std::cerr << "numeric failure: " << e.what() << "\n";
        return 3;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 2;
    }
}
