// Command-line front end: synth, train, embed, reveal, eval, robustness,
// cost and spectrogram.

#include <CLI11.hpp>

#include <cmath>
#include <iostream>
#include <map>
#include <sstream>

#include "stegowav/costing.hpp"
#include "stegowav/io.hpp"
#include "stegowav/pipeline.hpp"
#include "stegowav/robustness.hpp"

using namespace stegowav;

namespace {

const char* const kConfigKeys[] = {"profile",    "image_size", "sample_rate",   "frame_length", "hop",
                                   "transform",  "method",     "container",     "large",        "luma",
                                   "beta",       "lambda",     "theta",         "gamma",        "wave_loss",
                                   "lr",         "adam_beta1", "adam_beta2",    "adam_eps",     "steps",
                                   "batch_size", "seed",       "unet_depth",    "unet_channels", "unet_kernel"};

/// --config plus one --<key> flag per configuration key.
struct ConfigFlags {
  std::string file;
  std::map<std::string, std::string> values;

  void attach(CLI::App* app) {
    app->add_option("--config", file, "key=value configuration file");
    for (const char* key : kConfigKeys) {
      app->add_option(std::string("--") + key, values[key], std::string("override config key ") + key);
    }
  }

  PipelineConfig resolve(PipelineConfig base = {}) const {
    PipelineConfig cfg = file.empty() ? base : parse_config(read_text(file), base);
    // Profile first: it resets the profile-dependent defaults.
    if (const auto it = values.find("profile"); it != values.end() && !it->second.empty()) cfg.set("profile", it->second);
    for (const auto& [key, value] : values) {
      if (key != "profile" && !value.empty()) cfg.set(key, value);
    }
    cfg.validate();
    return cfg;
  }

  bool overrides_anything() const {
    if (!file.empty()) return true;
    for (const auto& kv : values)
      if (!kv.second.empty()) return true;
    return false;
  }
};

Profile parse_profile(const std::string& s) {
  PipelineConfig c;
  c.set("profile", s);
  return c.profile;
}

std::vector<std::string> split(const std::string& s) {
  std::vector<std::string> out;
  std::stringstream in(s);
  std::string item;
  while (std::getline(in, item, ',')) {
    if (!item.empty()) out.push_back(item);
  }
  return out;
}

double parse_fraction(const std::string& s) {
  std::size_t used = 0;
  double v = 0;
  try {
    v = std::stod(s, &used);
  } catch (const std::exception&) {
    used = 0;
  }
  if (used != s.size()) throw UsageError("invalid fraction '" + s + "'");
  return v;
}

void print_metrics(const MetricsRow& row) {
  std::cout << MetricsRow::csv_header() << "\n" << row.csv_row() << "\n";
}

}  // namespace

int run(int argc, char** argv) {
  CLI::App app{"Hide images in audio spectrograms and get them back."};
  app.require_subcommand(1);
  app.set_help_all_flag("--help-all", "expand help for every subcommand");

  // synth
  auto* synth = app.add_subcommand("synth", "write a procedural dataset of image/audio pairs");
  Index synth_count = 16;
  std::string synth_profile = "desk", synth_out;
  std::uint64_t synth_seed = 0;
  synth->add_option("--count", synth_count, "number of pairs")->capture_default_str();
  synth->add_option("--profile", synth_profile, "desk or paper")->capture_default_str();
  synth->add_option("--seed", synth_seed, "random seed")->capture_default_str();
  synth->add_option("--out", synth_out, "output directory")->required();

  // train
  auto* train_cmd = app.add_subcommand("train", "train hiding and revealing networks");
  ConfigFlags train_flags;
  std::string train_data, train_out, train_log, train_resume;
  train_flags.attach(train_cmd);
  train_cmd->add_option("--data", train_data, "dataset directory")->required();
  train_cmd->add_option("--out", train_out, "checkpoint to write")->required();
  train_cmd->add_option("--log", train_log, "loss CSV (default: <out>.loss.csv)");
  train_cmd->add_option("--resume", train_resume, "continue from this checkpoint (its config wins over --config)");

  // embed
  auto* embed_cmd = app.add_subcommand("embed", "hide an image in a cover waveform");
  std::string embed_model, embed_image, embed_audio, embed_out;
  embed_cmd->add_option("--model", embed_model, "checkpoint")->required();
  embed_cmd->add_option("--image", embed_image, "secret image (P6)")->required();
  embed_cmd->add_option("--audio", embed_audio, "cover waveform (16-bit mono WAV)")->required();
  embed_cmd->add_option("--out", embed_out, "stego waveform to write")->required();

  // reveal
  auto* reveal_cmd = app.add_subcommand("reveal", "recover the hidden image from a stego waveform");
  std::string reveal_model, reveal_audio, reveal_out, reveal_secret, reveal_cover;
  reveal_cmd->add_option("--model", reveal_model, "checkpoint")->required();
  reveal_cmd->add_option("--audio", reveal_audio, "stego waveform")->required();
  reveal_cmd->add_option("--out", reveal_out, "revealed image to write (P6)")->required();
  reveal_cmd->add_option("--secret", reveal_secret, "original secret, enables image metrics");
  reveal_cmd->add_option("--cover", reveal_cover, "original cover, enables waveform metrics");

  // eval
  auto* eval_cmd = app.add_subcommand("eval", "metrics over a dataset");
  std::string eval_model, eval_data, eval_out;
  bool eval_per_sample = false;
  eval_cmd->add_option("--model", eval_model, "checkpoint")->required();
  eval_cmd->add_option("--data", eval_data, "dataset directory")->required();
  eval_cmd->add_option("--out", eval_out, "metrics CSV (default: stdout)");
  eval_cmd->add_flag("--per-sample", eval_per_sample, "one row per sample instead of the mean row");

  // robustness
  auto* rob_cmd = app.add_subcommand("robustness", "frame-dropout sweep");
  std::string rob_model, rob_data, rob_out, rob_dump;
  std::string rob_fractions = "1,0.75,0.5,0.25,0.125", rob_modes = "sequential,random";
  std::uint64_t rob_seed = 0;
  rob_cmd->add_option("--model", rob_model, "checkpoint")->required();
  rob_cmd->add_option("--data", rob_data, "dataset directory")->required();
  rob_cmd->add_option("--fractions", rob_fractions, "comma-separated kept fractions in (0, 1]")->capture_default_str();
  rob_cmd->add_option("--modes", rob_modes, "comma-separated: sequential, random")->capture_default_str();
  rob_cmd->add_option("--seed", rob_seed, "seed for random frame masks")->capture_default_str();
  rob_cmd->add_option("--out", rob_out, "sweep CSV (default: stdout)");
  rob_cmd->add_option("--dump-dir", rob_dump, "write revealed images per cell here");

  // cost
  auto* cost_cmd = app.add_subcommand("cost", "parameter and MAC report");
  ConfigFlags cost_flags;
  std::string cost_out;
  cost_flags.attach(cost_cmd);
  cost_cmd->add_option("--out", cost_out, "CSV to write; the aligned table goes to stdout");

  // spectrogram
  auto* spec_cmd = app.add_subcommand("spectrogram", "log-magnitude image of a waveform (P5)");
  ConfigFlags spec_flags;
  std::string spec_audio, spec_out, spec_model;
  spec_flags.attach(spec_cmd);
  spec_cmd->add_option("--audio", spec_audio, "waveform")->required();
  spec_cmd->add_option("--out", spec_out, "P5 image to write")->required();
  spec_cmd->add_option("--model", spec_model, "take the transform settings from this checkpoint");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    return app.exit(e) == 0 ? 0 : 1;
  }

  if (synth->parsed()) {
    const Dataset data = synth_dataset(synth_count, parse_profile(synth_profile), synth_seed);
    save_dataset(data, synth_out);
    std::cout << "wrote " << data.size() << " pairs to " << synth_out << "\n";
  } else if (train_cmd->parsed()) {
    const Dataset data = load_dataset(train_data);
    TrainResult r;
    if (train_resume.empty()) {
      r = train(data, train_flags.resolve());
    } else {
      ModelBundle m = load_checkpoint(train_resume);
      if (train_flags.overrides_anything()) m.config = train_flags.resolve(m.config);
      r = train(data, std::move(m));
    }
    save_checkpoint(r.model, train_out);
    const std::string log_path = train_log.empty() ? train_out + ".loss.csv" : train_log;
    write_text(log_path, train_log_csv(r.log));
    std::cout << "initial_loss=" << format_number(r.initial_loss) << " final_loss=" << format_number(r.final_loss)
              << " params=" << r.model.param_count() << "\n";
  } else if (embed_cmd->parsed()) {
    const ModelBundle m = load_checkpoint(embed_model);
    const EmbedResult e = embed(read_ppm(embed_image), read_wav(embed_audio), m);
    write_wav(embed_out, e.stego);
    std::cout << "snr_db=" << format_number(e.snr_db) << " container_l2=" << format_number(e.container_l2) << "\n";
  } else if (reveal_cmd->parsed()) {
    const ModelBundle m = load_checkpoint(reveal_model);
    const RgbImage img = reveal(read_wav(reveal_audio), m);
    write_ppm(reveal_out, img);
    MetricsRow row;
    row.method = to_string(m.config.method);
    row.container = to_string(m.config.loss.container);
    row.beta = m.config.loss.beta;
    row.lambda = m.config.loss.lambda;
    row.ssim = row.psnr_db = row.snr_db = row.waveform_loss = row.hist_l1 = std::nan("");
    if (!reveal_secret.empty()) {
      const RgbImage secret = read_ppm(reveal_secret);
      row.ssim = ssim(secret, img);
      row.psnr_db = psnr(secret, img);
      row.hist_l1 = histogram_l1(rgb_histogram(secret), rgb_histogram(img));
    }
    if (!reveal_cover.empty()) {
      const PipelineConfig& cfg = m.config;
      const Waveform ref = synthesize(analyze(fit_cover(read_wav(reveal_cover), cfg), cfg.stft(), cfg.transform));
      const Waveform stego = read_wav(reveal_audio);
      row.snr_db = snr_db(ref.samples, stego.samples);
      row.waveform_loss = (ref.samples - stego.samples).abs().mean();
    }
    print_metrics(row);
  } else if (eval_cmd->parsed()) {
    const ModelBundle m = load_checkpoint(eval_model);
    const Evaluation ev = evaluate(load_dataset(eval_data), m);
    std::string csv = MetricsRow::csv_header() + "\n";
    if (eval_per_sample) {
      for (const auto& row : ev.samples) csv += row.csv_row() + "\n";
    } else {
      csv += ev.mean.csv_row() + "\n";
    }
    if (eval_out.empty()) {
      std::cout << csv;
    } else {
      write_text(eval_out, csv);
      std::cout << "revealed_l1=" << format_number(ev.revealed_l1)
                << " constant_baseline_l1=" << format_number(ev.baseline_l1) << "\n";
    }
  } else if (rob_cmd->parsed()) {
    const ModelBundle m = load_checkpoint(rob_model);
    SweepOptions opts;
    opts.fractions.clear();
    for (const auto& f : split(rob_fractions)) opts.fractions.push_back(parse_fraction(f));
    opts.modes.clear();
    for (const auto& s : split(rob_modes)) opts.modes.push_back(parse_dropout_mode(s));
    opts.seed = rob_seed;
    opts.dump_dir = rob_dump;
    const std::string csv = robustness_csv(robustness_sweep(m, load_dataset(rob_data), opts));
    if (rob_out.empty()) {
      std::cout << csv;
    } else {
      write_text(rob_out, csv);
    }
  } else if (cost_cmd->parsed()) {
    const CostReport report = cost_table(standard_cost_entries(cost_flags.resolve()));
    std::cout << report.text();
    if (!cost_out.empty()) write_text(cost_out, report.csv());
  } else if (spec_cmd->parsed()) {
    const PipelineConfig cfg = spec_model.empty() ? spec_flags.resolve() : load_checkpoint(spec_model).config;
    const Spectrogram s = analyze(read_wav(spec_audio), cfg.stft(), cfg.transform);
    write_file(spec_out, encode_pgm_flipped(log_view(s)));
    std::cout << "bins=" << s.bins() << " frames=" << s.frames() << "\n";
  }
  return 0;
}

int main(int argc, char** argv) {
  try {
    return run(argc, argv);
  } catch (const ConfigError& e) {
    std::cerr << "config error: " << e.what() << "\n";
    return 1;
  } catch (const UsageError& e) {
    std::cerr << "usage error: " << e.what() << "\n";
    return 1;
  } catch (const DataError& e) {
    std::cerr << "data error: " << e.what() << "\n";
    return 2;
  } catch (const NumericError& e) {
    std::cerr << "numeric error: " << e.what() << "\n";
    return 3;
  }
}
