// Command-line entry points for the sonar tracking toolkit:
//   track    run the tracker over one sequence, write a trajectory file
//   eval     one-pass evaluation over a dataset, write a report
//   synth    generate synthetic sonar sequences
//   enhance  high-frequency enhancement of a single image
//   fan      polar-to-fan remap of a single square image

#include <CLI11.hpp>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>
#include <sstream>
#include <string>
#include <vector>

#include "sonotrack/sonotrack.hpp"

namespace fs = std::filesystem;
using namespace sonotrack;

namespace {

std::vector<std::string> split(const std::string& s, char sep) {
  std::vector<std::string> out;
  std::istringstream ss(s);
  std::string tok;
  while (std::getline(ss, tok, sep)) out.push_back(tok);
  return out;
}

[[noreturn]] void unknown_key(const std::string& key,
                              const std::vector<std::string>& valid) {
  std::string msg = "unknown override key '" + key + "'; valid keys:";
  for (const std::string& k : valid) msg += " " + k;
  throw CLI::ValidationError(msg);
}

const std::vector<std::string> kTrackerKeys = {
    "template_size", "search_size", "template_context", "search_context",
    "stride", "embed_dim", "enhance.sigma", "enhance.ksize", "enhance.gain",
    "otcm.k", "otcm.iob_thresh", "otcm.warmup", "otcm.q_pos", "otcm.q_vel",
    "otcm.r_pos", "otcm.init_scale", "update.interval", "update.min_score",
    "scales", "scale_penalty", "seed"};

void apply_tracker_override(TrackerConfig& c, const std::string& key,
                            const std::string& val) {
  if (key == "template_size") c.template_size = std::stoi(val);
  else if (key == "search_size") c.search_size = std::stoi(val);
  else if (key == "template_context") c.template_context = std::stod(val);
  else if (key == "search_context") c.search_context = std::stod(val);
  else if (key == "stride") c.stride = std::stoi(val);
  else if (key == "embed_dim") c.embed_dim = std::stoi(val);
  else if (key == "enhance.sigma") c.enhance_sigma = std::stod(val);
  else if (key == "enhance.ksize") c.enhance_ksize = std::stoi(val);
  else if (key == "enhance.gain") c.enhance_gain = std::stod(val);
  else if (key == "otcm.k") c.otcm_k = std::stoi(val);
  else if (key == "otcm.iob_thresh") c.iob_thresh = std::stod(val);
  else if (key == "otcm.warmup") c.warmup = std::stoi(val);
  else if (key == "otcm.q_pos") c.noise.q_pos = std::stod(val);
  else if (key == "otcm.q_vel") c.noise.q_vel = std::stod(val);
  else if (key == "otcm.r_pos") c.noise.r_pos = std::stod(val);
  else if (key == "otcm.init_scale") c.noise.init_scale = std::stod(val);
  else if (key == "update.interval") c.update_interval = std::stoi(val);
  else if (key == "update.min_score") c.update_min_score = std::stod(val);
  else if (key == "scale_penalty") c.scale_penalty = std::stod(val);
  else if (key == "scales") {
    c.scales.clear();
    for (const std::string& s : split(val, ':')) c.scales.push_back(std::stod(s));
  } else if (key == "seed") {
    c.seed = std::stoull(val);
  } else {
    unknown_key(key, kTrackerKeys);
  }
}

const std::vector<std::string> kSynthKeys = {
    "frames", "image_size", "motion", "target_intensity",
    "noise.salt_pepper_rate", "noise.speckle_sigma", "sigma_x", "sigma_y",
    "scale_growth", "start_x", "start_y", "vel_x", "vel_y", "sin_amp",
    "sin_period", "range_drift", "ghost", "ghost.dx", "ghost.dy", "ghost.gain",
    "distractor", "distractor.gain", "format", "fan_fov", "image_ext", "seed"};

void apply_synth_override(SynthSpec& s, const std::string& key,
                          const std::string& val) {
  if (key == "frames") s.frames = std::stoi(val);
  else if (key == "image_size") s.image_size = std::stoi(val);
  else if (key == "motion") {
    if (val == "linear") s.motion = MotionKind::kLinear;
    else if (val == "sinusoidal") s.motion = MotionKind::kSinusoidal;
    else if (val == "crossover") s.motion = MotionKind::kCrossover;
    else throw CLI::ValidationError("motion must be linear|sinusoidal|crossover");
  } else if (key == "target_intensity") s.target_intensity = std::stod(val);
  else if (key == "noise.salt_pepper_rate") s.salt_pepper_rate = std::stod(val);
  else if (key == "noise.speckle_sigma") s.speckle_sigma = std::stod(val);
  else if (key == "sigma_x") s.sigma_x = std::stod(val);
  else if (key == "sigma_y") s.sigma_y = std::stod(val);
  else if (key == "scale_growth") s.scale_growth = std::stod(val);
  else if (key == "start_x") s.start_x = std::stod(val);
  else if (key == "start_y") s.start_y = std::stod(val);
  else if (key == "vel_x") s.vel_x = std::stod(val);
  else if (key == "vel_y") s.vel_y = std::stod(val);
  else if (key == "sin_amp") s.sin_amp = std::stod(val);
  else if (key == "sin_period") s.sin_period = std::stod(val);
  else if (key == "range_drift") s.range_drift = std::stod(val);
  else if (key == "ghost") s.ghost = std::stoi(val) != 0;
  else if (key == "ghost.dx") s.ghost_dx = std::stod(val);
  else if (key == "ghost.dy") s.ghost_dy = std::stod(val);
  else if (key == "ghost.gain") s.ghost_gain = std::stod(val);
  else if (key == "distractor") s.distractor = std::stoi(val) != 0;
  else if (key == "distractor.gain") s.distractor_gain = std::stod(val);
  else if (key == "format") {
    if (val == "square") s.format = SeqFormat::kSquare;
    else if (val == "fan") s.format = SeqFormat::kFan;
    else throw CLI::ValidationError("format must be square|fan");
  } else if (key == "fan_fov") s.fan_fov_deg = std::stod(val);
  else if (key == "image_ext") s.image_ext = val;
  else if (key == "seed") s.seed = std::stoull(val);
  else unknown_key(key, kSynthKeys);
}

struct CommonOpts {
  std::string model_path;
  std::uint64_t seed = 1;
  std::vector<std::string> overrides;
  bool no_otcm = false, no_mtfm = false, no_fem = false, no_enhance = false;
};

void add_common(CLI::App* cmd, CommonOpts& o) {
  cmd->add_option("--model", o.model_path, "model file (SONOTRACK-MODEL v1)");
  cmd->add_option("--seed", o.seed, "seed used when no model file is given");
  cmd->add_option("--set", o.overrides, "config override key=value (repeatable)");
  cmd->add_flag("--no-otcm", o.no_otcm, "disable trajectory correction");
  cmd->add_flag("--no-mtfm", o.no_mtfm, "disable template fusion");
  cmd->add_flag("--no-fem", o.no_fem, "disable frequency enhancement");
  cmd->add_flag("--no-enhance", o.no_enhance, "disable image enhancement");
}

Model build_model(const CommonOpts& o) {
  Model m;
  if (!o.model_path.empty()) {
    m = load_model_file(o.model_path);
  } else {
    TrackerConfig cfg;
    cfg.seed = o.seed;
    for (const std::string& kv : o.overrides) {
      const auto eq = kv.find('=');
      if (eq == std::string::npos)
        throw CLI::ValidationError("--set expects key=value, got '" + kv + "'");
      apply_tracker_override(cfg, kv.substr(0, eq), kv.substr(eq + 1));
    }
    return Model::from_seed(cfg);
  }
  // overrides on top of a loaded model apply to runtime config only
  for (const std::string& kv : o.overrides) {
    const auto eq = kv.find('=');
    if (eq == std::string::npos)
      throw CLI::ValidationError("--set expects key=value, got '" + kv + "'");
    apply_tracker_override(m.cfg, kv.substr(0, eq), kv.substr(eq + 1));
  }
  return m;
}

void apply_flags(TrackerConfig& cfg, const CommonOpts& o) {
  if (o.no_otcm) cfg.use_otcm = false;
  if (o.no_mtfm) cfg.use_mtfm = false;
  if (o.no_fem) cfg.use_fem = false;
  if (o.no_enhance) cfg.use_enhance = false;
}

int cmd_track(const std::string& seq_dir, const std::string& out,
              const CommonOpts& o) {
  Model model = build_model(o);
  apply_flags(model.cfg, o);
  const SequenceRecord rec = load_sequence(seq_dir);
  const Tracker tracker(model);
  const std::vector<BBox> preds = track_sequence(tracker, rec);
  std::ofstream f(out);
  if (!f) throw std::runtime_error("cannot open output file: " + out);
  for (const BBox& b : preds) {
    char line[128];
    std::snprintf(line, sizeof(line), "%.2f,%.2f,%.2f,%.2f\n", b.x, b.y, b.w, b.h);
    f << line;
  }
  return 0;
}

int cmd_eval(const std::string& root, const std::string& traj,
             const std::string& out, const std::string& csv, int workers,
             const CommonOpts& o) {
  const std::vector<SequenceRecord> dataset = load_dataset(root);
  EvalResult res;
  if (!traj.empty()) {
    res = evaluate_trajectories(dataset, traj);
  } else {
    Model model = build_model(o);
    apply_flags(model.cfg, o);
    res = run_ope(dataset, model, workers);
  }
  std::ofstream f(out);
  if (!f) throw std::runtime_error("cannot open report file: " + out);
  write_report(res, f);
  if (!csv.empty()) {
    std::ofstream cf(csv);
    if (!cf) throw std::runtime_error("cannot open csv file: " + csv);
    write_curves_csv(res, cf);
  }
  return 0;
}

int cmd_synth(const std::string& out_root, int sequences,
              const std::vector<std::string>& overrides, std::uint64_t seed) {
  SynthSpec spec;
  spec.seed = seed;
  for (const std::string& kv : overrides) {
    const auto eq = kv.find('=');
    if (eq == std::string::npos)
      throw CLI::ValidationError("--set expects key=value, got '" + kv + "'");
    apply_synth_override(spec, kv.substr(0, eq), kv.substr(eq + 1));
  }
  spec.validate();
  for (int i = 0; i < sequences; ++i) {
    SynthSpec s = spec;
    s.seed = spec.seed + static_cast<std::uint64_t>(i);
    char name[32];
    std::snprintf(name, sizeof(name), "seq%03d", i + 1);
    const SequenceRecord rec = synth_generate(s, out_root, name);
    std::cout << rec.name << " frames=" << rec.frame_paths.size() << " attributes=";
    for (size_t a = 0; a < rec.attributes.size(); ++a)
      std::cout << (a ? "," : "") << rec.attributes[a];
    std::cout << "\n";
  }
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"sonar single-object tracking toolkit"};
  app.require_subcommand(1);

  CommonOpts track_opts, eval_opts;
  std::string track_seq, track_out;
  auto* track = app.add_subcommand("track", "track one sequence");
  track->add_option("--seq", track_seq, "sequence directory")->required();
  track->add_option("--out", track_out, "trajectory output file")->required();
  add_common(track, track_opts);

  std::string eval_root, eval_traj, eval_out, eval_csv;
  int eval_workers = 0;
  auto* evalc = app.add_subcommand("eval", "one-pass evaluation over a dataset");
  evalc->add_option("--root", eval_root, "dataset root directory")->required();
  evalc->add_option("--trajectories", eval_traj,
                    "score precomputed trajectory files instead of tracking");
  evalc->add_option("--out", eval_out, "report output file")->required();
  evalc->add_option("--csv", eval_csv, "optional curve CSV output");
  evalc->add_option("--workers", eval_workers, "worker threads (default: cores)");
  add_common(evalc, eval_opts);

  std::string synth_out;
  int synth_sequences = 1;
  std::uint64_t synth_seed = 1;
  std::vector<std::string> synth_overrides;
  auto* synth = app.add_subcommand("synth", "generate synthetic sonar sequences");
  synth->add_option("--out", synth_out, "output dataset root")->required();
  synth->add_option("--sequences", synth_sequences, "number of sequences");
  synth->add_option("--seed", synth_seed, "base seed");
  synth->add_option("--set", synth_overrides, "spec override key=value (repeatable)");

  std::string enh_in, enh_out;
  double enh_sigma = 2.0, enh_gain = 2.0;
  int enh_ksize = 0;
  auto* enh = app.add_subcommand("enhance", "high-frequency enhance one image");
  enh->add_option("--in", enh_in, "input image (png/pgm)")->required();
  enh->add_option("--out", enh_out, "output image")->required();
  enh->add_option("--sigma", enh_sigma, "blur sigma");
  enh->add_option("--ksize", enh_ksize, "blur kernel size (0 = from sigma)");
  enh->add_option("--gain", enh_gain, "high-frequency gain");

  std::string fan_in, fan_out;
  double fan_fov = 130.0, fan_rmin = 0.1;
  auto* fanc = app.add_subcommand("fan", "polar-to-fan remap of a square image");
  fanc->add_option("--in", fan_in, "input square image")->required();
  fanc->add_option("--out", fan_out, "output fan image")->required();
  fanc->add_option("--fov", fan_fov, "field of view in degrees");
  fanc->add_option("--rmin", fan_rmin, "inner radius fraction");

  CLI11_PARSE(app, argc, argv);

  try {
    if (track->parsed()) return cmd_track(track_seq, track_out, track_opts);
    if (evalc->parsed())
      return cmd_eval(eval_root, eval_traj, eval_out, eval_csv, eval_workers, eval_opts);
    if (synth->parsed())
      return cmd_synth(synth_out, synth_sequences, synth_overrides, synth_seed);
    if (enh->parsed()) {
      const GrayImage img = read_image(enh_in);
      const int ks = enh_ksize > 0 ? enh_ksize : default_ksize(enh_sigma);
      write_image(high_freq_enhance(img, enh_sigma, ks, enh_gain), enh_out);
      return 0;
    }
    if (fanc->parsed()) {
      const GrayImage img = read_image(fan_in);
      write_image(quantize(polar_to_fan(img, fan_fov, fan_rmin)), fan_out);
      return 0;
    }
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return 0;
}
