// Command-line front end: train, enhance, stream, mix, eval, gradcheck,
// selfcheck, info.

#include <cinttypes>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <iostream>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "sblstm/datagen.hpp"
#include "sblstm/engine.hpp"
#include "sblstm/features.hpp"
#include "sblstm/metrics.hpp"
#include "sblstm/model_store.hpp"
#include "sblstm/net.hpp"
#include "sblstm/rng.hpp"
#include "sblstm/train.hpp"
#include "sblstm/wav.hpp"

namespace {

using namespace sblstm;

int cmd_info(const std::string& model_path) {
  ModelBundle b;
  if (model_path.empty()) {
    b = make_default_bundle();
    std::printf("default configuration (no model file given)\n");
  } else {
    b = load_model(model_path);
    std::printf("model %s\n", model_path.c_str());
  }
  std::printf("  transform      fft %d, hop %d, %d Hz, %d bins\n", b.stft.fft_size,
              b.stft.hop, b.stft.sample_rate, b.stft.bins());
  std::printf("  features       %d neighbors each side (dim %d), window %d frames\n",
              b.feat.neighbors, b.feat.input_dim(), b.feat.seq_len);
  std::printf("  output delay   %d frames (%d samples)\n", b.feat.tau,
              b.feat.tau * b.stft.hop);
  std::printf("  network        lstm %d + %d, linear head %d\n", b.net.cfg.hidden1,
              b.net.cfg.hidden2, b.net.cfg.output_dim);
  std::printf("  compression    k_max %.3f, c %.3f\n", b.cirm.k_max, b.cirm.c);
  std::printf("  parameters     %" PRId64 "\n", count_parameters(b.net.cfg));
  return 0;
}

int cmd_gradcheck(int seeds, double tolerance) {
  NetConfig cfg;
  cfg.input_dim = 5;
  cfg.hidden1 = 4;
  cfg.hidden2 = 3;
  cfg.output_dim = 2;
  cfg.tau = 1;
  double worst = 0.0;
  for (int s = 0; s < seeds; ++s) {
    const double err = gradient_check(cfg, 7, 3, 1000 + static_cast<std::uint64_t>(s));
    std::printf("seed %d  max relative error %.3e\n", s, err);
    worst = std::max(worst, err);
  }
  std::printf("worst %.3e (tolerance %.1e)\n", worst, tolerance);
  return worst <= tolerance ? 0 : 1;
}

int cmd_train(const std::vector<std::string>& shards, const std::string& out_path,
              int epochs, int batch, double lr, int hidden1, int hidden2,
              std::uint64_t init_seed, std::uint64_t shuffle_seed, int fft, int hop,
              int rate, bool verbose) {
  const SampleSet data = read_shards(shards);
  std::fprintf(stderr, "loaded %zu samples (T=%d, dim=%d, tau=%d)\n", data.size(),
               data.seq_len, data.input_dim(), data.tau);

  ModelBundle b;
  b.stft.fft_size = fft;
  b.stft.hop = hop;
  b.stft.sample_rate = rate;
  b.feat.neighbors = data.neighbors;
  b.feat.bins = data.bins;
  b.feat.seq_len = data.seq_len;
  b.feat.tau = data.tau;
  NetConfig nc;
  nc.input_dim = data.input_dim();
  nc.hidden1 = hidden1;
  nc.hidden2 = hidden2;
  nc.tau = data.tau;
  NetParams<float> net = init_net_params<float>(nc, init_seed);

  TrainConfig tc;
  tc.epochs = epochs;
  tc.batch_size = batch;
  tc.shuffle_seed = shuffle_seed;
  tc.adam.lr = lr;
  tc.verbose = verbose;
  const TrainLog log = train<float>(net, data, tc);
  for (std::size_t e = 0; e < log.epoch_loss.size(); ++e)
    std::printf("epoch %zu  loss %.6f\n", e + 1, log.epoch_loss[e]);

  b.net = std::move(net);
  b.validate();
  const std::size_t bytes = save_model(out_path, b);
  std::printf("wrote %s (%zu bytes, %" PRId64 " parameters)\n", out_path.c_str(),
              bytes, count_parameters(b.net.cfg));
  return 0;
}

int cmd_enhance(const std::string& model_path, const std::string& in_path,
                const std::string& out_path, int tau_override, bool pcm16) {
  const ModelBundle model = load_model(model_path);
  const EnhanceResult r =
      enhance_file(model, in_path, out_path, tau_override,
                   pcm16 ? WavFormat::Pcm16 : WavFormat::Float32);
  std::fprintf(stderr,
               "%zu samples, %" PRId64
               " frames, %.3f ms/frame mean (max %.3f), delay %d samples in file, "
               "%d samples end to end\n",
               r.samples, r.frames, r.mean_frame_ms, r.max_frame_ms, r.in_file_delay,
               r.algorithmic_latency);
  return 0;
}

int cmd_mix(const std::string& out_dir, std::string speech_dir, std::string noise_dir,
            double hours, double reverb_fraction, std::uint64_t seed, int rate,
            double synth_speech_min, double synth_noise_min, bool no_render,
            const std::string& shard_path, int shard_neighbors, int shard_seq,
            int shard_tau) {
  namespace fs = std::filesystem;
  fs::create_directories(out_dir);

  if (synth_speech_min > 0.0) {
    speech_dir = out_dir + "/speech";
    fs::create_directories(speech_dir);
    const double clip_s = 8.0;
    const int n = static_cast<int>(std::ceil(synth_speech_min * 60.0 / clip_s));
    for (int i = 0; i < n; ++i) {
      char name[32];
      std::snprintf(name, sizeof(name), "/sp%04d.wav", i);
      write_wav(speech_dir + name,
                synth_speechlike(clip_s, rate, derive_seed(seed, 100 + i)), rate);
    }
    std::fprintf(stderr, "generated %d speech-like clips\n", n);
  }
  if (synth_noise_min > 0.0) {
    noise_dir = out_dir + "/noise";
    fs::create_directories(noise_dir);
    const double clip_s = 10.0;
    const int n = static_cast<int>(std::ceil(synth_noise_min * 60.0 / clip_s));
    for (int i = 0; i < n; ++i) {
      char name[32];
      std::snprintf(name, sizeof(name), "/nz%04d.wav", i);
      write_wav(noise_dir + name,
                synth_noise(clip_s, rate, derive_seed(seed, 50000 + i)), rate);
    }
    std::fprintf(stderr, "generated %d noise clips\n", n);
  }
  if (speech_dir.empty() || noise_dir.empty())
    throw std::runtime_error("need --speech-dir/--noise-dir or the synth options");

  const std::string manifest_path = out_dir + "/manifest.tsv";
  std::vector<MixSpec> specs;
  if (no_render && fs::exists(manifest_path)) {
    specs = read_manifest(manifest_path);
  } else {
    specs = build_manifest(speech_dir, noise_dir, hours, reverb_fraction, seed);
    write_manifest(manifest_path, specs);
    render_manifest(specs, out_dir + "/clips", rate);
    std::fprintf(stderr, "rendered %zu clips\n", specs.size());
  }

  if (!shard_path.empty()) {
    StftConfig scfg;
    scfg.sample_rate = rate;
    FeatureConfig fcfg;
    fcfg.neighbors = shard_neighbors;
    fcfg.bins = scfg.bins();
    fcfg.seq_len = shard_seq;
    fcfg.tau = shard_tau;
    fcfg.validate();
    CompressionConfig ccfg;
    SampleSet set;
    set.bins = fcfg.bins;
    set.neighbors = fcfg.neighbors;
    set.seq_len = fcfg.seq_len;
    set.tau = fcfg.tau;
    std::size_t skipped = 0;
    for (const auto& spec : specs) {
      const WavData noisy = read_wav(out_dir + "/clips/" + spec.id + "_noisy.wav");
      const WavData target = read_wav(out_dir + "/clips/" + spec.id + "_target.wav");
      if (stft_frame_count(noisy.samples.size(), scfg) < fcfg.seq_len) {
        ++skipped;
        continue;
      }
      const Spectrogram ns = stft(noisy.samples, scfg);
      const Spectrogram ts = stft(target.samples, scfg);
      for (auto& s : make_training_samples(ns, ts, fcfg, ccfg)) set.append(s);
    }
    write_shard(shard_path, set);
    std::fprintf(stderr, "wrote %zu samples to %s (%zu clips too short)\n",
                 set.size(), shard_path.c_str(), skipped);
  }
  return 0;
}

int cmd_eval(const std::string& manifest, const std::string& mix_dir,
             const std::string& enhanced_dir, const std::string& model_path,
             int shift, const std::string& csv) {
  if (shift < 0) {
    if (model_path.empty())
      throw std::runtime_error("eval needs --model or --shift for alignment");
    const ModelBundle m = load_model(model_path);
    shift = m.feat.tau * m.stft.hop;
  }
  const MetricReport rep = evaluate_corpus(manifest, mix_dir, enhanced_dir, shift);
  for (const auto& c : rep.clips) {
    auto v = [](const std::optional<double>& x) { return x ? *x : std::nan(""); };
    std::printf("%s  si-sdr %8.3f dB  snr %8.3f dB  seg-snr %8.3f dB\n",
                c.id.c_str(), v(c.si_sdr_db), v(c.snr_db), v(c.seg_snr_db));
  }
  std::printf("mean over %d clips: si-sdr %.3f dB, snr %.3f dB, seg-snr %.3f dB\n",
              rep.defined_clips, rep.mean_si_sdr, rep.mean_snr, rep.mean_seg_snr);
  if (!csv.empty()) write_report_csv(csv, rep);
  if (!rep.missing.empty()) {
    std::fprintf(stderr, "missing enhanced files for %zu clips:", rep.missing.size());
    for (const auto& id : rep.missing) std::fprintf(stderr, " %s", id.c_str());
    std::fprintf(stderr, "\n");
    return 1;
  }
  return 0;
}

int cmd_selfcheck() {
  int failures = 0;
  auto check = [&](const char* name, bool ok) {
    std::printf("%-38s %s\n", name, ok ? "ok" : "FAILED");
    if (!ok) ++failures;
  };

  {
    const auto w = analysis_window(4);
    check("analysis window",
          w[0] == 0.0 && std::abs(w[1] - 0.5) < 1e-15 && w[2] == 1.0 &&
              std::abs(w[3] - 0.5) < 1e-15);
  }
  {
    StftConfig cfg;
    Rng rng(7);
    std::vector<double> x(16000);
    for (auto& v : x) v = rng.uniform(-0.5, 0.5);
    const auto y = istft(stft(x, cfg), cfg);
    double err = 0.0;
    for (std::size_t i = cfg.fft_size; i + cfg.fft_size < y.size(); ++i)
      err = std::max(err, std::abs(y[i] - x[i]));
    check("transform round trip", err < 1e-9);
  }
  {
    CompressionConfig c;
    bool ok = true;
    for (double m = -80.0; m <= 80.0; m += 0.37) {
      const double v = compress(m, c);
      if (std::abs(v) >= c.k_max || std::abs(uncompress(v, c) - m) > 1e-6) ok = false;
    }
    check("mask compression inverse", ok);
  }
  { check("parameter count", count_parameters(NetConfig{}) == 1295874); }
  {
    NetConfig cfg;
    cfg.input_dim = 7;
    cfg.hidden1 = 12;
    cfg.hidden2 = 9;
    cfg.tau = 2;
    // This problem is big enough that central differences at 1e-5 are
    // dominated by cancellation noise; 1e-4 sits at the noise/truncation
    // crossover (a real gradient bug shows up orders of magnitude larger).
    const double err = gradient_check(cfg, 11, 2, 99, 1e-4);
    check("gradient check", err < 1e-4);
  }
  {
    // streaming equals batch replay on a short random clip
    ModelBundle b;
    b.stft.fft_size = 128;
    b.stft.hop = 64;
    b.stft.sample_rate = 16000;
    b.feat.bins = 65;
    b.feat.neighbors = 3;
    b.feat.seq_len = 32;
    b.feat.tau = 2;
    NetConfig nc;
    nc.input_dim = 7;
    nc.hidden1 = 16;
    nc.hidden2 = 12;
    nc.tau = 2;
    b.net = init_net_params<float>(nc, 5);
    Rng rng(11);
    std::vector<double> x(16000);
    for (auto& v : x) v = rng.uniform(-0.5, 0.5);
    const auto ref = offline_reference_enhance(b, x);
    StreamSession s(b);
    std::vector<double> raw;
    std::vector<double> chunk(64, 0.0);
    const std::size_t n_calls = x.size() / 64;
    for (std::size_t c = 0; c < n_calls + static_cast<std::size_t>(s.fill_calls());
         ++c) {
      std::fill(chunk.begin(), chunk.end(), 0.0);
      if (c < n_calls) std::copy(x.begin() + c * 64, x.begin() + (c + 1) * 64,
                                 chunk.begin());
      auto r = s.process_frame(chunk);
      if (r)
        raw.insert(raw.end(), r->begin(), r->end());
      else
        raw.insert(raw.end(), 64, 0.0);
    }
    double err = 0.0;
    for (std::size_t n = 0; n < x.size(); ++n)
      err = std::max(err, std::abs(raw[n + 64] - ref[n]));
    check("streaming equals batch replay", err < 1e-5);
  }
  std::printf(failures == 0 ? "all checks passed\n" : "%d checks FAILED\n", failures);
  return failures == 0 ? 0 : 1;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"delayed subband LSTM speech enhancement"};
  app.require_subcommand(1);
  int threads = 1;
  bool verbose = false;
  app.add_option("--threads", threads, "worker threads (compute is deterministic)")
      ->check(CLI::Range(1, 256));
  app.add_flag("--verbose", verbose, "chatty progress output");

  std::string model_path, in_path, out_path, csv_path;
  int tau_override = -1;
  bool pcm16 = false;

  auto* info = app.add_subcommand("info", "print model configuration");
  info->add_option("--model", model_path, "model file");

  auto* gradcheck = app.add_subcommand("gradcheck", "finite-difference gradient check");
  int gc_seeds = 5;
  double gc_tol = 1e-4;
  gradcheck->add_option("--seeds", gc_seeds, "number of seeds")->check(CLI::Range(1, 100));
  gradcheck->add_option("--tolerance", gc_tol, "max relative error allowed");

  auto* train_cmd = app.add_subcommand("train", "train a model from sample shards");
  std::vector<std::string> shards;
  int epochs = 8, batch = 512, hidden1 = 384, hidden2 = 256;
  int fft = 512, hop = 256, rate = 16000;
  double lr = 1e-3;
  std::uint64_t init_seed = 1, shuffle_seed = 1;
  train_cmd->add_option("--data", shards, "shard files")->required()->expected(-1);
  train_cmd->add_option("--out", out_path, "output model path")->required();
  train_cmd->add_option("--epochs", epochs);
  train_cmd->add_option("--batch", batch);
  train_cmd->add_option("--lr", lr);
  train_cmd->add_option("--hidden1", hidden1);
  train_cmd->add_option("--hidden2", hidden2);
  train_cmd->add_option("--init-seed", init_seed);
  train_cmd->add_option("--seed", shuffle_seed, "shuffle seed");
  train_cmd->add_option("--fft", fft);
  train_cmd->add_option("--hop", hop);
  train_cmd->add_option("--rate", rate);

  auto* enhance = app.add_subcommand("enhance", "enhance a wav file");
  enhance->add_option("--model", model_path, "model file")->required();
  enhance->add_option("--in", in_path, "input wav")->required();
  enhance->add_option("--out", out_path, "output wav")->required();
  enhance->add_option("--tau", tau_override, "override the output delay (frames)");
  enhance->add_flag("--pcm16", pcm16, "write 16-bit output instead of float");

  auto* stream = app.add_subcommand("stream", "raw s16le mono stdin to stdout");
  stream->add_option("--model", model_path, "model file")->required();
  stream->add_option("--tau", tau_override, "override the output delay (frames)");

  auto* mix = app.add_subcommand("mix", "build a mixed corpus (and optional shards)");
  std::string out_dir, speech_dir, noise_dir, shard_path;
  double hours = 0.1, reverb_fraction = 0.0, synth_speech_min = 0.0,
         synth_noise_min = 0.0;
  std::uint64_t mix_seed = 1;
  bool no_render = false;
  int shard_neighbors = 15, shard_seq = 192, shard_tau = 2;
  mix->add_option("--out", out_dir, "output directory")->required();
  mix->add_option("--speech-dir", speech_dir);
  mix->add_option("--noise-dir", noise_dir);
  mix->add_option("--hours", hours);
  mix->add_option("--reverb-fraction", reverb_fraction)->check(CLI::Range(0.0, 1.0));
  mix->add_option("--seed", mix_seed);
  mix->add_option("--rate", rate);
  mix->add_option("--synth-speech", synth_speech_min,
                  "minutes of generated speech-like material");
  mix->add_option("--synth-noise", synth_noise_min, "minutes of generated noise");
  mix->add_flag("--no-render", no_render, "reuse an existing manifest and clips");
  mix->add_option("--shards", shard_path, "also write a training shard here");
  mix->add_option("--shard-neighbors", shard_neighbors);
  mix->add_option("--shard-seq", shard_seq);
  mix->add_option("--shard-tau", shard_tau);

  auto* eval = app.add_subcommand("eval", "score enhanced clips against targets");
  std::string manifest, mix_dir, enhanced_dir;
  int shift = -1;
  eval->add_option("--manifest", manifest)->required();
  eval->add_option("--mix-dir", mix_dir)->required();
  eval->add_option("--enhanced-dir", enhanced_dir)->required();
  eval->add_option("--model", model_path, "model file (for delay compensation)");
  eval->add_option("--shift", shift, "explicit alignment shift in samples");
  eval->add_option("--csv", csv_path, "write per-clip metrics here");

  auto* selfcheck = app.add_subcommand("selfcheck", "quick invariant sweep");
  (void)selfcheck;

  CLI11_PARSE(app, argc, argv);
  (void)threads;  // compute is single-threaded and deterministic either way

  try {
    if (app.got_subcommand(info)) return cmd_info(model_path);
    if (app.got_subcommand(gradcheck)) return cmd_gradcheck(gc_seeds, gc_tol);
    if (app.got_subcommand(train_cmd))
      return cmd_train(shards, out_path, epochs, batch, lr, hidden1, hidden2,
                       init_seed, shuffle_seed, fft, hop, rate, verbose);
    if (app.got_subcommand(enhance))
      return cmd_enhance(model_path, in_path, out_path, tau_override, pcm16);
    if (app.got_subcommand(stream)) {
      const ModelBundle model = load_model(model_path);
      enhance_stream(model, std::cin, std::cout, tau_override,
                     verbose ? &std::cerr : nullptr);
      return 0;
    }
    if (app.got_subcommand(mix))
      return cmd_mix(out_dir, speech_dir, noise_dir, hours, reverb_fraction, mix_seed,
                     rate, synth_speech_min, synth_noise_min, no_render, shard_path,
                     shard_neighbors, shard_seq, shard_tau);
    if (app.got_subcommand(eval))
      return cmd_eval(manifest, mix_dir, enhanced_dir, model_path, shift, csv_path);
    if (app.got_subcommand(selfcheck)) return cmd_selfcheck();
  } catch (const std::exception& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return 1;
  }
  return 0;
}
