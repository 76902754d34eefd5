#pragma once

// Batch commands behind the `magicpaint` tool. Each returns a process exit
// code and reports to the given streams; argument parsing lives in
// tools/magicpaint.cpp.

#include <algorithm>
#include <atomic>
#include <cstdint>
#include <filesystem>
#include <functional>
#include <iomanip>
#include <map>
#include <mutex>
#include <optional>
#include <set>
#include <span>
#include <ostream>
#include <sstream>
#include <string>
#include <thread>
#include <vector>

#include "magicpaint/core/png_io.hpp"
#include "magicpaint/core/recording.hpp"
#include "magicpaint/embed/train.hpp"
#include "magicpaint/embed/weights_io.hpp"
#include "magicpaint/eval/metrics.hpp"
#include "magicpaint/eval/timeline.hpp"
#include "magicpaint/propagate/assistant.hpp"
#include "magicpaint/sim/simulate.hpp"
#include "magicpaint/synth/synthetic.hpp"

namespace magicpaint::cli {

namespace fs = std::filesystem;

// ---------------------------------------------------------------- helpers

inline void write_text(const fs::path& path, const std::string& text) {
  write_file_bytes(path, std::span(reinterpret_cast<const unsigned char*>(text.data()), text.size()));
}

inline std::string read_text(const fs::path& path) {
  const auto bytes = read_file_bytes(path);
  return std::string(bytes.begin(), bytes.end());
}

// Sorted stems of the files in `dir` with extension `ext`.
inline std::vector<std::string> list_stems(const fs::path& dir, const std::string& ext) {
  if (!fs::is_directory(dir)) throw Error("missing directory: " + dir.string());
  std::vector<std::string> out;
  for (const auto& e : fs::directory_iterator(dir))
    if (e.is_regular_file() && e.path().extension() == ext) out.push_back(e.path().stem().string());
  std::sort(out.begin(), out.end());
  return out;
}

// Stable per-item seed derived from the run seed and the item name.
inline std::uint64_t seed_for(std::uint64_t seed, const std::string& name) {
  std::uint64_t h = 1469598103934665603ULL;
  for (unsigned char c : name) h = (h ^ c) * 1099511628211ULL;
  return detail::splitmix64(seed ^ h);
}

// Runs fn(i) for i in [0, n) on `jobs` threads; the first exception is rethrown.
inline void parallel_for(std::size_t n, unsigned jobs, const std::function<void(std::size_t)>& fn) {
  jobs = std::max(1u, std::min<unsigned>(jobs, static_cast<unsigned>(std::max<std::size_t>(n, 1))));
  if (jobs == 1) {
    for (std::size_t i = 0; i < n; ++i) fn(i);
    return;
  }
  std::atomic<std::size_t> next{0};
  std::exception_ptr err;
  std::mutex err_mutex;
  std::vector<std::thread> pool;
  for (unsigned t = 0; t < jobs; ++t)
    pool.emplace_back([&] {
      for (std::size_t i = next++; i < n; i = next++) {
        try {
          fn(i);
        } catch (...) {
          std::lock_guard lock(err_mutex);
          if (!err) err = std::current_exception();
        }
      }
    });
  for (auto& th : pool) th.join();
  if (err) std::rethrow_exception(err);
}

inline unsigned default_jobs() { return std::max(1u, std::thread::hardware_concurrency()); }

struct SuiteItem {
  std::string stem;
  Image image;
  GroundTruth gt;
  Recording recording;
};

// One item per recording `<stem>.rec`, with `<stem>.png` in the image and
// ground-truth directories.
inline std::vector<SuiteItem> load_suite(const fs::path& images, const fs::path& gt, const fs::path& recordings) {
  std::vector<SuiteItem> out;
  for (const auto& stem : list_stems(recordings, ".rec")) {
    SuiteItem it;
    it.stem = stem;
    it.recording = read_recording(recordings / (stem + ".rec"));
    const fs::path img = images / (stem + ".png"), g = gt / (stem + ".png");
    if (!fs::exists(img)) throw Error("missing image: " + img.string());
    if (!fs::exists(g)) throw Error("missing ground truth: " + g.string());
    it.image = load_image(img);
    it.gt = load_ground_truth(g);
    if (it.image.width() != it.recording.width || it.image.height() != it.recording.height)
      throw Error("recording does not match image: " + stem);
    if (!it.gt.segments.same_shape(it.image)) throw Error("ground truth does not match image: " + stem);
    out.push_back(std::move(it));
  }
  if (out.empty()) throw Error("no recordings in " + recordings.string());
  return out;
}

inline std::string fixed(double v, int digits = 4) {
  std::ostringstream os;
  os << std::fixed << std::setprecision(digits) << v;
  return os.str();
}

struct SummaryRow {
  std::string config;
  std::size_t images = 0;
  double mean_time_s = 0.0;
  double mean_sq = 0.0;
  double mean_aiou = 0.0;
  double executed_fraction = 0.0;
};

inline std::string summary_csv(const std::vector<SummaryRow>& rows) {
  std::string s = "config,images,mean_time_s,final_sq,final_aiou,executed_fraction\n";
  for (const auto& r : rows)
    s += r.config + ',' + std::to_string(r.images) + ',' + format_number(r.mean_time_s) + ',' + format_number(r.mean_sq) +
         ',' + format_number(r.mean_aiou) + ',' + format_number(r.executed_fraction) + '\n';
  return s;
}

inline void print_summary(std::ostream& out, const std::vector<SummaryRow>& rows) {
  out << std::left << std::setw(18) << "config" << std::right << std::setw(8) << "images" << std::setw(12) << "time_s"
      << std::setw(10) << "SQ" << std::setw(10) << "aIoU" << std::setw(10) << "executed" << '\n';
  for (const auto& r : rows)
    out << std::left << std::setw(18) << r.config << std::right << std::setw(8) << r.images << std::setw(12)
        << fixed(r.mean_time_s, 2) << std::setw(10) << fixed(r.mean_sq) << std::setw(10) << fixed(r.mean_aiou)
        << std::setw(10) << fixed(r.executed_fraction, 3) << '\n';
}

struct Protocol {
  LatencyModel latency = LatencyModel::best_case();
  bool cap_pauses = true;
  bool skip_redundant = true;
};

inline Timeline apply_protocol(const Timeline& t, const Protocol& p) {
  Timeline out = apply_latency_model(t, p.latency);
  return p.skip_redundant ? strip_redundant(out) : out;
}

// Summary over protocol-processed timelines; `actions` is the number of
// recorded actions per image (denominator of the executed fraction).
inline SummaryRow summarize(const std::string& config, const std::vector<Timeline>& processed,
                            const std::vector<std::size_t>& actions) {
  SummaryRow r{config, processed.size()};
  double exec = 0.0;
  for (std::size_t i = 0; i < processed.size(); ++i) {
    r.mean_time_s += processed[i].total_time();
    r.mean_sq += processed[i].final_sq();
    r.mean_aiou += processed[i].final_aiou();
    if (actions[i] > 0) exec += static_cast<double>(processed[i].executed_actions()) / static_cast<double>(actions[i]);
  }
  const double n = static_cast<double>(std::max<std::size_t>(processed.size(), 1));
  r.mean_time_s /= n;
  r.mean_sq /= n;
  r.mean_aiou /= n;
  r.executed_fraction = exec / n;
  return r;
}

// ------------------------------------------------------------------ train

struct TrainOptions {
  fs::path images;
  fs::path gt;
  fs::path out;
  std::string net = "full";  // full | small
  std::vector<int> widths;      // overrides the preset when set
  std::vector<int> dilations;
  int output_dim = 0;
  TrainConfig train;
};

inline EmbeddingNetConfig net_preset(const std::string& name) {
  EmbeddingNetConfig c;
  if (name == "full") return c;
  if (name == "small") {
    c.widths = {16, 16, 16, 16};
    c.dilations = {1, 2, 4, 8, 1};
    c.output_dim = 8;
    return c;
  }
  throw Error("unknown network preset: " + name);
}

// Label map for training: classes from the sidecar when present, else the
// raw map.
inline LabelMap load_training_labels(const fs::path& png) {
  auto sidecar = png;
  sidecar.replace_extension(".json");
  if (fs::exists(sidecar)) return load_ground_truth(png).class_map();
  return load_label_map(png);
}

inline int cmd_train(const TrainOptions& o, std::ostream& out, std::ostream& err) {
  try {
    EmbeddingNetConfig nc = net_preset(o.net);
    if (!o.widths.empty()) nc.widths = o.widths;
    if (!o.dilations.empty()) nc.dilations = o.dilations;
    if (o.output_dim > 0) nc.output_dim = o.output_dim;
    nc.validate();
    std::vector<TrainSample> data;
    for (const auto& stem : list_stems(o.images, ".png")) {
      const fs::path g = o.gt / (stem + ".png");
      if (!fs::exists(g)) throw Error("missing ground truth: " + g.string());
      data.push_back({load_image(o.images / (stem + ".png")), load_training_labels(g)});
    }
    if (data.empty()) throw Error("empty dataset");

    TrainLog log;
    const auto net = train_embedding<float>(data, o.train, nc, &log, [&](int step, double loss) {
      if (step % 50 == 0) err << "step " << step << " loss " << fixed(loss) << '\n';
    });
    fs::create_directories(o.out);
    save_weights(net, o.out / "weights.mpw");
    std::string csv = "step,loss\n";
    for (std::size_t i = 0; i < log.step_loss.size(); ++i)
      csv += std::to_string(i) + ',' + format_number(log.step_loss[i]) + '\n';
    write_text(o.out / "loss.csv", csv);
    out << "weights: " << (o.out / "weights.mpw").string() << '\n';
    if (!log.step_loss.empty()) {
      out << "initial loss " << fixed(log.step_loss.front()) << ", final loss " << fixed(log.step_loss.back())
          << ", ratio " << fixed(log.step_loss.back() / log.step_loss.front()) << '\n';
    } else {
      out << "0 steps: initial weights written\n";
    }
    return 0;
  } catch (const std::exception& e) {
    err << "train: " << e.what() << '\n';
    return 1;
  }
}

// --------------------------------------------------------------- simulate

struct AssistantOptions {
  std::string embedding = "hist";  // hist | neural
  fs::path weights;
  std::optional<double> d0;
  CrfParams crf;
  FilterMethod filter = FilterMethod::Auto;

  AssistantConfig config(Inference inf) const {
    AssistantConfig c;
    if (embedding == "hist")
      c.embedding.kind = EmbeddingKind::Histogram;
    else if (embedding == "neural")
      c.embedding.kind = EmbeddingKind::Neural;
    else
      throw Error("unknown embedding: " + embedding);
    c.embedding.weights = weights;
    c.inference = inf;
    c.crf = crf;
    c.filter = filter;
    c.d0 = d0;
    return c;
  }
};

struct SimulateOptions {
  fs::path images, gt, recordings, out;
  AssistantOptions assistant;
  std::vector<Inference> inference{Inference::NearestNeighbor, Inference::DenseCrf};
  std::vector<SimOrder> orders{SimOrder::Seq, SimOrder::Rnd};
  std::uint64_t seed = 0;
  int max_passes = 10;
  Protocol protocol;
  bool force = false;
  unsigned jobs = default_jobs();
};

inline int cmd_simulate(const SimulateOptions& o, std::ostream& out, std::ostream& err) {
  try {
    const auto suite = load_suite(o.images, o.gt, o.recordings);
    std::vector<Recording> sim_recs;
    for (const auto& it : suite) {
      const auto v = validate_for_simulation(it.recording);
      if (!v.empty() && !o.force)
        throw Error(it.stem + ": action " + std::to_string(v.front().index) + " is " + v.front().reason +
                    " (use --force to strip)");
      sim_recs.push_back(v.empty() ? it.recording : strip_for_simulation(it.recording));
    }
    std::vector<std::size_t> action_counts;
    for (const auto& it : suite) action_counts.push_back(it.recording.actions.size());

    std::vector<SummaryRow> rows;
    auto emit = [&](const std::string& config, const std::vector<Timeline>& raw) {
      const fs::path dir = o.out / "timelines" / config;
      fs::create_directories(dir);
      std::vector<Timeline> processed;
      for (std::size_t i = 0; i < suite.size(); ++i) {
        write_text(dir / (suite[i].stem + ".csv"), timeline_csv(raw[i]));
        processed.push_back(apply_protocol(raw[i], o.protocol));
      }
      fs::create_directories(o.out / "curves");
      write_text(o.out / "curves" / (config + ".csv"), curve_csv(build_curve(processed)));
      rows.push_back(summarize(config, processed, action_counts));
    };

    // manual baseline: the full recording, no assistant
    {
      std::vector<Timeline> raw(suite.size());
      parallel_for(suite.size(), o.jobs, [&](std::size_t i) {
        raw[i] = replay_manual(suite[i].recording, suite[i].gt, o.protocol.cap_pauses).timeline;
      });
      emit("manual", raw);
    }
    for (Inference inf : o.inference) {
      const AssistantConfig ac = o.assistant.config(inf);
      const Assistant assistant(ac);
      for (SimOrder order : o.orders) {
        const std::string config = std::string(to_string(inf)) + "-" + to_string(order);
        std::vector<Timeline> raw(suite.size());
        parallel_for(suite.size(), o.jobs, [&](std::size_t i) {
          SimConfig sc;
          sc.order = order;
          sc.seed = seed_for(o.seed, suite[i].stem);
          sc.max_passes = o.max_passes;
          sc.assistant = ac;
          sc.latency = o.protocol.latency;
          sc.cap_pauses = o.protocol.cap_pauses;
          raw[i] = simulate_assisted(sim_recs[i], suite[i].image, suite[i].gt, sc, assistant).timeline;
        });
        for (std::size_t i = 0; i < suite.size(); ++i)
          if (sim_recs[i].actions.size() != suite[i].recording.actions.size())
            write_recording(sim_recs[i], o.out / "timelines" / config / (suite[i].stem + ".rec"));
        emit(config, raw);
      }
    }
    write_text(o.out / "summary.csv", summary_csv(rows));
    print_summary(out, rows);
    return 0;
  } catch (const std::exception& e) {
    err << "simulate: " << e.what() << '\n';
    return 1;
  }
}

// ------------------------------------------------------------------- eval

struct EvalOptions {
  fs::path timelines;  // directory of per-configuration subdirectories
  fs::path recordings;
  fs::path gt;
  fs::path out;
  Protocol protocol;
};

// Re-derives action durations from the recording under the requested pause
// rule; skipped actions stay free.
inline Timeline retime(const Timeline& t, const Recording& rec, bool cap) {
  const auto d = threshold_pauses(rec, cap);
  Timeline out = t;
  for (auto& e : out.events) {
    if (e.is_propagation()) continue;
    if (e.action_index < 0 || static_cast<std::size_t>(e.action_index) >= d.size())
      throw Error("timeline does not match recording");
    e.duration_s = e.executed ? d[static_cast<std::size_t>(e.action_index)] : 0.0;
  }
  out.recompute_cumulative();
  return out;
}

inline int cmd_eval(const EvalOptions& o, std::ostream& out, std::ostream& err) {
  try {
    std::vector<SummaryRow> rows;
    fs::create_directories(o.out);
    auto finish = [&](const std::string& config, const std::vector<Timeline>& timelines,
                      const std::vector<std::size_t>& counts) {
      std::vector<Timeline> processed;
      for (const auto& t : timelines) processed.push_back(apply_protocol(t, o.protocol));
      write_text(o.out / (config + ".csv"), curve_csv(build_curve(processed)));
      rows.push_back(summarize(config, processed, counts));
    };

    if (o.timelines.empty()) {
      // manual logs straight from recordings
      if (o.recordings.empty() || o.gt.empty()) throw Error("need --timelines or --recordings with --gt");
      std::vector<Timeline> tls;
      std::vector<std::size_t> counts;
      for (const auto& stem : list_stems(o.recordings, ".rec")) {
        const auto rec = read_recording(o.recordings / (stem + ".rec"));
        const auto gt = load_ground_truth(o.gt / (stem + ".png"));
        tls.push_back(replay_manual(rec, gt, o.protocol.cap_pauses).timeline);
        counts.push_back(rec.actions.size());
      }
      if (tls.empty()) throw Error("no recordings in " + o.recordings.string());
      finish("manual", tls, counts);
    } else {
      std::vector<fs::path> dirs;
      for (const auto& e : fs::directory_iterator(o.timelines))
        if (e.is_directory()) dirs.push_back(e.path());
      std::sort(dirs.begin(), dirs.end());
      if (dirs.empty()) throw Error("no timeline directories in " + o.timelines.string());
      for (const auto& dir : dirs) {
        std::vector<Timeline> tls;
        std::vector<std::size_t> counts;
        for (const auto& stem : list_stems(dir, ".csv")) {
          Timeline t = parse_timeline_csv(read_text(dir / (stem + ".csv")));
          std::optional<Recording> rec;
          if (fs::exists(dir / (stem + ".rec")))
            rec = read_recording(dir / (stem + ".rec"));
          else if (!o.recordings.empty() && fs::exists(o.recordings / (stem + ".rec")))
            rec = read_recording(o.recordings / (stem + ".rec"));
          if (rec) {
            t = retime(t, *rec, o.protocol.cap_pauses);
          } else if (!o.protocol.cap_pauses) {
            throw Error("--no-pause-cap needs the recordings (--recordings)");
          }
          std::size_t n = 0;
          if (rec)
            n = rec->actions.size();
          else
            for (const auto& e : t.events) n = std::max(n, static_cast<std::size_t>(e.action_index + 1));
          counts.push_back(n);
          tls.push_back(std::move(t));
        }
        if (!tls.empty()) finish(dir.filename().string(), tls, counts);
      }
    }
    write_text(o.out / "summary.csv", summary_csv(rows));
    print_summary(out, rows);
    return 0;
  } catch (const std::exception& e) {
    err << "eval: " << e.what() << '\n';
    return 1;
  }
}

// ------------------------------------------------------------- gridsearch

struct GridOptions {
  fs::path images, gt, recordings, out;
  AssistantOptions assistant;
  std::vector<double> alpha{5.0};
  std::vector<double> theta_gamma{9.0};
  std::vector<double> theta_alpha{3600.0};
  std::vector<double> theta_beta{507.0};
  std::vector<double> unary_scale{1.0};
  int seed_strokes = 0;  // 0: the first stroke of every label
  unsigned jobs = default_jobs();
};

// Seed annotation for grid search: the first `n` strokes, or with n = 0 the
// first stroke of each label.
inline AnnotationState seed_state(const Recording& rec, int n) {
  AnnotationState s(rec.width, rec.height);
  std::set<LabelId> seen;
  int applied = 0;
  for (const auto& a : rec.actions) {
    if (!a.is_stroke() || a.mode != StrokeMode::Normal) continue;
    if (n > 0 ? applied >= n : seen.contains(a.label)) continue;
    apply_action(s, a);
    seen.insert(a.label);
    ++applied;
  }
  return s;
}

struct GridResult {
  CrfParams params;
  double mean_aiou = 0.0;
  double mean_sq = 0.0;
};

inline std::vector<GridResult> run_gridsearch(const std::vector<SuiteItem>& suite, const GridOptions& o) {
  std::vector<CrfParams> grid;
  for (double a : o.alpha)
    for (double tg : o.theta_gamma)
      for (double ta : o.theta_alpha)
        for (double tb : o.theta_beta)
          for (double us : o.unary_scale) {
            CrfParams p = o.assistant.crf;
            p.alpha = a, p.theta_gamma = tg, p.theta_alpha = ta, p.theta_beta = tb, p.unary_scale = us;
            p.validate();
            grid.push_back(p);
          }
  if (grid.empty()) throw Error("empty grid");
  const AssistantConfig base = o.assistant.config(Inference::DenseCrf);
  const Assistant assistant(base);
  std::vector<GridResult> results(grid.size());
  for (std::size_t g = 0; g < grid.size(); ++g) results[g].params = grid[g];
  std::vector<std::vector<Quality>> q(suite.size(), std::vector<Quality>(grid.size()));
  parallel_for(suite.size(), o.jobs, [&](std::size_t i) {
    const auto& it = suite[i];
    const AnnotationState s = seed_state(it.recording, o.seed_strokes);
    if (s.reference.count_nonzero() == 0) throw Error(it.stem + ": no seed strokes");
    const auto prep = assistant.prepare(it.image);
    for (std::size_t g = 0; g < grid.size(); ++g) {
      AssistantConfig cfg = base;
      cfg.crf = grid[g];
      AnnotationState t = s;
      t.predicted = propagate(s, it.image, *prep.field, prep.d0, cfg);
      q[i][g] = evaluate(t.displayed(), it.gt);
    }
  });
  for (std::size_t g = 0; g < grid.size(); ++g) {
    for (std::size_t i = 0; i < suite.size(); ++i) {
      results[g].mean_aiou += q[i][g].aiou;
      results[g].mean_sq += q[i][g].sq;
    }
    results[g].mean_aiou /= static_cast<double>(suite.size());
    results[g].mean_sq /= static_cast<double>(suite.size());
  }
  std::stable_sort(results.begin(), results.end(),
                   [](const GridResult& a, const GridResult& b) { return a.mean_aiou > b.mean_aiou; });
  return results;
}

inline std::string grid_csv(const std::vector<GridResult>& r) {
  std::string s = "rank,alpha,theta_gamma,theta_alpha,theta_beta,unary_scale,iterations,mean_aiou,mean_sq\n";
  for (std::size_t i = 0; i < r.size(); ++i) {
    const auto& p = r[i].params;
    s += std::to_string(i + 1) + ',' + format_number(p.alpha) + ',' + format_number(p.theta_gamma) + ',' +
         format_number(p.theta_alpha) + ',' + format_number(p.theta_beta) + ',' + format_number(p.unary_scale) + ',' +
         std::to_string(p.iterations) + ',' + format_number(r[i].mean_aiou) + ',' + format_number(r[i].mean_sq) + '\n';
  }
  return s;
}

inline int cmd_gridsearch(const GridOptions& o, std::ostream& out, std::ostream& err) {
  try {
    const auto suite = load_suite(o.images, o.gt, o.recordings);
    const auto results = run_gridsearch(suite, o);
    fs::create_directories(o.out);
    write_text(o.out / "gridsearch.csv", grid_csv(results));
    out << "best: alpha=" << results.front().params.alpha << " theta_gamma=" << results.front().params.theta_gamma
        << " theta_alpha=" << results.front().params.theta_alpha << " theta_beta=" << results.front().params.theta_beta
        << " unary_scale=" << results.front().params.unary_scale << " mean aIoU " << fixed(results.front().mean_aiou)
        << '\n';
    return 0;
  } catch (const std::exception& e) {
    err << "gridsearch: " << e.what() << '\n';
    return 1;
  }
}

// ------------------------------------------------------------------ synth

struct SynthOptions {
  fs::path out;
  int scenes = 10;
  int textures = 20;
  int size = 64;
  std::uint64_t seed = 0;
};

// Writes images/, gt/, recordings/ (band scenes) and train/{images,gt}
// (texture dataset).
inline int cmd_synth(const SynthOptions& o, std::ostream& out, std::ostream& err) {
  try {
    for (const char* d : {"images", "gt", "recordings", "train/images", "train/gt"}) fs::create_directories(o.out / d);
    SceneParams sp;
    sp.size = o.size;
    for (int i = 0; i < o.scenes; ++i) {
      const std::string stem = "scene_" + std::to_string(i);
      Scene sc = make_band_scene(seed_for(o.seed, stem), sp);
      sc.recording.image = stem + ".png";
      save_image(sc.image, o.out / "images" / (stem + ".png"));
      save_ground_truth(sc.gt, o.out / "gt" / (stem + ".png"));
      write_recording(sc.recording, o.out / "recordings" / (stem + ".rec"));
    }
    const auto tex = make_texture_dataset(static_cast<std::size_t>(o.textures), o.size, seed_for(o.seed, "textures"));
    for (std::size_t i = 0; i < tex.size(); ++i) {
      const std::string stem = "texture_" + std::to_string(i);
      save_image(tex[i].image, o.out / "train/images" / (stem + ".png"));
      save_label_map(tex[i].labels, o.out / "train/gt" / (stem + ".png"));
    }
    out << "wrote " << o.scenes << " scenes and " << o.textures << " texture images to " << o.out.string() << '\n';
    return 0;
  } catch (const std::exception& e) {
    err << "synth: " << e.what() << '\n';
    return 1;
  }
}

}  // namespace magicpaint::cli
