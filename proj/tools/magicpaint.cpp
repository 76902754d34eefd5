#include <iostream>

#include "CLI11.hpp"
#include "magicpaint/cli/commands.hpp"
#include "magicpaint/service/server.hpp"

using namespace magicpaint;
using namespace magicpaint::cli;

namespace {

void add_protocol(CLI::App* cmd, std::string& latency, bool& no_cap, bool& no_skip) {
  cmd->add_option("--latency", latency, "propagation latency model: best or fixed:S")->capture_default_str();
  cmd->add_flag("--no-pause-cap", no_cap, "charge pauses between actions uncapped");
  cmd->add_flag("--no-skip-redundant", no_skip, "keep the time of actions that did not improve aIoU");
}

Protocol make_protocol(const std::string& latency, bool no_cap, bool no_skip) {
  return {parse_latency(latency), !no_cap, !no_skip};
}

void add_assistant(CLI::App* cmd, AssistantOptions& a) {
  cmd->add_option("--embedding", a.embedding, "hist or neural")
      ->check(CLI::IsMember({"hist", "neural"}))
      ->capture_default_str();
  cmd->add_option("--weights", a.weights, "network weights for --embedding neural");
  cmd->add_option("--d0", a.d0, "similarity threshold (default: estimated per image)");
  cmd->add_option("--crf-alpha", a.crf.alpha)->capture_default_str();
  cmd->add_option("--crf-theta-gamma", a.crf.theta_gamma)->capture_default_str();
  cmd->add_option("--crf-theta-alpha", a.crf.theta_alpha)->capture_default_str();
  cmd->add_option("--crf-theta-beta", a.crf.theta_beta)->capture_default_str();
  cmd->add_option("--crf-iterations", a.crf.iterations)->capture_default_str();
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"magicpaint: assisted label painting tools"};
  app.require_subcommand(1);

  // train
  TrainOptions train;
  auto* t = app.add_subcommand("train", "train the embedding network");
  t->add_option("--images", train.images)->required();
  t->add_option("--gt", train.gt)->required();
  t->add_option("--out", train.out)->required();
  t->add_option("--net", train.net, "full or small")->check(CLI::IsMember({"full", "small"}))->capture_default_str();
  t->add_option("--widths", train.widths, "hidden layer widths (overrides --net)")->delimiter(',');
  t->add_option("--dilations", train.dilations, "one dilation per layer (overrides --net)")->delimiter(',');
  t->add_option("--output-dim", train.output_dim);
  t->add_option("--steps", train.train.steps)->capture_default_str();
  t->add_option("--lr", train.train.learning_rate)->capture_default_str();
  t->add_option("--batch", train.train.images_per_batch, "images per step")->capture_default_str();
  t->add_option("--pairs", train.train.pairs_per_image)->capture_default_str();
  t->add_option("--width", train.train.image_width, "resize width, 0 keeps the size")->capture_default_str();
  t->add_option("--height", train.train.image_height, "resize height, 0 keeps the size")->capture_default_str();
  t->add_option("--seed", train.train.seed)->capture_default_str();

  // simulate
  SimulateOptions sim;
  std::vector<std::string> sim_inference, sim_order;
  std::string sim_latency = "best";
  bool sim_no_cap = false, sim_no_skip = false;
  auto* s = app.add_subcommand("simulate", "replay recordings manually and with the assistant");
  s->add_option("--images", sim.images)->required();
  s->add_option("--gt", sim.gt)->required();
  s->add_option("--recordings", sim.recordings)->required();
  s->add_option("--out", sim.out)->required();
  add_assistant(s, sim.assistant);
  s->add_option("--inference", sim_inference, "1nn and/or densecrf (default both)")
      ->check(CLI::IsMember({"1nn", "densecrf"}));
  s->add_option("--order", sim_order, "seq and/or rnd (default both)")->check(CLI::IsMember({"seq", "rnd"}));
  s->add_option("--seed", sim.seed)->capture_default_str();
  s->add_option("--max-passes", sim.max_passes)->capture_default_str();
  s->add_option("--jobs", sim.jobs, "worker threads")->capture_default_str();
  s->add_flag("--force", sim.force, "strip actions the simulator cannot replay instead of failing");
  add_protocol(s, sim_latency, sim_no_cap, sim_no_skip);

  // eval
  EvalOptions ev;
  std::string ev_latency = "best";
  bool ev_no_cap = false, ev_no_skip = false;
  auto* e = app.add_subcommand("eval", "rebuild curves and summaries from timelines or recordings");
  e->add_option("--timelines", ev.timelines, "directory with one subdirectory of timelines per configuration");
  e->add_option("--recordings", ev.recordings);
  e->add_option("--gt", ev.gt);
  e->add_option("--out", ev.out)->required();
  add_protocol(e, ev_latency, ev_no_cap, ev_no_skip);

  // gridsearch
  GridOptions grid;
  auto* g = app.add_subcommand("gridsearch", "rank CRF parameters by aIoU after one propagation");
  g->add_option("--images", grid.images)->required();
  g->add_option("--gt", grid.gt)->required();
  g->add_option("--recordings", grid.recordings, "seed strokes come from these recordings")->required();
  g->add_option("--out", grid.out)->required();
  add_assistant(g, grid.assistant);
  g->add_option("--alpha", grid.alpha)->delimiter(',');
  g->add_option("--theta-gamma", grid.theta_gamma)->delimiter(',');
  g->add_option("--theta-alpha", grid.theta_alpha)->delimiter(',');
  g->add_option("--theta-beta", grid.theta_beta)->delimiter(',');
  g->add_option("--unary-scale", grid.unary_scale)->delimiter(',');
  g->add_option("--seed-strokes", grid.seed_strokes, "first N strokes; 0 = first stroke of each label")
      ->capture_default_str();
  g->add_option("--jobs", grid.jobs)->capture_default_str();

  // serve
  AssistantOptions srv;
  std::string host = "127.0.0.1", srv_inference = "densecrf";
  int port = 8080;
  auto* v = app.add_subcommand("serve", "run the session HTTP API");
  v->add_option("--host", host)->capture_default_str();
  v->add_option("--port", port)->capture_default_str();
  v->add_option("--inference", srv_inference)->check(CLI::IsMember({"1nn", "densecrf"}))->capture_default_str();
  add_assistant(v, srv);

  // synth
  SynthOptions syn;
  auto* y = app.add_subcommand("synth", "write a synthetic evaluation suite and training set");
  y->add_option("--out", syn.out)->required();
  y->add_option("--scenes", syn.scenes)->capture_default_str();
  y->add_option("--textures", syn.textures)->capture_default_str();
  y->add_option("--size", syn.size)->capture_default_str();
  y->add_option("--seed", syn.seed)->capture_default_str();

  CLI11_PARSE(app, argc, argv);

  try {
    if (t->parsed()) return cmd_train(train, std::cout, std::cerr);
    if (s->parsed()) {
      if (!sim_inference.empty()) {
        sim.inference.clear();
        for (const auto& i : sim_inference) sim.inference.push_back(parse_inference(i));
      }
      if (!sim_order.empty()) {
        sim.orders.clear();
        for (const auto& o : sim_order) sim.orders.push_back(parse_order(o));
      }
      sim.protocol = make_protocol(sim_latency, sim_no_cap, sim_no_skip);
      return cmd_simulate(sim, std::cout, std::cerr);
    }
    if (e->parsed()) {
      ev.protocol = make_protocol(ev_latency, ev_no_cap, ev_no_skip);
      return cmd_eval(ev, std::cout, std::cerr);
    }
    if (g->parsed()) return cmd_gridsearch(grid, std::cout, std::cerr);
    if (y->parsed()) return cmd_synth(syn, std::cout, std::cerr);
    if (v->parsed()) {
      SessionApi api(srv.config(parse_inference(srv_inference)));
      std::cout << "listening on " << host << ':' << port << std::endl;
      if (!run_server(api, host, port)) {
        std::cerr << "serve: cannot listen on " << host << ':' << port << '\n';
        return 1;
      }
      return 0;
    }
  } catch (const std::exception& ex) {
    std::cerr << ex.what() << '\n';
    return 1;
  }
  return 1;
}
