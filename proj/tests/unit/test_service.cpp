#include <thread>

#include <gtest/gtest.h>

#include "magicpaint/service/server.hpp"
#include "magicpaint/service/session.hpp"
#include "magicpaint/sim/simulate.hpp"
#include "magicpaint/synth/synthetic.hpp"
#include "test_util.hpp"

using namespace magicpaint;
using nlohmann::json;

namespace {

std::string png_body(const Image& img) {
  const auto b = encode_image(img);
  return std::string(b.begin(), b.end());
}

std::string create(SessionApi& api, const Image& img) {
  const auto r = api.handle("POST", "/sessions", png_body(img), "image/png");
  EXPECT_EQ(r.status, 200) << r.body;
  return json::parse(r.body).at("id").get<std::string>();
}

std::string stroke_json(LabelId label, std::vector<Point> pts, int radius, const std::string& mode = "normal") {
  json p = json::array();
  for (Point q : pts) p.push_back({q.x, q.y});
  return json{{"kind", "stroke_freeform"}, {"mode", mode}, {"label", label}, {"radius", radius}, {"points", p}}.dump();
}

AssistantConfig fast_config() {
  AssistantConfig c;
  c.inference = Inference::NearestNeighbor;
  return c;
}

}  // namespace

TEST(Rle, RoundTrip) {
  LabelMap m(7, 3);
  m[2] = m[3] = 4;
  m[20] = 9;
  const auto rle = rle_encode(m);
  EXPECT_EQ(rle_decode(rle, 7, 3), m);
  std::size_t total = 0;
  for (const auto& run : rle) total += run.at(1).get<std::size_t>();
  EXPECT_EQ(total, 21u);
  EXPECT_THROW(rle_decode(rle, 7, 4), Error);
}

TEST(Service, CreateSessions) {
  SessionApi api(fast_config());
  const Image img = random_image(16, 12, 1);
  const auto a = create(api, img), b = create(api, img);
  EXPECT_NE(a, b);
  auto bad = png_body(img);
  bad.resize(bad.size() / 2);
  EXPECT_EQ(api.handle("POST", "/sessions", bad, "image/png").status, 400);
  EXPECT_EQ(api.handle("POST", "/sessions", "{\"image\": \"/nonexistent.png\"}", "application/json").status, 400);
  EXPECT_EQ(api.handle("POST", "/sessions", png_body(img), "image/png", {{"embedding", "sift"}}).status, 400);
  EXPECT_EQ(api.handle("POST", "/sessions", png_body(img), "image/png",
                       {{"embedding", "neural"}, {"weights", "/nonexistent.mpw"}})
                .status,
            400);
}

TEST(Service, CreateFromPath) {
  TempDir dir;
  save_image(random_image(10, 8, 2), dir / "x.png");
  SessionApi api(fast_config());
  const auto r = api.handle("POST", "/sessions", json{{"image", (dir / "x.png").string()}}.dump(), "application/json");
  ASSERT_EQ(r.status, 200);
  const auto id = json::parse(r.body).at("id").get<std::string>();
  const auto st = json::parse(api.handle("GET", "/sessions/" + id + "/state", "").body);
  EXPECT_EQ(st["image"], "x.png");
  EXPECT_EQ(st["width"], 10);
}

TEST(Service, FreshStateAndRevisions) {
  SessionApi api(fast_config());
  const Scene sc = make_band_scene(2);
  const auto id = create(api, sc.image);
  auto st = json::parse(api.handle("GET", "/sessions/" + id + "/state", "").body);
  EXPECT_EQ(st["revision"], 0);
  EXPECT_EQ(rle_decode(st["reference"], 64, 64).count_nonzero(), 0u);
  EXPECT_EQ(rle_decode(st["predicted"], 64, 64).count_nonzero(), 0u);
  for (int k = 1; k <= 3; ++k) {
    const auto r = api.handle("POST", "/sessions/" + id + "/actions", format_action(sc.recording.actions[k - 1]));
    ASSERT_EQ(r.status, 200) << r.body;
    EXPECT_EQ(json::parse(r.body)["revision"], k);
  }
}

TEST(Service, StrokePropagatesAndUndoInverts) {
  SessionApi api(fast_config());
  const Scene sc = make_band_scene(4);
  const auto id = create(api, sc.image);
  const auto r1 = json::parse(api.handle("POST", "/sessions/" + id + "/actions", format_action(sc.recording.actions[0])).body);
  EXPECT_TRUE(r1["propagated"].get<bool>());
  const auto predicted = rle_decode(r1["predicted"], 64, 64);
  EXPECT_GT(predicted.count_nonzero(), 0u);
  const auto delta = r1["reference_delta"];
  EXPECT_GT(delta.size(), 0u);

  const auto r2 = json::parse(api.handle("POST", "/sessions/" + id + "/actions", R"({"kind":"undo"})").body);
  EXPECT_EQ(r2["revision"], 2);
  EXPECT_FALSE(r2["noop"].get<bool>());
  ASSERT_EQ(r2["reference_delta"].size(), delta.size());
  for (std::size_t i = 0; i < delta.size(); ++i) {
    EXPECT_EQ(r2["reference_delta"][i][0], delta[i][0]);
    EXPECT_EQ(r2["reference_delta"][i][1], 0);
  }
  EXPECT_EQ(rle_decode(r2["predicted"], 64, 64).count_nonzero(), 0u);

  // empty undo stack: accepted, recorded, no state change
  api.handle("POST", "/sessions/" + id + "/actions", R"({"kind":"undo"})");
  const auto r3 = json::parse(api.handle("POST", "/sessions/" + id + "/actions", R"({"kind":"undo"})").body);
  EXPECT_TRUE(r3["noop"].get<bool>());
  const auto rec = parse_recording(api.handle("GET", "/sessions/" + id + "/recording", "").body);
  EXPECT_EQ(rec.actions.size(), 4u);
}

TEST(Service, Errors) {
  SessionApi api(fast_config());
  const auto id = create(api, random_image(8, 8, 3));
  EXPECT_EQ(api.handle("POST", "/sessions/nope/actions", stroke_json(1, {{1, 1}}, 1)).status, 404);
  EXPECT_EQ(api.handle("GET", "/sessions/nope/state", "").status, 404);
  EXPECT_EQ(api.handle("GET", "/elsewhere", "").status, 404);
  EXPECT_EQ(api.handle("POST", "/sessions/" + id + "/actions", stroke_json(1, {{8, 1}}, 1)).status, 422);
  EXPECT_EQ(api.handle("POST", "/sessions/" + id + "/actions", stroke_json(0, {{1, 1}}, 1)).status, 422);
  EXPECT_EQ(api.handle("POST", "/sessions/" + id + "/actions", "garbage").status, 422);
  EXPECT_EQ(api.handle("POST", "/sessions/" + id + "/actions", R"({"kind":"freeze_class","label":3,"on":true})").status,
            422);
  const auto st = json::parse(api.handle("GET", "/sessions/" + id + "/state", "").body);
  EXPECT_EQ(st["revision"], 0);
}

TEST(Service, ConcurrentWriterGets409) {
  SessionApi api(fast_config());
  const auto id = create(api, random_image(16, 16, 4));
  std::atomic<bool> inside{false}, release{false};
  api.set_clock([&](const Session&) {
    inside = true;
    while (!release) std::this_thread::yield();
    return std::int64_t{0};
  });
  std::thread writer([&] { api.handle("POST", "/sessions/" + id + "/actions", stroke_json(1, {{2, 2}}, 1)); });
  while (!inside) std::this_thread::yield();
  EXPECT_EQ(api.handle("POST", "/sessions/" + id + "/actions", stroke_json(1, {{3, 3}}, 1)).status, 409);
  release = true;
  writer.join();
}

TEST(Service, ServerTimestampsAreMonotonic) {
  SessionApi api(fast_config());
  std::int64_t now = 0;
  api.set_clock([&](const Session&) { return now; });
  const auto id = create(api, random_image(12, 12, 5));
  now = 700;
  api.handle("POST", "/sessions/" + id + "/actions", stroke_json(1, {{2, 2}}, 1));
  now = 500;  // clock stepping back must not break the recording
  api.handle("POST", "/sessions/" + id + "/actions", stroke_json(2, {{6, 6}}, 1));
  const auto rec = parse_recording(api.handle("GET", "/sessions/" + id + "/recording", "").body);
  ASSERT_EQ(rec.actions.size(), 2u);
  EXPECT_EQ(rec.actions[0].t_ms, 700);
  EXPECT_EQ(rec.actions[1].t_ms, 700);
}

TEST(Service, FreezeKeepsPredictionsAndFillPromotes) {
  SessionApi api(fast_config());
  Image img(20, 10);
  for (int y = 0; y < 10; ++y)
    for (int x = 0; x < 20; ++x) img.at(x, y) = x < 10 ? Rgb{220, 30, 30} : Rgb{30, 30, 220};
  const auto id = create(api, img);
  const auto path = "/sessions/" + id + "/actions";
  api.handle("POST", path, stroke_json(1, {{2, 2}}, 1));
  api.handle("POST", path, R"({"kind":"freeze_class","label":1,"on":true})");
  const auto before = rle_decode(json::parse(api.handle("GET", "/sessions/" + id + "/state", "").body)["predicted"], 20, 10);
  api.handle("POST", path, stroke_json(2, {{15, 5}}, 1));
  const auto st = json::parse(api.handle("GET", "/sessions/" + id + "/state", "").body);
  EXPECT_EQ(st["frozen"], json::array({1}));
  const auto after = rle_decode(st["predicted"], 20, 10);
  for (std::size_t k = 0; k < after.size(); ++k)
    if (before[k] == 1) { EXPECT_EQ(after[k], 1); }
  // fill-click on the predicted left half promotes it to reference
  api.handle("POST", path, R"({"kind":"flood_fill","label":1,"seed":[5,5]})");
  const auto ref = rle_decode(json::parse(api.handle("GET", "/sessions/" + id + "/state", "").body)["reference"], 20, 10);
  for (int y = 0; y < 10; ++y)
    for (int x = 0; x < 10; ++x) EXPECT_EQ(ref.at(x, y), 1);
}

TEST(Service, ExportReplaysBitExactly) {
  SessionApi api(fast_config());
  const Scene sc = make_band_scene(9);
  const auto id = create(api, sc.image);
  std::mt19937_64 rng(3);
  for (int i = 0; i < 5; ++i) {
    api.handle("POST", "/sessions/" + id + "/actions", format_action(sc.recording.actions[i]));
    if (i == 2) api.handle("POST", "/sessions/" + id + "/actions", R"({"kind":"undo"})");
  }
  api.handle("POST", "/sessions/" + id + "/actions", R"({"kind":"redo"})");
  const auto text = api.handle("GET", "/sessions/" + id + "/recording", "").body;
  const auto rec = parse_recording(text);
  EXPECT_EQ(rec.actions.size(), 7u);
  const auto st = json::parse(api.handle("GET", "/sessions/" + id + "/state", "").body);
  EXPECT_EQ(replay_manual(rec, sc.gt).state.reference, rle_decode(st["reference"], 64, 64));
}

TEST(Service, ExportWithPromotionsReplaysBitExactly) {
  SessionApi api(fast_config());
  const Scene sc = make_band_scene(12);
  const auto id = create(api, sc.image);
  const std::string path = "/sessions/" + id + "/actions";
  api.handle("POST", path, format_action(sc.recording.actions[0]));
  api.handle("POST", path, format_action(sc.recording.actions[1]));
  // fill and freeze_fg on a predicted layer promote predictions
  auto st = json::parse(api.handle("GET", "/sessions/" + id + "/state", "").body);
  const auto ref = rle_decode(st["reference"], 64, 64), pred = rle_decode(st["predicted"], 64, 64);
  Point seed{-1, -1};
  for (int y = 0; y < 64 && seed.x < 0; ++y)
    for (int x = 0; x < 64; ++x)
      if (ref.at(x, y) == 0 && pred.at(x, y) != 0) {
        seed = {x, y};
        break;
      }
  ASSERT_GE(seed.x, 0);
  RecordingAction fill;
  fill.kind = ActionKind::FloodFill;
  fill.label = 9;
  fill.seed = seed;
  EXPECT_EQ(api.handle("POST", path, format_action(fill)).status, 200);
  RecordingAction fg = sc.recording.actions[5];
  fg.mode = StrokeMode::FreezeFg;
  fg.radius = 6;
  EXPECT_EQ(api.handle("POST", path, format_action(fg)).status, 200);
  api.handle("POST", path, R"({"kind":"undo"})");
  api.handle("POST", path, R"({"kind":"redo"})");

  const auto rec = parse_recording(api.handle("GET", "/sessions/" + id + "/recording", "").body);
  ASSERT_EQ(rec.actions.size(), 6u);
  EXPECT_TRUE(rec.actions[0].predicted.empty());
  EXPECT_FALSE(rec.actions[2].predicted.empty());
  st = json::parse(api.handle("GET", "/sessions/" + id + "/state", "").body);
  const auto replay = replay_manual(rec, sc.gt).state;
  EXPECT_EQ(replay.reference, rle_decode(st["reference"], 64, 64));
  EXPECT_EQ(replay.predicted.count_nonzero(), 0u);

  // the same recording without snapshots loses the promotions
  Recording bare = rec;
  for (auto& a : bare.actions) a.predicted.clear();
  EXPECT_NE(replay_manual(bare, sc.gt).state.reference, replay.reference);
}

TEST(Service, ImageEndpoint) {
  SessionApi api(fast_config());
  const Image img = random_image(9, 7, 6);
  const auto id = create(api, img);
  const auto r = api.handle("GET", "/sessions/" + id + "/image", "");
  EXPECT_EQ(r.content_type, "image/png");
  EXPECT_EQ(decode_image(std::span(reinterpret_cast<const unsigned char*>(r.body.data()), r.body.size())), img);
}

TEST(Service, HttpRoundTrip) {
  SessionApi api(fast_config());
  httplib::Server server;
  bind_routes(server, api);
  const int port = server.bind_to_any_port("127.0.0.1");
  ASSERT_GT(port, 0);
  std::thread t([&] { server.listen_after_bind(); });
  server.wait_until_ready();

  httplib::Client client("127.0.0.1", port);
  const Image img = random_image(12, 10, 7);
  auto r = client.Post("/sessions", png_body(img), "image/png");
  ASSERT_TRUE(r);
  ASSERT_EQ(r->status, 200);
  const auto id = json::parse(r->body)["id"].get<std::string>();
  r = client.Post("/sessions/" + id + "/actions", stroke_json(3, {{1, 1}, {8, 1}}, 1), "application/json");
  ASSERT_TRUE(r);
  EXPECT_EQ(r->status, 200);
  r = client.Get("/sessions/" + id + "/state");
  ASSERT_TRUE(r);
  EXPECT_EQ(json::parse(r->body)["revision"], 1);
  r = client.Get("/sessions/unknown/state");
  ASSERT_TRUE(r);
  EXPECT_EQ(r->status, 404);
  server.stop();
  t.join();
}
