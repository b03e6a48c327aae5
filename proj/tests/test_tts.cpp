#include <doctest.h>

#include <atomic>
#include <filesystem>
#include <thread>

#include <httplib.h>
#include <json.hpp>

#include "cbasr/audio.hpp"
#include "cbasr/error.hpp"
#include "cbasr/mock_backend.hpp"
#include "cbasr/storage.hpp"
#include "cbasr/text.hpp"
#include "cbasr/tts.hpp"
#include "test_util.hpp"

using namespace cbasr;
using cbasr::testing::TempDir;
using cbasr::testing::throws_kind;
namespace fs = std::filesystem;

namespace {

RetryPolicy fast_retry() {
  RetryPolicy p;
  p.max_attempts = 3;
  p.initial_backoff_s = 0.001;
  return p;
}

// Fails the first `fail_count` calls, then delegates to the mock.
class FlakyTts : public TtsClient {
 public:
  explicit FlakyTts(int fail_count) : remaining_failures_(fail_count) {}
  AudioBuffer synthesize(const TtsRequest& req) override {
    ++calls_;
    if (remaining_failures_-- > 0) {
      throw Error(ErrorKind::kTransport, "synthetic outage");
    }
    return mock_.synthesize(req);
  }
  int calls() const { return calls_; }

 private:
  MockTtsClient mock_;
  int remaining_failures_;
  int calls_ = 0;
};

}  // namespace

TEST_CASE("mock synthesis duration") {
  MockTtsClient tts;
  AudioBuffer ab = tts.synthesize({"ab", "voice-a", 1.0});
  CHECK(ab.samples.size() == 3200);
  CHECK(ab.duration_s() == doctest::Approx(0.2));
  CHECK(throws_kind(ErrorKind::kInput, [&] { tts.synthesize({"  ", "v", 1.0}); }));
  CHECK(throws_kind(ErrorKind::kInput, [&] { tts.synthesize({"a", "v", 0.0}); }));
}

TEST_CASE("cache keys separate voice and rate") {
  TtsRequest a{"词", "voice-a", 1.0};
  TtsRequest b{"词", "voice-b", 1.0};
  TtsRequest c{"词", "voice-a", 1.25};
  CHECK(tts_cache_key(a) != tts_cache_key(b));
  CHECK(tts_cache_key(a) != tts_cache_key(c));
  CHECK(tts_cache_key(a) == tts_cache_key(TtsRequest{"词", "voice-a", 1.0}));
}

TEST_CASE("caching client is idempotent and bit exact") {
  TempDir dir("tts_cache");
  CachingTtsClient client(std::make_shared<MockTtsClient>(), dir.str(),
                          fast_retry());
  TtsRequest req{"金融机构", "voice-zh", 1.0};

  CHECK(!client.cached(req));
  AudioBuffer first = client.synthesize(req);
  CHECK(client.cached(req));
  AudioBuffer second = client.synthesize(req);
  CHECK(first.samples == second.samples);

  // Layout: <cache>/<first2hex>/<hash>.wav with a JSON sidecar.
  std::string key = tts_cache_key(req);
  fs::path wav = dir.path() / key.substr(0, 2) / (key + ".wav");
  CHECK(fs::exists(wav));
  fs::path sidecar = fs::path(wav).replace_extension(".json");
  REQUIRE(fs::exists(sidecar));
  auto meta = nlohmann::json::parse(read_text_file(sidecar.string()));
  CHECK(meta.at("duration_s").get<double>() ==
        doctest::Approx(first.duration_s()));
  CHECK(meta.at("voice") == "voice-zh");
}

TEST_CASE("caching client retries with backoff") {
  TempDir dir("tts_retry");
  auto flaky = std::make_shared<FlakyTts>(2);
  CachingTtsClient client(flaky, dir.str(), fast_retry());
  AudioBuffer audio = client.synthesize({"ab", "v", 1.0});
  CHECK(audio.samples.size() == 3200);
  CHECK(flaky->calls() == 3);
}

TEST_CASE("caching client gives up after max attempts") {
  TempDir dir("tts_fail");
  auto flaky = std::make_shared<FlakyTts>(100);
  CachingTtsClient client(flaky, dir.str(), fast_retry());
  CHECK(throws_kind(ErrorKind::kTransport,
                    [&] { client.synthesize({"ab", "v", 1.0}); }));
  CHECK(flaky->calls() == 3);
}

TEST_CASE("batch synthesis preserves order and isolates failures") {
  MockTtsClient tts;
  std::vector<TtsRequest> reqs = {
      {"a", "v", 1.0}, {"bb", "v", 1.0}, {"ccc", "v", 1.0}};
  TtsBatchResult res = synthesize_batch(tts, reqs, 2);
  REQUIRE(res.buffers.size() == 3);
  CHECK(res.failures.empty());
  CHECK(res.buffers[0].samples.size() == 1600);
  CHECK(res.buffers[1].samples.size() == 3200);
  CHECK(res.buffers[2].samples.size() == 4800);
  CHECK(mock_tts_decode(res.buffers[2]) == "ccc");

  SUBCASE("empty text fails only its own index") {
    reqs[1].text = "  ";
    TtsBatchResult partial = synthesize_batch(tts, reqs, 2);
    REQUIRE(partial.failures.size() == 1);
    CHECK(partial.failures[0].index == 1);
    CHECK(!partial.ok(1));
    CHECK(partial.ok(0));
    CHECK(partial.ok(2));
    CHECK(partial.buffers[0].samples.size() == 1600);
    CHECK(partial.buffers[2].samples.size() == 4800);
  }

  SUBCASE("parallelism must be positive") {
    CHECK(throws_kind(ErrorKind::kInput,
                      [&] { synthesize_batch(tts, reqs, 0); }));
  }
}

TEST_CASE("batch synthesis handles a training-vocabulary-sized batch") {
  // 20k words is the scale a full vocabulary build runs at.
  MockTtsClient tts;
  std::vector<TtsRequest> reqs;
  reqs.reserve(20000);
  for (int i = 0; i < 20000; ++i) {
    reqs.push_back({utf8_encode({static_cast<char32_t>(0x4E00 + (i % 2000)),
                                 static_cast<char32_t>(0x4E00 + (i / 2000))}),
                    "voice-zh", 1.0});
  }
  TtsBatchResult res = synthesize_batch(tts, reqs, 4);
  REQUIRE(res.buffers.size() == 20000);
  CHECK(res.failures.empty());
  CHECK(mock_tts_decode(res.buffers[0]) == reqs[0].text);
  CHECK(mock_tts_decode(res.buffers[19999]) == reqs[19999].text);
}

TEST_CASE("http tts client with retry against a flaky server") {
  std::atomic<int> failures_left{2};
  httplib::Server svr;
  svr.Post("/v1/synthesize",
           [&](const httplib::Request& req, httplib::Response& res) {
             if (failures_left.fetch_sub(1) > 0) {
               res.status = 503;
               res.set_content("warming up", "text/plain");
               return;
             }
             auto body = nlohmann::json::parse(req.body);
             AudioBuffer audio = mock_tts(body.at("text").get<std::string>());
             res.set_content(wav_bytes(audio), "audio/wav");
           });
  int port = svr.bind_to_any_port("127.0.0.1");
  std::thread listener([&] { svr.listen_after_bind(); });
  svr.wait_until_ready();

  {
    TempDir dir("tts_http");
    auto http = std::make_shared<HttpTtsClient>(
        "http://127.0.0.1:" + std::to_string(port));
    CachingTtsClient client(http, dir.str(), fast_retry());
    AudioBuffer audio = client.synthesize({"你好", "voice-zh", 1.0});
    CHECK(mock_tts_decode(audio) == "你好");
    // Second call is a cache hit, no server round trip needed.
    svr.stop();
    listener.join();
    AudioBuffer again = client.synthesize({"你好", "voice-zh", 1.0});
    CHECK(again.samples == audio.samples);
  }
}
