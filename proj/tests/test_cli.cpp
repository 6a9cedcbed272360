#include <gtest/gtest.h>

#include <sys/wait.h>

#include <array>
#include <cstdio>
#include <map>
#include <sstream>

#include "deskpipe/byte_io.hpp"
#include "deskpipe/container.hpp"
#include "support.hpp"

using namespace deskpipe;
using namespace deskpipe::testing;

namespace {

struct Run {
  int code = -1;
  std::string out;  // stdout and stderr interleaved
};

Run run(const std::string& args) {
  const std::string cmd = std::string(DESKPIPE_CLI_PATH) + " " + args + " 2>&1";
  Run r;
  FILE* p = ::popen(cmd.c_str(), "r");
  if (!p) return r;
  std::array<char, 4096> buf;
  std::size_t n;
  while ((n = std::fread(buf.data(), 1, buf.size(), p)) > 0) r.out.append(buf.data(), n);
  const int status = ::pclose(p);
  r.code = WIFEXITED(status) ? WEXITSTATUS(status) : -1;
  return r;
}

std::string q(const std::filesystem::path& p) { return "'" + p.string() + "'"; }

// "key=value" tokens from every line containing `anchor`.
std::map<std::string, std::string> fields(const std::string& text, const std::string& anchor) {
  std::map<std::string, std::string> out;
  std::istringstream lines(text);
  std::string line;
  while (std::getline(lines, line)) {
    if (line.find(anchor) == std::string::npos) continue;
    std::istringstream words(line);
    std::string w;
    while (words >> w) {
      const auto eq = w.find('=');
      if (eq != std::string::npos) out[w.substr(0, eq)] = w.substr(eq + 1);
    }
  }
  return out;
}

}  // namespace

TEST(Cli, GenThenInspectCounts) {
  TempDir dir;
  const auto g = run("gen --seed 42 --duration 10 --out " + q(dir / "s.owa"));
  ASSERT_EQ(g.code, 0) << g.out;
  EXPECT_TRUE(std::filesystem::exists(dir / "s.gops"));
  const auto i = run("inspect --summary --in " + q(dir / "s.owa"));
  ASSERT_EQ(i.code, 0) << i.out;
  EXPECT_EQ(fields(i.out, "channel screen")["count"], "200");
  EXPECT_EQ(fields(i.out, "frames=")["frames"], "200");

  const auto k = run("inspect --topic keyboard --in " + q(dir / "s.owa"));
  ASSERT_EQ(k.code, 0);
  const auto reader = ContainerReader::open(dir / "s.owa");
  const auto keys = reader.read_messages(TopicSet::of({Topic::Keyboard}));
  EXPECT_NE(k.out.find("selected " + std::to_string(keys.size()) + " events"), std::string::npos);
}

TEST(Cli, GenIsDeterministic) {
  TempDir dir;
  std::filesystem::create_directories(dir / "a");
  std::filesystem::create_directories(dir / "b");
  ASSERT_EQ(run("gen --seed 9 --duration 5 --out " + q(dir / "a" / "s.owa")).code, 0);
  ASSERT_EQ(run("gen --seed 9 --duration 5 --out " + q(dir / "b" / "s.owa")).code, 0);
  EXPECT_EQ(read_file(dir / "a" / "s.owa"), read_file(dir / "b" / "s.owa"));
  EXPECT_EQ(read_file(dir / "a" / "s.gops"), read_file(dir / "b" / "s.gops"));
}

TEST(Cli, ConvertTokenizeDetokRoundTrip) {
  TempDir dir;
  ASSERT_EQ(run("gen --seed 3 --duration 20 --out " + q(dir / "raw.owa")).code, 0);
  std::filesystem::create_directories(dir / "out");
  const auto c = run("convert --in " + q(dir / "raw.owa") + " --out " + q(dir / "out" / "c.owa"));
  ASSERT_EQ(c.code, 0) << c.out;
  const auto t = run("tokenize --in " + q(dir / "out" / "c.owa") + " --out " + q(dir / "tok"));
  ASSERT_EQ(t.code, 0) << t.out;
  for (const auto* f : {"tokens.txt", "ids.bin", "sidecar.json", "vocab.txt"}) {
    EXPECT_TRUE(std::filesystem::exists(dir / "tok" / f)) << f;
  }
  const auto d = run("detok --in " + q(dir / "tok") + " --out " + q(dir / "out" / "d.owa"));
  ASSERT_EQ(d.code, 0) << d.out;

  const auto converted = ContainerReader::open(dir / "out" / "c.owa");
  const auto restored = ContainerReader::open(dir / "out" / "d.owa");
  // Tokens carry 10 ms timestamps; everything else survives exactly.
  auto expected = converted.read_messages();
  for (auto& e : expected) set_timestamp(e, Timestamp{timestamp_of(e).ns / 10'000'000 * 10'000'000});
  EXPECT_EQ(restored.read_messages(), expected);
  // Media references still resolve after the trip through the relocated raw store.
  const auto first = std::get<ScreenEvent>(restored.read_messages(TopicSet::of({Topic::Screen})).front());
  EXPECT_EQ(restored.resolve_media(first.frame_ref()), converted.resolve_media(first.frame_ref()));
}

TEST(Cli, PackBenchEvalLabel) {
  TempDir dir;
  std::filesystem::create_directories(dir / "eps");
  for (int i = 0; i < 2; ++i) {
    ASSERT_EQ(run("gen --seed " + std::to_string(i) + " --duration 30 --out " +
                  q(dir / "eps" / ("e" + std::to_string(i) + ".owa")))
                  .code,
              0);
  }
  const auto p = run("pack --in " + q(dir / "eps") + " --out " + q(dir / "ds"));
  ASSERT_EQ(p.code, 0) << p.out;
  EXPECT_EQ(fields(p.out, "episodes=")["screen_frames"], "1200");

  const auto b = run("bench --reps 1 --dataset " + q(dir / "ds"));
  ASSERT_EQ(b.code, 0) << b.out;
  for (const auto* gop : {"fixed:30", "variable:7:27:250"}) {
    const auto per = fields(b.out, std::string("gop_mode=") + gop + " strategy=per_frame images");
    const auto ada = fields(b.out, std::string("gop_mode=") + gop + " strategy=adaptive_batch images");
    ASSERT_FALSE(per.empty()) << b.out;
    ASSERT_FALSE(ada.empty()) << b.out;
    EXPECT_LE(std::stod(ada.at("kb_per_img")), std::stod(per.at("kb_per_img")));
    EXPECT_EQ(ada.at("images"), per.at("images"));
  }

  const auto l = run("label --in " + q(dir / "eps" / "e0.owa") + " --out " + q(dir / "eps" / "e0.pred.owa"));
  ASSERT_EQ(l.code, 0) << l.out;
  const auto e = run("eval --gt " + q(dir / "eps" / "e0.owa") + " --pred " + q(dir / "eps" / "e0.pred.owa"));
  ASSERT_EQ(e.code, 0) << e.out;
  EXPECT_NE(e.out.find("pearson_x=1.000000"), std::string::npos) << e.out;
  EXPECT_NE(e.out.find("scale_ratio_y=1.000000"), std::string::npos) << e.out;
}

TEST(Cli, RecoverTruncatedContainer) {
  TempDir dir;
  ASSERT_EQ(run("gen --seed 4 --duration 120 --out " + q(dir / "s.owa")).code, 0);
  auto bytes = read_file(dir / "s.owa");
  bytes.resize(bytes.size() * 2 / 3);
  write_file_atomic(dir / "s.owa", bytes);
  EXPECT_EQ(run("inspect --in " + q(dir / "s.owa")).code, 3);
  const auto r = run("recover --in " + q(dir / "s.owa") + " --out " + q(dir / "fixed.owa"));
  ASSERT_EQ(r.code, 0) << r.out;
  EXPECT_EQ(fields(r.out, "recovered_chunks")["metadata"], "1");
  EXPECT_EQ(run("inspect --summary --in " + q(dir / "fixed.owa")).code, 0);
}

TEST(Cli, Segment) {
  // Six minutes: windows cover [60 s, 240 s], so only one full two-minute window fits.
  const auto s = run("segment --frames 7200 --fps 20");
  ASSERT_EQ(s.code, 0) << s.out;
  EXPECT_EQ(s.out, "60.000\t180.000\n");
  EXPECT_EQ(run("segment --frames 200 --fps 20").out, "");
}

TEST(Cli, ExitCodes) {
  TempDir dir;
  EXPECT_EQ(run("").code, 2);
  EXPECT_EQ(run("gen --bogus").code, 2);
  EXPECT_EQ(run("gen --out " + q(dir / "x.owa") + " --gop fixed:0").code, 2);
  EXPECT_EQ(run("bench --dataset " + q(dir.path()) + " --strategies warp").code, 2);

  const auto missing = run("inspect --in " + q(dir / "absent.owa"));
  EXPECT_EQ(missing.code, 4);
  EXPECT_EQ(missing.out.rfind("error: IoFailure:", 0), 0U) << missing.out;

  write_file_atomic(dir / "junk.owa", Bytes{'j', 'u', 'n', 'k', 0, 0, 0, 0});
  const auto junk = run("inspect --in " + q(dir / "junk.owa"));
  EXPECT_EQ(junk.code, 3);
  EXPECT_NE(junk.out.find("NotAContainer"), std::string::npos);

  ASSERT_EQ(run("gen --duration 2 --out " + q(dir / "m.owa")).code, 0);
  std::filesystem::remove(dir / "m.gops");
  const auto media = run("label --in " + q(dir / "m.owa") + " --out " + q(dir / "p.owa"));
  EXPECT_EQ(media.code, 4) << media.out;
}
