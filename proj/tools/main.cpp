// deskpipe: command-line front end for the desktop event data layer.

#include <algorithm>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "deskpipe/byte_io.hpp"
#include "deskpipe/codec.hpp"
#include "deskpipe/container.hpp"
#include "deskpipe/decode_engine.hpp"
#include "deskpipe/errors.hpp"
#include "deskpipe/events.hpp"
#include "deskpipe/fsl.hpp"
#include "deskpipe/metrics.hpp"
#include "deskpipe/synth.hpp"
#include "deskpipe/tokenizer.hpp"

namespace fs = std::filesystem;
using json = nlohmann::json;
using namespace deskpipe;

namespace {

constexpr int kExitUsage = 2;
constexpr int kExitData = 3;
constexpr int kExitIo = 4;

int exit_code_for(ErrorClass cls) {
  switch (cls) {
    case ErrorClass::IoFailure:
    case ErrorClass::MediaMissing:
      return kExitIo;
    case ErrorClass::InvalidArgument:
      return kExitUsage;
    default:
      return kExitData;
  }
}

std::vector<std::string> split(const std::string& s, char sep) {
  std::vector<std::string> out;
  std::stringstream ss(s);
  std::string part;
  while (std::getline(ss, part, sep)) out.push_back(part);
  return out;
}

std::string read_text(const fs::path& p) {
  const auto raw = read_file(p);
  return {raw.begin(), raw.end()};
}

void write_text(const fs::path& p, const std::string& text) {
  write_file_atomic(p, Bytes(text.begin(), text.end()));
}

// --- gen ---------------------------------------------------------------------

struct GenArgs {
  SynthConfig synth;
  std::string out;
  std::string media;
  std::string gop = "fixed:30";
  std::string id;
  bool embed = false;
};

void run_gen(const GenArgs& a) {
  const fs::path out = a.out;
  const fs::path media = a.media.empty() ? fs::path(out).replace_extension(".gops") : fs::path(a.media);
  const auto dir = out.parent_path().empty() ? fs::path(".") : out.parent_path();
  if (!dir.empty()) fs::create_directories(dir);
  if (!media.parent_path().empty()) fs::create_directories(media.parent_path());
  const auto uri = fs::relative(fs::absolute(media), fs::absolute(dir)).generic_string();

  const auto gop = GopConfig::parse(a.gop);
  auto session = synth_generate(a.synth, uri, a.id.empty() ? out.stem().string() : a.id);
  write_media(media, session.frames, gop, static_cast<float>(a.synth.fps));
  const auto report = write_session(session.episode, out,
                                    a.embed ? MediaPolicy::embed() : MediaPolicy::external());
  std::printf("episode=%s events=%zu frames=%zu chunks=%llu container_bytes=%llu media=%s\n",
              session.episode.id.c_str(), session.episode.events.size(), session.frames.size(),
              static_cast<unsigned long long>(report.chunks),
              static_cast<unsigned long long>(report.file_bytes), media.string().c_str());
}

// --- convert / label / recover ---------------------------------------------------

struct ConvertArgs {
  std::string in;
  std::string out;
  std::uint32_t resample_ms = 50;
  double filter_s = 10.0;
  bool embed = false;
};

Episode load_episode(const fs::path& p) { return ContainerReader::open(p).read_episode(); }

fs::path dir_of(const fs::path& p) {
  return p.parent_path().empty() ? fs::path(".") : p.parent_path();
}

void save_episode(Episode ep, const fs::path& from, const fs::path& to, bool embed) {
  fs::create_directories(dir_of(to));
  rebase_media_uris(ep, dir_of(from), dir_of(to));
  write_session(ep, to, embed ? MediaPolicy::embed() : MediaPolicy::external());
}

void run_convert(const ConvertArgs& a) {
  auto ep = load_episode(a.in);
  const auto before = ep.events.size();
  if (a.resample_ms > 0) ep = resample_stream(ep, a.resample_ms);
  if (a.filter_s > 0) ep = filter_inactive(ep, a.filter_s);
  std::printf("events_in=%zu events_out=%zu\n", before, ep.events.size());
  save_episode(std::move(ep), a.in, a.out, a.embed);
}

void run_label(const std::string& in, const std::string& out) {
  const auto reader = ContainerReader::open(in);
  const auto ep = reader.read_episode();
  std::string uri;
  for (const auto& e : ep.events) {
    if (const auto* s = std::get_if<ScreenEvent>(&e)) {
      enforce(s->media.kind == MediaKind::External, ErrorClass::InvalidArgument,
              "label needs external media");
      enforce(uri.empty() || uri == s->media.uri, ErrorClass::InvalidArgument,
              "label supports a single media store per episode");
      uri = s->media.uri;
    }
  }
  enforce(!uri.empty(), ErrorClass::InvalidArgument, "episode has no screen events");
  const auto store = MediaStore::open(reader.resolve_uri(uri));
  auto labeled = oracle_idm(store, ep);
  const auto labels = static_cast<std::size_t>(
      std::count_if(labeled.events.begin(), labeled.events.end(), [](const Event& e) { return is_action(e); }));
  std::printf("screens=%zu labels=%zu\n", labeled.events.size() - labels, labels);
  save_episode(std::move(labeled), in, out, false);
}

void run_recover(const std::string& in, const std::string& out) {
  const auto r = recover(in, out.empty() ? std::nullopt : std::optional<fs::path>(out));
  std::printf("recovered_chunks=%llu dropped_chunks=%llu messages=%llu metadata=%d\n",
              static_cast<unsigned long long>(r.result.recovered_chunks),
              static_cast<unsigned long long>(r.result.dropped_chunks),
              static_cast<unsigned long long>(r.result.recovered_messages),
              r.result.metadata_recovered ? 1 : 0);
}

// --- tokenize / detok ---------------------------------------------------------------

json media_to_json(const MediaRef& m, std::uint32_t frame) {
  return {{"kind", m.kind == MediaKind::External ? "external" : "embedded"},
          {"uri", m.uri},
          {"frame_index", frame}};
}

void run_tokenize(const std::string& in, const std::string& out) {
  const fs::path dir = out;
  fs::create_directories(dir);
  auto ep = load_episode(in);
  rebase_media_uris(ep, dir_of(in), dir);

  TokenizerConfig cfg;
  Timestamp base;
  if (!ep.events.empty()) {
    base.ns = timestamp_of(ep.events.front()).ns / cfg.ts_unit_ns() * cfg.ts_unit_ns();
  }
  const auto seq = encode_stream(ep, cfg, base);

  std::string text;
  Bytes ids;
  ByteWriter w(ids);
  std::size_t start = 0;
  for (std::size_t i = 0; i < seq.tokens.size(); ++i) {
    w.u32(seq.tokens[i].id);
    if (seq.tokens[i].id == vocab::kEventEnd) {
      text += to_text(std::span(seq.tokens).subspan(start, i + 1 - start));
      text += '\n';
      start = i + 1;
    }
  }

  json side;
  side["episode_id"] = ep.id;
  side["meta"] = ep.meta;
  side["base_ns"] = seq.base.ns;
  side["ts_unit_ms"] = cfg.ts_unit_ms;
  side["img_token_count"] = cfg.img_token_count;
  side["screens"] = json::array();
  for (const auto& s : seq.screens) side["screens"].push_back(media_to_json(s.media, s.frame_index));

  write_text(dir / "tokens.txt", text);
  write_file_atomic(dir / "ids.bin", ids);
  write_text(dir / "sidecar.json", side.dump(2) + "\n");
  write_text(dir / "vocab.txt", vocab::manifest());
  std::printf("events=%zu tokens=%zu\n", ep.events.size(), seq.tokens.size());
}

void run_detok(const std::string& in, const std::string& out) {
  const fs::path dir = in;
  TokenSequence seq;
  seq.tokens = from_text(read_text(dir / "tokens.txt"));

  json side;
  try {
    side = json::parse(read_text(dir / "sidecar.json"));
  } catch (const json::exception& e) {
    throw_error(ErrorClass::MalformedEvent, std::string("bad sidecar.json: ") + e.what());
  }
  TokenizerConfig cfg;
  Episode ep;
  try {
    seq.base.ns = side.at("base_ns").get<std::uint64_t>();
    cfg.ts_unit_ms = side.value("ts_unit_ms", cfg.ts_unit_ms);
    cfg.img_token_count = side.value("img_token_count", cfg.img_token_count);
    for (const auto& s : side.at("screens")) {
      ScreenSidecar sc;
      sc.media.kind = s.at("kind") == "external" ? MediaKind::External : MediaKind::Embedded;
      sc.media.uri = s.at("uri").get<std::string>();
      sc.frame_index = s.at("frame_index").get<std::uint32_t>();
      seq.screens.push_back(sc);
    }
    ep = decode_stream(seq, cfg);
    ep.id = side.at("episode_id").get<std::string>();
    ep.meta = side.at("meta").get<std::map<std::string, std::string>>();
  } catch (const json::exception& e) {
    throw_error(ErrorClass::MalformedEvent, std::string("bad sidecar.json: ") + e.what());
  }
  std::printf("events=%zu\n", ep.events.size());
  save_episode(std::move(ep), dir / "sidecar.json", out, false);
}

// --- pack / bench -----------------------------------------------------------------------

std::vector<fs::path> expand_inputs(const std::vector<std::string>& inputs) {
  std::vector<fs::path> out;
  for (const auto& in : inputs) {
    if (fs::is_directory(in)) {
      std::vector<fs::path> found;
      for (const auto& entry : fs::directory_iterator(in)) {
        if (entry.path().extension() == ".owa") found.push_back(entry.path());
      }
      std::sort(found.begin(), found.end());
      out.insert(out.end(), found.begin(), found.end());
    } else {
      out.emplace_back(in);
    }
  }
  return out;
}

void run_pack(const std::vector<std::string>& inputs, const std::string& out, std::uint32_t max_len,
              std::uint32_t tau) {
  const fs::path dir = out;
  fs::create_directories(dir);
  std::vector<Episode> episodes;
  for (const auto& p : expand_inputs(inputs)) {
    auto ep = load_episode(p);
    rebase_media_uris(ep, dir_of(p), dir);
    episodes.push_back(std::move(ep));
  }
  PackConfig cfg;
  cfg.max_seq_len = max_len;
  cfg.tau = tau;
  const auto tmp = dir / "tokens.bin.tmp";
  TokenFileSink sink(tmp);
  const auto manifest = pack_dataset(episodes, cfg, &sink);
  sink.close();
  fs::rename(tmp, dir / manifest.token_file);
  write_text(dir / manifest.vocab_file, vocab::manifest());
  write_text(dir / "manifest.txt", manifest.to_text());
  std::printf("episodes=%llu samples=%zu total_tokens=%llu events=%llu screen_frames=%llu\n",
              static_cast<unsigned long long>(manifest.episodes), manifest.samples.size(),
              static_cast<unsigned long long>(manifest.total_tokens),
              static_cast<unsigned long long>(manifest.events),
              static_cast<unsigned long long>(manifest.screen_frames));
}

void run_bench(const std::string& dataset, const std::string& strategies, const std::string& gops,
               unsigned reps) {
  BenchConfig cfg;
  cfg.strategies = parse_strategies(strategies);
  cfg.gops.clear();
  for (const auto& g : split(gops, ',')) cfg.gops.push_back(GopConfig::parse(g));
  cfg.repetitions = reps;

  fs::path dir = dataset;
  fs::path manifest_path = dir / "manifest.txt";
  if (!fs::is_directory(dir)) {
    manifest_path = dir;
    dir = dir_of(dir);
  }
  const auto manifest = DatasetManifest::parse(read_text(manifest_path));
  std::fputs(bench_pipeline(manifest, dir, cfg).to_text().c_str(), stdout);
}

// --- eval / segment / inspect ---------------------------------------------------------------

void run_eval(const std::string& gt, const std::string& pred, std::uint32_t bin_ms) {
  const auto report = evaluate(load_episode(gt), load_episode(pred), bin_ms);
  std::fputs(report.to_text().c_str(), stdout);
}

void run_segment(std::uint64_t frames, double fps) {
  for (const auto& s : segment_screen_stream(frames, fps)) {
    std::printf("%.3f\t%.3f\n", s.start_s, s.end_s);
  }
}

TopicSet parse_topics(const std::string& text) {
  if (text.empty() || text == "all") return TopicSet::all();
  TopicSet set{0};
  for (const auto& name : split(text, ',')) {
    if (name == "screen") {
      set.bits |= TopicSet::of({Topic::Screen}).bits;
    } else if (name == "keyboard") {
      set.bits |= TopicSet::of({Topic::Keyboard}).bits;
    } else if (name == "mouse") {
      set.bits |= TopicSet::of({Topic::Mouse}).bits;
    } else {
      throw_error(ErrorClass::InvalidArgument, "unknown topic '" + name + "'");
    }
  }
  return set;
}

std::optional<TimeRange> parse_range(const std::string& text) {
  if (text.empty()) return std::nullopt;
  const auto colon = text.find(':');
  enforce(colon != std::string::npos, ErrorClass::InvalidArgument, "range must be <start_s>:<end_s>");
  try {
    const double a = std::stod(text.substr(0, colon));
    const double b = std::stod(text.substr(colon + 1));
    enforce(a >= 0 && b >= a, ErrorClass::InvalidArgument, "range must satisfy 0 <= start <= end");
    return TimeRange{Timestamp::from_s(a), Timestamp::from_s(b)};
  } catch (const std::logic_error&) {
    throw_error(ErrorClass::InvalidArgument, "range must be <start_s>:<end_s>");
  }
}

void run_inspect(const std::string& in, const std::string& topics, const std::string& range,
                 bool summary_only) {
  const auto reader = ContainerReader::open(in);
  std::printf("episode %s\n", reader.episode_id().c_str());
  for (const auto& [k, v] : reader.meta()) std::printf("meta %s=%s\n", k.c_str(), v.c_str());
  if (!summary_only) {
    ReadReport rr;
    const auto events = reader.read_messages(parse_topics(topics), parse_range(range), &rr);
    for (const auto& e : events) std::printf("%s\n", format_event(e).c_str());
    std::printf("selected %zu events\n", events.size());
    for (auto off : rr.corrupt_chunk_offsets) {
      std::printf("corrupt chunk at offset %llu\n", static_cast<unsigned long long>(off));
    }
  }
  std::fputs(format_summary(summarize(reader)).c_str(), stdout);
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"deskpipe: desktop interaction event containers, tokens and datasets"};
  app.require_subcommand(1);

  GenArgs gen;
  auto* g = app.add_subcommand("gen", "Generate a synthetic session (container + media store)");
  g->add_option("--seed", gen.synth.seed, "Random seed")->capture_default_str();
  g->add_option("--duration", gen.synth.duration_s, "Duration in seconds")->capture_default_str();
  g->add_option("--fps", gen.synth.fps, "Screen frames per second")->capture_default_str();
  g->add_option("--width", gen.synth.width)->capture_default_str();
  g->add_option("--height", gen.synth.height)->capture_default_str();
  g->add_option("--actor", gen.synth.actor, "rect-chase or random-walk")->capture_default_str();
  g->add_option("--idle-rate", gen.synth.idle_rate, "Idle spans started per second")->capture_default_str();
  g->add_option("--gop", gen.gop, "fixed:N or variable:SEED[:MIN:MAX]")->capture_default_str();
  g->add_option("--media", gen.media, "Media store path (default: <out>.gops)");
  g->add_option("--id", gen.id, "Episode id (default: output stem)");
  g->add_flag("--embed", gen.embed, "Embed frames in the container");
  g->add_option("--out", gen.out, "Container path")->required();

  ConvertArgs conv;
  auto* c = app.add_subcommand("convert", "Resample and filter a container");
  c->add_option("--in", conv.in)->required();
  c->add_option("--out", conv.out)->required();
  c->add_option("--resample-ms", conv.resample_ms, "0 disables resampling")->capture_default_str();
  c->add_option("--filter-inactive", conv.filter_s, "Seconds; 0 disables filtering")->capture_default_str();
  c->add_flag("--embed", conv.embed, "Embed frames in the output container");

  std::string tok_in, tok_out;
  auto* t = app.add_subcommand("tokenize", "Container to token files");
  t->add_option("--in", tok_in)->required();
  t->add_option("--out", tok_out, "Output directory")->required();

  std::string detok_in, detok_out;
  auto* d = app.add_subcommand("detok", "Token files back to a container");
  d->add_option("--in", detok_in, "Directory written by tokenize")->required();
  d->add_option("--out", detok_out)->required();

  std::vector<std::string> pack_in;
  std::string pack_out;
  std::uint32_t max_len = 4096, tau = 1;
  auto* p = app.add_subcommand("pack", "Build a fixed-length token dataset");
  p->add_option("--in", pack_in, "Containers or directories of .owa files")->required();
  p->add_option("--max-len", max_len)->capture_default_str();
  p->add_option("--tau", tau)->capture_default_str();
  p->add_option("--out", pack_out, "Output directory")->required();

  std::string bench_dataset, strategies = "all", gops = "fixed:30,variable:7";
  unsigned reps = 3;
  auto* b = app.add_subcommand("bench", "Replay dataset access plans under decode strategies");
  b->add_option("--dataset", bench_dataset, "Pack output directory or manifest")->required();
  b->add_option("--strategies", strategies)->capture_default_str();
  b->add_option("--gop", gops)->capture_default_str();
  b->add_option("--reps", reps)->capture_default_str();

  std::string gt, pred;
  std::uint32_t bin_ms = 50;
  auto* e = app.add_subcommand("eval", "Compare predicted actions against ground truth");
  e->add_option("--gt", gt)->required();
  e->add_option("--pred", pred)->required();
  e->add_option("--bin-ms", bin_ms)->capture_default_str();

  std::uint64_t frames = 0;
  double seg_fps = 20.0;
  auto* s = app.add_subcommand("segment", "Pseudo-labeling windows for a screen stream");
  s->add_option("--frames", frames)->required();
  s->add_option("--fps", seg_fps)->capture_default_str();

  std::string insp_in, topics, range;
  bool summary_only = false;
  auto* i = app.add_subcommand("inspect", "Dump events and a size summary");
  i->add_option("--in", insp_in)->required();
  i->add_option("--topic", topics, "Comma list of screen,keyboard,mouse");
  i->add_option("--range", range, "<start_s>:<end_s>");
  i->add_flag("--summary", summary_only, "Skip the event dump");

  std::string lab_in, lab_out;
  auto* l = app.add_subcommand("label", "Pseudo-label a synthetic session with the oracle IDM");
  l->add_option("--in", lab_in)->required();
  l->add_option("--out", lab_out)->required();

  std::string rec_in, rec_out;
  auto* r = app.add_subcommand("recover", "Rebuild a truncated container");
  r->add_option("--in", rec_in)->required();
  r->add_option("--out", rec_out, "Default: rewrite in place");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& err) {
    const int code = app.exit(err);
    return code == 0 ? 0 : kExitUsage;
  }

  try {
    if (*g) run_gen(gen);
    if (*c) run_convert(conv);
    if (*t) run_tokenize(tok_in, tok_out);
    if (*d) run_detok(detok_in, detok_out);
    if (*p) run_pack(pack_in, pack_out, max_len, tau);
    if (*b) run_bench(bench_dataset, strategies, gops, reps);
    if (*e) run_eval(gt, pred, bin_ms);
    if (*s) run_segment(frames, seg_fps);
    if (*i) run_inspect(insp_in, topics, range, summary_only);
    if (*l) run_label(lab_in, lab_out);
    if (*r) run_recover(rec_in, rec_out);
  } catch (const Error& err) {
    std::fprintf(stderr, "error: %s: %s\n", std::string(error_class_name(err.error_class())).c_str(),
                 err.what());
    return exit_code_for(err.error_class());
  } catch (const fs::filesystem_error& err) {
    std::fprintf(stderr, "error: IoFailure: %s\n", err.what());
    return kExitIo;
  } catch (const std::exception& err) {
    std::fprintf(stderr, "error: Internal: %s\n", err.what());
    return kExitData;
  }
  return 0;
}
