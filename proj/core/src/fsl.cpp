#include "deskpipe/fsl.hpp"

#include <algorithm>
#include <sstream>

#include "deskpipe/byte_io.hpp"
#include "deskpipe/errors.hpp"

namespace deskpipe {

namespace {

std::string join_u32(std::span<const std::uint32_t> xs, char sep) {
  std::string out;
  for (std::size_t i = 0; i < xs.size(); ++i) {
    if (i) out += sep;
    out += std::to_string(xs[i]);
  }
  return out;
}

std::vector<std::string_view> split(std::string_view s, char sep) {
  std::vector<std::string_view> parts;
  std::size_t start = 0;
  while (true) {
    const auto at = s.find(sep, start);
    parts.push_back(s.substr(start, at - start));
    if (at == std::string_view::npos) break;
    start = at + 1;
  }
  return parts;
}

std::uint64_t to_u64(std::string_view s) {
  enforce(!s.empty(), ErrorClass::InvalidArgument, "empty number in manifest");
  std::uint64_t v = 0;
  for (char c : s) {
    if (!(c >= '0' && c <= '9')) {
      throw_error(ErrorClass::InvalidArgument, "bad number '" + std::string(s) + "' in manifest");
    }
    v = v * 10 + static_cast<std::uint64_t>(c - '0');
  }
  return v;
}

std::vector<std::uint32_t> to_u32_list(std::string_view s, char sep) {
  std::vector<std::uint32_t> out;
  if (s.empty()) return out;
  for (auto p : split(s, sep)) out.push_back(static_cast<std::uint32_t>(to_u64(p)));
  return out;
}

std::string plan_to_text(const AccessPlan& plan) {
  std::string out;
  for (const auto& [uri, frames] : plan) {
    if (!out.empty()) out += ';';
    out += uri;
    out += '=';
    out += join_u32(frames, ',');
  }
  return out.empty() ? "-" : out;
}

AccessPlan plan_from_text(std::string_view s) {
  AccessPlan plan;
  if (s == "-") return plan;
  for (auto group : split(s, ';')) {
    const auto eq = group.rfind('=');
    enforce(eq != std::string_view::npos, ErrorClass::InvalidArgument, "bad access plan in manifest");
    plan[std::string(group.substr(0, eq))] = to_u32_list(group.substr(eq + 1), ',');
  }
  return plan;
}

}  // namespace

std::vector<Event> apply_nep_tau(const Episode& ep, std::uint32_t tau) {
  std::size_t screens = 0;
  for (const auto& e : ep.events) screens += std::holds_alternative<ScreenEvent>(e) ? 1 : 0;

  // Actions before the first screen count as following screen -1; they stay
  // in front only when that shifted slot is still before every screen.
  std::vector<std::size_t> lead;
  std::vector<std::vector<std::size_t>> after(screens);
  std::int64_t last_screen = -1;
  const auto final_screen = static_cast<std::int64_t>(screens) - 1;
  for (std::size_t i = 0; i < ep.events.size(); ++i) {
    if (std::holds_alternative<ScreenEvent>(ep.events[i])) {
      ++last_screen;
      continue;
    }
    const auto target = std::min(last_screen + static_cast<std::int64_t>(tau), final_screen);
    if (target < 0) {
      lead.push_back(i);
    } else {
      after[static_cast<std::size_t>(target)].push_back(i);
    }
  }

  std::vector<Event> out;
  out.reserve(ep.events.size());
  for (auto i : lead) out.push_back(ep.events[i]);
  std::size_t s = 0;
  for (const auto& e : ep.events) {
    if (!std::holds_alternative<ScreenEvent>(e)) continue;
    out.push_back(e);
    for (auto i : after[s]) out.push_back(ep.events[i]);
    ++s;
  }
  return out;
}

void pack_episode(const std::string& episode_id, std::span<const Event> events,
                  const PackConfig& cfg, const std::function<void(PackedSample&&)>& emit) {
  cfg.tokenizer.validate();
  enforce(cfg.max_seq_len > 0, ErrorClass::InvalidArgument, "max_seq_len must be positive");

  PackedSample cur;
  auto finish = [&] {
    cur.content_tokens = static_cast<std::uint32_t>(cur.tokens.size());
    cur.tokens.resize(cfg.max_seq_len, vocab::of(vocab::kPad));
    cur.access_plan = build_access_plan(cur);
    emit(std::move(cur));
    cur = PackedSample{};
  };

  for (std::size_t i = 0; i < events.size(); ++i) {
    const auto& e = events[i];
    const auto len = encoded_length(e, cfg.tokenizer);
    if (len > cfg.max_seq_len) {
      throw_error(ErrorClass::EventTooLarge, "event " + std::to_string(i) + " needs " +
                                             std::to_string(len) + " tokens, max_seq_len is " +
                                             std::to_string(cfg.max_seq_len));
    }
    if (cur.tokens.size() + len > cfg.max_seq_len) finish();
    if (cur.tokens.empty()) {
      cur.episode_id = episode_id;
      cur.tokens.reserve(cfg.max_seq_len);
    }

    AlignmentSpan span;
    span.token_begin = static_cast<std::uint32_t>(cur.tokens.size());
    encode_event_into(e, cfg.tokenizer, cur.tokens);
    span.token_end = static_cast<std::uint32_t>(cur.tokens.size());
    span.event_index = static_cast<std::uint32_t>(i);
    span.topic = topic_of(e);
    if (const auto* s = std::get_if<ScreenEvent>(&e); s && s->media.kind == MediaKind::External) {
      span.frame = FrameRef{s->media.uri, s->frame_index};
    }
    cur.alignment.push_back(std::move(span));
  }
  if (!cur.alignment.empty()) finish();
}

std::vector<PackedSample> pack_episode(const std::string& episode_id,
                                       std::span<const Event> events, const PackConfig& cfg) {
  std::vector<PackedSample> out;
  pack_episode(episode_id, events, cfg, [&](PackedSample&& s) { out.push_back(std::move(s)); });
  return out;
}

AccessPlan build_access_plan(const PackedSample& sample) {
  AccessPlan plan;
  for (const auto& span : sample.alignment) {
    if (span.frame) plan[span.frame->uri].push_back(span.frame->frame_index);
  }
  for (auto& [uri, frames] : plan) {
    std::sort(frames.begin(), frames.end());
    frames.erase(std::unique(frames.begin(), frames.end()), frames.end());
  }
  return plan;
}

std::string DatasetManifest::to_text() const {
  std::ostringstream os;
  os << "# deskpipe fsl manifest v1\n";
  os << "max_seq_len=" << config.max_seq_len << " tau=" << config.tau
     << " img_token_count=" << config.tokenizer.img_token_count
     << " ts_unit_ms=" << config.tokenizer.ts_unit_ms
     << " delta_bases=" << join_u32(config.tokenizer.delta_bases, ',')
     << " ts_bases=" << join_u32(config.tokenizer.ts_bases, ',') << "\n";
  os << "episodes=" << episodes << " samples=" << samples.size() << " total_tokens=" << total_tokens
     << " events=" << events << " screen_frames=" << screen_frames << " vocab=" << vocab_file
     << " tokens=" << token_file << "\n";
  for (const auto& s : samples) {
    os << s.episode_id << '\t' << s.token_offset << '\t' << s.content_tokens << '\t'
       << s.event_count << '\t' << plan_to_text(s.plan) << '\n';
  }
  return os.str();
}

DatasetManifest DatasetManifest::parse(std::string_view text) {
  DatasetManifest m;
  auto lines = split(text, '\n');
  if (!lines.empty() && lines.back().empty()) lines.pop_back();
  enforce(lines.size() >= 3 && lines[0] == "# deskpipe fsl manifest v1", ErrorClass::InvalidArgument,
          "not an fsl manifest");

  std::map<std::string, std::string, std::less<>> kv;
  for (std::size_t l = 1; l <= 2; ++l) {
    for (auto field : split(lines[l], ' ')) {
      const auto eq = field.find('=');
      enforce(eq != std::string_view::npos, ErrorClass::InvalidArgument, "bad manifest header field");
      kv[std::string(field.substr(0, eq))] = std::string(field.substr(eq + 1));
    }
  }
  auto get = [&](std::string_view key) -> const std::string& {
    const auto it = kv.find(key);
    if (it == kv.end()) {
      throw_error(ErrorClass::InvalidArgument, "manifest missing " + std::string(key));
    }
    return it->second;
  };
  m.config.max_seq_len = static_cast<std::uint32_t>(to_u64(get("max_seq_len")));
  m.config.tau = static_cast<std::uint32_t>(to_u64(get("tau")));
  m.config.tokenizer.img_token_count = static_cast<std::uint32_t>(to_u64(get("img_token_count")));
  m.config.tokenizer.ts_unit_ms = static_cast<std::uint32_t>(to_u64(get("ts_unit_ms")));
  m.config.tokenizer.delta_bases = to_u32_list(get("delta_bases"), ',');
  m.config.tokenizer.ts_bases = to_u32_list(get("ts_bases"), ',');
  m.episodes = to_u64(get("episodes"));
  m.total_tokens = to_u64(get("total_tokens"));
  m.events = to_u64(get("events"));
  m.screen_frames = to_u64(get("screen_frames"));
  m.vocab_file = get("vocab");
  m.token_file = get("tokens");
  const auto n = to_u64(get("samples"));
  enforce(lines.size() == 3 + n, ErrorClass::InvalidArgument, "manifest sample count mismatch");
  for (std::size_t l = 3; l < lines.size(); ++l) {
    const auto cols = split(lines[l], '\t');
    if (cols.size() != 5) {
      throw_error(ErrorClass::InvalidArgument, "bad manifest line " + std::to_string(l + 1));
    }
    ManifestEntry e;
    e.episode_id = std::string(cols[0]);
    e.token_offset = to_u64(cols[1]);
    e.content_tokens = static_cast<std::uint32_t>(to_u64(cols[2]));
    e.event_count = static_cast<std::uint32_t>(to_u64(cols[3]));
    e.plan = plan_from_text(cols[4]);
    m.samples.push_back(std::move(e));
  }
  return m;
}

TokenFileSink::TokenFileSink(const std::filesystem::path& path)
    : path_(path), out_(path, std::ios::binary | std::ios::trunc) {
  if (!out_) {
    throw_error(ErrorClass::IoFailure, "cannot create " + path.string());
  }
}

void TokenFileSink::consume(const PackedSample& sample) {
  Bytes buf;
  buf.reserve(sample.tokens.size() * 4);
  ByteWriter w(buf);
  for (auto t : sample.tokens) w.u32(t.id);
  out_.write(reinterpret_cast<const char*>(buf.data()), static_cast<std::streamsize>(buf.size()));
  if (!out_) {
    throw_error(ErrorClass::IoFailure, "write failed: " + path_.string());
  }
}

void TokenFileSink::close() {
  out_.flush();
  if (!out_) {
    throw_error(ErrorClass::IoFailure, "write failed: " + path_.string());
  }
  out_.close();
}

DatasetManifest pack_dataset(std::span<const Episode> episodes, const PackConfig& cfg,
                             SampleSink* sink) {
  DatasetManifest m;
  m.config = cfg;
  m.episodes = episodes.size();
  for (const auto& ep : episodes) {
    const auto events = apply_nep_tau(ep, cfg.tau);
    pack_episode(ep.id, events, cfg, [&](PackedSample&& s) {
      ManifestEntry e;
      e.episode_id = s.episode_id;
      e.token_offset = m.total_tokens;
      e.content_tokens = s.content_tokens;
      e.event_count = static_cast<std::uint32_t>(s.alignment.size());
      e.plan = s.access_plan;
      m.total_tokens += s.tokens.size();
      m.events += s.alignment.size();
      for (const auto& span : s.alignment) m.screen_frames += span.topic == Topic::Screen ? 1 : 0;
      if (sink) sink->consume(s);
      m.samples.push_back(std::move(e));
    });
  }
  return m;
}

std::vector<Token> read_tokens(const std::filesystem::path& path, std::uint64_t offset,
                               std::uint64_t count) {
  FileSource src(path);
  if ((offset + count) * 4 > src.size()) {
    throw_error(ErrorClass::OutOfRange, "token range past end of " + path.string());
  }
  const auto raw = src.read_at(offset * 4, count * 4);
  ByteReader r(raw, ErrorClass::IoFailure);
  std::vector<Token> out(count);
  for (auto& t : out) t.id = static_cast<std::uint16_t>(r.u32());
  return out;
}

}  // namespace deskpipe
