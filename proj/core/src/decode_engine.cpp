#include "deskpipe/decode_engine.hpp"

#include <algorithm>
#include <chrono>
#include <cstdio>
#include <map>
#include <set>
#include <sstream>

#include <unistd.h>

#include "deskpipe/errors.hpp"

namespace deskpipe {

std::string_view strategy_name(Strategy s) {
  switch (s) {
    case Strategy::PerFrame: return "per_frame";
    case Strategy::NaiveBatch: return "naive_batch";
    case Strategy::AdaptiveBatch: return "adaptive_batch";
  }
  return "?";
}

Strategy parse_strategy(std::string_view name) {
  for (auto s : {Strategy::PerFrame, Strategy::NaiveBatch, Strategy::AdaptiveBatch}) {
    if (strategy_name(s) == name) return s;
  }
  throw_error(ErrorClass::InvalidArgument, "unknown strategy '" + std::string(name) + "'");
}

std::vector<Strategy> parse_strategies(std::string_view text) {
  if (text == "all") return {Strategy::PerFrame, Strategy::NaiveBatch, Strategy::AdaptiveBatch};
  std::vector<Strategy> out;
  std::size_t start = 0;
  while (start <= text.size()) {
    const auto comma = std::min(text.find(',', start), text.size());
    out.push_back(parse_strategy(text.substr(start, comma - start)));
    start = comma + 1;
  }
  return out;
}

DecodeStats& DecodeStats::operator+=(const DecodeStats& o) {
  images += o.images;
  bytes_read += o.bytes_read;
  frames_decoded += o.frames_decoded;
  seeks += o.seeks;
  elapsed += o.elapsed;
  return *this;
}

namespace {

// Decoder state shared by the batch strategies.
class Cursor {
 public:
  Cursor(const MediaStore& store, ByteCounter& counter, std::vector<std::uint32_t>* trace)
      : store_(store), counter_(counter), trace_(trace) {}

  bool positioned() const { return positioned_; }
  std::uint32_t next() const { return next_; }

  void seek(std::uint32_t keyframe) {
    ++counter_.seeks;
    next_ = keyframe;
    positioned_ = true;
  }

  const Frame& advance() {
    const auto rec = store_.read_record(next_, counter_);
    const bool key = rec.kind == FrameKind::I;
    current_ = apply_record(store_, rec, key ? nullptr : &current_);
    ++counter_.frames_decoded;
    if (trace_) trace_->push_back(next_);
    ++next_;
    return current_;
  }

  const Frame& decode_to(std::uint32_t target) {
    while (next_ <= target) advance();
    return current_;
  }

 private:
  const MediaStore& store_;
  ByteCounter& counter_;
  std::vector<std::uint32_t>* trace_;
  Frame current_;
  std::uint32_t next_ = 0;
  bool positioned_ = false;
};

bool keyframe_in(const MediaStore& store, std::uint32_t lo_exclusive, std::uint32_t hi_inclusive) {
  const auto& kf = store.keyframes();
  auto it = std::upper_bound(kf.begin(), kf.end(), lo_exclusive);
  return it != kf.end() && *it <= hi_inclusive;
}

}  // namespace

FetchResult fetch_frames(std::span<const std::uint32_t> plan, const MediaStore& store,
                         Strategy strategy, bool trace) {
  for (std::size_t i = 0; i < plan.size(); ++i) {
    if (plan[i] >= store.frame_count()) {
      throw_error(ErrorClass::FrameOutOfRange, "frame " + std::to_string(plan[i]) +
                                               " >= frame count " +
                                               std::to_string(store.frame_count()));
    }
    enforce(i == 0 || plan[i - 1] < plan[i], ErrorClass::InvalidArgument,
            "plan must be sorted and unique");
  }

  FetchResult out;
  out.frames.reserve(plan.size());
  ByteCounter counter;
  auto* tr = trace ? &out.decoded : nullptr;
  const auto t0 = std::chrono::steady_clock::now();

  switch (strategy) {
    case Strategy::PerFrame:
      for (auto t : plan) {
        Cursor c(store, counter, tr);
        c.seek(store.keyframe_before(t));
        out.frames.push_back(c.decode_to(t));
      }
      break;
    case Strategy::NaiveBatch:
      if (!plan.empty()) {
        Cursor c(store, counter, tr);
        c.seek(store.keyframe_before(plan.front()));
        for (auto t : plan) out.frames.push_back(c.decode_to(t));
      }
      break;
    case Strategy::AdaptiveBatch: {
      Cursor c(store, counter, tr);
      for (auto t : plan) {
        const bool continue_ = c.positioned() && c.next() <= t && !keyframe_in(store, c.next(), t);
        if (!continue_) c.seek(store.keyframe_before(t));
        out.frames.push_back(c.decode_to(t));
      }
      break;
    }
  }

  out.stats.elapsed = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  out.stats.images = plan.size();
  out.stats.bytes_read = counter.bytes_read;
  out.stats.frames_decoded = counter.frames_decoded;
  out.stats.seeks = counter.seeks;
  return out;
}

const BenchRow* BenchReport::find(std::string_view gop_mode, Strategy s) const {
  for (const auto& r : rows) {
    if (r.gop_mode == gop_mode && r.strategy == s) return &r;
  }
  return nullptr;
}

std::string BenchReport::to_text() const {
  std::ostringstream os;
  char line[256];
  std::snprintf(line, sizeof line, "%-22s %-15s %10s %15s %14s %11s\n", "gop_mode", "strategy",
                "images", "frames_decoded", "bytes_read", "kb_per_img");
  os << line;
  for (const auto& r : rows) {
    std::snprintf(line, sizeof line, "%-22s %-15s %10llu %15llu %14llu %11.3f\n",
                  r.gop_mode.c_str(), std::string(strategy_name(r.strategy)).c_str(),
                  static_cast<unsigned long long>(r.images),
                  static_cast<unsigned long long>(r.frames_decoded),
                  static_cast<unsigned long long>(r.bytes_read), r.kb_per_img);
    os << line;
  }
  os << "\n# records\n";
  for (const auto& r : rows) {
    std::snprintf(line, sizeof line, "%.3f", r.kb_per_img);
    os << "gop_mode=" << r.gop_mode << " strategy=" << strategy_name(r.strategy)
       << " images=" << r.images << " frames_decoded=" << r.frames_decoded
       << " bytes_read=" << r.bytes_read << " seeks=" << r.seeks << " kb_per_img=" << line << '\n';
  }
  os << "\n# timing (wall clock, varies between runs)\n";
  for (const auto& r : rows) {
    std::snprintf(line, sizeof line, "img_per_s_min=%.1f img_per_s_median=%.1f", r.img_per_s_min,
                  r.img_per_s_median);
    os << "gop_mode=" << r.gop_mode << " strategy=" << strategy_name(r.strategy) << ' ' << line
       << '\n';
  }
  return os.str();
}

namespace {

std::filesystem::path make_work_dir(const std::filesystem::path& requested) {
  namespace fs = std::filesystem;
  if (!requested.empty()) {
    fs::create_directories(requested);
    return requested;
  }
  const auto base = fs::temp_directory_path();
  for (unsigned i = 0;; ++i) {
    auto p = base / ("deskpipe-bench-" + std::to_string(::getpid()) + "-" + std::to_string(i));
    if (fs::create_directory(p)) return p;
  }
}

struct DirGuard {
  std::filesystem::path path;
  bool owned;
  ~DirGuard() {
    std::error_code ec;
    if (owned) std::filesystem::remove_all(path, ec);
  }
};

void reencode(const std::filesystem::path& src, const std::filesystem::path& dst,
              const GopConfig& gop) {
  const auto store = MediaStore::open(src);
  std::vector<Frame> frames;
  frames.reserve(store.frame_count());
  if (store.frame_count() > 0) {
    ByteCounter scratch;
    SequentialDecoder dec(store, 0, scratch);
    while (!dec.at_end()) frames.push_back(dec.next());
  }
  write_media(dst, frames, gop, store.header().fps);
}

}  // namespace

BenchReport bench_pipeline(const DatasetManifest& manifest, const std::filesystem::path& dataset_dir,
                           const BenchConfig& cfg) {
  enforce(cfg.repetitions > 0, ErrorClass::InvalidArgument, "repetitions must be positive");
  for (const auto& g : cfg.gops) g.validate();

  // uri -> plans in manifest order
  std::map<std::string, std::vector<const std::vector<std::uint32_t>*>> plans;
  for (const auto& s : manifest.samples) {
    for (const auto& [uri, frames] : s.plan) plans[uri].push_back(&frames);
  }
  for (const auto& [uri, _] : plans) {
    if (uri.rfind("embedded:", 0) == 0) {
      throw_error(ErrorClass::InvalidArgument, "bench needs external media, found " + uri);
    }
    const auto p = dataset_dir / uri;
    if (!std::filesystem::exists(p)) {
      throw_error(ErrorClass::MediaMissing, "media store not found: " + p.string());
    }
  }

  DirGuard work{make_work_dir(cfg.work_dir), cfg.work_dir.empty()};
  BenchReport report;
  for (const auto& gop : cfg.gops) {
    const auto tag = gop.describe();
    std::map<std::string, std::filesystem::path> stores;
    std::size_t n = 0;
    for (const auto& [uri, _] : plans) {
      auto dst = work.path / (std::to_string(n++) + ".gops");
      reencode(dataset_dir / uri, dst, gop);
      stores[uri] = dst;
    }

    for (auto strategy : cfg.strategies) {
      BenchRow row;
      row.gop_mode = tag;
      row.strategy = strategy;
      std::vector<double> rates;
      for (unsigned rep = 0; rep < cfg.repetitions; ++rep) {
        DecodeStats total;
        ByteCounter opened;
        for (const auto& [uri, list] : plans) {
          const auto store = MediaStore::open(stores[uri], &opened);
          for (const auto* plan : list) total += fetch_frames(*plan, store, strategy).stats;
        }
        total.bytes_read += opened.bytes_read;
        // Byte and frame counts are deterministic; keep the first repetition's.
        if (rep == 0) {
          row.images = total.images;
          row.frames_decoded = total.frames_decoded;
          row.bytes_read = total.bytes_read;
          row.seeks = total.seeks;
          row.kb_per_img = total.kb_per_img();
        }
        rates.push_back(total.img_per_s());
      }
      std::sort(rates.begin(), rates.end());
      row.img_per_s_min = rates.front();
      row.img_per_s_median = rates[rates.size() / 2];
      report.rows.push_back(row);
    }
  }
  return report;
}

}  // namespace deskpipe
