#include "deskpipe/tokenizer.hpp"

#include <array>
#include <charconv>
#include <cctype>
#include <unordered_map>

#include "deskpipe/errors.hpp"

namespace deskpipe {

namespace vocab {

namespace {

std::array<std::string, kSize> build_names() {
  std::array<std::string, kSize> names;
  names[kEventStart] = "<EVENT_START>";
  names[kEventEnd] = "<EVENT_END>";
  names[kKeyboard] = "<KEYBOARD>";
  names[kMouse] = "<MOUSE>";
  names[kScreen] = "<SCREEN>";
  for (unsigned d = 0; d < 10; ++d) names[kDigit0 + d] = "<" + std::to_string(d) + ">";
  names[kSignPlus] = "<SIGN_PLUS>";
  names[kSignMinus] = "<SIGN_MINUS>";
  for (unsigned n = 0; n < 16; ++n) names[kMb0 + n] = "<MB_" + std::to_string(n) + ">";
  for (unsigned n = 0; n < 256; ++n) names[kVk0 + n] = "<VK_" + std::to_string(n) + ">";
  names[kPress] = "<press>";
  names[kRelease] = "<release>";
  names[kImgContext] = "<IMG_CONTEXT>";
  names[kPad] = "<PAD>";
  return names;
}

const std::array<std::string, kSize>& names() {
  static const auto kNames = build_names();
  return kNames;
}

const std::unordered_map<std::string_view, std::uint16_t>& ids() {
  static const auto kIds = [] {
    std::unordered_map<std::string_view, std::uint16_t> m;
    for (std::uint16_t i = 0; i < kSize; ++i) m.emplace(names()[i], i);
    return m;
  }();
  return kIds;
}

}  // namespace

std::string name(Token t) {
  if (t.id >= kSize) {
    throw_error(ErrorClass::MalformedEvent, "token id " + std::to_string(t.id) +
                                            " outside vocabulary");
  }
  return names()[t.id];
}

std::optional<Token> parse(std::string_view symbol) {
  const auto it = ids().find(symbol);
  if (it == ids().end()) return std::nullopt;
  return Token{it->second};
}

std::string manifest() {
  std::string out;
  for (std::uint16_t i = 0; i < kSize; ++i) {
    out += names()[i];
    out += '\t';
    out += std::to_string(i);
    out += '\n';
  }
  return out;
}

}  // namespace vocab

namespace {

std::uint64_t product(std::span<const std::uint32_t> bases) {
  std::uint64_t p = 1;
  for (auto b : bases) p *= b;
  return p;
}

void check_bases(std::span<const std::uint32_t> bases, const char* what) {
  if (bases.empty()) {
    throw_error(ErrorClass::InvalidArgument, std::string(what) + " must not be empty");
  }
  for (auto b : bases) {
    if (!(b >= 2 && b <= 10)) {
      throw_error(ErrorClass::InvalidArgument, std::string(what) +
                                               " entries must lie in [2,10] (digit tokens are <0>..<9>)");
    }
  }
}

void append_magnitude(std::uint64_t value, std::span<const std::uint32_t> bases,
                      std::vector<Token>& out) {
  if (value >= product(bases)) {
    throw_error(ErrorClass::OutOfRange, "magnitude " + std::to_string(value) + " exceeds range " +
                                        std::to_string(product(bases)));
  }
  const std::size_t at = out.size();
  out.resize(at + bases.size());
  for (std::size_t i = bases.size(); i-- > 0;) {
    out[at + i] = vocab::digit(static_cast<unsigned>(value % bases[i]));
    value /= bases[i];
  }
}

void append_signed(std::int64_t value, std::span<const std::uint32_t> bases,
                   std::vector<Token>& out) {
  out.push_back(vocab::of(value < 0 ? vocab::kSignMinus : vocab::kSignPlus));
  append_magnitude(static_cast<std::uint64_t>(value < 0 ? -value : value), bases, out);
}

void append_timestamp(Timestamp t, const TokenizerConfig& cfg, std::vector<Token>& out) {
  append_magnitude((t.ns / cfg.ts_unit_ns()) % cfg.ts_window_units(), cfg.ts_bases, out);
}

constexpr std::array<std::uint32_t, 3> kHexBases{16, 16, 16};
constexpr std::array<std::uint32_t, 1> kScrollBases{10};

// Bounds-checked cursor over one event's tokens.
class Cursor {
 public:
  explicit Cursor(std::span<const Token> tokens) : tokens_(tokens) {}

  Token take() {
    enforce(pos_ < tokens_.size(), ErrorClass::MalformedEvent, "event ends prematurely");
    return tokens_[pos_++];
  }
  void expect(std::uint16_t id) {
    const auto t = take();
    if (t.id != id) {
      throw_error(ErrorClass::MalformedEvent, "expected " + vocab::name(Token{id}) + " at position " +
                                              std::to_string(pos_ - 1) + ", found " +
                                              (t.id < vocab::kSize ? vocab::name(t) : std::to_string(t.id)));
    }
  }
  Token peek() const {
    enforce(pos_ < tokens_.size(), ErrorClass::MalformedEvent, "event ends prematurely");
    return tokens_[pos_];
  }
  std::uint64_t digits(std::span<const std::uint32_t> bases) {
    std::uint64_t v = 0;
    for (auto b : bases) {
      const auto t = take();
      if (!(t.id >= vocab::kDigit0 && t.id < vocab::kDigit0 + 10)) {
        throw_error(ErrorClass::MalformedEvent, "expected a digit token at position " +
                                                std::to_string(pos_ - 1));
      }
      const unsigned d = t.id - vocab::kDigit0;
      if (d >= b) {
        throw_error(ErrorClass::MalformedEvent, "digit " + std::to_string(d) + " not valid in base " +
                                                std::to_string(b));
      }
      v = v * b + d;
    }
    return v;
  }
  std::int64_t signed_digits(std::span<const std::uint32_t> bases) {
    const auto sign = take();
    enforce(sign.id == vocab::kSignPlus || sign.id == vocab::kSignMinus,
            ErrorClass::MalformedEvent, "expected a sign token");
    const auto mag = static_cast<std::int64_t>(digits(bases));
    return sign.id == vocab::kSignMinus ? -mag : mag;
  }
  std::uint64_t hex_digits() {
    std::uint64_t v = 0;
    for (std::size_t i = 0; i < kHexBases.size(); ++i) {
      const auto t = take();
      enforce(t.id >= vocab::kMb0 && t.id < vocab::kMb0 + 16, ErrorClass::MalformedEvent,
              "expected a mouse-button token");
      v = v * 16 + (t.id - vocab::kMb0);
    }
    return v;
  }
  bool done() const { return pos_ == tokens_.size(); }

 private:
  std::span<const Token> tokens_;
  std::size_t pos_ = 0;
};

}  // namespace

std::uint64_t TokenizerConfig::delta_range() const { return product(delta_bases); }
std::uint64_t TokenizerConfig::ts_window_units() const { return product(ts_bases); }

void TokenizerConfig::validate() const {
  check_bases(delta_bases, "delta_bases");
  check_bases(ts_bases, "ts_bases");
  enforce(ts_unit_ms > 0, ErrorClass::InvalidArgument, "ts_unit_ms must be positive");
}

std::vector<Token> encode_magnitude(std::uint64_t value, std::span<const std::uint32_t> bases) {
  check_bases(bases, "bases");
  std::vector<Token> out;
  append_magnitude(value, bases, out);
  return out;
}

std::vector<Token> encode_timestamp(Timestamp t, const TokenizerConfig& cfg) {
  cfg.validate();
  std::vector<Token> out;
  append_timestamp(t, cfg, out);
  return out;
}

void encode_event_into(const Event& e, const TokenizerConfig& cfg, std::vector<Token>& out) {
  out.push_back(vocab::of(vocab::kEventStart));
  if (const auto* s = std::get_if<ScreenEvent>(&e)) {
    out.push_back(vocab::of(vocab::kScreen));
    append_timestamp(s->t, cfg, out);
    out.insert(out.end(), cfg.img_token_count, vocab::of(vocab::kImgContext));
  } else if (const auto* k = std::get_if<KeyboardEvent>(&e)) {
    enforce(k->vk <= 255, ErrorClass::OutOfRange, "virtual key outside [0,255]");
    out.push_back(vocab::of(vocab::kKeyboard));
    append_timestamp(k->t, cfg, out);
    out.push_back(vocab::vk(k->vk));
    out.push_back(vocab::of(k->action == KeyAction::Press ? vocab::kPress : vocab::kRelease));
  } else {
    const auto& m = std::get<MouseEvent>(e);
    enforce((m.button_flags & ~mouse_flags::kAllDefined) == 0, ErrorClass::OutOfRange,
            "mouse flags exceed 12 bits");
    const bool wheel = (m.button_flags & mouse_flags::kAnyWheel) != 0;
    enforce((m.button_flags & mouse_flags::kAnyWheel) != mouse_flags::kAnyWheel,
            ErrorClass::OutOfRange, "vertical and horizontal wheel in one event");
    enforce(wheel == m.scroll.has_value(), ErrorClass::OutOfRange,
            "scroll must be present exactly when a wheel flag is set");
    out.push_back(vocab::of(vocab::kMouse));
    append_timestamp(m.t, cfg, out);
    append_signed(m.dx, cfg.delta_bases, out);
    append_signed(m.dy, cfg.delta_bases, out);
    for (std::size_t i = kHexBases.size(); i-- > 0;) {
      out.push_back(vocab::mb((m.button_flags >> (4 * i)) & 0xF));
    }
    if (m.scroll) {
      if (std::abs(*m.scroll) > kMaxScroll) {
        throw_error(ErrorClass::OutOfRange, "scroll " + std::to_string(*m.scroll) +
                                            " outside +/-9");
      }
      append_signed(*m.scroll, kScrollBases, out);
    }
  }
  out.push_back(vocab::of(vocab::kEventEnd));
}

std::vector<Token> encode_event(const Event& e, const TokenizerConfig& cfg) {
  cfg.validate();
  std::vector<Token> out;
  encode_event_into(e, cfg, out);
  return out;
}

std::size_t encoded_length(const Event& e, const TokenizerConfig& cfg) {
  const std::size_t frame = 2 + cfg.ts_bases.size() + 1;  // start, type, ts..., end
  if (std::holds_alternative<ScreenEvent>(e)) return frame + cfg.img_token_count;
  if (std::holds_alternative<KeyboardEvent>(e)) return frame + 2;
  const auto& m = std::get<MouseEvent>(e);
  return frame + 2 * (1 + cfg.delta_bases.size()) + kHexBases.size() + (m.scroll ? 2 : 0);
}

Event decode_event(std::span<const Token> tokens, UnwrapState& state, const TokenizerConfig& cfg) {
  Cursor c(tokens);
  c.expect(vocab::kEventStart);
  const auto type = c.take();

  const auto window = cfg.ts_window_units();
  const auto cyclic = c.digits(cfg.ts_bases);
  const auto last_mod = state.last_abs_units % window;
  const auto advance = (cyclic + window - last_mod) % window;
  if (last_mod + advance >= window) ++state.wrap_count;
  const auto abs_units = state.last_abs_units + advance;
  const Timestamp t{abs_units * cfg.ts_unit_ns()};

  Event out;
  switch (type.id) {
    case vocab::kScreen: {
      for (std::uint32_t i = 0; i < cfg.img_token_count; ++i) c.expect(vocab::kImgContext);
      ScreenEvent s;
      s.t = t;
      out = std::move(s);
      break;
    }
    case vocab::kKeyboard: {
      const auto key = c.take();
      enforce(key.id >= vocab::kVk0 && key.id < vocab::kVk0 + 256, ErrorClass::MalformedEvent,
              "expected a VK token");
      const auto action = c.take();
      enforce(action.id == vocab::kPress || action.id == vocab::kRelease,
              ErrorClass::MalformedEvent, "expected <press> or <release>");
      out = KeyboardEvent{t, static_cast<std::uint16_t>(key.id - vocab::kVk0),
                          action.id == vocab::kPress ? KeyAction::Press : KeyAction::Release};
      break;
    }
    case vocab::kMouse: {
      MouseEvent m;
      m.t = t;
      m.dx = static_cast<std::int32_t>(c.signed_digits(cfg.delta_bases));
      m.dy = static_cast<std::int32_t>(c.signed_digits(cfg.delta_bases));
      m.button_flags = static_cast<std::uint16_t>(c.hex_digits());
      const auto wheel_bits = m.button_flags & mouse_flags::kAnyWheel;
      enforce(wheel_bits != mouse_flags::kAnyWheel, ErrorClass::MalformedEvent,
              "vertical and horizontal wheel in one event");
      const bool has_scroll = c.peek().id != vocab::kEventEnd;
      enforce(has_scroll == (wheel_bits != 0), ErrorClass::MalformedEvent,
              has_scroll ? "scroll data without a wheel flag" : "wheel flag without scroll data");
      if (has_scroll) m.scroll = static_cast<std::int32_t>(c.signed_digits(kScrollBases));
      out = m;
      break;
    }
    default:
      throw_error(ErrorClass::MalformedEvent, "unknown event type token");
  }
  c.expect(vocab::kEventEnd);
  enforce(c.done(), ErrorClass::MalformedEvent, "tokens after <EVENT_END>");
  state.last_abs_units = abs_units;
  return out;
}

TokenSequence encode_stream(const Episode& ep, const TokenizerConfig& cfg, Timestamp base) {
  cfg.validate();
  TokenSequence seq;
  seq.base = base;
  const auto unit = cfg.ts_unit_ns();
  const auto window = cfg.ts_window_units();
  std::uint64_t prev = base.ns / unit;
  for (std::size_t i = 0; i < ep.events.size(); ++i) {
    const auto& e = ep.events[i];
    const auto units = timestamp_of(e).ns / unit;
    if (units < prev) {
      throw_error(ErrorClass::InvalidArgument, "event " + std::to_string(i) +
                                               " precedes its predecessor; normalize first");
    }
    if (units - prev >= window) {
      throw_error(ErrorClass::GapTooLarge, "event " + std::to_string(i) + " is " +
                                           std::to_string((units - prev) * cfg.ts_unit_ms) +
                                           " ms after its predecessor; the cyclic timestamp window is " +
                                           std::to_string(window * cfg.ts_unit_ms) + " ms");
    }
    prev = units;
    if (const auto* s = std::get_if<ScreenEvent>(&e)) seq.screens.push_back({s->media, s->frame_index});
    encode_event_into(e, cfg, seq.tokens);
  }
  return seq;
}

Episode decode_stream(const TokenSequence& seq, const TokenizerConfig& cfg) {
  cfg.validate();
  Episode ep;
  UnwrapState state{seq.base.ns / cfg.ts_unit_ns(), 0};
  std::size_t screen = 0;
  std::size_t start = 0;
  const auto& toks = seq.tokens;
  while (start < toks.size()) {
    if (toks[start].id != vocab::kEventStart) {
      throw_error(ErrorClass::MalformedEvent, "expected <EVENT_START> at token " +
                                              std::to_string(start));
    }
    std::size_t end = start + 1;
    while (end < toks.size() && toks[end].id != vocab::kEventEnd) ++end;
    if (end >= toks.size()) {
      throw_error(ErrorClass::MalformedEvent, "unterminated event at token " +
                                              std::to_string(start));
    }
    auto e = decode_event(std::span(toks).subspan(start, end - start + 1), state, cfg);
    if (auto* s = std::get_if<ScreenEvent>(&e); s != nullptr && screen < seq.screens.size()) {
      s->media = seq.screens[screen].media;
      s->frame_index = seq.screens[screen].frame_index;
      ++screen;
    }
    ep.events.push_back(std::move(e));
    start = end + 1;
  }
  return ep;
}

std::string to_text(std::span<const Token> tokens) {
  std::string out;
  out.reserve(tokens.size() * 5);
  for (auto t : tokens) out += vocab::name(t);
  return out;
}

std::vector<Token> from_text(std::string_view text) {
  std::vector<Token> out;
  std::size_t i = 0;
  while (i < text.size()) {
    if (std::isspace(static_cast<unsigned char>(text[i]))) {
      ++i;
      continue;
    }
    if (text[i] != '<') {
      throw_error(ErrorClass::MalformedEvent, "expected '<' at offset " + std::to_string(i));
    }
    const auto close = text.find('>', i);
    enforce(close != std::string_view::npos, ErrorClass::MalformedEvent, "unterminated token symbol");
    const auto sym = text.substr(i, close - i + 1);
    const auto tok = vocab::parse(sym);
    if (!tok) {
      throw_error(ErrorClass::MalformedEvent, "unknown token " + std::string(sym));
    }
    out.push_back(*tok);
    i = close + 1;
  }
  return out;
}

}  // namespace deskpipe
