#pragma once

#include <compare>
#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "deskpipe/events.hpp"

namespace deskpipe {

// One symbol of the closed event vocabulary, identified by a dense id.
struct Token {
  std::uint16_t id = 0;

  friend constexpr auto operator<=>(Token, Token) = default;
};

namespace vocab {
inline constexpr std::uint16_t kEventStart = 0;
inline constexpr std::uint16_t kEventEnd = 1;
inline constexpr std::uint16_t kKeyboard = 2;
inline constexpr std::uint16_t kMouse = 3;
inline constexpr std::uint16_t kScreen = 4;
inline constexpr std::uint16_t kDigit0 = 5;  // <0>..<9>
inline constexpr std::uint16_t kSignPlus = 15;
inline constexpr std::uint16_t kSignMinus = 16;
inline constexpr std::uint16_t kMb0 = 17;  // <MB_0>..<MB_15>
inline constexpr std::uint16_t kVk0 = 33;  // <VK_0>..<VK_255>
inline constexpr std::uint16_t kPress = 289;
inline constexpr std::uint16_t kRelease = 290;
inline constexpr std::uint16_t kImgContext = 291;
inline constexpr std::uint16_t kPad = 292;
inline constexpr std::uint16_t kSize = 293;

constexpr Token digit(unsigned d) { return Token{static_cast<std::uint16_t>(kDigit0 + d)}; }
constexpr Token mb(unsigned nibble) { return Token{static_cast<std::uint16_t>(kMb0 + nibble)}; }
constexpr Token vk(unsigned code) { return Token{static_cast<std::uint16_t>(kVk0 + code)}; }
constexpr Token of(std::uint16_t id) { return Token{id}; }

// "<EVENT_START>", "<7>", "<VK_32>", ...
std::string name(Token t);
std::optional<Token> parse(std::string_view symbol);
// "<symbol>\t<id>" per line, in id order.
std::string manifest();
}  // namespace vocab

struct TokenizerConfig {
  std::vector<std::uint32_t> delta_bases{2, 10, 10, 10};
  std::vector<std::uint32_t> ts_bases{10, 10, 10};
  std::uint32_t ts_unit_ms = 10;
  std::uint32_t img_token_count = 256;

  std::uint64_t delta_range() const;      // product(delta_bases)
  std::uint64_t ts_window_units() const;  // product(ts_bases)
  std::uint64_t ts_unit_ns() const { return std::uint64_t{ts_unit_ms} * 1'000'000; }
  void validate() const;
};

struct UnwrapState {
  std::uint64_t last_abs_units = 0;
  std::uint64_t wrap_count = 0;
};

// Most-significant digit first. Throws OutOfRange when value >= product(bases).
std::vector<Token> encode_magnitude(std::uint64_t value, std::span<const std::uint32_t> bases);

// Digits of floor(t / unit) mod window.
std::vector<Token> encode_timestamp(Timestamp t, const TokenizerConfig& cfg = {});

// <EVENT_START><TYPE><timestamp><detail><EVENT_END>. Throws OutOfRange.
std::vector<Token> encode_event(const Event& e, const TokenizerConfig& cfg = {});
void encode_event_into(const Event& e, const TokenizerConfig& cfg, std::vector<Token>& out);
std::size_t encoded_length(const Event& e, const TokenizerConfig& cfg = {});

// Inverse of encode_event for exactly one delimited event. The absolute time
// is unwrapped against `state`, which is advanced. Screen events come back
// with an empty MediaRef; the ref lives in the stream sidecar. Throws
// MalformedEvent.
Event decode_event(std::span<const Token> tokens, UnwrapState& state,
                   const TokenizerConfig& cfg = {});

struct ScreenSidecar {
  MediaRef media;
  std::uint32_t frame_index = 0;

  friend bool operator==(const ScreenSidecar&, const ScreenSidecar&) = default;
};

struct TokenSequence {
  std::vector<Token> tokens;
  std::vector<ScreenSidecar> screens;  // one per screen event, in order
  Timestamp base;
};

// Throws GapTooLarge when consecutive events (or the first event and `base`)
// are a full timestamp window or more apart.
TokenSequence encode_stream(const Episode& ep, const TokenizerConfig& cfg = {},
                            Timestamp base = {});
// Re-attaches sidecar refs when present. Throws MalformedEvent.
Episode decode_stream(const TokenSequence& seq, const TokenizerConfig& cfg = {});

std::string to_text(std::span<const Token> tokens);
// Ignores whitespace between symbols. Throws MalformedEvent on unknown symbols.
std::vector<Token> from_text(std::string_view text);

}  // namespace deskpipe
