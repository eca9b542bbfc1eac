#pragma once

#include <string>
#include <string_view>

namespace aide {

/// Reference to an image or a piece of text handed to perception backends.
/// Text uses the "text:" scheme; anything else is an image URI, a relative
/// path or an opaque backend id.
struct MediaRef {
  std::string uri;

  static MediaRef text(std::string_view s) { return MediaRef{"text:" + std::string(s)}; }
  static MediaRef image(std::string_view s) { return MediaRef{std::string(s)}; }

  bool is_text() const { return uri.starts_with("text:"); }
  std::string_view text_body() const {
    return is_text() ? std::string_view(uri).substr(5) : std::string_view{};
  }
  bool empty() const { return uri.empty(); }

  friend bool operator==(const MediaRef&, const MediaRef&) = default;
  friend auto operator<=>(const MediaRef&, const MediaRef&) = default;
};

}  // namespace aide
