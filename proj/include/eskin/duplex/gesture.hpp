#pragma once

// Touch gestures on the operator-side skin, recognised from zeroed sensor
// readings.

#include <optional>
#include <span>
#include <string>
#include <variant>
#include <vector>

#include "eskin/sensing.hpp"
#include "eskin/skin_model.hpp"

namespace eskin::duplex {

enum class Direction { xp, xn, yp, yn };

struct PressAt {
  std::size_t region = 0;
  double strength_uT = 0.0;  // peak |dB| over the press
  friend bool operator==(const PressAt&, const PressAt&) = default;
};
struct SlideGesture {
  Direction direction = Direction::xp;
  friend bool operator==(const SlideGesture&, const SlideGesture&) = default;
};
struct LongPress {
  std::size_t region = 0;
  friend bool operator==(const LongPress&, const LongPress&) = default;
};
struct NoGesture {
  friend bool operator==(const NoGesture&, const NoGesture&) = default;
};

using Gesture = std::variant<NoGesture, PressAt, SlideGesture, LongPress>;

std::string describe(const Gesture& g);
const char* to_string(Direction d);

struct GestureConfig {
  double threshold_uT = 2.0;     // per-sensor |dB| that counts as contact
  double press_min_ms = 100.0;
  double long_press_ms = 800.0;
  double slide_window_ms = 400.0;  // first to last region entry
  double region_debounce_ms = 40.0;  // argmax must hold this long to register a region
  double release_gap_ms = 120.0;   // sub-threshold time that ends a touch
  skin::SkinGeometry geometry = skin::SkinGeometry::standard();
};

// Streaming recogniser; a gesture is reported once the touch is released.
class GestureRecognizer {
 public:
  explicit GestureRecognizer(GestureConfig cfg = {});

  std::optional<Gesture> push(double t_ms, std::span<const double> zeroed_uT);
  // Ends any touch in progress as if it had just been released.
  std::optional<Gesture> flush();
  bool touching() const { return active_; }

 private:
  struct Entry {
    std::size_t region;
    double since_ms;
  };
  Gesture finish();

  GestureConfig cfg_;
  bool active_ = false;
  double start_ms_ = 0.0;
  double last_active_ms_ = 0.0;
  double peak_ = 0.0;
  std::size_t candidate_ = 0;
  double candidate_since_ = 0.0;
  std::vector<Entry> regions_;
};

// Runs the recogniser over a window and returns the first gesture in it.
Gesture classify_gesture(std::span<const sensing::SensorSample> window, const GestureConfig& cfg = {});

}  // namespace eskin::duplex
