#include "eskin/duplex/gesture.hpp"

#include <cmath>
#include <stdexcept>

namespace eskin::duplex {

const char* to_string(Direction d) {
  switch (d) {
    case Direction::xp: return "+x";
    case Direction::xn: return "-x";
    case Direction::yp: return "+y";
    case Direction::yn: return "-y";
  }
  return "?";
}

std::string describe(const Gesture& g) {
  if (const auto* p = std::get_if<PressAt>(&g)) return "PressAt(" + std::to_string(p->region) + ")";
  if (const auto* s = std::get_if<SlideGesture>(&g)) return std::string("Slide(") + to_string(s->direction) + ")";
  if (const auto* l = std::get_if<LongPress>(&g)) return "LongPress(" + std::to_string(l->region) + ")";
  return "None";
}

GestureRecognizer::GestureRecognizer(GestureConfig cfg) : cfg_(std::move(cfg)) {
  if (!(cfg_.threshold_uT > 0.0)) throw std::invalid_argument("gesture threshold must be > 0");
}

std::optional<Gesture> GestureRecognizer::push(double t_ms, std::span<const double> v) {
  if (v.size() != sensing::kChannels) throw std::invalid_argument("expected 24 channels");
  double peak = 0.0;
  std::size_t region = 0;
  for (std::size_t s = 0; s < skin::kSensors; ++s) {
    const double m = std::sqrt(v[3 * s] * v[3 * s] + v[3 * s + 1] * v[3 * s + 1] + v[3 * s + 2] * v[3 * s + 2]);
    if (m > peak) {
      peak = m;
      region = s;
    }
  }

  if (peak > cfg_.threshold_uT) {
    if (!active_) {
      active_ = true;
      start_ms_ = t_ms;
      peak_ = 0.0;
      regions_.clear();
      candidate_ = region;
      candidate_since_ = t_ms;
    }
    last_active_ms_ = t_ms;
    peak_ = std::max(peak_, peak);
    if (region != candidate_) {
      candidate_ = region;
      candidate_since_ = t_ms;
    }
    if (t_ms - candidate_since_ >= cfg_.region_debounce_ms &&
        (regions_.empty() || regions_.back().region != candidate_))
      regions_.push_back({candidate_, candidate_since_});
    return std::nullopt;
  }
  if (active_ && t_ms - last_active_ms_ > cfg_.release_gap_ms) return finish();
  return std::nullopt;
}

std::optional<Gesture> GestureRecognizer::flush() {
  if (!active_) return std::nullopt;
  return finish();
}

Gesture GestureRecognizer::finish() {
  active_ = false;
  const double held = last_active_ms_ - start_ms_;
  if (regions_.size() >= 2) {
    if (regions_.back().since_ms - regions_.front().since_ms > cfg_.slide_window_ms) return NoGesture{};
    const auto& a = cfg_.geometry.sensors[regions_.front().region];
    const auto& b = cfg_.geometry.sensors[regions_.back().region];
    const double dx = b.x - a.x;
    const double dy = b.y - a.y;
    if (std::abs(dx) >= std::abs(dy)) return SlideGesture{dx > 0 ? Direction::xp : Direction::xn};
    return SlideGesture{dy > 0 ? Direction::yp : Direction::yn};
  }
  if (regions_.size() == 1) {
    if (held >= cfg_.long_press_ms) return LongPress{regions_.front().region};
    if (held >= cfg_.press_min_ms) return PressAt{regions_.front().region, peak_};
  }
  return NoGesture{};
}

Gesture classify_gesture(std::span<const sensing::SensorSample> window, const GestureConfig& cfg) {
  GestureRecognizer rec(cfg);
  for (const auto& s : window)
    if (auto g = rec.push(s.t_ms, s.values)) return *g;
  if (auto g = rec.flush()) return *g;
  return NoGesture{};
}

}  // namespace eskin::duplex
