#pragma once

#include <functional>
#include <string>
#include <string_view>

namespace govprobe::log {

enum class Level { Info, Warn };

using Sink = std::function<void(Level, std::string_view)>;

// The default sink writes to stderr. Returns the previous sink.
Sink set_sink(Sink sink);

void info(std::string_view message);
void warn(std::string_view message);

// Installs a sink for the lifetime of the object and restores the old one after.
class ScopedSink {
 public:
  explicit ScopedSink(Sink sink) : previous_(set_sink(std::move(sink))) {}
  ~ScopedSink() { set_sink(std::move(previous_)); }
  ScopedSink(const ScopedSink&) = delete;
  ScopedSink& operator=(const ScopedSink&) = delete;

 private:
  Sink previous_;
};

}  // namespace govprobe::log
