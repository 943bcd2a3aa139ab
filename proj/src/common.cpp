#include "gci/common.hpp"

#include <cmath>
#include <iostream>
#include <limits>
#include <mutex>
#include <numbers>

namespace gci {

ParseError::ParseError(const std::string& source, std::size_t line, const std::string& what)
    : Error(source + ":" + std::to_string(line) + ": " + what), line_(line) {}

namespace {

std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9E3779B97F4A7C15ULL;
  x = (x ^ (x >> 30)) * 0xBF58476D1CE4E5B9ULL;
  x = (x ^ (x >> 27)) * 0x94D049BB133111EBULL;
  return x ^ (x >> 31);
}

std::mutex& sink_mutex() {
  static std::mutex m;
  return m;
}

WarningSink& sink_ref() {
  static WarningSink sink = [](std::string_view msg) { std::cerr << "warning: " << msg << '\n'; };
  return sink;
}

}  // namespace

std::uint64_t derive_seed(std::uint64_t seed, std::uint64_t stream) {
  return splitmix64(splitmix64(seed) ^ splitmix64(stream + 0x632BE59BD9B4E019ULL));
}

Rng::Rng(std::uint64_t seed, std::initializer_list<std::uint64_t> streams) {
  std::uint64_t s = splitmix64(seed);
  for (std::uint64_t id : streams) s = derive_seed(s, id);
  std::seed_seq seq{static_cast<std::uint32_t>(s), static_cast<std::uint32_t>(s >> 32)};
  engine_.seed(seq);
}

double Rng::uniform() { return static_cast<double>(engine_() >> 11) * 0x1.0p-53; }

std::size_t Rng::below(std::size_t n) {
  if (n == 0) throw Error("Rng::below requires n > 0");
  const std::uint64_t bound = static_cast<std::uint64_t>(n);
  const std::uint64_t limit = std::numeric_limits<std::uint64_t>::max() -
                              std::numeric_limits<std::uint64_t>::max() % bound;
  std::uint64_t x;
  do {
    x = engine_();
  } while (x >= limit);
  return static_cast<std::size_t>(x % bound);
}

double Rng::normal() {
  double u1 = uniform();
  while (u1 <= 0.0) u1 = uniform();
  const double u2 = uniform();
  return std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * std::numbers::pi * u2);
}

void set_warning_sink(WarningSink sink) {
  std::lock_guard lock(sink_mutex());
  sink_ref() = std::move(sink);
}

WarningSink current_warning_sink() {
  std::lock_guard lock(sink_mutex());
  return sink_ref();
}

void warn(std::string_view message) {
  WarningSink sink = current_warning_sink();
  if (sink) sink(message);
}

ScopedWarningSink::ScopedWarningSink(WarningSink sink) : previous_(current_warning_sink()) {
  set_warning_sink(std::move(sink));
}

ScopedWarningSink::~ScopedWarningSink() { set_warning_sink(std::move(previous_)); }

}  // namespace gci
