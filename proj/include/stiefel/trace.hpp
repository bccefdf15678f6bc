#pragma once

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <vector>

namespace stiefel {

struct TraceRow {
  long iter = 0;
  double objective = 0;
  double feas = 0;
  double skew = 0;
  double perp = 0;
  std::int64_t wall_ns = 0;
};

using Trace = std::vector<TraceRow>;

inline constexpr const char* kTraceHeader = "iter,objective,feas,skew,perp,wall_ns";

void write_trace_csv(std::ostream& os, const Trace& trace);
void save_trace_csv(const std::filesystem::path& path, const Trace& trace);
Trace read_trace_csv(std::istream& is);

}  // namespace stiefel
