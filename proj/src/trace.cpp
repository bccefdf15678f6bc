#include "stiefel/trace.hpp"

#include <fstream>
#include <istream>
#include <ostream>
#include <sstream>
#include <string>

#include "stiefel/error.hpp"
#include "stiefel/matrix_io.hpp"

namespace stiefel {

void write_trace_csv(std::ostream& os, const Trace& trace) {
  os << kTraceHeader << '\n';
  for (const auto& r : trace) {
    os << r.iter << ',' << format_real(r.objective) << ',' << format_real(r.feas) << ','
       << format_real(r.skew) << ',' << format_real(r.perp) << ',' << r.wall_ns << '\n';
  }
}

void save_trace_csv(const std::filesystem::path& path, const Trace& trace) {
  std::ofstream os(path);
  if (!os) throw Error(ErrorCode::Io, "cannot open " + path.string() + " for writing");
  write_trace_csv(os, trace);
  if (!os) throw Error(ErrorCode::Io, "write failed: " + path.string());
}

Trace read_trace_csv(std::istream& is) {
  std::string line;
  if (!std::getline(is, line) || line != kTraceHeader)
    throw Error(ErrorCode::Io, "trace header mismatch");
  Trace out;
  while (std::getline(is, line)) {
    if (line.empty()) continue;
    std::istringstream ls(line);
    TraceRow r;
    char c1, c2, c3, c4, c5;
    if (!(ls >> r.iter >> c1 >> r.objective >> c2 >> r.feas >> c3 >> r.skew >> c4 >> r.perp >> c5 >>
          r.wall_ns))
      throw Error(ErrorCode::Io, "bad trace row: " + line);
    out.push_back(r);
  }
  return out;
}

}  // namespace stiefel
