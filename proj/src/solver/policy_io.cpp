#include "kofn/solver/solver.hpp"
#include "kofn/util/csv.hpp"

#include <cstdint>
#include <istream>
#include <ostream>
#include <sstream>
#include <stdexcept>

namespace kofn {

namespace {

constexpr const char* kMagic = "KOFN-POLICY 1";

template <class T>
void put(std::ostream& out, T v) {
  out.write(reinterpret_cast<const char*>(&v), sizeof v);
}

template <class T>
T get(std::istream& in) {
  T v{};
  in.read(reinterpret_cast<char*>(&v), sizeof v);
  if (!in) throw std::runtime_error("policy file: truncated binary block");
  return v;
}

}  // namespace

void write_policy_file(std::ostream& out, const AlphaSet& lower, const std::string& header_text) {
  std::istringstream lines(header_text);
  std::string line;
  out << kMagic << '\n';
  out << "vectors " << lower.size() << '\n';
  out << "states " << lower.n_states() << '\n';
  while (std::getline(lines, line)) out << "# " << line << '\n';
  out << "binary\n";
  for (int i = 0; i < lower.size(); ++i) put<std::int32_t>(out, lower.action(i));
  for (int i = 0; i < lower.size(); ++i)
    for (int s = 0; s < lower.n_states(); ++s) put<double>(out, lower.vector(i)(s));
  if (!out) throw std::runtime_error("policy file: write failed");
}

AlphaSet read_policy_file(std::istream& in, std::string* header_text) {
  std::string line;
  if (!std::getline(in, line) || line != kMagic) throw std::runtime_error("policy file: bad magic");
  int count = -1, states = -1;
  std::string header;
  while (std::getline(in, line)) {
    if (line == "binary") break;
    std::istringstream ls(line);
    std::string key;
    ls >> key;
    if (key == "vectors") ls >> count;
    else if (key == "states") ls >> states;
    else if (line.rfind("# ", 0) == 0) header += line.substr(2) + '\n';
  }
  if (line != "binary" || count < 0 || states <= 0)
    throw std::runtime_error("policy file: malformed header");
  std::vector<int> actions(static_cast<std::size_t>(count));
  for (auto& a : actions) a = get<std::int32_t>(in);
  AlphaSet set(states);
  Eigen::VectorXd alpha(states);
  for (int i = 0; i < count; ++i) {
    for (int s = 0; s < states; ++s) alpha(s) = get<double>(in);
    set.add(alpha, actions[static_cast<std::size_t>(i)]);
  }
  if (header_text) *header_text = header;
  return set;
}

void write_trace_csv(std::ostream& out, const std::vector<TracePoint>& trace) {
  CsvWriter csv(out);
  csv.row({"seconds", "lower_value", "upper_value", "cost_lower", "cost_upper", "alpha_count"});
  for (const TracePoint& p : trace)
    csv.row({format_number(p.seconds), format_number(p.lower), format_number(p.upper),
             format_number(-p.upper), format_number(-p.lower), std::to_string(p.alpha_count)});
}

}  // namespace kofn
