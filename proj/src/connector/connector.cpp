#include "sketchfuzz/connector/connector.hpp"

#include "sketchfuzz/connector/mock_engine.hpp"
#include "sketchfuzz/connector/sqlite_connector.hpp"
#include "sketchfuzz/core/text.hpp"

namespace sketchfuzz {

std::string_view to_string(ExecStatus status) {
  switch (status) {
  case ExecStatus::Ok: return "Ok";
  case ExecStatus::SqlError: return "SqlError";
  case ExecStatus::Timeout: return "Timeout";
  case ExecStatus::ConnectionLost: return "ConnectionLost";
  }
  return "?";
}

std::string_view to_string(Liveness liveness) {
  switch (liveness) {
  case Liveness::Alive: return "Alive";
  case Liveness::Dead: return "Dead";
  case Liveness::Unresponsive: return "Unresponsive";
  }
  return "?";
}

std::unique_ptr<Connector> make_connector(const ConnectorConfig& cfg) {
  const std::string& target = cfg.target;
  const auto colon = target.find(':');
  if (colon == std::string::npos)
    throw Error("target must look like <scheme>:<descriptor>: " + target);
  const std::string scheme = text::to_lower(target.substr(0, colon));
  const std::string rest = target.substr(colon + 1);
  if (scheme == "embedded" || scheme == "sqlite") {
    if (rest.empty())
      throw Error("embedded target needs a database path or :memory:");
    return std::make_unique<SqliteConnector>(cfg, rest);
  }
  if (scheme == "mock") {
    std::set<MockFault> faults;
    std::string name;
    auto flush = [&] {
      const std::string n = text::trim(name);
      name.clear();
      if (n.empty() || n == "none")
        return;
      if (n == "all") {
        for (MockFault f : all_mock_faults())
          faults.insert(f);
        return;
      }
      auto f = parse_mock_fault(n);
      if (!f)
        throw Error("unknown mock fault: " + n);
      faults.insert(*f);
    };
    for (char c : rest) {
      if (c == ',' || c == '+')
        flush();
      else
        name.push_back(c);
    }
    flush();
    return std::make_unique<MockConnector>(cfg, std::move(faults));
  }
  throw Error("unknown target scheme: " + scheme);
}

} // namespace sketchfuzz
