#include "gridshed/netmodel.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <fstream>
#include <map>
#include <sstream>

#include <json.hpp>

namespace gridshed {

namespace {

constexpr double kBalanceTol = 1e-6;

void validate(const std::vector<Bus>& buses, const std::vector<Branch>& branches) {
  const int n = static_cast<int>(buses.size());
  if (n < 2) throw ValidationError("network needs at least 2 buses");
  double total = 0.0;
  for (const Bus& b : buses) {
    if (b.weight <= 0.0)
      throw ValidationError("bus " + std::to_string(b.id) + ": weight must be positive");
    if (b.injection_min > b.base_injection + 1e-12 ||
        b.base_injection > b.injection_max + 1e-12)
      throw ValidationError("bus " + std::to_string(b.id) +
                            ": base injection outside [min, max]");
    total += b.base_injection;
  }
  if (std::abs(total) > kBalanceTol)
    throw ValidationError("injections unbalanced: sum P0 = " + std::to_string(total) +
                          " pu exceeds tolerance 1e-6");
  if (branches.empty()) throw ValidationError("network has no branches");
  for (const Branch& br : branches) {
    const std::string where = "branch " + std::to_string(br.id);
    if (br.from_bus < 0 || br.from_bus >= n || br.to_bus < 0 || br.to_bus >= n)
      throw ValidationError(where + ": endpoint references a missing bus");
    if (br.from_bus == br.to_bus)
      throw ValidationError(where + ": self-loop");
    if (!(br.admittance > 0.0))
      throw ValidationError(where + ": admittance must be positive");
    if (!(br.flow_threshold > 0.0))
      throw ValidationError(where + ": flow threshold must be positive");
  }
}

BusKind parse_kind(const std::string& s, int bus_id) {
  if (s == "generator" || s == "gen") return BusKind::Generator;
  if (s == "load") return BusKind::Load;
  throw ParseError("bus " + std::to_string(bus_id) + ": unknown kind '" + s + "'");
}

PowerNetwork parse_json_case(std::istream& in) {
  nlohmann::json doc;
  try {
    in >> doc;
  } catch (const nlohmann::json::exception& e) {
    throw ParseError(std::string("invalid JSON case: ") + e.what());
  }
  if (!doc.contains("buses") || !doc.contains("branches"))
    throw ParseError("JSON case must contain 'buses' and 'branches' arrays");

  std::vector<Bus> buses;
  std::map<int, int> index_of;  // external id -> internal index
  for (const auto& jb : doc["buses"]) {
    Bus b;
    b.id = jb.at("id").get<int>();
    b.kind = parse_kind(jb.at("kind").get<std::string>(), b.id);
    b.base_injection = jb.at("p0").get<double>();
    b.injection_min = jb.at("pmin").get<double>();
    b.injection_max = jb.at("pmax").get<double>();
    b.weight = jb.value("weight", 1.0);
    if (index_of.count(b.id))
      throw ParseError("duplicate bus id " + std::to_string(b.id));
    index_of[b.id] = static_cast<int>(buses.size());
    buses.push_back(b);
  }
  std::vector<Branch> branches;
  for (const auto& jl : doc["branches"]) {
    Branch br;
    br.id = jl.at("id").get<int>();
    const int from = jl.at("from").get<int>();
    const int to = jl.at("to").get<int>();
    auto fit = index_of.find(from);
    auto tit = index_of.find(to);
    if (fit == index_of.end() || tit == index_of.end())
      throw ValidationError("branch " + std::to_string(br.id) +
                            ": endpoint references a missing bus");
    br.from_bus = fit->second;
    br.to_bus = tit->second;
    br.admittance = jl.at("y").get<double>();
    br.flow_threshold = jl.value("c", 1.0);
    branches.push_back(br);
  }
  return PowerNetwork(std::move(buses), std::move(branches));
}

// Reads the numeric rows of a "mpc.<name> = [ ... ];" block.
std::vector<std::vector<double>> read_matrix_block(const std::string& text,
                                                   const std::string& name) {
  const std::string key = "mpc." + name;
  auto pos = text.find(key);
  if (pos == std::string::npos) throw ParseError("missing " + key + " table");
  pos = text.find('[', pos);
  auto end = text.find("];", pos);
  if (pos == std::string::npos || end == std::string::npos)
    throw ParseError("unterminated " + key + " table");
  std::vector<std::vector<double>> rows;
  std::istringstream block(text.substr(pos + 1, end - pos - 1));
  std::string line;
  int line_no = 0;
  while (std::getline(block, line)) {
    ++line_no;
    auto cut = line.find('%');
    if (cut != std::string::npos) line = line.substr(0, cut);
    std::replace(line.begin(), line.end(), ';', ' ');
    std::istringstream fields(line);
    std::vector<double> row;
    double v;
    while (fields >> v) row.push_back(v);
    if (!fields.eof()) {
      std::string bad;
      fields.clear();
      fields >> bad;
      throw ParseError(key + " row " + std::to_string(line_no) +
                       ": malformed field '" + bad + "'");
    }
    if (!row.empty()) rows.push_back(std::move(row));
  }
  return rows;
}

double scalar_after(const std::string& text, const std::string& key, double fallback) {
  auto pos = text.find(key);
  if (pos == std::string::npos) return fallback;
  pos = text.find('=', pos);
  if (pos == std::string::npos) return fallback;
  return std::strtod(text.c_str() + pos + 1, nullptr);
}

PowerNetwork parse_matpower_case(std::istream& in) {
  std::stringstream buffer;
  buffer << in.rdbuf();
  // strip whole-line comments so stray brackets inside them cannot confuse us
  std::string text;
  {
    std::istringstream raw(buffer.str());
    std::string line;
    while (std::getline(raw, line)) {
      auto cut = line.find('%');
      if (cut != std::string::npos) line = line.substr(0, cut);
      text += line;
      text += '\n';
    }
  }
  const double base_mva = scalar_after(text, "mpc.baseMVA", 100.0);
  if (!(base_mva > 0.0)) throw ParseError("baseMVA must be positive");

  const auto bus_rows = read_matrix_block(text, "bus");
  const auto gen_rows = read_matrix_block(text, "gen");
  const auto branch_rows = read_matrix_block(text, "branch");

  std::map<int, int> index_of;
  std::vector<Bus> buses;
  for (size_t i = 0; i < bus_rows.size(); ++i) {
    const auto& row = bus_rows[i];
    if (row.size() < 3)
      throw ParseError("bus row " + std::to_string(i + 1) + ": too few columns");
    Bus b;
    b.id = static_cast<int>(row[0]);
    const double pd = row[2];
    b.kind = BusKind::Load;
    b.base_injection = -pd / base_mva;
    b.injection_min = -pd / base_mva;
    b.injection_max = 0.0;
    if (index_of.count(b.id))
      throw ParseError("duplicate bus id " + std::to_string(b.id));
    index_of[b.id] = static_cast<int>(buses.size());
    buses.push_back(b);
  }
  for (size_t i = 0; i < gen_rows.size(); ++i) {
    const auto& row = gen_rows[i];
    if (row.size() < 9)
      throw ParseError("gen row " + std::to_string(i + 1) + ": too few columns");
    const int bus_id = static_cast<int>(row[0]);
    const double pg = row[1];
    const bool in_service = row.size() < 8 || row[7] > 0.0;
    if (!in_service) continue;
    const double pmax = row[8];
    auto it = index_of.find(bus_id);
    if (it == index_of.end())
      throw ParseError("gen row " + std::to_string(i + 1) + ": unknown bus " +
                       std::to_string(bus_id));
    Bus& b = buses[it->second];
    b.kind = BusKind::Generator;
    b.base_injection += pg / base_mva;       // net generation and load per bus
    b.injection_max += pmax / base_mva;      // total generator capability
  }
  std::vector<Branch> branches;
  int next_id = 1;
  for (size_t i = 0; i < branch_rows.size(); ++i) {
    const auto& row = branch_rows[i];
    if (row.size() < 4)
      throw ParseError("branch row " + std::to_string(i + 1) + ": too few columns");
    const bool in_service = row.size() < 11 || row[10] > 0.0;
    if (!in_service) continue;
    Branch br;
    br.id = next_id++;
    const int from = static_cast<int>(row[0]);
    const int to = static_cast<int>(row[1]);
    auto fit = index_of.find(from);
    auto tit = index_of.find(to);
    if (fit == index_of.end() || tit == index_of.end())
      throw ValidationError("branch row " + std::to_string(i + 1) + " (" +
                            std::to_string(from) + "-" + std::to_string(to) +
                            "): endpoint references a missing bus");
    br.from_bus = fit->second;
    br.to_bus = tit->second;
    const double x = row[3];
    if (!(x > 0.0))
      throw ValidationError("branch row " + std::to_string(i + 1) +
                            ": reactance must be positive");
    br.admittance = 1.0 / x;
    const double rate_a = row.size() > 5 ? row[5] : 0.0;
    br.flow_threshold = rate_a > 0.0 ? rate_a / base_mva : 1.0;
    branches.push_back(br);
  }
  return PowerNetwork(std::move(buses), std::move(branches));
}

}  // namespace

PowerNetwork::PowerNetwork(std::vector<Bus> buses, std::vector<Branch> branches)
    : buses_(std::move(buses)), branches_(std::move(branches)) {
  validate(buses_, branches_);
  const int n = bus_count();
  const int nb = branch_count();
  incidence_ = Mat::Zero(nb, n);
  for (int l = 0; l < nb; ++l) {
    incidence_(l, branches_[l].from_bus) = 1.0;
    incidence_(l, branches_[l].to_bus) = -1.0;
  }
}

Vec PowerNetwork::base_admittance() const {
  Vec y(branch_count());
  for (int l = 0; l < branch_count(); ++l) y[l] = branches_[l].admittance;
  return y;
}

Vec PowerNetwork::base_injections() const {
  Vec p(bus_count());
  for (int i = 0; i < bus_count(); ++i) p[i] = buses_[i].base_injection;
  return p;
}

Vec PowerNetwork::injection_lower() const {
  Vec p(bus_count());
  for (int i = 0; i < bus_count(); ++i) p[i] = buses_[i].injection_min;
  return p;
}

Vec PowerNetwork::injection_upper() const {
  Vec p(bus_count());
  for (int i = 0; i < bus_count(); ++i) p[i] = buses_[i].injection_max;
  return p;
}

Vec PowerNetwork::weights() const {
  Vec w(bus_count());
  for (int i = 0; i < bus_count(); ++i) w[i] = buses_[i].weight;
  return w;
}

Vec PowerNetwork::flow_thresholds() const {
  Vec c(branch_count());
  for (int l = 0; l < branch_count(); ++l) c[l] = branches_[l].flow_threshold;
  return c;
}

void PowerNetwork::set_weights(const Vec& w) {
  if (w.size() != bus_count()) throw ValidationError("weight vector length mismatch");
  for (int i = 0; i < bus_count(); ++i) {
    if (!(w[i] > 0.0)) throw ValidationError("weights must be positive");
    buses_[i].weight = w[i];
  }
}

void PowerNetwork::set_flow_thresholds(const Vec& c) {
  if (c.size() != branch_count())
    throw ValidationError("threshold vector length mismatch");
  for (int l = 0; l < branch_count(); ++l) {
    if (!(c[l] > 0.0)) throw ValidationError("thresholds must be positive");
    branches_[l].flow_threshold = c[l];
  }
}

PowerNetwork load_case(std::istream& in, CaseFormat format) {
  return format == CaseFormat::Json ? parse_json_case(in) : parse_matpower_case(in);
}

PowerNetwork load_case_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ParseError("cannot open case file: " + path);
  const bool matpower = path.size() >= 2 && path.substr(path.size() - 2) == ".m";
  return load_case(in, matpower ? CaseFormat::Matpower : CaseFormat::Json);
}

Mat incidence_matrix(const PowerNetwork& network) { return network.incidence(); }

Vec apply_disturbance(const PowerNetwork& network, const Vec& delta) {
  if (delta.size() != network.branch_count())
    throw ValidationError("disturbance vector length mismatch");
  Vec y = network.base_admittance() + delta;
  for (int l = 0; l < y.size(); ++l) {
    if (y[l] < -1e-12)
      throw ValidationError("disturbance drives branch " +
                            std::to_string(network.branch(l).id) +
                            " admittance negative");
    if (y[l] < 0.0) y[l] = 0.0;
  }
  return y;
}

}  // namespace gridshed
