#ifndef GRIDSHED_NETMODEL_HPP
#define GRIDSHED_NETMODEL_HPP

#include <Eigen/Dense>
#include <istream>
#include <stdexcept>
#include <string>
#include <vector>

namespace gridshed {

using Vec = Eigen::VectorXd;
using Mat = Eigen::MatrixXd;

class ParseError : public std::runtime_error {
public:
  using std::runtime_error::runtime_error;
};

class ValidationError : public std::runtime_error {
public:
  using std::runtime_error::runtime_error;
};

enum class BusKind { Generator, Load };

/// One bus of the grid. Injections are per-unit on the system MVA base;
/// positive injection feeds power into the network.
struct Bus {
  int id = 0;  // external 1-based id
  BusKind kind = BusKind::Load;
  double base_injection = 0.0;
  double injection_min = 0.0;
  double injection_max = 0.0;
  double weight = 1.0;
};

struct Branch {
  int id = 0;  // external 1-based id (file order)
  int from_bus = 0;  // internal 0-based index
  int to_bus = 0;
  double admittance = 0.0;
  double flow_threshold = 1.0;
};

/// Immutable grid description. Validated on construction; safe to share
/// across threads afterwards.
class PowerNetwork {
public:
  PowerNetwork(std::vector<Bus> buses, std::vector<Branch> branches);

  int bus_count() const { return static_cast<int>(buses_.size()); }
  int branch_count() const { return static_cast<int>(branches_.size()); }
  const std::vector<Bus>& buses() const { return buses_; }
  const std::vector<Branch>& branches() const { return branches_; }
  const Bus& bus(int i) const { return buses_.at(i); }
  const Branch& branch(int l) const { return branches_.at(l); }

  /// Oriented branch-bus incidence matrix, +1 at from, -1 at to.
  const Mat& incidence() const { return incidence_; }

  Vec base_admittance() const;
  Vec base_injections() const;
  Vec injection_lower() const;
  Vec injection_upper() const;
  Vec weights() const;
  Vec flow_thresholds() const;

  void set_weights(const Vec& w);
  void set_flow_thresholds(const Vec& c);

private:
  std::vector<Bus> buses_;
  std::vector<Branch> branches_;
  Mat incidence_;
};

enum class CaseFormat { Json, Matpower };

/// Parses a case file. JSON is the native schema; the MATPOWER-style text
/// reader consumes only the bus/gen/branch columns needed for the DC model.
PowerNetwork load_case(std::istream& in, CaseFormat format);
PowerNetwork load_case_file(const std::string& path);

Mat incidence_matrix(const PowerNetwork& network);

/// Y_p1 = Y_p0 + delta; severing branch l means delta[l] = -Y_p0[l].
Vec apply_disturbance(const PowerNetwork& network, const Vec& delta);

}  // namespace gridshed

#endif
