#include "gridest/model/feeder.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <map>
#include <set>
#include <sstream>

#include <json.hpp>

#include "csv.hpp"

namespace gridest::model {

namespace {

// Union-find with path compression; canonical representative is the smallest id.
class DisjointSets {
 public:
  int find(int x) {
    auto it = parent_.find(x);
    if (it == parent_.end()) {
      parent_[x] = x;
      return x;
    }
    int root = x;
    while (parent_[root] != root) root = parent_[root];
    while (parent_[x] != root) {
      int next = parent_[x];
      parent_[x] = root;
      x = next;
    }
    return root;
  }

  // Returns false if already joined.
  bool join(int a, int b) {
    int ra = find(a), rb = find(b);
    if (ra == rb) return false;
    if (rb < ra) std::swap(ra, rb);
    parent_[rb] = ra;
    return true;
  }

 private:
  std::map<int, int> parent_;
};

double wrap_deg(double d) {
  while (d > 180.0) d -= 360.0;
  while (d <= -180.0) d += 360.0;
  return d;
}

void validate_general(const GeneralData& g) {
  if (g.v_nom_kv <= 0.0) throw Error(Errc::invalid_model, "Vnom must be positive");
  for (double m : g.slack_mag_pu)
    if (m <= 0.5 || m >= 1.5)
      throw Error(Errc::invalid_model, "slack magnitude outside (0.5, 1.5) pu");
  const double ab = std::abs(wrap_deg(g.slack_ang_deg[0] - g.slack_ang_deg[1]));
  const double bc = std::abs(wrap_deg(g.slack_ang_deg[1] - g.slack_ang_deg[2]));
  const double ca = std::abs(wrap_deg(g.slack_ang_deg[2] - g.slack_ang_deg[0]));
  for (double d : {ab, bc, ca})
    if (std::abs(d - 120.0) > 1e-9)
      throw Error(Errc::invalid_model, "slack angles are not a 120-degree set");
}

void validate_config(const LineConfig& c) {
  if (!c.is_line) return;
  PhaseSet ph = c.phasing();
  for (int i = 0; i < 3; ++i) {
    if (ph.has(i)) continue;
    for (int j = 0; j < 3; ++j) {
      bool zero = c.r_ohm_per_mile(i, j) == 0.0 && c.r_ohm_per_mile(j, i) == 0.0 &&
                  c.x_ohm_per_mile(i, j) == 0.0 && c.x_ohm_per_mile(j, i) == 0.0 &&
                  c.b_usiemens_per_mile(i, j) == 0.0 && c.b_usiemens_per_mile(j, i) == 0.0;
      if (!zero) {
        std::ostringstream os;
        os << "config " << c.config_id << ": phase " << phase_letter(i)
           << " absent from phasing but has nonzero coupling";
        throw Error(Errc::invalid_model, os.str());
      }
    }
  }
}

}  // namespace

const LineConfig& FeederModel::config(int id) const {
  auto it = configs_.find(id);
  if (it == configs_.end())
    throw Error(Errc::dangling_config_reference, "unknown config " + std::to_string(id));
  return it->second;
}

FeederModel FeederModel::from_parts(GeneralData general, std::vector<LineConfig> configs,
                                    std::vector<LineSegment> segments, std::vector<SpotLoad> loads,
                                    std::vector<SwitchLink> switches, std::vector<NodeCoord> coords,
                                    SourceTables sources) {
  validate_general(general);

  FeederModel m;
  m.general_ = std::move(general);
  for (const auto& c : configs) {
    validate_config(c);
    if (!m.configs_.emplace(c.config_id, c).second)
      throw Error(Errc::invalid_model, "duplicate config id " + std::to_string(c.config_id));
  }

  std::set<std::pair<int, int>> seen;
  for (const auto& s : segments) {
    if (s.length_ft <= 0.0)
      throw Error(Errc::invalid_model, "segment " + std::to_string(s.from_bus) + "-" +
                                           std::to_string(s.to_bus) + " has non-positive length");
    if (!m.configs_.count(s.config_id))
      throw Error(Errc::dangling_config_reference,
                  "segment " + std::to_string(s.from_bus) + "-" + std::to_string(s.to_bus) +
                      " references unknown config " + std::to_string(s.config_id));
    auto key = std::minmax(s.from_bus, s.to_bus);
    if (!seen.insert(key).second)
      throw Error(Errc::duplicate_segment, "duplicate segment " + std::to_string(s.from_bus) +
                                               "-" + std::to_string(s.to_bus));
  }
  m.segments_ = std::move(segments);

  for (const auto& l : loads) {
    for (int p = 0; p < 3; ++p)
      if (l.p_kw[p] < 0.0 || l.q_kvar[p] < 0.0)
        throw Error(Errc::invalid_model,
                    "load at bus " + std::to_string(l.bus) + " has negative power");
    if (l.phases().empty())
      throw Error(Errc::invalid_model, "load at bus " + std::to_string(l.bus) + " is all-zero");
  }
  m.loads_ = std::move(loads);

  for (const auto& s : switches)
    if (s.bus_a == s.bus_b)
      throw Error(Errc::invalid_model, "switch endpoints coincide at bus " + std::to_string(s.bus_a));
  m.switches_ = std::move(switches);
  m.coords_ = std::move(coords);
  m.sources_ = std::move(sources);

  m.index_buses();
  m.build_adjacency();
  return m;
}

void FeederModel::index_buses() {
  std::set<int> ids;
  ids.insert(general_.slack_bus);
  for (const auto& s : segments_) {
    ids.insert(s.from_bus);
    ids.insert(s.to_bus);
  }
  for (const auto& s : switches_) {
    ids.insert(s.bus_a);
    ids.insert(s.bus_b);
  }
  buses_.assign(ids.begin(), ids.end());
}

int FeederModel::canonical(int bus) const {
  if (!merged_) return bus;
  auto it = canon_.find(bus);
  return it == canon_.end() ? bus : it->second;
}

std::vector<int> FeederModel::aliases(int bus) const {
  std::vector<int> out;
  if (!merged_) {
    out.push_back(bus);
    return out;
  }
  for (const auto& [orig, canon] : canon_)
    if (canon == bus) out.push_back(orig);
  if (out.empty()) out.push_back(bus);
  return out;
}

void FeederModel::build_adjacency() {
  adjacency_.clear();
  for (int b : merged_buses()) adjacency_[b];
  for (std::size_t i = 0; i < segments_.size(); ++i) {
    int a = canonical(segments_[i].from_bus);
    int b = canonical(segments_[i].to_bus);
    adjacency_[a].push_back(static_cast<int>(i));
    if (b != a) adjacency_[b].push_back(static_cast<int>(i));
  }

  // Phase presence by sweep from the slack; intersect along the path.
  bus_phases_.clear();
  int slack = canonical(general_.slack_bus);
  std::vector<int> queue{slack};
  bus_phases_[slack] = PhaseSet::all();
  std::set<int> visited{slack};
  while (!queue.empty()) {
    int n = queue.back();
    queue.pop_back();
    for (int si : adjacency_[n]) {
      const auto& seg = segments_[si];
      int other = canonical(seg.from_bus) == n ? canonical(seg.to_bus) : canonical(seg.from_bus);
      if (visited.count(other)) continue;
      visited.insert(other);
      PhaseSet seg_ph = config(seg.config_id).phasing();
      PhaseSet held = bus_phases_[n];
      PhaseSet inter;
      for (int p = 0; p < 3; ++p)
        if (seg_ph.has(p) && held.has(p)) inter.add(p);
      bus_phases_[other] = inter;
      queue.push_back(other);
    }
  }
}

const std::vector<int>& FeederModel::incident_segments(int canonical_bus) const {
  static const std::vector<int> empty;
  auto it = adjacency_.find(canonical_bus);
  return it == adjacency_.end() ? empty : it->second;
}

PhaseSet FeederModel::bus_phases(int canonical_bus) const {
  auto it = bus_phases_.find(canonical_bus);
  return it == bus_phases_.end() ? PhaseSet::none() : it->second;
}

std::array<double, 3> FeederModel::segment_tap(const LineSegment& seg) const {
  auto key = std::to_string(seg.from_bus) + "-" + std::to_string(seg.to_bus);
  auto rkey = std::to_string(seg.to_bus) + "-" + std::to_string(seg.from_bus);
  auto it = general_.segment_taps.find(key);
  if (it == general_.segment_taps.end()) it = general_.segment_taps.find(rkey);
  if (it == general_.segment_taps.end()) return {1.0, 1.0, 1.0};
  return it->second;
}

BranchAdmittance branch_impedance(const LineSegment& segment, const LineConfig& config) {
  if (!config.is_line)
    throw Error(Errc::transformer_config_passed,
                "config " + std::to_string(config.config_id) +
                    " is a transformer entry; use the transformer handler");
  const double scale = segment.length_ft / 5280.0;
  BranchAdmittance out;
  out.phases = config.phasing();
  for (int i = 0; i < 3; ++i)
    for (int j = 0; j < 3; ++j) {
      out.z_series(i, j) = cd(config.r_ohm_per_mile(i, j), config.x_ohm_per_mile(i, j)) * scale;
      out.y_shunt_half(i, j) = cd(0.0, config.b_usiemens_per_mile(i, j) * 1e-6 * scale / 2.0);
    }
  return out;
}

BranchAdmittance transformer_impedance(const LineSegment& segment, const LineConfig& config,
                                       const GeneralData& general) {
  (void)segment;  // length is not meaningful for a transformer entry
  if (config.is_line)
    throw Error(Errc::invalid_model,
                "config " + std::to_string(config.config_id) + " is a line, not a transformer");
  const double z_base = (general.v_nom_kv * 1e3) * (general.v_nom_kv * 1e3) / kSBaseVA;
  const cd z_pu(config.r_ohm_per_mile(0, 0), config.x_ohm_per_mile(0, 0));
  BranchAdmittance out;
  out.is_transformer = true;
  out.phases = PhaseSet::all();
  for (int p = 0; p < 3; ++p) out.z_series(p, p) = z_pu * z_base;
  return out;
}

BranchAdmittance segment_admittance(const FeederModel& model, const LineSegment& segment) {
  const LineConfig& cfg = model.config(segment.config_id);
  return cfg.is_line ? branch_impedance(segment, cfg)
                     : transformer_impedance(segment, cfg, model.general());
}

FeederModel merge_switches(const FeederModel& model) {
  DisjointSets sets;
  for (const auto& sw : model.switches()) {
    if (!sw.closed) continue;
    int a = model.canonical(sw.bus_a);
    int b = model.canonical(sw.bus_b);
    if (a == b || !sets.join(a, b)) {
      std::ostringstream os;
      os << "closing switch " << sw.bus_a << "-" << sw.bus_b
         << " would identify already-merged buses (loop through the closed-switch set)";
      throw Error(Errc::merge_creates_cycle, os.str());
    }
  }

  FeederModel out = model;
  out.merged_ = true;
  out.canon_.clear();
  std::set<int> canon_set;
  for (int b : model.buses()) {
    int c = sets.find(model.canonical(b));
    out.canon_[b] = c;
    canon_set.insert(c);
  }
  out.merged_buses_.assign(canon_set.begin(), canon_set.end());
  out.build_adjacency();
  return out;
}

std::vector<Finding> validate_topology(const FeederModel& model) {
  std::vector<Finding> findings;
  const FeederModel* m = &model;
  FeederModel merged_storage;
  if (!model.merged()) {
    try {
      merged_storage = merge_switches(model);
      m = &merged_storage;
    } catch (const Error& e) {
      findings.push_back({"radiality", e.what()});
      return findings;
    }
  }

  // A bus named by exactly one segment endpoint and nothing else is taken as a
  // reference to an undefined bus.
  std::map<int, int> mentions;
  for (const auto& s : m->segments()) {
    mentions[s.from_bus]++;
    mentions[s.to_bus]++;
  }
  std::set<int> defined;
  defined.insert(m->general().slack_bus);
  for (const auto& s : m->switches()) {
    defined.insert(s.bus_a);
    defined.insert(s.bus_b);
  }
  for (const auto& l : m->loads()) defined.insert(l.bus);
  for (const auto& c : m->coords()) defined.insert(c.bus);
  for (const auto& [bus, n] : mentions)
    if (n == 1 && !defined.count(bus))
      findings.push_back({"connectivity",
                          "bus " + std::to_string(bus) + " appears in one segment and nowhere else"});

  for (const auto& l : m->loads())
    if (!mentions.count(l.bus) && m->general().slack_bus != l.bus)
      findings.push_back({"connectivity",
                          "load references bus " + std::to_string(l.bus) + " absent from the graph"});

  // Connectivity and radiality over canonical buses.
  DisjointSets comp;
  int loops = 0;
  for (const auto& s : m->segments()) {
    int a = m->canonical(s.from_bus);
    int b = m->canonical(s.to_bus);
    if (a == b || !comp.join(a, b)) {
      ++loops;
      findings.push_back({"radiality", "segment " + std::to_string(s.from_bus) + "-" +
                                           std::to_string(s.to_bus) + " closes a loop"});
    }
  }
  int slack = m->canonical(m->general().slack_bus);
  int unreachable = 0;
  for (int b : m->merged_buses())
    if (comp.find(b) != comp.find(slack)) ++unreachable;
  if (unreachable > 0)
    findings.push_back({"connectivity", std::to_string(unreachable) +
                                            " bus(es) unreachable from the slack bus " +
                                            std::to_string(m->general().slack_bus)});

  if (unreachable == 0 && loops == 0) {
    // Phase consistency: each bus must carry the phases of every load on it.
    for (const auto& l : m->loads()) {
      PhaseSet at_bus = m->bus_phases(m->canonical(l.bus));
      if (!at_bus.superset_of(l.phases()))
        findings.push_back(
            {"phase-consistency", "load at bus " + std::to_string(l.bus) + " needs phases " +
                                      l.phases().str() + " but the feeding path carries only '" +
                                      at_bus.str() + "'"});
    }
  }
  return findings;
}

// ---------------------------------------------------------------------------
// Parsing

namespace {

constexpr const char* kLinesHeader = "Node A,Node B,Length (ft.),Config.";
constexpr const char* kConfigsHeader =
    "Conf,Lin=1, Trafo=0,R11,R12,R13,R22,R23,R33,"
    "X11,X12,X13,X22,X23,X33,B11,B12,B13,B22,B23,B33";
constexpr const char* kLoadsHeader =
    "Node,Y=1, D=0,Alfa (PQ=0, I=1, Z=2),Ph-1 (kW),Ph-1 (kVAr),"
    "Ph-2 (kW),Ph-2 (kVAr),Ph-3 (kW),Ph-3 (kVAr)";
constexpr const char* kCoordsHeader = "Node,Pos X,Pos Y";
constexpr const char* kSwitchesHeader = "NODE1,NODE2,Closed=1";
constexpr const char* kGeneralHeader = "General Data,";

SourceTable to_source(const CsvFile& f) { return SourceTable{f.header, f.rows}; }

// Symmetric 3x3 from the six stored upper-triangle cells in 11,12,13,22,23,33 order.
Eigen::Matrix3d sym_from_cells(const CsvFile& f, std::size_t row, std::size_t col0) {
  Eigen::Matrix3d m;
  double c11 = parse_cell(f, row, col0 + 0), c12 = parse_cell(f, row, col0 + 1);
  double c13 = parse_cell(f, row, col0 + 2), c22 = parse_cell(f, row, col0 + 3);
  double c23 = parse_cell(f, row, col0 + 4), c33 = parse_cell(f, row, col0 + 5);
  m << c11, c12, c13, c12, c22, c23, c13, c23, c33;
  return m;
}

bool parse_tap_key(const std::string& key, std::string& segment, int& phase) {
  // Optional regulator override: Tap_<from>-<to>_ph_<A|B|C>
  if (key.rfind("Tap_", 0) != 0) return false;
  std::size_t ph_pos = key.rfind("_ph_");
  if (ph_pos == std::string::npos || ph_pos + 5 != key.size()) return false;
  char p = key.back();
  if (p < 'A' || p > 'C') return false;
  segment = key.substr(4, ph_pos - 4);
  phase = p - 'A';
  return true;
}

}  // namespace

FeederModel parse_feeder(const std::string& directory) {
  auto path = [&](const char* name) { return directory + "/" + name; };

  CsvFile fgen = read_csv(path("general.csv"));
  CsvFile flin = read_csv(path("lines.csv"));
  CsvFile fcfg = read_csv(path("configs.csv"));
  CsvFile flod = read_csv(path("loads.csv"));
  CsvFile fcrd = read_csv(path("coords.csv"));
  CsvFile fsw = read_csv(path("switches.csv"));

  require_header(fgen, kGeneralHeader, /*loose_trailing=*/true);
  require_header(flin, kLinesHeader);
  require_header(fcfg, kConfigsHeader);
  require_header(flod, kLoadsHeader);
  require_header(fcrd, kCoordsHeader);
  require_header(fsw, kSwitchesHeader);

  GeneralData gen;
  bool have_slack = false, have_vnom = false;
  for (std::size_t r = 0; r < fgen.rows.size(); ++r) {
    require_cells(fgen, r, 2);
    const std::string& key = fgen.rows[r][0];
    if (key == "Slack") {
      gen.slack_bus = parse_int_cell(fgen, r, 1);
      have_slack = true;
    } else if (key == "Vnom (kV)") {
      gen.v_nom_kv = parse_cell(fgen, r, 1);
      have_vnom = true;
    } else if (key == "V_slack_ph_A") {
      gen.slack_mag_pu[0] = parse_cell(fgen, r, 1);
    } else if (key == "V_slack_ph_B") {
      gen.slack_mag_pu[1] = parse_cell(fgen, r, 1);
    } else if (key == "V_slack_ph_C") {
      gen.slack_mag_pu[2] = parse_cell(fgen, r, 1);
    } else if (key == "Ang_slack_ph_A") {
      gen.slack_ang_deg[0] = parse_cell(fgen, r, 1);
    } else if (key == "Ang_slack_ph_B") {
      gen.slack_ang_deg[1] = parse_cell(fgen, r, 1);
    } else if (key == "Ang_slack_ph_C") {
      gen.slack_ang_deg[2] = parse_cell(fgen, r, 1);
    } else {
      std::string seg;
      int ph = 0;
      if (parse_tap_key(key, seg, ph)) {
        auto& taps = gen.segment_taps.try_emplace(seg, std::array<double, 3>{1, 1, 1}).first->second;
        taps[ph] = parse_cell(fgen, r, 1);
      }
      // InternationalSystem / DeltaLF and friends are preserved via the source
      // table and otherwise unused.
    }
  }
  if (!have_slack) throw Error(Errc::missing_slack, "general.csv: no 'Slack' row");
  if (!have_vnom) throw Error(Errc::invalid_model, "general.csv: no 'Vnom (kV)' row");

  std::vector<LineConfig> configs;
  for (std::size_t r = 0; r < fcfg.rows.size(); ++r) {
    require_cells(fcfg, r, 20);
    LineConfig c;
    c.config_id = parse_int_cell(fcfg, r, 0);
    c.is_line = parse_int_cell(fcfg, r, 1) == 1;
    c.r_ohm_per_mile = sym_from_cells(fcfg, r, 2);
    c.x_ohm_per_mile = sym_from_cells(fcfg, r, 8);
    c.b_usiemens_per_mile = sym_from_cells(fcfg, r, 14);
    configs.push_back(c);
  }

  std::vector<LineSegment> segments;
  for (std::size_t r = 0; r < flin.rows.size(); ++r) {
    require_cells(flin, r, 4);
    LineSegment s;
    s.from_bus = parse_int_cell(flin, r, 0);
    s.to_bus = parse_int_cell(flin, r, 1);
    s.length_ft = parse_cell(flin, r, 2);
    s.config_id = parse_int_cell(flin, r, 3);
    segments.push_back(s);
  }

  std::vector<SpotLoad> loads;
  for (std::size_t r = 0; r < flod.rows.size(); ++r) {
    require_cells(flod, r, 9);
    SpotLoad l;
    l.bus = parse_int_cell(flod, r, 0);
    l.wye = parse_int_cell(flod, r, 1) == 1;
    int alfa = parse_int_cell(flod, r, 2);
    if (alfa < 0 || alfa > 2)
      throw Error(Errc::unparseable_cell,
                  flod.path + ": Alfa must be 0, 1 or 2 at row " + std::to_string(r + 2));
    l.zip_kind = static_cast<ZipKind>(alfa);
    for (int p = 0; p < 3; ++p) {
      l.p_kw[p] = parse_cell(flod, r, 3 + 2 * p);
      l.q_kvar[p] = parse_cell(flod, r, 4 + 2 * p);
    }
    loads.push_back(l);
  }

  std::vector<NodeCoord> coords;
  for (std::size_t r = 0; r < fcrd.rows.size(); ++r) {
    require_cells(fcrd, r, 3);
    coords.push_back({parse_int_cell(fcrd, r, 0), parse_cell(fcrd, r, 1), parse_cell(fcrd, r, 2)});
  }

  std::vector<SwitchLink> switches;
  for (std::size_t r = 0; r < fsw.rows.size(); ++r) {
    require_cells(fsw, r, 3);
    switches.push_back({parse_int_cell(fsw, r, 0), parse_int_cell(fsw, r, 1),
                        parse_int_cell(fsw, r, 2) == 1});
  }

  SourceTables sources{to_source(fgen), to_source(flin), to_source(fcfg),
                       to_source(flod), to_source(fcrd), to_source(fsw)};

  return FeederModel::from_parts(std::move(gen), std::move(configs), std::move(segments),
                                 std::move(loads), std::move(switches), std::move(coords),
                                 std::move(sources));
}

void serialize_feeder(const FeederModel& model, const std::string& directory) {
  auto write = [&](const char* name, const SourceTable& t) {
    std::ofstream out(directory + "/" + name, std::ios::binary);
    if (!out) throw Error(Errc::missing_file, "cannot write " + directory + "/" + name);
    out << t.header << "\n";
    for (const auto& row : t.rows) {
      for (std::size_t i = 0; i < row.size(); ++i) {
        if (i) out << ',';
        out << row[i];
      }
      out << "\n";
    }
  };
  const SourceTables& s = model.sources();
  write("general.csv", s.general);
  write("lines.csv", s.lines);
  write("configs.csv", s.configs);
  write("loads.csv", s.loads);
  write("coords.csv", s.coords);
  write("switches.csv", s.switches);
}

std::string model_dump_json(const FeederModel& model) {
  nlohmann::json j;
  const auto& g = model.general();
  j["general"] = {{"slack_bus", g.slack_bus},
                  {"v_nom_kv", g.v_nom_kv},
                  {"v_base_ln_v", g.v_base_ln()},
                  {"slack_mag_pu", g.slack_mag_pu},
                  {"slack_ang_deg", g.slack_ang_deg}};

  auto mat = [](const Eigen::Matrix3d& m) {
    nlohmann::json rows = nlohmann::json::array();
    for (int i = 0; i < 3; ++i) rows.push_back({m(i, 0), m(i, 1), m(i, 2)});
    return rows;
  };
  j["configs"] = nlohmann::json::array();
  for (const auto& [id, c] : model.configs())
    j["configs"].push_back({{"id", id},
                            {"is_line", c.is_line},
                            {"phasing", c.phasing().str()},
                            {"r_ohm_per_mile", mat(c.r_ohm_per_mile)},
                            {"x_ohm_per_mile", mat(c.x_ohm_per_mile)},
                            {"b_usiemens_per_mile", mat(c.b_usiemens_per_mile)}});

  j["segments"] = nlohmann::json::array();
  for (const auto& s : model.segments())
    j["segments"].push_back({{"from", s.from_bus},
                             {"to", s.to_bus},
                             {"length_ft", s.length_ft},
                             {"config", s.config_id}});

  j["loads"] = nlohmann::json::array();
  for (const auto& l : model.loads())
    j["loads"].push_back({{"bus", l.bus},
                          {"connection", l.wye ? "wye" : "delta"},
                          {"zip", static_cast<int>(l.zip_kind)},
                          {"p_kw", l.p_kw},
                          {"q_kvar", l.q_kvar}});

  j["switches"] = nlohmann::json::array();
  for (const auto& s : model.switches())
    j["switches"].push_back({{"bus_a", s.bus_a}, {"bus_b", s.bus_b}, {"closed", s.closed}});

  j["coords"] = nlohmann::json::array();
  for (const auto& c : model.coords())
    j["coords"].push_back({{"bus", c.bus}, {"x", c.x}, {"y", c.y}});

  j["merged"] = model.merged();
  if (model.merged()) {
    nlohmann::json aliases = nlohmann::json::object();
    for (int b : model.merged_buses()) {
      auto a = model.aliases(b);
      if (a.size() > 1) aliases[std::to_string(b)] = a;
    }
    j["aliases"] = aliases;
  }
  return j.dump(2);
}

}  // namespace gridest::model
