#include <fstream>

#include <fmt/format.h>

#include "seqpi/datagen.hpp"
#include "seqpi/error.hpp"
#include "seqpi/json_util.hpp"

namespace seqpi {
namespace {

std::string_view flag(bool b) { return b ? "true" : "false"; }

PersonHour parse_row(const std::string& line, Mode& mode, bool first) {
  const nlohmann::json doc = nlohmann::json::parse(line);
  StrictObject o(doc, "row");
  PersonHour row;
  row.person_id = o.require<std::int64_t>("person_id");
  row.state.k = o.require<int>("k");
  row.state.baseline.maternal_age = o.require<double>("maternal_age");
  row.state.baseline.parity = o.require<int>("parity");
  row.state.baseline.history_preterm = o.require<bool>("history_preterm");

  const auto& fhr = o.child("fhr");
  const Mode row_mode = fhr.is_string() ? Mode::coarse : Mode::continuous;
  if (first) mode = row_mode;
  if (row_mode != mode) throw DataError("row mixes coarse and continuous covariates");
  const bool persist = o.require<bool>("brady_persist");
  if (row_mode == Mode::coarse) {
    CoarseVitals v;
    v.fhr = parse_fhr_category(fhr.get<std::string>());
    v.dilatation = o.require<int>("dilatation");
    v.sbp = parse_bp_level(o.require<std::string>("sbp"));
    v.dbp = parse_bp_level(o.require<std::string>("dbp"));
    if (persist != (v.fhr == FhrCategory::bradycardia_persistent)) {
      throw DataError("brady_persist disagrees with the fhr category");
    }
    row.state.tv = v;
  } else {
    ContinuousVitals v;
    if (!fhr.is_number()) throw DataError("fhr must be a number");
    v.fhr = fhr.get<double>();
    v.brady_persist = persist;
    v.dilatation = o.require<double>("dilatation");
    v.sbp = o.require<double>("sbp");
    v.dbp = o.require<double>("dbp");
    row.state.tv = v;
  }
  const int a = o.require<int>("a");
  const int z = o.require<int>("z");
  const int y = o.require<int>("y");
  row.state.born = o.require<bool>("born");
  o.finish();
  if (a != 0 && a != 1) throw DataError("a must be 0 or 1");
  if (y != 0 && y != 1) throw DataError("y must be 0 or 1");
  if (z != 0 && z != 1) throw DataError("z must be 0 or 1");
  row.a = static_cast<Action>(a);
  row.state.y = y == 1;
  if (z != row.state.z()) throw DataError("z must equal (born = false and y = 0)");
  return row;
}

}  // namespace

std::string format_row(const PersonHour& row) {
  const auto& s = row.state;
  std::string vitals;
  if (const auto* c = std::get_if<CoarseVitals>(&s.tv)) {
    vitals = fmt::format(
        R"("fhr":"{}","brady_persist":{},"dilatation":{},"sbp":"{}","dbp":"{}")",
        to_string(c->fhr), flag(c->fhr == FhrCategory::bradycardia_persistent), c->dilatation,
        to_string(c->sbp), to_string(c->dbp));
  } else {
    const auto& v = std::get<ContinuousVitals>(s.tv);
    vitals = fmt::format(R"("fhr":{:.2f},"brady_persist":{},"dilatation":{:.2f},"sbp":{:.2f},"dbp":{:.2f})",
                         v.fhr, flag(v.brady_persist), v.dilatation, v.sbp, v.dbp);
  }
  return fmt::format(
      R"({{"person_id":{},"k":{},"maternal_age":{:.2f},"parity":{},"history_preterm":{},{},"a":{},"z":{},"y":{},"born":{}}})",
      row.person_id, s.k, s.baseline.maternal_age, s.baseline.parity,
      flag(s.baseline.history_preterm), vitals, to_int(row.a), s.z(), s.y ? 1 : 0,
      flag(s.born));
}

void write_dataset(const Dataset& ds, const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw DataError("cannot open '" + path.string() + "' for writing");
  for (const auto& row : ds.rows) {
    out << format_row(row) << '\n';
  }
  out.flush();
  if (!out) throw DataError("write to '" + path.string() + "' failed");
}

Dataset read_dataset(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError("cannot open '" + path.string() + "' for reading");
  Dataset ds;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    try {
      if (line.empty()) throw DataError("empty line");
      ds.rows.push_back(parse_row(line, ds.mode, ds.rows.empty()));
    } catch (const nlohmann::json::exception& e) {
      throw DataError(fmt::format("row {}: malformed JSON: {}", line_no, e.what()));
    } catch (const Error& e) {
      throw DataError(fmt::format("row {}: {}", line_no, e.what()));
    }
  }
  // The status entering hour k is the action recorded at hour k - 1; a row
  // carries a decision iff the same person has a later row.
  for (std::size_t i = 0; i < ds.rows.size(); ++i) {
    auto& row = ds.rows[i];
    const bool continues = i > 0 && ds.rows[i - 1].person_id == row.person_id;
    row.state.a = continues ? ds.rows[i - 1].a : Action::vaginal;
    row.has_decision = i + 1 < ds.rows.size() && ds.rows[i + 1].person_id == row.person_id;
  }
  validate_dataset(ds);
  for (std::size_t i = 0; i < ds.rows.size(); ++i) {
    const auto& row = ds.rows[i];
    if (!row.has_decision && row.a != row.state.a) {
      throw DataError(fmt::format("row {}: person {} hour {}: final record a differs from the "
                                  "intervention status",
                                  i + 1, row.person_id, row.state.k));
    }
  }
  return ds;
}

}  // namespace seqpi

namespace seqpi {

nlohmann::json state_to_json(const PatientState& s) {
  nlohmann::json out = {{"k", s.k},
                        {"maternal_age", s.baseline.maternal_age},
                        {"parity", s.baseline.parity},
                        {"history_preterm", s.baseline.history_preterm}};
  if (const auto* c = std::get_if<CoarseVitals>(&s.tv)) {
    out["fhr"] = to_string(c->fhr);
    out["brady_persist"] = c->fhr == FhrCategory::bradycardia_persistent;
    out["dilatation"] = c->dilatation;
    out["sbp"] = to_string(c->sbp);
    out["dbp"] = to_string(c->dbp);
  } else {
    const auto& v = std::get<ContinuousVitals>(s.tv);
    out["fhr"] = v.fhr;
    out["brady_persist"] = v.brady_persist;
    out["dilatation"] = v.dilatation;
    out["sbp"] = v.sbp;
    out["dbp"] = v.dbp;
  }
  out["a"] = to_int(s.a);
  out["z"] = s.z();
  out["y"] = s.y ? 1 : 0;
  out["born"] = s.born;
  return out;
}

PatientState state_from_json(const nlohmann::json& doc, Mode mode) {
  StrictObject o(doc, "state");
  PatientState s;
  o.read("k", s.k);
  o.read("maternal_age", s.baseline.maternal_age);
  o.read("parity", s.baseline.parity);
  o.read("history_preterm", s.baseline.history_preterm);
  if (mode == Mode::coarse) {
    CoarseVitals v;
    if (o.has("fhr")) v.fhr = parse_fhr_category(o.require<std::string>("fhr"));
    o.read("dilatation", v.dilatation);
    if (o.has("sbp")) v.sbp = parse_bp_level(o.require<std::string>("sbp"));
    if (o.has("dbp")) v.dbp = parse_bp_level(o.require<std::string>("dbp"));
    bool persist = v.fhr == FhrCategory::bradycardia_persistent;
    o.read("brady_persist", persist);
    if (persist != (v.fhr == FhrCategory::bradycardia_persistent)) {
      throw UsageError("state: brady_persist disagrees with the fhr category");
    }
    if (v.dilatation < 0 || v.dilatation > 10) throw UsageError("state: dilatation outside [0, 10]");
    s.tv = v;
  } else {
    ContinuousVitals v;
    o.read("fhr", v.fhr);
    o.read("brady_persist", v.brady_persist);
    o.read("dilatation", v.dilatation);
    o.read("sbp", v.sbp);
    o.read("dbp", v.dbp);
    if (v.dilatation < 0.0 || v.dilatation > 10.0) throw UsageError("state: dilatation outside [0, 10]");
    s.tv = v;
  }
  int a = 0, y = 0;
  o.read("a", a);
  o.read("y", y);
  o.read("born", s.born);
  if (a != 0 && a != 1) throw UsageError("state: a must be 0 or 1");
  if (y != 0 && y != 1) throw UsageError("state: y must be 0 or 1");
  s.a = static_cast<Action>(a);
  s.y = y == 1;
  if (o.has("z")) {
    if (o.require<int>("z") != s.z()) throw UsageError("state: z must equal (born = false and y = 0)");
  }
  o.finish();
  if (s.k < 0) throw UsageError("state: k must be >= 0");
  return s;
}

}  // namespace seqpi
