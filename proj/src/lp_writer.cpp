#include <cmath>
#include <cstdio>
#include <ostream>
#include <string>

#include "nflreach/milp_model.hpp"

namespace nflreach {

namespace {

std::string num(double v) {
  char buf[40];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  return buf;
}

// " + 2.5 x0" / " - x3" style term chain.
void write_terms(std::ostream& os, const MilpModel& m,
                 const std::vector<LinTerm>& terms, bool& first) {
  for (const auto& t : terms) {
    const double c = t.coef;
    if (c == 0.0)
      continue;
    if (first) {
      if (c < 0.0)
        os << "- ";
      first = false;
    } else {
      os << (c < 0.0 ? " - " : " + ");
    }
    const double a = std::abs(c);
    if (a != 1.0)
      os << num(a) << " ";
    os << m.var_name(t.var);
  }
}

} // namespace

void MilpModel::write_lp(std::ostream& os) const {
  os << "\\ nflreach model export\n";
  if (obj_sense_ == ObjSense::Maximize)
    os << "Maximize\n";
  else
    os << "Minimize\n";
  os << " obj:";
  if (obj_sense_ != ObjSense::Feasibility && !obj_terms_.empty()) {
    os << " ";
    bool first = true;
    write_terms(os, *this, obj_terms_, first);
  }
  os << "\n";
  if (obj_constant_ != 0.0)
    os << "\\ objective constant " << num(obj_constant_)
       << " not representable in LP format; add it to reported objectives\n";

  os << "Subject To\n";
  for (std::size_t i = 0; i < rows_.size(); ++i) {
    const auto& row = rows_[i];
    os << " c" << i << ": ";
    bool first = true;
    std::vector<LinTerm> terms;
    terms.reserve(row.coeffs.size());
    for (const auto& [j, c] : row.coeffs)
      terms.push_back({c, VarId{j}});
    write_terms(os, *this, terms, first);
    if (first)
      os << "0 " << var_name(VarId{0});
    switch (row.sense) {
    case Sense::Le: os << " <= "; break;
    case Sense::Ge: os << " >= "; break;
    case Sense::Eq: os << " = "; break;
    }
    os << num(row.rhs) << "\n";
  }

  os << "Bounds\n";
  for (std::uint32_t j = 0; j < vars_.size(); ++j) {
    if (vars_[j].binary)
      continue;
    os << " " << num(vars_[j].lo) << " <= " << var_name(VarId{j})
       << " <= " << num(vars_[j].hi) << "\n";
  }

  if (num_binaries_ > 0) {
    os << "Binaries\n";
    for (std::uint32_t j = 0; j < vars_.size(); ++j)
      if (vars_[j].binary)
        os << " " << var_name(VarId{j});
    os << "\n";
  }
  os << "End\n";
}

} // namespace nflreach
