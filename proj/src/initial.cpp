#include "fracheat/initial.hpp"

#include <cmath>
#include <sstream>

#include "fracheat/errors.hpp"
#include "fracheat/kernels.hpp"
#include "fracheat/quadrature.hpp"

namespace fracheat {

namespace {

std::vector<std::string> split(const std::string& s, char sep) {
  std::vector<std::string> out;
  std::string cur;
  std::istringstream is(s);
  while (std::getline(is, cur, sep)) out.push_back(cur);
  return out;
}

double to_double(const std::string& s) {
  std::size_t pos = 0;
  double v = 0.0;
  try {
    v = std::stod(s, &pos);
  } catch (const std::exception&) {
    throw ConfigError("u0: cannot parse number '" + s + "'");
  }
  if (pos != s.size()) throw ConfigError("u0: cannot parse number '" + s + "'");
  return v;
}

std::vector<double> to_list(const std::string& s) {
  std::vector<double> v;
  for (const auto& p : split(s, ',')) v.push_back(to_double(p));
  return v;
}

}  // namespace

U0 U0::constant(double K) {
  if (!std::isfinite(K)) throw ConfigError("u0 constant must be finite");
  U0 u;
  u.kind_ = Kind::Constant;
  u.a_ = K;
  return u;
}

U0 U0::bump(double amplitude, std::vector<double> center, double width) {
  if (!std::isfinite(amplitude) || !(width > 0.0) || center.empty())
    throw ConfigError("u0 bump needs finite amplitude, width > 0 and a center");
  U0 u;
  u.kind_ = Kind::Bump;
  u.a_ = amplitude;
  u.center_ = std::move(center);
  u.w_ = width;
  return u;
}

U0 U0::table(double x0, double dx, std::vector<double> values) {
  if (!(dx > 0.0) || values.size() < 2) throw ConfigError("u0 table needs dx > 0 and >= 2 values");
  for (double v : values)
    if (!std::isfinite(v)) throw ConfigError("u0 table values must be finite");
  U0 u;
  u.kind_ = Kind::Table;
  u.x0_ = x0;
  u.dx_ = dx;
  u.table_ = std::move(values);
  return u;
}

U0 U0::parse(const std::string& text) {
  auto parts = split(text, ':');
  if (parts.empty()) throw ConfigError("u0: empty descriptor");
  if (parts[0] == "const" && parts.size() == 2) return constant(to_double(parts[1]));
  if (parts[0] == "bump" && parts.size() == 4)
    return bump(to_double(parts[1]), to_list(parts[2]), to_double(parts[3]));
  if (parts[0] == "table" && parts.size() == 4)
    return table(to_double(parts[1]), to_double(parts[2]), to_list(parts[3]));
  throw ConfigError("u0: unknown descriptor '" + text + "'");
}

double U0::operator()(std::span<const double> x) const {
  switch (kind_) {
    case Kind::Constant: return a_;
    case Kind::Bump: {
      if (x.size() != center_.size()) throw DataError("u0 bump: dimension mismatch");
      double r2 = 0.0;
      for (std::size_t i = 0; i < x.size(); ++i) r2 += (x[i] - center_[i]) * (x[i] - center_[i]);
      return a_ * std::exp(-r2 / (2.0 * w_ * w_));
    }
    case Kind::Table: {
      if (x.size() != 1) throw DataError("u0 table is one-dimensional");
      const double u = (x[0] - x0_) / dx_;
      if (u < 0.0 || u > static_cast<double>(table_.size() - 1)) return 0.0;
      const auto j = std::min<std::size_t>(static_cast<std::size_t>(u), table_.size() - 2);
      const double f = u - static_cast<double>(j);
      return (1.0 - f) * table_[j] + f * table_[j + 1];
    }
  }
  return 0.0;
}

double U0::sup_norm() const {
  switch (kind_) {
    case Kind::Constant:
    case Kind::Bump: return std::abs(a_);
    case Kind::Table: {
      double m = 0.0;
      for (double v : table_) m = std::max(m, std::abs(v));
      return m;
    }
  }
  return 0.0;
}

double U0::heat_impl(double t, std::span<const double> x, bool absolute) const {
  if (t < 0.0) throw DomainError("heat semigroup needs t >= 0");
  if (t == 0.0) return absolute ? std::abs((*this)(x)) : (*this)(x);
  switch (kind_) {
    case Kind::Constant: return absolute ? std::abs(a_) : a_;
    case Kind::Bump: {
      if (x.size() != center_.size()) throw DataError("u0 bump: dimension mismatch");
      const double d = static_cast<double>(x.size());
      const double s2 = w_ * w_ + t;
      double r2 = 0.0;
      for (std::size_t i = 0; i < x.size(); ++i) r2 += (x[i] - center_[i]) * (x[i] - center_[i]);
      const double v = a_ * std::pow(w_ * w_ / s2, 0.5 * d) * std::exp(-r2 / (2.0 * s2));
      return absolute ? std::abs(v) : v;
    }
    case Kind::Table: {
      if (x.size() != 1) throw DataError("u0 table is one-dimensional");
      double total = 0.0;
      for (std::size_t j = 0; j + 1 < table_.size(); ++j) {
        const double lo = x0_ + dx_ * static_cast<double>(j);
        auto f = [&](double y) {
          const double fr = (y - lo) / dx_;
          double v = (1.0 - fr) * table_[j] + fr * table_[j + 1];
          if (absolute) v = std::abs(v);
          return v * heat_kernel(t, x[0] - y);
        };
        total += integrate(f, lo, lo + dx_).value;
      }
      return total;
    }
  }
  return 0.0;
}

double U0::heat(double t, std::span<const double> x) const { return heat_impl(t, x, false); }
double U0::heat_abs(double t, std::span<const double> x) const { return heat_impl(t, x, true); }

std::string U0::describe() const {
  std::ostringstream os;
  os.precision(17);
  auto list = [&](const std::vector<double>& v) {
    for (std::size_t i = 0; i < v.size(); ++i) os << (i ? "," : "") << v[i];
  };
  switch (kind_) {
    case Kind::Constant: os << "const:" << a_; break;
    case Kind::Bump:
      os << "bump:" << a_ << ":";
      list(center_);
      os << ":" << w_;
      break;
    case Kind::Table:
      os << "table:" << x0_ << ":" << dx_ << ":";
      list(table_);
      break;
  }
  return os.str();
}

}  // namespace fracheat
