#include "dynbool/target.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

#include "dynbool/errors.hpp"
#include "dynbool/format.hpp"

namespace dynbool {

TargetMotion TargetMotion::stationary() { return {}; }

TargetMotion TargetMotion::linear(double beta, std::vector<double> psi) {
  if (!(beta > 0.0)) throw InvalidArgument("linear target needs beta > 0");
  double n = 0.0;
  for (double v : psi) n += v * v;
  n = std::sqrt(n);
  if (!(n > 0.0)) throw InvalidArgument("linear target needs a nonzero direction");
  for (auto& v : psi) v /= n;
  TargetMotion m;
  m.kind_ = Kind::Linear;
  m.beta_ = beta;
  m.psi_ = std::move(psi);
  return m;
}

TargetMotion TargetMotion::levy() {
  TargetMotion m;
  m.kind_ = Kind::Levy;
  return m;
}

TargetMotion TargetMotion::table(PathSkeleton path) {
  if (path.size() == 0 || path.times.front() != 0.0)
    throw InvalidArgument("table target must start at time 0");
  for (double v : path.position(0))
    if (v != 0.0) throw InvalidArgument("table target must start at the origin");
  TargetMotion m;
  m.kind_ = Kind::Table;
  m.table_ = std::move(path);
  return m;
}

TargetMotion TargetMotion::parse(std::string_view text, int dim) {
  if (text == "static") return stationary();
  if (text == "levy") return levy();
  if (text.starts_with("linear:")) {
    auto rest = text.substr(7);
    const auto colon = rest.find(':');
    const double beta = parse_double(rest.substr(0, colon));
    std::vector<double> psi(static_cast<std::size_t>(dim), 0.0);
    psi[0] = 1.0;
    if (colon != std::string_view::npos) {
      psi.clear();
      auto list = rest.substr(colon + 1);
      std::size_t pos = 0;
      while (true) {
        const auto comma = list.find(',', pos);
        psi.push_back(parse_double(list.substr(pos, comma == std::string_view::npos ? list.npos : comma - pos)));
        if (comma == std::string_view::npos) break;
        pos = comma + 1;
      }
      if (psi.size() != static_cast<std::size_t>(dim))
        throw InvalidArgument("linear target direction has wrong dimension");
    }
    return linear(beta, std::move(psi));
  }
  throw InvalidArgument("unrecognised target motion '" + std::string(text) + "'");
}

std::string TargetMotion::to_string() const {
  switch (kind_) {
    case Kind::Static: return "static";
    case Kind::Levy: return "levy";
    case Kind::Table: return "table";
    case Kind::Linear: {
      std::ostringstream os;
      os << "linear:" << format_double(beta_) << ':';
      for (std::size_t i = 0; i < psi_.size(); ++i) os << (i ? "," : "") << format_double(psi_[i]);
      return os.str();
    }
  }
  return "static";
}

std::vector<double> TargetMotion::realise(std::span<const double> times, const StableParams& params,
                                          Rng& rng) const {
  const auto dim = static_cast<std::size_t>(params.dim);
  std::vector<double> out(times.size() * dim, 0.0);
  switch (kind_) {
    case Kind::Static: break;
    case Kind::Linear:
      if (psi_.size() != dim) throw InvalidArgument("linear target direction has wrong dimension");
      for (std::size_t i = 0; i < times.size(); ++i)
        for (std::size_t k = 0; k < dim; ++k) out[i * dim + k] = beta_ * times[i] * psi_[k];
      break;
    case Kind::Levy: {
      const std::vector<double> origin(dim, 0.0);
      out = sample_path(params, origin, times, rng).coords;
      break;
    }
    case Kind::Table: {
      const auto& tab = *table_;
      if (tab.dim() != params.dim) throw InvalidArgument("table target has wrong dimension");
      std::size_t j = 0;
      for (std::size_t i = 0; i < times.size(); ++i) {
        while (j + 1 < tab.size() && tab.times[j + 1] <= times[i]) ++j;
        const auto p = tab.position(j);
        std::copy(p.begin(), p.end(), out.begin() + static_cast<std::ptrdiff_t>(i * dim));
      }
      break;
    }
  }
  return out;
}

double TargetMotion::displacement_allowance(const StableParams& params, double horizon,
                                            double escape_c, double level) const {
  switch (kind_) {
    case Kind::Static: return 0.0;
    case Kind::Linear: return beta_ * horizon;
    case Kind::Table: {
      double m = 0.0;
      for (std::size_t i = 0; i < table_->size() && table_->times[i] <= horizon; ++i) {
        double s = 0.0;
        for (double v : table_->position(i)) s += v * v;
        m = std::max(m, std::sqrt(s));
      }
      return m;
    }
    case Kind::Levy:
      if (params.alpha == 2.0) {
        // Gaussian coordinates of variance 2t; union bound over coordinates.
        return std::sqrt(2.0 * horizon) * std::sqrt(2.0 * std::log(4.0 * params.dim / level)) *
               std::sqrt(static_cast<double>(params.dim));
      }
      return std::pow(escape_c * horizon / level, 1.0 / params.alpha);
  }
  return 0.0;
}

}  // namespace dynbool
