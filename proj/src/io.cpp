#include "mpg_lab/io.hpp"

#include <array>
#include <charconv>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <limits>
#include <sstream>

namespace mpg {

int exit_code_for(const Error& e) {
  if (dynamic_cast<const SchemaError*>(&e)) return 1;
  if (dynamic_cast<const AssumptionError*>(&e)) return 2;
  if (dynamic_cast<const SolverError*>(&e)) return 3;
  if (dynamic_cast<const RegularityError*>(&e)) return 4;
  if (dynamic_cast<const InconclusiveError*>(&e)) return 5;
  return 1;
}

std::string format_double(double v) {
  std::array<char, 40> buf;
  auto res = std::to_chars(buf.data(), buf.data() + buf.size(), v);
  if (res.ec == std::errc())
    return std::string(buf.data(), res.ptr);
  std::snprintf(buf.data(), buf.size(), "%.17g", v);
  return std::string(buf.data());
}

void write_file_atomic(const std::string& path, const std::string& content) {
  const std::string tmp = path + ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw Error("io: cannot open '" + tmp + "' for writing");
    out << content;
    out.flush();
    if (!out) throw Error("io: short write to '" + tmp + "'");
  }
  if (std::rename(tmp.c_str(), path.c_str()) != 0) {
    std::remove(tmp.c_str());
    throw Error("io: cannot rename '" + tmp + "' to '" + path + "'");
  }
}

namespace {

std::string csv_quote(const std::string& s) {
  if (s.find_first_of(",\"\n") == std::string::npos) return s;
  std::string out = "\"";
  for (char c : s) {
    if (c == '"') out += '"';
    out += c;
  }
  out += '"';
  return out;
}

void append_vec(std::ostringstream& os, const Vec& v) {
  for (Index k = 0; k < v.size(); ++k) os << ',' << format_double(v(k));
}

} // namespace

std::string trajectory_csv(const ControllerBank& bank, const TrajectoryLog& log, const Mat* P,
                           const Vec* x_bar) {
  const int n = bank.num_agents();
  const Index n_x = bank.dynamics().state_dim();
  const Index m = bank.dynamics().total_input_dim();

  std::ostringstream os;
  os << 't';
  for (Index k = 0; k < n_x; ++k) os << ",x" << k;
  for (Index k = 0; k < m; ++k) os << ",u" << k;
  for (int j = 0; j < n; ++j)
    for (Index k = 0; k < m; ++k) os << ",pred" << j << "_u" << k;
  for (int j = 0; j < n; ++j) os << ",gap" << j;
  os << ",V\n";

  const bool have_v = P != nullptr && x_bar != nullptr;
  for (const StepRecord& rec : log.steps) {
    os << rec.t;
    append_vec(os, rec.x);
    append_vec(os, rec.u_applied);
    for (int j = 0; j < n; ++j) {
      const SignalLayout& L = bank.vi(j).layout;
      append_vec(os, L.stage_slice(rec.solutions[(size_t)j].u, 0));
    }
    for (int j = 0; j < n; ++j) {
      os << ',';
      double g = rec.gaps.size() > j ? rec.gaps(j) : std::numeric_limits<double>::quiet_NaN();
      if (!std::isnan(g)) os << format_double(g);
    }
    os << ',';
    if (have_v) {
      Vec e = rec.x - *x_bar;
      os << format_double(e.dot((*P) * e));
    }
    os << '\n';
  }
  return os.str();
}

std::string gap_csv(const ControllerBank& bank, const TrajectoryLog& log) {
  const int n = bank.num_agents();
  std::ostringstream os;
  os << 't';
  for (int j = 0; j < n; ++j) os << ",gap" << j;
  os << '\n';
  for (const StepRecord& rec : log.steps) {
    os << rec.t;
    for (int j = 0; j < n; ++j) {
      os << ',';
      double g = rec.gaps.size() > j ? rec.gaps(j) : std::numeric_limits<double>::quiet_NaN();
      if (!std::isnan(g)) os << format_double(g);
    }
    os << '\n';
  }
  return os.str();
}

std::string sweep_csv(const SweepResult& sweep, Index state_dim) {
  std::ostringstream os;
  os << "theta,converged,regular,steps,polish_iterations";
  for (Index k = 0; k < state_dim; ++k) os << ",x" << k;
  for (Index k = 0; k < state_dim; ++k) os << ",dx" << k << "_dtheta";
  os << ",note\n";
  for (const SweepPoint& p : sweep.points) {
    os << format_double(p.theta) << ',' << (p.converged ? 1 : 0) << ',' << (p.regular ? 1 : 0)
       << ',' << p.steps << ',' << p.polish_iterations;
    for (Index k = 0; k < state_dim; ++k) {
      os << ',';
      if (p.x_star.size() == state_dim) os << format_double(p.x_star(k));
    }
    for (Index k = 0; k < state_dim; ++k) {
      os << ',';
      if (p.dx_dtheta.size() == state_dim) os << format_double(p.dx_dtheta(k));
    }
    os << ',' << csv_quote(p.note) << '\n';
  }
  return os.str();
}

std::string sweep_svg(const SweepResult& sweep, Index state_dim, const std::string& title) {
  const double W = 720, H = 480;
  const double ml = 70, mr = 160, mt = 40, mb = 50;
  const double pw = W - ml - mr, ph = H - mt - mb;

  double tmin = 0, tmax = 1, ymin = 0, ymax = 1;
  bool first = true;
  for (const SweepPoint& p : sweep.points) {
    if (p.x_star.size() != state_dim) continue;
    if (first) {
      tmin = tmax = p.theta;
      ymin = p.x_star.minCoeff();
      ymax = p.x_star.maxCoeff();
      first = false;
    } else {
      tmin = std::min(tmin, p.theta);
      tmax = std::max(tmax, p.theta);
      ymin = std::min(ymin, p.x_star.minCoeff());
      ymax = std::max(ymax, p.x_star.maxCoeff());
    }
  }
  if (tmax - tmin < 1e-12) tmax = tmin + 1.0;
  if (ymax - ymin < 1e-12) {
    ymax += 0.5;
    ymin -= 0.5;
  }
  const double ypad = 0.05 * (ymax - ymin);
  ymin -= ypad;
  ymax += ypad;

  auto sx = [&](double t) { return ml + (t - tmin) / (tmax - tmin) * pw; };
  auto sy = [&](double y) { return mt + (ymax - y) / (ymax - ymin) * ph; };

  static const char* palette[] = {"#1f77b4", "#d62728", "#2ca02c", "#9467bd",
                                  "#ff7f0e", "#8c564b", "#17becf", "#7f7f7f"};
  const int ncol = 8;

  std::ostringstream os;
  os << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << W << "\" height=\"" << H
     << "\" viewBox=\"0 0 " << W << ' ' << H << "\">\n";
  os << "<rect width=\"" << W << "\" height=\"" << H << "\" fill=\"white\"/>\n";
  os << "<text x=\"" << W / 2 << "\" y=\"24\" text-anchor=\"middle\" font-family=\"sans-serif\""
     << " font-size=\"16\">" << title << "</text>\n";

  // Axes with a handful of ticks.
  os << "<line x1=\"" << ml << "\" y1=\"" << mt + ph << "\" x2=\"" << ml + pw << "\" y2=\""
     << mt + ph << "\" stroke=\"black\"/>\n";
  os << "<line x1=\"" << ml << "\" y1=\"" << mt << "\" x2=\"" << ml << "\" y2=\"" << mt + ph
     << "\" stroke=\"black\"/>\n";
  for (int k = 0; k <= 5; ++k) {
    double t = tmin + k * (tmax - tmin) / 5.0;
    double y = ymin + k * (ymax - ymin) / 5.0;
    os << "<line x1=\"" << sx(t) << "\" y1=\"" << mt + ph << "\" x2=\"" << sx(t) << "\" y2=\""
       << mt + ph + 5 << "\" stroke=\"black\"/>\n";
    char tb[32], yb[32];
    std::snprintf(tb, sizeof tb, "%.3g", t);
    std::snprintf(yb, sizeof yb, "%.3g", y);
    os << "<text x=\"" << sx(t) << "\" y=\"" << mt + ph + 20
       << "\" text-anchor=\"middle\" font-family=\"sans-serif\" font-size=\"11\">" << tb
       << "</text>\n";
    os << "<line x1=\"" << ml - 5 << "\" y1=\"" << sy(y) << "\" x2=\"" << ml << "\" y2=\""
       << sy(y) << "\" stroke=\"black\"/>\n";
    os << "<text x=\"" << ml - 9 << "\" y=\"" << sy(y) + 4
       << "\" text-anchor=\"end\" font-family=\"sans-serif\" font-size=\"11\">" << yb
       << "</text>\n";
  }
  os << "<text x=\"" << ml + pw / 2 << "\" y=\"" << H - 10
     << "\" text-anchor=\"middle\" font-family=\"sans-serif\" font-size=\"13\">theta</text>\n";
  os << "<text x=\"18\" y=\"" << mt + ph / 2
     << "\" text-anchor=\"middle\" font-family=\"sans-serif\" font-size=\"13\""
     << " transform=\"rotate(-90 18 " << mt + ph / 2 << ")\">equilibrium state</text>\n";

  for (Index c = 0; c < state_dim; ++c) {
    const char* col = palette[(int)(c % ncol)];
    std::ostringstream pts;
    bool open = false;
    for (const SweepPoint& p : sweep.points) {
      if (p.x_star.size() != state_dim) {
        if (open) {
          os << "<polyline fill=\"none\" stroke=\"" << col << "\" stroke-width=\"1.5\" points=\""
             << pts.str() << "\"/>\n";
          pts.str("");
          open = false;
        }
        continue;
      }
      pts << sx(p.theta) << ',' << sy(p.x_star(c)) << ' ';
      open = true;
      os << "<circle cx=\"" << sx(p.theta) << "\" cy=\"" << sy(p.x_star(c)) << "\" r=\"2.5\""
         << " fill=\"" << col << "\"/>\n";
    }
    if (open)
      os << "<polyline fill=\"none\" stroke=\"" << col << "\" stroke-width=\"1.5\" points=\""
         << pts.str() << "\"/>\n";
    double ly = mt + 16 + 18.0 * (double)c;
    os << "<line x1=\"" << ml + pw + 14 << "\" y1=\"" << ly - 4 << "\" x2=\"" << ml + pw + 34
       << "\" y2=\"" << ly - 4 << "\" stroke=\"" << col << "\" stroke-width=\"2\"/>\n";
    os << "<text x=\"" << ml + pw + 40 << "\" y=\"" << ly
       << "\" font-family=\"sans-serif\" font-size=\"12\">x" << c << "*</text>\n";
  }
  os << "</svg>\n";
  return os.str();
}

} // namespace mpg
