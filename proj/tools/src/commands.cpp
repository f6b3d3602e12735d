#include "commands.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <iomanip>
#include <memory>
#include <sstream>

#include <json.hpp>

#include "literal.hpp"
#include "rp2ends/degeneration.hpp"
#include "rp2ends/developing.hpp"
#include "rp2ends/error.hpp"
#include "rp2ends/levinson.hpp"
#include "rp2ends/model_geometry.hpp"
#include "rp2ends/residue_spectrum.hpp"
#include "rp2ends/wang_solver.hpp"

namespace rp2ends::cli {

using json = nlohmann::ordered_json;

namespace {

json triple_json(const Triple& t) { return json::array({t[0], t[1], t[2]}); }

json complex_json(cplx z) { return json::array({z.real(), z.imag()}); }

json matrix_json(const Mat3& m) {
  json rows = json::array();
  for (int i = 0; i < 3; ++i) rows.push_back(json::array({m(i, 0), m(i, 1), m(i, 2)}));
  return rows;
}

std::string short_real(double v) {
  char buf[48];
  std::snprintf(buf, sizeof buf, "%.10g", v + 0.0);
  return buf;
}

std::string short_complex(cplx z) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.6g%+.6gi", z.real(), z.imag());
  return buf;
}

std::string dump(const json& j) { return j.dump(2) + "\n"; }

void emit_file(const Context& ctx, const std::string& name, const std::string& content) {
  const auto path = ctx.out_dir() / name;
  write_atomically(path, content);
  ctx.console() << "wrote " << path.string() << "\n";
}

// Writes a table as CSV or JSON according to --format.
void emit_table(const Context& ctx, const std::string& stem, const std::vector<std::string>& header,
                const std::vector<std::vector<std::string>>& rows, const json& as_json) {
  if (ctx.format == Format::Json) {
    emit_file(ctx, stem + ".json", dump(as_json));
    return;
  }
  std::ostringstream os;
  for (std::size_t i = 0; i < header.size(); ++i) os << (i ? "," : "") << header[i];
  os << "\n";
  for (const auto& r : rows) {
    for (std::size_t i = 0; i < r.size(); ++i) os << (i ? "," : "") << r[i];
    os << "\n";
  }
  emit_file(ctx, stem + ".csv", os.str());
}

std::string aligned(const std::vector<std::string>& header, const std::vector<std::vector<std::string>>& rows) {
  std::vector<std::size_t> w(header.size());
  for (std::size_t i = 0; i < header.size(); ++i) w[i] = header[i].size();
  for (const auto& r : rows) {
    for (std::size_t i = 0; i < r.size(); ++i) w[i] = std::max(w[i], r[i].size());
  }
  std::ostringstream os;
  auto line = [&](const std::vector<std::string>& cells) {
    for (std::size_t i = 0; i < cells.size(); ++i) {
      os << std::left << std::setw(static_cast<int>(w[i])) << cells[i] << (i + 1 < cells.size() ? "  " : "");
    }
    os << "\n";
  };
  line(header);
  for (const auto& r : rows) line(r);
  return os.str();
}

std::string table_csv(const std::vector<std::string>& header, const std::vector<std::vector<std::string>>& rows) {
  std::ostringstream os;
  for (std::size_t i = 0; i < header.size(); ++i) os << (i ? "," : "") << header[i];
  os << "\n";
  for (const auto& r : rows) {
    for (std::size_t i = 0; i < r.size(); ++i) os << (i ? "," : "") << r[i];
    os << "\n";
  }
  return os.str();
}

Triple exp_spectrum(const Triple& lambda) {
  return {std::exp(kTwoPi * lambda[0]), std::exp(kTwoPi * lambda[1]), std::exp(kTwoPi * lambda[2])};
}

std::string read_file(const std::string& path) {
  std::ifstream is(path);
  if (!is) throw Error(ErrorCode::IoError, "cannot open " + path);
  std::ostringstream ss;
  ss << is.rdbuf();
  return ss.str();
}

CylinderGrid load_grid(const std::string& path) {
  std::istringstream is(read_file(path));
  return read_grid_csv(is);
}

PrincipalTriangle coordinate_triangle() {
  PrincipalTriangle t;
  t.basis = Mat3::Identity();
  for (int i = 0; i < 3; ++i) t.vertices[i] = project(Vec3::Unit(i));
  return t;
}

json point_json(const ProjPoint& p) { return json::array({p[0], p[1], p[2]}); }

std::string point_text(const ProjPoint& p) {
  return "[" + short_real(p[0]) + ", " + short_real(p[1]) + ", " + short_real(p[2]) + "]";
}

}  // namespace

int exit_code_for(const std::exception& e) {
  if (const auto* err = dynamic_cast<const Error*>(&e)) {
    switch (err->code()) {
      case ErrorCode::ConfigError:
      case ErrorCode::ParseError:
      case ErrorCode::IoError:
        return 2;
      default:
        return 3;
    }
  }
  return 3;
}

int cmd_classify(Context& ctx) {
  const Config& cfg = ctx.config;
  cfg.require_known({"residues"});
  std::vector<cplx> residues = cfg.complexes("residues");
  for (const auto& p : ctx.positional) residues.push_back(parse_complex(p));
  if (residues.empty()) throw Error(ErrorCode::ConfigError, "classify needs residues (positional or 'residues')");

  const std::vector<std::string> header{"residue", "class", "lambda1", "lambda2", "lambda3", "alpha1",
                                        "alpha2",  "alpha3", "discriminant", "twist"};
  std::vector<std::vector<std::string>> text_rows;
  std::vector<std::vector<std::string>> csv_rows;
  json rows = json::array();
  for (cplx r : residues) {
    const SpectrumReport rep = spectrum_report(r);
    const std::string cls(kind_name(rep.cls.kind));
    const std::string twist(twist_sign_name(rep.twist));
    text_rows.push_back({short_complex(r), cls, short_real(rep.lambda[0]), short_real(rep.lambda[1]),
                         short_real(rep.lambda[2]), short_real(rep.alpha[0]), short_real(rep.alpha[1]),
                         short_real(rep.alpha[2]), short_real(rep.discriminant), twist});
    csv_rows.push_back({format_complex(r), cls, format_real(rep.lambda[0]), format_real(rep.lambda[1]),
                        format_real(rep.lambda[2]), format_real(rep.alpha[0]), format_real(rep.alpha[1]),
                        format_real(rep.alpha[2]), format_real(rep.discriminant), twist});
    rows.push_back(json{{"residue", complex_json(r)},
                        {"class", cls},
                        {"lambda", triple_json(rep.lambda)},
                        {"alpha", triple_json(rep.alpha)},
                        {"discriminant", rep.discriminant},
                        {"twist", twist}});
  }
  if (ctx.format == Format::Json) {
    ctx.console() << dump(rows);
  } else {
    ctx.console() << aligned(header, text_rows);
  }
  if (ctx.out) emit_table(ctx, "classify", header, csv_rows, rows);
  return 0;
}

int cmd_spectrum(Context& ctx) {
  const Config& cfg = ctx.config;
  cfg.require_known({"residue", "lambda", "iota"});
  json out;
  if (cfg.has("lambda")) {
    if (cfg.has("residue")) throw Error(ErrorCode::ConfigError, "give either 'lambda' or 'residue'");
    const std::vector<double> l = cfg.reals("lambda");
    if (l.size() != 3) throw Error(ErrorCode::ConfigError, "'lambda' needs three values");
    const std::vector<cplx> rs = residues_for_spectrum({l[0], l[1], l[2]});
    json arr = json::array();
    ctx.console() << "residues with spectrum (" << short_real(l[0]) << ", " << short_real(l[1]) << ", "
                  << short_real(l[2]) << "):\n";
    for (cplx r : rs) {
      const Triple back = chi_roots(r);
      arr.push_back(json{{"residue", complex_json(r)}, {"chi_roots", triple_json(back)}});
      ctx.console() << "  " << short_complex(r) << "\n";
    }
    out = json{{"lambda", json::array({l[0], l[1], l[2]})}, {"residues", arr}};
  } else {
    const auto r = cfg.complex("residue");
    if (!r) throw Error(ErrorCode::ConfigError, "spectrum needs 'residue' or 'lambda'");
    const SpectrumReport rep = spectrum_report(*r);
    out = json{{"residue", complex_json(*r)},
               {"class", std::string(kind_name(rep.cls.kind))},
               {"lambda", triple_json(rep.lambda)},
               {"alpha", triple_json(rep.alpha)},
               {"discriminant", rep.discriminant},
               {"twist", std::string(twist_sign_name(rep.twist))}};
    ctx.console() << "residue " << short_complex(*r) << ": " << kind_name(rep.cls.kind) << ", lambda = ("
                  << short_real(rep.lambda[0]) << ", " << short_real(rep.lambda[1]) << ", "
                  << short_real(rep.lambda[2]) << "), twist " << twist_sign_name(rep.twist) << "\n";
    if (rep.xi) {
      out["xi"] = complex_json(*rep.xi);
      ctx.console() << "xi = " << short_complex(*rep.xi) << "\n";
    }
    if (rep.iota) out["iota"] = *rep.iota;
    if (rep.iota_hat) out["iota_hat"] = *rep.iota_hat;
    if (rep.mu) out["mu"] = triple_json(*rep.mu);
    if (rep.rho) out["rho"] = triple_json(*rep.rho);
    if (const auto iota = cfg.real("iota")) {
      const DirectionEigenvalues d = direction_eigenvalues(*r, *iota);
      out["direction"] = json{{"iota", *iota}, {"mu", triple_json(d.mu)}, {"rho", triple_json(d.rho)}};
      ctx.console() << "direction iota = " << short_real(*iota) << ": rho = (" << short_real(d.rho[0]) << ", "
                    << short_real(d.rho[1]) << ", " << short_real(d.rho[2]) << ")\n";
    }
  }
  if (ctx.format == Format::Json) ctx.console() << dump(out);
  if (ctx.out) emit_file(ctx, "spectrum.json", dump(out));
  return 0;
}

namespace {

std::shared_ptr<const CylinderBackground> wang_background(const Config& cfg) {
  const std::string end = cfg.text("end", "flat");
  const cplx r = cfg.complex("residue", cplx(2.0, 0.0));
  std::shared_ptr<const CylinderBackground> bg;
  if (end == "flat" || end == "triangle") {
    bg = flat_collar_background(end == "triangle" ? cplx(0.0, 2.0) : r);
  } else if (end == "cusp") {
    bg = cusp_background();
  } else if (end == "ansatz") {
    CubicLaurent u = CubicLaurent::pure(r);
    if (const auto file = cfg.text("laurent")) {
      std::istringstream is(read_file(*file));
      u = read_laurent(is);
    }
    bg = end_background(u, ansatz_metric(u, cfg.real("c", kDefaultInnerRadius),
                                         cfg.real("big_c", kDefaultOuterRadius)));
  } else {
    throw Error(ErrorCode::ConfigError, "unknown end '" + end + "' (flat, triangle, cusp, ansatz)");
  }
  const double eps = cfg.real("perturb", 0.0);
  if (eps != 0.0) {
    auto p = std::make_shared<CylinderBackground>(*bg);
    const auto base = bg->U;
    p->U = [base, eps](double x, double y) {
      return base(x, y) * (1.0 + eps * std::exp(cplx(-y, x)));
    };
    p->label = bg->label + " perturbed";
    bg = p;
  }
  return bg;
}

}  // namespace

int cmd_wang(Context& ctx) {
  const Config& cfg = ctx.config;
  cfg.require_known({"end", "residue", "laurent", "c", "big_c", "perturb", "nx", "ny", "y0", "y1", "alpha",
                     "beta", "tol", "barriers", "max_newton"});
  const auto bg = wang_background(cfg);
  CylinderGrid grid = CylinderGrid::sample(bg, cfg.integer("nx", 64), cfg.integer("ny", 256),
                                           cfg.real("y0", 1.0), cfg.real("y1", 9.0));
  SolveOptions opts;
  opts.max_newton = cfg.integer("max_newton", opts.max_newton);
  BarrierPair barriers;
  if (cfg.flag("barriers", true)) {
    barriers = build_barriers(grid, cfg.real("alpha", 0.25), cfg.real("beta", 1.0));
    opts.barriers = &barriers;
  }
  const SolveReport rep = solve_wang(grid, BoundaryCondition::DirichletZero, cfg.real("tol", 1e-10), opts);
  double sup = 0.0;
  for (double v : rep.u) sup = std::max(sup, std::abs(v));
  json summary{{"background", bg->label},
               {"nx", grid.nx()},
               {"ny", grid.ny()},
               {"y0", grid.y0()},
               {"y1", grid.y1()},
               {"residual_inf", rep.residual_inf},
               {"newton_iters", rep.newton_iters},
               {"sup_u", sup},
               {"bracketed", rep.bracketed}};
  if (opts.barriers) {
    summary["barrier_alpha"] = barriers.alpha;
    summary["barrier_beta"] = barriers.beta;
    summary["barrier_doublings"] = barriers.doublings;
  }
  if (ctx.format == Format::Json) {
    ctx.console() << dump(summary);
  } else {
    ctx.console() << bg->label << ": sup|u| = " << short_real(sup) << ", residual = "
                  << short_real(rep.residual_inf) << ", newton iterations = " << rep.newton_iters
                  << (opts.barriers ? (rep.bracketed ? ", bracketed" : ", NOT bracketed") : "") << "\n";
  }
  std::ostringstream os;
  write_grid_csv(os, grid);
  emit_file(ctx, "grid.csv", os.str());
  emit_file(ctx, "wang.json", dump(summary));
  return 0;
}

int cmd_develop(Context& ctx) {
  const Config& cfg = ctx.config;
  cfg.require_known({"field", "residue", "grid_file", "theta", "iota", "y_max", "step", "base_y"});
  const std::string kind = cfg.text("field", "triangle");
  const double step = cfg.real("step", 1e-3);
  DevelopedCurve curve;
  std::optional<PrincipalTriangle> tri;
  json summary{{"field", kind}};
  std::optional<double> theta;
  if (kind == "triangle") {
    theta = cfg.real("theta", 0.0);
    curve = develop_model_ray(*theta, step);
    tri = coordinate_triangle();
  } else if (kind == "model" || kind == "grid") {
    const cplx r = cfg.complex("residue", cplx(2.0, 0.0));
    const double iota = cfg.real("iota", kPi / 2.0);
    const double y_max = cfg.real("y_max", 40.0);
    const cplx c = model_coordinate_scale(r);
    const cplx phase = c / std::abs(c);
    summary["residue"] = complex_json(r);
    summary["iota"] = iota;
    if (kind == "model") {
      const ConstantField field = ConstantField::model_end(r);
      curve = develop_ray(field, iota, y_max, step, phase);
      theta = iota + std::arg(xi_branch(r));
      tri = coordinate_triangle();
    } else {
      const auto file = cfg.text("grid_file");
      if (!file) throw Error(ErrorCode::ConfigError, "field = grid needs 'grid_file'");
      // Above the grid the flat model end takes over.
      auto grid = std::make_shared<GridField>(load_grid(*file));
      const double top = grid->grid().y1();
      const CutoffField field(grid, std::make_shared<ConstantField>(ConstantField::model_end(r)), top);
      const double base = cfg.real("base_y", field.base_y());
      const AffineFrame f0 = initial_frame(field.at(0.0, base).psi, phase);
      RayOptions ro;
      ro.step = step;
      ro.max_length = std::max(ro.max_length, (y_max - base) / std::sin(iota) + 1.0);
      curve = develop_ray_from(field, f0, 0.0, base, iota, y_max, ro);
      try {
        const HolonomyLoop loop = holonomy_loop_report(field, base, kDefaultLoopStep);
        tri = principal_triangle(UnimodularMatrix(developing_action(loop.h, f0)),
                                 Vec3(f0.rows.row(0).real().transpose()));
      } catch (const Error& e) {
        ctx.console() << "no principal triangle: " << e.what() << "\n";
      }
    }
  } else {
    throw Error(ErrorCode::ConfigError, "unknown field '" + kind + "' (triangle, model, grid)");
  }
  const ProjPoint limit = *curve.limit;
  summary["limit"] = point_json(limit);
  summary["samples"] = curve.samples.size();
  ctx.console() << "limit point " << point_text(limit) << "\n";
  if (theta) {
    const LimitRow want = predicted_limit_row(*theta);
    const auto got = match_limit_row(limit);
    summary["theta"] = *theta;
    summary["predicted_row"] = std::string(limit_row_name(want));
    summary["matched_row"] = got ? std::string(limit_row_name(*got)) : std::string("none");
    ctx.console() << "theta = " << short_real(*theta) << ": limit table predicts " << limit_row_name(want)
                  << ", matched " << (got ? std::string(limit_row_name(*got)) : std::string("none")) << "\n";
  }
  std::ostringstream csv;
  write_curve_csv(csv, curve);
  emit_file(ctx, "curve.csv", csv.str());
  if (ctx.svg) {
    std::ostringstream svg;
    const int clipped = write_curve_svg(svg, curve, tri);
    summary["clipped"] = clipped;
    if (clipped > 0) ctx.console() << "warning: " << clipped << " samples outside the chart were clipped\n";
    emit_file(ctx, "curve.svg", svg.str());
  }
  if (ctx.format == Format::Json) ctx.console() << dump(summary);
  emit_file(ctx, "develop.json", dump(summary));
  return 0;
}

int cmd_holonomy(Context& ctx) {
  const Config& cfg = ctx.config;
  cfg.require_known({"field", "residue", "grid_file", "y", "y_top", "step"});
  const std::string kind = cfg.text("field", "model");
  const double step = cfg.real("step", kDefaultLoopStep);
  std::unique_ptr<TransportField> field;
  std::optional<Triple> expected;
  if (kind == "model") {
    const cplx r = cfg.complex("residue", cplx(2.0, 0.0));
    field = std::make_unique<ConstantField>(ConstantField::model_end(r));
    expected = exp_spectrum(chi_roots(r));
  } else if (kind == "triangle") {
    field = std::make_unique<ConstantField>(ConstantField::triangle_model());
    expected = exp_spectrum(chi_roots(cplx(0.0, 2.0)));
  } else if (kind == "grid") {
    const auto file = cfg.text("grid_file");
    if (!file) throw Error(ErrorCode::ConfigError, "field = grid needs 'grid_file'");
    field = std::make_unique<GridField>(load_grid(*file));
  } else {
    throw Error(ErrorCode::ConfigError, "unknown field '" + kind + "' (model, triangle, grid)");
  }
  const double y = cfg.real("y", field->base_y() + (kind == "grid" ? 0.0 : 5.0));
  const auto y_top = cfg.real("y_top");
  const HolonomyLoop loop = y_top ? holonomy_rectangle(*field, y, *y_top, step)
                                  : holonomy_loop_report(*field, y, step);
  json out{{"field", kind},
           {"y", y},
           {"step", step},
           {"matrix", matrix_json(loop.h)},
           {"raw_det", loop.raw_det},
           {"eigenvalues", triple_json(loop.eigenvalues)}};
  if (y_top) out["y_top"] = *y_top;
  std::string cls = "unclassified";
  try {
    cls = std::string(kind_name(classify_matrix(UnimodularMatrix(loop.h)).kind));
  } catch (const Error& e) {
    cls += std::string(" (") + e.what() + ")";
  }
  out["class"] = cls;
  ctx.console() << "holonomy at y = " << short_real(y) << ": eigenvalues (" << short_real(loop.eigenvalues[0])
                << ", " << short_real(loop.eigenvalues[1]) << ", " << short_real(loop.eigenvalues[2])
                << "), det - 1 = " << short_real(loop.raw_det - 1.0) << ", class " << cls << "\n";
  if (expected) {
    Triple rel{};
    for (int i = 0; i < 3; ++i) rel[i] = std::abs(loop.eigenvalues[i] / (*expected)[i] - 1.0);
    out["expected"] = triple_json(*expected);
    out["relative_error"] = triple_json(rel);
    ctx.console() << "limit spectrum (" << short_real((*expected)[0]) << ", " << short_real((*expected)[1]) << ", "
                  << short_real((*expected)[2]) << "), max relative error "
                  << short_real(*std::max_element(rel.begin(), rel.end())) << "\n";
  }
  if (ctx.format == Format::Json) ctx.console() << dump(out);
  if (ctx.out) emit_file(ctx, "holonomy.json", dump(out));
  return 0;
}

int cmd_levinson(Context& ctx) {
  const Config& cfg = ctx.config;
  cfg.require_known({"system", "mu", "decay", "coupling", "k", "s", "y_max", "step", "tol", "m_max", "residue",
                     "iota", "probe"});
  const std::string kind = cfg.text("system", "diagonal");
  std::optional<PerturbedSystem> sys;
  if (kind == "diagonal") {
    std::vector<double> mu = cfg.reals("mu");
    if (mu.empty()) mu = {1.0, 0.0, -1.0};
    const double decay = cfg.real("decay", 1.0);
    const double coupling = cfg.real("coupling", 1.0);
    if (!(decay > 0.0)) throw Error(ErrorCode::ConfigError, "'decay' must be positive");
    const int n = static_cast<int>(mu.size());
    sys.emplace([](double) { return 1.0; }, mu,
                [n, decay, coupling](double s, double y) {
                  MatXc r = MatXc::Constant(n, n, cplx(s * coupling * std::exp(-decay * y)));
                  r.diagonal().setZero();
                  return r;
                },
                0.0);
  } else if (kind == "ray") {
    const cplx r = cfg.complex("residue", cplx(2.0, 0.0));
    auto field = std::make_shared<ConstantField>(ConstantField::model_end(r));
    sys.emplace(ray_system(field, r, cfg.real("iota", kPi / 2.0)));
  } else {
    throw Error(ErrorCode::ConfigError, "unknown system '" + kind + "' (diagonal, ray)");
  }
  LevinsonOptions opts;
  opts.y_max = cfg.real("y_max", opts.y_max);
  opts.step = cfg.real("step", opts.step);
  opts.tol = cfg.real("tol", opts.tol);
  opts.m_max = cfg.integer("m_max", opts.m_max);
  const double s = cfg.real("s", 1.0);
  const int k = cfg.integer("k", 1);
  const AsymptoticSolution sol = iterate_solution(*sys, s, k, opts);
  const double probe = cfg.real("probe", 0.5 * opts.y_max);
  const double bound = error_bound(*sys, s, k, probe, std::nullopt, opts);
  const double residual = solution_residual(*sys, s, sol);
  json ratios = json::array();
  for (std::size_t i = 1; i < sol.differences.size(); ++i) {
    if (sol.differences[i - 1] > 0.0) ratios.push_back(sol.differences[i] / sol.differences[i - 1]);
  }
  json out{{"system", kind},
           {"k", k},
           {"q", sol.q},
           {"s", s},
           {"iterates", sol.iterates},
           {"differences", sol.differences},
           {"ratios", ratios},
           {"tail_bound", sol.tail_bound},
           {"residual", residual},
           {"probe", probe},
           {"error_bound", bound}};
  ctx.console() << "solution " << k << " of " << sys->n() << ": " << sol.iterates << " iterates, tail bound "
                << short_real(sol.tail_bound) << ", residual " << short_real(residual) << ", error bound at y = "
                << short_real(probe) << ": " << short_real(bound) << "\n";
  std::ostringstream csv;
  write_solution_csv(csv, sol);
  emit_file(ctx, "solution.csv", csv.str());
  if (ctx.format == Format::Json) ctx.console() << dump(out);
  emit_file(ctx, "levinson.json", dump(out));
  return 0;
}

namespace {

// a.<m> = c0 and a.<m>.t = c1 give a_m(t) = c0 + c1 t; b_-3 follows a_-3.
struct AffineCoefficients {
  std::map<int, std::pair<cplx, cplx>> a;
  std::map<int, std::pair<cplx, cplx>> b;

  static AffineCoefficients from(const Config& cfg) {
    AffineCoefficients c;
    for (const auto& [key, value] : cfg.values()) {
      const bool is_a = key.rfind("a.", 0) == 0;
      const bool is_b = key.rfind("b.", 0) == 0;
      if (!is_a && !is_b) continue;
      std::string rest = key.substr(2);
      bool slope = false;
      if (rest.size() > 2 && rest.compare(rest.size() - 2, 2, ".t") == 0) {
        slope = true;
        rest.resize(rest.size() - 2);
      }
      int m = 0;
      try {
        m = static_cast<int>(parse_integer(rest));
      } catch (const Error&) {
        throw Error(ErrorCode::ConfigError, "bad coefficient key '" + key + "'");
      }
      if (is_b && m == -3) throw Error(ErrorCode::ConfigError, "b.-3 is fixed to -a.-3");
      auto& slot = (is_a ? c.a : c.b)[m];
      (slope ? slot.second : slot.first) = cfg.complex(key, cplx(0.0));
    }
    return c;
  }

  CoefficientMap eval_a(cplx t) const {
    CoefficientMap m;
    for (const auto& [k, v] : a) m[k] = v.first + v.second * t;
    return m;
  }

  CoefficientMap eval_b(cplx t) const {
    CoefficientMap m;
    for (const auto& [k, v] : b) m[k] = v.first + v.second * t;
    const auto it = a.find(-3);
    if (it != a.end()) m[-3] = -(it->second.first + it->second.second * t);
    return m;
  }
};

std::vector<cplx> sweep_values(const Config& cfg) {
  if (cfg.has("t_sweep")) return cfg.complexes("t_sweep");
  const double t_max = cfg.real("t_max", 1e-2);
  const double t_min = cfg.real("t_min", 1e-6);
  const int rows = cfg.integer("rows", 5);
  if (!(t_max > t_min && t_min > 0.0) || rows < 2) {
    throw Error(ErrorCode::ConfigError, "need t_max > t_min > 0 and rows >= 2");
  }
  std::vector<cplx> t;
  for (int i = 0; i < rows; ++i) {
    const double f = static_cast<double>(i) / (rows - 1);
    t.emplace_back(std::exp(std::log(t_max) + f * (std::log(t_min) - std::log(t_max))), 0.0);
  }
  return t;
}

}  // namespace

int cmd_family(Context& ctx) {
  const Config& cfg = ctx.config;
  cfg.require_known({"kind", "t_sweep", "t_max", "t_min", "rows", "nx", "rows_per_unit", "K", "alpha", "beta",
                     "tol", "truncation", "branch", "decay_constant", "loop_step", "twist", "base_y"},
                    {"a.", "b."});
  const AffineCoefficients coeffs = AffineCoefficients::from(cfg);
  FamilySpec spec;
  spec.a = [coeffs](cplx t) { return coeffs.eval_a(t); };
  spec.b = [coeffs](cplx t) { return coeffs.eval_b(t); };
  spec.t_sweep = sweep_values(cfg);
  const std::string kind = cfg.text("kind", "qh");
  if (kind == "qh") {
    spec.kind = NeckKind::QHNeck;
  } else if (kind == "parabolic") {
    spec.kind = NeckKind::ParabolicNeck;
  } else {
    throw Error(ErrorCode::ConfigError, "unknown kind '" + kind + "' (qh, parabolic)");
  }
  spec.nx = cfg.integer("nx", spec.nx);
  spec.rows_per_unit = cfg.real("rows_per_unit", spec.rows_per_unit);
  spec.k = cfg.real("K", spec.k);
  spec.alpha = cfg.real("alpha", spec.alpha);
  spec.beta = cfg.real("beta", spec.beta);
  spec.solve_tol = cfg.real("tol", spec.solve_tol);
  spec.truncation = cfg.integer("truncation", spec.truncation);
  spec.log_branch = cfg.integer("branch", spec.log_branch);
  spec.loop_step = cfg.real("loop_step", spec.loop_step);
  if (const auto c = cfg.real("decay_constant")) spec.decay_constant = *c;

  json summary{{"kind", kind}};
  if (spec.kind == NeckKind::QHNeck) {
    const std::vector<SweepRow> rows = qh_sweep(spec);
    std::ostringstream csv;
    write_sweep_csv(csv, rows);
    emit_file(ctx, "sweep.csv", csv.str());
    bool contained = true;
    double product = 0.0;
    double loops = 0.0;
    for (const SweepRow& r : rows) {
      contained = contained && r.contained;
      product = std::max(product, std::abs(r.eigen_product - 1.0));
      loops = std::max(loops, r.loop_agreement);
      ctx.console() << "t = " << short_real(r.t.real()) << ": max deviation " << short_real(r.max_deviation)
                    << ", residual " << short_real(r.residual) << ", barrier sup " << short_real(r.barrier_sup)
                    << "\n";
    }
    const bool monotone = deviations_monotone(rows);
    summary["final_deviation"] = rows.back().max_deviation;
    summary["monotone_tail"] = monotone;
    summary["barrier_containment"] = contained;
    summary["max_product_error"] = product;
    summary["max_loop_disagreement"] = loops;
    ctx.console() << "monotone tail: " << (monotone ? "pass" : "FAIL") << ", containment: "
                  << (contained ? "pass" : "FAIL") << "\n";
    if (cfg.flag("twist", false)) {
      const auto tw = twist_witness_sweep(spec, cfg.real("base_y", 1.0));
      std::ostringstream ts;
      ts << "t,edge1,edge2,limit1_p1,limit1_p2,limit1_p3,limit2_p1,limit2_p2,limit2_p3,adjacent1,adjacent2\n";
      for (const auto& r : tw) {
        ts << format_real(r.t.real());
        for (const auto& w : r.evidence.witnesses) ts << "," << edge_name(w.edge);
        for (const auto& p : r.neck_limits) {
          for (int i = 0; i < 3; ++i) ts << "," << format_real(p[i]);
        }
        for (std::size_t i = 0; i < 2; ++i) {
          ts << "," << (i < r.adjacent_deviation.size() ? format_real(r.adjacent_deviation[i]) : std::string());
        }
        ts << "\n";
      }
      emit_file(ctx, "twist.csv", ts.str());
      summary["twist_rows"] = tw.size();
    }
  } else {
    const std::vector<ParabolicRow> rows = parabolic_sweep(spec);
    std::ostringstream csv;
    csv << "t,row2,row3,limit_distance,exp1,exp2,exp3,kappa_deviation,decay_sup,barrier_sup\n";
    std::vector<double> ts;
    std::vector<double> ks;
    bool rows_decay = true;
    for (std::size_t i = 0; i < rows.size(); ++i) {
      const ParabolicRow& r = rows[i];
      csv << format_real(r.t.real()) << "," << format_real(r.row2) << "," << format_real(r.row3) << ","
          << format_real(r.limit_distance) << "," << format_real(r.exp_eigenvalues[0]) << ","
          << format_real(r.exp_eigenvalues[1]) << "," << format_real(r.exp_eigenvalues[2]) << ","
          << format_real(r.kappa_deviation) << "," << format_real(r.decay_sup) << ","
          << format_real(r.barrier_sup) << "\n";
      ts.push_back(std::abs(r.t));
      ks.push_back(r.kappa_deviation);
      if (i > 0) {
        const double l0 = std::abs(std::log(std::abs(rows[i - 1].t)));
        const double l1 = std::abs(std::log(std::abs(r.t)));
        rows_decay = rows_decay && std::max(r.row2, r.row3) * l1 <= std::max(rows[i - 1].row2, rows[i - 1].row3) * l0;
      }
      ctx.console() << "t = " << short_real(r.t.real()) << ": rows 2-3 " << short_real(r.row2) << ", "
                    << short_real(r.row3) << ", |kappa + 1| " << short_real(r.kappa_deviation) << "\n";
    }
    emit_file(ctx, "sweep.csv", csv.str());
    if (rows.size() >= 2) {
      const PowerFit fit = fit_power(ts, ks);
      summary["kappa_gamma"] = fit.gamma;
      summary["kappa_delta"] = fit.delta;
      ctx.console() << "kappa fit: gamma = " << short_real(fit.gamma) << ", delta = " << short_real(fit.delta) << "\n";
    }
    Triple e = rows.back().exp_eigenvalues;
    double worst = 0.0;
    for (double v : e) worst = std::max(worst, std::abs(v - 1.0));
    summary["rows_decay_like_inverse_log"] = rows_decay;
    summary["final_exp_eigenvalues"] = triple_json(e);
    summary["final_exp_within_1e-2"] = worst <= 1e-2;
  }
  if (ctx.format == Format::Json) ctx.console() << dump(summary);
  emit_file(ctx, "summary.json", dump(summary));
  return 0;
}

int cmd_triangle(Context& ctx) {
  const Config& cfg = ctx.config;
  cfg.require_known({"thetas", "step", "oracle"});
  std::vector<double> thetas = cfg.reals("thetas");
  if (thetas.empty()) {
    for (int k = 0; k < 6; ++k) thetas.push_back(k * kPi / 3.0);
  }
  const double step = cfg.real("step", 1e-3);
  const std::vector<std::string> header{"theta", "predicted", "matched", "p1", "p2", "p3", "pass"};
  std::vector<std::vector<std::string>> text_rows;
  std::vector<std::vector<std::string>> csv_rows;
  json rows = json::array();
  for (std::size_t i = 0; i < thetas.size(); ++i) {
    const double th = thetas[i];
    const DevelopedCurve curve = develop_model_ray(th, step);
    const ProjPoint p = *curve.limit;
    const LimitRow want = predicted_limit_row(th);
    const auto got = match_limit_row(p);
    const bool pass = got && *got == want;
    const std::string matched = got ? std::string(limit_row_name(*got)) : "none";
    text_rows.push_back({short_real(th), std::string(limit_row_name(want)), matched, short_real(p[0]),
                         short_real(p[1]), short_real(p[2]), pass ? "yes" : "no"});
    csv_rows.push_back({format_real(th), std::string(limit_row_name(want)), matched, format_real(p[0]),
                        format_real(p[1]), format_real(p[2]), pass ? "yes" : "no"});
    rows.push_back(json{{"theta", th},
                        {"predicted", std::string(limit_row_name(want))},
                        {"matched", matched},
                        {"limit", point_json(p)},
                        {"pass", pass}});
    if (ctx.svg) {
      std::ostringstream svg;
      write_curve_svg(svg, curve, coordinate_triangle());
      emit_file(ctx, "ray_" + std::to_string(i) + ".svg", svg.str());
    }
  }
  json out{{"rays", rows}};
  if (cfg.flag("oracle", true)) {
    const Path path{{0.0, 0.0}, {1.5, 0.7}, {-0.3, 1.9}};
    const double len = std::hypot(1.5, 0.7) + std::hypot(1.8, 1.2);
    const TransportResult tr = transport(initial_frame(std::log(2.0)), ConstantField::triangle_model(), path, step, true);
    const AffineFrame exact = triangle_model_frame(-0.3, 1.9);
    const double err = (tr.frame.rows - exact.rows).norm() / exact.rows.norm() / len;
    out["oracle"] = json{{"error_per_length", err}, {"volume_drift", volume_drift(tr.trajectory)}};
    text_rows.push_back({});
  }
  if (ctx.format == Format::Json) {
    ctx.console() << dump(out);
  } else {
    if (!text_rows.empty() && text_rows.back().empty()) text_rows.pop_back();
    ctx.console() << aligned(header, text_rows);
    if (out.contains("oracle")) {
      ctx.console() << "closed-form oracle: error per unit path "
                    << short_real(out["oracle"]["error_per_length"].get<double>()) << ", volume drift "
                    << short_real(out["oracle"]["volume_drift"].get<double>()) << "\n";
    }
  }
  if (ctx.out) {
    if (ctx.format == Format::Json) {
      emit_file(ctx, "triangle.json", dump(out));
    } else {
      emit_file(ctx, "triangle.csv", table_csv(header, csv_rows));
    }
  }
  return 0;
}

}  // namespace rp2ends::cli
