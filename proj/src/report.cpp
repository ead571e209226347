#include "spiked/report.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <istream>
#include <map>
#include <ostream>
#include <set>
#include <sstream>
#include <tuple>

#include <fmt/format.h>

#include "json.hpp"
#include "spiked/errors.hpp"

namespace spiked::report {

using exp::TrialRecord;
using json = nlohmann::json;

std::string format_real(double x) {
  if (!std::isfinite(x)) throw InputError("format_real: non-finite value");
  char buf[64];
  auto res = std::to_chars(buf, buf + sizeof buf, x);
  return std::string(buf, res.ptr);
}

namespace {

template <class T>
std::string opt(const std::optional<T>& v) {
  if (!v) return {};
  if constexpr (std::is_floating_point_v<T>) {
    return format_real(*v);
  } else {
    return std::to_string(*v);
  }
}

std::vector<std::string_view> split(std::string_view line, char sep) {
  std::vector<std::string_view> out;
  std::size_t start = 0;
  for (;;) {
    const auto pos = line.find(sep, start);
    out.push_back(line.substr(start, pos == std::string_view::npos ? std::string_view::npos : pos - start));
    if (pos == std::string_view::npos) return out;
    start = pos + 1;
  }
}

[[noreturn]] void bad(std::size_t line, const std::string& what) {
  throw InputError(fmt::format("csv line {}: {}", line, what));
}

template <class T>
T parse_number(std::string_view s, std::size_t line, const char* field) {
  T v{};
  const auto res = std::from_chars(s.data(), s.data() + s.size(), v);
  if (res.ec != std::errc{} || res.ptr != s.data() + s.size())
    bad(line, fmt::format("bad value '{}' for {}", s, field));
  return v;
}

template <class T>
std::optional<T> parse_opt(std::string_view s, std::size_t line, const char* field) {
  if (s.empty()) return std::nullopt;
  return parse_number<T>(s, line, field);
}

}  // namespace

void emit_csv(std::ostream& os, std::span<const TrialRecord> records) {
  os << kCsvHeader << '\n';
  for (const auto& r : records) {
    os << r.seed << ',' << r.n << ',' << r.r << ',' << r.k << ',' << format_real(r.a) << ','
       << model::to_string(r.noise) << ',' << model::to_string(r.scheme) << ',' << exp::to_string(r.method) << ','
       << opt(r.d_inf) << ',' << opt(r.d_2inf) << ',' << opt(r.lambda_true) << ',' << opt(r.lambda_hat) << ','
       << opt(r.sigma2_hat) << ',' << opt(r.alpha_hat) << ',' << opt(r.support_size) << ','
       << exp::to_string(r.fallback) << ',' << opt(r.wall_ms) << '\n';
  }
}

std::string emit_csv(std::span<const TrialRecord> records) {
  std::ostringstream os;
  emit_csv(os, records);
  return os.str();
}

std::vector<TrialRecord> parse_csv(std::istream& is) {
  std::string line;
  if (!std::getline(is, line)) throw InputError("csv: missing header");
  if (!line.empty() && line.back() == '\r') line.pop_back();
  if (line != kCsvHeader) throw InputError("csv: unexpected header");
  std::vector<TrialRecord> out;
  std::size_t lineno = 1;
  while (std::getline(is, line)) {
    ++lineno;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    const auto f = split(line, ',');
    if (f.size() != 17) bad(lineno, fmt::format("expected 17 fields, found {}", f.size()));
    TrialRecord r;
    try {
      r.seed = parse_number<std::uint64_t>(f[0], lineno, "seed");
      r.n = parse_number<std::size_t>(f[1], lineno, "n");
      r.r = parse_number<std::size_t>(f[2], lineno, "r");
      r.k = parse_number<std::size_t>(f[3], lineno, "k");
      r.a = parse_number<double>(f[4], lineno, "a");
      r.noise = model::parse_noise(f[5]);
      r.scheme = model::parse_scheme(f[6]);
      r.method = exp::parse_method(f[7]);
      r.d_inf = parse_opt<double>(f[8], lineno, "d_inf");
      r.d_2inf = parse_opt<double>(f[9], lineno, "d_2inf");
      r.lambda_true = parse_opt<double>(f[10], lineno, "lambda_true");
      r.lambda_hat = parse_opt<double>(f[11], lineno, "lambda_hat");
      r.sigma2_hat = parse_opt<double>(f[12], lineno, "sigma2_hat");
      r.alpha_hat = parse_opt<double>(f[13], lineno, "alpha_hat");
      r.support_size = parse_opt<std::size_t>(f[14], lineno, "support_size");
      r.fallback = exp::parse_status(f[15]);
      r.wall_ms = parse_opt<double>(f[16], lineno, "wall_ms");
    } catch (const InputError& e) {
      const std::string what = e.what();
      if (what.rfind("csv line", 0) == 0) throw;
      bad(lineno, what);
    }
    out.push_back(r);
  }
  return out;
}

std::vector<TrialRecord> parse_csv(std::string_view text) {
  std::istringstream is{std::string(text)};
  return parse_csv(is);
}

void emit_summary_csv(std::ostream& os, std::span<const exp::SummaryRow> rows, std::string_view metric,
                      bool header) {
  if (header) os << "metric,n,a,noise,scheme,method,k,mean,ci_low,ci_high,count\n";
  for (const auto& r : rows) {
    os << metric << ',' << r.n << ',' << format_real(r.a) << ',' << model::to_string(r.noise) << ',' << model::to_string(r.scheme)
       << ',' << exp::to_string(r.method) << ',' << r.k << ',' << format_real(r.mean) << ','
       << format_real(r.ci_low) << ',' << format_real(r.ci_high) << ',' << r.count << '\n';
  }
}

// ---------------------------------------------------------------------------
// SVG
// ---------------------------------------------------------------------------

namespace {

std::string escape_xml(std::string_view s) {
  std::string out;
  for (char c : s) {
    switch (c) {
      case '<': out += "&lt;"; break;
      case '>': out += "&gt;"; break;
      case '&': out += "&amp;"; break;
      case '"': out += "&quot;"; break;
      default: out += c;
    }
  }
  return out;
}

std::string series_color(exp::Method m, std::size_t k) {
  if (m == exp::Method::spectral) return k >= 2 ? "#6a3d9a" : "#1f77b4";
  return k >= 2 ? "#d62728" : "#ff7f0e";
}

}  // namespace

std::string emit_plot(std::span<const exp::SummaryRow> rows, const PlotSpec& spec) {
  const double w = spec.width, h = spec.height;
  const double left = 80, right = 230, top = 40, bottom = 60;
  const double pw = w - left - right, ph = h - top - bottom;

  std::string svg = fmt::format(
      "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"{}\" height=\"{}\" viewBox=\"0 0 {} {}\" "
      "font-family=\"sans-serif\" font-size=\"12\">\n"
      "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n",
      spec.width, spec.height, spec.width, spec.height);
  if (!spec.title.empty())
    svg += fmt::format("<text x=\"{}\" y=\"22\" text-anchor=\"middle\" font-size=\"15\">{}</text>\n",
                       left + pw / 2, escape_xml(spec.title));

  std::vector<const exp::SummaryRow*> usable;
  for (const auto& r : rows)
    if (r.mean > 0 && r.ci_low > 0 && r.ci_high > 0) usable.push_back(&r);
  if (usable.empty()) {
    svg += fmt::format("<text x=\"{}\" y=\"{}\" text-anchor=\"middle\">no positive data</text>\n</svg>\n",
                       left + pw / 2, top + ph / 2);
    return svg;
  }

  double xmin = 1e300, xmax = -1e300, ymin = 1e300, ymax = -1e300;
  for (auto* r : usable) {
    xmin = std::min(xmin, static_cast<double>(r->n));
    xmax = std::max(xmax, static_cast<double>(r->n));
    ymin = std::min(ymin, r->ci_low);
    ymax = std::max(ymax, r->ci_high);
  }
  if (xmax == xmin) {
    xmin -= 1;
    xmax += 1;
  }
  double ly0 = std::floor(std::log10(ymin) * 4) / 4, ly1 = std::ceil(std::log10(ymax) * 4) / 4;
  if (ly1 - ly0 < 0.5) {
    ly0 -= 0.25;
    ly1 += 0.25;
  }
  auto px = [&](double x) { return left + (x - xmin) / (xmax - xmin) * pw; };
  auto py = [&](double y) { return top + ph - (std::log10(y) - ly0) / (ly1 - ly0) * ph; };

  // Axes and ticks.
  svg += fmt::format("<rect x=\"{}\" y=\"{}\" width=\"{}\" height=\"{}\" fill=\"none\" stroke=\"#333\"/>\n", left,
                     top, pw, ph);
  std::set<std::size_t> xs;
  for (auto* r : usable) xs.insert(r->n);
  for (auto x : xs) {
    svg += fmt::format("<line x1=\"{0:.2f}\" y1=\"{1}\" x2=\"{0:.2f}\" y2=\"{2}\" stroke=\"#333\"/>\n", px(x),
                       top + ph, top + ph + 5);
    svg += fmt::format("<text x=\"{:.2f}\" y=\"{}\" text-anchor=\"middle\">{}</text>\n", px(x), top + ph + 19, x);
  }
  for (int e = static_cast<int>(std::floor(ly0)); e <= static_cast<int>(std::ceil(ly1)); ++e) {
    for (int m : {1, 2, 5}) {
      const double y = m * std::pow(10.0, e);
      const double ly = std::log10(y);
      if (ly < ly0 - 1e-12 || ly > ly1 + 1e-12) continue;
      svg += fmt::format("<line x1=\"{}\" y1=\"{:.2f}\" x2=\"{}\" y2=\"{:.2f}\" stroke=\"#ddd\"/>\n", left, py(y),
                         left + pw, py(y));
      svg += fmt::format("<text x=\"{}\" y=\"{:.2f}\" text-anchor=\"end\">{:g}</text>\n", left - 6, py(y) + 4, y);
    }
  }
  svg += fmt::format("<text x=\"{}\" y=\"{}\" text-anchor=\"middle\">n</text>\n", left + pw / 2, h - 18);
  svg += fmt::format("<text x=\"18\" y=\"{0}\" text-anchor=\"middle\" transform=\"rotate(-90 18 {0})\">{1}</text>\n",
                     top + ph / 2, escape_xml(spec.metric));

  // Group into series.
  using Key = std::tuple<int, double, std::size_t, int, int>;  // method, a, k, noise, scheme
  std::map<Key, std::vector<const exp::SummaryRow*>> series;
  std::set<double> a_values;
  for (auto* r : usable) {
    series[{static_cast<int>(r->method), r->a, r->k, static_cast<int>(r->noise), static_cast<int>(r->scheme)}]
        .push_back(r);
    a_values.insert(r->a);
  }
  std::vector<double> a_sorted(a_values.begin(), a_values.end());
  const char* dashes[] = {"", "7 4", "2 3", "9 3 2 3"};
  auto dash_for = [&](double a) {
    const auto pos = static_cast<std::size_t>(std::find(a_sorted.begin(), a_sorted.end(), a) - a_sorted.begin());
    return dashes[pos % 4];
  };

  std::size_t legend_row = 0;
  for (auto& [key, pts] : series) {
    std::sort(pts.begin(), pts.end(), [](auto* x, auto* y) { return x->n < y->n; });
    const auto method = static_cast<exp::Method>(std::get<0>(key));
    const std::string color = series_color(method, std::get<2>(key));
    const char* dash = dash_for(std::get<1>(key));

    std::string band;
    for (auto* p : pts) band += fmt::format("{:.2f},{:.2f} ", px(static_cast<double>(p->n)), py(p->ci_high));
    for (auto it = pts.rbegin(); it != pts.rend(); ++it)
      band += fmt::format("{:.2f},{:.2f} ", px(static_cast<double>((*it)->n)), py((*it)->ci_low));
    svg += fmt::format("<polygon points=\"{}\" fill=\"{}\" fill-opacity=\"0.18\" stroke=\"none\"/>\n", band, color);

    std::string line;
    for (auto* p : pts) line += fmt::format("{:.2f},{:.2f} ", px(static_cast<double>(p->n)), py(p->mean));
    svg += fmt::format("<polyline points=\"{}\" fill=\"none\" stroke=\"{}\" stroke-width=\"2\"", line, color);
    if (*dash) svg += fmt::format(" stroke-dasharray=\"{}\"", dash);
    svg += "/>\n";
    for (auto* p : pts)
      svg += fmt::format("<circle cx=\"{:.2f}\" cy=\"{:.2f}\" r=\"2.5\" fill=\"{}\"/>\n",
                         px(static_cast<double>(p->n)), py(p->mean), color);

    const double ly = top + 10 + 18.0 * static_cast<double>(legend_row++);
    const double lx = left + pw + 14;
    svg += fmt::format("<line x1=\"{}\" y1=\"{}\" x2=\"{}\" y2=\"{}\" stroke=\"{}\" stroke-width=\"2\"", lx, ly,
                       lx + 28, ly, color);
    if (*dash) svg += fmt::format(" stroke-dasharray=\"{}\"", dash);
    svg += "/>\n";
    std::string label = fmt::format("{} a={}", exp::to_string(method), format_real(std::get<1>(key)));
    if (std::get<2>(key) != 1) label += fmt::format(" k={}", std::get<2>(key));
    label += fmt::format(" {}/{}", model::to_string(static_cast<model::NoiseDist>(std::get<3>(key))),
                         model::to_string(static_cast<model::Scheme>(std::get<4>(key))));
    svg += fmt::format("<text x=\"{}\" y=\"{}\" font-size=\"10\">{}</text>\n", lx + 34, ly + 4, escape_xml(label));
  }
  svg += "</svg>\n";
  return svg;
}

// ---------------------------------------------------------------------------
// Matrix input
// ---------------------------------------------------------------------------

linalg::SymMatrix read_matrix(std::istream& is) {
  long long n = 0;
  if (!(is >> n)) throw InputError("matrix: missing dimension");
  if (n < 1 || n > 100000) throw InputError("matrix: dimension out of range");
  linalg::Matrix m(n, n);
  for (long long i = 0; i < n; ++i)
    for (long long j = 0; j < n; ++j) {
      std::string tok;
      if (!(is >> tok)) throw InputError(fmt::format("matrix: expected {} entries, ran out at ({}, {})", n * n, i, j));
      double v = 0.0;
      const auto res = std::from_chars(tok.data(), tok.data() + tok.size(), v);
      if (res.ec != std::errc{} || res.ptr != tok.data() + tok.size() || !std::isfinite(v))
        throw InputError(fmt::format("matrix: bad entry '{}' at ({}, {})", tok, i, j));
      m(i, j) = v;
    }
  std::string extra;
  if (is >> extra) throw InputError("matrix: trailing tokens after n*n entries");
  for (long long i = 0; i < n; ++i)
    for (long long j = i + 1; j < n; ++j)
      if (std::abs(m(i, j) - m(j, i)) > 1e-9)
        throw InputError(fmt::format("matrix: not symmetric at ({}, {})", i, j));
  return linalg::SymMatrix::from_dense(m, 1e-9);
}

linalg::SymMatrix read_matrix_file(const std::string& path) {
  std::ifstream is(path);
  if (!is) throw InputError("cannot open matrix file '" + path + "'");
  try {
    return read_matrix(is);
  } catch (const InputError& e) {
    throw InputError(path + ": " + e.what());
  }
}

// ---------------------------------------------------------------------------
// Config
// ---------------------------------------------------------------------------

namespace {

void check_keys(const json& obj, std::initializer_list<const char*> allowed, const std::string& where) {
  if (!obj.is_object()) throw InputError("config: '" + where + "' must be an object");
  for (auto it = obj.begin(); it != obj.end(); ++it) {
    bool ok = false;
    for (auto* a : allowed) ok = ok || it.key() == a;
    if (!ok) throw InputError("config: unknown key '" + where + "." + it.key() + "'");
  }
}

template <class T>
std::vector<T> list_of(const json& v, const char* what) {
  if (v.is_array()) return v.get<std::vector<T>>();
  if constexpr (std::is_same_v<T, std::string>) {
    if (v.is_string()) return {v.get<std::string>()};
  } else {
    if (v.is_number()) return {v.get<T>()};
  }
  throw InputError(std::string("config: '") + what + "' must be a list");
}

}  // namespace

void apply_config_json(std::string_view text, exp::ExperimentConfig& cfg) {
  json doc;
  try {
    doc = json::parse(text);
  } catch (const json::exception& e) {
    throw InputError(std::string("config: ") + e.what());
  }
  try {
    check_keys(doc, {"grid", "signal", "estimator", "run"}, "root");
    if (doc.contains("grid")) {
      const auto& g = doc["grid"];
      check_keys(g, {"n", "a", "noise", "scheme"}, "grid");
      if (g.contains("n")) cfg.n_grid = list_of<std::size_t>(g["n"], "grid.n");
      if (g.contains("a")) cfg.a_values = list_of<double>(g["a"], "grid.a");
      if (g.contains("noise")) {
        cfg.noise.clear();
        for (const auto& s : list_of<std::string>(g["noise"], "grid.noise")) cfg.noise.push_back(model::parse_noise(s));
      }
      if (g.contains("scheme")) {
        cfg.scheme.clear();
        for (const auto& s : list_of<std::string>(g["scheme"], "grid.scheme"))
          cfg.scheme.push_back(model::parse_scheme(s));
      }
    }
    if (doc.contains("signal")) {
      const auto& s = doc["signal"];
      check_keys(s, {"r", "lambda", "sigma2"}, "signal");
      if (s.contains("r")) cfg.r = s["r"].get<std::size_t>();
      if (s.contains("sigma2")) cfg.sigma2 = s["sigma2"].get<double>();
      if (s.contains("lambda")) {
        const auto& l = s["lambda"];
        if (l.is_string()) {
          cfg.lambda_rule = exp::parse_lambda_rule(l.get<std::string>());
        } else {
          cfg.lambda_rule = exp::LambdaRule::explicit_list;
          cfg.lambda_list = list_of<double>(l, "signal.lambda");
        }
      }
    }
    if (doc.contains("estimator")) {
      const auto& e = doc["estimator"];
      check_keys(e, {"alpha_mode", "beta", "eig_estimator", "sigma", "rotate", "step5_basis"}, "estimator");
      if (e.contains("alpha_mode")) cfg.alpha_mode = est::parse_alpha_mode(e["alpha_mode"].get<std::string>());
      if (e.contains("beta")) cfg.beta = e["beta"].get<double>();
      if (e.contains("eig_estimator"))
        cfg.eig_estimator = est::parse_eig_estimator(e["eig_estimator"].get<std::string>());
      if (e.contains("sigma")) cfg.sigma_mode = exp::parse_sigma_mode(e["sigma"].get<std::string>());
      if (e.contains("rotate")) cfg.rotate = e["rotate"].get<bool>();
      if (e.contains("step5_basis")) {
        const auto b = e["step5_basis"].get<std::string>();
        if (b == "original") cfg.step5_basis = est::Step5Basis::original;
        else if (b == "rotated") cfg.step5_basis = est::Step5Basis::rotated;
        else throw InputError("config: step5_basis must be 'original' or 'rotated'");
      }
    }
    if (doc.contains("run")) {
      const auto& r = doc["run"];
      check_keys(r, {"trials", "seed", "threads", "timings"}, "run");
      if (r.contains("trials")) cfg.trials = r["trials"].get<std::size_t>();
      if (r.contains("seed")) cfg.base_seed = r["seed"].get<std::uint64_t>();
      if (r.contains("threads")) cfg.threads = r["threads"].get<std::size_t>();
      if (r.contains("timings")) cfg.timings = r["timings"].get<bool>();
    }
  } catch (const json::exception& e) {
    throw InputError(std::string("config: ") + e.what());
  }
}

void apply_config_file(const std::string& path, exp::ExperimentConfig& cfg) {
  std::ifstream is(path);
  if (!is) throw InputError("cannot open config file '" + path + "'");
  std::stringstream ss;
  ss << is.rdbuf();
  try {
    apply_config_json(ss.str(), cfg);
  } catch (const InputError& e) {
    throw InputError(path + ": " + e.what());
  }
}

std::string metadata_json(const exp::ExperimentConfig& cfg, double level, std::size_t resamples) {
  json j;
  j["grid"]["n"] = cfg.n_grid;
  j["grid"]["a"] = cfg.a_values;
  for (auto d : cfg.noise) j["grid"]["noise"].push_back(std::string(model::to_string(d)));
  for (auto s : cfg.scheme) j["grid"]["scheme"].push_back(std::string(model::to_string(s)));
  j["signal"]["r"] = cfg.r;
  j["signal"]["sigma2"] = cfg.sigma2;
  if (cfg.lambda_rule == exp::LambdaRule::explicit_list) {
    j["signal"]["lambda"] = cfg.lambda_list;
  } else {
    j["signal"]["lambda"] = std::string(exp::to_string(cfg.lambda_rule));
  }
  j["estimator"]["alpha_mode"] = std::string(est::to_string(cfg.alpha_mode));
  j["estimator"]["beta"] = cfg.beta;
  j["estimator"]["eig_estimator"] = std::string(est::to_string(cfg.eig_estimator));
  j["estimator"]["sigma"] = std::string(exp::to_string(cfg.sigma_mode));
  j["estimator"]["rotate"] = cfg.rotate;
  j["estimator"]["step5_basis"] = cfg.step5_basis == est::Step5Basis::original ? "original" : "rotated";
  j["run"]["trials"] = cfg.trials;
  j["run"]["seed"] = cfg.base_seed;
  j["bootstrap"]["method"] = "percentile";
  j["bootstrap"]["level"] = level;
  j["bootstrap"]["resamples"] = resamples;
  j["bootstrap"]["quantile"] = "linear interpolation";
  return j.dump(2) + "\n";
}

void write_file(const std::string& path, std::string_view content) {
  std::ofstream os(path, std::ios::binary);
  if (!os) throw InputError("cannot open '" + path + "' for writing");
  os.write(content.data(), static_cast<std::streamsize>(content.size()));
  if (!os) throw InputError("write failed for '" + path + "'");
}

}  // namespace spiked::report
