#include "cli.hpp"

#include <CLI11.hpp>

#include <algorithm>
#include <iostream>
#include <set>

#include "axislab/axislab.hpp"

namespace axislab::cli {
namespace {

struct Options {
  std::vector<std::string> emb;
  std::vector<std::string> axis;
  std::string manifest, head, pos, neg, cell, spec, pareto, out;
  std::string eps_grid, seeds, orthogonal_to, controls = "char_length,nll_gpt2";
  std::string covariate, name, pool, norms;
  std::string x, m, y;
  double target_tpr = 0.90;
  double tau = 0.0;
  double reg = kDefaultProbeReg;
  double alpha = 0.05;
  double threshold = kDeploymentThreshold;
  std::size_t k = 0;
  std::size_t shots = 0;
};

const char* kDefaultSweepGrid = "-1.0,-0.7,-0.5,-0.3,-0.1,0.1,0.3,0.5,0.7,1.0";
const char* kDefaultPredictGrid = "0.05,0.1,0.2,0.35,0.5,0.7,1.0";

std::vector<std::string> split(const std::string& s, char sep) {
  std::vector<std::string> out;
  std::string cur;
  for (char c : s) {
    if (c == sep) {
      out.push_back(cur);
      cur.clear();
    } else if (c != ' ') {
      cur += c;
    }
  }
  if (!cur.empty() || !out.empty()) out.push_back(cur);
  return out;
}

double parse_double(const std::string& s, const std::string& what) {
  try {
    std::size_t used = 0;
    const double v = std::stod(s, &used);
    if (used == s.size() && std::isfinite(v)) return v;
  } catch (...) {
  }
  throw ValidationError(what + ": '" + s + "' is not a finite number");
}

// "a,b,c" or "start:stop:step" (inclusive).
std::vector<double> parse_grid(const std::string& s, const std::string& what) {
  detail::require(!s.empty(), what + ": empty grid");
  std::vector<double> out;
  if (s.find(':') != std::string::npos) {
    const auto parts = split(s, ':');
    detail::require(parts.size() == 3, what + ": range must be start:stop:step");
    const double a = parse_double(parts[0], what), b = parse_double(parts[1], what), step = parse_double(parts[2], what);
    detail::require(step > 0.0 && b >= a, what + ": range needs step > 0 and stop >= start");
    const auto n = static_cast<long>(std::floor((b - a) / step + 1e-9));
    detail::require(n < 100000, what + ": range too long");
    for (long i = 0; i <= n; ++i) out.push_back(a + static_cast<double>(i) * step);
    return out;
  }
  for (const auto& p : split(s, ',')) out.push_back(parse_double(p, what));
  return out;
}

std::vector<std::uint64_t> parse_seeds(const std::string& s) {
  if (s.empty()) return {0};
  std::vector<std::uint64_t> out;
  for (const auto& p : split(s, ',')) {
    const double v = parse_double(p, "--seeds");
    detail::require(v >= 0.0 && v == std::floor(v), "--seeds: '" + p + "' is not a nonnegative integer");
    out.push_back(static_cast<std::uint64_t>(v));
  }
  return out;
}

json mean_std(const std::vector<double>& v) {
  const Vector e = stats::to_eigen(v);
  const double mu = stats::mean(e);
  CompensatedSum s;
  for (double x : v) s.add((x - mu) * (x - mu));
  return json{{"mean", mu}, {"std", std::sqrt(s.value() / static_cast<double>(v.size()))}, {"n_seeds", v.size()}, {"values", v}};
}

json options_json(const std::string& cmd, const Options& o) {
  json j{{"subcommand", cmd}, {"target_tpr", o.target_tpr}, {"reg", o.reg}, {"alpha", o.alpha}, {"threshold", o.threshold},
         {"tau", o.tau},      {"k", o.k},                   {"shots", o.shots}, {"controls", o.controls}};
  auto put = [&](const char* key, const std::string& v) {
    if (!v.empty()) j[key] = v;
  };
  put("manifest", o.manifest);
  put("head", o.head);
  put("pos", o.pos);
  put("neg", o.neg);
  put("cell", o.cell);
  put("spec", o.spec);
  put("pareto", o.pareto);
  put("eps_grid", o.eps_grid);
  put("seeds", o.seeds);
  put("orthogonal_to", o.orthogonal_to);
  put("covariate", o.covariate);
  put("name", o.name);
  put("pool", o.pool);
  put("norms", o.norms);
  put("x", o.x);
  put("m", o.m);
  put("y", o.y);
  if (!o.emb.empty()) j["emb"] = o.emb;
  if (!o.axis.empty()) j["axis"] = o.axis;
  return j;
}

Report make_report(const std::string& cmd, const Options& o) {
  Report r;
  r.kind = cmd;
  r.config = options_json(cmd, o);
  return r;
}

void finish(const Report& r, const Options& o, std::ostream& out) {
  if (o.out.empty()) {
    out << canonical_json(report_json(r));
    return;
  }
  for (const auto& p : emit_report(r, o.out)) out << "wrote " << p.string() << "\n";
}

const std::string& single(const std::vector<std::string>& v, const char* flag) {
  detail::require(v.size() == 1, std::string(flag) + " must be given exactly once");
  return v.front();
}

std::string need(const std::string& v, const char* flag) {
  detail::require(!v.empty(), std::string("missing required flag ") + flag);
  return v;
}

// Cell from --spec (generated in memory) or --cell (files on disk), with the
// axes it carries.
struct CellInput {
  Cell cell;
  std::vector<Direction> axes;
};

CellInput load_cell_input(const Options& o) {
  detail::require(o.spec.empty() != o.cell.empty(), "give exactly one of --cell or --spec");
  if (!o.spec.empty()) {
    const auto spec = synth_spec_from_json(read_json_file(o.spec), o.spec);
    auto sc = generate(spec);
    CellInput ci{std::move(sc.cell), {}};
    for (const auto& a : spec.axes) ci.axes.push_back(sc.planted.at(a));
    return ci;
  }
  auto cf = load_cell(o.cell);
  return {std::move(cf.cell), std::move(cf.axes)};
}

Direction resolve_axis(const std::string& ref, const std::vector<Direction>& known) {
  if (fs::exists(ref)) return load_direction(ref);
  for (const auto& d : known)
    if (d.axis_id == ref) return d;
  throw ValidationError("unknown axis '" + ref + "': not a file and not an axis of the cell");
}

std::vector<Direction> axis_bank(const Options& o, const std::vector<Direction>& known) {
  if (o.axis.empty()) {
    detail::require(!known.empty(), "no axes: pass --axis");
    return known;
  }
  std::vector<Direction> out;
  for (const auto& a : o.axis) out.push_back(resolve_axis(a, known));
  return out;
}

Vector select_rows(const Vector& v, const std::vector<Eigen::Index>& rows) {
  Vector out(static_cast<Eigen::Index>(rows.size()));
  for (std::size_t i = 0; i < rows.size(); ++i) out(static_cast<Eigen::Index>(i)) = v(rows[i]);
  return out;
}

void require_aligned(const EmbeddingMatrix& e, const Manifest& m) {
  detail::require(static_cast<std::size_t>(e.n()) == m.size(), "embedding rows (" + std::to_string(e.n()) +
                                                                    ") do not match manifest records (" + std::to_string(m.size()) + ")");
}

// ---------------------------------------------------------------------------

void cmd_axis(const Options& o, std::ostream& out) {
  Report r = make_report("axis", o);
  Direction d;
  if (!o.covariate.empty()) {
    const auto emb = load_embeddings(single(o.emb, "--emb"));
    const auto man = load_manifest(need(o.manifest, "--manifest"));
    require_aligned(emb, man);
    d = pls1_direction(emb, man.covariates().column(o.covariate), o.name.empty() ? "caps_PLS" : o.name);
  } else {
    const auto pos = load_embeddings(need(o.pos, "--pos"));
    const auto neg = load_embeddings(need(o.neg, "--neg"));
    d = compute_direction(pos, neg, o.name.empty() ? "class" : o.name, "mean(" + o.pos + ") - mean(" + o.neg + ")");
  }
  r.results["axis"] = to_json(d);
  finish(r, o, out);
  if (!o.out.empty()) {
    const auto path = fs::path(o.out) / ("axis_" + d.axis_id + ".json");
    save_direction(d, path);
    out << "wrote " << path.string() << "\n";
  }
}

void cmd_project(const Options& o, std::ostream& out) {
  Report r = make_report("project", o);
  const auto emb = load_embeddings(single(o.emb, "--emb"));
  const auto d = load_direction(single(o.axis, "--axis"));
  const Vector p = project(emb, d);
  r.results = json{{"axis_id", d.axis_id}, {"n", emb.n()}, {"mean", stats::mean(p)}, {"projections", to_json(p)}};
  if (emb.n() >= 2) r.results["sd"] = stats::stddev(p);
  if (!o.manifest.empty()) {
    const auto man = load_manifest(o.manifest);
    require_aligned(emb, man);
    json ids = json::array();
    for (const auto& rec : man.records) ids.push_back(rec.text_id);
    r.results["text_ids"] = ids;
  }
  finish(r, o, out);
}

MetricBlock block_at(const Vector& pos, const Vector& neg, double tau, const std::string& pos_name, const std::string& neg_name) {
  MetricBlock b;
  b.auroc = auroc(pos, neg);
  b.tau = tau;
  b.tpr_at_tau = rate_at(pos, tau);
  b.fpr_at_tau = rate_at(neg, tau);
  b.pools[pos_name] = {PoolRole::positive, b.tpr_at_tau, static_cast<std::size_t>(pos.size())};
  b.pools[neg_name] = {PoolRole::negative, b.fpr_at_tau, static_cast<std::size_t>(neg.size())};
  return b;
}

void cmd_metrics(const Options& o, std::ostream& out) {
  Report r = make_report("metrics", o);
  const auto pos = load_embeddings(need(o.pos, "--pos"));
  const auto neg = load_embeddings(need(o.neg, "--neg"));
  detail::require(o.target_tpr > 0.0 && o.target_tpr <= 1.0, "--target-tpr must lie in (0, 1]");
  Vector sp, sn;
  if (!o.head.empty()) {
    const auto head = load_head(o.head);
    detail::require(head.evaluable(), "metrics: --head must be linear or mlp");
    sp = score_rows(head, pos.data);
    sn = score_rows(head, neg.data);
    r.results["scores"] = "head logits";
    r.add_block("default_tau", block_at(sp, sn, o.tau, "pos", "neg"));
  } else {
    Direction d;
    if (!o.axis.empty()) {
      d = load_direction(single(o.axis, "--axis"));
    } else {
      d = compute_direction(pos, neg, "class", "in-sample centroid difference");
      r.results["axis_note"] = "axis estimated from the same pos/neg sets (in-sample)";
    }
    sp = project(pos, d);
    sn = project(neg, d);
    r.results["scores"] = "projection on " + d.axis_id;
  }
  const double tau = matched_tpr_threshold(sp, o.target_tpr);
  const auto headline = block_at(sp, sn, tau, "pos", "neg");
  r.add_block("matched_tpr", headline);
  r.results["auroc"] = headline.auroc;
  r.results["matched_tau"] = tau;
  r.results["fpr_at_matched_tpr"] = headline.fpr_at_tau;
  r.results["tpr_at_fpr_1pct"] = tpr_at_fpr(sp, sn, 0.01);
  r.results["tpr_at_fpr_5pct"] = tpr_at_fpr(sp, sn, 0.05);
  if (sp.size() >= 2 && sn.size() >= 2) r.results["cohens_d"] = cohens_d(sp, sn);
  r.rocs.push_back({"metrics", {{"pos vs neg", sp, sn}}, {0.01, 0.05}});
  finish(r, o, out);
}

Vector named_vector(const std::string& name, const Manifest& man, const Options& o) {
  if (name == "label") {
    Vector v(static_cast<Eigen::Index>(man.size()));
    const auto l = man.labels();
    for (std::size_t i = 0; i < l.size(); ++i) v(static_cast<Eigen::Index>(i)) = l[i];
    return v;
  }
  if (name == "projection") {
    const auto emb = load_embeddings(single(o.emb, "--emb"));
    require_aligned(emb, man);
    return project(emb, load_direction(single(o.axis, "--axis")));
  }
  return man.covariates().column(name);
}

void cmd_residualize(const Options& o, std::ostream& out) {
  Report r = make_report("residualize", o);
  const auto emb = load_embeddings(single(o.emb, "--emb"));
  const auto man = load_manifest(need(o.manifest, "--manifest"));
  require_aligned(emb, man);
  const auto d = load_direction(single(o.axis, "--axis"));
  const auto names = split(o.controls, ',');
  detail::require(!names.empty() && !names.front().empty(), "--controls: need at least one covariate");
  const Matrix controls = man.covariates().columns(names);
  const Vector proj = project(emb, d);
  const Vector resid = ols_residualize(proj, controls, names);
  const auto ai = man.rows_where("", TextRole::AI);
  const auto human = man.rows_where("", TextRole::human);
  r.results["axis_id"] = d.axis_id;
  r.results["controls"] = names;
  r.results["r2_controls"] = ols_fit(proj, controls, names).r2;
  if (!ai.empty() && !human.empty()) {
    r.results["auroc_raw"] = auroc(select_rows(proj, ai), select_rows(proj, human));
    r.results["auroc_residual"] = auroc(select_rows(resid, ai), select_rows(resid, human));
    const Vector label = named_vector("label", man, o);
    r.results["partial_r_label"] = partial_correlation(proj, label, controls, names);
  }
  if (!o.covariate.empty()) {
    const Vector target = man.covariates().column(o.covariate);
    r.results["partial_r_" + o.covariate] = partial_correlation(proj, target, controls, names);
    r.results["joint_partial_r2_" + o.covariate] = joint_partial_r2(target, proj, controls);
  }
  finish(r, o, out);
}

void cmd_probe(const Options& o, std::ostream& out) {
  Report r = make_report("probe", o);
  const auto emb = load_embeddings(single(o.emb, "--emb"));
  const auto man = load_manifest(need(o.manifest, "--manifest"));
  require_aligned(emb, man);
  const auto labels = man.labels();
  const auto tags = man.strata_tags();
  std::vector<std::string> strata = tags;
  std::sort(strata.begin(), strata.end());
  strata.erase(std::unique(strata.begin(), strata.end()), strata.end());
  std::vector<Direction> refs;
  for (const auto& a : o.axis) refs.push_back(load_direction(a));

  std::vector<double> accs;
  std::map<std::string, std::vector<double>> cosines;
  json per_seed = json::array();
  for (auto seed : parse_seeds(o.seeds)) {
    ProbeFit fit;
    if (o.shots == 0) {
      fit.model = fit_logistic(emb.data, labels, o.reg);
      for (Eigen::Index i = 0; i < emb.n(); ++i) fit.train_rows.push_back(i);
    } else {
      fit = fit_logistic_probe(emb, labels, tags, strata, o.shots, o.reg, seed);
    }
    std::vector<Eigen::Index> held;
    for (Eigen::Index i = 0, t = 0; i < emb.n(); ++i) {
      if (t < static_cast<Eigen::Index>(fit.train_rows.size()) && fit.train_rows[static_cast<std::size_t>(t)] == i)
        ++t;
      else
        held.push_back(i);
    }
    const auto& eval_rows = held.empty() ? fit.train_rows : held;
    const double acc = fit.model.accuracy(detail::take_rows(emb.data, eval_rows), detail::take(labels, eval_rows));
    accs.push_back(acc);
    json s{{"seed", seed}, {"accuracy", acc}, {"accuracy_on", held.empty() ? "train" : "held-out"},
           {"n_train", fit.train_rows.size()}, {"iterations", fit.model.iterations}, {"converged", fit.model.converged}};
    const auto dir = fit.model.direction("probe");
    for (const auto& ref : refs) {
      const double c = cosine(dir, ref);
      cosines[ref.axis_id].push_back(c);
      s["cosine_" + ref.axis_id] = c;
    }
    per_seed.push_back(s);
  }
  r.results["per_seed"] = per_seed;
  r.results["accuracy"] = mean_std(accs);
  for (const auto& [id, v] : cosines) r.results["cosine_" + id] = mean_std(v);
  finish(r, o, out);
}

void cmd_inlp(const Options& o, std::ostream& out) {
  Report r = make_report("inlp", o);
  const auto emb = load_embeddings(single(o.emb, "--emb"));
  const auto man = load_manifest(need(o.manifest, "--manifest"));
  require_aligned(emb, man);
  const std::size_t k = o.k == 0 ? 10 : o.k;
  std::vector<double> residual;
  json per_seed = json::array();
  for (auto seed : parse_seeds(o.seeds)) {
    const auto res = inlp(emb, man.labels(), k, o.reg, seed);
    const double idem = (res.projector * res.projector - res.projector).cwiseAbs().maxCoeff();
    residual.push_back(res.residual_accuracy);
    per_seed.push_back(json{{"seed", seed}, {"accuracies", res.accuracies}, {"residual_accuracy", res.residual_accuracy},
                            {"idempotence_error", idem}, {"removed", res.removed.cols()}});
  }
  r.results["k"] = k;
  r.results["per_seed"] = per_seed;
  r.results["residual_accuracy"] = mean_std(residual);
  finish(r, o, out);
}

void cmd_predict(const Options& o, std::ostream& out) {
  Report r = make_report("predict", o);
  EmbeddingMatrix emb;
  HeadModel head;
  Direction d;
  if (!o.spec.empty() || !o.cell.empty()) {
    const auto ci = load_cell_input(o);
    const auto& pool = ci.cell.pool(o.pool.empty() ? ci.cell.bias_pool : o.pool);
    emb = pool.emb;
    head = ci.cell.head_for(pool);
    d = axis_bank(o, ci.axes).front();
    r.results["pool"] = pool.name;
  } else {
    emb = load_embeddings(single(o.emb, "--emb"));
    head = load_head(need(o.head, "--head"));
    d = load_direction(single(o.axis, "--axis"));
  }
  const auto grid = parse_grid(o.eps_grid.empty() ? kDefaultPredictGrid : o.eps_grid, "--eps-grid");
  json rows = json::array();
  ScatterPlot scatter{"predict", "predicted delta logit", "measured delta logit", {}, {}};
  for (double eps : grid) {
    const auto rec = predict_pool(emb, d, head, eps);
    json row{{"epsilon", eps}, {"predicted", to_json(rec.predicted)}, {"mean_predicted", stats::mean(rec.predicted)}};
    if (rec.measured) {
      row["measured"] = to_json(*rec.measured);
      for (Eigen::Index i = 0; i < rec.predicted.size(); ++i) {
        scatter.x.push_back(rec.predicted(i));
        scatter.y.push_back((*rec.measured)(i));
      }
    }
    row["r2"] = rec.r2 ? json(*rec.r2) : json(nullptr);
    rows.push_back(row);
  }
  r.results["axis_id"] = d.axis_id;
  r.results["rows"] = rows;
  if (head.evaluable()) {
    std::vector<double> nonzero;
    for (double e : grid)
      if (e != 0.0) nonzero.push_back(e);
    if (!nonzero.empty()) {
      json taylor = json::array();
      for (const auto& t : taylor_table(emb, d, head, nonzero))
        taylor.push_back(json{{"epsilon", t.epsilon}, {"median_relative_error", t.median_relative_error},
                              {"median_absolute_error", t.median_absolute_error}, {"within_band", t.within_band}});
      r.results["taylor"] = taylor;
    }
    r.scatters.push_back(std::move(scatter));
  }
  finish(r, o, out);
}

json summarize_sweep(const ParetoCell& pc) {
  json j{{"verdict", to_string(pc.verdict)}, {"reasons", pc.reasons}, {"measured", pc.measured}};
  if (pc.measured) {
    const auto cmp = compare_selectors(pc);
    j["selection"] = to_json(cmp);
  } else {
    j["selection"] = json{{"predictor", to_json(select(pc, SelectMode::predictor))}};
  }
  const auto mode = pc.measured ? SelectMode::oracle : SelectMode::predictor;
  const auto red = reduction_summary(pc, mode);
  j["relative_fpr_reduction_selected"] = red.selected ? json(*red.selected) : json(nullptr);
  j["relative_fpr_reduction_mean_best_per_axis"] = red.mean_best_per_axis ? json(*red.mean_best_per_axis) : json(nullptr);
  return j;
}

ParetoCell run_sweep(const Options& o, const CellInput& ci) {
  return sweep(ci.cell, axis_bank(o, ci.axes), parse_grid(o.eps_grid.empty() ? kDefaultSweepGrid : o.eps_grid, "--eps-grid"));
}

void cmd_sweep(const Options& o, std::ostream& out) {
  Report r = make_report("sweep", o);
  const auto ci = load_cell_input(o);
  const auto pc = run_sweep(o, ci);
  r.results = summarize_sweep(pc);
  r.results["pareto_cell"] = to_json(pc);
  r.add_block("baseline", pc.baseline);
  const auto sel = select(pc, pc.measured ? SelectMode::oracle : SelectMode::predictor);
  if (sel.chosen) {
    const auto& c = pc.candidates[sel.chosen->candidate_index];
    r.add_block("selected", c.measured ? *c.measured : c.predicted);
  }
  finish(r, o, out);
}

void cmd_select(const Options& o, std::ostream& out) {
  Report r = make_report("select", o);
  const ParetoCell pc = !o.pareto.empty() ? pareto_cell_from_json(read_json_file(o.pareto)) : run_sweep(o, load_cell_input(o));
  r.results = summarize_sweep(pc);
  finish(r, o, out);
}

void cmd_align(const Options& o, std::ostream& out) {
  Report r = make_report("align", o);
  std::vector<Direction> axes;
  if (!o.spec.empty() || !o.cell.empty())
    axes = axis_bank(o, load_cell_input(o).axes);
  else
    for (const auto& a : o.axis) axes.push_back(load_direction(a));
  detail::require(!axes.empty(), "align: pass --axis files (or --cell/--spec)");
  json ids = json::array(), matrix = json::array();
  for (const auto& a : axes) ids.push_back(a.axis_id);
  for (const auto& a : axes) {
    json row = json::array();
    for (const auto& b : axes) row.push_back(cosine(a, b));
    matrix.push_back(row);
  }
  r.results = json{{"axes", ids}, {"cosine", matrix}};
  finish(r, o, out);
}

void cmd_mediate(const Options& o, std::ostream& out) {
  Report r = make_report("mediate", o);
  const auto man = load_manifest(need(o.manifest, "--manifest"));
  const Vector x = named_vector(need(o.x, "--x"), man, o);
  const Vector m = named_vector(need(o.m, "--m"), man, o);
  const Vector y = named_vector(need(o.y, "--y"), man, o);
  const auto v = baron_kenny(x, m, y, o.alpha);
  auto path = [](const PathEstimate& p) { return json{{"coef", p.coef}, {"p_value", p.p_value}}; };
  r.results = json{{"path_xy", path(v.path_xy)},
                   {"path_xm", path(v.path_xm)},
                   {"path_my_given_x", path(v.path_my_given_x)},
                   {"direct_x", path(v.direct_x)},
                   {"x_attenuation", v.x_attenuation},
                   {"verdict", to_string(v.verdict)}};
  finish(r, o, out);
}

void cmd_deploy(const Options& o, std::ostream& out) {
  Report r = make_report("deploy-rule", o);
  std::vector<std::pair<std::string, double>> norms;
  if (!o.norms.empty()) {
    for (const auto& item : split(o.norms, ',')) {
      const auto eq = item.find('=');
      detail::require(eq != std::string::npos && eq > 0, "--norms: expected label=value, got '" + item + "'");
      norms.emplace_back(item.substr(0, eq), parse_double(item.substr(eq + 1), "--norms"));
    }
  }
  for (const auto& a : o.axis) {
    const auto d = load_direction(a);
    norms.emplace_back(d.axis_id, d.raw_norm);
  }
  detail::require(!norms.empty(), "deploy-rule: pass --norms or --axis");
  const auto panel = deployment_panel(norms, o.threshold);
  json rows = json::array();
  for (const auto& c : panel.calls)
    rows.push_back(json{{"label", c.label}, {"raw_norm", c.raw_norm}, {"margin", c.margin}, {"prediction", to_string(c.outcome)}});
  r.results = json{{"threshold", o.threshold}, {"rows", rows}, {"n_success", panel.n_success}, {"n_failure", panel.n_failure},
                   {"separation_gap", panel.separation_gap ? json(*panel.separation_gap) : json(nullptr)}};
  finish(r, o, out);
}

void cmd_report(const Options& o, std::ostream& out) {
  Report r = make_report("report", o);
  const auto ci = load_cell_input(o);
  const auto pc = run_sweep(o, ci);
  r.results = summarize_sweep(pc);
  r.add_block("baseline", pc.baseline);
  const PoolScores base = baseline_scores(ci.cell);
  const auto& pos = ci.cell.pool(ci.cell.positive_pool);
  const auto& bias = ci.cell.pool(ci.cell.bias_pool);
  RocPlot roc{"cell", {{"baseline", base.at(pos.name), base.at(bias.name)}}, {0.01, 0.05}};

  const auto mode = pc.measured ? SelectMode::oracle : SelectMode::predictor;
  const auto sel = select(pc, mode);
  std::optional<Direction> chosen_axis;
  if (sel.chosen) {
    const auto& c = pc.candidates[sel.chosen->candidate_index];
    r.add_block("selected", c.measured ? *c.measured : c.predicted);
    const auto bank = axis_bank(o, ci.axes);
    chosen_axis = bank[c.axis_index];
    const PoolScores after = pc.measured ? ablated_scores(ci.cell, *chosen_axis, c.epsilon)
                                         : predicted_scores(ci.cell, *chosen_axis, c.epsilon, base);
    roc.curves.push_back({"ablate " + c.axis_id + " eps=" + detail::fmt(c.epsilon), after.at(pos.name), after.at(bias.name)});
    const auto& hm = ci.cell.head_for(bias);
    if (hm.evaluable()) {
      const auto rec = predict_pool(bias.emb, *chosen_axis, hm, c.epsilon);
      r.scatters.push_back({"selected", "predicted delta logit", "measured delta logit",
                            stats::to_std(rec.predicted), stats::to_std(*rec.measured)});
      if (rec.r2) r.results["selected_r2"] = *rec.r2;
    }
  }
  r.rocs.push_back(std::move(roc));

  // Random-axis null at the selected eps (or the largest grid eps).
  const double null_eps = sel.chosen ? sel.chosen->epsilon : pc.eps_grid.back();
  const std::size_t k = o.k == 0 ? 20 : o.k;
  std::optional<Direction> ortho;
  if (!o.orthogonal_to.empty()) ortho = resolve_axis(o.orthogonal_to, ci.axes);
  std::vector<double> maxes;
  json per_seed = json::array();
  for (auto seed : parse_seeds(o.seeds)) {
    const auto ns = random_axis_null(ci.cell, null_eps, k, seed, ortho ? &*ortho : nullptr);
    maxes.push_back(ns.max_abs_delta_fpr);
    per_seed.push_back(json{{"seed", seed}, {"max_abs_delta_fpr", ns.max_abs_delta_fpr}, {"median_abs_delta_fpr", ns.median_abs_delta_fpr},
                            {"q90_abs_delta_logit", ns.q90_abs_delta_logit}});
  }
  r.results["random_null"] = json{{"k", k}, {"epsilon", null_eps}, {"per_seed", per_seed}, {"max_abs_delta_fpr", mean_std(maxes)}};
  if (sel.chosen) r.results["random_null"]["selected_abs_delta_fpr"] = sel.chosen->fpr_reduction;
  finish(r, o, out);
}

void cmd_synth(const Options& o, std::ostream& out) {
  const auto spec = synth_spec_from_json(read_json_file(need(o.spec, "--spec")), o.spec);
  const fs::path dir = need(o.out, "--out");
  Report r = make_report("synth", o);
  json bundles = json::array();
  const auto seeds = o.seeds.empty() ? std::vector<std::uint64_t>{spec.seed} : parse_seeds(o.seeds);
  for (auto seed : seeds) {
    auto s = spec;
    s.seed = seed;
    const fs::path target = o.seeds.empty() ? dir : dir / ("seed_" + std::to_string(seed));
    const auto sc = generate(s);
    json files = json::array();
    for (const auto& p : write_synthetic_bundle(sc, target)) {
      files.push_back(fs::relative(p, dir).generic_string());
      out << "wrote " << p.string() << "\n";
    }
    json pools = json::object();
    for (const auto& p : sc.cell.pools) pools[p.name] = json{{"n", p.emb.n()}, {"role", to_string(p.role)}};
    bundles.push_back(json{{"seed", seed}, {"files", files}, {"pools", pools}});
  }
  r.results["bundles"] = bundles;
  for (const auto& p : emit_report(r, dir)) out << "wrote " << p.string() << "\n";
}

}  // namespace

int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  CLI::App app{"axislab: axis geometry, ablation and fairness metrics for embedding-based detectors"};
  app.name("axislab");
  app.require_subcommand(1);
  app.failure_message(CLI::FailureMessage::help);
  Options o;

  auto common = [&](CLI::App* s) {
    s->add_option("--emb", o.emb, "EMB1 embedding file");
    s->add_option("--manifest", o.manifest, "manifest JSON lines");
    s->add_option("--head", o.head, "head JSON file");
    s->add_option("--axis", o.axis, "axis file or axis id (repeatable)");
    s->add_option("--eps-grid,--eps", o.eps_grid, "eps values: a,b,c or start:stop:step");
    s->add_option("--target-tpr", o.target_tpr, "matched TPR target (default 0.90)");
    s->add_option("--seeds", o.seeds, "comma-separated seeds");
    s->add_option("--out", o.out, "output directory");
    s->add_option("--k", o.k, "INLP iterations or random-null count");
    s->add_option("--orthogonal-to", o.orthogonal_to, "axis the random null is orthogonalized against");
    s->add_option("--pos", o.pos, "positive EMB1 file");
    s->add_option("--neg", o.neg, "negative EMB1 file");
    s->add_option("--cell", o.cell, "cell description JSON");
    s->add_option("--spec", o.spec, "synthetic spec JSON");
  };
  struct Sub {
    const char* name;
    const char* help;
    void (*fn)(const Options&, std::ostream&);
  };
  const Sub subs[] = {
      {"axis", "difference-of-means or PLS1 axis", cmd_axis},
      {"project", "project embeddings on an axis", cmd_project},
      {"metrics", "AUROC and matched-TPR metrics", cmd_metrics},
      {"residualize", "residualize projections on covariates", cmd_residualize},
      {"probe", "logistic probe, optionally few-shot", cmd_probe},
      {"inlp", "iterative nullspace projection", cmd_inlp},
      {"predict", "first-order ablation predictor", cmd_predict},
      {"sweep", "strict-Pareto ablation sweep", cmd_sweep},
      {"select", "oracle vs predictor selection", cmd_select},
      {"align", "cosine matrix of axes", cmd_align},
      {"mediate", "Baron-Kenny mediation", cmd_mediate},
      {"deploy-rule", "direction-norm deployment rule", cmd_deploy},
      {"report", "full cell report with plots", cmd_report},
      {"synth", "write a synthetic cell", cmd_synth},
  };
  std::map<std::string, CLI::App*> handles;
  for (const auto& s : subs) {
    auto* sub = app.add_subcommand(s.name, s.help);
    common(sub);
    handles[s.name] = sub;
  }
  handles["axis"]->add_option("--name", o.name, "axis id");
  handles["axis"]->add_option("--covariate", o.covariate, "covariate for a PLS1 axis");
  handles["metrics"]->add_option("--tau", o.tau, "default threshold for head scores");
  handles["residualize"]->add_option("--controls", o.controls, "comma-separated control covariates");
  handles["residualize"]->add_option("--covariate", o.covariate, "target covariate");
  for (const char* n : {"probe", "inlp"}) handles[n]->add_option("--reg", o.reg, "L2 regularization");
  handles["probe"]->add_option("--shots", o.shots, "few-shot size (0 = all rows)");
  handles["predict"]->add_option("--pool", o.pool, "pool of the cell (default bias pool)");
  handles["select"]->add_option("--pareto", o.pareto, "sweep result (pareto_cell JSON)");
  handles["mediate"]->add_option("--x", o.x, "treatment: covariate, label or projection");
  handles["mediate"]->add_option("--m", o.m, "mediator: covariate, label or projection");
  handles["mediate"]->add_option("--y", o.y, "outcome: covariate, label or projection");
  handles["mediate"]->add_option("--alpha", o.alpha, "significance level");
  handles["deploy-rule"]->add_option("--norms", o.norms, "label=raw_norm,...");
  handles["deploy-rule"]->add_option("--threshold", o.threshold, "raw-norm threshold (default 5)");

  std::vector<std::string> reversed(args.rbegin(), args.rend());
  try {
    app.parse(reversed);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e, out, err);
    return code == 0 ? 0 : 2;
  }
  try {
    for (const auto& s : subs)
      if (handles[s.name]->parsed()) s.fn(o, out);
    return 0;
  } catch (const ValidationError& e) {
    err << json{{"error", "validation"}, {"message", e.what()}}.dump() << "\n";
    return 2;
  } catch (const ComputationError& e) {
    err << json{{"error", "computation"}, {"message", e.what()}}.dump() << "\n";
    return 1;
  } catch (const json::exception& e) {
    err << json{{"error", "validation"}, {"message", std::string("malformed JSON input: ") + e.what()}}.dump() << "\n";
    return 2;
  } catch (const std::exception& e) {
    err << json{{"error", "computation"}, {"message", e.what()}}.dump() << "\n";
    return 1;
  }
}

}  // namespace axislab::cli
