//! Experiment drivers: branch-and-bound comparison, reweighted-l1
//! comparison, and the Lipschitz-constant sweep.
//!
//! Every emitted row carries the seed and configuration needed to re-run
//! it; per-run failures are recorded as rows with an `error` column and
//! the table is still written.

use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::time::Instant;

use serde::{Deserialize, Serialize};
use serde_json::{json, Map, Value};

use sasel_core::bench_gen::generate_network;
use sasel_core::bnb::{se_bnb, standard_bnb, SolveReport};
use sasel_core::builders::misdp::{build_ssp, Bounds, Logistic, Misdp};
use sasel_core::l1::{reweighted_l1, L1Options};
use sasel_core::model::NdsModel;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Kind {
    BnbCompare,
    L1Compare,
    LipschitzSweep,
}

fn default_n_list() -> Vec<usize> {
    vec![2, 3]
}
fn default_eta_list() -> Vec<f64> {
    vec![1.0]
}
fn default_seeds() -> Vec<u64> {
    vec![1, 2, 3]
}
fn default_eps_f() -> f64 {
    1e-4
}
fn default_max_branch() -> Vec<Option<usize>> {
    vec![None]
}
fn default_big_m() -> f64 {
    1e3
}
fn default_min_active_frac() -> f64 {
    0.2
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ExperimentSpec {
    pub kind: Kind,
    #[serde(default = "default_n_list")]
    pub n_list: Vec<usize>,
    #[serde(default = "default_eta_list")]
    pub eta_list: Vec<f64>,
    #[serde(default = "default_seeds")]
    pub seeds: Vec<u64>,
    #[serde(default = "default_eps_f")]
    pub eps_f: f64,
    #[serde(default = "default_max_branch")]
    pub max_branch_list: Vec<Option<usize>>,
    #[serde(default = "default_big_m")]
    pub big_m: f64,
    /// Fraction of measurements forced active in the comparison study.
    #[serde(default = "default_min_active_frac")]
    pub min_active_frac: f64,
}

impl ExperimentSpec {
    fn validate(&self) -> Result<(), String> {
        if self.n_list.is_empty()
            || self.eta_list.is_empty()
            || self.seeds.is_empty()
            || self.max_branch_list.is_empty()
        {
            return Err("every spec list needs at least one entry".into());
        }
        Ok(())
    }
}

fn ssp_for(m: &NdsModel, logistic: &Logistic, big_m: f64) -> Result<Misdp, String> {
    build_ssp(m, &vec![1.0; m.ny()], logistic, &Bounds::BigM(big_m)).map_err(|e| e.to_string())
}

fn report_fields(row: &mut Map<String, Value>, rep: &SolveReport) {
    row.insert("status".into(), json!(rep.status));
    row.insert("cost".into(), json!(rep.ub));
    row.insert("nodes".into(), json!(rep.nodes_explored));
    row.insert("sdp_solves".into(), json!(rep.sdp_solves));
    row.insert("secs".into(), json!(rep.total_secs));
}

fn base_row(spec: &ExperimentSpec, n: usize, eta: f64, seed: u64) -> Map<String, Value> {
    let mut row = Map::new();
    row.insert("kind".into(), json!(spec.kind));
    row.insert("n".into(), json!(n));
    row.insert("eta".into(), json!(eta));
    row.insert("seed".into(), json!(seed));
    row.insert("eps_f".into(), json!(spec.eps_f));
    row.insert("big_m".into(), json!(spec.big_m));
    row
}

fn run_bnb_compare(spec: &ExperimentSpec) -> Vec<Value> {
    let eta = spec.eta_list[0];
    let mut rows = Vec::new();
    for &n in &spec.n_list {
        for &mb in &spec.max_branch_list {
            for &seed in &spec.seeds {
                for (solver, exploit) in [("se", true), ("standard", false)] {
                    let mut row = base_row(spec, n, eta, seed);
                    row.insert("solver".into(), json!(solver));
                    row.insert("max_branch".into(), json!(mb));
                    let outcome = generate_network(n, eta, seed)
                        .map_err(|e| e.to_string())
                        .and_then(|inst| {
                            let ny = inst.model.ny();
                            let floor = (spec.min_active_frac * ny as f64).ceil() as usize;
                            let logistic = Logistic::min_active(ny, floor);
                            row.insert("min_active".into(), json!(floor));
                            ssp_for(&inst.model, &logistic, spec.big_m)
                        });
                    match outcome {
                        Ok(p) => {
                            let rep = if exploit {
                                se_bnb(&p, spec.eps_f, mb, seed)
                            } else {
                                standard_bnb(&p, spec.eps_f, mb, seed)
                            };
                            report_fields(&mut row, &rep);
                        }
                        Err(e) => {
                            row.insert("error".into(), json!(e));
                        }
                    }
                    rows.push(Value::Object(row));
                }
            }
        }
    }
    append_means(&mut rows, &["n", "max_branch", "solver"]);
    rows
}

fn run_l1_compare(spec: &ExperimentSpec) -> Vec<Value> {
    let eta = spec.eta_list[0];
    let mut rows = Vec::new();
    for &n in &spec.n_list {
        for &seed in &spec.seeds {
            let inst = match generate_network(n, eta, seed) {
                Ok(i) => i,
                Err(e) => {
                    let mut row = base_row(spec, n, eta, seed);
                    row.insert("error".into(), json!(e.to_string()));
                    rows.push(Value::Object(row));
                    continue;
                }
            };
            let target = n.saturating_sub(1);
            // Branch-and-bound under the cardinality target.
            let mut row = base_row(spec, n, eta, seed);
            row.insert("method".into(), json!("se_bnb"));
            row.insert("min_active".into(), json!(target));
            match ssp_for(&inst.model, &Logistic::min_active(inst.model.ny(), target), spec.big_m)
            {
                Ok(p) => {
                    let rep = se_bnb(&p, spec.eps_f, None, seed);
                    report_fields(&mut row, &rep);
                    row.insert("feasible".into(), json!(rep.incumbent.is_some()));
                }
                Err(e) => {
                    row.insert("error".into(), json!(e));
                }
            }
            rows.push(Value::Object(row));
            // Reweighted l1 at both regularizer settings.
            for kappa_w in [1e-4, 1e-5] {
                let mut row = base_row(spec, n, eta, seed);
                row.insert("method".into(), json!(format!("l1_kappa_{kappa_w:e}")));
                row.insert("min_active".into(), json!(target));
                let opts = L1Options { kappa_w, ..L1Options::default() };
                let start = Instant::now();
                match reweighted_l1(&inst.model, &opts) {
                    Ok(rep) => {
                        let active = rep.selected.iter().filter(|s| **s).count();
                        row.insert("secs".into(), json!(start.elapsed().as_secs_f64()));
                        row.insert("iterations".into(), json!(rep.iterations));
                        row.insert("cost".into(), json!(active as f64));
                        row.insert(
                            "feasible".into(),
                            json!(rep.polish.feasible && active >= target),
                        );
                    }
                    Err(e) => {
                        row.insert("error".into(), json!(e.to_string()));
                    }
                }
                rows.push(Value::Object(row));
            }
        }
    }
    append_means(&mut rows, &["n", "method"]);
    rows
}

fn run_lipschitz_sweep(spec: &ExperimentSpec) -> Vec<Value> {
    let seed = spec.seeds[0];
    let mut etas = spec.eta_list.clone();
    etas.sort_by(|a, b| a.total_cmp(b));
    let mut rows = Vec::new();
    for &n in &spec.n_list {
        let mut last_cost = f64::NEG_INFINITY;
        let mut monotone = true;
        for &eta in &etas {
            let mut row = base_row(spec, n, eta, seed);
            let outcome = generate_network(n, eta, seed)
                .map_err(|e| e.to_string())
                .and_then(|inst| {
                    ssp_for(&inst.model, &Logistic::none(inst.model.ny()), spec.big_m)
                });
            match outcome {
                Ok(p) => {
                    let rep = se_bnb(&p, spec.eps_f, None, seed);
                    report_fields(&mut row, &rep);
                    if rep.ub.is_finite() {
                        monotone &= rep.ub >= last_cost - 1e-9;
                        last_cost = rep.ub;
                    }
                    row.insert("monotone_so_far".into(), json!(monotone));
                }
                Err(e) => {
                    row.insert("error".into(), json!(e));
                }
            }
            rows.push(Value::Object(row));
        }
    }
    rows
}

/// Appends per-group mean rows (over seeds) for the numeric columns, as
/// rows with `seed` set to "mean".
fn append_means(rows: &mut Vec<Value>, group_keys: &[&str]) {
    let mut groups: Vec<(Vec<Value>, Vec<&Map<String, Value>>)> = Vec::new();
    for row in rows.iter() {
        let obj = match row.as_object() {
            Some(o) if !o.contains_key("error") => o,
            _ => continue,
        };
        let key: Vec<Value> =
            group_keys.iter().map(|k| obj.get(*k).cloned().unwrap_or(Value::Null)).collect();
        match groups.iter_mut().find(|(k, _)| *k == key) {
            Some((_, members)) => members.push(obj),
            None => groups.push((key, vec![obj])),
        }
    }
    let mut means = Vec::new();
    for (key, members) in &groups {
        let mut row = Map::new();
        for (k, v) in group_keys.iter().zip(key) {
            row.insert((*k).to_string(), v.clone());
        }
        row.insert("seed".into(), json!("mean"));
        row.insert("runs".into(), json!(members.len()));
        for col in ["cost", "nodes", "sdp_solves", "secs"] {
            let vals: Vec<f64> =
                members.iter().filter_map(|m| m.get(col).and_then(Value::as_f64)).collect();
            if !vals.is_empty() {
                let mean = vals.iter().sum::<f64>() / vals.len() as f64;
                row.insert(format!("mean_{col}"), json!(mean));
            }
        }
        means.push(Value::Object(row));
    }
    rows.extend(means);
}

/// Flattens rows to CSV over the union of columns, preserving first-seen
/// order.
fn to_csv(rows: &[Value]) -> String {
    let mut cols: Vec<String> = Vec::new();
    for row in rows {
        if let Some(obj) = row.as_object() {
            for k in obj.keys() {
                if !cols.contains(k) {
                    cols.push(k.clone());
                }
            }
        }
    }
    let cell = |v: Option<&Value>| match v {
        None | Some(Value::Null) => String::new(),
        Some(Value::String(s)) => s.clone(),
        Some(other) => other.to_string(),
    };
    let mut out = cols.join(",");
    out.push('\n');
    for row in rows {
        let obj = row.as_object();
        let line: Vec<String> =
            cols.iter().map(|c| cell(obj.and_then(|o| o.get(c)))).collect();
        out.push_str(&line.join(","));
        out.push('\n');
    }
    out
}

/// `(x, y, series)` triples for plotting, derived from the mean rows when
/// present and the raw rows otherwise.
fn plot_triples(kind: Kind, rows: &[Value]) -> String {
    let mut out = String::from("x,y,series\n");
    let get = |o: &Map<String, Value>, k: &str| o.get(k).cloned().unwrap_or(Value::Null);
    let means: Vec<&Map<String, Value>> = rows
        .iter()
        .filter_map(Value::as_object)
        .filter(|o| o.get("seed") == Some(&json!("mean")))
        .collect();
    match kind {
        Kind::BnbCompare | Kind::L1Compare => {
            for o in means {
                let series = match kind {
                    Kind::BnbCompare => format!(
                        "{}_mb_{}",
                        get(o, "solver").as_str().unwrap_or("?"),
                        get(o, "max_branch")
                    ),
                    _ => get(o, "method").as_str().unwrap_or("?").to_string(),
                };
                out.push_str(&format!(
                    "{},{},{}\n",
                    get(o, "n"),
                    get(o, "mean_secs"),
                    series
                ));
            }
        }
        Kind::LipschitzSweep => {
            for o in rows.iter().filter_map(Value::as_object) {
                if o.contains_key("error") {
                    continue;
                }
                out.push_str(&format!(
                    "{},{},N_{}\n",
                    get(o, "eta"),
                    get(o, "cost"),
                    get(o, "n")
                ));
            }
        }
    }
    out
}

pub fn run(spec_path: &PathBuf, outdir: &Path, plot_data: bool) -> Result<ExitCode, String> {
    let text =
        fs::read_to_string(spec_path).map_err(|e| format!("{}: {e}", spec_path.display()))?;
    let spec: ExperimentSpec =
        serde_json::from_str(&text).map_err(|e| format!("{}: {e}", spec_path.display()))?;
    spec.validate()?;
    fs::create_dir_all(outdir).map_err(|e| format!("{}: {e}", outdir.display()))?;

    let rows = match spec.kind {
        Kind::BnbCompare => run_bnb_compare(&spec),
        Kind::L1Compare => run_l1_compare(&spec),
        Kind::LipschitzSweep => run_lipschitz_sweep(&spec),
    };

    let write = |name: &str, data: String| -> Result<(), String> {
        let p = outdir.join(name);
        fs::write(&p, data).map_err(|e| format!("{}: {e}", p.display()))
    };
    write("spec.json", serde_json::to_string_pretty(&spec).map_err(|e| e.to_string())?)?;
    write("rows.json", serde_json::to_string_pretty(&rows).map_err(|e| e.to_string())?)?;
    write("table.csv", to_csv(&rows))?;
    if plot_data {
        write("plot.csv", plot_triples(spec.kind, &rows))?;
    }
    println!("{} rows written to {}", rows.len(), outdir.display());
    Ok(ExitCode::SUCCESS)
}
