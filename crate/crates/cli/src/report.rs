use std::path::Path;

use metastab::chain::ChainSummary;
use serde_json::Value;

use crate::error::CliError;
use crate::io::{self, fmt_f64};
use crate::stages::{StageOutput, ASYMPTOTICS, CHAINS, LANDSCAPE, POISSON_JSON, REPORT_CSV, REPORT_TXT, VERIFY};

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Verdict {
    Pass,
    Fail,
    Skipped,
}

impl Verdict {
    fn of(ok: bool) -> Self {
        if ok {
            Verdict::Pass
        } else {
            Verdict::Fail
        }
    }

    pub fn as_str(self) -> &'static str {
        match self {
            Verdict::Pass => "pass",
            Verdict::Fail => "FAIL",
            Verdict::Skipped => "skipped",
        }
    }
}

#[derive(Clone, Debug)]
pub struct Row {
    pub criterion: u8,
    pub title: &'static str,
    pub quantity: String,
    pub computed: f64,
    pub target: f64,
    pub tolerance: String,
    pub verdict: Verdict,
}

const TITLES: [&str; 10] = [
    "Eyring-Kramers holding time",
    "limiting-chain jump law",
    "exponential holdings",
    "Laplace asymptotics",
    "Dirichlet-form estimate",
    "Poisson plateaus",
    "potential-theory algebra",
    "negligibility of short times and Delta",
    "closed-loop calibration",
    "determinism",
];

fn row(criterion: u8, quantity: impl Into<String>, computed: f64, target: f64, tolerance: impl Into<String>, verdict: Verdict) -> Row {
    Row {
        criterion,
        title: TITLES[criterion as usize - 1],
        quantity: quantity.into(),
        computed,
        target,
        tolerance: tolerance.into(),
        verdict,
    }
}

fn skipped(criterion: u8, why: &str) -> Row {
    row(criterion, why, f64::NAN, f64::NAN, "", Verdict::Skipped)
}

fn num(v: &Value) -> f64 {
    v.as_f64().unwrap_or(f64::NAN)
}

fn read_value(path: &Path) -> Result<Option<Value>, CliError> {
    if path.exists() {
        io::read_json(path).map(Some)
    } else {
        Ok(None)
    }
}

/// Parsed asymptotics table: header and numeric rows.
fn read_asymptotics(path: &Path) -> Result<Option<(Vec<String>, Vec<Vec<f64>>)>, CliError> {
    if !path.exists() {
        return Ok(None);
    }
    let text = std::fs::read_to_string(path).map_err(|e| CliError::io(path, e))?;
    let mut lines = text.lines();
    let header: Vec<String> = lines.next().unwrap_or("").split(',').map(str::to_string).collect();
    let rows = lines
        .filter(|l| !l.trim().is_empty())
        .map(|l| l.split(',').map(|c| c.trim().parse().unwrap_or(f64::NAN)).collect())
        .collect();
    Ok(Some((header, rows)))
}

fn verify_rows(v: &Value, rows: &mut Vec<Row>) {
    let checks = v["report"]["checks"].as_array().cloned().unwrap_or_default();
    let mut push = |criterion: u8, prefix: &str, tol: &str| {
        let before = rows.len();
        for c in checks.iter().filter(|c| c["name"].as_str().is_some_and(|n| n.starts_with(prefix))) {
            rows.push(row(
                criterion,
                format!("{} (n = {})", c["name"].as_str().unwrap_or(""), c["n"]),
                num(&c["value"]),
                num(&c["target"]),
                tol,
                Verdict::of(c["pass"].as_bool() == Some(true)),
            ));
        }
        if rows.len() == before {
            rows.push(skipped(criterion, "no such check in verify.json"));
        }
    };
    push(1, "mean holding", "+-15%");
    push(1, "censor fraction", "< 10%");
    push(2, "jump probability", "3 binomial sigma");
    push(2, "rate", "+-15%");
    push(2, "occupation", "3 batch-means sigma");
    push(3, "exponential holdings", "p > 0.01");
    match v["short_time"].as_array().and_then(|a| a.iter().find(|r| num(&r["a"]) == 0.05)) {
        Some(r) => rows.push(row(
            8,
            format!("P[first rescaled transition <= 0.05] (n = {})", r["n"]),
            num(&r["empirical"]),
            num(&r["predicted"]),
            format!("3 sigma = {:.4}", 3.0 * num(&r["sigma"])),
            Verdict::of(r["within_3_sigma"].as_bool() == Some(true)),
        )),
        None => rows.push(skipped(8, "short-time table missing")),
    }
    if let Some(d) = v["delta_fraction"].as_f64() {
        let eps = v["epsilon"].as_f64().unwrap_or(f64::NAN);
        rows.push(row(8, format!("Delta fraction at eps = {eps} (one eps; trend in the acceptance suite)"), d, f64::NAN, "", Verdict::Skipped));
    }
}

fn asymptotics_rows(header: &[String], table: &[Vec<f64>], chains: Option<&ChainSummary>, rows: &mut Vec<Row>) {
    let col = |name: &str| header.iter().position(|h| h == name);
    if table.is_empty() {
        rows.push(skipped(4, "asymptotics table is empty"));
        return;
    }
    let mut sorted: Vec<&Vec<f64>> = table.iter().collect();
    sorted.sort_by(|a, b| b[0].partial_cmp(&a[0]).unwrap_or(std::cmp::Ordering::Equal));
    let last = sorted[sorted.len() - 1];
    let eps = last[0];
    if let Some(c) = col("ratio") {
        rows.push(row(4, format!("Z_quad / Z_laplace at eps = {eps}"), last[c], 1.0, "+-0.05", Verdict::of((last[c] - 1.0).abs() <= 0.05)));
        let errs: Vec<f64> = sorted.iter().map(|r| (r[c] - 1.0).abs()).collect();
        let improving = errs.windows(2).all(|w| w[1] < w[0]);
        rows.push(row(4, format!("|ratio - 1| decreasing over {} eps values", errs.len()), errs[errs.len() - 1], 0.0, "monotone", Verdict::of(improving)));
    }
    if let Some(ch) = chains {
        let y = &ch.chain_y;
        for (p, id) in y.s_star.iter().enumerate() {
            if let Some(c) = col(&format!("mu_V_{id}")) {
                let target = y.nu[p] / y.nu_star;
                rows.push(row(4, format!("mu_eps(V_{id}) at eps = {eps}"), last[c], target, "+-0.05", Verdict::of((last[c] - target).abs() <= 0.05)));
            }
        }
    } else {
        rows.push(skipped(4, "valley masses need chains.json"));
    }
    if let Some(c) = col("dirichlet_ratio") {
        let v = last[c];
        let verdict = if v.is_nan() { Verdict::Skipped } else { Verdict::of((v - 1.0).abs() <= 0.1) };
        rows.push(row(5, format!("theta D_eps(F) / (D_x(q, q) / nu_star) at eps = {eps}"), v, 1.0, "+-10%", verdict));
    }
    if let Some(c) = col("generator_residual") {
        let res: Vec<f64> = sorted.iter().map(|r| r[c]).collect();
        let decreasing = res.windows(2).all(|w| w[1] < w[0]);
        rows.push(row(5, format!("generator residual decreasing over {} eps values", res.len()), res[res.len() - 1], 0.0, "monotone", Verdict::of(decreasing)));
    }
}

fn poisson_rows(v: &Value, rows: &mut Vec<Row>) {
    let eps = num(&v["epsilon"]);
    let sup = v["plateaus"].as_array().map_or(f64::NAN, |ps| ps.iter().map(|p| num(&p["sup_deviation"])).fold(0.0, f64::max));
    rows.push(row(6, format!("max plateau sup-deviation at eps = {eps}"), sup, 0.0, "<= 0.05", Verdict::of(sup <= 0.05)));
    let half_energy = num(&v["energy"]) / 2.0;
    let f: Vec<f64> = v["f"].as_array().map(|a| a.iter().map(num).collect()).unwrap_or_default();
    if v["f_is_pair_basis"].as_bool() == Some(true) && f.len() >= 2 {
        let target = (f[1] - f[0]) / 2.0;
        rows.push(row(6, "theta D_eps(phi) / 2 against (f(2) - f(1)) / 2", half_energy, target, "+-10%", Verdict::of((half_energy / target - 1.0).abs() <= 0.1)));
    } else {
        let target = num(&v["lambda_eps"]);
        rows.push(row(6, "theta D_eps(phi) / 2 against lambda_eps", half_energy, target, "+-10%", Verdict::of((half_energy / target - 1.0).abs() <= 0.1)));
    }
}

pub fn build_rows(dir: &Path, out: &mut StageOutput) -> Result<Option<Vec<Row>>, CliError> {
    let mut seen = |name: &str| {
        let p = dir.join(name);
        if p.exists() {
            out.inputs.push(p.clone());
        }
        p
    };
    let landscape = seen(LANDSCAPE).exists();
    let chains_path = seen(CHAINS);
    let chains: Option<ChainSummary> = if chains_path.exists() { Some(io::read_json(&chains_path)?) } else { None };
    let asym = read_asymptotics(&seen(ASYMPTOTICS))?;
    let poisson = read_value(&seen(POISSON_JSON))?;
    let verify = read_value(&seen(VERIFY))?;
    if !landscape && chains.is_none() && asym.is_none() && poisson.is_none() && verify.is_none() {
        return Ok(None);
    }

    let mut rows = Vec::new();
    match &verify {
        Some(v) => verify_rows(v, &mut rows),
        None => {
            for c in [1, 2, 3, 8] {
                rows.push(skipped(c, "no verify.json"));
            }
        }
    }
    match &asym {
        Some((h, t)) => asymptotics_rows(h, t, chains.as_ref(), &mut rows),
        None => {
            rows.push(skipped(4, "no asymptotics.csv"));
            rows.push(skipped(5, "no asymptotics.csv"));
        }
    }
    match &poisson {
        Some(v) => poisson_rows(v, &mut rows),
        None => rows.push(skipped(6, "no poisson.json")),
    }
    for c in [7, 9, 10] {
        rows.push(skipped(c, "checked by the acceptance suite, not a pipeline stage"));
    }
    rows.sort_by_key(|r| r.criterion);
    Ok(Some(rows))
}

fn cell(v: f64) -> String {
    if v.is_nan() {
        "-".into()
    } else {
        format!("{v:.6}")
    }
}

pub fn render(rows: &[Row]) -> String {
    let mut s = String::new();
    let mut current = 0;
    for r in rows {
        if r.criterion != current {
            current = r.criterion;
            s.push_str(&format!("\n[{}] {}\n", r.criterion, r.title));
            s.push_str(&format!("  {:<64} {:>14} {:>14} {:>18}  {}\n", "quantity", "computed", "target", "tolerance", "verdict"));
        }
        s.push_str(&format!(
            "  {:<64} {:>14} {:>14} {:>18}  {}\n",
            r.quantity,
            cell(r.computed),
            cell(r.target),
            r.tolerance,
            r.verdict.as_str()
        ));
    }
    s
}

pub fn report(dir: &Path) -> Result<StageOutput, CliError> {
    let mut out = StageOutput::default();
    let Some(rows) = build_rows(dir, &mut out)? else {
        out.message = Some("nothing to report".into());
        return Ok(out);
    };
    let text = render(&rows);
    let header: Vec<String> =
        ["criterion", "quantity", "computed", "target", "tolerance", "verdict"].iter().map(|s| s.to_string()).collect();
    let csv = io::csv(
        &header,
        rows.iter().map(|r| {
            vec![
                r.criterion.to_string(),
                format!("\"{}\"", r.quantity.replace('"', "\"\"")),
                fmt_f64(r.computed),
                fmt_f64(r.target),
                format!("\"{}\"", r.tolerance),
                r.verdict.as_str().to_string(),
            ]
        }),
    );
    let (txt, csv_path) = (dir.join(REPORT_TXT), dir.join(REPORT_CSV));
    io::write_text(&txt, &text)?;
    io::write_text(&csv_path, &csv)?;
    out.outputs.extend([txt, csv_path]);
    out.message = Some(text);
    Ok(out)
}
