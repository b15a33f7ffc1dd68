use std::collections::{BTreeMap, HashMap};
use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use compreg_core::posterior_summary::{mean_absolute_bias, mean_squared_error, mean_standard_deviation, rand_index};
use serde::Serialize;

use crate::config::{read_config, resolve_path, EvaluateSpec};
use crate::error::{CliError, CliResult};
use crate::format::{fmt_f64, write_json, write_text};
use crate::report::{read_json, replicate_name, FitSummary, TruthRecord};

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct ReplicateScore {
    pub replicate: usize,
    pub rand_index: f64,
    pub k_hat: usize,
    pub selected_lambda: f64,
    pub lpml_selected: f64,
    /// LPML of the `lambda = 0` chain when the grid contains it.
    pub lpml_lambda0: Option<f64>,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct CoefficientRow {
    pub parameter: &'static str,
    /// 1-based.
    pub index: usize,
    pub mab: f64,
    /// `None` with fewer than two replicates.
    pub msd: Option<f64>,
    pub mmse: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct Metrics {
    pub replicates: usize,
    pub median_rand_index: f64,
    pub k_hat_histogram: BTreeMap<usize, usize>,
    pub k_hat_mode: usize,
    /// Replicates whose selected lambda is positive.
    pub positive_lambda_selected: usize,
    /// Replicates where the selected LPML is at least the `lambda = 0` LPML.
    pub selected_not_worse_than_lambda0: usize,
    pub coefficients: Vec<CoefficientRow>,
    pub per_replicate: Vec<ReplicateScore>,
}

pub fn median(values: &[f64]) -> f64 {
    let mut v = values.to_vec();
    v.sort_by(f64::total_cmp);
    let m = v.len() / 2;
    if v.len() % 2 == 1 {
        v[m]
    } else {
        0.5 * (v[m - 1] + v[m])
    }
}

/// Most frequent value; ties go to the smallest.
pub fn mode(hist: &BTreeMap<usize, usize>) -> usize {
    let mut best = (0, 0);
    for (&k, &c) in hist {
        if c > best.1 {
            best = (k, c);
        }
    }
    best.0
}

struct Replicate {
    truth: TruthRecord,
    fit: FitSummary,
}

fn discover(truth_dir: &Path, fits_dir: &Path) -> CliResult<Vec<Replicate>> {
    let entries = std::fs::read_dir(truth_dir).map_err(|e| CliError::io(truth_dir, e))?;
    let mut numbers = Vec::new();
    for entry in entries {
        let entry = entry.map_err(|e| CliError::io(truth_dir, e))?;
        let name = entry.file_name().to_string_lossy().into_owned();
        if let Some(r) = name
            .strip_prefix("truth_")
            .and_then(|s| s.strip_suffix(".json"))
            .and_then(|s| s.parse::<usize>().ok())
        {
            numbers.push(r);
        }
    }
    numbers.sort_unstable();
    if numbers.is_empty() {
        return Err(CliError::input(format!("{}: no truth_XXX.json files", truth_dir.display())));
    }
    numbers
        .into_iter()
        .map(|r| {
            let truth: TruthRecord = read_json(&truth_dir.join(format!("{}.json", replicate_name("truth", r))))?;
            let fit_path = fits_dir.join(replicate_name("data", r)).join("summary.json");
            if !fit_path.exists() {
                return Err(CliError::input(format!(
                    "{}: missing fit for replicate {r}",
                    fit_path.display()
                )));
            }
            let fit: FitSummary = read_json(&fit_path)?;
            Ok(Replicate { truth, fit })
        })
        .collect()
}

/// Per-location estimated and true coefficient vectors, in truth order.
fn aligned(rep: &Replicate) -> CliResult<(Vec<usize>, Vec<Vec<f64>>, Vec<Vec<f64>>)> {
    let t = &rep.truth;
    let f = &rep.fit;
    let position: HashMap<&str, usize> = f.ids.iter().enumerate().map(|(i, id)| (id.as_str(), i)).collect();
    if f.ids.len() != t.ids.len() {
        return Err(CliError::input(format!(
            "replicate {}: fit has {} locations, truth has {}",
            t.replicate,
            f.ids.len(),
            t.ids.len()
        )));
    }
    let mut z_hat = Vec::with_capacity(t.ids.len());
    let mut est = Vec::with_capacity(t.ids.len());
    let mut truth = Vec::with_capacity(t.ids.len());
    for (id, &z) in t.ids.iter().zip(&t.partition) {
        let i = *position
            .get(id.as_str())
            .ok_or_else(|| CliError::input(format!("replicate {}: id {id:?} missing from the fit", t.replicate)))?;
        let label = f.z_hat[i];
        let cluster = f
            .clusters
            .get(label - 1)
            .ok_or_else(|| CliError::input(format!("replicate {}: fit label {label} has no cluster", t.replicate)))?;
        z_hat.push(label);
        est.push(cluster.beta_tilde.clone());
        truth.push(t.beta_tilde[z - 1].clone());
    }
    Ok((z_hat, est, truth))
}

fn coefficient_rows(
    parameter: &'static str,
    estimates: &[Vec<Vec<f64>>],
    truth: &[Vec<f64>],
) -> CliResult<Vec<CoefficientRow>> {
    let err = |e: compreg_core::Error| CliError::input(format!("{parameter}: {e}"));
    let mab = mean_absolute_bias(estimates, truth).map_err(err)?;
    let mmse = mean_squared_error(estimates, truth).map_err(err)?;
    let msd: Vec<Option<f64>> = if estimates.len() >= 2 {
        mean_standard_deviation(estimates, truth).map_err(err)?.into_iter().map(Some).collect()
    } else {
        vec![None; mab.len()]
    };
    Ok((0..mab.len())
        .map(|m| CoefficientRow {
            parameter,
            index: m + 1,
            mab: mab[m],
            msd: msd[m],
            mmse: mmse[m],
        })
        .collect())
}

pub fn evaluate(truth_dir: &Path, fits_dir: &Path) -> CliResult<Metrics> {
    let reps = discover(truth_dir, fits_dir)?;
    let mut scores = Vec::with_capacity(reps.len());
    let mut beta_est = Vec::with_capacity(reps.len());
    let mut beta_truth = None;
    let mut eta_est = Vec::with_capacity(reps.len());
    let mut eta_truth = None;
    for rep in &reps {
        let (z_hat, est, truth) = aligned(rep)?;
        let ri = rand_index(&z_hat, &rep.truth.partition).map_err(|e| CliError::input(e.to_string()))?;
        let lpml_at = |lambda: f64| rep.fit.lpml.iter().find(|s| s.lambda == lambda).map(|s| s.lpml);
        scores.push(ReplicateScore {
            replicate: rep.truth.replicate,
            rand_index: ri,
            k_hat: rep.fit.k_hat,
            selected_lambda: rep.fit.selected_lambda,
            lpml_selected: lpml_at(rep.fit.selected_lambda).unwrap_or(f64::NAN),
            lpml_lambda0: lpml_at(0.0),
        });
        // Truth is fixed across replicates of one design; the first one is
        // the reference and the others must agree.
        match &beta_truth {
            None => beta_truth = Some(truth),
            Some(t) if *t != truth => {
                return Err(CliError::input(format!(
                    "replicate {}: true coefficients differ from replicate {}",
                    rep.truth.replicate, reps[0].truth.replicate
                )))
            }
            _ => {}
        }
        match &eta_truth {
            None => eta_truth = Some(rep.truth.eta.clone()),
            Some(t) if *t != rep.truth.eta => {
                return Err(CliError::input(format!(
                    "replicate {}: true eta differs from replicate {}",
                    rep.truth.replicate, reps[0].truth.replicate
                )))
            }
            _ => {}
        }
        beta_est.push(est);
        eta_est.push(vec![rep.fit.eta_hat.clone()]);
    }
    let beta_truth = beta_truth.expect("at least one replicate");
    let eta_truth = vec![eta_truth.expect("at least one replicate")];

    let mut coefficients = coefficient_rows("beta_tilde", &beta_est, &beta_truth)?;
    coefficients.extend(coefficient_rows("eta", &eta_est, &eta_truth)?);

    let mut hist = BTreeMap::new();
    for s in &scores {
        *hist.entry(s.k_hat).or_insert(0) += 1;
    }
    let ri: Vec<f64> = scores.iter().map(|s| s.rand_index).collect();
    Ok(Metrics {
        replicates: scores.len(),
        median_rand_index: median(&ri),
        k_hat_mode: mode(&hist),
        k_hat_histogram: hist,
        positive_lambda_selected: scores.iter().filter(|s| s.selected_lambda > 0.0).count(),
        selected_not_worse_than_lambda0: scores
            .iter()
            .filter(|s| s.lpml_lambda0.is_some_and(|l0| s.lpml_selected >= l0))
            .count(),
        coefficients,
        per_replicate: scores,
    })
}

fn opt(v: Option<f64>) -> String {
    v.map(fmt_f64).unwrap_or_default()
}

pub fn run(
    config: Option<&Path>,
    out: &Path,
    truth: Option<PathBuf>,
    fits: Option<PathBuf>,
) -> CliResult<()> {
    let spec: EvaluateSpec = match config {
        Some(path) => read_config(path)?,
        None => EvaluateSpec::default(),
    };
    let base = config.and_then(Path::parent);
    let truth = truth
        .or_else(|| spec.truth.as_ref().map(|p| resolve_path(base, p)))
        .ok_or_else(|| CliError::input("truth: directory not given (config field or --truth)"))?;
    let fits = fits
        .or_else(|| spec.fits.as_ref().map(|p| resolve_path(base, p)))
        .ok_or_else(|| CliError::input("fits: directory not given (config field or --fits)"))?;
    let metrics = evaluate(&truth, &fits)?;

    std::fs::create_dir_all(out).map_err(|e| CliError::io(out, e))?;
    write_json(&out.join("metrics.json"), &metrics)?;

    let mut csv = String::from("replicate,rand_index,k_hat,selected_lambda,lpml_selected,lpml_lambda0\n");
    for s in &metrics.per_replicate {
        let _ = writeln!(
            csv,
            "{},{},{},{},{},{}",
            s.replicate,
            fmt_f64(s.rand_index),
            s.k_hat,
            fmt_f64(s.selected_lambda),
            fmt_f64(s.lpml_selected),
            opt(s.lpml_lambda0)
        );
    }
    write_text(&out.join("replicates.csv"), &csv)?;

    let mut csv = String::from("parameter,index,mab,msd,mmse\n");
    for c in &metrics.coefficients {
        let _ = writeln!(
            csv,
            "{},{},{},{},{}",
            c.parameter,
            c.index,
            fmt_f64(c.mab),
            opt(c.msd),
            fmt_f64(c.mmse)
        );
    }
    write_text(&out.join("coefficients.csv"), &csv)?;

    let mut csv = String::from("k_hat,count\n");
    for (k, c) in &metrics.k_hat_histogram {
        let _ = writeln!(csv, "{k},{c}");
    }
    write_text(&out.join("k_hat_histogram.csv"), &csv)
}
