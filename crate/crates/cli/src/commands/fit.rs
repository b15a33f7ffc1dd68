use std::collections::HashSet;
use std::fmt::Write as _;
use std::io::Write as _;
use std::path::{Path, PathBuf};

use compreg_core::composition::LogContrastDesign;
use compreg_core::mfm_prior::VnTable;
use compreg_core::posterior_summary::PosteriorSummary;
use compreg_core::sampler::{run_chain_with_table, ChainTrace, FitConfig};
use compreg_core::seed::{chain_rng, derive_seed};
use compreg_core::simulation::us_states_edges;
use compreg_core::spatial_graph::SpatialGraph;
use rayon::prelude::*;
use serde::Serialize;

use crate::config::{read_config, FitSpec, ResolvedFit, ResolvedHyper};
use crate::error::{CliError, CliResult};
use crate::format::{fmt_f64, to_json_line, write_json, write_text};
use crate::io::{build_graph, read_dataset, read_edges};
use crate::report::{ClusterSummary, FitSummary, LambdaScore, TraceRecord};

struct Prepared {
    path: PathBuf,
    name: String,
    ids: Vec<String>,
    design: LogContrastDesign,
    graph: SpatialGraph,
    cfg: FitConfig,
    hyper: ResolvedHyper,
    vn: VnTable,
}

#[derive(Serialize)]
struct DatasetEcho<'a> {
    name: &'a str,
    data: String,
    n: usize,
    parts: usize,
    covariates: usize,
    graph_edges: usize,
    hyper: &'a ResolvedHyper,
}

#[derive(Serialize)]
struct ConfigEcho<'a> {
    config: &'a ResolvedFit,
    datasets: Vec<DatasetEcho<'a>>,
}

struct ChainResult {
    lambda: f64,
    seed: u64,
    summary: PosteriorSummary,
}

/// Seed of the chain for dataset `d` (position in the config) and grid
/// point `l`.
pub fn chain_seed(seed: u64, d: usize, l: usize) -> u64 {
    derive_seed(derive_seed(seed, d as u64), l as u64)
}

pub fn run(config: &Path, out: &Path, seed: Option<u64>, threads: Option<usize>) -> CliResult<()> {
    let spec: FitSpec = read_config(config)?;
    let resolved = spec.resolve(config.parent(), seed, threads)?;
    std::fs::create_dir_all(out).map_err(|e| CliError::io(out, e))?;

    let bundled;
    let (edges, edge_source) = match &resolved.adjacency {
        Some(p) => (read_edges(p)?, p.clone()),
        None => {
            bundled = us_states_edges();
            (bundled, PathBuf::from("<bundled us_states_adjacency.csv>"))
        }
    };

    let mut names = HashSet::new();
    let mut prepared = Vec::with_capacity(resolved.data.len());
    for path in &resolved.data {
        let name = path
            .file_stem()
            .map(|s| s.to_string_lossy().into_owned())
            .ok_or_else(|| CliError::input(format!("{}: not a file path", path.display())))?;
        if !names.insert(name.clone()) {
            return Err(CliError::input(format!("data: two files share the name {name:?}")));
        }
        let data = read_dataset(path)?;
        let design = data.design(resolved.zero_pseudocount, path)?;
        let graph = build_graph(&data.ids, &edges, &edge_source)?
            .expand_neighbors(resolved.d_max)
            .map_err(|e| CliError::input(e.to_string()))?;
        let (cfg, hyper) = resolved.fit_config(data.parts(), data.p())?;
        let vn = VnTable::build(
            &cfg.mfm_hyper(data.n()).map_err(|e| CliError::input(e.to_string()))?,
            cfg.series_tol,
        )
        .map_err(|e| CliError::from_core(e, vec![("data".into(), path.display().to_string())]))?;
        prepared.push(Prepared {
            path: path.clone(),
            name,
            ids: data.ids,
            design,
            graph,
            cfg,
            hyper,
            vn,
        });
    }

    let echo = ConfigEcho {
        config: &resolved,
        datasets: prepared
            .iter()
            .map(|p| DatasetEcho {
                name: &p.name,
                data: p.path.display().to_string(),
                n: p.design.n(),
                parts: p.design.parts(),
                covariates: p.design.p(),
                graph_edges: p.graph.edge_count(),
                hyper: &p.hyper,
            })
            .collect(),
    };
    write_json(&out.join("fit_config.json"), &echo)?;
    for p in &prepared {
        let dir = out.join(&p.name);
        std::fs::create_dir_all(&dir).map_err(|e| CliError::io(&dir, e))?;
    }

    let jobs: Vec<(usize, usize)> = (0..prepared.len())
        .flat_map(|d| (0..resolved.lambda_grid.len()).map(move |l| (d, l)))
        .collect();
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(resolved.threads)
        .build()
        .map_err(|e| CliError::input(format!("threads: {e}")))?;
    let results: Vec<CliResult<ChainResult>> = pool.install(|| {
        jobs.par_iter()
            .map(|&(d, l)| run_job(&prepared[d], &resolved, d, l, out))
            .collect()
    });

    let mut results = results.into_iter();
    for p in &prepared {
        let chains = results
            .by_ref()
            .take(resolved.lambda_grid.len())
            .collect::<CliResult<Vec<_>>>()?;
        write_dataset_outputs(p, chains, &out.join(&p.name))?;
    }
    Ok(())
}

fn lambda_tag(lambda: f64) -> String {
    format!("{lambda}")
}

fn run_job(p: &Prepared, resolved: &ResolvedFit, d: usize, l: usize, out: &Path) -> CliResult<ChainResult> {
    let lambda = resolved.lambda_grid[l];
    let mut cfg = p.cfg.clone();
    cfg.lambda = lambda;
    cfg.seed = chain_seed(resolved.seed, d, l);
    let context = || {
        vec![
            ("data".to_string(), p.path.display().to_string()),
            ("lambda".to_string(), lambda_tag(lambda)),
            ("seed".to_string(), cfg.seed.to_string()),
        ]
    };
    let trace = run_chain_with_table(&p.design, &p.graph, &cfg, &p.vn, &mut chain_rng(cfg.seed))
        .map_err(|e| CliError::from_core(e, context()))?;
    if resolved.write_traces {
        let path = out.join(&p.name).join(format!("trace_lambda_{}.jsonl", lambda_tag(lambda)));
        write_trace(&path, &trace)?;
    }
    let summary = PosteriorSummary::from_trace(&trace, &p.design.projection).map_err(|e| CliError::from_core(e, context()))?;
    Ok(ChainResult {
        lambda,
        seed: cfg.seed,
        summary,
    })
}

fn write_trace(path: &Path, trace: &ChainTrace) -> CliResult<()> {
    let file = std::fs::File::create(path).map_err(|e| CliError::io(path, e))?;
    let mut w = std::io::BufWriter::new(file);
    for (snap, loglik) in trace.snapshots.iter().zip(&trace.loglik) {
        let s = &snap.state;
        let record = TraceRecord {
            iteration: snap.iteration,
            z: s.labels.iter().map(|l| l + 1).collect(),
            beta: s.betas.iter().map(|b| b.iter().copied().collect()).collect(),
            sigma2: s.sigma2s.clone(),
            eta: s.eta.iter().copied().collect(),
            loglik: loglik.clone(),
        };
        writeln!(w, "{}", to_json_line(&record)).map_err(|e| CliError::io(path, e))?;
    }
    w.flush().map_err(|e| CliError::io(path, e))
}

/// Index of the largest LPML; ties go to the smaller smoothing value.
pub fn select_lambda(scores: &[(f64, f64)]) -> usize {
    let mut best = 0;
    for (i, &(lambda, lpml)) in scores.iter().enumerate().skip(1) {
        let (best_lambda, best_lpml) = scores[best];
        if lpml > best_lpml || (lpml == best_lpml && lambda < best_lambda) {
            best = i;
        }
    }
    best
}

fn write_dataset_outputs(p: &Prepared, chains: Vec<ChainResult>, dir: &Path) -> CliResult<()> {
    let mut csv = String::from("lambda,lpml,k_hat\n");
    for c in &chains {
        let _ = writeln!(csv, "{},{},{}", fmt_f64(c.lambda), fmt_f64(c.summary.lpml), c.summary.k_hat);
    }
    write_text(&dir.join("lpml.csv"), &csv)?;

    let scores: Vec<(f64, f64)> = chains.iter().map(|c| (c.lambda, c.summary.lpml)).collect();
    let best = &chains[select_lambda(&scores)];
    let s = &best.summary;
    let sizes = {
        let mut v = vec![0; s.k_hat];
        s.z_hat.iter().for_each(|&z| v[z] += 1);
        v
    };
    let summary = FitSummary {
        data: p.path.display().to_string(),
        n: p.design.n(),
        parts: p.design.parts(),
        covariates: p.design.p(),
        selected_lambda: best.lambda,
        lpml: chains
            .iter()
            .map(|c| LambdaScore {
                lambda: c.lambda,
                lpml: c.summary.lpml,
                k_hat: c.summary.k_hat,
                seed: c.seed,
            })
            .collect(),
        dahl_draw: s.m_best,
        dahl_iteration: s.iteration,
        k_hat: s.k_hat,
        ids: p.ids.clone(),
        z_hat: s.z_hat.iter().map(|z| z + 1).collect(),
        clusters: (0..s.k_hat)
            .map(|c| ClusterSummary {
                label: c + 1,
                size: sizes[c],
                beta_tilde: s.beta_tilde_hat[c].iter().copied().collect(),
                sigma2: s.sigma2_hat[c],
            })
            .collect(),
        eta_hat: s.eta_hat.iter().copied().collect(),
        eta_interval: s.eta_interval.iter().map(|&(a, b)| [a, b]).collect(),
        sigma2_interval: s.sigma2_interval.iter().map(|&(a, b)| [a, b]).collect(),
    };
    write_json(&dir.join("summary.json"), &summary)
}
