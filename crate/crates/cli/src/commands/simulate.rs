use std::collections::HashSet;
use std::path::{Path, PathBuf};

use compreg_core::simulation::{builtin_partition, builtin_setting, generate_dataset, us_states_edges, NamedPartition};
use compreg_core::seed::derive_seed;

use crate::config::{read_config, resolve_path, SimulateSpec};
use crate::error::{CliError, CliResult};
use crate::format::write_json;
use crate::io::{read_partition, write_dataset, write_edges, write_partition, Dataset};
use crate::report::{replicate_name, TruthRecord};

pub const DEFAULT_REPLICATES: usize = 20;

fn load_partition(spec: &str, base: Option<&Path>) -> CliResult<NamedPartition> {
    if let Some(p) = builtin_partition(spec) {
        return Ok(p);
    }
    let path = resolve_path(base, &PathBuf::from(spec));
    if !path.exists() {
        return Err(CliError::input(format!(
            "partition: {spec:?} is neither disjoint, contiguous nor an existing file"
        )));
    }
    let (ids, labels) = read_partition(&path)?;
    let mut seen = HashSet::new();
    if let Some(dup) = ids.iter().find(|id| !seen.insert(id.as_str())) {
        return Err(CliError::input(format!("{}: duplicate id {dup:?}", path.display())));
    }
    Ok(NamedPartition {
        name: "custom",
        ids,
        labels,
    })
}

pub fn run(config: Option<&Path>, out: &Path, seed: Option<u64>) -> CliResult<()> {
    let spec: SimulateSpec = match config {
        Some(path) => read_config(path)?,
        None => SimulateSpec::default(),
    };
    let base = config.and_then(Path::parent);
    let setting = spec.setting.as_deref().unwrap_or("setting1");
    let partition = load_partition(spec.partition.as_deref().unwrap_or("disjoint"), base)?;
    let replicates = spec.replicates.unwrap_or(DEFAULT_REPLICATES);
    let seed = seed.or(spec.seed).unwrap_or(0);
    let mut design = builtin_setting(setting, &partition, replicates, seed)
        .ok_or_else(|| CliError::input(format!("setting: unknown value {setting:?}, expected setting1 or setting2")))?;
    if let Some(v) = spec.beta_tilde.clone() {
        design.beta_tilde = v;
    }
    if let Some(v) = spec.dirichlet_alpha.clone() {
        design.dirichlet_alpha = v;
    }
    if let Some(v) = spec.eta.clone() {
        design.eta = v;
    }
    if let Some(v) = spec.x2_range {
        design.x2_range = v;
    }
    if let Some(v) = spec.noise_sd {
        design.noise_sd = v;
    }
    design.validate().map_err(|e| CliError::input(e.to_string()))?;

    std::fs::create_dir_all(out).map_err(|e| CliError::io(out, e))?;
    write_json(&out.join("design.json"), &design)?;
    write_partition(&out.join("partition.csv"), &design.ids, &design.partition)?;
    let ids: HashSet<&str> = design.ids.iter().map(String::as_str).collect();
    let edges: Vec<(String, String)> = us_states_edges()
        .into_iter()
        .filter(|(a, b)| ids.contains(a.as_str()) && ids.contains(b.as_str()))
        .collect();
    write_edges(&out.join("adjacency.csv"), &edges)?;

    for r in 1..=design.replicates {
        let sim = generate_dataset(&design, r).map_err(|e| CliError::input(e.to_string()))?;
        let data = Dataset {
            ids: sim.ids.clone(),
            y: sim.y.iter().copied().collect(),
            composition: sim.composition.row_iter().map(|row| row.iter().copied().collect()).collect(),
            covariates: sim.x2.row_iter().map(|row| row.iter().copied().collect()).collect(),
        };
        write_dataset(&out.join(format!("{}.csv", replicate_name("data", r))), &data)?;
        let truth = TruthRecord {
            replicate: r,
            seed: derive_seed(design.seed, r as u64),
            ids: sim.ids,
            partition: sim.partition,
            beta_tilde: sim.beta_tilde,
            eta: sim.eta,
            noise_sd: design.noise_sd,
        };
        write_json(&out.join(format!("{}.json", replicate_name("truth", r))), &truth)?;
    }
    Ok(())
}
