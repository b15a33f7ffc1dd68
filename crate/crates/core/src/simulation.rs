//! Synthetic compositional regression data over a spatial partition.
//!
//! For location `i` with true cluster `z_i`:
//!
//! ```text
//! x_i  ~ Dirichlet(alpha)            (compositional covariate)
//! w_ij ~ Uniform(lo, hi), j = 1..p   (non-compositional covariates)
//! y_i  = ln(x_i) . beta_tilde_{z_i} + w_i . eta + N(0, noise_sd^2)
//! ```
//!
//! Replicate `r` uses the generator seeded with `derive_seed(seed, r)`; per
//! location it draws `K` gamma variates, then `p` uniforms, then one normal.

use nalgebra::{DMatrix, DVector};
use rand::Rng;
use rand_distr::{Distribution, Gamma, StandardNormal, Uniform};
use serde::{Deserialize, Serialize};

use crate::composition::{CompositionMatrix, LogContrastDesign};
use crate::error::{Error, Result};
use crate::seed::{chain_rng, derive_seed};
use crate::spatial_graph::SpatialGraph;

const US_STATES_ADJACENCY: &str = include_str!("../data/us_states_adjacency.csv");
const PARTITION_DISJOINT: &str = include_str!("../data/partition_disjoint.csv");
const PARTITION_CONTIGUOUS: &str = include_str!("../data/partition_contiguous.csv");

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SimulationDesign {
    /// Location identifiers, in output order.
    pub ids: Vec<String>,
    /// True cluster per location, `1..=k`.
    pub partition: Vec<usize>,
    /// Zero-sum log-contrast coefficients, one vector per cluster.
    pub beta_tilde: Vec<Vec<f64>>,
    pub dirichlet_alpha: Vec<f64>,
    pub eta: Vec<f64>,
    pub x2_range: (f64, f64),
    pub noise_sd: f64,
    pub replicates: usize,
    pub seed: u64,
}

impl SimulationDesign {
    pub fn parts(&self) -> usize {
        self.dirichlet_alpha.len()
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |msg: String| Err(Error::InvalidParameter(msg));
        if self.ids.len() != self.partition.len() {
            return bad(format!(
                "partition: {} labels for {} locations",
                self.partition.len(),
                self.ids.len()
            ));
        }
        if self.parts() < 2 {
            return bad("dirichlet_alpha: at least 2 parts required".into());
        }
        if let Some(a) = self.dirichlet_alpha.iter().find(|a| !(**a > 0.0 && a.is_finite())) {
            return bad(format!("dirichlet_alpha: entries must be positive, got {a}"));
        }
        for (c, b) in self.beta_tilde.iter().enumerate() {
            if b.len() != self.parts() {
                return bad(format!("beta_tilde[{c}]: expected {} entries, got {}", self.parts(), b.len()));
            }
            let sum: f64 = b.iter().sum();
            if sum.abs() > 1e-10 {
                return bad(format!("beta_tilde[{c}]: entries sum to {sum}, must sum to zero"));
            }
        }
        let k = self.beta_tilde.len();
        if let Some(&z) = self.partition.iter().find(|&&z| z == 0 || z > k) {
            return bad(format!("partition: label {z} outside 1..={k}"));
        }
        if !(self.x2_range.0 <= self.x2_range.1) || !self.x2_range.0.is_finite() || !self.x2_range.1.is_finite() {
            return bad(format!("x2_range: invalid bounds {:?}", self.x2_range));
        }
        if !(self.noise_sd >= 0.0 && self.noise_sd.is_finite()) {
            return bad(format!("noise_sd: must be >= 0, got {}", self.noise_sd));
        }
        if self.replicates == 0 {
            return bad("replicates: must be >= 1".into());
        }
        Ok(())
    }
}

/// One simulated dataset with its generating truth.
#[derive(Clone, Debug, PartialEq)]
pub struct SimulatedDataset {
    pub replicate: usize,
    pub ids: Vec<String>,
    pub y: DVector<f64>,
    pub composition: DMatrix<f64>,
    pub x2: DMatrix<f64>,
    /// True cluster per location, `1..=k`.
    pub partition: Vec<usize>,
    pub beta_tilde: Vec<Vec<f64>>,
    pub eta: Vec<f64>,
}

impl SimulatedDataset {
    pub fn design(&self, zero_pseudocount: f64) -> Result<LogContrastDesign> {
        let comp = CompositionMatrix::new(self.composition.clone())?;
        LogContrastDesign::new(&comp, self.x2.clone(), self.y.clone(), zero_pseudocount)
    }

    /// `ln(x_i) . beta_tilde_{z_i} + w_i . eta` per location.
    pub fn linear_predictor(&self) -> DVector<f64> {
        DVector::from_fn(self.ids.len(), |i, _| {
            let b = &self.beta_tilde[self.partition[i] - 1];
            let comp: f64 = (0..b.len()).map(|j| self.composition[(i, j)].ln() * b[j]).sum();
            let lin: f64 = (0..self.eta.len()).map(|j| self.x2[(i, j)] * self.eta[j]).sum();
            comp + lin
        })
    }
}

/// Dirichlet draw as normalized independent `Gamma(alpha_j, 1)` variates.
pub fn sample_dirichlet<R: Rng + ?Sized>(alpha: &[f64], rng: &mut R) -> Result<Vec<f64>> {
    if alpha.is_empty() {
        return Err(Error::InvalidParameter("empty Dirichlet parameter".into()));
    }
    let mut draws = alpha
        .iter()
        .map(|&a| {
            Gamma::new(a, 1.0)
                .map(|g| g.sample(rng))
                .map_err(|_| Error::InvalidParameter(format!("Dirichlet concentration must be > 0, got {a}")))
        })
        .collect::<Result<Vec<f64>>>()?;
    let total: f64 = draws.iter().sum();
    if total > 0.0 {
        draws.iter_mut().for_each(|v| *v /= total);
    } else {
        // every gamma variate underflowed: put the mass on the largest concentration
        let j = alpha
            .iter()
            .enumerate()
            .max_by(|a, b| a.1.total_cmp(b.1))
            .map(|(j, _)| j)
            .unwrap_or(0);
        draws.iter_mut().enumerate().for_each(|(i, v)| *v = if i == j { 1.0 } else { 0.0 });
    }
    Ok(draws)
}

pub fn generate_dataset(design: &SimulationDesign, replicate: usize) -> Result<SimulatedDataset> {
    design.validate()?;
    let mut rng = chain_rng(derive_seed(design.seed, replicate as u64));
    let n = design.ids.len();
    let k = design.parts();
    let p = design.eta.len();
    let (lo, hi) = design.x2_range;
    let uniform = Uniform::new_inclusive(lo, hi).map_err(|e| Error::InvalidParameter(e.to_string()))?;

    let mut composition = DMatrix::zeros(n, k);
    let mut x2 = DMatrix::zeros(n, p);
    let mut noise = DVector::zeros(n);
    for i in 0..n {
        let x = sample_dirichlet(&design.dirichlet_alpha, &mut rng)?;
        composition.row_mut(i).copy_from_slice(&x);
        for j in 0..p {
            x2[(i, j)] = uniform.sample(&mut rng);
        }
        let e: f64 = StandardNormal.sample(&mut rng);
        noise[i] = design.noise_sd * e;
    }
    let mut data = SimulatedDataset {
        replicate,
        ids: design.ids.clone(),
        y: DVector::zeros(n),
        composition,
        x2,
        partition: design.partition.clone(),
        beta_tilde: design.beta_tilde.clone(),
        eta: design.eta.clone(),
    };
    data.y = data.linear_predictor() + noise;
    Ok(data)
}

/// The bundled 51-location adjacency graph (50 US states plus DC, two-letter
/// codes, sorted). Land contiguity, plus AK-WA and HI-CA links so that no
/// location is isolated.
pub fn us_states_graph() -> SpatialGraph {
    let edges = us_states_edges();
    let mut vertices: Vec<String> = edges.iter().flat_map(|(a, b)| [a.clone(), b.clone()]).collect();
    vertices.sort();
    vertices.dedup();
    SpatialGraph::from_edge_list(&vertices, &edges).expect("bundled adjacency is consistent")
}

/// Edge list of [`us_states_graph`] as `(src, dst)` identifier pairs.
pub fn us_states_edges() -> Vec<(String, String)> {
    parse_pairs(US_STATES_ADJACENCY)
}

/// A named partition of the bundled locations.
#[derive(Clone, Debug, PartialEq)]
pub struct NamedPartition {
    pub name: &'static str,
    pub ids: Vec<String>,
    /// Cluster per id, `1..=3`.
    pub labels: Vec<usize>,
}

/// Two three-cluster partitions of the bundled graph.
///
/// `disjoint` has a cluster made of a west-coast and a north-east component;
/// in `contiguous` every cluster is connected. Both are hand-built
/// approximations with those topological properties, not transcriptions of a
/// published map. Ids are sorted, matching the vertex order of
/// [`us_states_graph`].
pub fn builtin_partitions() -> [NamedPartition; 2] {
    let read = |name, text| {
        let mut pairs: Vec<(String, usize)> = parse_pairs(text)
            .into_iter()
            .map(|(id, c)| (id, c.parse::<usize>().expect("bundled partition label")))
            .collect();
        pairs.sort();
        let (ids, labels) = pairs.into_iter().unzip();
        NamedPartition { name, ids, labels }
    };
    [read("disjoint", PARTITION_DISJOINT), read("contiguous", PARTITION_CONTIGUOUS)]
}

pub fn builtin_partition(name: &str) -> Option<NamedPartition> {
    builtin_partitions().into_iter().find(|p| p.name == name)
}

fn parse_pairs(text: &str) -> Vec<(String, String)> {
    text.lines()
        .skip(1)
        .filter(|l| !l.trim().is_empty())
        .map(|l| {
            let (a, b) = l.split_once(',').expect("two columns");
            (a.trim().to_string(), b.trim().to_string())
        })
        .collect()
}

/// First simulation setting: three parts, `Dir(1, 3, 6)`, `U(-1, 1)` covariates.
pub fn setting_1(partition: &NamedPartition, replicates: usize, seed: u64) -> SimulationDesign {
    SimulationDesign {
        ids: partition.ids.clone(),
        partition: partition.labels.clone(),
        beta_tilde: vec![vec![1.0, -2.0, 1.0], vec![-4.0, -3.0, 7.0], vec![10.0, -9.0, -1.0]],
        dirichlet_alpha: vec![1.0, 3.0, 6.0],
        eta: vec![1.0, 2.0, 1.0],
        x2_range: (-1.0, 1.0),
        noise_sd: 1.0,
        replicates,
        seed,
    }
}

/// Second simulation setting: ten parts, `U(-10, 10)` covariates.
pub fn setting_2(partition: &NamedPartition, replicates: usize, seed: u64) -> SimulationDesign {
    SimulationDesign {
        ids: partition.ids.clone(),
        partition: partition.labels.clone(),
        beta_tilde: vec![
            vec![1.0, 1.0, 1.0, 1.0, 1.0, -1.0, -1.0, -1.0, -1.0, -1.0],
            vec![-2.0, 5.0, -3.0, -2.0, 5.0, -3.0, -3.0, 6.0, -1.0, -2.0],
            vec![3.0, -3.0, -2.0, 8.0, -4.0, -2.0, 8.0, -2.0, -4.0, -2.0],
        ],
        dirichlet_alpha: vec![1.0, 4.0, 5.0, 3.0, 8.0, 7.0, 1.0, 3.0, 2.0, 6.0],
        eta: vec![1.0, 2.0, 1.0],
        x2_range: (-10.0, 10.0),
        noise_sd: 1.0,
        replicates,
        seed,
    }
}

pub fn builtin_setting(name: &str, partition: &NamedPartition, replicates: usize, seed: u64) -> Option<SimulationDesign> {
    match name {
        "setting1" => Some(setting_1(partition, replicates, seed)),
        "setting2" => Some(setting_2(partition, replicates, seed)),
        _ => None,
    }
}
