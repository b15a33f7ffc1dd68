//! Independent reference computations shared by the integration tests and the
//! acceptance suite. Nothing here calls into the code under test except to
//! obtain the value being checked.
#![allow(dead_code)]

use compreg_core::composition::{helmert_submatrix, inverse_projection, CompositionMatrix, LogContrastDesign};
use compreg_core::mfm_prior::{partition_log_prior, urn_log_weights, MfmHyper, VnTable, DEFAULT_SERIES_TOL};
use compreg_core::posterior_summary::{
    dahl_select_labels, estimation_metrics, lpml_from_logliks, membership_matrix, rand_index,
};
use compreg_core::sampler::{cluster_posterior, logmarg_new, ClusterState, EtaUpdate, FitConfig, GibbsSampler, NigHyper, NigPrior};
use compreg_core::seed::{chain_rng, ChainRng};
use compreg_core::spatial_graph::SpatialGraph;
use nalgebra::{DMatrix, DVector};
use rand::Rng;
use rand_distr::{Distribution, Gamma, StandardNormal};
use statrs::distribution::{Continuous, InverseGamma, Normal};
use statrs::function::gamma::ln_gamma;

pub type Check = Result<String, String>;

// ---------------------------------------------------------------- quadrature

fn simpson_step<F: Fn(f64) -> f64>(f: &F, a: f64, b: f64, fa: f64, fm: f64, fb: f64, whole: f64, eps: f64, depth: u32) -> f64 {
    let m = 0.5 * (a + b);
    let (lm, rm) = (0.5 * (a + m), 0.5 * (m + b));
    let (flm, frm) = (f(lm), f(rm));
    let left = (m - a) / 6.0 * (fa + 4.0 * flm + fm);
    let right = (b - m) / 6.0 * (fm + 4.0 * frm + fb);
    let delta = left + right - whole;
    if depth == 0 || delta.abs() <= 15.0 * eps {
        return left + right + delta / 15.0;
    }
    simpson_step(f, a, m, fa, flm, fm, left, eps / 2.0, depth - 1)
        + simpson_step(f, m, b, fm, frm, fb, right, eps / 2.0, depth - 1)
}

/// Adaptive Simpson on `panels` equal sub-intervals with absolute tolerance
/// `eps` on the whole integral.
pub fn integrate_abs<F: Fn(f64) -> f64>(f: F, a: f64, b: f64, panels: usize, eps: f64) -> f64 {
    let h = (b - a) / panels as f64;
    (0..panels)
        .map(|k| {
            let (lo, hi) = (a + k as f64 * h, a + (k + 1) as f64 * h);
            let (flo, fmid, fhi) = (f(lo), f(0.5 * (lo + hi)), f(hi));
            let whole = (hi - lo) / 6.0 * (flo + 4.0 * fmid + fhi);
            simpson_step(&f, lo, hi, flo, fmid, fhi, whole, eps / panels as f64, 30)
        })
        .sum()
}

/// As [`integrate_abs`], with the tolerance relative to a trapezoid estimate
/// on a fine grid.
pub fn integrate<F: Fn(f64) -> f64>(f: F, a: f64, b: f64, panels: usize, rel: f64) -> f64 {
    let fine = 20 * panels;
    let h = (b - a) / fine as f64;
    let rough: f64 = (0..=fine).map(|k| f(a + k as f64 * h)).sum::<f64>() * h;
    integrate_abs(f, a, b, panels, rel * rough.abs().max(f64::MIN_POSITIVE))
}

pub fn ln_normal(x: f64, mean: f64, var: f64) -> f64 {
    Normal::new(mean, var.sqrt()).unwrap().ln_pdf(x)
}

pub fn ln_inv_gamma(x: f64, shape: f64, rate: f64) -> f64 {
    InverseGamma::new(shape, rate).unwrap().ln_pdf(x)
}

fn rel_err(a: f64, b: f64) -> f64 {
    (a - b).abs() / b.abs()
}

// ------------------------------------------------------------- MFM / urn

/// `V_n(t)` by direct summation in linear space (`gamma = zeta = 1` style
/// shifted Poisson on `k >= 1`).
pub fn v_n_direct(n: usize, t: usize, gamma: f64, zeta: f64) -> f64 {
    let mut total = 0.0;
    for k in t.max(1)..400 {
        let ln_pk = (k as f64 - 1.0) * zeta.ln() - zeta - ln_gamma(k as f64);
        let ln_falling = ln_gamma(k as f64 + 1.0) - ln_gamma((k - t) as f64 + 1.0);
        let ln_rising = ln_gamma(gamma * k as f64 + n as f64) - ln_gamma(gamma * k as f64);
        total += (ln_falling - ln_rising + ln_pk).exp();
    }
    total
}

/// All set partitions of `n` items as restricted growth strings.
pub fn set_partitions(n: usize) -> Vec<Vec<usize>> {
    fn go(z: &mut Vec<usize>, n: usize, max: usize, out: &mut Vec<Vec<usize>>) {
        if z.len() == n {
            out.push(z.clone());
            return;
        }
        for l in 0..=max + 1 {
            z.push(l);
            go(z, n, max.max(l), out);
            z.pop();
        }
    }
    if n == 0 {
        return vec![vec![]];
    }
    let mut out = Vec::new();
    let mut z = vec![0];
    go(&mut z, n, 0, &mut out);
    out
}

pub fn block_sizes(z: &[usize]) -> Vec<usize> {
    let k = z.iter().max().map_or(0, |m| m + 1);
    let mut s = vec![0; k];
    z.iter().for_each(|&l| s[l] += 1);
    s.retain(|&c| c > 0);
    s
}

/// MFM partition probability from the direct `V_n` sum and rising factorials.
pub fn mfm_prior_direct(z: &[usize], gamma: f64, zeta: f64) -> f64 {
    let sizes = block_sizes(z);
    let rising: f64 = sizes.iter().map(|&s| (ln_gamma(gamma + s as f64) - ln_gamma(gamma)).exp()).product();
    v_n_direct(z.len(), sizes.len(), gamma, zeta) * rising
}

pub fn within_block_edges(z: &[usize], edges: &[(usize, usize)]) -> usize {
    edges.iter().filter(|(a, b)| z[*a] == z[*b]).count()
}

// ------------------------------------------------------- criterion checks

/// Random small conjugate instance: `n <= 6`, two parts, one covariate.
pub struct ConjugateInstance {
    pub design: LogContrastDesign,
    pub hyper: NigHyper,
    pub eta: f64,
}

pub fn conjugate_instance(seed: u64) -> ConjugateInstance {
    let mut rng = chain_rng(seed);
    let n = rng.random_range(3..=6);
    let rows: Vec<Vec<f64>> = (0..n)
        .map(|_| {
            let a: f64 = rng.random_range(0.05..0.95);
            vec![a, 1.0 - a]
        })
        .collect();
    let comp = CompositionMatrix::from_rows(&rows).unwrap();
    let x2 = DMatrix::from_fn(n, 1, |_, _| rng.random_range(-1.0..1.0));
    let y = DVector::from_fn(n, |_, _| rng.random_range(-2.0..2.0));
    let design = LogContrastDesign::new(&comp, x2, y, 1e-5).unwrap();
    let hyper = NigHyper {
        tau0: DVector::from_element(1, rng.random_range(-1.0..1.0)),
        sigma0: DMatrix::from_element(1, 1, rng.random_range(0.5..2.0)),
        a0: rng.random_range(2.0..4.0),
        b0: rng.random_range(0.5..2.0),
    };
    ConjugateInstance {
        design,
        hyper,
        eta: rng.random_range(-1.0..1.0),
    }
}

fn ln_nig_prior(beta: f64, sigma2: f64, h: &NigHyper) -> f64 {
    ln_normal(beta, h.tau0[0], sigma2 * h.sigma0[(0, 0)]) + ln_inv_gamma(sigma2, h.a0, h.b0)
}

/// Integral over `(beta, u = ln sigma2)` of `f(beta, sigma2) * sigma2`.
fn integrate_beta_sigma2<F: Fn(f64, f64) -> f64>(f: F) -> f64 {
    const B: f64 = 40.0;
    const U: (f64, f64) = (-12.0, 8.0);
    let (nb, nu) = (800, 400);
    let (hb, hu) = (2.0 * B / nb as f64, (U.1 - U.0) / nu as f64);
    let mut rough = 0.0;
    for a in 0..=nu {
        let s2 = (U.0 + a as f64 * hu).exp();
        for b in 0..=nb {
            rough += s2 * f(-B + b as f64 * hb, s2).abs();
        }
    }
    let eps = 1e-8 * rough * hb * hu;
    integrate_abs(
        |u| {
            let s2 = u.exp();
            s2 * integrate_abs(|b| f(b, s2), -B, B, 40, eps / (s2 * (U.1 - U.0)))
        },
        U.0,
        U.1,
        40,
        eps,
    )
}

/// Cluster posterior density against normalized prior x likelihood on a
/// 3 x 3 grid; returns the largest relative error.
pub fn cluster_posterior_error(inst: &ConjugateInstance) -> f64 {
    let d = &inst.design;
    let r: Vec<f64> = (0..d.n()).map(|i| d.y[i] - d.x2[(i, 0)] * inst.eta).collect();
    let x: Vec<f64> = (0..d.n()).map(|i| d.x1[(i, 0)]).collect();
    let ln_q = |b: f64, s2: f64| {
        ln_nig_prior(b, s2, &inst.hyper) + r.iter().zip(&x).map(|(ri, xi)| ln_normal(*ri, xi * b, s2)).sum::<f64>()
    };
    let z = integrate_beta_sigma2(|b, s2| ln_q(b, s2).exp());
    let mean_b = integrate_beta_sigma2(|b, s2| b * ln_q(b, s2).exp()) / z;
    let var_b = integrate_beta_sigma2(|b, s2| (b - mean_b).powi(2) * ln_q(b, s2).exp()) / z;
    let mean_s2 = integrate_beta_sigma2(|b, s2| s2 * ln_q(b, s2).exp()) / z;

    let prior = NigPrior::new(&inst.hyper).unwrap();
    let rows: Vec<[f64; 1]> = x.iter().map(|v| [*v]).collect();
    let post = cluster_posterior(&prior, rows.iter().zip(&r).map(|(x, r)| (x.as_slice(), *r))).unwrap();
    let mut worst: f64 = 0.0;
    for db in [-1.0, 0.0, 1.0] {
        for fs in [0.5, 1.0, 2.0] {
            let (b, s2) = (mean_b + db * var_b.sqrt(), fs * mean_s2);
            let oracle = ln_q(b, s2).exp() / z;
            let got = post.log_density(&DVector::from_element(1, b), s2).exp();
            worst = worst.max(rel_err(got, oracle));
        }
    }
    worst
}

/// New-cluster single-observation marginal against 2-D quadrature; largest
/// relative error over the instance's observations.
pub fn single_marginal_error(inst: &ConjugateInstance) -> f64 {
    let d = &inst.design;
    let eta = DVector::from_element(1, inst.eta);
    let mut worst: f64 = 0.0;
    for i in 0..d.n() {
        let (x1, x2) = (d.x1[(i, 0)], d.x2[(i, 0)]);
        let y = d.y[i];
        let oracle = integrate_beta_sigma2(|b, s2| {
            (ln_normal(y, x1 * b + x2 * inst.eta, s2) + ln_nig_prior(b, s2, &inst.hyper)).exp()
        });
        let got = logmarg_new(y, &[x1], &[x2], &eta, &inst.hyper).unwrap().exp();
        worst = worst.max(rel_err(got, oracle));
    }
    worst
}

/// Full conditional of `eta` against 1-D quadrature of prior x likelihood
/// with two clusters; largest relative error over 9 grid points.
pub fn eta_conditional_error(inst: &ConjugateInstance, seed: u64) -> f64 {
    let mut rng = chain_rng(seed);
    let d = &inst.design;
    let n = d.n();
    let mut labels: Vec<usize> = (0..n).map(|i| i % 2).collect();
    labels[0] = 0;
    let state = ClusterState {
        labels,
        betas: (0..2).map(|_| DVector::from_element(1, rng.random_range(-2.0..2.0))).collect(),
        sigma2s: (0..2).map(|_| rng.random_range(0.3..3.0)).collect(),
        eta: DVector::zeros(1),
    };
    let (eta0, v0) = (rng.random_range(-1.0..1.0), rng.random_range(0.5..4.0));
    let mut cfg = FitConfig::defaults(1, 1);
    cfg.nig = inst.hyper.clone();
    cfg.eta_prior.eta0 = DVector::from_element(1, eta0);
    cfg.eta_prior.v0 = DMatrix::from_element(1, 1, v0);
    let graph = SpatialGraph::empty(n);
    let vn = VnTable::build(&MfmHyper::new(1.0, 1.0, n).unwrap(), DEFAULT_SERIES_TOL).unwrap();
    let sampler = GibbsSampler::new(d, &graph, &cfg, &vn).unwrap();
    let cond = sampler.eta_conditional(&state).unwrap();

    let ln_q = |e: f64| {
        ln_normal(e, eta0, v0)
            + (0..n)
                .map(|i| {
                    let c = state.labels[i];
                    ln_normal(d.y[i], d.x1[(i, 0)] * state.betas[c][0] + d.x2[(i, 0)] * e, state.sigma2s[c])
                })
                .sum::<f64>()
    };
    let (lo, hi) = (eta0 - 60.0, eta0 + 60.0);
    let z = integrate(|e| ln_q(e).exp(), lo, hi, 400, 1e-12);
    let mean = integrate(|e| e * ln_q(e).exp(), lo, hi, 400, 1e-12) / z;
    let sd = (integrate(|e| (e - mean).powi(2) * ln_q(e).exp(), lo, hi, 400, 1e-12) / z).sqrt();
    (-4..=4)
        .map(|k| {
            let e = mean + 0.5 * k as f64 * sd;
            rel_err(cond.log_density(&DVector::from_element(1, e)).exp(), ln_q(e).exp() / z)
        })
        .fold(0.0, f64::max)
}

/// Criterion 1 over five random instances at relative tolerance 1e-4.
pub fn check_conjugacy() -> Check {
    let mut worst = [0.0f64; 3];
    for seed in 0..5u64 {
        let inst = conjugate_instance(1000 + seed);
        worst[0] = worst[0].max(cluster_posterior_error(&inst));
        worst[1] = worst[1].max(eta_conditional_error(&inst, 2000 + seed));
        worst[2] = worst[2].max(single_marginal_error(&inst));
    }
    let detail = format!(
        "max rel err: cluster posterior {:.2e}, eta conditional {:.2e}, new-cluster marginal {:.2e}",
        worst[0], worst[1], worst[2]
    );
    if worst.iter().all(|w| *w <= 1e-4) {
        Ok(detail)
    } else {
        Err(detail)
    }
}

/// Criterion 2: partition probabilities sum to one and factor into the
/// sequential urn, for `n = 3, 4, 5`.
pub fn check_partition_prior() -> Check {
    let mut worst_sum: f64 = 0.0;
    let mut worst_urn: f64 = 0.0;
    let mut worst_direct: f64 = 0.0;
    for n in 3..=5 {
        let h = MfmHyper::new(1.0, 1.0, n).map_err(|e| e.to_string())?;
        let vn = VnTable::build(&h, DEFAULT_SERIES_TOL).map_err(|e| e.to_string())?;
        let tables: Vec<(MfmHyper, VnTable)> = (1..=n)
            .map(|i| {
                let hi = MfmHyper::new(1.0, 1.0, i).unwrap();
                let vi = VnTable::build(&hi, DEFAULT_SERIES_TOL).unwrap();
                (hi, vi)
            })
            .collect();
        let mut total = 0.0;
        for z in set_partitions(n) {
            let p = partition_log_prior(&z, &h, &vn).map_err(|e| e.to_string())?.exp();
            total += p;
            worst_direct = worst_direct.max((p - mfm_prior_direct(&z, 1.0, 1.0)).abs());
            let mut seq = 1.0;
            for i in 0..n {
                let (hi, vi) = &tables[i];
                let partial: Vec<Option<usize>> = (0..=i).map(|j| if j < i { Some(z[j]) } else { None }).collect();
                let w = urn_log_weights(i, &partial, &SpatialGraph::empty(i + 1), 0.0, hi, vi).map_err(|e| e.to_string())?;
                let probs = w.probabilities();
                let pos = w.existing.iter().position(|(l, _)| *l == z[i]).unwrap_or(w.existing.len());
                seq *= probs[pos];
            }
            worst_urn = worst_urn.max((seq - p).abs());
        }
        worst_sum = worst_sum.max((total - 1.0).abs());
    }
    let detail = format!(
        "|sum - 1| {:.1e}, urn vs prior {:.1e}, table vs direct series {:.1e}",
        worst_sum, worst_urn, worst_direct
    );
    if worst_sum <= 1e-8 && worst_urn <= 1e-8 && worst_direct <= 1e-8 {
        Ok(detail)
    } else {
        Err(detail)
    }
}

/// Criterion 3: Helmert identities for `K in 2..50` and the log-contrast
/// round trip on random compositions.
pub fn check_helmert() -> Check {
    let mut rng = chain_rng(33);
    let mut worst_id: f64 = 0.0;
    let mut worst_rt: f64 = 0.0;
    for k in 2..=50 {
        let h = helmert_submatrix(k).map_err(|e| e.to_string())?;
        let m1 = inverse_projection(&h).map_err(|e| e.to_string())?;
        let ones = DVector::from_element(k, 1.0);
        let eye = DMatrix::<f64>::identity(k - 1, k - 1);
        worst_id = worst_id
            .max((&h * h.transpose() - &eye).amax())
            .max((&h * &ones).amax())
            .max((&h * &m1 - &eye).amax())
            .max((ones.transpose() * &m1).amax());

        let n = 8;
        let rows: Vec<Vec<f64>> = (0..n)
            .map(|_| {
                let raw: Vec<f64> = (0..k).map(|_| rng.random_range(0.01..1.0)).collect();
                let s: f64 = raw.iter().sum();
                raw.iter().map(|v| v / s).collect()
            })
            .collect();
        let comp = CompositionMatrix::from_rows(&rows).map_err(|e| e.to_string())?;
        let design = LogContrastDesign::new(&comp, DMatrix::zeros(n, 0), DVector::zeros(n), 1e-5).map_err(|e| e.to_string())?;
        let mut bt = DVector::from_fn(k, |_, _| rng.random_range(-5.0..5.0));
        let mean = bt.mean();
        bt.add_scalar_mut(-mean);
        let beta = &h * &bt;
        let lhs = DMatrix::from_fn(n, k, |i, j| rows[i][j].ln()) * &bt;
        worst_rt = worst_rt.max((lhs - &design.x1 * beta).amax());
    }
    let detail = format!("identities {:.1e}, Z.beta_tilde = X1.beta {:.1e}", worst_id, worst_rt);
    if worst_id <= 1e-12 && worst_rt <= 1e-10 {
        Ok(detail)
    } else {
        Err(detail)
    }
}

/// Criterion 7: post-processing against hand and brute-force oracles.
pub fn check_post_processing() -> Check {
    let mut failures = Vec::new();
    let mut expect = |ok: bool, what: &str| {
        if !ok {
            failures.push(what.to_string());
        }
    };

    // membership matrix
    let rows = membership_matrix(&[0, 0, 1]).to_rows();
    expect(rows == vec![vec![1, 1, 0], vec![1, 1, 0], vec![0, 0, 1]], "membership (1,1,2)");
    expect(membership_matrix(&[4; 4]).to_rows().iter().flatten().all(|&b| b == 1), "membership all equal");
    let ident = membership_matrix(&[0, 1, 2, 3]).to_rows();
    expect((0..4).all(|i| (0..4).all(|j| ident[i][j] == u8::from(i == j))), "membership all distinct");

    // Dahl against brute-force squared distances
    let a = [0usize, 0, 1];
    let b = [0usize, 1, 1];
    let mut draws: Vec<&[usize]> = vec![&b];
    draws.extend(std::iter::repeat_n(&a[..], 9));
    let brute = brute_force_dahl(&draws);
    expect(dahl_select_labels(&draws).ok() == Some(brute), "dahl 9x(1,1,2) + (1,2,2)");
    expect(draws[brute] == &a[..], "dahl picks (1,1,2)");
    expect(dahl_select_labels(&[&a[..], &a[..], &a[..]]).ok() == Some(0), "dahl identical draws");
    let mut reinforced = draws.clone();
    reinforced.push(draws[brute]);
    expect(
        dahl_select_labels(&reinforced).map(|i| reinforced[i]).ok() == Some(draws[brute]),
        "dahl reinforced",
    );
    let mut rng = chain_rng(77);
    for _ in 0..20 {
        let owned: Vec<Vec<usize>> = (0..15).map(|_| (0..6).map(|_| rng.random_range(0..3)).collect()).collect();
        let refs: Vec<&[usize]> = owned.iter().map(Vec::as_slice).collect();
        expect(dahl_select_labels(&refs).ok() == Some(brute_force_dahl(&refs)), "dahl random draws");
    }

    // LPML
    let close = |a: f64, b: f64| (a - b).abs() <= 1e-10;
    expect(lpml_from_logliks(&[vec![-0.7]]).is_ok_and(|v| close(v, -0.7)), "lpml single term");
    expect(lpml_from_logliks(&[vec![1.0], vec![1.0]]).is_ok_and(|v| close(v, 1.0)), "lpml constant");
    expect(
        lpml_from_logliks(&[vec![0.0], vec![(1.0f64 / 3.0).ln()]]).is_ok_and(|v| close(v, 0.5f64.ln())),
        "lpml {1, 1/3}",
    );
    let ll: Vec<Vec<f64>> = (0..7).map(|_| (0..4).map(|_| rng.random_range(-5.0..0.0)).collect()).collect();
    let direct: f64 = (0..4)
        .map(|i| {
            let h = ll.iter().map(|r| (-r[i]).exp()).sum::<f64>() / ll.len() as f64;
            (1.0 / h).ln()
        })
        .sum();
    expect(lpml_from_logliks(&ll).is_ok_and(|v| close(v, direct)), "lpml random");

    // Rand index
    expect(rand_index(&[0, 1, 1], &[5, 2, 2]).ok() == Some(1.0), "rand identical");
    expect(rand_index(&[0, 0], &[0, 1]).ok() == Some(0.0), "rand n=2");
    expect(rand_index(&[0, 0, 1], &[0, 1, 1]).is_ok_and(|v| close(v, 1.0 / 3.0)), "rand 1/3");
    for _ in 0..20 {
        let x: Vec<usize> = (0..9).map(|_| rng.random_range(0..3)).collect();
        let y: Vec<usize> = (0..9).map(|_| rng.random_range(0..4)).collect();
        let (mut agree, mut total) = (0, 0);
        for i in 0..9 {
            for j in 0..9 {
                if i != j {
                    total += 1;
                    agree += usize::from((x[i] == x[j]) == (y[i] == y[j]));
                }
            }
        }
        expect(rand_index(&x, &y).is_ok_and(|v| close(v, agree as f64 / total as f64)), "rand random");
    }

    // estimation metrics
    let m = estimation_metrics(&[vec![vec![1.5]], vec![vec![1.5]]], &[vec![1.0]]);
    expect(m.is_ok_and(|m| close(m[0].mab, 0.5) && close(m[0].mmse, 0.25)), "metrics {1.5}");
    let m = estimation_metrics(&[vec![vec![0.9]], vec![vec![1.1]]], &[vec![1.0]]);
    expect(
        m.is_ok_and(|m| close(m[0].mab, 0.1) && close(m[0].msd, 0.02f64.sqrt()) && close(m[0].mmse, 0.01)),
        "metrics {0.9, 1.1}",
    );
    let m = estimation_metrics(&[vec![vec![2.0, -1.0]], vec![vec![2.0, -1.0]]], &[vec![2.0, -1.0]]);
    expect(m.is_ok_and(|m| m.iter().all(|c| c.mab == 0.0 && c.msd == 0.0 && c.mmse == 0.0)), "metrics exact");
    expect(estimation_metrics(&[vec![vec![1.0]]], &[vec![1.0]]).is_err(), "metrics R=1 rejected");

    if failures.is_empty() {
        Ok("membership, dahl, lpml, rand index, estimation metrics".into())
    } else {
        Err(failures.join("; "))
    }
}

pub fn brute_force_dahl(draws: &[&[usize]]) -> usize {
    let n = draws[0].len();
    let m = draws.len() as f64;
    let mean = |i: usize, j: usize| draws.iter().filter(|z| z[i] == z[j]).count() as f64 / m;
    let dist = |z: &[usize]| {
        let mut d = 0.0;
        for i in 0..n {
            for j in 0..n {
                let b = if z[i] == z[j] { 1.0 } else { 0.0 };
                d += (b - mean(i, j)).powi(2);
            }
        }
        d
    };
    let scores: Vec<f64> = draws.iter().map(|z| dist(z)).collect();
    let best = scores.iter().cloned().fold(f64::INFINITY, f64::min);
    scores.iter().position(|s| *s <= best + 1e-12).unwrap()
}

// ---------------------------------------------------------------- Geweke

pub struct GewekeReport {
    pub names: [&'static str; 4],
    pub z_scores: [f64; 4],
}

fn batch_mean_se(xs: &[f64], batches: usize) -> (f64, f64) {
    let size = xs.len() / batches;
    let means: Vec<f64> = xs.chunks(size).take(batches).map(|c| c.iter().sum::<f64>() / c.len() as f64).collect();
    let mean = means.iter().sum::<f64>() / batches as f64;
    let var = means.iter().map(|m| (m - mean).powi(2)).sum::<f64>() / (batches - 1) as f64;
    (mean, (var / batches as f64).sqrt())
}

fn simulate_y<R: Rng>(design: &LogContrastDesign, state: &ClusterState, rng: &mut R) -> DVector<f64> {
    DVector::from_fn(design.n(), |i, _| {
        let c = state.labels[i];
        let mean = design.x1[(i, 0)] * state.betas[c][0] + design.x2[(i, 0)] * state.eta[0];
        let e: f64 = StandardNormal.sample(rng);
        mean + state.sigma2s[c].sqrt() * e
    })
}

/// Successive-conditional simulator against forward prior draws on a 5-node
/// path with `lambda = 1`, two parts and one covariate.
pub fn geweke(samples: usize, seed: u64, eta_update: EtaUpdate) -> GewekeReport {
    let n = 5;
    let lambda = 1.0;
    let (a0, b0, v0) = (3.0, 0.5, 1.0);
    let edges: Vec<(usize, usize)> = (0..n - 1).map(|i| (i, i + 1)).collect();
    let graph = SpatialGraph::from_indices(n, &edges).unwrap();
    let mut rng = chain_rng(seed);

    let rows: Vec<Vec<f64>> = (0..n)
        .map(|_| {
            let a: f64 = rng.random_range(0.1..0.9);
            vec![a, 1.0 - a]
        })
        .collect();
    let comp = CompositionMatrix::from_rows(&rows).unwrap();
    let x2 = DMatrix::from_fn(n, 1, |_, _| rng.random_range(-2.0..2.0));
    let mut design = LogContrastDesign::new(&comp, x2, DVector::zeros(n), 1e-5).unwrap();

    let mut cfg = FitConfig::defaults(1, 1);
    cfg.lambda = lambda;
    cfg.eta_update = eta_update;
    cfg.nig.a0 = a0;
    cfg.nig.b0 = b0;
    cfg.eta_prior.v0 = DMatrix::from_element(1, 1, v0);
    let vn = VnTable::build(&MfmHyper::new(1.0, 1.0, n).unwrap(), DEFAULT_SERIES_TOL).unwrap();

    // forward: exact partition law by enumeration, then parameters from the priors
    let parts = set_partitions(n);
    let weights: Vec<f64> = parts
        .iter()
        .map(|z| mfm_prior_direct(z, 1.0, 1.0) * (lambda * within_block_edges(z, &edges) as f64).exp())
        .collect();
    let total: f64 = weights.iter().sum();
    let inv_gamma = |rng: &mut ChainRng| 1.0 / Gamma::new(a0, 1.0 / b0).unwrap().sample(rng);
    let mut forward = [Vec::new(), Vec::new(), Vec::new(), Vec::new()];
    for _ in 0..samples {
        let mut u = rng.random::<f64>() * total;
        let mut idx = 0;
        while idx + 1 < parts.len() && u >= weights[idx] {
            u -= weights[idx];
            idx += 1;
        }
        let k = parts[idx].iter().max().unwrap() + 1;
        let sigma2 = inv_gamma(&mut rng);
        let eta: f64 = StandardNormal.sample(&mut rng);
        forward[0].push(k as f64);
        forward[1].push(sigma2);
        forward[2].push(eta * v0.sqrt());
        forward[3].push(eta * eta * v0);
    }

    // successive conditional: start from a prior draw, alternate sweep and data
    let mut state = ClusterState {
        labels: vec![0; n],
        betas: vec![DVector::from_element(1, {
            let s: f64 = StandardNormal.sample(&mut rng);
            s
        })],
        sigma2s: vec![inv_gamma(&mut rng)],
        eta: DVector::from_element(1, StandardNormal.sample(&mut rng)),
    };
    let mut chain = [Vec::new(), Vec::new(), Vec::new(), Vec::new()];
    for _ in 0..samples {
        design.y = simulate_y(&design, &state, &mut rng);
        let sampler = GibbsSampler::new(&design, &graph, &cfg, &vn).unwrap();
        sampler.sweep(&mut state, &mut rng).unwrap();
        chain[0].push(state.k_star() as f64);
        chain[1].push(state.sigma2s[state.labels[0]]);
        chain[2].push(state.eta[0]);
        chain[3].push(state.eta[0] * state.eta[0]);
    }

    let mut z_scores = [0.0; 4];
    for m in 0..4 {
        let (cm, cse) = batch_mean_se(&chain[m], 50);
        let (fm, fse) = batch_mean_se(&forward[m], 50);
        z_scores[m] = (cm - fm) / (cse * cse + fse * fse).sqrt();
    }
    GewekeReport {
        names: ["K*", "sigma2 of item 1", "eta", "eta^2"],
        z_scores,
    }
}

/// Criterion 6 at 10^4 samples.
pub fn check_geweke() -> Check {
    let r = geweke(10_000, 606, EtaUpdate::Weighted);
    let detail = r
        .names
        .iter()
        .zip(r.z_scores)
        .map(|(n, z)| format!("{n}: z={z:+.2}"))
        .collect::<Vec<_>>()
        .join(", ");
    if r.z_scores.iter().all(|z| z.abs() < 4.0) {
        Ok(detail)
    } else {
        Err(detail)
    }
}
