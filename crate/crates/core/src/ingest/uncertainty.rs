//! Poissonian uncertainties for the report values.
//!
//! Analytic: first-order propagation with `Var(C_ij) = C_ij`. Every quantity
//! here is a ratio-type functional of the counts, so its gradient is
//! `(g_ij - value) / N` for some per-cell score `g_ij`, and the variance is
//! `sum_ij p_ij (g_ij - value)^2 / N`. Empty cells have `p_ij = 0` and drop out.
//!
//! Bootstrap: each cell is redrawn from a Poisson law with its observed count
//! as mean, the reports are recomputed, and the sample standard deviation is
//! taken. Replica `r` uses a ChaCha8 stream `r` keyed by the seed, so the
//! result does not depend on thread scheduling.

use ndarray::{Array2, ArrayView2, Axis as NdAxis};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Poisson};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::criteria::full_report;
use crate::grid::Party;

use super::{CountTable, IngestError};

pub const DEFAULT_BOOTSTRAP_SAMPLES: usize = 1000;
pub const MIN_BOOTSTRAP_SAMPLES: usize = 100;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum UncertaintyMethod {
    #[default]
    Analytic,
    Bootstrap,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct UncertaintyConfig {
    pub method: UncertaintyMethod,
    pub bootstrap_samples: usize,
    pub seed: u64,
}

impl Default for UncertaintyConfig {
    fn default() -> Self {
        Self {
            method: UncertaintyMethod::Analytic,
            bootstrap_samples: DEFAULT_BOOTSTRAP_SAMPLES,
            seed: 0,
        }
    }
}

impl UncertaintyConfig {
    pub fn bootstrap(samples: usize, seed: u64) -> Self {
        Self {
            method: UncertaintyMethod::Bootstrap,
            bootstrap_samples: samples,
            seed,
        }
    }
}

/// Per-table first-order variances of the building blocks.
struct TableVariances {
    /// Inferred variance of A (given B) and of B (given A): (value, variance).
    inferred: [(f64, f64); 2],
    /// Conditional entropy of A given B, and of B given A.
    conditional: [f64; 2],
    /// Marginal variance of A and of B: (value, variance).
    marginal_var: [(f64, f64); 2],
    /// Marginal entropy of A and of B.
    marginal_entropy: [f64; 2],
}

fn party_index(p: Party) -> usize {
    match p {
        Party::A => 0,
        Party::B => 1,
    }
}

/// Orients the table so that rows run over the inferred party.
fn oriented(p: &Array2<f64>, infer: Party) -> ArrayView2<'_, f64> {
    match infer {
        Party::A => p.view(),
        Party::B => p.t(),
    }
}

/// `sum p (score - mean)^2` over the populated cells.
fn score_variance(p: ArrayView2<'_, f64>, mut score: impl FnMut(usize, usize, f64) -> f64) -> f64 {
    let mut s = 0.0;
    for ((i, j), &pij) in p.indexed_iter() {
        if pij > 0.0 {
            let d = score(i, j, pij);
            s += pij * d * d;
        }
    }
    s
}

fn table_variances(t: &CountTable) -> Result<TableVariances, IngestError> {
    let total = t.total();
    if total == 0 {
        return Err(IngestError::ZeroTotalCounts);
    }
    let n = total as f64;
    let p = t.counts.mapv(|c| c as f64 / n);
    let (ax_a, ax_b) = t.physical_axes()?;
    let mut out = TableVariances {
        inferred: [(0.0, 0.0); 2],
        conditional: [0.0; 2],
        marginal_var: [(0.0, 0.0); 2],
        marginal_entropy: [0.0; 2],
    };
    for infer in [Party::A, Party::B] {
        let k = party_index(infer);
        let q = oriented(&p, infer);
        let axis = if infer == Party::A { &ax_a } else { &ax_b };
        let a: Vec<f64> = axis.positions().collect();
        let cols = q.ncols();

        // Per-column (conditioning bin) weight and conditional mean.
        let w = q.sum_axis(NdAxis(0));
        let mut mean = vec![0.0; cols];
        for ((i, j), &pij) in q.indexed_iter() {
            mean[j] += pij * a[i];
        }
        for j in 0..cols {
            if w[j] > 0.0 {
                mean[j] /= w[j];
            }
        }
        let d: f64 = q
            .indexed_iter()
            .map(|((i, j), &pij)| pij * (a[i] - mean[j]).powi(2))
            .sum();
        let var_d = score_variance(q, |i, j, _| (a[i] - mean[j]).powi(2) - d) / n;
        out.inferred[k] = (d, var_d);

        let h: f64 = q
            .indexed_iter()
            .filter(|(_, &pij)| pij > 0.0)
            .map(|((_, j), &pij)| -pij * (pij / w[j]).ln())
            .sum();
        out.conditional[k] = score_variance(q, |_, j, pij| (pij / w[j]).ln() + h) / n;

        let m = q.sum_axis(NdAxis(1));
        let mu: f64 = m.iter().zip(&a).map(|(pi, ai)| pi * ai).sum();
        let v: f64 = m
            .iter()
            .zip(&a)
            .map(|(pi, ai)| pi * (ai - mu).powi(2))
            .sum();
        let hm: f64 = crate::entropy::shannon(m.iter());
        let mut var_v = 0.0;
        let mut var_h = 0.0;
        for (pi, ai) in m.iter().zip(&a) {
            if *pi > 0.0 {
                var_v += pi * ((ai - mu).powi(2) - v).powi(2);
                var_h += pi * (pi.ln() + hm).powi(2);
            }
        }
        out.marginal_var[k] = (v, var_v / n);
        out.marginal_entropy[k] = var_h / n;
    }
    Ok(out)
}

/// Variance of a product of independent estimates.
fn product_variance((a, va): (f64, f64), (b, vb): (f64, f64)) -> f64 {
    b * b * va + a * a * vb
}

/// One-sigma uncertainties in the layout of [`full_report`].
pub fn analytic_uncertainties(
    table_x: &CountTable,
    table_p: &CountTable,
) -> Result<Vec<f64>, IngestError> {
    let x = table_variances(table_x)?;
    let p = table_variances(table_p)?;
    let mut out = Vec::with_capacity(9);
    for k in 0..2 {
        out.push(product_variance(x.inferred[k], p.inferred[k]).sqrt());
    }
    for k in 0..2 {
        out.push((x.conditional[k] + p.conditional[k]).sqrt());
    }
    for k in 0..2 {
        out.push(product_variance(x.marginal_var[k], p.marginal_var[k]).sqrt());
        out.push((x.marginal_entropy[k] + p.marginal_entropy[k]).sqrt());
    }
    out.push(out[3]);
    Ok(out)
}

fn resample(t: &CountTable, rng: &mut ChaCha8Rng) -> CountTable {
    let counts = t.counts.mapv(|c| {
        if c == 0 {
            0
        } else {
            Poisson::new(c as f64).expect("positive mean").sample(rng) as u64
        }
    });
    CountTable {
        meta: t.meta,
        counts,
    }
}

fn report_values(tx: &CountTable, tp: &CountTable) -> Result<Vec<f64>, IngestError> {
    let dx = tx.to_physical_distribution()?;
    let dp = tp.to_physical_distribution()?;
    Ok(full_report(&dx, &dp).iter().map(|r| r.value).collect())
}

/// Bootstrap standard deviations in the layout of [`full_report`].
pub fn bootstrap_uncertainties(
    table_x: &CountTable,
    table_p: &CountTable,
    cfg: &UncertaintyConfig,
) -> Result<Vec<f64>, IngestError> {
    let b = cfg.bootstrap_samples;
    if b < MIN_BOOTSTRAP_SAMPLES {
        return Err(IngestError::TooFewBootstrapSamples(b));
    }
    if table_x.total() == 0 || table_p.total() == 0 {
        return Err(IngestError::ZeroTotalCounts);
    }
    let replicas: Vec<Vec<f64>> = (0..b)
        .into_par_iter()
        .map(|r| {
            let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
            rng.set_stream(r as u64);
            let tx = resample(table_x, &mut rng);
            let tp = resample(table_p, &mut rng);
            report_values(&tx, &tp)
        })
        .collect::<Result<_, _>>()?;
    let k = replicas[0].len();
    let nb = b as f64;
    Ok((0..k)
        .map(|i| {
            let mean = replicas.iter().map(|v| v[i]).sum::<f64>() / nb;
            let ss: f64 = replicas.iter().map(|v| (v[i] - mean).powi(2)).sum();
            (ss / (nb - 1.0)).sqrt()
        })
        .collect())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::ingest::{TableMeta, Variable};
    use ndarray::array;

    fn pair(scale: u64) -> (CountTable, CountTable) {
        let x = array![
            [40, 10, 2, 0],
            [9, 50, 12, 1],
            [1, 11, 47, 8],
            [0, 2, 9, 38]
        ];
        let p = array![
            [3, 9, 20, 8],
            [10, 30, 35, 9],
            [8, 33, 28, 11],
            [6, 7, 12, 2]
        ];
        (
            CountTable::new(TableMeta::new(Variable::X, 0.1, 1.0), x * scale).unwrap(),
            CountTable::new(TableMeta::new(Variable::P, 0.2, 2.0), p * scale).unwrap(),
        )
    }

    /// Central finite differences of the report values with respect to each
    /// count, combined with `Var(C) = C`.
    fn numeric(tx: &CountTable, tp: &CountTable) -> Vec<f64> {
        let base = report_values(tx, tp).unwrap();
        let mut var = vec![0.0; base.len()];
        let eps = 1e-4;
        for which in 0..2 {
            let t = if which == 0 { tx } else { tp };
            let w = t.counts.mapv(|c| c as f64);
            for ((i, j), &c) in w.indexed_iter() {
                if c == 0.0 {
                    continue;
                }
                let eval = |delta: f64| {
                    let mut m = w.clone();
                    m[(i, j)] += delta;
                    let d = super::super::physical_distribution(&t.meta, &m).unwrap();
                    let (dx, dp) = if which == 0 {
                        (d, tp.to_physical_distribution().unwrap())
                    } else {
                        (tx.to_physical_distribution().unwrap(), d)
                    };
                    full_report(&dx, &dp)
                        .iter()
                        .map(|r| r.value)
                        .collect::<Vec<_>>()
                };
                let (up, down) = (eval(eps), eval(-eps));
                for k in 0..var.len() {
                    let g = (up[k] - down[k]) / (2.0 * eps);
                    var[k] += c * g * g;
                }
            }
        }
        var.into_iter().map(f64::sqrt).collect()
    }

    #[test]
    fn analytic_matches_finite_differences() {
        let (tx, tp) = pair(1);
        let a = analytic_uncertainties(&tx, &tp).unwrap();
        let f = numeric(&tx, &tp);
        for (k, (x, y)) in a.iter().zip(&f).enumerate() {
            assert!(
                (x - y).abs() <= 1e-6 * y.max(1e-3),
                "report {k}: {x} vs {y}"
            );
        }
    }

    #[test]
    fn bootstrap_is_reproducible_and_close_to_analytic() {
        let (tx, tp) = pair(20);
        let cfg = UncertaintyConfig::bootstrap(400, 7);
        let b1 = bootstrap_uncertainties(&tx, &tp, &cfg).unwrap();
        let b2 = bootstrap_uncertainties(&tx, &tp, &cfg).unwrap();
        assert_eq!(b1, b2);
        let a = analytic_uncertainties(&tx, &tp).unwrap();
        for (x, y) in a.iter().zip(&b1) {
            assert!((x - y).abs() < 0.3 * x, "{x} vs {y}");
        }
    }

    #[test]
    fn rejects_small_bootstrap() {
        let (tx, tp) = pair(1);
        assert!(matches!(
            bootstrap_uncertainties(&tx, &tp, &UncertaintyConfig::bootstrap(10, 0)),
            Err(IngestError::TooFewBootstrapSamples(10))
        ));
    }
}
