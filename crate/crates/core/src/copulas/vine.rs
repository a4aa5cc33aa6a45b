//! Canonical (C-) vines.
//!
//! With root order `r_0, ..., r_{d-1}`, tree `j` holds the edges
//! `(r_j, r_k | r_0, ..., r_{j-1})` for `k > j`, and the copula on that edge
//! takes the arguments `(F(r_j | ·), F(r_k | ·))` in that order.

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

use super::family::{clamp_unit, PairCopula};
use super::fit::FittedPair;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VineEdge {
    pub tree: usize,
    /// Variable indices `(root, partner)`.
    pub conditioned: (usize, usize),
    pub conditioning: Vec<usize>,
    pub copula: PairCopula,
    /// Fit summary when the edge was estimated from data.
    pub fit: Option<FittedPair>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VineSpec {
    pub dimension: usize,
    pub root_order: Vec<usize>,
    /// `trees[j][k - j - 1]` is the edge between `root_order[j]` and `root_order[k]`.
    pub trees: Vec<Vec<VineEdge>>,
}

fn check_order(dim: usize, root_order: &[usize]) -> Result<()> {
    if !(2..=5).contains(&dim) {
        return Err(Error::domain(format!("vine dimension must be in 2..=5, got {dim}")));
    }
    let mut seen = vec![false; dim];
    if root_order.len() != dim {
        return Err(Error::domain("root order must list every variable once"));
    }
    for &r in root_order {
        if r >= dim || seen[r] {
            return Err(Error::domain(format!("root order {root_order:?} is not a permutation of 0..{dim}")));
        }
        seen[r] = true;
    }
    Ok(())
}

impl VineSpec {
    /// Build from explicit copulas: `copulas[j]` lists tree `j`'s edges in
    /// partner order.
    pub fn from_copulas(root_order: Vec<usize>, copulas: Vec<Vec<PairCopula>>) -> Result<VineSpec> {
        let d = root_order.len();
        check_order(d, &root_order)?;
        if copulas.len() != d - 1 || copulas.iter().enumerate().any(|(j, t)| t.len() != d - 1 - j) {
            return Err(Error::domain("tree j must have d - 1 - j edges"));
        }
        let trees = copulas
            .into_iter()
            .enumerate()
            .map(|(j, t)| {
                t.into_iter()
                    .enumerate()
                    .map(|(i, c)| VineEdge {
                        tree: j,
                        conditioned: (root_order[j], root_order[j + 1 + i]),
                        conditioning: root_order[..j].to_vec(),
                        copula: c,
                        fit: None,
                    })
                    .collect()
            })
            .collect();
        Ok(VineSpec { dimension: d, root_order, trees })
    }

    pub fn independence(root_order: Vec<usize>) -> Result<VineSpec> {
        let d = root_order.len();
        let cops = (0..d.saturating_sub(1)).map(|j| vec![PairCopula::independence(); d - 1 - j]).collect();
        VineSpec::from_copulas(root_order, cops)
    }

    pub fn edge(&self, j: usize, k: usize) -> &VineEdge {
        &self.trees[j][k - j - 1]
    }

    pub fn n_edges(&self) -> usize {
        self.trees.iter().map(Vec::len).sum()
    }

    pub fn edges(&self) -> impl Iterator<Item = &VineEdge> {
        self.trees.iter().flatten()
    }

    /// All copula parameters, tree by tree.
    pub fn param_vector(&self) -> Vec<f64> {
        self.edges().flat_map(|e| e.copula.params.iter().copied()).collect()
    }

    pub fn param_bounds(&self) -> Vec<(f64, f64)> {
        self.edges().flat_map(|e| e.copula.family.bounds()).collect()
    }

    /// Same structure and families with new parameters.
    pub fn with_params(&self, params: &[f64]) -> Result<VineSpec> {
        if params.len() != self.param_vector().len() {
            return Err(Error::domain("parameter vector length does not match the vine"));
        }
        let mut out = self.clone();
        let mut i = 0;
        for e in out.trees.iter_mut().flatten() {
            let k = e.copula.n_params();
            e.copula.params = params[i..i + k].to_vec();
            e.copula.validate()?;
            e.fit = None;
            i += k;
        }
        Ok(out)
    }

    fn ordered(&self, u: &[f64]) -> Result<Vec<f64>> {
        if u.len() != self.dimension {
            return Err(Error::Index(format!("expected {} coordinates, got {}", self.dimension, u.len())));
        }
        Ok(self.root_order.iter().map(|&r| clamp_unit(u[r])).collect())
    }

    /// Log copula density; `u` is indexed by variable.
    pub fn ln_density(&self, u: &[f64]) -> Result<f64> {
        let mut w = self.ordered(u)?;
        let d = self.dimension;
        let mut total = 0.0;
        for j in 0..d - 1 {
            for k in j + 1..d {
                total += self.edge(j, k).copula.ln_density(w[j], w[k]);
            }
            if j + 2 < d {
                let root = w[j];
                for k in j + 1..d {
                    w[k] = self.edge(j, k).copula.h_given_first(root, w[k]);
                }
            }
        }
        Ok(total)
    }

    pub fn density(&self, u: &[f64]) -> Result<f64> {
        Ok(self.ln_density(u)?.exp())
    }

    /// Conditional CDF and log density (on the copula scale) of `target`
    /// given values of the first `m` variables in root order.
    fn conditional(&self, target: usize, value: f64, conditioning: &[(usize, f64)]) -> Result<(f64, f64)> {
        if target >= self.dimension {
            return Err(Error::Index(format!("target {target} not in a {}-dimensional vine", self.dimension)));
        }
        let m = conditioning.len();
        let prefix = &self.root_order[..m.min(self.dimension)];
        let mut w = Vec::with_capacity(m);
        for &r in prefix {
            match conditioning.iter().find(|c| c.0 == r) {
                Some(&(_, x)) => w.push(clamp_unit(x)),
                None => {
                    return Err(Error::Index(format!(
                        "conditioning set must be the first {m} variables of the root order {:?}",
                        self.root_order
                    )))
                }
            }
        }
        let p = self.root_order.iter().position(|&r| r == target).unwrap();
        if p < m {
            return Err(Error::Index(format!("target {target} is also conditioned on")));
        }
        let mut t = clamp_unit(value);
        let mut ln_d = 0.0;
        for j in 0..m {
            let e = &self.edge(j, p).copula;
            ln_d += e.ln_density(w[j], t);
            t = e.h_given_first(w[j], t);
            let root = w[j];
            for (k, wk) in w.iter_mut().enumerate().skip(j + 1) {
                *wk = self.edge(j, k).copula.h_given_first(root, *wk);
            }
        }
        Ok((t, ln_d))
    }

    /// `F(u_target | u_c)` through nested h-functions. The conditioning
    /// variables must be a prefix of the root order.
    pub fn conditional_cdf(&self, target: usize, value: f64, conditioning: &[(usize, f64)]) -> Result<f64> {
        Ok(self.conditional(target, value, conditioning)?.0)
    }

    /// Conditional copula density `c(u_target | u_c)` (multiply by the target
    /// marginal density for the data scale).
    pub fn conditional_density(&self, target: usize, value: f64, conditioning: &[(usize, f64)]) -> Result<f64> {
        Ok(self.conditional(target, value, conditioning)?.1.exp())
    }

    /// Draw from the vine by sequential inversion; rows are indexed by variable.
    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R, n: usize) -> Vec<Vec<f64>> {
        let d = self.dimension;
        (0..n)
            .map(|_| {
                let w: Vec<f64> = (0..d).map(|_| rng.random_range(1e-12..1.0 - 1e-12)).collect();
                let mut row = vec![0.0; d];
                for k in 0..d {
                    let mut t = w[k];
                    for j in (0..k).rev() {
                        t = self.edge(j, k).copula.h_given_first_inverse(w[j], t);
                    }
                    row[self.root_order[k]] = t;
                }
                row
            })
            .collect()
    }
}

/// Vine copula density (see [`VineSpec::density`]).
pub fn vine_density(v: &VineSpec, u: &[f64]) -> Result<f64> {
    v.density(u)
}

/// See [`VineSpec::conditional_cdf`].
pub fn vine_conditional_cdf(v: &VineSpec, target: usize, value: f64, conditioning: &[(usize, f64)]) -> Result<f64> {
    v.conditional_cdf(target, value, conditioning)
}

/// Fit a C-vine tree by tree: tree 0 on the pseudo-observations, each later
/// tree on the h-transforms of the previous one. `data[i]` is observation `i`
/// indexed by variable.
pub fn build_cvine<F>(data: &[Vec<f64>], root_order: Vec<usize>, pair_fitter: F) -> Result<VineSpec>
where
    F: Fn(&[f64], &[f64]) -> Result<FittedPair>,
{
    let d = root_order.len();
    check_order(d, &root_order)?;
    if data.iter().any(|r| r.len() != d) {
        return Err(Error::domain("every observation must have one value per variable"));
    }
    let mut cols: Vec<Vec<f64>> = root_order.iter().map(|&r| data.iter().map(|row| clamp_unit(row[r])).collect()).collect();
    let mut trees = Vec::with_capacity(d - 1);
    for j in 0..d - 1 {
        for (k, c) in cols.iter().enumerate().skip(j) {
            let first = c[0];
            if c.iter().all(|&x| (x - first).abs() < 1e-12) {
                return Err(Error::degenerate(format!(
                    "tree {}: pseudo-observations of variable {} are constant",
                    j + 1,
                    root_order[k]
                )));
            }
        }
        let mut edges = Vec::with_capacity(d - 1 - j);
        for k in j + 1..d {
            let fitted = pair_fitter(&cols[j], &cols[k]).map_err(|e| match e {
                Error::AllFailed(v) => Error::AllFailed(v.into_iter().map(|s| format!("tree {}: {s}", j + 1)).collect()),
                other => Error::numerical(format!("tree {} edge ({}, {}): {other}", j + 1, root_order[j], root_order[k])),
            })?;
            edges.push(VineEdge {
                tree: j,
                conditioned: (root_order[j], root_order[k]),
                conditioning: root_order[..j].to_vec(),
                copula: fitted.copula.clone(),
                fit: Some(fitted),
            });
        }
        if j + 2 < d {
            let root = cols[j].clone();
            for k in j + 1..d {
                let cop = &edges[k - j - 1].copula;
                cols[k] = root.iter().zip(&cols[k]).map(|(&a, &b)| cop.h_given_first(a, b)).collect();
            }
        }
        trees.push(edges);
    }
    Ok(VineSpec { dimension: d, root_order, trees })
}
