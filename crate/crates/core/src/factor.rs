//! Polynomial factors, conditional expectations and a correlation-driven
//! energy-increment decomposition `f = f1 + f2 + f3`.

use std::collections::HashMap;

use num_complex::Complex64;
use rayon::prelude::*;

use crate::error::{pow_sat, Budget, Error, Result};
use crate::field::Field;
use crate::function::DenseFunction;
use crate::gowers::gowers_norm_exact;
use crate::poly::{classical_polynomials, sequence_rank, NonClassicalPoly, PolyTable, RankResult, TValue};
use crate::sum::pairwise_sum;

/// The partition of `F_p^n` by the joint values of a polynomial sequence.
///
/// Atoms are numbered in order of first appearance along the point index.
#[derive(Debug, Clone)]
pub struct PolyFactor {
    field: Field,
    n: usize,
    polys: Vec<NonClassicalPoly>,
    tables: Vec<PolyTable>,
    atom: Vec<usize>,
    labels: Vec<Vec<TValue>>,
}

impl PolyFactor {
    pub fn new(field: Field, n: usize, polys: Vec<NonClassicalPoly>) -> Result<Self> {
        for q in &polys {
            if q.field() != field || q.n() != n {
                return Err(Error::DimensionMismatch("factor polynomial over a different domain".into()));
            }
        }
        let tables: Vec<PolyTable> = polys.iter().map(NonClassicalPoly::table).collect::<Result<_>>()?;
        let size = field.size(n)?;
        let mut ids: HashMap<Vec<TValue>, usize> = HashMap::new();
        let mut labels = Vec::new();
        let atom = (0..size)
            .map(|x| {
                let label: Vec<TValue> = tables.iter().map(|t| t.value(x)).collect();
                *ids.entry(label.clone()).or_insert_with(|| {
                    labels.push(label);
                    labels.len() - 1
                })
            })
            .collect();
        Ok(PolyFactor {
            field,
            n,
            polys,
            tables,
            atom,
            labels,
        })
    }

    pub fn trivial(field: Field, n: usize) -> Result<Self> {
        Self::new(field, n, vec![])
    }

    /// A factor with one more defining polynomial.
    pub fn refine(&self, poly: NonClassicalPoly) -> Result<Self> {
        let mut polys = self.polys.clone();
        polys.push(poly);
        Self::new(self.field, self.n, polys)
    }

    pub fn polys(&self) -> &[NonClassicalPoly] {
        &self.polys
    }

    pub fn tables(&self) -> &[PolyTable] {
        &self.tables
    }

    /// Number of defining polynomials `|B|`.
    pub fn complexity(&self) -> usize {
        self.polys.len()
    }

    pub fn depths(&self) -> Vec<u32> {
        self.polys.iter().map(NonClassicalPoly::depth).collect()
    }

    /// `‖B‖ = Π p^{h_i + 1}`.
    pub fn order(&self) -> u128 {
        let p = self.field.p() as u64;
        self.depths()
            .iter()
            .fold(1u128, |acc, &h| acc.saturating_mul(pow_sat(p, h as u64 + 1)))
    }

    /// Number of nonempty atoms.
    pub fn atom_count(&self) -> usize {
        self.labels.len()
    }

    pub fn atom_id(&self, x: usize) -> usize {
        self.atom[x]
    }

    pub fn atom_of(&self, x: usize) -> &[TValue] {
        &self.labels[self.atom[x]]
    }

    /// `E[f | B]`: each atom replaced by its mean.
    pub fn conditional_expectation(&self, f: &DenseFunction) -> Result<DenseFunction> {
        if f.field() != self.field || f.n() != self.n {
            return Err(Error::DimensionMismatch("function and factor over different domains".into()));
        }
        let mut sums = vec![Complex64::new(0.0, 0.0); self.labels.len()];
        let mut counts = vec![0usize; self.labels.len()];
        for (x, &a) in self.atom.iter().enumerate() {
            sums[a] += f.value(x);
            counts[a] += 1;
        }
        let means: Vec<Complex64> = sums.iter().zip(&counts).map(|(s, &c)| s / c as f64).collect();
        DenseFunction::from_complex(self.field, self.n, self.atom.iter().map(|&a| means[a]).collect())
    }

    /// Rank of the defining sequence; `Infinite` for the empty factor.
    pub fn factor_rank(&self, max_r: usize, budget: Budget) -> Result<RankResult> {
        if self.polys.is_empty() {
            return Ok(RankResult {
                rank: crate::poly::Rank::Infinite,
                witness: vec![],
            });
        }
        Ok(sequence_rank(&self.polys, max_r, budget)?.0)
    }
}

/// One accepted refinement step.
#[derive(Debug, Clone)]
pub struct IterationRecord {
    pub poly: NonClassicalPoly,
    /// `|⟨f3, e(P)⟩|` before the step.
    pub correlation: f64,
    /// `‖E[f|B]‖_2^2` after the step.
    pub energy: f64,
}

#[derive(Debug, Clone)]
pub struct Decomposition {
    pub f1: DenseFunction,
    pub f2: DenseFunction,
    pub f3: DenseFunction,
    pub factor: PolyFactor,
    /// Largest `|⟨f3, e(P)⟩|` over the enumerated polynomials at the end.
    pub residual_correlation: f64,
    /// `‖f3‖_{U^{d+1}}`.
    pub measured_u_norm: f64,
    pub iterations: Vec<IterationRecord>,
    /// False when `max_complexity` stopped the loop before the residual
    /// correlation dropped to `η`.
    pub complete: bool,
}

/// Refines a factor greedily: while some classical polynomial `P` of degree
/// `<= d` has `|⟨f - E[f|B], e(P)⟩| > η`, add the first maximizer. Each step
/// raises `‖E[f|B]‖_2^2` by more than `η^2`, so at most `⌈1/η^2⌉` steps run.
pub fn energy_increment_decompose(
    f: &DenseFunction,
    d: usize,
    eta: f64,
    max_complexity: usize,
    budget: Budget,
) -> Result<Decomposition> {
    if !f.is_boolean() {
        return Err(Error::InvalidArgument("decomposition needs a {0,1}-valued function".into()));
    }
    if !(eta > 0.0 && eta < 1.0) {
        return Err(Error::InvalidArgument(format!("η = {eta} must lie in (0, 1)")));
    }
    let field = f.field();
    let n = f.n();
    let candidates = classical_polynomials(field, n, d, budget)?;
    budget.check(
        "decomposition correlation search",
        (candidates.len() as u128).saturating_mul(field.count(n)),
    )?;
    let characters: Vec<DenseFunction> = candidates
        .par_iter()
        .map(NonClassicalPoly::exponential)
        .collect::<Result<_>>()?;
    let max_steps = (1.0 / (eta * eta)).ceil() as usize;

    let mut factor = PolyFactor::trivial(field, n)?;
    let mut iterations = Vec::new();
    loop {
        let f1 = factor.conditional_expectation(f)?;
        let f3 = f.sub(&f1)?;
        let (best, corr) = best_correlation(&f3, &characters)?;
        let done = corr <= eta;
        if done || factor.complexity() >= max_complexity || iterations.len() >= max_steps || best.is_none() {
            let measured_u_norm = gowers_norm_exact(&f3, d + 1, budget)?;
            let f2 = DenseFunction::constant(field, n, Complex64::new(0.0, 0.0))?;
            return Ok(Decomposition {
                f1,
                f2,
                f3,
                factor,
                residual_correlation: corr,
                measured_u_norm,
                iterations,
                complete: done,
            });
        }
        let index = best.expect("checked above");
        factor = factor.refine(candidates[index].clone())?;
        let energy = factor.conditional_expectation(f)?.l2_norm().powi(2);
        iterations.push(IterationRecord {
            poly: candidates[index].clone(),
            correlation: corr,
            energy,
        });
    }
}

/// The largest `|⟨g, χ⟩|` and the first index attaining it (up to 1e-12).
fn best_correlation(g: &DenseFunction, characters: &[DenseFunction]) -> Result<(Option<usize>, f64)> {
    let corrs: Vec<f64> = characters
        .par_iter()
        .map(|c| g.inner(c).map(|v| v.norm()))
        .collect::<Result<_>>()?;
    let max = corrs.iter().copied().fold(0.0, f64::max);
    let first = corrs.iter().position(|&c| c >= max - 1e-12);
    Ok((first, max))
}

/// `‖E[f|B]‖_2^2`.
pub fn factor_energy(f: &DenseFunction, factor: &PolyFactor) -> Result<f64> {
    let g = factor.conditional_expectation(f)?;
    let sq: Vec<f64> = g.values().iter().map(|v| v.norm_sqr()).collect();
    Ok(pairwise_sum(&sq) / sq.len() as f64)
}
