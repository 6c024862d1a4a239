//! The `υ^d` distance, restriction distributions `π_k(f)` and t-profiles.

use std::collections::BTreeMap;

use rand::Rng;
use rayon::prelude::*;

use crate::error::{pow_sat, Budget, Error, Result};
use crate::field::{AffineMap, Field, Matrix};
use crate::function::DenseFunction;
use crate::gowers::{canonical_affine_systems, gowers_norm_exact, t_exact, LinearFormSystem};
use crate::sampling::{draw_all, stream_rng};

/// A `υ^d` value with the bijection `A` attaining `‖f - g∘A‖_{U^d}`.
#[derive(Debug, Clone, PartialEq)]
pub struct UpsilonResult {
    pub value: f64,
    pub witness: AffineMap,
}

fn check_same_domain(f: &DenseFunction, g: &DenseFunction) -> Result<()> {
    if f.field() != g.field() || f.n() != g.n() {
        return Err(Error::DimensionMismatch(format!(
            "functions on F_{}^{} and F_{}^{}",
            f.field().p(),
            f.n(),
            g.field().p(),
            g.n()
        )));
    }
    Ok(())
}

fn distance_under(f: &DenseFunction, g: &DenseFunction, a: &AffineMap, d: usize, budget: Budget) -> Result<f64> {
    gowers_norm_exact(&f.sub(&g.compose_affine(a)?)?, d, budget)
}

/// `min_A ‖f - g∘A‖_{U^d}` over every affine bijection of the domain. Ties go
/// to the identity, then to the first bijection in enumeration order.
pub fn upsilon_exact(f: &DenseFunction, g: &DenseFunction, d: usize, budget: Budget) -> Result<UpsilonResult> {
    check_same_domain(f, g)?;
    let field = f.field();
    let n = f.n();
    let identity = AffineMap::identity(field, n);
    let maps: Vec<AffineMap> = std::iter::once(identity.clone())
        .chain(AffineMap::enumerate_bijections(field, n, budget)?.filter(|a| *a != identity))
        .collect();
    let per_map = pow_sat(field.p() as u64, (n * (d + 1)) as u64);
    budget.check("exact υ search", per_map.saturating_mul(maps.len() as u128))?;
    let values: Vec<f64> = maps
        .par_iter()
        .map(|a| distance_under(f, g, a, d, budget))
        .collect::<Result<_>>()?;
    let (best, value) = values
        .iter()
        .copied()
        .enumerate()
        .fold((0, f64::INFINITY), |acc, (i, v)| if v < acc.1 { (i, v) } else { acc });
    Ok(UpsilonResult {
        value,
        witness: maps[best].clone(),
    })
}

/// Elementary moves around `a`: row transvections `r_i += c r_j`, row swaps,
/// and shift increments, all applied on the output side.
fn neighbours(a: &AffineMap) -> Vec<AffineMap> {
    let field = a.field();
    let p = field.p();
    let n = a.out_dim();
    let m = a.matrix();
    let shift = a.shift();
    let mut out = Vec::new();
    let rebuild = |rows: Vec<Vec<u32>>, shift: Vec<u32>| {
        AffineMap::new(field, Matrix::from_rows(&rows).expect("rows are rectangular"), shift).expect("dimensions agree")
    };
    let rows: Vec<Vec<u32>> = (0..n).map(|r| m.row(r).to_vec()).collect();
    for i in 0..n {
        for j in 0..n {
            if i == j {
                continue;
            }
            for c in 1..p {
                let mut r = rows.clone();
                let mut s = shift.to_vec();
                for col in 0..a.in_dim() {
                    r[i][col] = field.add(r[i][col], field.mul(c, rows[j][col]));
                }
                s[i] = field.add(s[i], field.mul(c, shift[j]));
                out.push(rebuild(r, s));
            }
            if i < j {
                let mut r = rows.clone();
                let mut s = shift.to_vec();
                r.swap(i, j);
                s.swap(i, j);
                out.push(rebuild(r, s));
            }
        }
        for c in 1..p {
            let mut s = shift.to_vec();
            s[i] = field.add(s[i], c);
            out.push(rebuild(rows.clone(), s));
        }
    }
    out
}

const MAX_DESCENT_STEPS: usize = 10_000;

/// Upper bound on `υ^d(f, g)` from restarts plus steepest descent over
/// elementary moves. Restart 0 starts at the identity, restart `r > 0` at a
/// bijection drawn from stream `r` of `seed`, so adding restarts never
/// increases the result.
pub fn upsilon_heuristic(
    f: &DenseFunction,
    g: &DenseFunction,
    d: usize,
    restarts: usize,
    seed: u64,
    budget: Budget,
) -> Result<UpsilonResult> {
    check_same_domain(f, g)?;
    let field = f.field();
    let n = f.n();
    budget.check("υ heuristic evaluation", pow_sat(field.p() as u64, (n * (d + 1)) as u64))?;
    let runs: Vec<UpsilonResult> = (0..restarts.max(1))
        .into_par_iter()
        .map(|r| {
            let mut current = if r == 0 {
                AffineMap::identity(field, n)
            } else {
                AffineMap::random_bijection(field, n, &mut stream_rng(seed, r as u64))
            };
            let mut value = distance_under(f, g, &current, d, budget)?;
            for _ in 0..MAX_DESCENT_STEPS {
                if value == 0.0 {
                    break;
                }
                let mut improved = None;
                for cand in neighbours(&current) {
                    let v = distance_under(f, g, &cand, d, budget)?;
                    if v < value - 1e-15 && improved.as_ref().is_none_or(|(_, best)| v < *best) {
                        improved = Some((cand, v));
                    }
                }
                match improved {
                    Some((cand, v)) => {
                        current = cand;
                        value = v;
                    }
                    None => break,
                }
            }
            Ok(UpsilonResult { value, witness: current })
        })
        .collect::<Result<_>>()?;
    Ok(runs
        .into_iter()
        .reduce(|best, r| if r.value < best.value { r } else { best })
        .expect("at least one restart"))
}

/// How a bijection search is carried out.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Search {
    Exact,
    Heuristic { restarts: usize, seed: u64 },
}

/// `υ^d` between `f` on `F_p^n` and `g` on `F_p^m`, both lifted to `F_p^N`
/// through the coordinate projections.
pub fn upsilon_cross(
    f: &DenseFunction,
    g: &DenseFunction,
    d: usize,
    ambient: usize,
    search: Search,
    budget: Budget,
) -> Result<UpsilonResult> {
    if f.field() != g.field() {
        return Err(Error::DimensionMismatch("functions over different fields".into()));
    }
    if ambient < f.n().max(g.n()) {
        return Err(Error::DimensionMismatch(format!(
            "ambient dimension {ambient} below input dimensions {} and {}",
            f.n(),
            g.n()
        )));
    }
    let field = f.field();
    let lift = |h: &DenseFunction| h.compose_affine(&AffineMap::canonical_projection(field, ambient, h.n())?);
    let (big_f, big_g) = (lift(f)?, lift(g)?);
    match search {
        Search::Exact => upsilon_exact(&big_f, &big_g, d, budget),
        Search::Heuristic { restarts, seed } => upsilon_heuristic(&big_f, &big_g, d, restarts, seed, budget),
    }
}

/// `‖f - (f∘A)∘A⁺‖_{U^d}` for an embedding `A: F_p^k -> F_p^n` and its left
/// inverse `A⁺`. Upper-bounds the distance between `f` and its restriction
/// `f∘A` after both are blown up to a common domain.
pub fn restriction_upper_bound(f: &DenseFunction, a: &AffineMap, d: usize, budget: Budget) -> Result<f64> {
    if !a.is_embedding() {
        return Err(Error::NotEmbedding {
            rank: a.rank(),
            in_dim: a.in_dim(),
        });
    }
    let restricted = f.compose_affine(a)?;
    let back = restricted.compose_affine(&a.left_inverse()?)?;
    gowers_norm_exact(&f.sub(&back)?, d, budget)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum RestrictionMode {
    Exact,
    Empirical { samples: usize, seed: u64 },
}

/// The law of `f∘A` for a uniform affine embedding `A: F_p^k -> F_p^n`,
/// keyed by the restricted function's `{0,1}` table.
#[derive(Debug, Clone, PartialEq)]
pub struct RestrictionDistribution {
    field: Field,
    k: usize,
    support: BTreeMap<Vec<u8>, f64>,
    mode: RestrictionMode,
}

impl RestrictionDistribution {
    fn from_counts(field: Field, k: usize, counts: BTreeMap<Vec<u8>, u64>, mode: RestrictionMode) -> Self {
        let total: u64 = counts.values().sum();
        let support = counts.into_iter().map(|(key, c)| (key, c as f64 / total as f64)).collect();
        RestrictionDistribution { field, k, support, mode }
    }

    pub fn k(&self) -> usize {
        self.k
    }

    pub fn field(&self) -> Field {
        self.field
    }

    pub fn mode(&self) -> RestrictionMode {
        self.mode
    }

    pub fn support(&self) -> &BTreeMap<Vec<u8>, f64> {
        &self.support
    }

    pub fn probability(&self, h: &DenseFunction) -> f64 {
        h.bits().and_then(|b| self.support.get(&b).copied()).unwrap_or(0.0)
    }

    /// Support functions with their probabilities.
    pub fn entries(&self) -> Vec<(DenseFunction, f64)> {
        self.support
            .iter()
            .map(|(bits, &pr)| {
                let b: Vec<bool> = bits.iter().map(|&v| v == 1).collect();
                (
                    DenseFunction::from_bits(self.field, self.k, &b).expect("support tables have the right size"),
                    pr,
                )
            })
            .collect()
    }
}

fn boolean_bits(f: &DenseFunction) -> Result<Vec<u8>> {
    f.bits()
        .ok_or_else(|| Error::InvalidArgument("restriction distributions need a {0,1}-valued function".into()))
}

fn restrict_bits(bits: &[u8], a: &AffineMap) -> Result<Vec<u8>> {
    Ok(a.image_table()?.into_iter().map(|y| bits[y]).collect())
}

pub fn restriction_distribution(
    f: &DenseFunction,
    k: usize,
    mode: RestrictionMode,
    budget: Budget,
) -> Result<RestrictionDistribution> {
    let bits = boolean_bits(f)?;
    let field = f.field();
    if k > f.n() {
        return Err(Error::DimensionMismatch(format!("cannot restrict F_p^{} to dimension {k}", f.n())));
    }
    let mut counts: BTreeMap<Vec<u8>, u64> = BTreeMap::new();
    match mode {
        RestrictionMode::Exact => {
            let maps: Vec<AffineMap> = AffineMap::enumerate_embeddings(field, k, f.n(), budget)?.collect();
            let keys: Vec<Vec<u8>> = maps
                .par_iter()
                .map(|a| restrict_bits(&bits, a))
                .collect::<Result<_>>()?;
            for key in keys {
                *counts.entry(key).or_default() += 1;
            }
        }
        RestrictionMode::Empirical { samples, seed } => {
            if samples == 0 {
                return Err(Error::InvalidArgument("samples must be >= 1".into()));
            }
            let keys = draw_all(samples, seed, |rng| {
                let a = AffineMap::random_embedding(field, k, f.n(), rng).expect("k <= n checked above");
                restrict_bits(&bits, &a).expect("embedding lands in the domain")
            });
            for key in keys {
                *counts.entry(key).or_default() += 1;
            }
        }
    }
    Ok(RestrictionDistribution::from_counts(field, k, counts, mode))
}

/// Empirical restriction laws of `f` and of its blow-up `f∘A`
/// (`A: F_p^N -> F_p^n` surjective) from common random numbers: each sample
/// draws an embedding `B` into `F_p^N`, restricts `f∘A` along `B`, and
/// restricts `f` along `A∘B` when that is an embedding, else along a fresh
/// uniform embedding. Both marginals are exact; only the coupling is shared.
pub fn coupled_blow_up_restrictions(
    f: &DenseFunction,
    a: &AffineMap,
    k: usize,
    samples: usize,
    seed: u64,
) -> Result<(RestrictionDistribution, RestrictionDistribution)> {
    let bits = boolean_bits(f)?;
    let field = f.field();
    if !a.is_surjection() || a.out_dim() != f.n() || a.field() != field {
        return Err(Error::InvalidArgument("blow-up map must be a surjection onto the function's domain".into()));
    }
    if k > f.n() {
        return Err(Error::DimensionMismatch(format!("cannot restrict F_p^{} to dimension {k}", f.n())));
    }
    if samples == 0 {
        return Err(Error::InvalidArgument("samples must be >= 1".into()));
    }
    let big = a.in_dim();
    let pairs = draw_all(samples, seed, |rng| {
        let b = AffineMap::random_embedding(field, k, big, rng).expect("k <= n <= N");
        let c = a.compose(&b).expect("dimensions agree");
        let g_key = restrict_bits(&bits, &c).expect("dimensions agree");
        let f_map = if c.is_embedding() {
            c
        } else {
            AffineMap::random_embedding(field, k, f.n(), rng).expect("k <= n")
        };
        (restrict_bits(&bits, &f_map).expect("dimensions agree"), g_key)
    });
    let mut f_counts: BTreeMap<Vec<u8>, u64> = BTreeMap::new();
    let mut g_counts: BTreeMap<Vec<u8>, u64> = BTreeMap::new();
    for (fk, gk) in pairs {
        *f_counts.entry(fk).or_default() += 1;
        *g_counts.entry(gk).or_default() += 1;
    }
    let mode = RestrictionMode::Empirical { samples, seed };
    Ok((
        RestrictionDistribution::from_counts(field, k, f_counts, mode),
        RestrictionDistribution::from_counts(field, k, g_counts, mode),
    ))
}

/// `½ Σ |p_1 - p_2|` over the union of supports.
pub fn statistical_distance(a: &RestrictionDistribution, b: &RestrictionDistribution) -> Result<f64> {
    if a.k != b.k || a.field != b.field {
        return Err(Error::DimensionMismatch(format!(
            "restriction dimensions {} and {} differ",
            a.k, b.k
        )));
    }
    let mut total = 0.0;
    for (key, &pa) in &a.support {
        total += (pa - b.support.get(key).copied().unwrap_or(0.0)).abs();
    }
    for (key, &pb) in &b.support {
        if !a.support.contains_key(key) {
            total += pb;
        }
    }
    Ok((total / 2.0).min(1.0))
}

/// Exact `t_L(f)` for every canonical affine system with at most `max_forms`
/// forms in at most `vars` variables.
#[derive(Debug, Clone, PartialEq)]
pub struct TProfile {
    pub vars: usize,
    pub max_forms: usize,
    pub entries: BTreeMap<LinearFormSystem, num_complex::Complex64>,
}

impl TProfile {
    /// Largest entrywise difference; errors when the system sets differ.
    pub fn max_abs_diff(&self, other: &TProfile) -> Result<f64> {
        if self.entries.len() != other.entries.len() || self.entries.keys().ne(other.entries.keys()) {
            return Err(Error::DimensionMismatch("profiles cover different systems".into()));
        }
        Ok(self
            .entries
            .iter()
            .zip(other.entries.values())
            .map(|((_, a), b)| (a - b).norm())
            .fold(0.0, f64::max))
    }
}

pub fn t_profile(f: &DenseFunction, vars: usize, max_forms: usize, budget: Budget) -> Result<TProfile> {
    let systems = canonical_affine_systems(f.field(), vars, max_forms, budget)?;
    budget.check(
        "t-profile",
        pow_sat(f.field().p() as u64, (f.n() * vars) as u64).saturating_mul(systems.len() as u128),
    )?;
    let values: Vec<num_complex::Complex64> = systems.iter().map(|l| t_exact(f, l, budget)).collect::<Result<_>>()?;
    Ok(TProfile {
        vars,
        max_forms,
        entries: systems.into_iter().zip(values).collect(),
    })
}

/// Mean of `restriction_upper_bound` over `trials` random embeddings.
pub fn mean_restriction_upper_bound(
    f: &DenseFunction,
    k: usize,
    d: usize,
    trials: usize,
    seed: u64,
    budget: Budget,
) -> Result<f64> {
    let field = f.field();
    let maps = draw_all(trials, seed, |rng| AffineMap::random_embedding(field, k, f.n(), rng));
    let values: Vec<f64> = maps
        .into_par_iter()
        .map(|a| restriction_upper_bound(f, &a?, d, budget))
        .collect::<Result<_>>()?;
    Ok(values.iter().sum::<f64>() / values.len().max(1) as f64)
}

/// Draws a uniform `{0,1}` function; shared by tests and experiments.
pub fn random_boolean<R: Rng + ?Sized>(field: Field, n: usize, rng: &mut R) -> Result<DenseFunction> {
    DenseFunction::boolean_from_fn(field, n, |_| rng.random_bool(0.5))
}
