//! Affine-invariant properties, distance oracles, the oblivious estimator,
//! blow-ups, degree truncation, and convergence experiments.

use std::collections::BTreeSet;
use std::fmt;
use std::sync::Arc;

use num_complex::Complex64;
use rayon::prelude::*;

use crate::error::{Budget, Error, Result};
use crate::field::{AffineMap, Field};
use crate::function::DenseFunction;
use crate::gowers::combinations;
use crate::poly::{classical_polynomials, sequence_rank, FactoredPolynomial, NonClassicalPoly, Rank};
use crate::sampling::{draw_all, stream_rng, McEstimate};
use crate::upsilon::{t_profile, upsilon_cross, Search, TProfile};

/// Outcome of a membership query.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Membership {
    Member,
    NonMember,
    /// No ground truth is available at this size.
    Unknown,
}

type MembershipFn = dyn Fn(&DenseFunction, Budget) -> Result<Membership> + Send + Sync;
type EnumeratorFn = dyn Fn(Field, usize, Budget) -> Result<Vec<DenseFunction>> + Send + Sync;
type ParameterFn = dyn Fn(&DenseFunction) -> Result<f64> + Send + Sync;

/// A property of `{0,1}`-valued functions on `F_p^n`, for every `n`.
#[derive(Clone)]
pub struct Property {
    name: String,
    membership: Arc<MembershipFn>,
    enumerator: Option<Arc<EnumeratorFn>>,
    blow_up_closed: bool,
}

impl fmt::Debug for Property {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("Property")
            .field("name", &self.name)
            .field("enumerable", &self.enumerator.is_some())
            .field("blow_up_closed", &self.blow_up_closed)
            .finish()
    }
}

impl Property {
    pub fn new(
        name: impl Into<String>,
        membership: impl Fn(&DenseFunction, Budget) -> Result<Membership> + Send + Sync + 'static,
        enumerator: Option<Arc<EnumeratorFn>>,
        blow_up_closed: bool,
    ) -> Self {
        Property {
            name: name.into(),
            membership: Arc::new(membership),
            enumerator,
            blow_up_closed,
        }
    }

    /// A property given only by its enumerator; membership is looked up in
    /// the enumerated set, or `Unknown` when enumeration is out of budget.
    pub fn from_enumerator(
        name: impl Into<String>,
        enumerator: impl Fn(Field, usize, Budget) -> Result<Vec<DenseFunction>> + Send + Sync + 'static,
        blow_up_closed: bool,
    ) -> Self {
        let enumerator: Arc<EnumeratorFn> = Arc::new(enumerator);
        let lookup = enumerator.clone();
        Property {
            name: name.into(),
            membership: Arc::new(move |f, budget| match lookup(f.field(), f.n(), budget) {
                Ok(members) => Ok(if members.iter().any(|g| g.values() == f.values()) {
                    Membership::Member
                } else {
                    Membership::NonMember
                }),
                Err(Error::BudgetExceeded { .. }) | Err(Error::NoEnumerator(_)) => Ok(Membership::Unknown),
                Err(e) => Err(e),
            }),
            enumerator: Some(enumerator),
            blow_up_closed,
        }
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    pub fn blow_up_closed(&self) -> bool {
        self.blow_up_closed
    }

    pub fn has_enumerator(&self) -> bool {
        self.enumerator.is_some()
    }

    pub fn membership(&self, f: &DenseFunction, budget: Budget) -> Result<Membership> {
        (self.membership)(f, budget)
    }

    /// All members on `F_p^n`, in a fixed order without repeats.
    pub fn members(&self, field: Field, n: usize, budget: Budget) -> Result<Vec<DenseFunction>> {
        let e = self
            .enumerator
            .as_ref()
            .ok_or_else(|| Error::NoEnumerator(self.name.clone()))?;
        e(field, n, budget)
    }
}

fn dedupe(functions: Vec<DenseFunction>) -> Vec<DenseFunction> {
    let mut seen = BTreeSet::new();
    functions
        .into_iter()
        .filter(|f| seen.insert(f.bits().expect("members are {0,1}-valued")))
        .collect()
}

/// Every `{0,1}` function on `F_p^n`, in order of its table read as a base-2
/// number with point 0 least significant.
pub fn all_boolean_functions(field: Field, n: usize, budget: Budget) -> Result<Vec<DenseFunction>> {
    let size = field.size(n)?;
    if size >= 64 {
        return Err(Error::BudgetExceeded {
            what: "boolean function enumeration".into(),
            required: u128::MAX,
            budget: budget.0,
        });
    }
    let count = 1u128 << size;
    budget.check("boolean function enumeration", count.saturating_mul(size as u128))?;
    (0..count as u64)
        .map(|mask| {
            let bits: Vec<bool> = (0..size).map(|i| (mask >> i) & 1 == 1).collect();
            DenseFunction::from_bits(field, n, &bits)
        })
        .collect()
}

/// The two constant functions.
pub fn constant_property() -> Property {
    Property::from_enumerator(
        "constant",
        |field, n, _| {
            let size = field.size(n)?;
            Ok(vec![
                DenseFunction::from_bits(field, n, &vec![false; size])?,
                DenseFunction::from_bits(field, n, &vec![true; size])?,
            ])
        },
        true,
    )
}

/// The zero function and the indicator of every affine subspace, enumerated
/// from reduced row-echelon bases and coset representatives that vanish on
/// the pivot columns.
pub fn affine_subspace_indicators(field: Field, n: usize, budget: Budget) -> Result<Vec<DenseFunction>> {
    let size = field.size(n)?;
    let p = field.p();
    let mut out = vec![DenseFunction::from_bits(field, n, &vec![false; size])?];
    let mut work: u128 = 0;
    for k in 0..=n {
        for pivots in combinations(n, k) {
            // Free entries: row i, non-pivot columns to the right of its pivot.
            let free: Vec<(usize, usize)> = (0..k)
                .flat_map(|i| {
                    let pivots = &pivots;
                    (pivots[i] + 1..n).filter(move |c| !pivots.contains(c)).map(move |c| (i, c))
                })
                .collect();
            let non_pivot: Vec<usize> = (0..n).filter(|c| !pivots.contains(c)).collect();
            let bases = (p as u128).pow(free.len() as u32);
            let cosets = (p as u128).pow(non_pivot.len() as u32);
            work = work.saturating_add(bases.saturating_mul(cosets).saturating_mul(size as u128));
            budget.check("affine subspace enumeration", work)?;
            for b in 0..bases as usize {
                let digits = field.coords_of(b, free.len());
                let mut rows = vec![vec![0u32; n]; k];
                for (i, &pc) in pivots.iter().enumerate() {
                    rows[i][pc] = 1;
                }
                for (&(i, c), &v) in free.iter().zip(&digits) {
                    rows[i][c] = v;
                }
                let span: Vec<Vec<u32>> = (0..field.count(k) as usize)
                    .map(|t| {
                        let coeffs = field.coords_of(t, k);
                        let mut v = vec![0u32; n];
                        for (row, &a) in rows.iter().zip(&coeffs) {
                            for (vi, &r) in v.iter_mut().zip(row) {
                                *vi = field.add(*vi, field.mul(a, r));
                            }
                        }
                        v
                    })
                    .collect();
                for t in 0..cosets as usize {
                    let digits = field.coords_of(t, non_pivot.len());
                    let mut shift = vec![0u32; n];
                    for (&c, &v) in non_pivot.iter().zip(&digits) {
                        shift[c] = v;
                    }
                    let mut bits = vec![false; size];
                    for v in &span {
                        let pt: Vec<u32> = v.iter().zip(&shift).map(|(&a, &b)| field.add(a, b)).collect();
                        bits[field.index_of(&pt)] = true;
                    }
                    out.push(DenseFunction::from_bits(field, n, &bits)?);
                }
            }
        }
    }
    Ok(out)
}

const BRUTE_FORCE_POINTS: usize = 16;

/// Functions with spectral norm `Σ_α |f̂(α)| <= threshold`.
///
/// Members are enumerated by brute force when `p^n <= 16`, and for
/// `threshold < 2` through the zero function and affine subspace
/// indicators: a `{0,1}` function with spectral norm below 2 is one of
/// those.
pub fn spectral_norm_property(threshold: f64) -> Property {
    let enumerator: Arc<EnumeratorFn> = Arc::new(move |field, n, budget| {
        let size = field.size(n)?;
        let candidates = if size <= BRUTE_FORCE_POINTS {
            all_boolean_functions(field, n, budget)?
        } else if threshold < 2.0 {
            affine_subspace_indicators(field, n, budget)?
        } else {
            return Err(Error::NoEnumerator(format!(
                "spectral:{threshold} on F_{}^{n}",
                field.p()
            )));
        };
        Ok(candidates
            .into_iter()
            .filter(|f| f.spectral_norm() <= threshold + 1e-9)
            .collect())
    });
    Property::new(
        format!("spectral:{threshold}"),
        move |f, _| {
            Ok(if f.is_boolean() && f.spectral_norm() <= threshold + 1e-9 {
                Membership::Member
            } else {
                Membership::NonMember
            })
        },
        Some(enumerator),
        true,
    )
}

/// Functions `Γ(P_1(x), ..., P_c(x))` with `P_i` classical of degree at most
/// `degrees[i]` (constants allowed) and `rank(P_1, ..., P_c) >= rank`.
/// `gamma` is indexed by `(v_1, ..., v_c)` in base `p`, `v_1` least
/// significant. Ranks are classical-restricted.
pub fn degree_structural_property(field: Field, degrees: Vec<usize>, rank: usize, gamma: Vec<u8>) -> Result<Property> {
    let c = degrees.len();
    let expected = field.count(c);
    if gamma.len() as u128 != expected || gamma.iter().any(|&g| g > 1) {
        return Err(Error::InvalidArgument(format!(
            "Γ table needs {expected} entries in {{0,1}}, got {}",
            gamma.len()
        )));
    }
    let name = format!(
        "structured:{}:{rank}:{}",
        degrees.iter().map(usize::to_string).collect::<Vec<_>>().join(","),
        gamma.iter().map(u8::to_string).collect::<String>()
    );
    let gamma = Arc::new(gamma);
    Ok(Property::from_enumerator(
        name,
        move |f_field, n, budget| {
            if f_field != field {
                return Err(Error::DimensionMismatch("property defined over a different field".into()));
            }
            structured_members(field, n, &degrees, rank, &gamma, budget)
        },
        true,
    ))
}

fn structured_members(
    field: Field,
    n: usize,
    degrees: &[usize],
    rank: usize,
    gamma: &[u8],
    budget: Budget,
) -> Result<Vec<DenseFunction>> {
    let p = field.p();
    // Slot options: (polynomial or none, shift).
    let mut slots: Vec<Vec<(Option<NonClassicalPoly>, u32)>> = Vec::new();
    let mut total: u128 = 1;
    for &d in degrees {
        let polys = classical_polynomials(field, n, d, budget)?;
        let options: Vec<(Option<NonClassicalPoly>, u32)> = std::iter::once(None)
            .chain(polys.into_iter().map(Some))
            .flat_map(|q| (0..p).map(move |s| (q.clone(), s)))
            .collect();
        total = total.saturating_mul(options.len() as u128);
        slots.push(options);
    }
    budget.check("structured property enumeration", total.saturating_mul(field.count(n)))?;
    let size = field.size(n)?;
    let tables: Vec<Vec<Vec<u32>>> = slots
        .iter()
        .map(|opts| {
            opts.iter()
                .map(|(q, s)| match q {
                    None => Ok(vec![*s; size]),
                    Some(q) => Ok(q
                        .table()?
                        .numerators()
                        .iter()
                        .map(|&v| field.add(v as u32, *s))
                        .collect()),
                })
                .collect::<Result<Vec<_>>>()
        })
        .collect::<Result<_>>()?;
    let tuples: Vec<Vec<usize>> = (0..total as usize)
        .map(|mut t| {
            slots
                .iter()
                .map(|opts| {
                    let i = t % opts.len();
                    t /= opts.len();
                    i
                })
                .collect()
        })
        .collect();
    let results: Vec<Option<DenseFunction>> = tuples
        .par_iter()
        .map(|tuple| {
            if rank > 0 {
                let mut polys = Vec::new();
                for (slot, &i) in tuple.iter().enumerate() {
                    match &slots[slot][i].0 {
                        // A constant member of the sequence has rank 0.
                        None => return Ok(None),
                        Some(q) => polys.push(q.clone()),
                    }
                }
                let r = sequence_rank(&polys, rank - 1, budget)?.0.rank;
                if matches!(r, Rank::Finite(_)) {
                    return Ok(None);
                }
            }
            let bits: Vec<bool> = (0..size)
                .map(|x| {
                    let values: Vec<u32> = tuple.iter().enumerate().map(|(slot, &i)| tables[slot][i][x]).collect();
                    gamma[field.index_of(&values)] == 1
                })
                .collect();
            Ok(Some(DenseFunction::from_bits(field, n, &bits)?))
        })
        .collect::<Result<_>>()?;
    Ok(dedupe(results.into_iter().flatten().collect()))
}

/// Parses `constant`, `spectral:<s>` or `structured:<d_1,...,d_c>:<r>:<Γ>`
/// with `Γ` a string of `p^c` binary digits.
pub fn parse_property(field: Field, spec: &str) -> Result<Property> {
    let parts: Vec<&str> = spec.split(':').collect();
    match parts.as_slice() {
        ["constant"] => Ok(constant_property()),
        ["spectral", s] => {
            let s: f64 = s.parse().map_err(|_| Error::Parse(format!("bad spectral threshold `{s}`")))?;
            Ok(spectral_norm_property(s))
        }
        ["structured", degrees, r, gamma] => {
            let degrees = degrees
                .split(',')
                .map(|d| d.trim().parse::<usize>().map_err(|_| Error::Parse(format!("bad degree `{d}`"))))
                .collect::<Result<Vec<_>>>()?;
            let r: usize = r.parse().map_err(|_| Error::Parse(format!("bad rank `{r}`")))?;
            let gamma = gamma
                .chars()
                .map(|ch| match ch {
                    '0' => Ok(0),
                    '1' => Ok(1),
                    _ => Err(Error::Parse(format!("Γ digit `{ch}` is not 0 or 1"))),
                })
                .collect::<Result<Vec<u8>>>()?;
            degree_structural_property(field, degrees, r, gamma)
        }
        _ => Err(Error::Parse(format!(
            "unknown property `{spec}`; expected constant, spectral:<s> or structured:<degrees>:<r>:<gamma>"
        ))),
    }
}

/// `min_g ‖f - g‖_1` over members `g`, with the first minimizing member.
pub fn distance_to_property_bruteforce(f: &DenseFunction, property: &Property, budget: Budget) -> Result<(f64, DenseFunction)> {
    let members = property.members(f.field(), f.n(), budget)?;
    distance_to_members(f, &members)
}

fn distance_to_members(f: &DenseFunction, members: &[DenseFunction]) -> Result<(f64, DenseFunction)> {
    let mut best: Option<(f64, &DenseFunction)> = None;
    for g in members {
        let d = f.sub(g)?.l1_norm();
        if best.is_none_or(|(b, _)| d < b) {
            best = Some((d, g));
        }
    }
    best.map(|(d, g)| (d, g.clone()))
        .ok_or_else(|| Error::InvalidArgument("property has no members at this size".into()))
}

/// A parameter evaluated on restrictions to `F_p^k`; values lie in `[0, 1]`.
#[derive(Clone)]
pub struct ParameterOracle {
    name: String,
    k: usize,
    evaluate: Arc<ParameterFn>,
}

impl fmt::Debug for ParameterOracle {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("ParameterOracle").field("name", &self.name).field("k", &self.k).finish()
    }
}

impl ParameterOracle {
    pub fn new(name: impl Into<String>, k: usize, evaluate: impl Fn(&DenseFunction) -> Result<f64> + Send + Sync + 'static) -> Self {
        ParameterOracle {
            name: name.into(),
            k,
            evaluate: Arc::new(evaluate),
        }
    }

    /// `h ↦ E[h]`.
    pub fn mean_value(k: usize) -> Self {
        Self::new("mean", k, |h| Ok(h.mean().re))
    }

    /// `h ↦ ‖h‖_P`, with the members on `F_p^k` enumerated once.
    pub fn distance_to(property: &Property, field: Field, k: usize, budget: Budget) -> Result<Self> {
        let members = Arc::new(property.members(field, k, budget)?);
        Ok(Self::new(format!("distance:{}", property.name()), k, move |h| {
            Ok(distance_to_members(h, &members)?.0)
        }))
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    pub fn k(&self) -> usize {
        self.k
    }

    pub fn evaluate(&self, h: &DenseFunction) -> Result<f64> {
        if h.n() != self.k {
            return Err(Error::DimensionMismatch(format!(
                "oracle expects functions on dimension {}, got {}",
                self.k,
                h.n()
            )));
        }
        Ok((self.evaluate)(h)?.clamp(0.0, 1.0))
    }
}

/// Mean of the oracle over `f∘A` for iid uniform embeddings
/// `A: F_p^k -> F_p^n`.
pub fn oblivious_estimate(f: &DenseFunction, oracle: &ParameterOracle, samples: usize, seed: u64) -> Result<McEstimate> {
    if oracle.k() > f.n() {
        return Err(Error::DimensionMismatch(format!(
            "restriction dimension {} exceeds domain dimension {}",
            oracle.k(),
            f.n()
        )));
    }
    if samples == 0 {
        return Err(Error::InvalidArgument("samples must be >= 1".into()));
    }
    let field = f.field();
    let values = draw_all(samples, seed, |rng| {
        AffineMap::random_embedding(field, oracle.k(), f.n(), rng)
            .and_then(|a| f.compose_affine(&a))
            .and_then(|h| oracle.evaluate(&h))
    });
    let values: Vec<f64> = values.into_iter().collect::<Result<_>>()?;
    Ok(McEstimate::from_real_samples(&values))
}

/// `f∘A` for a uniformly random full-row-rank `A: F_p^{target} -> F_p^n`.
pub fn blow_up(f: &DenseFunction, target_n: usize, seed: u64) -> Result<(DenseFunction, AffineMap)> {
    if target_n < f.n() {
        return Err(Error::DimensionMismatch(format!(
            "blow-up target {target_n} below source dimension {}",
            f.n()
        )));
    }
    let a = AffineMap::random_surjection(f.field(), target_n, f.n(), &mut stream_rng(seed, 0))?;
    Ok((f.compose_affine(&a)?, a))
}

/// `⌈max(d, ln(1/ε) / ln(p/(p-1)))⌉`.
pub fn d_bar(eps: f64, d: usize, p: u32) -> Result<usize> {
    if !(eps > 0.0 && eps < 1.0) {
        return Err(Error::InvalidArgument(format!("ε = {eps} must lie in (0, 1)")));
    }
    if p < 2 {
        return Err(Error::InvalidPrime(p));
    }
    let p = p as f64;
    let bound = (1.0 / eps).ln() / (p / (p - 1.0)).ln();
    Ok((bound.max(d as f64) - 1e-9).ceil() as usize)
}

/// The value a factored polynomial `c · M∘A` is frozen at: `c · M(0)`, the
/// value it takes on the point mapped to the origin.
pub fn frozen_value(q: &FactoredPolynomial) -> u32 {
    if q.degree() == 0 {
        q.eval(&vec![0; q.monomial().len()])
    } else {
        0
    }
}

fn check_structured_inputs(field: Field, n: usize, gamma: &[u8], polys: &[NonClassicalPoly], factored: &[FactoredPolynomial]) -> Result<()> {
    let arity = polys.len() + factored.len();
    if gamma.len() as u128 != field.count(arity) {
        return Err(Error::InvalidArgument(format!("Γ table needs {} entries", field.count(arity))));
    }
    if polys.iter().any(|q| q.field() != field || q.n() != n || !q.is_classical()) {
        return Err(Error::InvalidArgument("structured inputs must be classical polynomials on the domain".into()));
    }
    if factored.iter().any(|q| q.bijection().field() != field || q.monomial().len() != n) {
        return Err(Error::DimensionMismatch("factored polynomial over a different domain".into()));
    }
    Ok(())
}

fn evaluate_structured(
    field: Field,
    n: usize,
    gamma: &[u8],
    polys: &[NonClassicalPoly],
    factored: &[FactoredPolynomial],
    freeze_above: Option<usize>,
) -> Result<DenseFunction> {
    check_structured_inputs(field, n, gamma, polys, factored)?;
    let ptables: Vec<Vec<u64>> = polys
        .iter()
        .map(|q| Ok(q.table()?.numerators().to_vec()))
        .collect::<Result<_>>()?;
    let qtables: Vec<Vec<u32>> = factored
        .iter()
        .map(|q| match freeze_above {
            Some(limit) if q.degree() > limit => Ok(vec![frozen_value(q); field.size(n)?]),
            _ => q.table(),
        })
        .collect::<Result<_>>()?;
    DenseFunction::boolean_from_fn(field, n, |x| {
        let i = field.index_of(x);
        let values: Vec<u32> = ptables
            .iter()
            .map(|t| t[i] as u32)
            .chain(qtables.iter().map(|t| t[i]))
            .collect();
        gamma[field.index_of(&values)] == 1
    })
}

/// `g = Γ(P_1, ..., P_c, Q_1, ..., Q_{c'})`.
pub fn structured_function(
    field: Field,
    n: usize,
    gamma: &[u8],
    polys: &[NonClassicalPoly],
    factored: &[FactoredPolynomial],
) -> Result<DenseFunction> {
    evaluate_structured(field, n, gamma, polys, factored, None)
}

/// `g` with every factored polynomial of degree above `d_bar` frozen at
/// [`frozen_value`].
pub fn truncate_factored(
    field: Field,
    n: usize,
    gamma: &[u8],
    polys: &[NonClassicalPoly],
    factored: &[FactoredPolynomial],
    d_bar: usize,
) -> Result<DenseFunction> {
    evaluate_structured(field, n, gamma, polys, factored, Some(d_bar))
}

/// Blow-ups of `f` to each dimension in `dims` (non-decreasing, at least
/// `f.n()`); element `i` uses stream `i` of `seed`.
pub fn blow_up_sequence(f: &DenseFunction, dims: &[usize], seed: u64) -> Result<Vec<(DenseFunction, AffineMap)>> {
    if dims.windows(2).any(|w| w[1] < w[0]) {
        return Err(Error::InvalidArgument("dimensions must be non-decreasing".into()));
    }
    dims.iter()
        .enumerate()
        .map(|(i, &n)| {
            let a = AffineMap::random_surjection(f.field(), n, f.n(), &mut stream_rng(seed, i as u64))?;
            Ok((f.compose_affine(&a)?, a))
        })
        .collect()
}

/// How `π` is evaluated along a sequence.
#[derive(Debug, Clone)]
pub enum PiMethod {
    BruteForce,
    Oblivious { k: usize, samples: usize, seed: u64 },
}

#[derive(Debug, Clone)]
pub struct ConvergenceReport {
    pub dims: Vec<usize>,
    pub profiles: Vec<TProfile>,
    /// Largest entrywise gap between any profile and the first.
    pub max_profile_diff: f64,
    /// `(d, [υ^d(f_i, f_{i+1})])`, heuristic, in the larger ambient space.
    pub upsilon: Vec<(usize, Vec<f64>)>,
    pub pi: Vec<f64>,
    pub max_pi_gap: f64,
}

#[derive(Debug, Clone)]
pub struct ConvergenceConfig {
    pub vars: usize,
    pub max_forms: usize,
    pub upsilon_degrees: Vec<usize>,
    pub restarts: usize,
    pub seed: u64,
    pub pi: PiMethod,
}

pub fn convergence_report(
    seq: &[DenseFunction],
    property: &Property,
    config: &ConvergenceConfig,
    budget: Budget,
) -> Result<ConvergenceReport> {
    let first = seq.first().ok_or_else(|| Error::InvalidArgument("empty sequence".into()))?;
    let field = first.field();
    let profiles: Vec<TProfile> = seq
        .iter()
        .map(|f| t_profile(f, config.vars, config.max_forms, budget))
        .collect::<Result<_>>()?;
    let max_profile_diff = profiles
        .iter()
        .map(|p| p.max_abs_diff(&profiles[0]))
        .collect::<Result<Vec<_>>>()?
        .into_iter()
        .fold(0.0, f64::max);
    let mut upsilon = Vec::new();
    for &d in &config.upsilon_degrees {
        let values = seq
            .windows(2)
            .enumerate()
            .map(|(i, w)| {
                let ambient = w[0].n().max(w[1].n());
                let search = Search::Heuristic {
                    restarts: config.restarts,
                    seed: config.seed.wrapping_add(i as u64),
                };
                Ok(upsilon_cross(&w[0], &w[1], d, ambient, search, budget)?.value)
            })
            .collect::<Result<Vec<_>>>()?;
        upsilon.push((d, values));
    }
    let pi: Vec<f64> = match &config.pi {
        PiMethod::BruteForce => seq
            .iter()
            .map(|f| Ok(distance_to_property_bruteforce(f, property, budget)?.0))
            .collect::<Result<_>>()?,
        PiMethod::Oblivious { k, samples, seed } => {
            let oracle = ParameterOracle::distance_to(property, field, *k, budget)?;
            seq.iter()
                .map(|f| Ok(oblivious_estimate(f, &oracle, *samples, *seed)?.mean.re))
                .collect::<Result<_>>()?
        }
    };
    let max_pi_gap = pi
        .iter()
        .flat_map(|a| pi.iter().map(move |b| (a - b).abs()))
        .fold(0.0, f64::max);
    Ok(ConvergenceReport {
        dims: seq.iter().map(DenseFunction::n).collect(),
        profiles,
        max_profile_diff,
        upsilon,
        pi,
        max_pi_gap,
    })
}

/// `⌈ln(2/δ) / (2 t^2)⌉` samples give `|mean - E| < t` with probability at
/// least `1 - δ` for `[0, 1]`-valued samples.
pub fn hoeffding_samples(tolerance: f64, failure: f64) -> Result<usize> {
    if tolerance.is_nan() || tolerance <= 0.0 || failure.is_nan() || failure <= 0.0 || failure >= 1.0 {
        return Err(Error::InvalidArgument("tolerance must be positive and failure in (0, 1)".into()));
    }
    Ok(((2.0 / failure).ln() / (2.0 * tolerance * tolerance)).ceil() as usize)
}

/// Result of the distance-estimation tester.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TesterDecision {
    pub accept: bool,
    pub estimate: f64,
    pub samples: usize,
}

/// Accepts iff the oblivious distance estimate is below `ε/2`, with enough
/// samples that the estimate is within `ε/4` with probability `>= 2/3`.
pub fn tester_decision(f: &DenseFunction, oracle: &ParameterOracle, eps: f64, seed: u64) -> Result<TesterDecision> {
    let samples = hoeffding_samples(eps / 4.0, 1.0 / 3.0)?;
    let est = oblivious_estimate(f, oracle, samples, seed)?;
    Ok(TesterDecision {
        accept: est.mean.re < eps / 2.0,
        estimate: est.mean.re,
        samples,
    })
}

/// Constant complex function helper for callers assembling experiments.
pub fn constant_boolean(field: Field, n: usize, value: bool) -> Result<DenseFunction> {
    DenseFunction::constant(field, n, Complex64::new(if value { 1.0 } else { 0.0 }, 0.0))?.into_boolean()
}
