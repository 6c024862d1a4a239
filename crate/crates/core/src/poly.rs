//! Non-classical polynomials `F_p^n -> T` in the monomial representation
//! `Σ c |x_1|^{d_1} ··· |x_n|^{d_n} / p^{h+1} mod 1`, their tables, degree
//! checks, exponentials, ranks, and factored polynomials `M ∘ A`.

use std::collections::{BTreeMap, HashMap};
use std::fmt;
use std::hash::{Hash, Hasher};

use num_complex::Complex64;
use rand::Rng;
use rayon::prelude::*;

use crate::error::{pow_sat, Budget, Error, Result};
use crate::field::{AffineMap, Field};
use crate::function::{e_p, DenseFunction};
use crate::gowers::combinations;
use crate::sampling::draw_all;

/// Largest supported `p^level`; keeps products of two numerators in `u128`.
const MAX_MODULUS: u128 = 1 << 62;

/// An element `numerator / p^level mod 1` of `U_level ⊂ T`.
///
/// Equality and hashing use the reduced fraction, so `2/4 == 1/2`.
#[derive(Debug, Clone, Copy)]
pub struct TValue {
    p: u32,
    numerator: u64,
    level: u32,
}

#[allow(clippy::should_implement_trait)]
impl TValue {
    pub fn new(p: u32, numerator: u64, level: u32) -> Self {
        let modulus = pow_sat(p as u64, level as u64) as u64;
        TValue {
            p,
            numerator: numerator % modulus,
            level,
        }
    }

    pub fn zero(p: u32) -> Self {
        TValue { p, numerator: 0, level: 0 }
    }

    pub fn numerator(self) -> u64 {
        self.numerator
    }

    pub fn level(self) -> u32 {
        self.level
    }

    pub fn reduced(self) -> Self {
        let mut v = self;
        while v.level > 0 && v.numerator.is_multiple_of(v.p as u64) {
            v.numerator /= v.p as u64;
            v.level -= 1;
        }
        v
    }

    /// Same value written over `p^level` (requires `level >= self.level`).
    pub fn at_level(self, level: u32) -> Self {
        debug_assert!(level >= self.level);
        let scale = pow_sat(self.p as u64, (level - self.level) as u64) as u64;
        TValue {
            p: self.p,
            numerator: self.numerator * scale,
            level,
        }
    }

    pub fn add(self, other: TValue) -> Self {
        let level = self.level.max(other.level);
        let (a, b) = (self.at_level(level), other.at_level(level));
        TValue::new(self.p, a.numerator + b.numerator, level)
    }

    pub fn neg(self) -> Self {
        let modulus = pow_sat(self.p as u64, self.level as u64) as u64;
        TValue::new(self.p, modulus - self.numerator, self.level)
    }

    pub fn sub(self, other: TValue) -> Self {
        self.add(other.neg())
    }

    pub fn is_zero(self) -> bool {
        self.numerator == 0
    }

    /// Representative in `[0, 1)`.
    pub fn to_f64(self) -> f64 {
        self.numerator as f64 / pow_sat(self.p as u64, self.level as u64) as f64
    }

    /// `e(x) = exp(2πi x)`.
    pub fn exp(self) -> Complex64 {
        let r = self.reduced();
        if r.level <= 1 {
            return e_p(r.p, r.numerator as u32);
        }
        Complex64::from_polar(1.0, 2.0 * std::f64::consts::PI * r.to_f64())
    }
}

impl PartialEq for TValue {
    fn eq(&self, other: &Self) -> bool {
        let (a, b) = (self.reduced(), other.reduced());
        a.p == b.p && a.numerator == b.numerator && a.level == b.level
    }
}

impl Eq for TValue {}

impl Hash for TValue {
    fn hash<H: Hasher>(&self, state: &mut H) {
        let r = self.reduced();
        (r.p, r.numerator, r.level).hash(state);
    }
}

impl fmt::Display for TValue {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let r = self.reduced();
        if r.numerator == 0 {
            write!(f, "0")
        } else {
            write!(f, "{}/{}", r.numerator, pow_sat(r.p as u64, r.level as u64))
        }
    }
}

/// A `T`-valued function table whose values all lie in `U_level`, stored as
/// numerators over `p^level`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PolyTable {
    field: Field,
    n: usize,
    level: u32,
    numerators: Vec<u64>,
}

/// How `verify_degree` searches for a non-vanishing derivative.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum DegreeCheck {
    Exhaustive,
    Sampled { samples: usize, seed: u64 },
}

impl PolyTable {
    pub fn new(field: Field, n: usize, level: u32, numerators: Vec<u64>) -> Result<Self> {
        let size = field.size(n)?;
        if numerators.len() != size {
            return Err(Error::DimensionMismatch(format!("table has {} entries, expected {size}", numerators.len())));
        }
        let modulus = checked_modulus(field.p(), level)?;
        if numerators.iter().any(|&v| v as u128 >= modulus) {
            return Err(Error::InvalidArgument("table numerator out of range".into()));
        }
        Ok(PolyTable { field, n, level, numerators })
    }

    pub fn field(&self) -> Field {
        self.field
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn level(&self) -> u32 {
        self.level
    }

    pub fn numerators(&self) -> &[u64] {
        &self.numerators
    }

    pub fn value(&self, x: usize) -> TValue {
        TValue::new(self.field.p(), self.numerators[x], self.level)
    }

    pub fn values(&self) -> Vec<TValue> {
        (0..self.numerators.len()).map(|x| self.value(x)).collect()
    }

    fn modulus(&self) -> u64 {
        pow_sat(self.field.p() as u64, self.level as u64) as u64
    }

    /// Smallest `h` with every value in `U_{h+1}`.
    pub fn depth(&self) -> u32 {
        self.numerators
            .iter()
            .map(|&v| TValue::new(self.field.p(), v, self.level).reduced().level)
            .max()
            .unwrap_or(0)
            .saturating_sub(1)
    }

    /// `(D_h P)(x) = P(x + h) - P(x)`.
    pub fn additive_derivative(&self, h: usize) -> PolyTable {
        let m = self.modulus();
        let numerators = (0..self.numerators.len())
            .map(|x| (self.numerators[self.field.add_index(x, h, self.n)] + m - self.numerators[x]) % m)
            .collect();
        PolyTable {
            field: self.field,
            n: self.n,
            level: self.level,
            numerators,
        }
    }

    pub fn is_constant(&self) -> bool {
        self.numerators.windows(2).all(|w| w[0] == w[1])
    }

    /// `P ∘ A` for an affine map `A` into the domain.
    pub fn compose_affine(&self, a: &AffineMap) -> Result<PolyTable> {
        if a.out_dim() != self.n || a.field() != self.field {
            return Err(Error::DimensionMismatch("map does not land in the table's domain".into()));
        }
        let numerators = a.image_table()?.into_iter().map(|y| self.numerators[y]).collect();
        Ok(PolyTable {
            field: self.field,
            n: a.in_dim(),
            level: self.level,
            numerators,
        })
    }

    /// Whether every `(d+1)`-fold additive derivative vanishes.
    pub fn verify_degree(&self, d: usize, mode: DegreeCheck, budget: Budget) -> Result<bool> {
        match mode {
            DegreeCheck::Exhaustive => {
                budget.check(
                    "exhaustive degree check",
                    pow_sat(self.field.p() as u64, (self.n * (d + 2)) as u64),
                )?;
                Ok(self.derivatives_vanish(d + 1, 1))
            }
            DegreeCheck::Sampled { samples, seed } => {
                let size = self.numerators.len();
                let m = self.modulus();
                let k = d + 1;
                let violations = draw_all(samples, seed, |rng| {
                    let x = rng.random_range(0..size);
                    let ys: Vec<usize> = (0..k).map(|_| rng.random_range(0..size)).collect();
                    let mut total = 0u64;
                    for mask in 0..1usize << k {
                        let mut pt = x;
                        for (i, &y) in ys.iter().enumerate() {
                            if (mask >> i) & 1 == 1 {
                                pt = self.field.add_index(pt, y, self.n);
                            }
                        }
                        let v = self.numerators[pt];
                        let sign_negative = (k - mask.count_ones() as usize) % 2 == 1;
                        total = if sign_negative { (total + m - v) % m } else { (total + v) % m };
                    }
                    total != 0
                });
                Ok(!violations.into_iter().any(|v| v))
            }
        }
    }

    /// Derivative directions are taken as a non-decreasing sequence of
    /// nonzero points since `D_y` commute and `D_0 = 0`.
    fn derivatives_vanish(&self, remaining: usize, start: usize) -> bool {
        if remaining == 0 {
            return self.numerators.iter().all(|&v| v == 0);
        }
        if self.numerators.iter().all(|&v| v == 0) {
            return true;
        }
        let size = self.numerators.len();
        if remaining == 1 {
            return self.is_constant();
        }
        (start..size)
            .into_par_iter()
            .all(|y| self.additive_derivative(y).derivatives_vanish_seq(remaining - 1, y))
    }

    fn derivatives_vanish_seq(&self, remaining: usize, start: usize) -> bool {
        if remaining == 0 || self.numerators.iter().all(|&v| v == 0) {
            return self.numerators.iter().all(|&v| v == 0);
        }
        if remaining == 1 {
            return self.is_constant();
        }
        (start..self.numerators.len()).all(|y| self.additive_derivative(y).derivatives_vanish_seq(remaining - 1, y))
    }

    /// Smallest `d` whose check passes, searching up to `max_d`.
    pub fn degree(&self, max_d: usize, budget: Budget) -> Result<Option<usize>> {
        for d in 0..=max_d {
            if self.verify_degree(d, DegreeCheck::Exhaustive, budget)? {
                return Ok(Some(d));
            }
        }
        Ok(None)
    }

    /// `x ↦ e(P(x))`.
    pub fn exponential(&self) -> DenseFunction {
        let values: Vec<Complex64> = self.values().into_iter().map(TValue::exp).collect();
        DenseFunction::from_complex(self.field, self.n, values).expect("table sizes already validated")
    }
}

fn checked_modulus(p: u32, level: u32) -> Result<u128> {
    let m = pow_sat(p as u64, level as u64);
    if m > MAX_MODULUS {
        return Err(Error::InvalidArgument(format!("level {level} too deep for p = {p}")));
    }
    Ok(m)
}

/// A non-classical polynomial with zero shift.
///
/// Terms map `(exponents, depth)` to a coefficient in `1..p`.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct NonClassicalPoly {
    field: Field,
    n: usize,
    terms: BTreeMap<(Vec<u32>, u32), u32>,
}

impl NonClassicalPoly {
    pub fn zero(field: Field, n: usize) -> Self {
        NonClassicalPoly {
            field,
            n,
            terms: BTreeMap::new(),
        }
    }

    /// Builds from `(coefficient, exponents, depth)` triples. Zero
    /// coefficients are dropped; repeated `(exponents, depth)` keys, constant
    /// monomials and coefficients outside `0..p` are rejected.
    pub fn new(field: Field, n: usize, terms: impl IntoIterator<Item = (u32, Vec<u32>, u32)>) -> Result<Self> {
        let p = field.p();
        let mut map = BTreeMap::new();
        for (c, exps, h) in terms {
            if exps.len() != n {
                return Err(Error::DimensionMismatch(format!("term {exps:?} has {} exponents, expected {n}", exps.len())));
            }
            if exps.iter().any(|&e| e >= p) {
                return Err(Error::InvalidArgument(format!("exponents must lie in 0..{p}")));
            }
            if exps.iter().all(|&e| e == 0) {
                return Err(Error::InvalidArgument("constant terms are shifts and must be zero".into()));
            }
            if c >= p {
                return Err(Error::InvalidArgument(format!("coefficient {c} outside 0..{p}")));
            }
            checked_modulus(p, h + 1)?;
            if map.contains_key(&(exps.clone(), h)) {
                return Err(Error::InvalidArgument(format!("duplicate term {exps:?} at depth {h}")));
            }
            if c != 0 {
                map.insert((exps, h), c);
            } else {
                map.entry((exps, h)).or_insert(0);
            }
        }
        map.retain(|_, c| *c != 0);
        Ok(NonClassicalPoly { field, n, terms: map })
    }

    /// A classical polynomial from `(coefficient, exponents)` pairs.
    pub fn classical(field: Field, n: usize, terms: impl IntoIterator<Item = (u32, Vec<u32>)>) -> Result<Self> {
        Self::new(field, n, terms.into_iter().map(|(c, e)| (c, e, 0)))
    }

    /// The classical linear form `Σ a_i x_i`.
    pub fn linear(field: Field, coefficients: &[u32]) -> Result<Self> {
        let n = coefficients.len();
        Self::classical(
            field,
            n,
            coefficients.iter().enumerate().map(|(i, &c)| {
                let mut e = vec![0; n];
                e[i] = 1;
                (c, e)
            }),
        )
    }

    pub fn field(&self) -> Field {
        self.field
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn terms(&self) -> impl Iterator<Item = (u32, &[u32], u32)> {
        self.terms.iter().map(|((e, h), &c)| (c, e.as_slice(), *h))
    }

    pub fn is_zero(&self) -> bool {
        self.terms.is_empty()
    }

    pub fn is_classical(&self) -> bool {
        self.depth() == 0
    }

    pub fn depth(&self) -> u32 {
        self.terms.keys().map(|(_, h)| *h).max().unwrap_or(0)
    }

    /// `max Σ d_i + h (p - 1)` over terms; 0 for the zero polynomial.
    pub fn degree(&self) -> usize {
        let p = self.field.p() as usize;
        self.terms
            .keys()
            .map(|(e, h)| e.iter().map(|&d| d as usize).sum::<usize>() + *h as usize * (p - 1))
            .max()
            .unwrap_or(0)
    }

    fn level(&self) -> u32 {
        self.depth() + 1
    }

    /// Per-monomial numerators over `p^level`: the digit expansion
    /// `Σ_h c_h p^{level-1-h}`.
    fn numerators(&self, level: u32) -> BTreeMap<Vec<u32>, u128> {
        let p = self.field.p() as u64;
        let modulus = pow_sat(p, level as u64);
        let mut out: BTreeMap<Vec<u32>, u128> = BTreeMap::new();
        for ((e, h), &c) in &self.terms {
            let v = c as u128 * pow_sat(p, (level - 1 - h) as u64);
            let slot = out.entry(e.clone()).or_insert(0);
            *slot = (*slot + v) % modulus;
        }
        out
    }

    fn from_numerators(field: Field, n: usize, level: u32, nums: BTreeMap<Vec<u32>, u128>) -> Self {
        let p = field.p() as u128;
        let mut terms = BTreeMap::new();
        for (e, mut v) in nums {
            // Least significant digit sits at depth level - 1.
            for h in (0..level).rev() {
                let c = (v % p) as u32;
                if c != 0 {
                    terms.insert((e.clone(), h), c);
                }
                v /= p;
            }
        }
        NonClassicalPoly { field, n, terms }
    }

    fn check_compatible(&self, other: &NonClassicalPoly) -> Result<()> {
        if self.field != other.field || self.n != other.n {
            return Err(Error::DimensionMismatch("polynomials over different domains".into()));
        }
        Ok(())
    }

    pub fn add(&self, other: &NonClassicalPoly) -> Result<Self> {
        self.check_compatible(other)?;
        let level = self.level().max(other.level());
        let modulus = pow_sat(self.field.p() as u64, level as u64);
        let mut nums = self.numerators(level);
        for (e, v) in other.numerators(level) {
            let slot = nums.entry(e).or_insert(0);
            *slot = (*slot + v) % modulus;
        }
        Ok(Self::from_numerators(self.field, self.n, level, nums))
    }

    /// `λ P` for an integer `λ` (only `λ mod p^{depth+1}` matters).
    pub fn scale(&self, lambda: u64) -> Self {
        let level = self.level();
        let modulus = pow_sat(self.field.p() as u64, level as u64);
        let lambda = lambda as u128 % modulus;
        let nums = self
            .numerators(level)
            .into_iter()
            .map(|(e, v)| (e, v * lambda % modulus))
            .collect();
        Self::from_numerators(self.field, self.n, level, nums)
    }

    pub fn neg(&self) -> Self {
        let modulus = pow_sat(self.field.p() as u64, self.level() as u64) as u64;
        self.scale(modulus - 1)
    }

    pub fn evaluate(&self, x: &[u32]) -> TValue {
        let level = self.level();
        let p = self.field.p();
        let modulus = pow_sat(p as u64, level as u64);
        let mut total: u128 = 0;
        for (e, v) in self.numerators(level) {
            let mono = e
                .iter()
                .zip(x)
                .fold(1u128, |acc, (&d, &xi)| acc * (xi as u128).pow(d) % modulus);
            total = (total + mono * v) % modulus;
        }
        TValue::new(p, total as u64, level)
    }

    /// Values at every point, over `p^{depth+1}`.
    pub fn table(&self) -> Result<PolyTable> {
        let level = self.level();
        let modulus = pow_sat(self.field.p() as u64, level as u64);
        let nums: Vec<(Vec<u32>, u128)> = self.numerators(level).into_iter().collect();
        let size = self.field.size(self.n)?;
        let numerators = (0..size)
            .into_par_iter()
            .map(|i| {
                let x = self.field.coords_of(i, self.n);
                let mut total: u128 = 0;
                for (e, v) in &nums {
                    let mono = e
                        .iter()
                        .zip(&x)
                        .fold(1u128, |acc, (&d, &xi)| acc * (xi as u128).pow(d) % modulus);
                    total = (total + mono * v) % modulus;
                }
                total as u64
            })
            .collect();
        PolyTable::new(self.field, self.n, level, numerators)
    }

    pub fn additive_derivative(&self, h: usize) -> Result<PolyTable> {
        Ok(self.table()?.additive_derivative(h))
    }

    pub fn verify_degree(&self, d: usize, mode: DegreeCheck, budget: Budget) -> Result<bool> {
        self.table()?.verify_degree(d, mode, budget)
    }

    pub fn exponential(&self) -> Result<DenseFunction> {
        Ok(self.table()?.exponential())
    }

    /// `|E_x e(P(x))|`.
    pub fn bias(&self) -> Result<f64> {
        Ok(self.exponential()?.mean().norm())
    }

    /// `p n`, then one `c : d_1 ... d_n : h` line per term.
    pub fn to_text(&self) -> String {
        let mut s = format!("{} {}\n", self.field.p(), self.n);
        for (c, e, h) in self.terms() {
            let exps: Vec<String> = e.iter().map(u32::to_string).collect();
            s.push_str(&format!("{c} : {} : {h}\n", exps.join(" ")));
        }
        s
    }

    pub fn from_text(text: &str) -> Result<Self> {
        let mut lines = text.lines().map(str::trim).filter(|l| !l.is_empty());
        let header = lines.next().ok_or_else(|| Error::Parse("empty polynomial file".into()))?;
        let nums = crate::field::parse_header(header, 2)?;
        let field = Field::new(nums[0] as u32)?;
        let n = nums[1];
        let mut terms = Vec::new();
        for line in lines {
            let parts: Vec<&str> = line.split(':').map(str::trim).collect();
            if parts.len() != 3 {
                return Err(Error::Parse(format!("term line `{line}` must be `c : d_1 ... d_n : h`")));
            }
            let num = |s: &str| s.parse::<u32>().map_err(|_| Error::Parse(format!("bad number `{s}` in `{line}`")));
            let c = num(parts[0])?;
            let exps = parts[1].split_whitespace().map(num).collect::<Result<Vec<_>>>()?;
            let h = num(parts[2])?;
            terms.push((c, exps, h));
        }
        Self::new(field, n, terms)
    }
}

impl fmt::Display for NonClassicalPoly {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.terms.is_empty() {
            return write!(f, "0");
        }
        let parts: Vec<String> = self
            .terms()
            .map(|(c, e, h)| {
                let mono: Vec<String> = e
                    .iter()
                    .enumerate()
                    .filter(|(_, &d)| d > 0)
                    .map(|(i, &d)| if d == 1 { format!("x{}", i + 1) } else { format!("x{}^{d}", i + 1) })
                    .collect();
                format!("{c}·{}/{}", mono.join(""), pow_sat(self.field.p() as u64, h as u64 + 1))
            })
            .collect();
        write!(f, "{}", parts.join(" + "))
    }
}

/// Exponent vectors with `1 <= Σ d_i <= max_degree`, `d_i < p`, ordered by
/// total degree and then with `x_1` before `x_2`.
pub fn monomials(field: Field, n: usize, max_degree: usize) -> Vec<Vec<u32>> {
    let p = field.p() as usize;
    let mut out = Vec::new();
    let count = p.checked_pow(n as u32).unwrap_or(usize::MAX);
    for i in 1..count {
        let e = field.coords_of(i, n);
        let deg: usize = e.iter().map(|&d| d as usize).sum();
        if deg <= max_degree {
            out.push(e);
        }
    }
    out.sort_by(|a, b| {
        let da: u32 = a.iter().sum();
        let db: u32 = b.iter().sum();
        da.cmp(&db).then_with(|| b.cmp(a))
    });
    out
}

/// Every nonzero classical polynomial of degree `<= max_degree` (no constant
/// term), in a fixed enumeration order: coefficient vectors over
/// [`monomials`] counted in base `p`, first monomial least significant.
pub fn classical_polynomials(field: Field, n: usize, max_degree: usize, budget: Budget) -> Result<Vec<NonClassicalPoly>> {
    let monos = monomials(field, n, max_degree);
    let count = pow_sat(field.p() as u64, monos.len() as u64);
    budget.check("classical polynomial enumeration", count)?;
    (1..count as usize)
        .map(|t| {
            let coeffs = field.coords_of(t, monos.len());
            NonClassicalPoly::classical(field, n, coeffs.into_iter().zip(monos.iter().cloned()))
        })
        .collect()
}

/// Rank value: `Infinite` is the marker for a non-constant polynomial at
/// `d = 1`; `ExceedsMax(r)` means no decomposition with at most `r` parts
/// was found.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Rank {
    Finite(usize),
    ExceedsMax(usize),
    Infinite,
}

impl Rank {
    fn key(self) -> (u8, usize) {
        match self {
            Rank::Finite(r) => (0, r),
            Rank::ExceedsMax(r) => (1, r),
            Rank::Infinite => (2, 0),
        }
    }
}

impl PartialOrd for Rank {
    fn partial_cmp(&self, other: &Self) -> Option<std::cmp::Ordering> {
        Some(self.cmp(other))
    }
}

impl Ord for Rank {
    fn cmp(&self, other: &Self) -> std::cmp::Ordering {
        self.key().cmp(&other.key())
    }
}

impl fmt::Display for Rank {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Rank::Finite(r) => write!(f, "{r}"),
            Rank::ExceedsMax(r) => write!(f, ">{r}"),
            Rank::Infinite => write!(f, "inf"),
        }
    }
}

/// A rank together with the lower-degree classical polynomials witnessing it.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RankResult {
    pub rank: Rank,
    pub witness: Vec<NonClassicalPoly>,
}

/// Whether `values` is constant on each joint fiber of `tables`.
fn constant_on_fibers(values: &[u64], tables: &[&[u64]], p: u64) -> bool {
    let mut seen: HashMap<u64, u64> = HashMap::new();
    for (x, &v) in values.iter().enumerate() {
        let key = tables.iter().fold(0u64, |acc, t| acc * p + t[x]);
        if *seen.entry(key).or_insert(v) != v {
            return false;
        }
    }
    true
}

/// `rank_d(P)` with the `Q_i` restricted to non-constant classical
/// polynomials of degree `<= d - 1`. This is an upper bound on the rank
/// where non-classical `Q_i` are allowed.
pub fn brute_force_rank_d(poly: &PolyTable, d: usize, max_r: usize, budget: Budget) -> Result<RankResult> {
    let field = poly.field();
    if poly.is_constant() {
        return Ok(RankResult {
            rank: Rank::Finite(0),
            witness: vec![],
        });
    }
    if d <= 1 {
        return Ok(RankResult {
            rank: Rank::Infinite,
            witness: vec![],
        });
    }
    let candidates = classical_polynomials(field, poly.n(), d - 1, budget)?;
    let size = poly.numerators().len() as u128;
    let work: u128 = (1..=max_r as u128)
        .map(|r| binomial(candidates.len() as u128, r))
        .fold(0u128, |a, b| a.saturating_add(b))
        .saturating_mul(size);
    budget.check("rank search", work)?;
    let tables: Vec<PolyTable> = candidates.iter().map(|q| q.table()).collect::<Result<_>>()?;
    let p = field.p() as u64;
    for r in 1..=max_r.min(candidates.len()) {
        let combos: Vec<Vec<usize>> = combinations(candidates.len(), r).collect();
        let found = combos.par_iter().find_first(|combo| {
            let ts: Vec<&[u64]> = combo.iter().map(|&i| tables[i].numerators()).collect();
            constant_on_fibers(poly.numerators(), &ts, p)
        });
        if let Some(combo) = found {
            return Ok(RankResult {
                rank: Rank::Finite(r),
                witness: combo.iter().map(|&i| candidates[i].clone()).collect(),
            });
        }
    }
    Ok(RankResult {
        rank: Rank::ExceedsMax(max_r),
        witness: vec![],
    })
}

fn binomial(n: u128, k: u128) -> u128 {
    if k > n {
        return 0;
    }
    (0..k).fold(1u128, |acc, i| acc.saturating_mul(n - i) / (i + 1))
}

/// The rank of `P` itself: its `deg(P)`-rank.
pub fn poly_rank(poly: &NonClassicalPoly, max_r: usize, budget: Budget) -> Result<RankResult> {
    brute_force_rank_d(&poly.table()?, poly.degree(), max_r, budget)
}

/// Rank of a polynomial sequence: the minimum over non-trivial `λ` of
/// `rank_d(Σ λ_i P_i)` with `d = max deg(λ_i P_i)`. Also returns the
/// minimizing `λ` (first in enumeration order).
pub fn sequence_rank(polys: &[NonClassicalPoly], max_r: usize, budget: Budget) -> Result<(RankResult, Vec<u64>)> {
    let first = polys
        .first()
        .ok_or_else(|| Error::InvalidArgument("sequence rank of an empty sequence".into()))?;
    for p in polys {
        first.check_compatible(p)?;
    }
    let field = first.field();
    let moduli: Vec<u64> = polys
        .iter()
        .map(|q| pow_sat(field.p() as u64, q.depth() as u64 + 1) as u64)
        .collect();
    let grid = moduli.iter().fold(1u128, |a, &m| a.saturating_mul(m as u128));
    budget.check("rank coefficient grid", grid.saturating_mul(field.count(first.n())))?;
    let mut best: Option<(RankResult, Vec<u64>)> = None;
    for t in 1..grid as u64 {
        let mut rest = t;
        let lambda: Vec<u64> = moduli
            .iter()
            .map(|&m| {
                let v = rest % m;
                rest /= m;
                v
            })
            .collect();
        let scaled: Vec<NonClassicalPoly> = polys.iter().zip(&lambda).map(|(q, &l)| q.scale(l)).collect();
        let d = scaled.iter().map(NonClassicalPoly::degree).max().unwrap_or(0);
        let combined = scaled
            .iter()
            .try_fold(NonClassicalPoly::zero(field, first.n()), |acc, q| acc.add(q))?;
        let result = brute_force_rank_d(&combined.table()?, d, max_r, budget)?;
        if best.as_ref().is_none_or(|(b, _)| result.rank < b.rank) {
            let done = result.rank == Rank::Finite(0);
            best = Some((result, lambda));
            if done {
                break;
            }
        }
    }
    Ok(best.expect("grid has at least one non-trivial coefficient vector"))
}

/// A classical polynomial `c · M ∘ A` with `M` a monomial and `A` an affine
/// bijection.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct FactoredPolynomial {
    coefficient: u32,
    monomial: Vec<u32>,
    bijection: AffineMap,
}

impl FactoredPolynomial {
    pub fn new(coefficient: u32, monomial: Vec<u32>, bijection: AffineMap) -> Result<Self> {
        let field = bijection.field();
        if !bijection.is_bijection() {
            return Err(Error::InvalidArgument("factored polynomial needs an affine bijection".into()));
        }
        if monomial.len() != bijection.in_dim() {
            return Err(Error::DimensionMismatch("monomial and bijection dimensions differ".into()));
        }
        if coefficient >= field.p() || monomial.iter().any(|&e| e >= field.p()) {
            return Err(Error::InvalidArgument("coefficient and exponents must lie in 0..p".into()));
        }
        Ok(FactoredPolynomial {
            coefficient,
            monomial,
            bijection,
        })
    }

    pub fn monomial(&self) -> &[u32] {
        &self.monomial
    }

    pub fn bijection(&self) -> &AffineMap {
        &self.bijection
    }

    pub fn degree(&self) -> usize {
        if self.coefficient == 0 {
            0
        } else {
            self.monomial.iter().map(|&d| d as usize).sum()
        }
    }

    pub fn eval(&self, x: &[u32]) -> u32 {
        let field = self.bijection.field();
        let y = self.bijection.apply(x);
        self.monomial
            .iter()
            .zip(&y)
            .fold(self.coefficient, |acc, (&d, &yi)| field.mul(acc, field.pow(yi, d)))
    }

    pub fn table(&self) -> Result<Vec<u32>> {
        let field = self.bijection.field();
        let n = self.monomial.len();
        Ok(field.points(n).map(|pt| self.eval(&field.coords_of(pt.index, n))).collect())
    }

    /// `Pr_x[c · M(x) ≠ 0] = ((p-1)/p)^{|support(M)|}` for `c ≠ 0`.
    pub fn monomial_nonzero_prob(&self) -> f64 {
        monomial_nonzero_prob(self.bijection.field(), self.coefficient, &self.monomial)
    }
}

pub fn monomial_nonzero_prob(field: Field, coefficient: u32, monomial: &[u32]) -> f64 {
    if coefficient == 0 {
        return 0.0;
    }
    let p = field.p() as f64;
    let support = monomial.iter().filter(|&&d| d > 0).count();
    ((p - 1.0) / p).powi(support as i32)
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn f2() -> Field {
        Field::new(2).unwrap()
    }

    fn x1x2(field: Field, n: usize) -> NonClassicalPoly {
        let mut e = vec![0; n];
        e[0] = 1;
        e[1] = 1;
        NonClassicalPoly::classical(field, n, [(1, e)]).unwrap()
    }

    #[test]
    fn tvalue_arithmetic() {
        let half = TValue::new(2, 1, 1);
        let quarter = TValue::new(2, 1, 2);
        assert_eq!(quarter.add(quarter), half);
        assert_eq!(half.add(half), TValue::zero(2));
        assert_eq!(quarter.neg(), TValue::new(2, 3, 2));
        assert_eq!(TValue::new(2, 2, 2), half);
        assert!((quarter.to_f64() - 0.25).abs() < 1e-15);
        assert!((half.exp() - Complex64::new(-1.0, 0.0)).norm() < 1e-12);
    }

    #[test]
    fn evaluation_examples() {
        let p = x1x2(f2(), 2);
        let v = p.evaluate(&[1, 1]);
        assert_eq!((v.numerator(), v.level()), (1, 1));
        let deep = NonClassicalPoly::new(f2(), 1, [(1, vec![1], 1)]).unwrap();
        let v = deep.evaluate(&[1]);
        assert_eq!((v.numerator(), v.level()), (1, 2));
        let zero = NonClassicalPoly::zero(f2(), 2);
        assert!(zero.table().unwrap().numerators().iter().all(|&v| v == 0));
    }

    #[test]
    fn rejects_malformed_terms() {
        assert!(NonClassicalPoly::new(f2(), 2, [(1, vec![0, 0], 0)]).is_err());
        assert!(NonClassicalPoly::new(f2(), 2, [(2, vec![1, 0], 0)]).is_err());
        assert!(NonClassicalPoly::new(f2(), 2, [(1, vec![2, 0], 0)]).is_err());
        assert!(NonClassicalPoly::new(f2(), 2, [(1, vec![1, 0], 0), (1, vec![1, 0], 0)]).is_err());
        assert!(NonClassicalPoly::new(f2(), 2, [(1, vec![1], 0)]).is_err());
        assert!(NonClassicalPoly::new(f2(), 2, [(0, vec![1, 0], 0)]).unwrap().is_zero());
    }

    #[test]
    fn derivative_examples() {
        let x = NonClassicalPoly::linear(f2(), &[1]).unwrap();
        let t = x.table().unwrap();
        assert!(t.additive_derivative(0).numerators().iter().all(|&v| v == 0));
        let d1 = t.additive_derivative(1);
        assert_eq!(d1.values(), vec![TValue::new(2, 1, 1); 2]);
    }

    #[test]
    fn degree_examples() {
        let b = Budget::DEFAULT;
        let q = x1x2(f2(), 2);
        assert!(q.verify_degree(2, DegreeCheck::Exhaustive, b).unwrap());
        assert!(!q.verify_degree(1, DegreeCheck::Exhaustive, b).unwrap());
        let deep = NonClassicalPoly::new(f2(), 1, [(1, vec![1], 1)]).unwrap();
        assert_eq!(deep.degree(), 2);
        assert!(deep.verify_degree(2, DegreeCheck::Exhaustive, b).unwrap());
        assert!(!deep.verify_degree(1, DegreeCheck::Exhaustive, b).unwrap());
        assert_eq!(NonClassicalPoly::zero(f2(), 2).table().unwrap().degree(3, b).unwrap(), Some(0));
        let sampled = DegreeCheck::Sampled { samples: 2000, seed: 1 };
        assert!(!q.verify_degree(1, sampled, b).unwrap());
        assert!(q.verify_degree(2, sampled, b).unwrap());
        assert!(q.verify_degree(3, DegreeCheck::Exhaustive, Budget(10)).is_err());
    }

    /// Every polynomial with a bounded number of terms at tiny sizes: the
    /// derivative check must agree with the representation formula.
    #[test]
    fn degree_formula_matches_derivatives() {
        for p in [2u32, 3] {
            let field = Field::new(p).unwrap();
            for n in 1..=2 {
                let keys: Vec<(Vec<u32>, u32)> = monomials(field, n, n * (p as usize - 1))
                    .into_iter()
                    .flat_map(|e| (0..2).map(move |h| (e.clone(), h)))
                    .collect();
                for single in &keys {
                    for c in 1..p {
                        let poly = NonClassicalPoly::new(field, n, [(c, single.0.clone(), single.1)]).unwrap();
                        let deg = poly.degree();
                        let t = poly.table().unwrap();
                        assert_eq!(t.degree(deg + 1, Budget::DEFAULT).unwrap(), Some(deg), "{poly}");
                    }
                }
                for pair in combinations(keys.len(), 2) {
                    let terms = pair.iter().map(|&i| (1, keys[i].0.clone(), keys[i].1));
                    let poly = NonClassicalPoly::new(field, n, terms).unwrap();
                    let deg = poly.degree();
                    assert_eq!(poly.table().unwrap().degree(deg + 1, Budget::DEFAULT).unwrap(), Some(deg), "{poly}");
                }
            }
        }
    }

    #[test]
    fn composition_with_bijection_preserves_degree_and_depth() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        for p in [2u32, 3] {
            let field = Field::new(p).unwrap();
            let polys = [
                NonClassicalPoly::new(field, 2, [(1, vec![1, 0], 1), (1, vec![1, 1], 0)]).unwrap(),
                x1x2(field, 2),
                NonClassicalPoly::new(field, 2, [(1, vec![0, 1], 2)]).unwrap(),
            ];
            for poly in &polys {
                let t = poly.table().unwrap();
                let deg = poly.degree();
                for _ in 0..5 {
                    let a = AffineMap::random_bijection(field, 2, &mut rng);
                    let c = t.compose_affine(&a).unwrap();
                    assert_eq!(c.degree(deg + 1, Budget::DEFAULT).unwrap(), Some(deg));
                    assert_eq!(c.depth(), t.depth());
                }
            }
        }
    }

    #[test]
    fn addition_carries_between_depths() {
        let q = NonClassicalPoly::new(f2(), 1, [(1, vec![1], 1)]).unwrap();
        let doubled = q.add(&q).unwrap();
        assert_eq!(doubled, NonClassicalPoly::linear(f2(), &[1]).unwrap());
        assert_eq!(q.scale(4), NonClassicalPoly::zero(f2(), 1));
        assert!(q.add(&q.neg()).unwrap().is_zero());
        let t = q.scale(3).table().unwrap();
        let direct: Vec<TValue> = q.table().unwrap().values().iter().map(|v| v.add(*v).add(*v)).collect();
        assert_eq!(t.values(), direct);
    }

    #[test]
    fn exponential_and_bias() {
        let zero = NonClassicalPoly::zero(f2(), 2);
        assert_eq!(zero.bias().unwrap(), 1.0);
        let lin = NonClassicalPoly::linear(Field::new(3).unwrap(), &[1, 2]).unwrap();
        assert!(lin.bias().unwrap() < 1e-12);
        assert!((x1x2(f2(), 2).bias().unwrap() - 0.5).abs() < 1e-12);
        let e = NonClassicalPoly::linear(f2(), &[1, 0]).unwrap().exponential().unwrap();
        assert!(e.values().iter().all(|v| (v.re.abs() - 1.0).abs() < 1e-12 && v.im.abs() < 1e-12));
    }

    #[test]
    fn rank_examples() {
        let b = Budget::DEFAULT;
        let field = f2();
        let constant = NonClassicalPoly::zero(field, 2).table().unwrap();
        assert_eq!(brute_force_rank_d(&constant, 3, 3, b).unwrap().rank, Rank::Finite(0));
        let lin = NonClassicalPoly::linear(field, &[1, 1]).unwrap();
        assert_eq!(brute_force_rank_d(&lin.table().unwrap(), 1, 3, b).unwrap().rank, Rank::Infinite);
        let r = poly_rank(&x1x2(field, 2), 3, b).unwrap();
        assert_eq!(r.rank, Rank::Finite(2));
        assert_eq!(r.witness.len(), 2);
        assert!(r.witness.iter().all(|q| q.degree() <= 1));
        assert_eq!(poly_rank(&x1x2(field, 2), 1, b).unwrap().rank, Rank::ExceedsMax(1));
    }

    #[test]
    fn sequence_rank_examples() {
        let b = Budget::DEFAULT;
        let field = f2();
        let x1 = NonClassicalPoly::linear(field, &[1, 0]).unwrap();
        let x2 = NonClassicalPoly::linear(field, &[0, 1]).unwrap();
        assert_eq!(sequence_rank(std::slice::from_ref(&x1), 3, b).unwrap().0.rank, Rank::Infinite);
        let (dup, lambda) = sequence_rank(&[x1.clone(), x1.clone()], 3, b).unwrap();
        assert_eq!(dup.rank, Rank::Finite(0));
        assert_eq!(lambda, vec![1, 1]);
        assert_eq!(sequence_rank(&[x1, x2], 3, b).unwrap().0.rank, Rank::Infinite);
        let f3 = Field::new(3).unwrap();
        let y = NonClassicalPoly::linear(f3, &[1]).unwrap();
        let (r, lambda) = sequence_rank(&[y.clone(), y], 3, b).unwrap();
        assert_eq!(r.rank, Rank::Finite(0));
        assert_eq!(lambda, vec![2, 1]);
    }

    #[test]
    fn rank_is_scalar_invariant() {
        let field = Field::new(3).unwrap();
        for poly in classical_polynomials(field, 2, 2, Budget::DEFAULT).unwrap().iter().step_by(17) {
            let base = poly_rank(poly, 2, Budget::DEFAULT).unwrap().rank;
            for l in 1..3 {
                assert_eq!(poly_rank(&poly.scale(l), 2, Budget::DEFAULT).unwrap().rank, base);
            }
        }
    }

    #[test]
    fn enumeration_counts() {
        assert_eq!(monomials(f2(), 3, 2).len(), 6);
        assert_eq!(monomials(f2(), 2, 1), vec![vec![1, 0], vec![0, 1]]);
        assert_eq!(classical_polynomials(f2(), 3, 2, Budget::DEFAULT).unwrap().len(), 63);
        assert_eq!(classical_polynomials(Field::new(3).unwrap(), 2, 1, Budget::DEFAULT).unwrap().len(), 8);
    }

    #[test]
    fn factored_examples() {
        let f3 = Field::new(3).unwrap();
        let id = AffineMap::identity(f3, 3);
        let m = FactoredPolynomial::new(1, vec![1, 1, 1], id).unwrap();
        let nonzero = m.table().unwrap().iter().filter(|&&v| v != 0).count();
        assert_eq!(nonzero, 8);
        assert!((m.monomial_nonzero_prob() - 8.0 / 27.0).abs() < 1e-15);
        let c = FactoredPolynomial::new(2, vec![0, 0, 0], AffineMap::identity(f3, 3)).unwrap();
        assert_eq!(c.monomial_nonzero_prob(), 1.0);

        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let a = AffineMap::random_bijection(f3, 3, &mut rng);
        let moved = FactoredPolynomial::new(1, vec![2, 1, 0], a).unwrap();
        let plain = FactoredPolynomial::new(1, vec![2, 1, 0], AffineMap::identity(f3, 3)).unwrap();
        let mut x = moved.table().unwrap();
        let mut y = plain.table().unwrap();
        x.sort_unstable();
        y.sort_unstable();
        assert_eq!(x, y);
        let frac = y.iter().filter(|&&v| v != 0).count() as f64 / 27.0;
        assert!((frac - plain.monomial_nonzero_prob()).abs() < 1e-15);
    }

    #[test]
    fn text_round_trip() {
        let f5 = Field::new(5).unwrap();
        let poly = NonClassicalPoly::new(f5, 3, [(3, vec![1, 0, 4], 0), (1, vec![0, 2, 0], 1)]).unwrap();
        assert_eq!(NonClassicalPoly::from_text(&poly.to_text()).unwrap(), poly);
        assert!(matches!(NonClassicalPoly::from_text("2 2\n1 : 1 : 0\n"), Err(Error::DimensionMismatch(_))));
        assert!(matches!(NonClassicalPoly::from_text("2 2\n1 : 1 0\n"), Err(Error::Parse(_))));
    }
}
