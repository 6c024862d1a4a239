//! Linear-form averages `t_L` and Gowers uniformity norms.

use std::collections::BTreeSet;
use std::ops::Add;

use num_complex::Complex64;
use rand::Rng;
use rayon::prelude::*;

use crate::error::{pow_sat, Budget, Error, Result};
use crate::field::Field;
use crate::function::DenseFunction;
use crate::sampling::{draw_all, McEstimate};
use crate::sum::pairwise_sum;

/// A finite set of linear forms in `k` variables over `F_p`.
///
/// Forms are kept in insertion order; `t_L` does not depend on it.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct LinearFormSystem {
    field: Field,
    k: usize,
    forms: Vec<Vec<u32>>,
}

impl LinearFormSystem {
    pub fn new(field: Field, k: usize, forms: Vec<Vec<u32>>) -> Result<Self> {
        if k == 0 {
            return Err(Error::InvalidArgument("a system needs at least one variable".into()));
        }
        for form in &forms {
            if form.len() != k {
                return Err(Error::DimensionMismatch(format!(
                    "form {form:?} has {} coefficients, expected {k}",
                    form.len()
                )));
            }
            if form.iter().any(|&c| c >= field.p()) {
                return Err(Error::InvalidArgument(format!("form {form:?} has entries outside F_{}", field.p())));
            }
        }
        let distinct: BTreeSet<&Vec<u32>> = forms.iter().collect();
        if distinct.len() != forms.len() {
            return Err(Error::InvalidArgument("forms must be pairwise distinct".into()));
        }
        Ok(LinearFormSystem { field, k, forms })
    }

    /// `L_d = { x_0 + Σ_{i∈I} x_i : I ⊆ [d] }` in `d + 1` variables, ordered by
    /// the bitmask of `I`.
    pub fn cube_system(field: Field, d: usize) -> Result<Self> {
        if d == 0 {
            return Err(Error::InvalidArgument("cube system needs d >= 1".into()));
        }
        let forms = (0..1usize << d)
            .map(|mask| {
                std::iter::once(1)
                    .chain((0..d).map(|i| ((mask >> i) & 1) as u32))
                    .collect()
            })
            .collect();
        Self::new(field, d + 1, forms)
    }

    pub fn field(&self) -> Field {
        self.field
    }

    pub fn k(&self) -> usize {
        self.k
    }

    pub fn forms(&self) -> &[Vec<u32>] {
        &self.forms
    }

    pub fn len(&self) -> usize {
        self.forms.len()
    }

    pub fn is_empty(&self) -> bool {
        self.forms.is_empty()
    }

    /// Every form has leading coefficient 1.
    pub fn is_affine(&self) -> bool {
        self.forms.iter().all(|f| f[0] == 1)
    }

    /// The same forms read in `k2 >= k` variables (new variables unused).
    pub fn pad(&self, k2: usize) -> Result<Self> {
        if k2 < self.k {
            return Err(Error::DimensionMismatch(format!("cannot pad {} variables to {k2}", self.k)));
        }
        let forms = self
            .forms
            .iter()
            .map(|f| f.iter().copied().chain(std::iter::repeat_n(0, k2 - self.k)).collect())
            .collect();
        Self::new(self.field, k2, forms)
    }

    /// Representative of the class of systems equal up to form order and
    /// variable permutation: the smallest sorted form list over all
    /// permutations. Variable 1 stays in place for affine systems so the
    /// representative is affine too.
    pub fn canonical(&self) -> Self {
        let movable: Vec<usize> = if self.is_affine() { (1..self.k).collect() } else { (0..self.k).collect() };
        let mut best: Option<Vec<Vec<u32>>> = None;
        for perm in permutations(&movable) {
            // perm[i] is the new position of variable movable[i].
            let mut target: Vec<usize> = (0..self.k).collect();
            for (i, &v) in movable.iter().enumerate() {
                target[v] = perm[i];
            }
            let mut forms: Vec<Vec<u32>> = self
                .forms
                .iter()
                .map(|f| {
                    let mut g = vec![0; self.k];
                    for (v, &c) in f.iter().enumerate() {
                        g[target[v]] = c;
                    }
                    g
                })
                .collect();
            forms.sort();
            if best.as_ref().is_none_or(|b| forms < *b) {
                best = Some(forms);
            }
        }
        LinearFormSystem {
            field: self.field,
            k: self.k,
            forms: best.unwrap_or_default(),
        }
    }

    /// Value of form `j` at `(x_1, ..., x_k)` given as point indices in `F_p^n`.
    #[inline]
    fn eval_form(&self, j: usize, xs: &[usize], n: usize) -> usize {
        let field = self.field;
        self.forms[j]
            .iter()
            .zip(xs)
            .fold(0, |acc, (&c, &x)| field.add_index(acc, field.scale_index(c, x, n), n))
    }

    /// `k`, then one base-`p` digit row per form.
    pub fn to_text(&self) -> String {
        let mut s = format!("{}\n", self.k);
        for f in &self.forms {
            s.push_str(&self.field.format_digits(f));
            s.push('\n');
        }
        s
    }

    pub fn from_text(field: Field, text: &str) -> Result<Self> {
        let mut lines = text.lines().map(str::trim).filter(|l| !l.is_empty());
        let k: usize = lines
            .next()
            .ok_or_else(|| Error::Parse("empty linear form system".into()))?
            .parse()
            .map_err(|_| Error::Parse("first line must be the variable count".into()))?;
        let forms = lines.map(|l| field.parse_digits(l, k)).collect::<Result<Vec<_>>>()?;
        Self::new(field, k, forms)
    }
}

fn permutations(items: &[usize]) -> Vec<Vec<usize>> {
    if items.is_empty() {
        return vec![vec![]];
    }
    let mut out = Vec::new();
    for i in 0..items.len() {
        let mut rest = items.to_vec();
        let head = rest.remove(i);
        for mut tail in permutations(&rest) {
            tail.insert(0, head);
            out.push(tail);
        }
    }
    out
}

/// All affine systems with at most `max_forms` forms in `vars` variables, up
/// to form order and permutation of variables `2..vars`. Systems in fewer
/// variables appear zero-padded.
pub fn canonical_affine_systems(field: Field, vars: usize, max_forms: usize, budget: Budget) -> Result<Vec<LinearFormSystem>> {
    if vars == 0 {
        return Err(Error::InvalidArgument("need at least one variable".into()));
    }
    let form_count = pow_sat(field.p() as u64, vars as u64 - 1);
    let subsets: u128 = (1..=max_forms as u128).map(|s| binomial(form_count, s)).sum();
    let perms: u128 = (1..vars as u128).product::<u128>().max(1);
    budget.check("affine system enumeration", subsets.saturating_mul(perms))?;
    let forms: Vec<Vec<u32>> = (0..form_count as usize)
        .map(|i| std::iter::once(1).chain(field.coords_of(i, vars - 1)).collect())
        .collect();
    let mut out = BTreeSet::new();
    for size in 1..=max_forms.min(forms.len()) {
        for combo in combinations(forms.len(), size) {
            let sys = LinearFormSystem::new(field, vars, combo.iter().map(|&i| forms[i].clone()).collect())?;
            out.insert(sys.canonical());
        }
    }
    Ok(out.into_iter().collect())
}

fn binomial(n: u128, k: u128) -> u128 {
    if k > n {
        return 0;
    }
    (0..k).fold(1u128, |acc, i| acc.saturating_mul(n - i) / (i + 1))
}

/// Index combinations of size `k` from `0..n`, lexicographic.
pub(crate) fn combinations(n: usize, k: usize) -> impl Iterator<Item = Vec<usize>> {
    let mut state: Option<Vec<usize>> = (k <= n).then(|| (0..k).collect());
    std::iter::from_fn(move || {
        let current = state.clone()?;
        let mut next = current.clone();
        let mut i = k;
        loop {
            if i == 0 {
                state = None;
                break;
            }
            i -= 1;
            if next[i] < n - k + i {
                next[i] += 1;
                for j in i + 1..k {
                    next[j] = next[j - 1] + 1;
                }
                state = Some(next);
                break;
            }
        }
        Some(current)
    })
}

/// Exact average of `term` over all `(x_1, ..., x_k) ∈ (F_p^n)^k`,
/// parallel over `x_1` with a fixed reduction tree.
fn exact_average<T, F>(field: Field, n: usize, k: usize, term: F) -> Result<T>
where
    T: Copy + Send + Default + Add<Output = T>,
    F: Fn(&[usize]) -> T + Sync,
{
    let size = field.size(n)?;
    let inner = size.checked_pow(k as u32 - 1).ok_or_else(|| Error::BudgetExceeded {
        what: "tuple enumeration".into(),
        required: u128::MAX,
        budget: u64::MAX,
    })?;
    let partial: Vec<T> = (0..size)
        .into_par_iter()
        .map(|x1| {
            let mut xs = vec![0usize; k];
            xs[0] = x1;
            let mut acc = T::default();
            for t in 0..inner {
                let mut rest = t;
                for slot in xs.iter_mut().skip(1) {
                    *slot = rest % size;
                    rest /= size;
                }
                acc = acc + term(&xs);
            }
            acc
        })
        .collect();
    Ok(pairwise_sum(&partial))
}

fn check_system(f: &DenseFunction, l: &LinearFormSystem) -> Result<()> {
    if f.field() != l.field() {
        return Err(Error::DimensionMismatch("function and system over different fields".into()));
    }
    Ok(())
}

/// `t_L(f) = E_{x_1..x_k} Π_{L∈L} f(L(x_1, ..., x_k))`, exactly; cost `p^{nk}`.
pub fn t_exact(f: &DenseFunction, l: &LinearFormSystem, budget: Budget) -> Result<Complex64> {
    check_system(f, l)?;
    let n = f.n();
    budget.check(
        "exact linear-form average",
        pow_sat(f.field().p() as u64, (n * l.k()) as u64).saturating_mul(l.len().max(1) as u128),
    )?;
    let total = exact_average(f.field(), n, l.k(), |xs| {
        (0..l.len()).fold(Complex64::new(1.0, 0.0), |acc, j| acc * f.value(l.eval_form(j, xs, n)))
    })?;
    Ok(total / pow_sat(f.field().p() as u64, (n * l.k()) as u64) as f64)
}

/// Unbiased Monte-Carlo estimate of `t_L(f)` from iid uniform tuples.
pub fn t_mc(f: &DenseFunction, l: &LinearFormSystem, samples: usize, seed: u64) -> Result<McEstimate> {
    check_system(f, l)?;
    if samples == 0 {
        return Err(Error::InvalidArgument("samples must be >= 1".into()));
    }
    let n = f.n();
    let size = f.len();
    let xs = draw_all(samples, seed, |rng| {
        let tuple: Vec<usize> = (0..l.k()).map(|_| rng.random_range(0..size)).collect();
        (0..l.len()).fold(Complex64::new(1.0, 0.0), |acc, j| acc * f.value(l.eval_form(j, &tuple, n)))
    });
    Ok(McEstimate::from_samples(&xs))
}

/// `E_{x, y_1..y_d} (Δ_{y_1} ... Δ_{y_d} f)(x)` by the derivative recursion.
fn gowers_power(f: &DenseFunction, d: usize, parallel: bool) -> f64 {
    match d {
        1 => f.mean().norm_sqr(),
        2 => {
            let t = f.character_transform();
            let fourth: Vec<f64> = t.coefficients().iter().map(|c| c.norm_sqr().powi(2)).collect();
            pairwise_sum(&fourth)
        }
        _ => {
            let terms: Vec<f64> = if parallel {
                (0..f.len())
                    .into_par_iter()
                    .map(|h| gowers_power(&f.multiplicative_derivative(h), d - 1, false))
                    .collect()
            } else {
                (0..f.len())
                    .map(|h| gowers_power(&f.multiplicative_derivative(h), d - 1, false))
                    .collect()
            };
            pairwise_sum(&terms) / f.len() as f64
        }
    }
}

/// `‖f‖_{U^d}^{2^d}` exactly; cost about `p^{n(d-1)} · p^n · n`.
pub fn gowers_power_exact(f: &DenseFunction, d: usize, budget: Budget) -> Result<f64> {
    if d == 0 {
        return Err(Error::InvalidArgument("Gowers norm needs d >= 1".into()));
    }
    let p = f.field().p() as u64;
    budget.check(
        "exact Gowers norm",
        pow_sat(p, (f.n() * d) as u64).saturating_mul(2),
    )?;
    Ok(gowers_power(f, d, true).max(0.0))
}

/// `‖f‖_{U^d}`, exactly.
pub fn gowers_norm_exact(f: &DenseFunction, d: usize, budget: Budget) -> Result<f64> {
    Ok(gowers_power_exact(f, d, budget)?.powf(1.0 / (1u64 << d) as f64))
}

/// Monte-Carlo Gowers norm: the cube average and its `|·|^{1/2^d}` transform.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GowersEstimate {
    pub norm: f64,
    /// Delta-method standard error of `norm`; approximate, and replaced by
    /// `std_error^{1/2^d}` of the average when the average is near zero.
    pub std_error: f64,
    pub average: McEstimate,
}

pub fn gowers_norm_mc(f: &DenseFunction, d: usize, samples: usize, seed: u64) -> Result<GowersEstimate> {
    if d == 0 {
        return Err(Error::InvalidArgument("Gowers norm needs d >= 1".into()));
    }
    if samples == 0 {
        return Err(Error::InvalidArgument("samples must be >= 1".into()));
    }
    let field = f.field();
    let n = f.n();
    let size = f.len();
    let xs = draw_all(samples, seed, |rng| {
        let x = rng.random_range(0..size);
        let ys: Vec<usize> = (0..d).map(|_| rng.random_range(0..size)).collect();
        let mut prod = Complex64::new(1.0, 0.0);
        for mask in 0..1usize << d {
            let mut pt = x;
            for (i, &y) in ys.iter().enumerate() {
                if (mask >> i) & 1 == 1 {
                    pt = field.add_index(pt, y, n);
                }
            }
            let v = f.value(pt);
            // Conjugate on vertices with an even number of steps removed from
            // the top corner, as in iterated multiplicative derivatives.
            prod *= if (d - mask.count_ones() as usize) % 2 == 1 { v.conj() } else { v };
        }
        prod
    });
    let average = McEstimate::from_samples(&xs);
    let inv = 1.0 / (1u64 << d) as f64;
    let a = average.mean.norm();
    let norm = a.powf(inv);
    let delta = if a > 0.0 { inv * a.powf(inv - 1.0) * average.std_error } else { f64::INFINITY };
    let std_error = delta.min(average.std_error.powf(inv));
    Ok(GowersEstimate { norm, std_error, average })
}

#[derive(Clone, Copy, Default)]
struct Telescope {
    tf: Complex64,
    tg: Complex64,
    terms: Complex64,
}

impl Add for Telescope {
    type Output = Telescope;
    fn add(self, o: Telescope) -> Telescope {
        Telescope {
            tf: self.tf + o.tf,
            tg: self.tg + o.tg,
            terms: self.terms + o.terms,
        }
    }
}

/// `|t_L(f) - t_L(g) - Σ_i T_i|` where
/// `T_i = E Π_{j<i} f(L_j x) · (f - g)(L_i x) · Π_{j>i} g(L_j x)`.
pub fn telescoping_residual(f: &DenseFunction, g: &DenseFunction, l: &LinearFormSystem, budget: Budget) -> Result<f64> {
    check_system(f, l)?;
    if f.field() != g.field() || f.n() != g.n() {
        return Err(Error::DimensionMismatch("f and g have different domains".into()));
    }
    let n = f.n();
    let m = l.len();
    let p = f.field().p() as u64;
    budget.check(
        "telescoping identity",
        pow_sat(p, (n * l.k()) as u64).saturating_mul((3 * m).max(1) as u128),
    )?;
    let total = exact_average(f.field(), n, l.k(), |xs| {
        let pts: Vec<usize> = (0..m).map(|j| l.eval_form(j, xs, n)).collect();
        let a: Vec<Complex64> = pts.iter().map(|&x| f.value(x)).collect();
        let b: Vec<Complex64> = pts.iter().map(|&x| g.value(x)).collect();
        // suffix[i] = Π_{j>=i} b_j
        let mut suffix = vec![Complex64::new(1.0, 0.0); m + 1];
        for j in (0..m).rev() {
            suffix[j] = suffix[j + 1] * b[j];
        }
        let mut prefix = Complex64::new(1.0, 0.0);
        let mut terms = Complex64::new(0.0, 0.0);
        for i in 0..m {
            terms += prefix * (a[i] - b[i]) * suffix[i + 1];
            prefix *= a[i];
        }
        Telescope {
            tf: prefix,
            tg: suffix[0],
            terms,
        }
    })?;
    Ok((total.tf - total.tg - total.terms).norm() / pow_sat(p, (n * l.k()) as u64) as f64)
}

/// One scatter point relating `|t_L(f) - t_L(g)|` to `‖f - g‖_{U^{d+1}}`.
pub fn tl_gap_vs_gowers(
    f: &DenseFunction,
    g: &DenseFunction,
    l: &LinearFormSystem,
    d: usize,
    budget: Budget,
) -> Result<(f64, f64)> {
    let gap = (t_exact(f, l, budget)? - t_exact(g, l, budget)?).norm();
    let dist = gowers_norm_exact(&f.sub(g)?, d + 1, budget)?;
    Ok((gap, dist))
}
