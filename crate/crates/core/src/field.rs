//! Arithmetic over `F_p`, the vector spaces `F_p^n`, and affine maps between
//! them.
//!
//! Points of `F_p^n` are addressed by a base-`p` index with the first
//! coordinate least significant: `(x_1, ..., x_n) <-> x_1 + x_2 p + ... + x_n p^{n-1}`.
//! Every function table in the crate uses this ordering.

use std::fmt;

use rand::Rng;

use crate::error::{pow_sat, Budget, Error, Result};

pub const MAX_PRIME: u32 = 17;

/// The prime field `F_p`, `2 <= p <= 17`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Field {
    p: u32,
}

impl Field {
    pub fn new(p: u32) -> Result<Self> {
        if !(2..=MAX_PRIME).contains(&p) || !(2..p).take_while(|d| d * d <= p).all(|d| !p.is_multiple_of(d)) {
            return Err(Error::InvalidPrime(p));
        }
        Ok(Field { p })
    }

    #[inline]
    pub fn p(self) -> u32 {
        self.p
    }

    #[inline]
    pub fn add(self, a: u32, b: u32) -> u32 {
        (a + b) % self.p
    }

    #[inline]
    pub fn sub(self, a: u32, b: u32) -> u32 {
        (a + self.p - b) % self.p
    }

    #[inline]
    pub fn mul(self, a: u32, b: u32) -> u32 {
        (a * b) % self.p
    }

    #[inline]
    pub fn neg(self, a: u32) -> u32 {
        (self.p - a) % self.p
    }

    pub fn pow(self, a: u32, mut e: u32) -> u32 {
        let mut base = a % self.p;
        let mut acc = 1 % self.p;
        while e > 0 {
            if e & 1 == 1 {
                acc = self.mul(acc, base);
            }
            base = self.mul(base, base);
            e >>= 1;
        }
        acc
    }

    /// Multiplicative inverse; `a` must be nonzero.
    pub fn inv(self, a: u32) -> u32 {
        debug_assert!(!a.is_multiple_of(self.p));
        self.pow(a, self.p - 2)
    }

    /// `p^n` as an exact count.
    pub fn count(self, n: usize) -> u128 {
        pow_sat(self.p as u64, n as u64)
    }

    /// `p^n` as a table length; fails when it does not fit in memory-sized
    /// integers.
    pub fn size(self, n: usize) -> Result<usize> {
        let c = self.count(n);
        usize::try_from(c)
            .ok()
            .filter(|&c| c < (1usize << 40))
            .ok_or_else(|| Error::BudgetExceeded {
                what: format!("table of size {}^{}", self.p, n),
                required: c,
                budget: 1 << 40,
            })
    }

    pub fn index_of(self, coords: &[u32]) -> usize {
        coords
            .iter()
            .rev()
            .fold(0usize, |acc, &c| acc * self.p as usize + c as usize)
    }

    pub fn coords_of(self, mut index: usize, n: usize) -> Vec<u32> {
        let p = self.p as usize;
        (0..n)
            .map(|_| {
                let d = (index % p) as u32;
                index /= p;
                d
            })
            .collect()
    }

    /// Index of `a + b` for points of `F_p^n` given by index.
    #[inline]
    pub fn add_index(self, a: usize, b: usize, n: usize) -> usize {
        if self.p == 2 {
            return a ^ b;
        }
        let p = self.p as usize;
        let (mut a, mut b) = (a, b);
        let mut out = 0;
        let mut place = 1;
        for _ in 0..n {
            out += ((a % p + b % p) % p) * place;
            a /= p;
            b /= p;
            place *= p;
        }
        out
    }

    /// Index of `-a`.
    #[inline]
    pub fn neg_index(self, a: usize, n: usize) -> usize {
        self.scale_index(self.p - 1, a, n)
    }

    /// Index of `c * a`.
    pub fn scale_index(self, c: u32, a: usize, n: usize) -> usize {
        let c = c % self.p;
        if c == 1 {
            return a;
        }
        if c == 0 {
            return 0;
        }
        let p = self.p as usize;
        let mut a = a;
        let mut out = 0;
        let mut place = 1;
        for _ in 0..n {
            out += ((a % p) * c as usize % p) * place;
            a /= p;
            place *= p;
        }
        out
    }

    /// Enumerates `F_p^n` in index order.
    pub fn points(self, n: usize) -> impl Iterator<Item = PointIndex> {
        let total = self.size(n).unwrap_or(0);
        (0..total).map(move |index| PointIndex { n, index })
    }

    pub(crate) fn digit_char(self, d: u32) -> char {
        char::from_digit(d, 36).expect("digit below 36")
    }

    pub(crate) fn parse_digit(self, c: char) -> Result<u32> {
        c.to_digit(36)
            .filter(|&d| d < self.p)
            .ok_or_else(|| Error::Parse(format!("`{c}` is not a base-{} digit", self.p)))
    }

    pub(crate) fn parse_digits(self, s: &str, len: usize) -> Result<Vec<u32>> {
        let digits = s
            .chars()
            .map(|c| self.parse_digit(c))
            .collect::<Result<Vec<_>>>()?;
        if digits.len() != len {
            return Err(Error::Parse(format!(
                "expected {len} digits, found `{s}`"
            )));
        }
        Ok(digits)
    }

    pub(crate) fn format_digits(self, digits: &[u32]) -> String {
        digits.iter().map(|&d| self.digit_char(d)).collect()
    }
}

/// A point of `F_p^n` in the canonical base-`p` encoding.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct PointIndex {
    pub n: usize,
    pub index: usize,
}

impl PointIndex {
    pub fn coords(self, field: Field) -> Vec<u32> {
        field.coords_of(self.index, self.n)
    }
}

/// Dense row-major matrix over `F_p`.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Matrix {
    rows: usize,
    cols: usize,
    data: Vec<u32>,
}

impl Matrix {
    pub fn zeros(rows: usize, cols: usize) -> Self {
        Matrix {
            rows,
            cols,
            data: vec![0; rows * cols],
        }
    }

    pub fn identity(n: usize) -> Self {
        let mut m = Matrix::zeros(n, n);
        for i in 0..n {
            m.set(i, i, 1);
        }
        m
    }

    pub fn from_rows(rows: &[Vec<u32>]) -> Result<Self> {
        let cols = rows.first().map_or(0, Vec::len);
        if rows.iter().any(|r| r.len() != cols) {
            return Err(Error::DimensionMismatch("ragged matrix rows".into()));
        }
        Ok(Matrix {
            rows: rows.len(),
            cols,
            data: rows.concat(),
        })
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    #[inline]
    pub fn get(&self, r: usize, c: usize) -> u32 {
        self.data[r * self.cols + c]
    }

    #[inline]
    pub fn set(&mut self, r: usize, c: usize, v: u32) {
        self.data[r * self.cols + c] = v;
    }

    pub fn row(&self, r: usize) -> &[u32] {
        &self.data[r * self.cols..(r + 1) * self.cols]
    }

    pub fn column(&self, c: usize) -> Vec<u32> {
        (0..self.rows).map(|r| self.get(r, c)).collect()
    }

    pub fn mul(&self, field: Field, other: &Matrix) -> Result<Matrix> {
        if self.cols != other.rows {
            return Err(Error::DimensionMismatch(format!(
                "cannot multiply {}x{} by {}x{}",
                self.rows, self.cols, other.rows, other.cols
            )));
        }
        let mut out = Matrix::zeros(self.rows, other.cols);
        for i in 0..self.rows {
            for j in 0..other.cols {
                let mut acc = 0;
                for t in 0..self.cols {
                    acc = (acc + self.get(i, t) * other.get(t, j)) % field.p();
                }
                out.set(i, j, acc);
            }
        }
        Ok(out)
    }

    pub fn mul_vec(&self, field: Field, v: &[u32]) -> Vec<u32> {
        (0..self.rows)
            .map(|i| {
                self.row(i)
                    .iter()
                    .zip(v)
                    .fold(0, |acc, (&a, &b)| (acc + a * b) % field.p())
            })
            .collect()
    }

    fn swap_rows(&mut self, a: usize, b: usize) {
        if a == b {
            return;
        }
        for c in 0..self.cols {
            self.data.swap(a * self.cols + c, b * self.cols + c);
        }
    }

    /// Reduces `self` in place to reduced row echelon form, choosing pivot
    /// columns left to right among the first `pivot_cols` columns. Returns
    /// the pivot columns.
    fn reduce(&mut self, field: Field, pivot_cols: usize) -> Vec<usize> {
        let mut pivots = Vec::new();
        let mut r = 0;
        for c in 0..pivot_cols.min(self.cols) {
            if r == self.rows {
                break;
            }
            let Some(pr) = (r..self.rows).find(|&i| self.get(i, c) != 0) else {
                continue;
            };
            self.swap_rows(r, pr);
            let inv = field.inv(self.get(r, c));
            for j in 0..self.cols {
                let v = field.mul(self.get(r, j), inv);
                self.set(r, j, v);
            }
            for i in 0..self.rows {
                let factor = self.get(i, c);
                if i != r && factor != 0 {
                    for j in 0..self.cols {
                        let v = field.sub(self.get(i, j), field.mul(factor, self.get(r, j)));
                        self.set(i, j, v);
                    }
                }
            }
            pivots.push(c);
            r += 1;
        }
        pivots
    }
}

/// Row rank of `m` over `F_p` by Gaussian elimination.
pub fn rank(field: Field, m: &Matrix) -> usize {
    let mut work = m.clone();
    let cols = work.cols;
    work.reduce(field, cols).len()
}

/// An affine map `x -> Mx + c` from `F_p^{in_dim}` to `F_p^{out_dim}`.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct AffineMap {
    field: Field,
    matrix: Matrix,
    shift: Vec<u32>,
    rank: usize,
}

impl AffineMap {
    pub fn new(field: Field, matrix: Matrix, shift: Vec<u32>) -> Result<Self> {
        if shift.len() != matrix.rows() {
            return Err(Error::DimensionMismatch(format!(
                "shift has length {} but matrix has {} rows",
                shift.len(),
                matrix.rows()
            )));
        }
        if matrix.data.iter().chain(&shift).any(|&v| v >= field.p()) {
            return Err(Error::InvalidArgument(format!(
                "entries must lie in [0, {})",
                field.p()
            )));
        }
        let rank = rank(field, &matrix);
        Ok(AffineMap {
            field,
            matrix,
            shift,
            rank,
        })
    }

    pub fn identity(field: Field, n: usize) -> Self {
        AffineMap {
            field,
            matrix: Matrix::identity(n),
            shift: vec![0; n],
            rank: n,
        }
    }

    pub fn translation(field: Field, shift: Vec<u32>) -> Result<Self> {
        let n = shift.len();
        AffineMap::new(field, Matrix::identity(n), shift)
    }

    /// The projection `F_p^big -> F_p^small` keeping the first `small`
    /// coordinates.
    pub fn canonical_projection(field: Field, big: usize, small: usize) -> Result<Self> {
        if small > big {
            return Err(Error::DimensionMismatch(format!(
                "cannot project F_p^{big} onto F_p^{small}"
            )));
        }
        let mut m = Matrix::zeros(small, big);
        for i in 0..small {
            m.set(i, i, 1);
        }
        Ok(AffineMap {
            field,
            matrix: m,
            shift: vec![0; small],
            rank: small,
        })
    }

    pub fn field(&self) -> Field {
        self.field
    }

    pub fn in_dim(&self) -> usize {
        self.matrix.cols()
    }

    pub fn out_dim(&self) -> usize {
        self.matrix.rows()
    }

    pub fn matrix(&self) -> &Matrix {
        &self.matrix
    }

    pub fn shift(&self) -> &[u32] {
        &self.shift
    }

    pub fn rank(&self) -> usize {
        self.rank
    }

    pub fn is_embedding(&self) -> bool {
        self.rank == self.in_dim()
    }

    pub fn is_bijection(&self) -> bool {
        self.in_dim() == self.out_dim() && self.rank == self.in_dim()
    }

    /// Full row rank: the map is onto `F_p^{out_dim}`.
    pub fn is_surjection(&self) -> bool {
        self.rank == self.out_dim()
    }

    pub fn apply(&self, x: &[u32]) -> Vec<u32> {
        let mut y = self.matrix.mul_vec(self.field, x);
        for (yi, &ci) in y.iter_mut().zip(&self.shift) {
            *yi = self.field.add(*yi, ci);
        }
        y
    }

    pub fn apply_index(&self, x: usize) -> usize {
        let coords = self.field.coords_of(x, self.in_dim());
        self.field.index_of(&self.apply(&coords))
    }

    /// Image index of every input point, in input index order.
    pub fn image_table(&self) -> Result<Vec<usize>> {
        let field = self.field;
        let (m, n) = (self.in_dim(), self.out_dim());
        let total = field.size(m)?;
        field.size(n)?;
        let columns: Vec<Vec<u32>> = (0..m).map(|j| self.matrix.column(j)).collect();
        let mut digits = vec![0u32; m];
        let mut y = self.shift.clone();
        let mut out = Vec::with_capacity(total);
        for _ in 0..total {
            out.push(field.index_of(&y));
            // Increment the base-p counter; each digit that changes adds its
            // column once (a wrap from p-1 to 0 completes a multiple of p).
            for j in 0..m {
                for (yi, &cij) in y.iter_mut().zip(&columns[j]) {
                    *yi = field.add(*yi, cij);
                }
                digits[j] += 1;
                if digits[j] < field.p() {
                    break;
                }
                digits[j] = 0;
            }
        }
        Ok(out)
    }

    /// `self ∘ inner`, i.e. `x -> self(inner(x))`.
    pub fn compose(&self, inner: &AffineMap) -> Result<AffineMap> {
        if self.in_dim() != inner.out_dim() || self.field != inner.field {
            return Err(Error::DimensionMismatch(format!(
                "cannot compose map on F_p^{} with map into F_p^{}",
                self.in_dim(),
                inner.out_dim()
            )));
        }
        let matrix = self.matrix.mul(self.field, &inner.matrix)?;
        let shift = self.apply(&inner.shift);
        AffineMap::new(self.field, matrix, shift)
    }

    /// An affine `A⁺` with `A⁺ ∘ A = id`. The witness comes from reducing
    /// `[M | I]` with pivots chosen left to right.
    pub fn left_inverse(&self) -> Result<AffineMap> {
        if !self.is_embedding() {
            return Err(Error::NotEmbedding {
                rank: self.rank,
                in_dim: self.in_dim(),
            });
        }
        let field = self.field;
        let (m, n) = (self.in_dim(), self.out_dim());
        let mut aug = Matrix::zeros(n, m + n);
        for i in 0..n {
            for j in 0..m {
                aug.set(i, j, self.matrix.get(i, j));
            }
            aug.set(i, m + i, 1);
        }
        let pivots = aug.reduce(field, m);
        debug_assert_eq!(pivots.len(), m);
        let mut linear = Matrix::zeros(m, n);
        for i in 0..m {
            for j in 0..n {
                linear.set(i, j, aug.get(i, m + j));
            }
        }
        let lc = linear.mul_vec(field, &self.shift);
        let shift = lc.iter().map(|&v| field.neg(v)).collect();
        AffineMap::new(field, linear, shift)
    }

    /// Inverse of a bijection.
    pub fn inverse(&self) -> Result<AffineMap> {
        if !self.is_bijection() {
            return Err(Error::InvalidArgument("map is not a bijection".into()));
        }
        self.left_inverse()
    }

    /// Uniform affine embedding `F_p^k -> F_p^n` by rejection sampling.
    pub fn random_embedding<R: Rng + ?Sized>(field: Field, k: usize, n: usize, rng: &mut R) -> Result<Self> {
        if k > n {
            return Err(Error::DimensionMismatch(format!(
                "no embedding of F_p^{k} into F_p^{n}"
            )));
        }
        Ok(Self::random_with_rank(field, k, n, k, rng))
    }

    pub fn random_bijection<R: Rng + ?Sized>(field: Field, n: usize, rng: &mut R) -> Self {
        Self::random_with_rank(field, n, n, n, rng)
    }

    /// Uniform full-row-rank affine map `F_p^m -> F_p^n` (`m >= n`).
    pub fn random_surjection<R: Rng + ?Sized>(field: Field, m: usize, n: usize, rng: &mut R) -> Result<Self> {
        if m < n {
            return Err(Error::DimensionMismatch(format!(
                "no surjection from F_p^{m} onto F_p^{n}"
            )));
        }
        Ok(Self::random_with_rank(field, m, n, n, rng))
    }

    fn random_with_rank<R: Rng + ?Sized>(field: Field, m: usize, n: usize, want: usize, rng: &mut R) -> Self {
        let p = field.p();
        loop {
            let data = (0..n * m).map(|_| rng.random_range(0..p)).collect();
            let matrix = Matrix { rows: n, cols: m, data };
            let shift: Vec<u32> = (0..n).map(|_| rng.random_range(0..p)).collect();
            let r = rank(field, &matrix);
            if r == want {
                return AffineMap {
                    field,
                    matrix,
                    shift,
                    rank: r,
                };
            }
        }
    }

    /// Every affine map `F_p^m -> F_p^n` of the given rank, ordered
    /// lexicographically by (matrix digits row-major, shift digits).
    fn enumerate_with_rank(field: Field, m: usize, n: usize, want: usize) -> impl Iterator<Item = AffineMap> {
        let p = field.p() as u128;
        let entries = n * m;
        let matrix_count = pow_sat(p as u64, entries as u64);
        let shift_count = pow_sat(p as u64, n as u64);
        (0..matrix_count)
            .filter_map(move |mi| {
                let data = lex_digits(mi, entries, p);
                let matrix = Matrix { rows: n, cols: m, data };
                let r = rank(field, &matrix);
                (r == want).then_some((matrix, r))
            })
            .flat_map(move |(matrix, r)| {
                (0..shift_count).map(move |si| AffineMap {
                    field,
                    matrix: matrix.clone(),
                    shift: lex_digits(si, n, p),
                    rank: r,
                })
            })
    }

    /// All affine bijections of `F_p^n`; cost `p^{n^2 + n}`.
    pub fn enumerate_bijections(field: Field, n: usize, budget: Budget) -> Result<impl Iterator<Item = AffineMap>> {
        budget.check(
            "affine bijection enumeration",
            pow_sat(field.p() as u64, (n * n + n) as u64),
        )?;
        Ok(Self::enumerate_with_rank(field, n, n, n))
    }

    /// All affine embeddings `F_p^k -> F_p^n`; cost `p^{kn + n}`.
    pub fn enumerate_embeddings(
        field: Field,
        k: usize,
        n: usize,
        budget: Budget,
    ) -> Result<impl Iterator<Item = AffineMap>> {
        if k > n {
            return Err(Error::DimensionMismatch(format!(
                "no embedding of F_p^{k} into F_p^{n}"
            )));
        }
        budget.check(
            "affine embedding enumeration",
            pow_sat(field.p() as u64, (k * n + n) as u64),
        )?;
        Ok(Self::enumerate_with_rank(field, k, n, k))
    }

    /// Text record: `p n m`, then `n` rows of `m` base-`p` digits, then the
    /// shift as `n` digits.
    pub fn to_text(&self) -> String {
        let f = self.field;
        let mut s = format!("{} {} {}\n", f.p(), self.out_dim(), self.in_dim());
        for r in 0..self.out_dim() {
            s.push_str(&f.format_digits(self.matrix.row(r)));
            s.push('\n');
        }
        s.push_str(&f.format_digits(&self.shift));
        s.push('\n');
        s
    }

    pub fn from_text(text: &str) -> Result<Self> {
        let mut lines = text.lines();
        let header = lines
            .next()
            .ok_or_else(|| Error::Parse("empty affine map record".into()))?;
        let nums = parse_header(header, 3)?;
        let field = Field::new(nums[0] as u32)?;
        let (n, m) = (nums[1], nums[2]);
        let mut rows = Vec::with_capacity(n);
        for _ in 0..n {
            let line = lines
                .next()
                .ok_or_else(|| Error::Parse("truncated affine map record".into()))?;
            rows.push(field.parse_digits(line.trim(), m)?);
        }
        let shift_line = lines
            .next()
            .ok_or_else(|| Error::Parse("missing shift line".into()))?;
        let shift = field.parse_digits(shift_line.trim(), n)?;
        let matrix = Matrix {
            rows: n,
            cols: m,
            data: rows.concat(),
        };
        AffineMap::new(field, matrix, shift)
    }
}

impl fmt::Display for AffineMap {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.to_text())
    }
}

fn lex_digits(mut v: u128, len: usize, p: u128) -> Vec<u32> {
    let mut out = vec![0u32; len];
    for slot in out.iter_mut().rev() {
        *slot = (v % p) as u32;
        v /= p;
    }
    out
}

pub(crate) fn parse_header(line: &str, count: usize) -> Result<Vec<usize>> {
    let nums = line
        .split_whitespace()
        .map(|t| {
            t.parse::<usize>()
                .map_err(|_| Error::Parse(format!("expected integer, found `{t}`")))
        })
        .collect::<Result<Vec<_>>>()?;
    if nums.len() != count {
        return Err(Error::Parse(format!(
            "header `{line}` should have {count} fields"
        )));
    }
    Ok(nums)
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;
    use std::collections::{HashMap, HashSet};

    fn f2() -> Field {
        Field::new(2).unwrap()
    }

    #[test]
    fn rejects_non_primes() {
        for p in [0, 1, 4, 9, 15, 19] {
            assert!(Field::new(p).is_err(), "{p}");
        }
        for p in [2, 3, 5, 7, 11, 13, 17] {
            assert!(Field::new(p).is_ok(), "{p}");
        }
    }

    #[test]
    fn rank_examples() {
        let f = f2();
        assert_eq!(rank(f, &Matrix::identity(3)), 3);
        assert_eq!(rank(f, &Matrix::zeros(2, 4)), 0);
        let m = Matrix::from_rows(&[vec![1, 0], vec![0, 1], vec![1, 1]]).unwrap();
        assert_eq!(rank(f, &m), 2);
    }

    #[test]
    fn point_encoding_first_coordinate_least_significant() {
        let f = Field::new(3).unwrap();
        assert_eq!(f.index_of(&[1, 0]), 1);
        assert_eq!(f.index_of(&[0, 1]), 3);
        assert_eq!(f.coords_of(7, 2), vec![1, 2]);
        for i in 0..27 {
            assert_eq!(f.index_of(&f.coords_of(i, 3)), i);
        }
        let a = f.index_of(&[2, 1, 0]);
        let b = f.index_of(&[2, 2, 1]);
        assert_eq!(f.add_index(a, b, 3), f.index_of(&[1, 0, 1]));
        assert_eq!(f.scale_index(2, b, 3), f.index_of(&[1, 1, 2]));
    }

    #[test]
    fn compose_with_identity_and_inverse() {
        let f = Field::new(3).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let a = AffineMap::random_bijection(f, 3, &mut rng);
        let id = AffineMap::identity(f, 3);
        assert_eq!(a.compose(&id).unwrap(), a);
        assert_eq!(a.compose(&a.inverse().unwrap()).unwrap(), id);
        assert_eq!(a.inverse().unwrap().compose(&a).unwrap(), id);
    }

    #[test]
    fn compose_agrees_pointwise() {
        let f = f2();
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let a = AffineMap::random_bijection(f, 3, &mut rng);
        let b = AffineMap::random_bijection(f, 3, &mut rng);
        let ab = a.compose(&b).unwrap();
        for x in 0..8 {
            assert_eq!(ab.apply_index(x), a.apply_index(b.apply_index(x)));
        }
    }

    #[test]
    fn compose_dimension_mismatch() {
        let f = f2();
        let a = AffineMap::identity(f, 2);
        let b = AffineMap::identity(f, 3);
        assert!(matches!(a.compose(&b), Err(Error::DimensionMismatch(_))));
    }

    #[test]
    fn left_inverse_examples() {
        let f = f2();
        let id = AffineMap::identity(f, 2);
        assert_eq!(id.left_inverse().unwrap(), id);

        let m = Matrix::from_rows(&[vec![1, 0], vec![0, 1], vec![1, 1]]).unwrap();
        let a = AffineMap::new(f, m, vec![0, 0, 0]).unwrap();
        let li = a.left_inverse().unwrap();
        assert_eq!(li.compose(&a).unwrap(), id);
        // Block form (I; B): the witness is (I | 0).
        assert_eq!(li.matrix(), &Matrix::from_rows(&[vec![1, 0, 0], vec![0, 1, 0]]).unwrap());

        let not_emb = AffineMap::new(f, Matrix::from_rows(&[vec![1, 1], vec![1, 1]]).unwrap(), vec![0, 0]).unwrap();
        assert!(matches!(not_emb.left_inverse(), Err(Error::NotEmbedding { .. })));
    }

    #[test]
    fn left_inverse_random_embeddings() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        for p in [2, 3] {
            let f = Field::new(p).unwrap();
            for t in 0..100 {
                let k = 1 + t % 4;
                let n = k + (t / 4) % (5 - k);
                let a = AffineMap::random_embedding(f, k, n, &mut rng).unwrap();
                let li = a.left_inverse().unwrap();
                assert_eq!(li.compose(&a).unwrap(), AffineMap::identity(f, k));
            }
        }
    }

    #[test]
    fn rank_of_composition_bounded() {
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let f = Field::new(3).unwrap();
        for _ in 0..50 {
            let m = Matrix::from_rows(
                &(0..3).map(|_| (0..4).map(|_| rng.random_range(0..3)).collect()).collect::<Vec<_>>(),
            )
            .unwrap();
            let a = AffineMap::new(f, m, vec![0; 3]).unwrap();
            let m2 = Matrix::from_rows(
                &(0..4).map(|_| (0..2).map(|_| rng.random_range(0..3)).collect()).collect::<Vec<_>>(),
            )
            .unwrap();
            let b = AffineMap::new(f, m2, vec![1; 4]).unwrap();
            let ab = a.compose(&b).unwrap();
            assert!(ab.rank() <= a.rank().min(b.rank()));
        }
    }

    #[test]
    fn enumerate_bijection_counts() {
        let f = f2();
        let one: Vec<_> = AffineMap::enumerate_bijections(f, 1, Budget::DEFAULT).unwrap().collect();
        assert_eq!(one.len(), 2);
        let two: Vec<_> = AffineMap::enumerate_bijections(f, 2, Budget::DEFAULT).unwrap().collect();
        assert_eq!(two.len(), 24);
        // Brute force over all 16 matrices x 4 shifts: distinct point maps.
        let tables: HashSet<Vec<usize>> = two.iter().map(|a| a.image_table().unwrap()).collect();
        assert_eq!(tables.len(), 24);
        let f3 = Field::new(3).unwrap();
        let c = AffineMap::enumerate_bijections(f3, 2, Budget::DEFAULT).unwrap().count();
        assert_eq!(c, 48 * 9);
        assert!(matches!(
            AffineMap::enumerate_bijections(f, 6, Budget(1000)),
            Err(Error::BudgetExceeded { .. })
        ));
    }

    #[test]
    fn embedding_enumeration_count() {
        let f = f2();
        assert_eq!(AffineMap::enumerate_embeddings(f, 1, 2, Budget::DEFAULT).unwrap().count(), 12);
        assert_eq!(AffineMap::enumerate_embeddings(f, 2, 3, Budget::DEFAULT).unwrap().count(), 8 * 7 * 6);
    }

    #[test]
    fn canonical_projection_identity() {
        let f = f2();
        assert_eq!(AffineMap::canonical_projection(f, 3, 3).unwrap(), AffineMap::identity(f, 3));
        let pr = AffineMap::canonical_projection(f, 3, 2).unwrap();
        assert_eq!(pr.apply(&[1, 0, 1]), vec![1, 0]);
    }

    #[test]
    fn image_table_matches_apply() {
        let f = Field::new(5).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let a = AffineMap::random_surjection(f, 3, 2, &mut rng).unwrap();
        let t = a.image_table().unwrap();
        for (x, &y) in t.iter().enumerate() {
            assert_eq!(y, a.apply_index(x));
        }
    }

    #[test]
    fn random_embedding_f2_dim1_uniform() {
        let f = f2();
        let mut rng = ChaCha8Rng::seed_from_u64(6);
        let draws = 10_000;
        let mut counts = HashMap::new();
        for _ in 0..draws {
            let a = AffineMap::random_embedding(f, 1, 1, &mut rng).unwrap();
            assert_eq!(a.rank(), 1);
            *counts.entry(a.shift().to_vec()).or_insert(0usize) += 1;
        }
        assert_eq!(counts.len(), 2);
        let sigma = (draws as f64 * 0.25).sqrt();
        for &c in counts.values() {
            assert!((c as f64 - draws as f64 / 2.0).abs() <= 3.0 * sigma);
        }
    }

    #[test]
    fn random_bijection_f2_dim2_hits_all_24_uniformly() {
        let f = f2();
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        let draws = 100_000usize;
        let mut counts: HashMap<AffineMap, usize> = HashMap::new();
        for _ in 0..draws {
            *counts.entry(AffineMap::random_embedding(f, 2, 2, &mut rng).unwrap()).or_default() += 1;
        }
        assert_eq!(counts.len(), 24);
        let q = 1.0 / 24.0;
        let sigma = (draws as f64 * q * (1.0 - q)).sqrt();
        for &c in counts.values() {
            assert!((c as f64 - draws as f64 * q).abs() <= 4.0 * sigma);
        }
    }

    #[test]
    fn text_round_trip() {
        let f = Field::new(13).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(8);
        let a = AffineMap::random_embedding(f, 2, 4, &mut rng).unwrap();
        let text = a.to_text();
        assert_eq!(AffineMap::from_text(&text).unwrap(), a);
        assert_eq!(AffineMap::from_text(&text).unwrap().to_text(), text);
        assert!(AffineMap::from_text("2 1 1\n2\n0\n").is_err());
    }
}
