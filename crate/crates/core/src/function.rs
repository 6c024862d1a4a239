//! Dense function tables `f: F_p^n -> C`, with a `{0,1}`-valued flavour.

use std::f64::consts::PI;
use std::fmt::Write as _;

use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::field::{parse_header, AffineMap, Field};
use crate::sum::pairwise_sum;

/// Largest table the crate will allocate (`p^n <= 2^24`).
pub const MAX_POINTS: usize = 1 << 24;

const ZERO: Complex64 = Complex64::new(0.0, 0.0);
const ONE: Complex64 = Complex64::new(1.0, 0.0);

/// `e_p(t) = exp(2πi t / p)` for `t` taken in `{0, ..., p-1}`.
pub fn e_p(p: u32, t: u32) -> Complex64 {
    Complex64::from_polar(1.0, 2.0 * PI * (t % p) as f64 / p as f64)
}

fn check_size(field: Field, n: usize) -> Result<usize> {
    let size = field.size(n)?;
    if size > MAX_POINTS {
        return Err(Error::BudgetExceeded {
            what: format!("dense table over F_{}^{}", field.p(), n),
            required: size as u128,
            budget: MAX_POINTS as u64,
        });
    }
    Ok(size)
}

#[derive(Debug, Clone, PartialEq)]
pub struct DenseFunction {
    field: Field,
    n: usize,
    values: Vec<Complex64>,
    boolean: bool,
}

impl DenseFunction {
    pub fn from_complex(field: Field, n: usize, values: Vec<Complex64>) -> Result<Self> {
        let size = check_size(field, n)?;
        if values.len() != size {
            return Err(Error::DimensionMismatch(format!(
                "table has {} values, F_{}^{} has {} points",
                values.len(),
                field.p(),
                n,
                size
            )));
        }
        Ok(DenseFunction {
            field,
            n,
            values,
            boolean: false,
        })
    }

    pub fn from_real(field: Field, n: usize, values: &[f64]) -> Result<Self> {
        Self::from_complex(field, n, values.iter().map(|&v| Complex64::new(v, 0.0)).collect())
    }

    pub fn from_bits(field: Field, n: usize, bits: &[bool]) -> Result<Self> {
        let mut f = Self::from_complex(
            field,
            n,
            bits.iter().map(|&b| if b { ONE } else { ZERO }).collect(),
        )?;
        f.boolean = true;
        Ok(f)
    }

    /// Builds a table by evaluating `g` on the coordinates of every point.
    pub fn from_fn(field: Field, n: usize, mut g: impl FnMut(&[u32]) -> Complex64) -> Result<Self> {
        let size = check_size(field, n)?;
        let values = (0..size).map(|i| g(&field.coords_of(i, n))).collect();
        Self::from_complex(field, n, values)
    }

    pub fn boolean_from_fn(field: Field, n: usize, mut g: impl FnMut(&[u32]) -> bool) -> Result<Self> {
        let size = check_size(field, n)?;
        let bits: Vec<bool> = (0..size).map(|i| g(&field.coords_of(i, n))).collect();
        Self::from_bits(field, n, &bits)
    }

    pub fn constant(field: Field, n: usize, c: Complex64) -> Result<Self> {
        let size = check_size(field, n)?;
        let mut f = Self::from_complex(field, n, vec![c; size])?;
        f.boolean = c == ZERO || c == ONE;
        Ok(f)
    }

    pub fn field(&self) -> Field {
        self.field
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn values(&self) -> &[Complex64] {
        &self.values
    }

    #[inline]
    pub fn value(&self, index: usize) -> Complex64 {
        self.values[index]
    }

    pub fn is_boolean(&self) -> bool {
        self.boolean
    }

    /// The `{0,1}` table of a boolean function.
    pub fn bits(&self) -> Option<Vec<u8>> {
        self.boolean
            .then(|| self.values.iter().map(|v| u8::from(v.re != 0.0)).collect())
    }

    /// Re-flags the table as boolean if every value is exactly 0 or 1.
    pub fn into_boolean(mut self) -> Result<Self> {
        if self.values.iter().any(|&v| v != ZERO && v != ONE) {
            return Err(Error::InvalidArgument("function is not {0,1}-valued".into()));
        }
        self.boolean = true;
        Ok(self)
    }

    fn same_domain(&self, other: &DenseFunction) -> Result<()> {
        if self.field != other.field || self.n != other.n {
            return Err(Error::DimensionMismatch(format!(
                "functions on F_{}^{} and F_{}^{}",
                self.field.p(),
                self.n,
                other.field.p(),
                other.n
            )));
        }
        Ok(())
    }

    fn zip_with(&self, other: &DenseFunction, op: impl Fn(Complex64, Complex64) -> Complex64) -> Result<Self> {
        self.same_domain(other)?;
        let values = self.values.iter().zip(&other.values).map(|(&a, &b)| op(a, b)).collect();
        Self::from_complex(self.field, self.n, values)
    }

    pub fn add(&self, other: &DenseFunction) -> Result<Self> {
        self.zip_with(other, |a, b| a + b)
    }

    pub fn sub(&self, other: &DenseFunction) -> Result<Self> {
        self.zip_with(other, |a, b| a - b)
    }

    pub fn mul(&self, other: &DenseFunction) -> Result<Self> {
        let mut out = self.zip_with(other, |a, b| a * b)?;
        out.boolean = self.boolean && other.boolean;
        Ok(out)
    }

    pub fn scale(&self, c: Complex64) -> Self {
        DenseFunction {
            field: self.field,
            n: self.n,
            values: self.values.iter().map(|&v| v * c).collect(),
            boolean: false,
        }
    }

    pub fn map(&self, g: impl Fn(Complex64) -> Complex64) -> Self {
        DenseFunction {
            field: self.field,
            n: self.n,
            values: self.values.iter().map(|&v| g(v)).collect(),
            boolean: false,
        }
    }

    pub fn conj(&self) -> Self {
        let mut out = self.map(|v| v.conj());
        out.boolean = self.boolean;
        out
    }

    /// `f ∘ A` for `A: F_p^m -> F_p^n`.
    pub fn compose_affine(&self, a: &AffineMap) -> Result<Self> {
        if a.out_dim() != self.n || a.field() != self.field {
            return Err(Error::DimensionMismatch(format!(
                "map into F_{}^{} composed with function on F_{}^{}",
                a.field().p(),
                a.out_dim(),
                self.field.p(),
                self.n
            )));
        }
        check_size(self.field, a.in_dim())?;
        let values = a.image_table()?.into_iter().map(|y| self.values[y]).collect();
        Ok(DenseFunction {
            field: self.field,
            n: a.in_dim(),
            values,
            boolean: self.boolean,
        })
    }

    /// `(Δ_h f)(x) = f(x + h) · conj(f(x))`.
    pub fn multiplicative_derivative(&self, h: usize) -> Self {
        let values = (0..self.values.len())
            .map(|x| self.values[self.field.add_index(x, h, self.n)] * self.values[x].conj())
            .collect();
        DenseFunction {
            field: self.field,
            n: self.n,
            values,
            boolean: self.boolean,
        }
    }

    pub fn mean(&self) -> Complex64 {
        pairwise_sum(&self.values) / self.values.len() as f64
    }

    pub fn l1_norm(&self) -> f64 {
        let abs: Vec<f64> = self.values.iter().map(|v| v.norm()).collect();
        pairwise_sum(&abs) / abs.len() as f64
    }

    pub fn l2_norm(&self) -> f64 {
        let sq: Vec<f64> = self.values.iter().map(|v| v.norm_sqr()).collect();
        (pairwise_sum(&sq) / sq.len() as f64).sqrt()
    }

    pub fn sup_norm(&self) -> f64 {
        self.values.iter().map(|v| v.norm()).fold(0.0, f64::max)
    }

    /// `E_x f(x) conj(g(x))`.
    pub fn inner(&self, other: &DenseFunction) -> Result<Complex64> {
        Ok(self.zip_with(other, |a, b| a * b.conj())?.mean())
    }

    /// Fraction of points where the tables differ.
    pub fn hamming_distance(&self, other: &DenseFunction) -> Result<f64> {
        self.same_domain(other)?;
        let diff = self.values.iter().zip(&other.values).filter(|(a, b)| a != b).count();
        Ok(diff as f64 / self.values.len() as f64)
    }

    /// `f̂(α) = E_x f(x) e_p(-<α, x>)`, computed axis by axis.
    pub fn character_transform(&self) -> FourierTable {
        let p = self.field.p() as usize;
        let roots: Vec<Complex64> = (0..p as u32).map(|t| e_p(p as u32, (p as u32 - t) % p as u32)).collect();
        let mut coeffs = self.values.clone();
        dft_axes(&mut coeffs, p, self.n, &roots);
        let scale = 1.0 / coeffs.len() as f64;
        coeffs.iter_mut().for_each(|c| *c *= scale);
        FourierTable {
            field: self.field,
            n: self.n,
            coefficients: coeffs,
        }
    }

    /// `Σ_α |f̂(α)|`.
    pub fn spectral_norm(&self) -> f64 {
        self.character_transform().spectral_norm()
    }

    /// Function file: header `p n flags` (flags 1 = boolean, 0 = complex),
    /// then a hex bitstring for boolean functions over `F_2`, otherwise one
    /// `re im` pair per line.
    pub fn to_text(&self) -> String {
        let mut s = format!("{} {} {}\n", self.field.p(), self.n, u8::from(self.boolean));
        if self.boolean && self.field.p() == 2 {
            let bits = self.bits().expect("boolean");
            for chunk in bits.chunks(4) {
                let nibble = chunk.iter().enumerate().fold(0u32, |acc, (i, &b)| acc | ((b as u32) << i));
                s.push(char::from_digit(nibble, 16).expect("nibble"));
            }
            s.push('\n');
        } else {
            for v in &self.values {
                let _ = writeln!(s, "{} {}", v.re, v.im);
            }
        }
        s
    }

    pub fn from_text(text: &str) -> Result<Self> {
        let mut lines = text.lines().filter(|l| !l.trim().is_empty());
        let header = lines
            .next()
            .ok_or_else(|| Error::Parse("empty function file".into()))?;
        let h = parse_header(header, 3)?;
        let field = Field::new(h[0] as u32)?;
        let n = h[1];
        let boolean = match h[2] {
            0 => false,
            1 => true,
            other => return Err(Error::Parse(format!("unknown flags value {other}"))),
        };
        let size = check_size(field, n)?;
        if boolean && field.p() == 2 {
            let hex = lines
                .next()
                .ok_or_else(|| Error::Parse("missing hex bitstring".into()))?
                .trim();
            if hex.len() != size.div_ceil(4) {
                return Err(Error::Parse(format!(
                    "hex bitstring has {} digits, expected {}",
                    hex.len(),
                    size.div_ceil(4)
                )));
            }
            let mut bits = Vec::with_capacity(size);
            for (j, c) in hex.chars().enumerate() {
                let nibble = c
                    .to_digit(16)
                    .ok_or_else(|| Error::Parse(format!("`{c}` is not a hex digit")))?;
                for i in 0..4 {
                    let idx = 4 * j + i;
                    let bit = (nibble >> i) & 1 == 1;
                    if idx < size {
                        bits.push(bit);
                    } else if bit {
                        return Err(Error::Parse("padding bits must be zero".into()));
                    }
                }
            }
            return Self::from_bits(field, n, &bits);
        }
        let mut values = Vec::with_capacity(size);
        for line in lines {
            let mut parts = line.split_whitespace();
            let mut next = || -> Result<f64> {
                let t = parts
                    .next()
                    .ok_or_else(|| Error::Parse(format!("bad value line `{line}`")))?;
                t.parse::<f64>()
                    .map_err(|_| Error::Parse(format!("bad number `{t}`")))
            };
            let re = next()?;
            let im = next()?;
            values.push(Complex64::new(re, im));
        }
        let f = Self::from_complex(field, n, values)?;
        if boolean {
            f.into_boolean()
        } else {
            Ok(f)
        }
    }
}

/// Applies a length-`p` DFT with the given root table along every axis.
fn dft_axes(data: &mut [Complex64], p: usize, n: usize, roots: &[Complex64]) {
    let mut buf = vec![ZERO; p];
    let mut stride = 1;
    for _ in 0..n {
        let block = stride * p;
        for base in (0..data.len()).step_by(block) {
            for off in 0..stride {
                for (a, slot) in buf.iter_mut().enumerate() {
                    *slot = (0..p)
                        .map(|x| data[base + off + x * stride] * roots[(a * x) % p])
                        .fold(ZERO, |acc, v| acc + v);
                }
                for (a, &v) in buf.iter().enumerate() {
                    data[base + off + a * stride] = v;
                }
            }
        }
        stride = block;
    }
}

/// Character coefficients of a function, indexed like points.
#[derive(Debug, Clone, PartialEq)]
pub struct FourierTable {
    field: Field,
    n: usize,
    coefficients: Vec<Complex64>,
}

impl FourierTable {
    pub fn coefficients(&self) -> &[Complex64] {
        &self.coefficients
    }

    pub fn coefficient(&self, alpha: &[u32]) -> Complex64 {
        self.coefficients[self.field.index_of(alpha)]
    }

    pub fn spectral_norm(&self) -> f64 {
        let abs: Vec<f64> = self.coefficients.iter().map(|c| c.norm()).collect();
        pairwise_sum(&abs)
    }

    pub fn energy(&self) -> f64 {
        let sq: Vec<f64> = self.coefficients.iter().map(|c| c.norm_sqr()).collect();
        pairwise_sum(&sq)
    }

    /// `f(x) = Σ_α f̂(α) e_p(<α, x>)`.
    pub fn inverse(&self) -> DenseFunction {
        let p = self.field.p() as usize;
        let roots: Vec<Complex64> = (0..p as u32).map(|t| e_p(p as u32, t)).collect();
        let mut values = self.coefficients.clone();
        dft_axes(&mut values, p, self.n, &roots);
        DenseFunction {
            field: self.field,
            n: self.n,
            values,
            boolean: false,
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::field::Matrix;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn f2() -> Field {
        Field::new(2).unwrap()
    }

    fn random_complex(field: Field, n: usize, rng: &mut ChaCha8Rng) -> DenseFunction {
        DenseFunction::from_fn(field, n, |_| Complex64::new(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0)))
            .unwrap()
    }

    fn delta0(n: usize) -> DenseFunction {
        DenseFunction::boolean_from_fn(f2(), n, |x| x.iter().all(|&c| c == 0)).unwrap()
    }

    /// Direct `O(p^{2n})` transform used as an oracle.
    fn naive_transform(f: &DenseFunction) -> Vec<Complex64> {
        let field = f.field();
        let size = f.len();
        (0..size)
            .map(|a| {
                let alpha = field.coords_of(a, f.n());
                let s: Complex64 = (0..size)
                    .map(|x| {
                        let xs = field.coords_of(x, f.n());
                        let dot = alpha.iter().zip(&xs).fold(0, |acc, (&u, &v)| field.add(acc, field.mul(u, v)));
                        f.value(x) * e_p(field.p(), field.neg(dot))
                    })
                    .sum();
                s / size as f64
            })
            .collect()
    }

    #[test]
    fn compose_with_identity_is_noop() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let f = random_complex(Field::new(3).unwrap(), 2, &mut rng);
        let id = AffineMap::identity(f.field(), 2);
        assert_eq!(f.compose_affine(&id).unwrap(), f);
    }

    #[test]
    fn compose_with_projection_gives_fiber_indicator() {
        let f = delta0(2);
        let pr = AffineMap::canonical_projection(f2(), 3, 2).unwrap();
        let g = f.compose_affine(&pr).unwrap();
        assert_eq!(g.n(), 3);
        let ones: Vec<usize> = (0..8).filter(|&i| g.value(i) == ONE).collect();
        // Points (0,0,0) and (0,0,1).
        assert_eq!(ones, vec![0, 4]);
        assert!(g.is_boolean());
    }

    #[test]
    fn compose_with_bijection_permutes_values() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let field = Field::new(3).unwrap();
        let f = DenseFunction::from_fn(field, 2, |x| Complex64::new((x[0] + 3 * x[1]) as f64, 0.0)).unwrap();
        let a = AffineMap::random_bijection(field, 2, &mut rng);
        let mut before: Vec<f64> = f.values().iter().map(|v| v.re).collect();
        let mut after: Vec<f64> = f.compose_affine(&a).unwrap().values().iter().map(|v| v.re).collect();
        before.sort_by(f64::total_cmp);
        after.sort_by(f64::total_cmp);
        assert_eq!(before, after);
    }

    #[test]
    fn compose_dimension_mismatch() {
        let f = delta0(2);
        assert!(matches!(
            f.compose_affine(&AffineMap::identity(f2(), 3)),
            Err(Error::DimensionMismatch(_))
        ));
    }

    #[test]
    fn multiplicative_derivative_examples() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let f = random_complex(Field::new(3).unwrap(), 2, &mut rng);
        let d0 = f.multiplicative_derivative(0);
        for i in 0..f.len() {
            assert!((d0.value(i) - f.value(i).norm_sqr()).norm() < 1e-15);
        }
        let c = DenseFunction::constant(f2(), 2, Complex64::new(0.6, 0.8)).unwrap();
        assert!(c.multiplicative_derivative(3).values().iter().all(|v| (v - ONE).norm() < 1e-15));
        // e_2(x_1) on F_2, h = 1.
        let chi = DenseFunction::from_real(f2(), 1, &[1.0, -1.0]).unwrap();
        assert_eq!(chi.multiplicative_derivative(1).values(), &[-ONE, -ONE]);
    }

    #[test]
    fn norms_and_distances() {
        let f = delta0(2);
        assert_eq!(f.l1_norm(), 0.25);
        assert_eq!(f.l2_norm(), 0.5);
        assert_eq!(f.hamming_distance(&f).unwrap(), 0.0);
        let comp = f.map(|v| ONE - v).into_boolean().unwrap();
        assert_eq!(f.hamming_distance(&comp).unwrap(), 1.0);
        assert_eq!(f.sub(&comp).unwrap().l1_norm(), 1.0);
        assert!(f.hamming_distance(&delta0(3)).is_err());
    }

    #[test]
    fn transform_examples() {
        let one = DenseFunction::constant(f2(), 3, ONE).unwrap();
        let t = one.character_transform();
        assert!((t.coefficients()[0] - ONE).norm() < 1e-12);
        assert!(t.coefficients()[1..].iter().all(|c| c.norm() < 1e-12));
        assert!((t.spectral_norm() - 1.0).abs() < 1e-12);

        let dictator = DenseFunction::from_bits(f2(), 1, &[false, true]).unwrap();
        let t = dictator.character_transform();
        assert!((t.coefficients()[0] - Complex64::new(0.5, 0.0)).norm() < 1e-12);
        assert!((t.coefficients()[1] - Complex64::new(-0.5, 0.0)).norm() < 1e-12);
        assert!((dictator.spectral_norm() - 1.0).abs() < 1e-12);

        let and = DenseFunction::boolean_from_fn(f2(), 2, |x| x[0] == 1 && x[1] == 1).unwrap();
        let t = and.character_transform();
        assert!(t.coefficients().iter().all(|c| (c.norm() - 0.25).abs() < 1e-12));
        assert!((and.spectral_norm() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn transform_matches_naive_and_inverts() {
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        for (p, n) in [(2, 3), (3, 2), (5, 2), (7, 1)] {
            let field = Field::new(p).unwrap();
            let f = random_complex(field, n, &mut rng);
            let t = f.character_transform();
            for (a, b) in t.coefficients().iter().zip(naive_transform(&f)) {
                assert!((a - b).norm() < 1e-12);
            }
            let back = t.inverse();
            for (a, b) in back.values().iter().zip(f.values()) {
                assert!((a - b).norm() < 1e-9);
            }
            let parseval = f.l2_norm().powi(2);
            assert!((t.energy() - parseval).abs() < 1e-9);
        }
    }

    #[test]
    fn l2_preserved_by_blow_up() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        for t in 0..100 {
            let p = if t % 2 == 0 { 2 } else { 3 };
            let field = Field::new(p).unwrap();
            let n = 1 + t % 2;
            let m = n + (t / 2) % (5 - n);
            let f = random_complex(field, n, &mut rng);
            let a = AffineMap::random_surjection(field, m, n, &mut rng).unwrap();
            let g = f.compose_affine(&a).unwrap();
            assert!((g.l2_norm() - f.l2_norm()).abs() < 1e-12);
        }
    }

    #[test]
    fn compose_distributes_over_sums() {
        let mut rng = ChaCha8Rng::seed_from_u64(6);
        let field = Field::new(3).unwrap();
        let f = random_complex(field, 2, &mut rng);
        let g = random_complex(field, 2, &mut rng);
        let m = Matrix::from_rows(&[vec![1, 2, 0], vec![0, 1, 1]]).unwrap();
        let a = AffineMap::new(field, m, vec![2, 1]).unwrap();
        let lhs = f.add(&g).unwrap().compose_affine(&a).unwrap();
        let rhs = f.compose_affine(&a).unwrap().add(&g.compose_affine(&a).unwrap()).unwrap();
        assert_eq!(lhs, rhs);
    }

    #[test]
    fn text_round_trip() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        let b = DenseFunction::boolean_from_fn(f2(), 3, |_| rng.random_bool(0.5)).unwrap();
        assert_eq!(DenseFunction::from_text(&b.to_text()).unwrap(), b);
        let one_var = DenseFunction::from_bits(f2(), 1, &[true, false]).unwrap();
        assert_eq!(one_var.to_text(), "2 1 1\n1\n");
        assert_eq!(DenseFunction::from_text(&one_var.to_text()).unwrap(), one_var);
        let c = random_complex(Field::new(5).unwrap(), 2, &mut rng);
        let back = DenseFunction::from_text(&c.to_text()).unwrap();
        for (a, b) in back.values().iter().zip(c.values()) {
            assert!((a - b).norm() <= 1e-12);
        }
        let b3 = DenseFunction::boolean_from_fn(Field::new(3).unwrap(), 2, |x| x[0] == x[1]).unwrap();
        assert_eq!(DenseFunction::from_text(&b3.to_text()).unwrap(), b3);
        assert!(DenseFunction::from_text("2 2 1\nfff\n").is_err());
        assert!(DenseFunction::from_text("2 1 1\n4\n").is_err());
    }

    #[test]
    fn oversized_tables_rejected() {
        assert!(matches!(
            DenseFunction::constant(f2(), 25, ONE),
            Err(Error::BudgetExceeded { .. })
        ));
    }
}
