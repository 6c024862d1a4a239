//! Acceptance suite: one pass/fail line per criterion.
//!
//! Runs with `cargo test -p hofa-core --test acceptance`. Exits non-zero if
//! any criterion fails.

use std::panic::{catch_unwind, AssertUnwindSafe};
use std::time::Instant;

use hofa_core::factor::energy_increment_decompose;
use hofa_core::gowers::{canonical_affine_systems, gowers_norm_exact, t_exact, t_mc, telescoping_residual};
use hofa_core::poly::{brute_force_rank_d, classical_polynomials, poly_rank};
use hofa_core::testers::{
    blow_up, blow_up_sequence, convergence_report, degree_structural_property, distance_to_property_bruteforce,
    spectral_norm_property, ConvergenceConfig, PiMethod,
};
use hofa_core::upsilon::{
    coupled_blow_up_restrictions, random_boolean, restriction_distribution, statistical_distance, upsilon_exact,
    RestrictionMode,
};
use hofa_core::{AffineMap, Budget, DenseFunction, Field, LinearFormSystem, NonClassicalPoly, Rank};
use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

const B: Budget = Budget::DEFAULT;

type Outcome = Result<String, String>;
type Criterion = (&'static str, fn() -> Outcome);

fn ensure(ok: bool, msg: impl FnOnce() -> String) -> Result<(), String> {
    if ok {
        Ok(())
    } else {
        Err(msg())
    }
}

fn field(p: u32) -> Field {
    Field::new(p).unwrap()
}

fn random_real(field: Field, n: usize, rng: &mut ChaCha8Rng) -> DenseFunction {
    let size = field.size(n).unwrap();
    let values: Vec<f64> = (0..size).map(|_| rng.random_range(-1.0..=1.0)).collect();
    DenseFunction::from_real(field, n, &values).unwrap()
}

fn random_complex(field: Field, n: usize, rng: &mut ChaCha8Rng) -> DenseFunction {
    DenseFunction::from_fn(field, n, |_| {
        Complex64::from_polar(rng.random_range(0.0..1.0), rng.random_range(0.0..std::f64::consts::TAU))
    })
    .unwrap()
}

fn gowers_cube_consistency() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(101);
    let mut worst: f64 = 0.0;
    for _ in 0..100 {
        let p = if rng.random_bool(0.5) { 2 } else { 3 };
        let n = rng.random_range(1..=3);
        let d = rng.random_range(1..=3);
        let f = random_real(field(p), n, &mut rng);
        let norm = gowers_norm_exact(&f, d, B).unwrap();
        let cube = LinearFormSystem::cube_system(field(p), d).unwrap();
        let t = t_exact(&f, &cube, B).unwrap().norm().powf(1.0 / (1u32 << d) as f64);
        worst = worst.max((norm - t).abs());
    }
    ensure(worst <= 1e-9, || format!("max gap {worst:.3e}"))?;
    Ok(format!("100 functions, max gap {worst:.3e}"))
}

fn gowers_l1_bound() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(102);
    let mut worst = f64::NEG_INFINITY;
    for _ in 0..1000 {
        let p = if rng.random_bool(0.5) { 2 } else { 3 };
        let n = rng.random_range(1..=3);
        let d = rng.random_range(1..=3);
        let f = random_real(field(p), n, &mut rng);
        let lhs = gowers_norm_exact(&f, d, B).unwrap();
        let rhs = f.l1_norm().powf(1.0 / (1u32 << d) as f64);
        worst = worst.max(lhs - rhs);
    }
    ensure(worst <= 1e-9, || format!("bound violated by {worst:.3e}"))?;
    Ok(format!("1000 functions, max ‖f‖_U - ‖f‖_1^(1/2^d) = {worst:.3e}"))
}

fn character_norm_is_one() -> Outcome {
    let mut checked = 0;
    let mut worst: f64 = 0.0;
    for (p, n, deg) in [(2, 3, 2), (3, 2, 1)] {
        let mut polys = classical_polynomials(field(p), n, deg, B).unwrap();
        polys.push(NonClassicalPoly::zero(field(p), n));
        for q in polys {
            let norm = gowers_norm_exact(&q.exponential().unwrap(), q.degree() + 1, B).unwrap();
            worst = worst.max((norm - 1.0).abs());
            checked += 1;
        }
    }
    ensure(worst <= 1e-9, || format!("max |‖e(P)‖ - 1| = {worst:.3e}"))?;
    Ok(format!("{checked} polynomials, max deviation {worst:.3e}"))
}

fn affine_invariance_of_t() -> Outcome {
    let f2 = field(2);
    let maps: Vec<AffineMap> = AffineMap::enumerate_bijections(f2, 2, B).unwrap().collect();
    ensure(maps.len() == 24, || format!("{} bijections", maps.len()))?;
    let systems = canonical_affine_systems(f2, 3, 3, B).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(104);
    let mut worst: f64 = 0.0;
    for _ in 0..20 {
        let f = random_complex(f2, 2, &mut rng);
        for l in &systems {
            let t = t_exact(&f, l, B).unwrap();
            for a in &maps {
                let ta = t_exact(&f.compose_affine(a).unwrap(), l, B).unwrap();
                worst = worst.max((t - ta).norm());
            }
        }
    }
    ensure(worst <= 1e-9, || format!("max gap {worst:.3e}"))?;
    Ok(format!("20 functions × {} systems × 24 bijections, max gap {worst:.3e}", systems.len()))
}

fn blow_up_preservation() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(105);
    let (mut l2, mut u) = (0.0f64, 0.0f64);
    for _ in 0..100 {
        let p = if rng.random_bool(0.5) { 2 } else { 3 };
        let n = rng.random_range(1..=3);
        let m = rng.random_range(n..=n + 2);
        let d = rng.random_range(1..=3);
        let f = random_complex(field(p), n, &mut rng);
        let a = AffineMap::random_surjection(field(p), m, n, &mut rng).unwrap();
        let g = f.compose_affine(&a).unwrap();
        l2 = l2.max((g.l2_norm() - f.l2_norm()).abs());
        u = u.max((gowers_norm_exact(&g, d, B).unwrap() - gowers_norm_exact(&f, d, B).unwrap()).abs());
    }
    ensure(l2 <= 1e-9 && u <= 1e-9, || format!("L2 gap {l2:.3e}, Gowers gap {u:.3e}"))?;
    Ok(format!("100 maps, L2 gap {l2:.3e}, Gowers gap {u:.3e}"))
}

fn telescoping_identity() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(106);
    let mut worst: f64 = 0.0;
    for _ in 0..100 {
        let p = if rng.random_bool(0.5) { 2 } else { 3 };
        let n = rng.random_range(1..=2);
        let d = rng.random_range(1..=3);
        let f = random_complex(field(p), n, &mut rng);
        let g = random_complex(field(p), n, &mut rng);
        let l = LinearFormSystem::cube_system(field(p), d).unwrap();
        worst = worst.max(telescoping_residual(&f, &g, &l, B).unwrap());
    }
    ensure(worst <= 1e-9, || format!("max residual {worst:.3e}"))?;
    Ok(format!("100 pairs, max residual {worst:.3e}"))
}

fn monte_carlo_calibration() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(107);
    let mut within = 0;
    for trial in 0..100 {
        let p = if rng.random_bool(0.5) { 2 } else { 3 };
        let n = rng.random_range(1..=3);
        let d = rng.random_range(1..=3);
        let f = random_complex(field(p), n, &mut rng);
        let l = LinearFormSystem::cube_system(field(p), d).unwrap();
        let exact = t_exact(&f, &l, B).unwrap();
        let est = t_mc(&f, &l, 100_000, 7000 + trial).unwrap();
        if (est.mean - exact).norm() <= 4.0 * est.std_error {
            within += 1;
        }
    }
    ensure(within >= 95, || format!("{within}/100 within 4 SE"))?;
    Ok(format!("{within}/100 within 4 SE"))
}

fn upsilon_axioms() -> Outcome {
    let f2 = field(2);
    let mut rng = ChaCha8Rng::seed_from_u64(108);
    let (mut asym, mut tri): (f64, f64) = (0.0, f64::NEG_INFINITY);
    let mut self_dist: f64 = 0.0;
    for i in 0..50 {
        let d = 2 + i % 2;
        let fs: Vec<DenseFunction> = (0..3).map(|_| random_real(f2, 2, &mut rng)).collect();
        let u = |a: &DenseFunction, b: &DenseFunction| upsilon_exact(a, b, d, B).unwrap().value;
        let (ab, ba, bc, ac) = (u(&fs[0], &fs[1]), u(&fs[1], &fs[0]), u(&fs[1], &fs[2]), u(&fs[0], &fs[2]));
        asym = asym.max((ab - ba).abs());
        tri = tri.max(ac - ab - bc);
        let a = AffineMap::random_bijection(f2, 2, &mut rng);
        self_dist = self_dist.max(u(&fs[0], &fs[0].compose_affine(&a).unwrap()));
    }
    ensure(asym <= 1e-9 && tri <= 1e-9 && self_dist == 0.0, || {
        format!("asymmetry {asym:.3e}, triangle excess {tri:.3e}, υ(f, f∘A) = {self_dist:.3e}")
    })?;
    Ok(format!(
        "50 triples, asymmetry {asym:.3e}, triangle excess {tri:.3e}, υ(f, f∘A) = 0"
    ))
}

fn blow_up_distance_invariance() -> Outcome {
    let f2 = field(2);
    let structured = degree_structural_property(f2, vec![2], 2, vec![1, 0]).unwrap();
    let props = [spectral_norm_property(1.0), structured];
    let mut rng = ChaCha8Rng::seed_from_u64(109);
    for prop in &props {
        for _ in 0..20 {
            let f = random_boolean(f2, 2, &mut rng).unwrap();
            let (g, _) = blow_up(&f, 3, rng.random()).unwrap();
            let df = distance_to_property_bruteforce(&f, prop, B).unwrap().0;
            let dg = distance_to_property_bruteforce(&g, prop, B).unwrap().0;
            ensure(df == dg, || format!("{}: ‖f‖ = {df}, ‖f∘A‖ = {dg}", prop.name()))?;
        }
    }
    Ok(format!("20 pairs each for {} and {}", props[0].name(), props[1].name()))
}

fn blow_up_sequence_convergence() -> Outcome {
    let f2 = field(2);
    let property = spectral_norm_property(1.0);
    let config = ConvergenceConfig {
        vars: 3,
        max_forms: 3,
        upsilon_degrees: vec![],
        restarts: 1,
        seed: 0,
        pi: PiMethod::BruteForce,
    };
    let mut rng = ChaCha8Rng::seed_from_u64(110);
    let (mut profile, mut pi_gap): (f64, f64) = (0.0, 0.0);
    for trial in 0..3 {
        let f = random_boolean(f2, 3, &mut rng).unwrap();
        let seq: Vec<DenseFunction> = blow_up_sequence(&f, &[3, 4, 5, 6], trial)
            .unwrap()
            .into_iter()
            .map(|(g, _)| g)
            .collect();
        let report = convergence_report(&seq, &property, &config, B).unwrap();
        profile = profile.max(report.max_profile_diff);
        pi_gap = pi_gap.max(report.max_pi_gap);
    }
    ensure(profile <= 1e-9 && pi_gap == 0.0, || {
        format!("profile gap {profile:.3e}, distance gap {pi_gap:.3e}")
    })?;
    Ok(format!("3 sequences over dims 3..6, profile gap {profile:.3e}, distance constant"))
}

fn energy_increment() -> Outcome {
    let f2 = field(2);
    let mut rng = ChaCha8Rng::seed_from_u64(111);
    let mut most_steps = 0;
    for _ in 0..50 {
        let f = random_boolean(f2, 3, &mut rng).unwrap();
        let dec = energy_increment_decompose(&f, 1, 0.1, 100, B).unwrap();
        most_steps = most_steps.max(dec.iterations.len());
        ensure(dec.iterations.len() <= 100, || "too many iterations".into())?;
        ensure(dec.residual_correlation <= 0.1, || format!("residual {}", dec.residual_correlation))?;
        let sum = dec.f1.add(&dec.f2).unwrap().add(&dec.f3).unwrap();
        ensure(sum.sub(&f).unwrap().sup_norm() <= 1e-9, || "f ≠ f1 + f2 + f3".into())?;
        ensure(
            dec.f1.values().iter().all(|v| v.im.abs() <= 1e-12 && (-1e-12..=1.0 + 1e-12).contains(&v.re)),
            || "f1 leaves [0, 1]".into(),
        )?;
        // f3 is orthogonal to every atom indicator, hence to all factor-measurable functions.
        let mut atom_sums = vec![Complex64::new(0.0, 0.0); dec.factor.atom_count()];
        for (x, v) in dec.f3.values().iter().enumerate() {
            atom_sums[dec.factor.atom_id(x)] += v;
        }
        let worst = atom_sums.iter().map(|s| s.norm() / f.len() as f64).fold(0.0, f64::max);
        ensure(worst <= 1e-9, || format!("projection residual {worst:.3e}"))?;
        ensure(dec.f3.inner(&dec.f1).unwrap().norm() <= 1e-9, || "f3 not orthogonal to f1".into())?;
    }
    Ok(format!("50 functions, at most {most_steps} iterations"))
}

fn rank_oracle_sanity() -> Outcome {
    let mut checked = 0;
    for (p, n) in [(2, 3), (3, 2)] {
        let fp = field(p);
        for q in classical_polynomials(fp, n, 2, B).unwrap() {
            let d = q.degree();
            let base = brute_force_rank_d(&q.table().unwrap(), d, 3, B).unwrap().rank;
            for lambda in 1..p as u64 {
                let scaled = brute_force_rank_d(&q.scale(lambda).table().unwrap(), d, 3, B).unwrap().rank;
                ensure(scaled == base, || format!("rank changed under scaling by {lambda} over F_{p}"))?;
                checked += 1;
            }
        }
    }
    for n in 2..=3 {
        let mut exps = vec![0; n];
        exps[0] = 1;
        exps[1] = 1;
        let x1x2 = NonClassicalPoly::classical(field(2), n, [(1, exps)]).unwrap();
        let r = poly_rank(&x1x2, 3, B).unwrap().rank;
        ensure(r == Rank::Finite(2), || format!("rank_2(x1 x2) = {r} on F_2^{n}"))?;
    }
    Ok(format!("{checked} (P, λ) pairs; rank_2(x1 x2) = 2"))
}

fn restriction_machinery() -> Outcome {
    let f2 = field(2);
    let mut rng = ChaCha8Rng::seed_from_u64(113);
    for n in 3..=5 {
        for _ in 0..5 {
            let f = random_boolean(f2, n, &mut rng).unwrap();
            let a = AffineMap::random_bijection(f2, n, &mut rng);
            let pf = restriction_distribution(&f, 1, RestrictionMode::Exact, B).unwrap();
            let pa = restriction_distribution(&f.compose_affine(&a).unwrap(), 1, RestrictionMode::Exact, B).unwrap();
            let dist = statistical_distance(&pf, &pa).unwrap();
            ensure(dist == 0.0, || format!("exact distance {dist} under a bijection"))?;
        }
    }
    let mut dists = Vec::new();
    for n in 8..=12 {
        let f = random_boolean(f2, n, &mut rng).unwrap();
        let (_, a) = blow_up(&f, 12, 5).unwrap();
        let (pf, pg) = coupled_blow_up_restrictions(&f, &a, 1, 100_000, 13).unwrap();
        dists.push(statistical_distance(&pf, &pg).unwrap());
    }
    let shown: Vec<String> = dists.iter().map(|d| format!("{d:.5}")).collect();
    ensure(dists.iter().all(|&d| d <= 0.1), || format!("distances {shown:?} exceed 0.1"))?;
    ensure(dists.windows(2).all(|w| w[1] <= w[0]), || {
        format!("distances {shown:?} increase with dimension")
    })?;
    Ok(format!("bijections give 0; blow-ups to F_2^12 from n = 8..12: {}", shown.join(", ")))
}

fn main() {
    let criteria: [Criterion; 13] = [
        ("Gowers norm agrees with the cube average", gowers_cube_consistency),
        ("Gowers norm bounded by L1 norm", gowers_l1_bound),
        ("polynomial phases have unit Gowers norm", character_norm_is_one),
        ("t_L is affine invariant", affine_invariance_of_t),
        ("blow-ups preserve L2 and Gowers norms", blow_up_preservation),
        ("telescoping identity", telescoping_identity),
        ("Monte-Carlo calibration", monte_carlo_calibration),
        ("υ pseudo-metric axioms", upsilon_axioms),
        ("blow-up distance invariance", blow_up_distance_invariance),
        ("t-convergence of blow-up sequences", blow_up_sequence_convergence),
        ("energy-increment decomposition", energy_increment),
        ("rank oracle sanity", rank_oracle_sanity),
        ("restriction machinery", restriction_machinery),
    ];
    let mut failures = 0;
    for (i, (name, check)) in criteria.iter().enumerate() {
        let start = Instant::now();
        let outcome = catch_unwind(AssertUnwindSafe(check)).unwrap_or_else(|e| {
            Err(e
                .downcast_ref::<String>()
                .cloned()
                .or_else(|| e.downcast_ref::<&str>().map(|s| s.to_string()))
                .unwrap_or_else(|| "panicked".into()))
        });
        let secs = start.elapsed().as_secs_f64();
        match outcome {
            Ok(detail) => println!("[PASS] AC{:02} {name}: {detail} ({secs:.1}s)", i + 1),
            Err(detail) => {
                failures += 1;
                println!("[FAIL] AC{:02} {name}: {detail} ({secs:.1}s)", i + 1);
            }
        }
    }
    println!("acceptance: {} passed, {failures} failed", criteria.len() - failures);
    if failures > 0 {
        std::process::exit(1);
    }
}
