use std::path::{Path, PathBuf};

use hofa_core::factor::{energy_increment_decompose, factor_energy};
use hofa_core::gowers::{gowers_norm_exact, gowers_norm_mc, t_exact, t_mc};
use hofa_core::poly::{poly_rank, sequence_rank};
use hofa_core::sampling::stream_rng;
use hofa_core::testers::{
    blow_up, blow_up_sequence, convergence_report, distance_to_property_bruteforce, oblivious_estimate, parse_property,
    tester_decision, ConvergenceConfig, Membership, ParameterOracle, PiMethod,
};
use hofa_core::upsilon::{
    coupled_blow_up_restrictions, random_boolean, restriction_distribution, statistical_distance, upsilon_cross,
    RestrictionDistribution, RestrictionMode, Search,
};
use hofa_core::{Budget, DenseFunction, Error, Field, LinearFormSystem, NonClassicalPoly};
use serde_json::{json, Map, Value};

use crate::error::{CliError, CliResult};
use crate::output::{complex, fingerprint, write_file, Report};
use crate::{Cli, Command, Common, InputArgs};

/// Stream reserved for generating random inputs, away from the sampling
/// streams which count up from 0.
const INPUT_STREAM: u64 = u64::MAX;

struct Ctx<'a> {
    common: &'a Common,
    budget: Budget,
    report: Report,
    inputs: Vec<Value>,
    options: Map<String, Value>,
}

pub fn run(cli: &Cli) -> CliResult<()> {
    let common = &cli.common;
    let budget = match common.budget {
        Some(0) => return Err(CliError::Usage("--budget must be positive".into())),
        Some(b) => Budget(b),
        None => Budget::DEFAULT,
    };
    let mut pool = rayon::ThreadPoolBuilder::new();
    match common.threads {
        Some(0) => return Err(CliError::Usage("--threads must be positive".into())),
        Some(t) => pool = pool.num_threads(t),
        None => {}
    }
    let pool = pool.build()?;
    let mut ctx = Ctx {
        common,
        budget,
        report: Report::default(),
        inputs: Vec::new(),
        options: Map::new(),
    };
    let name = subcommand_name(&cli.command);
    pool.install(|| dispatch(&mut ctx, &cli.command))?;

    let mut report = Report::default();
    report.record(
        "provenance",
        json!({
            "tool": "hofa",
            "version": env!("CARGO_PKG_VERSION"),
            "subcommand": name,
            "config": {
                "p": common.p, "n": common.n, "d": common.d, "k": common.k, "eps": common.eps,
                "samples": common.samples, "seed": common.seed, "budget": budget.0,
                "threads": common.threads, "out": common.out.as_ref().map(|p| p.display().to_string()),
                "options": Value::Object(ctx.options),
            },
            "inputs": ctx.inputs,
        }),
    );
    report.extend(ctx.report);
    report.emit(common.out.as_deref())
}

fn subcommand_name(c: &Command) -> &'static str {
    match c {
        Command::Gowers { .. } => "gowers",
        Command::Tnorm { .. } => "tnorm",
        Command::Upsilon { .. } => "upsilon",
        Command::Restrict { .. } => "restrict",
        Command::Decompose { .. } => "decompose",
        Command::Rank { .. } => "rank",
        Command::Estimate { .. } => "estimate",
        Command::TestProperty { .. } => "test-property",
        Command::Converge { .. } => "converge",
    }
}

fn dispatch(ctx: &mut Ctx, command: &Command) -> CliResult<()> {
    match command {
        Command::Gowers { input } => gowers(ctx, input),
        Command::Tnorm { input, forms, cube } => tnorm(ctx, input, forms.as_deref(), *cube),
        Command::Upsilon {
            input,
            other,
            restarts,
            ambient,
            witness,
        } => upsilon(ctx, input, other, *restarts, *ambient, witness.as_deref()),
        Command::Restrict {
            input,
            other,
            blow_up_to,
        } => restrict(ctx, input, other.as_deref(), *blow_up_to),
        Command::Decompose { input, max_complexity } => decompose(ctx, input, *max_complexity),
        Command::Rank { poly, max_r } => rank(ctx, poly, *max_r),
        Command::Estimate { input, oracle } => estimate(ctx, input, oracle),
        Command::TestProperty { input, property } => test_property(ctx, input, property),
        Command::Converge {
            input,
            property,
            dims,
            vars,
            max_forms,
            restarts,
        } => converge(ctx, input, property, dims, *vars, *max_forms, *restarts),
    }
}

fn read_text(path: &Path) -> CliResult<String> {
    std::fs::read_to_string(path).map_err(|source| CliError::Io {
        path: path.to_path_buf(),
        source,
    })
}

impl Ctx<'_> {
    fn option(&mut self, key: &str, value: Value) {
        self.options.insert(key.into(), value);
    }

    fn need<T: Copy>(&self, value: Option<T>, flag: &str, why: &str) -> CliResult<T> {
        value.ok_or_else(|| CliError::Usage(format!("--{flag} is required {why}")))
    }

    fn d(&self) -> CliResult<usize> {
        self.need(self.common.d, "d", "for this subcommand")
    }

    fn k(&self) -> CliResult<usize> {
        self.need(self.common.k, "k", "for this subcommand")
    }

    fn seed(&self, why: &str) -> CliResult<u64> {
        self.need(self.common.seed, "seed", why)
    }

    fn check_shape(&self, f: &DenseFunction, path: &Path) -> CliResult<()> {
        let p_ok = self.common.p.is_none_or(|p| p == f.field().p());
        let n_ok = self.common.n.is_none_or(|n| n == f.n());
        if p_ok && n_ok {
            Ok(())
        } else {
            Err(Error::DimensionMismatch(format!(
                "{} holds a function on F_{}^{}, but --p/--n ask for F_{}^{}",
                path.display(),
                f.field().p(),
                f.n(),
                self.common.p.unwrap_or(f.field().p()),
                self.common.n.unwrap_or(f.n()),
            ))
            .into())
        }
    }

    fn load_path(&mut self, role: &str, path: &Path) -> CliResult<DenseFunction> {
        let f = DenseFunction::from_text(&read_text(path)?)?;
        self.check_shape(&f, path)?;
        self.inputs.push(json!({
            "role": role,
            "path": path.display().to_string(),
            "p": f.field().p(),
            "n": f.n(),
            "fingerprint": fingerprint(&f.to_text()),
        }));
        Ok(f)
    }

    fn load(&mut self, input: &InputArgs) -> CliResult<DenseFunction> {
        match (&input.input, input.random) {
            (Some(path), _) => self.load_path("input", path),
            (None, true) => {
                let p = self.need(self.common.p, "p", "with --random")?;
                let n = self.need(self.common.n, "n", "with --random")?;
                let seed = self.seed("with --random")?;
                let f = random_boolean(Field::new(p)?, n, &mut stream_rng(seed, INPUT_STREAM))?;
                self.inputs.push(json!({
                    "role": "input",
                    "generated": "uniform random {0,1}",
                    "p": p,
                    "n": n,
                    "fingerprint": fingerprint(&f.to_text()),
                }));
                Ok(f)
            }
            (None, false) => Err(CliError::Usage("give --input <file> or --random".into())),
        }
    }
}

fn gowers(ctx: &mut Ctx, input: &InputArgs) -> CliResult<()> {
    let f = ctx.load(input)?;
    let d = ctx.d()?;
    match ctx.common.samples {
        Some(samples) => {
            let seed = ctx.seed("for Monte-Carlo runs")?;
            let est = gowers_norm_mc(&f, d, samples, seed)?;
            ctx.report.record(
                "gowers",
                json!({
                    "d": d, "method": "monte_carlo", "norm": est.norm, "std_error": est.std_error,
                    "samples": samples, "cube_average": complex(est.average.mean),
                }),
            );
            ctx.report.say(format!("‖f‖_U{d} ≈ {:.6} ± {:.6} ({samples} samples)", est.norm, est.std_error));
        }
        None => {
            let norm = gowers_norm_exact(&f, d, ctx.budget)?;
            ctx.report.record("gowers", json!({ "d": d, "method": "exact", "norm": norm }));
            ctx.report.say(format!("‖f‖_U{d} = {norm:.6} (exact)"));
        }
    }
    Ok(())
}

fn tnorm(ctx: &mut Ctx, input: &InputArgs, forms: Option<&Path>, cube: bool) -> CliResult<()> {
    let f = ctx.load(input)?;
    let system = match (forms, cube) {
        (Some(path), _) => {
            let l = LinearFormSystem::from_text(f.field(), &read_text(path)?)?;
            ctx.inputs.push(json!({
                "role": "forms",
                "path": path.display().to_string(),
                "fingerprint": fingerprint(&l.to_text()),
            }));
            l
        }
        (None, true) => LinearFormSystem::cube_system(f.field(), ctx.d()?)?,
        (None, false) => return Err(CliError::Usage("give --forms <file> or --cube".into())),
    };
    ctx.option("cube", json!(cube));
    let forms_text = system.to_text();
    match ctx.common.samples {
        Some(samples) => {
            let seed = ctx.seed("for Monte-Carlo runs")?;
            let est = t_mc(&f, &system, samples, seed)?;
            ctx.report.record(
                "tnorm",
                json!({
                    "forms": forms_text, "method": "monte_carlo", "value": complex(est.mean),
                    "std_error": est.std_error, "samples": samples,
                }),
            );
            ctx.report.say(format!("t_L(f) ≈ {:.6} ± {:.6}", est.mean, est.std_error));
        }
        None => {
            let v = t_exact(&f, &system, ctx.budget)?;
            ctx.report
                .record("tnorm", json!({ "forms": forms_text, "method": "exact", "value": complex(v) }));
            ctx.report.say(format!("t_L(f) = {v:.6} (exact)"));
        }
    }
    Ok(())
}

fn upsilon(
    ctx: &mut Ctx,
    input: &InputArgs,
    other: &Path,
    restarts: Option<usize>,
    ambient: Option<usize>,
    witness: Option<&Path>,
) -> CliResult<()> {
    let f = ctx.load(input)?;
    let g = ctx.load_path("other", other)?;
    let d = ctx.d()?;
    let search = match restarts {
        Some(restarts) => Search::Heuristic {
            restarts,
            seed: ctx.seed("for the restart heuristic")?,
        },
        None => Search::Exact,
    };
    let ambient = ambient.unwrap_or(f.n().max(g.n()));
    ctx.option("restarts", json!(restarts));
    ctx.option("ambient", json!(ambient));
    ctx.option("witness", json!(witness.map(|p| p.display().to_string())));
    let result = upsilon_cross(&f, &g, d, ambient, search, ctx.budget)?;
    let method = if restarts.is_some() { "heuristic" } else { "exact" };
    let witness_text = result.witness.to_text();
    if let Some(path) = witness {
        write_file(path, &witness_text)?;
    }
    ctx.report.record(
        "upsilon",
        json!({ "d": d, "method": method, "ambient": ambient, "value": result.value, "witness": witness_text }),
    );
    ctx.report.say(format!("υ^{d}(f, g) = {:.6} ({method}, ambient dimension {ambient})", result.value));
    Ok(())
}

fn bits_string(bits: &[u8]) -> String {
    bits.iter().map(|&b| if b == 1 { '1' } else { '0' }).collect()
}

fn distribution_records(report: &mut Report, role: &str, dist: &RestrictionDistribution) {
    for (bits, pr) in dist.support() {
        report.record(
            "restriction",
            json!({ "of": role, "k": dist.k(), "bits": bits_string(bits), "probability": pr }),
        );
    }
}

fn restrict(ctx: &mut Ctx, input: &InputArgs, other: Option<&Path>, blow_up_to: Option<usize>) -> CliResult<()> {
    let f = ctx.load(input)?;
    let k = ctx.k()?;
    ctx.option("blow_up_to", json!(blow_up_to));
    if let Some(target) = blow_up_to {
        let samples = ctx.need(ctx.common.samples, "samples", "with --blow-up-to")?;
        let seed = ctx.seed("with --blow-up-to")?;
        let (_, a) = blow_up(&f, target, seed)?;
        let (df, dg) = coupled_blow_up_restrictions(&f, &a, k, samples, seed)?;
        distribution_records(&mut ctx.report, "input", &df);
        distribution_records(&mut ctx.report, "blow_up", &dg);
        let dist = statistical_distance(&df, &dg)?;
        ctx.report.record(
            "restriction_distance",
            json!({ "k": k, "method": "coupled_empirical", "samples": samples, "target_n": target, "distance": dist }),
        );
        ctx.report
            .say(format!("d_TV(π_{k}(f), π_{k}(f∘A)) ≈ {dist:.6} with A onto F_p^{} from F_p^{target}", f.n()));
        return Ok(());
    }
    let mode = match ctx.common.samples {
        Some(samples) => RestrictionMode::Empirical {
            samples,
            seed: ctx.seed("for empirical restriction laws")?,
        },
        None => RestrictionMode::Exact,
    };
    let method = if matches!(mode, RestrictionMode::Exact) { "exact" } else { "empirical" };
    let df = restriction_distribution(&f, k, mode, ctx.budget)?;
    distribution_records(&mut ctx.report, "input", &df);
    ctx.report
        .say(format!("π_{k}(f): {} distinct restrictions ({method})", df.support().len()));
    if let Some(path) = other {
        let g = ctx.load_path("other", path)?;
        let dg = restriction_distribution(&g, k, mode, ctx.budget)?;
        distribution_records(&mut ctx.report, "other", &dg);
        let dist = statistical_distance(&df, &dg)?;
        ctx.report
            .record("restriction_distance", json!({ "k": k, "method": method, "distance": dist }));
        ctx.report.say(format!("d_TV(π_{k}(f), π_{k}(g)) = {dist:.6}"));
    }
    Ok(())
}

fn decompose(ctx: &mut Ctx, input: &InputArgs, max_complexity: usize) -> CliResult<()> {
    let f = ctx.load(input)?;
    let d = ctx.d()?;
    let eta = ctx.need(ctx.common.eps, "eps", "(the correlation threshold η)")?;
    ctx.option("max_complexity", json!(max_complexity));
    let dec = energy_increment_decompose(&f, d, eta, max_complexity, ctx.budget)?;
    for (step, it) in dec.iterations.iter().enumerate() {
        ctx.report.record(
            "iteration",
            json!({ "step": step + 1, "poly": it.poly.to_text(), "correlation": it.correlation, "energy": it.energy }),
        );
    }
    let energy = factor_energy(&f, &dec.factor)?;
    ctx.report.record(
        "decomposition",
        json!({
            "d": d, "eta": eta, "complexity": dec.factor.complexity(), "atoms": dec.factor.atom_count(),
            "iterations": dec.iterations.len(), "complete": dec.complete, "energy": energy,
            "residual_correlation": dec.residual_correlation, "residual_u_norm": dec.measured_u_norm,
            "f1_l2": dec.f1.l2_norm(), "f2_l2": dec.f2.l2_norm(), "f3_l2": dec.f3.l2_norm(),
        }),
    );
    ctx.report.say(format!(
        "{} polynomials, residual correlation {:.6}, ‖f3‖_U{} = {:.6}{}",
        dec.factor.complexity(),
        dec.residual_correlation,
        d + 1,
        dec.measured_u_norm,
        if dec.complete { "" } else { " (stopped at the complexity cap)" }
    ));
    Ok(())
}

fn rank(ctx: &mut Ctx, paths: &[PathBuf], max_r: usize) -> CliResult<()> {
    let mut polys = Vec::new();
    for path in paths {
        let q = NonClassicalPoly::from_text(&read_text(path)?)?;
        if ctx.common.p.is_some_and(|p| p != q.field().p()) || ctx.common.n.is_some_and(|n| n != q.n()) {
            return Err(Error::DimensionMismatch(format!("{} does not match --p/--n", path.display())).into());
        }
        ctx.inputs.push(json!({
            "role": "poly",
            "path": path.display().to_string(),
            "fingerprint": fingerprint(&q.to_text()),
        }));
        polys.push(q);
    }
    ctx.option("max_r", json!(max_r));
    let (result, lambda) = if polys.len() == 1 {
        (poly_rank(&polys[0], max_r, ctx.budget)?, vec![1])
    } else {
        sequence_rank(&polys, max_r, ctx.budget)?
    };
    let witness: Vec<String> = result.witness.iter().map(NonClassicalPoly::to_text).collect();
    ctx.report.record(
        "rank",
        json!({ "rank": result.rank.to_string(), "lambda": lambda, "witness": witness, "max_r": max_r }),
    );
    ctx.report.say(format!("rank = {} (classical-restricted)", result.rank));
    Ok(())
}

fn oracle_for(ctx: &Ctx, field: Field, spec: &str, k: usize) -> CliResult<ParameterOracle> {
    if spec == "mean" {
        Ok(ParameterOracle::mean_value(k))
    } else {
        let property = parse_property(field, spec)?;
        Ok(ParameterOracle::distance_to(&property, field, k, ctx.budget)?)
    }
}

fn estimate(ctx: &mut Ctx, input: &InputArgs, oracle: &str) -> CliResult<()> {
    let f = ctx.load(input)?;
    let k = ctx.k()?;
    let samples = ctx.need(ctx.common.samples, "samples", "for estimate")?;
    let seed = ctx.seed("for estimate")?;
    ctx.option("oracle", json!(oracle));
    let oracle = oracle_for(ctx, f.field(), oracle, k)?;
    let est = oblivious_estimate(&f, &oracle, samples, seed)?;
    ctx.report.record(
        "estimate",
        json!({
            "oracle": oracle.name(), "k": k, "value": est.mean.re, "std_error": est.std_error, "samples": samples,
        }),
    );
    ctx.report
        .say(format!("{} ≈ {:.6} ± {:.6}", oracle.name(), est.mean.re, est.std_error));
    Ok(())
}

fn test_property(ctx: &mut Ctx, input: &InputArgs, spec: &str) -> CliResult<()> {
    let f = ctx.load(input)?;
    let eps = ctx.need(ctx.common.eps, "eps", "for test-property")?;
    let seed = ctx.seed("for test-property")?;
    let k = ctx.common.k.unwrap_or(2.min(f.n()));
    ctx.option("property", json!(spec));
    let property = parse_property(f.field(), spec)?;
    let oracle = ParameterOracle::distance_to(&property, f.field(), k, ctx.budget)?;
    let decision = tester_decision(&f, &oracle, eps, seed)?;
    let exact = match distance_to_property_bruteforce(&f, &property, ctx.budget) {
        Ok((d, _)) => Some(d),
        Err(Error::BudgetExceeded { .. }) | Err(Error::NoEnumerator(_)) => None,
        Err(e) => return Err(e.into()),
    };
    let membership = match property.membership(&f, ctx.budget)? {
        Membership::Member => "member",
        Membership::NonMember => "non_member",
        Membership::Unknown => "unknown",
    };
    ctx.report.record(
        "test",
        json!({
            "property": property.name(), "eps": eps, "k": k, "accept": decision.accept,
            "estimate": decision.estimate, "samples": decision.samples, "exact_distance": exact,
            "membership": membership,
        }),
    );
    ctx.report.say(format!(
        "{} {} (estimated distance {:.6}, exact {})",
        if decision.accept { "ACCEPT" } else { "REJECT" },
        property.name(),
        decision.estimate,
        exact.map_or("unavailable".into(), |d| format!("{d:.6}")),
    ));
    Ok(())
}

fn converge(
    ctx: &mut Ctx,
    input: &InputArgs,
    spec: &str,
    dims: &[usize],
    vars: usize,
    max_forms: usize,
    restarts: usize,
) -> CliResult<()> {
    let f = ctx.load(input)?;
    let seed = ctx.seed("for converge")?;
    let d = ctx.common.d.unwrap_or(2);
    ctx.option("property", json!(spec));
    ctx.option("dims", json!(dims));
    ctx.option("vars", json!(vars));
    ctx.option("max_forms", json!(max_forms));
    ctx.option("restarts", json!(restarts));
    let property = parse_property(f.field(), spec)?;
    let pi = match ctx.common.samples {
        Some(samples) => PiMethod::Oblivious {
            k: ctx.k()?,
            samples,
            seed,
        },
        None => PiMethod::BruteForce,
    };
    let seq: Vec<DenseFunction> = blow_up_sequence(&f, dims, seed)?.into_iter().map(|(g, _)| g).collect();
    let config = ConvergenceConfig {
        vars,
        max_forms,
        upsilon_degrees: vec![d],
        restarts,
        seed,
        pi,
    };
    let report = convergence_report(&seq, &property, &config, ctx.budget)?;
    for (i, profile) in report.profiles.iter().enumerate() {
        for (system, value) in &profile.entries {
            ctx.report.record(
                "t_value",
                json!({ "dim": report.dims[i], "forms": system.to_text(), "value": complex(*value) }),
            );
        }
        ctx.report
            .record("pi", json!({ "dim": report.dims[i], "property": property.name(), "value": report.pi[i] }));
    }
    for (d, values) in &report.upsilon {
        for (i, v) in values.iter().enumerate() {
            ctx.report.record(
                "upsilon_step",
                json!({ "d": d, "from_dim": report.dims[i], "to_dim": report.dims[i + 1], "value": v }),
            );
        }
    }
    ctx.report.record(
        "convergence",
        json!({ "max_profile_diff": report.max_profile_diff, "max_pi_gap": report.max_pi_gap }),
    );
    ctx.report.say(format!(
        "dims {:?}: max t-profile gap {:.3e}, max distance gap {:.3e}",
        report.dims, report.max_profile_diff, report.max_pi_gap
    ));
    Ok(())
}
