use std::path::{Path, PathBuf};

use involute::catalog::{get_system, CheckKind, CheckOutcome, ParameterSet, SystemDefinition, SystemName};
use involute::construct::{build_chain, independence_rank, ChainPattern, FunctionFamily, VerifyOptions};
use involute::dynamics::{conservation_report, hamiltonian_field, integrate, IntegrateOptions, Method};
use involute::expr::{parse, Expr, Point};
use involute::poisson::{self, NamedFunction};
use involute::sample::SampleSpec;
use serde_json::{json, Value};

use crate::args::{CheckArgs, Command, ExportArgs, FamilyArgs, Format, SimulateArgs, SystemArgs, What};
use crate::{read_file, write_file, Cli, CliError, Outcome};

pub(crate) fn dispatch(cli: &Cli) -> Result<Outcome, CliError> {
    match &cli.command {
        Command::Check(a) => check(a),
        Command::Family(a) => family(a),
        Command::Simulate(a) => simulate(a),
        Command::Export(a) => export(a),
    }
}

fn load(args: &SystemArgs) -> Result<SystemDefinition, CliError> {
    if let Ok(name) = args.system.parse::<SystemName>() {
        let mut p = ParameterSet::default();
        for (k, v) in &args.params {
            p.set(k, *v)?;
        }
        return Ok(get_system(name, &p)?);
    }
    let path = Path::new(&args.system);
    if !path.is_file() {
        return Err(CliError::Usage(format!("`{}` is neither a catalog system nor a file", args.system)));
    }
    if !args.params.is_empty() {
        return Err(CliError::Usage("--param only applies to catalog systems".into()));
    }
    Ok(SystemDefinition::from_json(&read_file(path)?)?)
}

fn spec(args: &SystemArgs) -> SampleSpec {
    SampleSpec::default().with_count(args.points as usize).with_seed(args.seed)
}

fn seed_hex(seed: u64) -> String {
    format!("0x{seed:X}")
}

/// `EXPR` or `name=EXPR`; unnamed functions become `f1`, `f2`, ...
fn functions(raw: &[String]) -> Result<Vec<NamedFunction>, CliError> {
    raw.iter()
        .enumerate()
        .map(|(i, s)| {
            let (name, body) = match s.split_once('=') {
                Some((lhs, rhs)) if is_identifier(lhs.trim()) => (lhs.trim().to_string(), rhs),
                _ => (format!("f{}", i + 1), s.as_str()),
            };
            Ok(NamedFunction::new(name, parse(body)?))
        })
        .collect()
}

fn is_identifier(s: &str) -> bool {
    let mut chars = s.chars();
    chars.next().is_some_and(|c| c.is_alphabetic() || c == '_') && chars.all(|c| c.is_alphanumeric() || c == '_')
}

fn pretty(v: &Value) -> String {
    let mut s = serde_json::to_string_pretty(v).unwrap_or_default();
    s.push('\n');
    s
}

/// Writes `text` to `path`, or returns it for standard output.
fn emit(path: Option<&PathBuf>, text: String) -> Result<String, CliError> {
    match path {
        Some(p) => write_file(p, &text).map(|_| String::new()),
        None => Ok(text),
    }
}

/// Space for a set of expressions: the named one, or the first admitting all.
fn pick_space<'a>(def: &'a SystemDefinition, named: Option<&str>, exprs: &[&Expr]) -> Result<&'a str, CliError> {
    if let Some(name) = named {
        return Ok(def.space(name)?.name.as_str());
    }
    def.spaces()
        .iter()
        .find(|s| exprs.iter().all(|e| s.structure.admits(e)))
        .map(|s| s.name.as_str())
        .ok_or_else(|| CliError::Usage("no space of the system contains all variables of the given functions".into()))
}

fn check(a: &CheckArgs) -> Result<Outcome, CliError> {
    let def = load(&a.system)?;
    let base = spec(&a.system);
    let fns = functions(&a.functions)?;
    let mut outcomes: Vec<CheckOutcome> = if fns.is_empty() {
        let kinds: &[CheckKind] = match a.what {
            What::Jacobi => &[CheckKind::Jacobi],
            What::Casimir => &[CheckKind::Casimir],
            What::Maps => &[CheckKind::Map],
            What::Involution => &[CheckKind::Involution],
            What::Identities => &[CheckKind::Identity],
            What::All => &[],
        };
        def.verify(if kinds.is_empty() { None } else { Some(kinds) }, &base)?
    } else {
        let bodies: Vec<&Expr> = fns.iter().map(|f| &f.body).collect();
        let space = pick_space(&def, a.space.as_deref(), &bodies)?;
        let structure = def.structure(space)?;
        let tol = involute::tolerance::RESIDUAL;
        match a.what {
            What::Casimir => fns
                .iter()
                .map(|f| {
                    let checks = poisson::casimir_residuals(&f.body, structure)?;
                    Ok(def.check_residuals(CheckKind::Casimir, &f.name, space, &checks, tol, &base)?)
                })
                .collect::<Result<_, CliError>>()?,
            What::Involution => {
                let family = FunctionFamily::seeded(structure.clone(), &fns)?;
                let names: Vec<&str> = fns.iter().map(|f| f.name.as_str()).collect();
                let checks = family.involution_residuals();
                vec![def.check_residuals(CheckKind::Involution, &names.join(","), space, &checks, tol, &base)?]
            }
            _ => return Err(CliError::Usage("--function requires --what casimir or --what involution".into())),
        }
    };
    if let Some(tol) = a.tolerance {
        for o in &mut outcomes {
            o.tolerance = tol;
            o.passed = o.report.passes(tol);
        }
    }
    let passed = outcomes.iter().all(|o| o.passed);
    let report = json!({
        "system": def.name(),
        "what": a.what_name(),
        "points": a.system.points,
        "seed": seed_hex(a.system.seed),
        "passed": passed,
        "checks": outcomes,
    });
    let stdout = emit(a.system.out.as_ref(), pretty(&report))?;
    Ok(Outcome { stdout, stderr: String::new(), passed })
}

impl CheckArgs {
    fn what_name(&self) -> &'static str {
        match self.what {
            What::Jacobi => "jacobi",
            What::Casimir => "casimir",
            What::Maps => "maps",
            What::Involution => "involution",
            What::Identities => "identities",
            What::All => "all",
        }
    }
}

fn family(a: &FamilyArgs) -> Result<Outcome, CliError> {
    if a.depth == 0 {
        return Err(CliError::Usage("--depth must be at least 1".into()));
    }
    let def = load(&a.system)?;
    let chosen = match &a.map {
        Some(name) => def
            .maps()
            .iter()
            .find(|m| m.map.name() == name)
            .ok_or_else(|| CliError::Usage(format!("no map named `{name}`")))?,
        None => def
            .maps()
            .iter()
            .find(|m| m.source == format!("{}^2", m.target))
            .ok_or_else(|| CliError::Usage(format!("system `{}` has no multiplication map", def.name())))?,
    };
    let base = def.space(&chosen.target)?;
    let casimirs: Vec<NamedFunction> =
        def.casimirs().iter().filter(|c| c.space == base.name).map(|c| c.function.clone()).collect();
    let seed_fns = if a.functions.is_empty() {
        let last = base.structure.chart().names().last().cloned().unwrap_or_default();
        let mut v = casimirs.clone();
        v.push(NamedFunction::new("f", Expr::var(last)));
        v
    } else {
        functions(&a.functions)?
    };
    let seed = FunctionFamily::seeded(base.structure.clone(), &seed_fns)?;

    let mut sample = spec(&a.system);
    for idx in 1..=a.depth {
        let renaming = base.structure.chart().factor_renaming(idx);
        for (coord, range) in &base.ranges {
            let name = if a.depth == 1 { coord } else { renaming.get(coord).unwrap_or(coord) };
            sample.ranges.entry(name.clone()).or_insert(*range);
        }
    }
    let options = VerifyOptions { spec: sample.clone(), tolerance: a.tolerance };
    let pattern = ChainPattern::Multiplication { map: chosen.map.clone(), casimirs };
    let family = build_chain(&seed, &pattern, a.depth, &options)?;

    let report = family.involution_report(&options)?;
    let guards = family.functions();
    let points = family.structure().sample(&sample, &guards)?;
    let rank = independence_rank(&family, &points)?;
    let passed = report.passes(a.tolerance);
    let members: Value = serde_json::from_str(&family.to_json()).unwrap_or(Value::Null);
    let doc = json!({
        "system": def.name(),
        "depth": a.depth,
        "map": chosen.map.name(),
        "family": members,
        "involution": report,
        "tolerance": a.tolerance,
        "rank": rank,
        "passed": passed,
    });
    let stdout = emit(a.system.out.as_ref(), pretty(&doc))?;
    Ok(Outcome { stdout, stderr: String::new(), passed })
}

fn simulate(a: &SimulateArgs) -> Result<Outcome, CliError> {
    if !(a.step > 0.0 && a.t_end >= 0.0 && a.t_end.is_finite()) {
        return Err(CliError::Usage("--step must be positive and --t-end finite and non-negative".into()));
    }
    if a.thin == 0 {
        return Err(CliError::Usage("--thin must be at least 1".into()));
    }
    let def = load(&a.system)?;
    let (h, space, mut x0, mut monitors) = match def.hamiltonian(&a.hamiltonian) {
        Ok(h) => {
            let space = a.space.clone().unwrap_or_else(|| h.space.clone());
            let mut monitors = vec![h.named()];
            monitors.extend(h.integrals.iter().cloned());
            (h.body.clone(), space, h.initial.clone(), monitors)
        }
        Err(_) => {
            let body = parse(&a.hamiltonian)?;
            let space = pick_space(&def, a.space.as_deref(), &[&body])?.to_string();
            let initial =
                def.hamiltonians().iter().find(|h| h.space == space).map_or_else(Point::new, |h| h.initial.clone());
            (body.clone(), space, initial, vec![NamedFunction::new("H", body)])
        }
    };
    monitors.extend(functions(&a.functions)?);
    let structure = def.structure(&space)?;
    if let Some(point) = &a.x0 {
        for (k, v) in &point.0 {
            if !structure.chart().contains(k) {
                return Err(CliError::Usage(format!("`{k}` is not a coordinate of `{space}`")));
            }
            x0.set(k.clone(), *v);
        }
    }
    let missing: Vec<&str> =
        structure.chart().names().iter().filter(|c| x0.get(c).is_none()).map(String::as_str).collect();
    if !missing.is_empty() {
        return Err(CliError::Usage(format!("initial value missing for {}", missing.join(", "))));
    }

    let field = hamiltonian_field(&h, structure)?;
    let method: Method = a.method.into();
    let options = match method {
        Method::Rk4 => IntegrateOptions::rk4(a.t_end, a.step),
        Method::Rkf45 => IntegrateOptions::rkf45(a.t_end, a.step),
    }
    .with_thinning(a.thin);
    let trajectory = integrate(&field, &x0, &options)?;
    let drifts = conservation_report(&trajectory, &monitors)?;

    let completed = trajectory.completed();
    let within = drifts.entries.iter().all(|e| e.drift.is_some_and(|d| d < a.drift_tol));
    let passed = completed && within;
    let drift: serde_json::Map<String, Value> =
        drifts.entries.iter().map(|e| (e.name.clone(), e.drift.map_or(Value::Null, Value::from))).collect();
    let summary = json!({
        "system": def.name(),
        "hamiltonian": a.hamiltonian,
        "space": space,
        "method": method.to_string(),
        "t_end": a.t_end,
        "step": a.step,
        "steps": trajectory.steps(),
        "completed": completed,
        "failure": trajectory.failure(),
        "drift": drift,
        "drift_tolerance": a.drift_tol,
        "passed": passed,
    });

    let body = match a.format {
        Format::Csv => trajectory.to_csv(),
        Format::Json => {
            let mut s = serde_json::to_string(&trajectory).unwrap_or_default();
            s.push('\n');
            s
        }
    };
    let mut out = Outcome { passed, ..Outcome::default() };
    out.stdout = emit(a.system.out.as_ref(), body)?;
    let summary = pretty(&summary);
    match (&a.report, &a.system.out) {
        (Some(path), _) => write_file(path, &summary)?,
        (None, Some(_)) => out.stdout = summary,
        (None, None) => out.stderr = summary,
    }
    Ok(out)
}

fn export(a: &ExportArgs) -> Result<Outcome, CliError> {
    if a.format == Format::Csv {
        return Err(CliError::Usage("export supports only --format json".into()));
    }
    let def = load(&a.system)?;
    let mut text = def.to_json();
    text.push('\n');
    let stdout = emit(a.system.out.as_ref(), text)?;
    Ok(Outcome { stdout, stderr: String::new(), passed: true })
}
