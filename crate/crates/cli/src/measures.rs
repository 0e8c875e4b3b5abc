use std::path::{Path, PathBuf};

use clap::Args;
use multicausal::format::{
    coupling_to_file, curves_to_file, measure_to_file, parse_curves, parse_evolution, parse_measure, violator_to_file,
    FileWeight,
};
use multicausal::order::{
    check_causal_function_condition, check_flat_slice_condition, check_future_set_condition, generate_test_compacts,
    oracle_subset_condition_with, ORACLE_MAX_ATOMS,
};
use multicausal::seed::SeedSplitter;
use multicausal::{
    build_trajectory_measure, precedes_measures_with, verify_causal_evolution_with, CausalPredicate, CurveError,
    OrderError, PrecedenceCertificate, Rational, SliceMeasure, SubsetVerdict, Violator,
};
use serde_json::{json, Value};

use crate::config::pick;
use crate::report::{check, read_input, write_json, CliError, Report, EXIT_FAILED, EXIT_NO, EXIT_YES};
use crate::{CertifyArgs, Context};

/// Largest number of atom pairs a single decision may examine.
pub const MAX_ATOM_PAIRS: usize = 25_000_000;

pub const PRECEDENCE: &str = "mu precedes nu iff some coupling of mu and nu is supported on causally related pairs";
pub const SUBSET: &str = "a causal coupling exists iff mu(S) <= nu(J+(S)) for every finite atom set S";
pub const FUTURE_SETS: &str = "mu precedes nu implies mu(J+(K)) <= nu(J+(K)) for every compact K";
pub const CAUSAL_FUNCTIONS: &str =
    "mu precedes nu implies the integral of every bounded causal function under mu is at most that under nu";
pub const FLAT_SLICES: &str = "mu precedes nu implies mu(J+(S)) <= nu(J+(S)) for every Cauchy slice S (flat slices only)";
pub const CURVES: &str = "a causal evolution is the family of time marginals of a measure on causal curves";
pub const EVOLUTION: &str = "an evolution is causal iff every earlier slice precedes every later slice";

#[derive(Args, Debug)]
pub struct PrecedeArgs {
    #[arg(long)]
    mu: PathBuf,
    #[arg(long)]
    nu: PathBuf,
    /// Exact rational arithmetic for weights.
    #[arg(long)]
    exact: bool,
    /// Additive slack on every particle displacement (0 = exact light cone).
    #[arg(long)]
    slack: Option<f64>,
    /// Write the witness coupling here when the verdict is yes.
    #[arg(long)]
    emit_witness: Option<PathBuf>,
    /// Write the violating atom set here when the verdict is no.
    #[arg(long)]
    emit_violator: Option<PathBuf>,
    /// Also evaluate the necessary conditions and the subset oracle and check they agree.
    #[arg(long)]
    check_equivalences: bool,
    /// Number of random box compacts for the necessary conditions.
    #[arg(long)]
    compacts: Option<usize>,
}

#[derive(Args, Debug)]
pub struct OracleArgs {
    #[arg(long)]
    mu: PathBuf,
    #[arg(long)]
    nu: PathBuf,
    #[arg(long)]
    exact: bool,
    #[arg(long)]
    slack: Option<f64>,
    #[arg(long)]
    emit_violator: Option<PathBuf>,
}

#[derive(Args, Debug)]
pub struct CurvesBuildArgs {
    #[arg(long)]
    evo: PathBuf,
    #[arg(long)]
    out: PathBuf,
    #[arg(long)]
    exact: bool,
    /// Where to write the violator if some slice pair is not causally ordered.
    #[arg(long)]
    emit_violator: Option<PathBuf>,
}

#[derive(Args, Debug)]
pub struct CurvesEvalArgs {
    #[arg(long)]
    sigma: PathBuf,
    #[arg(long)]
    t: f64,
    /// Write the resulting slice measure here; otherwise it is embedded in the report.
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long)]
    exact: bool,
}

fn predicate(slack: f64) -> Result<CausalPredicate, CliError> {
    if !(slack >= 0.0 && slack.is_finite()) {
        return Err(CliError::Invalid(format!("slack must be finite and nonnegative, got {slack}")));
    }
    Ok(if slack == 0.0 {
        CausalPredicate::Exact
    } else {
        CausalPredicate::Tolerant(slack)
    })
}

fn order_error(e: OrderError) -> CliError {
    match e {
        OrderError::OracleTooLarge { .. } => CliError::Resource(e.to_string()),
        _ => CliError::Invalid(e.to_string()),
    }
}

fn load_measure<W: FileWeight>(path: &Path) -> Result<SliceMeasure<W>, CliError> {
    parse_measure(&read_input(path)?).map_err(|e| CliError::Invalid(format!("{}: {e}", path.display())))
}

fn guard_pairs(m: usize, k: usize) -> Result<(), CliError> {
    if m.saturating_mul(k) > MAX_ATOM_PAIRS {
        return Err(CliError::Resource(format!(
            "{m} x {k} atom pairs exceed the limit of {MAX_ATOM_PAIRS}"
        )));
    }
    Ok(())
}

fn violator_json<W: FileWeight>(v: &Violator<W>, path: Option<&PathBuf>) -> Value {
    json!({
        "atoms": v.atoms,
        "mu_mass": v.mu_mass.to_repr(),
        "nu_future_mass": v.nu_future_mass.to_repr(),
        "file": path,
    })
}

fn verdict(holds: bool) -> &'static str {
    if holds {
        "yes"
    } else {
        "no"
    }
}

fn precede_typed<W: FileWeight>(ctx: &Context, args: &PrecedeArgs, report: &mut Report) -> Result<u8, CliError> {
    let slack = pick(args.slack, ctx.file.slack, 0.0);
    let pred = predicate(slack)?;
    let mu: SliceMeasure<W> = load_measure(&args.mu)?;
    let nu: SliceMeasure<W> = load_measure(&args.nu)?;
    guard_pairs(mu.len(), nu.len())?;
    let cert = precedes_measures_with(&mu, &nu, pred).map_err(order_error)?;
    report.set("slack", slack);
    report.set("mu_atoms", mu.len());
    report.set("nu_atoms", nu.len());
    report.set("verdict", verdict(cert.holds()));
    let mut consistent = true;
    let mut checks = Vec::new();
    match &cert {
        PrecedenceCertificate::Witness(plan) => {
            let valid = plan.validate(&mu, &nu, pred, 1e-9);
            checks.push(check(
                PRECEDENCE,
                valid.is_ok(),
                json!({ "witness_entries": plan.entries.len(), "error": valid.err().map(|e| e.to_string()) }),
            ));
            if let Some(path) = &args.emit_witness {
                write_json(path, &coupling_to_file(&mu, &nu, plan))?;
                report.set("witness_file", path);
            }
        }
        PrecedenceCertificate::Violated(v) => {
            let path = args
                .emit_violator
                .clone()
                .or_else(|| args.emit_witness.as_ref().map(|w| w.with_extension("violator")));
            if let Some(path) = &path {
                write_json(path, &violator_to_file(&mu, &nu, v))?;
            }
            let strict = if W::EXACT {
                v.mu_mass > v.nu_future_mass
            } else {
                v.mu_mass.to_f64() > v.nu_future_mass.to_f64() + multicausal::mass::FLOW_TOL
            };
            checks.push(check(SUBSET, strict, violator_json(v, path.as_ref())));
            report.set("violator", violator_json(v, path.as_ref()));
        }
    }
    if args.check_equivalences {
        let (fmu, fnu) = (mu.to_f64(), nu.to_f64());
        let mut rng = SeedSplitter::new(ctx.seed).stream(0);
        let ks = generate_test_compacts(&fmu, pick(args.compacts, ctx.file.compacts, 16), &mut rng);
        let future = check_future_set_condition(&fmu, &fnu, &ks).map_err(order_error)?;
        let future_fail = future.iter().filter(|c| !c.pass).count();
        let functions = check_causal_function_condition(&fmu, &fnu, &ks).map_err(order_error)?;
        let function_fail = functions.iter().filter(|p| !**p).count();
        let (t0, t1) = (fmu.t(), fnu.t());
        let slices = [t0 - 1.0, t0, 0.5 * (t0 + t1), t1, t1 + 1.0];
        let flat = check_flat_slice_condition(&fmu, &fnu, &slices);
        let flat_fail = flat.iter().filter(|p| !**p).count();
        for (statement, checked, failed) in [
            (FUTURE_SETS, ks.len(), future_fail),
            (CAUSAL_FUNCTIONS, ks.len(), function_fail),
            (FLAT_SLICES, slices.len(), flat_fail),
        ] {
            // a necessary condition may only fail when the verdict is no
            let ok = !(cert.holds() && failed > 0);
            consistent &= ok;
            checks.push(check(statement, ok, json!({ "checked": checked, "failed": failed })));
        }
        if mu.len() <= ORACLE_MAX_ATOMS {
            let oracle = oracle_subset_condition_with(&mu, &nu, pred).map_err(order_error)?;
            let ok = oracle.holds() == cert.holds();
            consistent &= ok;
            checks.push(check(SUBSET, ok, json!({ "oracle_verdict": verdict(oracle.holds()) })));
        } else {
            checks.push(check(SUBSET, true, json!({ "skipped": format!("more than {ORACLE_MAX_ATOMS} atoms") })));
        }
        report.set("equivalences_consistent", consistent);
    }
    report.set("checks", checks);
    Ok(if !consistent {
        EXIT_FAILED
    } else if cert.holds() {
        EXIT_YES
    } else {
        EXIT_NO
    })
}

pub fn precede(ctx: &Context, args: PrecedeArgs) -> Result<u8, CliError> {
    let mut report = Report::new("precede");
    let exact = args.exact || ctx.file.exact.unwrap_or(false);
    report.set("exact", exact);
    let code = if exact {
        precede_typed::<Rational>(ctx, &args, &mut report)?
    } else {
        precede_typed::<f64>(ctx, &args, &mut report)?
    };
    report.emit(ctx)?;
    Ok(code)
}

fn oracle_typed<W: FileWeight>(ctx: &Context, args: &OracleArgs, report: &mut Report) -> Result<u8, CliError> {
    let slack = pick(args.slack, ctx.file.slack, 0.0);
    let mu: SliceMeasure<W> = load_measure(&args.mu)?;
    let nu: SliceMeasure<W> = load_measure(&args.nu)?;
    let verdict_ = oracle_subset_condition_with(&mu, &nu, predicate(slack)?).map_err(order_error)?;
    report.set("verdict", verdict(verdict_.holds()));
    report.set("subsets", 1u64 << mu.len());
    let detail = match &verdict_ {
        SubsetVerdict::Holds => json!({}),
        SubsetVerdict::Violated(v) => {
            if let Some(path) = &args.emit_violator {
                write_json(path, &violator_to_file(&mu, &nu, v))?;
            }
            let detail = violator_json(v, args.emit_violator.as_ref());
            report.set("violator", &detail);
            detail
        }
    };
    report.set("checks", [check(SUBSET, true, detail)]);
    Ok(if verdict_.holds() { EXIT_YES } else { EXIT_NO })
}

pub fn oracle(ctx: &Context, args: OracleArgs) -> Result<u8, CliError> {
    let mut report = Report::new("oracle");
    let exact = args.exact || ctx.file.exact.unwrap_or(false);
    report.set("exact", exact);
    let code = if exact {
        oracle_typed::<Rational>(ctx, &args, &mut report)?
    } else {
        oracle_typed::<f64>(ctx, &args, &mut report)?
    };
    report.emit(ctx)?;
    Ok(code)
}

fn curve_error(e: CurveError) -> CliError {
    match e {
        CurveError::TooManyTrajectories(_) => CliError::Resource(e.to_string()),
        CurveError::Order(o) => order_error(o),
        _ => CliError::Invalid(e.to_string()),
    }
}

fn curves_build_typed<W: FileWeight>(args: &CurvesBuildArgs, report: &mut Report) -> Result<u8, CliError> {
    let evo = parse_evolution::<W>(&read_input(&args.evo)?)?;
    match build_trajectory_measure(&evo) {
        Ok(sigma) => {
            let grid = sigma.grid();
            let bad: Vec<usize> = sigma
                .paths()
                .iter()
                .enumerate()
                .filter(|(_, (tr, _))| tr.first_superluminal_segment(sigma.params(), grid).is_some())
                .map(|(i, _)| i)
                .collect();
            let mut worst: f64 = 0.0;
            for slice in evo.slices() {
                let eval = sigma.evaluate(slice.t()).map_err(curve_error)?;
                worst = worst.max(eval.to_f64().weight_distance(&slice.to_f64()));
            }
            write_json(&args.out, &curves_to_file(&sigma))?;
            report.set("verdict", "yes");
            report.set("trajectories", sigma.len());
            report.set("pruned_mass", sigma.pruned_mass());
            report.set("out", &args.out);
            report.set(
                "checks",
                [check(
                    CURVES,
                    bad.is_empty() && worst <= 1e-9,
                    json!({ "superluminal_trajectories": bad.len(), "max_marginal_error": worst }),
                )],
            );
            Ok(if bad.is_empty() && worst <= 1e-9 { EXIT_YES } else { EXIT_FAILED })
        }
        Err(CurveError::Infeasible { from, to, certificate }) => {
            let (mu, nu) = (evo.slices()[from].to_f64(), evo.slices()[to].to_f64());
            report.set("verdict", "no");
            report.set("failing_pair", [from, to]);
            if let Some(v) = certificate.violator() {
                if let Some(path) = &args.emit_violator {
                    write_json(path, &violator_to_file(&mu, &nu, v))?;
                }
                report.set("violator", violator_json(v, args.emit_violator.as_ref()));
            }
            report.set("checks", [check(CURVES, false, json!({ "failing_pair": [from, to] }))]);
            Ok(EXIT_NO)
        }
        Err(e) => Err(curve_error(e)),
    }
}

pub fn curves_build(ctx: &Context, args: CurvesBuildArgs) -> Result<u8, CliError> {
    let mut report = Report::new("curves build");
    let exact = args.exact || ctx.file.exact.unwrap_or(false);
    report.set("exact", exact);
    let code = if exact {
        curves_build_typed::<Rational>(&args, &mut report)?
    } else {
        curves_build_typed::<f64>(&args, &mut report)?
    };
    report.emit(ctx)?;
    Ok(code)
}

fn curves_eval_typed<W: FileWeight>(args: &CurvesEvalArgs, report: &mut Report) -> Result<(), CliError> {
    let sigma = parse_curves::<W>(&read_input(&args.sigma)?)?;
    let mu = sigma.evaluate(args.t).map_err(curve_error)?;
    let file = measure_to_file(&mu);
    match &args.out {
        Some(path) => {
            write_json(path, &file)?;
            report.set("out", path);
        }
        None => report.set("measure", &file),
    }
    report.set("t", args.t);
    report.set("atoms", mu.len());
    Ok(())
}

pub fn curves_eval(ctx: &Context, args: CurvesEvalArgs) -> Result<u8, CliError> {
    let mut report = Report::new("curves eval");
    let exact = args.exact || ctx.file.exact.unwrap_or(false);
    if exact {
        curves_eval_typed::<Rational>(&args, &mut report)?;
    } else {
        curves_eval_typed::<f64>(&args, &mut report)?;
    }
    report.emit(ctx)?;
    Ok(EXIT_YES)
}

fn certify_evolution_typed<W: FileWeight>(
    path: &Path,
    pred: CausalPredicate,
    report: &mut Report,
) -> Result<u8, CliError> {
    let evo = parse_evolution::<W>(&read_input(path)?)?;
    let largest = evo.slices().iter().map(|s| s.len()).max().unwrap_or(0);
    guard_pairs(largest, largest)?;
    let result = verify_causal_evolution_with(&evo, pred).map_err(curve_error)?;
    let failures = result.failures();
    report.set("slices", evo.len());
    report.set("consecutive_hold", result.consecutive_ok);
    report.set("all_pairs_hold", result.all_pairs_ok);
    report.set("failing_pairs", &failures);
    report.set("verdict", verdict(result.causal()));
    report.set("checks", [check(EVOLUTION, result.causal(), json!({ "failing_pairs": failures.len() }))]);
    Ok(if result.causal() { EXIT_YES } else { EXIT_NO })
}

pub fn certify_evolution(ctx: &Context, args: &CertifyArgs) -> Result<u8, CliError> {
    let mut report = Report::new("certify");
    let exact = args.exact || ctx.file.exact.unwrap_or(false);
    let slack = pick(args.slack, ctx.file.slack, 0.0);
    let pred = predicate(slack)?;
    let path = args.evo.clone().expect("checked by the caller");
    report.set("input", &path);
    report.set("exact", exact);
    report.set("slack", slack);
    let code = if exact {
        certify_evolution_typed::<Rational>(&path, pred, &mut report)?
    } else {
        certify_evolution_typed::<f64>(&path, pred, &mut report)?
    };
    report.emit(ctx)?;
    Ok(code)
}
