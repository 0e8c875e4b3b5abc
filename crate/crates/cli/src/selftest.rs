use multicausal::validation::{
    algebraic_subluminality, blocked_matching_fixture, certify_wave_species, continuity_convergence, dirac_fixture,
    judge_wave_certification, oracle_equivalence, partial_order_suite, spectral_health, trajectory_round_trip, Scale,
    WAVE_STATEMENT,
};
use multicausal::wave::Species;
use multicausal::{precedes_measures, Mass, Rational};
use serde_json::json;

use crate::measures::{PRECEDENCE, SUBSET};
use crate::report::{check, CliError, Report, EXIT_FAILED, EXIT_YES};
use crate::wave::SUBLUMINAL;
use crate::Context;

fn line(passed: bool, name: &str, detail: &str) {
    eprintln!("[{}] {name}: {detail}", if passed { "PASS" } else { "FAIL" });
}

pub fn run(ctx: &Context) -> Result<u8, CliError> {
    let mut report = Report::new("selftest");
    let scale = Scale::reduced();
    let mut checks = Vec::new();
    let mut all = true;

    let (p, q) = dirac_fixture();
    let dirac = precedes_measures(&p, &q).is_ok_and(|c| c.holds());
    line(dirac, "fixture: point mass precedes a point mass in its future", if dirac { "yes" } else { "no" });
    checks.push(check(PRECEDENCE, dirac, json!({ "fixture": "dirac" })));

    let (mu, nu) = blocked_matching_fixture();
    let blocked = precedes_measures(&mu, &nu).ok().and_then(|c| c.violator().cloned());
    let blocked_ok = blocked.as_ref().is_some_and(|v| {
        v.atoms == [0, 1] && v.mu_mass == Rational::from_ratio(1, 1) && v.nu_future_mass == Rational::from_ratio(1, 2)
    });
    line(blocked_ok, "fixture: blocked matching is rejected", &format!("violator {:?}", blocked.map(|v| v.atoms)));
    checks.push(check(SUBSET, blocked_ok, json!({ "fixture": "blocked matching" })));
    all &= dirac && blocked_ok;

    let mut outcomes = vec![
        oracle_equivalence(ctx.seed, &scale),
        partial_order_suite(ctx.seed, &scale),
        trajectory_round_trip(ctx.seed, &scale),
        algebraic_subluminality(ctx.seed, &scale),
        spectral_health(&scale),
        continuity_convergence(),
    ];
    let start = std::time::Instant::now();
    let results: Vec<_> = [Species::Photon, Species::Fermion { mass: 1.0 }]
        .into_iter()
        .map(|s| (s, certify_wave_species(s, scale.wave_refinement)))
        .collect();
    let photon_speed = results[0].1.as_ref().map(|s| s.max_speed).unwrap_or(f64::INFINITY);
    let (passed, detail) = judge_wave_certification(&results);
    outcomes.push(multicausal::validation::CriterionOutcome {
        id: 7,
        name: "wave causal certification",
        statement: WAVE_STATEMENT,
        passed,
        detail,
        elapsed: start.elapsed(),
    });
    let speed_ok = photon_speed <= 1.0 + 1e-9;
    line(speed_ok, "fixture: default photon run is subluminal", &format!("max speed {photon_speed:.12}"));
    checks.push(check(SUBLUMINAL, speed_ok, json!({ "fixture": "default photon run", "max_speed": photon_speed })));
    all &= speed_ok;

    for o in &outcomes {
        eprintln!("{}", o.line());
        all &= o.passed;
    }
    report.set("scale", scale);
    report.set("criteria", &outcomes);
    report.set("checks", checks);
    report.set("passed", all);
    report.emit(ctx)?;
    Ok(if all { EXIT_YES } else { EXIT_FAILED })
}
