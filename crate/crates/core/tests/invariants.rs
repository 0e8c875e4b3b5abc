use multicausal::format::{measure_to_file, parse_measure};
use multicausal::generate::{kind_for, random_instance};
use multicausal::seed::SeedSplitter;
use multicausal::spacetime::{AxisBox, ProductBox};
use multicausal::{
    chronologically_precedes_point, future_contains, oracle_subset_condition, particle_marginal, precedes_measures,
    precedes_point, product_measure, symmetrize, CompactRegion, ConfigEvent, Mass, ModelParams, Rational, SliceMeasure,
};
use proptest::prelude::*;

const N: usize = 2;
const DIM: usize = 2;

fn params() -> ModelParams {
    ModelParams::new(1.0, DIM, N).unwrap()
}

/// Coordinates on a quarter lattice so that light-cone boundaries are hit exactly.
fn coord() -> impl Strategy<Value = f64> {
    (-12i32..=12).prop_map(|k| k as f64 * 0.25)
}

fn config() -> impl Strategy<Value = Vec<f64>> {
    prop::collection::vec(coord(), N * DIM)
}

fn event() -> impl Strategy<Value = ConfigEvent> {
    ((0i32..=8).prop_map(|k| k as f64 * 0.25), config()).prop_map(|(t, x)| ConfigEvent::from_flat(t, x))
}

fn rational_measure(t: f64) -> impl Strategy<Value = SliceMeasure<Rational>> {
    prop::collection::vec((config(), 1u64..=9), 1..=6).prop_map(move |atoms| {
        let total: u64 = atoms.iter().map(|a| a.1).sum();
        let atoms = atoms.into_iter().map(|(x, w)| (x, Rational::from_ratio(w, total))).collect();
        SliceMeasure::new(params(), t, atoms).unwrap()
    })
}

fn single(t: f64) -> impl Strategy<Value = SliceMeasure<Rational>> {
    prop::collection::vec((prop::collection::vec(coord(), DIM), 1u64..=5), 1..=4).prop_map(move |atoms| {
        let total: u64 = atoms.iter().map(|a| a.1).sum();
        let p = ModelParams::new(1.0, DIM, 1).unwrap();
        let atoms = atoms.into_iter().map(|(x, w)| (x, Rational::from_ratio(w, total))).collect();
        SliceMeasure::new(p, t, atoms).unwrap()
    })
}

/// Moves each particle by at most `c·dt` in the sup sense of a random lattice step.
fn displaced(x: &[f64], steps: &[i32], dt: f64) -> Vec<f64> {
    x.chunks(DIM)
        .zip(steps.chunks(DIM))
        .flat_map(|(p, s)| {
            let v: Vec<f64> = s.iter().map(|&k| k as f64).collect();
            let len = v.iter().map(|a| a * a).sum::<f64>().sqrt();
            let scale = if len > 0.0 { dt / len } else { 0.0 };
            p.iter().zip(v).map(move |(a, b)| a + b * scale).collect::<Vec<_>>()
        })
        .collect()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(200))]

    #[test]
    fn point_order_is_reflexive(p in event()) {
        prop_assert!(precedes_point(&p, &p, &params()).unwrap());
    }

    #[test]
    fn point_order_is_transitive(p in event(), s1 in prop::collection::vec(-3i32..=3, N * DIM), s2 in prop::collection::vec(-3i32..=3, N * DIM), d1 in 1i32..=4, d2 in 1i32..=4) {
        let (dt1, dt2) = (d1 as f64 * 0.25, d2 as f64 * 0.25);
        // shrink slightly so rounding never pushes a step outside its cone
        let q = ConfigEvent::from_flat(p.t + dt1, displaced(&p.x, &s1, dt1 * (1.0 - 1e-12)));
        let r = ConfigEvent::from_flat(q.t + dt2, displaced(&q.x, &s2, dt2 * (1.0 - 1e-12)));
        prop_assert!(precedes_point(&p, &q, &params()).unwrap());
        prop_assert!(precedes_point(&q, &r, &params()).unwrap());
        prop_assert!(precedes_point(&p, &r, &params()).unwrap());
    }

    #[test]
    fn equal_time_precedence_is_equality(t in 0i32..4, a in config(), b in config()) {
        let t = t as f64;
        let p = ConfigEvent::from_flat(t, a.clone());
        let q = ConfigEvent::from_flat(t, b.clone());
        prop_assert_eq!(precedes_point(&p, &q, &params()).unwrap(), a == b);
    }

    #[test]
    fn chronological_pushes_up_through_causal(p in event(), q in event(), r in event()) {
        let pr = params();
        if chronologically_precedes_point(&p, &q, &pr).unwrap() && precedes_point(&q, &r, &pr).unwrap() {
            prop_assert!(chronologically_precedes_point(&p, &r, &pr).unwrap());
        }
        if precedes_point(&p, &q, &pr).unwrap() && chronologically_precedes_point(&q, &r, &pr).unwrap() {
            prop_assert!(chronologically_precedes_point(&p, &r, &pr).unwrap());
        }
    }

    #[test]
    fn symmetrization_is_idempotent_and_mass_preserving(mu in rational_measure(0.0)) {
        let s = symmetrize(&mu).unwrap();
        prop_assert_eq!(s.total_mass(), Rational::from_ratio(1, 1));
        prop_assert_eq!(symmetrize(&s).unwrap(), s);
    }

    #[test]
    fn marginals_of_a_product_are_its_factors(a in single(1.0), b in single(1.0)) {
        let prod = product_measure(1.0, &[a.clone(), b.clone()]).unwrap();
        prop_assert_eq!(particle_marginal(&prod, 0).unwrap(), a);
        prop_assert_eq!(particle_marginal(&prod, 1).unwrap(), b);
    }

    #[test]
    fn measure_files_round_trip(mu in rational_measure(0.5)) {
        let text = serde_json::to_string(&measure_to_file(&mu)).unwrap();
        prop_assert_eq!(&parse_measure::<Rational>(&text).unwrap(), &mu);
        let f = mu.to_f64();
        let text = serde_json::to_string(&measure_to_file(&f)).unwrap();
        prop_assert!(parse_measure::<f64>(&text).unwrap().same_as(&f, 1e-15));
    }

    #[test]
    fn flow_decision_matches_subset_oracle(seed in any::<u64>(), kind in 0usize..3) {
        let mut rng = SeedSplitter::new(seed).stream(0);
        let inst = random_instance(&mut rng, kind_for(kind));
        let flow = precedes_measures(&inst.mu, &inst.nu).unwrap();
        let oracle = oracle_subset_condition(&inst.mu, &inst.nu).unwrap();
        prop_assert_eq!(flow.holds(), oracle.holds());
        if let Some(v) = flow.violator() {
            prop_assert!(v.mu_mass > v.nu_future_mass);
        }
    }

    #[test]
    fn measure_precedence_is_reflexive(mu in rational_measure(0.0)) {
        prop_assert!(precedes_measures(&mu, &mu).unwrap().holds());
    }
}

/// Compares the closed-form future of a box region with a brute-force search
/// over a dense sample of the box.
#[test]
fn box_futures_agree_with_dense_sampling() {
    use rand::Rng;
    let pr = params();
    let mut rng = SeedSplitter::new(77).stream(0);
    let samples = 8usize;
    for _ in 0..100 {
        let factors: Vec<AxisBox> = (0..N)
            .map(|_| {
                let lo: Vec<f64> = (0..DIM).map(|_| rng.gen_range(-2.0..2.0)).collect();
                let hi = lo.iter().map(|l| l + rng.gen_range(0.0..1.5)).collect();
                AxisBox::new(lo, hi).unwrap()
            })
            .collect();
        let region = CompactRegion::boxes(&pr, 0.0, vec![ProductBox::new(factors.clone())]).unwrap();
        // sampled grid resolution bounds how far the brute-force distance can overshoot
        let slop: f64 = factors
            .iter()
            .map(|f| {
                f.lo.iter()
                    .zip(&f.hi)
                    .map(|(l, h)| ((h - l) / (samples - 1) as f64 / 2.0).powi(2))
                    .sum::<f64>()
                    .sqrt()
            })
            .fold(0.0, f64::max);
        for _ in 0..20 {
            let t = rng.gen_range(0.0..3.0);
            let x: Vec<f64> = (0..N * DIM).map(|_| rng.gen_range(-4.0..4.0)).collect();
            let q = ConfigEvent::from_flat(t, x.clone());
            let closed = future_contains(&region, &q, &pr).unwrap();
            // per particle: smallest sampled distance to its box factor
            let sampled: Vec<f64> = factors
                .iter()
                .enumerate()
                .map(|(j, f)| {
                    let mut best = f64::INFINITY;
                    for a in 0..samples {
                        for b in 0..samples {
                            let p = [
                                f.lo[0] + (f.hi[0] - f.lo[0]) * a as f64 / (samples - 1) as f64,
                                f.lo[1] + (f.hi[1] - f.lo[1]) * b as f64 / (samples - 1) as f64,
                            ];
                            let d = ((p[0] - x[j * DIM]).powi(2) + (p[1] - x[j * DIM + 1]).powi(2)).sqrt();
                            best = best.min(d);
                        }
                    }
                    best
                })
                .collect();
            let brute = sampled.iter().all(|&d| d <= t);
            if brute {
                assert!(closed, "sampled point reaches {x:?} at t={t} but the closed form disagrees");
            }
            if closed && !brute {
                assert!(sampled.iter().all(|&d| d <= t + slop), "closed form too generous at {x:?}, t={t}");
            }
        }
    }
}
