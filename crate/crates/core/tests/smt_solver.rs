mod common;

use famsynth::baselines::{one_by_one, BaselineConfig};
use famsynth::generator::{random_family, Bounds, GOAL_LABEL};
use famsynth::quotient::build_quotient;
use famsynth::smt::{encode_feasibility, solve_feasibility};

use common::{q, reward_le, solver_command, SOLVER_TIMEOUT};

#[test]
fn solver_agrees_with_enumeration() {
    let Some(cmd) = solver_command() else {
        eprintln!("warning: no SMT solver found, skipping");
        return;
    };
    let mut checked = 0;
    for seed in 0..60 {
        let fam = random_family(seed, Bounds::new(6, 3, 3));
        if fam.num_realisations() > 32 {
            continue;
        }
        for kappa in [q(1, 2), q(3, 1), q(10, 1)] {
            let spec = reward_le(GOAL_LABEL, kappa);
            let expected = one_by_one(&fam, &spec, &BaselineConfig::default()).unwrap();
            let quotient = build_quotient(&fam);
            let got = solve_feasibility(&quotient, &spec, &fam.full_subfamily(), &cmd, SOLVER_TIMEOUT).unwrap();
            assert_eq!(got.is_some(), expected.feasible().is_some(), "seed {seed}, spec {spec}");
            if let Some(r) = got {
                assert!(expected.accepted().any(|a| *a == r), "seed {seed}: {r:?} is not accepted");
            }
            checked += 1;
        }
    }
    assert!(checked >= 20);
}

#[test]
fn encoding_is_deterministic() {
    let fam = random_family(3, Bounds::default());
    let spec = reward_le(GOAL_LABEL, q(5, 2));
    let quotient = build_quotient(&fam);
    let a = encode_feasibility(&quotient, &spec, &fam.full_subfamily()).unwrap();
    let b = encode_feasibility(&quotient, &spec, &fam.full_subfamily()).unwrap();
    assert_eq!(a.text, b.text);
}
