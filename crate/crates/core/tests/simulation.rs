use sia_core::dga::DgaConfig;
use sia_core::io::Certificate;
use sia_core::simulation::{run_scenario, Scenario, TerminalStatus};
use sia_core::sos::Multipliers;
use sia_core::{ArmGeometry, ControlBounds, SystemParams};

fn uncertified(k: f64) -> Certificate {
    Certificate::new(
        SystemParams::nominal(),
        k,
        [Multipliers::zeros(); 4],
        0.1,
        ArmGeometry::default(),
        ControlBounds::default(),
        0,
    )
}

#[test]
fn unconstrained_loop_reaches_every_goal() {
    let scn = Scenario {
        wall: false,
        adapt: false,
        ..Scenario::default()
    };
    let log = run_scenario(&scn, &uncertified(0.3), &DgaConfig::default()).unwrap();
    assert_eq!(log.status, TerminalStatus::Completed);
    assert_eq!(log.goals_reached, scn.goals.len());
    assert!(log.ticks.iter().all(|t| t.phi0 < 0.0 && t.feasible));
}

#[test]
fn log_is_uniformly_timed_and_inputs_are_bounded() {
    let scn = Scenario {
        adapt: false,
        ..Scenario::default()
    };
    let cert = uncertified(0.3);
    let log = run_scenario(&scn, &cert, &DgaConfig::default()).unwrap();
    for w in log.ticks.windows(2) {
        assert!(w[1].t > w[0].t);
        assert!((w[1].t - w[0].t - scn.dt).abs() < 1e-12);
    }
    assert!(log.ticks.iter().all(|t| cert.bounds.contains(&t.u)));
    // dynamics follow the schedule even without adaptation
    let last = log.ticks.last().unwrap();
    assert_eq!(last.rho, *scn.rho_schedule.last().unwrap());
    assert_eq!(last.k, 0.3);
}

#[test]
fn zero_gain_index_runs_into_the_wall() {
    // with k = 0 the index ignores velocity, so braking starts too late
    let scn = Scenario {
        adapt: false,
        ..Scenario::default()
    };
    let mut far = scn.clone();
    far.goals = vec![sia_core::simulation::Goal::new(1.6, 0.9)];
    far.rho_schedule.truncate(1);
    let log = run_scenario(&far, &uncertified(0.0), &DgaConfig::default()).unwrap();
    assert!(matches!(
        log.status,
        TerminalStatus::InfeasibleEncountered | TerminalStatus::WallViolation
    ), "{:?}", log.status);
}
