mod common;

use platoon::decision::{decide, Decision};
use platoon::lookup::{build_table, BuildOptions, ManeuverTable};
use platoon::scenario::Scenario;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

// Traffic that blocks a merge also blocks every later switch, so in grid
// order the answer is almost always 1 or infeasible. The family is stored
// late switches first here to make the scan walk past blocked entries.
fn merge_table() -> (Scenario, ManeuverTable) {
    let sc = Scenario::load(common::fixture("scenario_c.json")).unwrap();
    let opts = BuildOptions { rho_grid: vec![0.1, 0.3, 0.5, 0.7], ..sc.build_options() };
    let mut table = build_table(&sc.pair_requests().unwrap(), &sc.planner, &opts).unwrap();
    let fam = &mut table.entries[0].maneuvers;
    fam.reverse();
    for (k, m) in fam.iter_mut().enumerate() {
        m.index = k + 1;
    }
    table.validate().unwrap();
    (sc, table)
}

#[test]
fn decide_matches_exhaustive_scan() {
    let (sc, table) = merge_table();
    let family = table.query("split", "merged").unwrap();
    assert_eq!(family.len(), 4);
    let mut rng = ChaCha8Rng::seed_from_u64(2024);
    let mut seen = std::collections::BTreeSet::new();
    for case in 0..60 {
        let traffic = common::random_traffic(&mut rng, sc.planner.steps, sc.planner.dt);
        let d_min = if case % 3 == 0 { Some(0.5) } else { None };
        let got = match decide(&table, "split", "merged", &traffic, d_min).unwrap() {
            Decision::Selected { index, .. } => Some(index),
            Decision::Infeasible => None,
        };
        let want = common::brute_force_index(family, &traffic, d_min);
        assert_eq!(got, want, "case {case}");
        seen.insert(want);
    }
    // the fixtures exercise more than one outcome
    eprintln!("outcomes {seen:?}");
    assert!(seen.len() >= 3, "{seen:?}");
}

#[test]
fn short_shared_plan_is_an_error() {
    let (sc, table) = merge_table();
    let mut traffic = common::random_traffic(&mut ChaCha8Rng::seed_from_u64(5), sc.planner.steps, sc.planner.dt);
    traffic.truncate(1);
    if traffic.is_empty() {
        traffic = common::random_traffic(&mut ChaCha8Rng::seed_from_u64(6), sc.planner.steps, sc.planner.dt);
    }
    traffic[0].states.truncate(sc.planner.steps);
    assert!(matches!(
        decide(&table, "split", "merged", &traffic, None),
        Err(platoon::Error::InsufficientHorizon { .. })
    ));
}

#[test]
fn unknown_pair_is_key_not_found() {
    let (_, table) = merge_table();
    assert!(matches!(decide(&table, "merged", "split", &[], None), Err(platoon::Error::KeyNotFound { .. })));
}
