//! Monte Carlo replay against the DP value.

use dualprice::config::example1;
use dualprice::dp::{solve, SolverOptions};
use dualprice::grid::InventoryGrid;
use dualprice::simulator::{simulate, simulate_paths, Accounting, SimOptions};

#[test]
fn simulated_profit_matches_value() {
    let spec = example1();
    let grid = InventoryGrid::new(-8.0, 8.0, 0.1).unwrap();
    let sol = solve(&spec, &grid, &SolverOptions::with_nodes(16)).unwrap();
    let opts = SimOptions {
        n_paths: 20_000,
        seed: 5,
        ..SimOptions::default()
    };
    for i0 in [-2.5, -1.0, 0.0, 1.5, 3.0] {
        let s = simulate(&sol, i0, &opts).unwrap();
        let v = sol.value_at(1, i0);
        assert!(
            (s.mean_profit - v).abs() <= 3.0 * s.std_error + 1e-9,
            "I0={i0}: {} vs {v} (se {})",
            s.mean_profit,
            s.std_error
        );
        assert_eq!(s.grid_escapes, 0);
    }
}

#[test]
fn accounting_modes_agree_in_expectation() {
    let spec = example1();
    let grid = InventoryGrid::new(-8.0, 8.0, 0.25).unwrap();
    let sol = solve(&spec, &grid, &SolverOptions::with_nodes(8)).unwrap();
    let base = SimOptions {
        n_paths: 100_000,
        seed: 9,
        ..SimOptions::default()
    };
    let (exp, _) = simulate_paths(&sol, 1.0, &base).unwrap();
    let (real, _) = simulate_paths(
        &sol,
        1.0,
        &SimOptions {
            accounting: Accounting::Realized,
            ..base
        },
    )
    .unwrap();
    // both modes see the same demand draws, so the gap is bounded by the joint error
    let joint = (exp.std_error.powi(2) + real.std_error.powi(2)).sqrt();
    assert!(
        (exp.mean_profit - real.mean_profit).abs() <= 3.0 * joint,
        "{} vs {} (se {joint})",
        exp.mean_profit,
        real.mean_profit
    );
}
