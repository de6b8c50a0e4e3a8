mod common;

#[test]
fn trajectory_cost_matches_brute_force_oracle() {
    let stats = common::cost_oracle_sweep(1000, 2024);
    assert!(stats.max_error <= 1e-12, "{stats:?}");
    // the sample must exercise both truncation and the latch
    assert!(stats.truncated > 20 && stats.collided > 20, "{stats:?}");
}
