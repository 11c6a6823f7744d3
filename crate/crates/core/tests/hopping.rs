use epdyn_core::dynamics::{empirical_frequencies, simulate_batch, simulate_hops, HopConfig};
use epdyn_core::grid::Grid;
use epdyn_core::realisation::RealisationEnsemble;

fn ensemble(specs: &[(u64, f64, f64)]) -> RealisationEnsemble {
    RealisationEnsemble::synthetic(Grid::new(201, -10.0, 10.0).unwrap(), specs).unwrap()
}

#[test]
fn chaos_frequencies_track_alpha() {
    let ens = ensemble(&[(3, -4.0, 0.5), (1, 4.0, 0.5)]);
    let traj = simulate_hops(&ens, &HopConfig::chaos(40_000, 1)).unwrap();
    let stats = empirical_frequencies(&traj, &ens);
    let sigma = (0.75f64 * 0.25 / 40_000.0).sqrt();
    assert!((stats.frequencies[0] - 0.75).abs() < 4.0 * sigma, "{:?}", stats.frequencies);
}

#[test]
fn batch_members_are_independent_streams_of_one_seed() {
    let ens = ensemble(&[(1, -4.0, 0.5), (1, 4.0, 0.5)]);
    let batch = simulate_batch(&ens, &HopConfig::chaos(200, 5), 3).unwrap();
    for (id, t) in batch.iter().enumerate() {
        let single = simulate_hops(&ens, &HopConfig { trajectory_id: id as u64, ..HopConfig::chaos(200, 5) }).unwrap();
        assert_eq!(t, &single);
    }
    assert_ne!(batch[0].entries, batch[1].entries);
}

#[test]
fn measurement_without_localized_realisation_never_freezes() {
    let ens = ensemble(&[(1, -4.0, 3.0), (1, 4.0, 3.0)]);
    let traj = simulate_hops(&ens, &HopConfig::measurement(500, 2, 0.5)).unwrap();
    assert!(traj.frozen_at.is_none());
    assert!(traj.unlocalizable);
}
