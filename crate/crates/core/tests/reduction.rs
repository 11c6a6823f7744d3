use epdyn_core::effective::{enumerate_roots, make_partition, EpOperator, PartitionSelector, ScanConfig};
use epdyn_core::existence::{full_spectrum, ExistenceProblem};
use epdyn_core::operator::HermitianOperator;
use epdyn_core::realisation::cluster_realisations;

fn matrix(rows: &[Vec<f64>]) -> ExistenceProblem {
    ExistenceProblem::from_matrix(HermitianOperator::from_rows(rows).unwrap()).unwrap()
}

#[test]
fn two_level_roots_are_the_closed_form_eigenvalues() {
    let p = matrix(&[vec![1.0, 0.5], vec![0.5, 2.0]]);
    let ep = EpOperator::new(make_partition(&p, &PartitionSelector::Indices(vec![0])).unwrap());
    let scan = enumerate_roots(&ep, &ScanConfig::covering(&p)).unwrap();
    let e: Vec<f64> = scan.roots.iter().map(|r| r.energy).collect();
    let d = 0.5f64.sqrt();
    assert_eq!(e.len(), 2);
    assert!((e[0] - (1.5 - d)).abs() < 1e-12 && (e[1] - (1.5 + d)).abs() < 1e-12, "{e:?}");
    // Self-consistency: E is an eigenvalue of H_eff(E).
    for r in &scan.roots {
        let heff = ep.effective_hamiltonian(r.energy).unwrap();
        assert!((heff.matrix()[(0, 0)].re - r.energy).abs() < 1e-10);
        assert!(r.residual < 1e-10);
    }
}

#[test]
fn decoupled_q_state_is_reported_as_a_pole() {
    let p = matrix(&[vec![1.0, 0.3, 0.0], vec![0.3, 2.0, 0.0], vec![0.0, 0.0, 3.0]]);
    let ep = EpOperator::new(make_partition(&p, &PartitionSelector::Indices(vec![0])).unwrap());
    let scan = enumerate_roots(&ep, &ScanConfig::covering(&p)).unwrap();
    assert_eq!(scan.roots.len(), 2);
    assert_eq!(scan.decoupled.len(), 1);
    assert!((scan.decoupled[0].energy - 3.0).abs() < 1e-14);
    assert!(scan.completeness.is_complete());
}

#[test]
fn every_channel_partition_recovers_the_full_spectrum() {
    let p = ExistenceProblem::random(5, 3, 42).unwrap();
    let oracle = full_spectrum(&p).unwrap().eigenvalues();
    for ch in 0..3 {
        let ep = EpOperator::new(make_partition(&p, &PartitionSelector::XiChannel(ch)).unwrap());
        let scan = enumerate_roots(&ep, &ScanConfig::covering(&p)).unwrap();
        let mut e: Vec<f64> = scan.roots.iter().map(|r| r.energy).chain(scan.decoupled.iter().map(|d| d.energy)).collect();
        e.sort_by(f64::total_cmp);
        assert_eq!(e.len(), oracle.len());
        for (a, b) in e.iter().zip(&oracle) {
            assert!((a - b).abs() < 1e-9 * ep.norm(), "channel {ch}: {a} vs {b}");
        }
    }
}

#[test]
fn clustering_widths_interpolate_between_extremes() {
    let p = ExistenceProblem::random(6, 2, 9).unwrap();
    let ep = EpOperator::new(make_partition(&p, &PartitionSelector::XiChannel(0)).unwrap());
    let scan = enumerate_roots(&ep, &ScanConfig::covering(&p)).unwrap();
    let fine = cluster_realisations(&scan.roots, p.grid_q(), 0.0).unwrap();
    let coarse = cluster_realisations(&scan.roots, p.grid_q(), 1e9).unwrap();
    assert_eq!(coarse.len(), 1);
    assert_eq!(coarse.alpha(0), (12, 12));
    assert!(fine.len() >= coarse.len());
    assert_eq!(fine.total(), 12);
}
