use epdyn_core::action::{assemble_schrodinger, conservation_report, gaussian_packet};
use epdyn_core::existence::WaveField;
use epdyn_core::grid::{Boundary, Grid, PhysicalConstants};
use epdyn_core::universal::{build_universal_pde, step_pde, HamiltonianSpec, PdeState};

#[test]
fn eigenstate_only_gains_a_phase() {
    let grid = Grid::new(120, -8.0, 8.0).unwrap();
    let v: Vec<f64> = grid.points().map(|x| 0.5 * x * x).collect();
    let sys = assemble_schrodinger(grid, v, PhysicalConstants::default(), Boundary::Dirichlet).unwrap();
    let spec = sys.stationary().unwrap();
    let ground = &spec.pairs()[0];
    let dt = 1e-3;
    let psi = sys.propagator(dt).unwrap().evolve(ground.state.amplitudes(), 200);
    let overlap = WaveField::new(psi, ground.state.weight()).inner(&ground.state);
    assert!((overlap.norm() - 1.0).abs() < 1e-10);
    // Cayley phase: 2·atan(E·dt/2) per step.
    let phase = -2.0 * 200.0 * (ground.value * dt / 2.0).atan();
    let expected = num_complex::Complex64::from_polar(1.0, phase);
    assert!((overlap.conj() - expected).norm() < 1e-8, "{overlap} vs {expected}");
}

#[test]
fn packet_energy_split_is_consistent() {
    let grid = Grid::new(400, -20.0, 20.0).unwrap();
    let psi = gaussian_packet(&grid, 0.0, 1.0, 2.0).unwrap();
    let sys = assemble_schrodinger(grid, vec![0.0; 400], PhysicalConstants::default(), Boundary::Dirichlet).unwrap();
    let r = conservation_report(&psi, sys.hamiltonian()).unwrap();
    // ⟨p²⟩/2 = (k0² + 1/4σ²)/2 up to discretization.
    assert!((r.kinetic - (4.0 + 0.25) / 2.0).abs() < 0.05, "{}", r.kinetic);
    assert_eq!(r.potential, 0.0);
}

#[test]
fn heat_member_conserves_mass_on_a_ring() {
    let grid = Grid::new(64, 0.0, 1.0).unwrap();
    let pde = build_universal_pde(&HamiltonianSpec::heat(0.01, Boundary::Periodic), &grid).unwrap();
    let u0: Vec<f64> = grid.points().map(|x| 1.0 + (2.0 * std::f64::consts::PI * x).sin()).collect();
    let run = step_pde(&PdeState::real(&u0, 0.01).unwrap(), &pde, 50).unwrap();
    let before: f64 = u0.iter().sum();
    let after: f64 = run.state.real_part().iter().sum();
    assert!((before - after).abs() < 1e-10 * before);
}
