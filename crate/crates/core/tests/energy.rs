//! Discrete energy decay of the marched solution: with zero boundary data
//! and zero source, the lumped norm of the state never grows along a march
//! for any theta at or above one half.

use bsfv::analytics::{discrete_norm, NormKind};
use bsfv::flux::SchemeKind;
use bsfv::mesh::Mesh;
use bsfv::model::{BoundaryData, DivergenceModel, MarketData};
use bsfv::stepper::{march, StepConfig, StoragePolicy, TimeGrid};
use rand::rngs::StdRng;
use rand::{Rng, SeedableRng};

fn zero_source_model() -> DivergenceModel {
    let market = MarketData::constant(0.1, 0.5, 100.0, 1.0, 300.0).unwrap();
    DivergenceModel::new(market, BoundaryData::zero(), 0.25).unwrap()
}

fn decay_suite(mesh: &Mesh, seed: u64) {
    let model = zero_source_model();
    let grid = TimeGrid::uniform(1.0, 25).unwrap();
    let mut rng = StdRng::seed_from_u64(seed);
    for theta in [0.5, 0.75, 1.0] {
        for scheme in [SchemeKind::Tpfa, SchemeKind::FittedTpfa] {
            let config = StepConfig::new(theta, scheme).unwrap();
            for _ in 0..25 {
                let start: Vec<f64> =
                    (0..mesh.n_interior()).map(|_| rng.gen_range(-1.0..1.0)).collect();
                let sol =
                    march(start, mesh, &model, &grid, config, StoragePolicy::Full).unwrap();
                let mut previous = f64::INFINITY;
                for (k, state) in sol.states().iter().enumerate() {
                    let norm =
                        discrete_norm(state, mesh, NormKind::DiscreteL2, None).unwrap();
                    assert!(
                        norm <= previous * (1.0 + 1e-12),
                        "theta {theta}, {scheme}, step {k}: norm grew from {previous} to {norm}"
                    );
                    previous = norm;
                }
            }
        }
    }
}

#[test]
fn the_march_never_gains_energy_on_uniform_meshes() {
    let mesh = Mesh::uniform(30, 300.0).unwrap();
    decay_suite(&mesh, 0xdecade01);
}

#[test]
fn the_march_never_gains_energy_on_graded_meshes() {
    let mesh = Mesh::geometric(30, 300.0, 1.2).unwrap();
    decay_suite(&mesh, 0xdecade02);
}
