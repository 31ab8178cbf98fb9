#![allow(dead_code)]

use proptest::prelude::*;
use radpair::spin::hermitize;
use radpair::{assemble, HamiltonianSpec, HyperfineTerm, Operator, SpinSystem, C64};

pub fn fig6_spec() -> HamiltonianSpec {
    HamiltonianSpec {
        exchange_j: 20.0,
        hyperfine: vec![HyperfineTerm { electron: 1, nucleus: 0, coupling: 1.0 }],
        zeeman: [0.0, 0.0],
    }
}

pub fn fig6_system() -> SpinSystem {
    SpinSystem::new(&[0.5]).unwrap()
}

pub fn fig6_hamiltonian() -> Operator {
    assemble(&fig6_spec(), &fig6_system()).unwrap()
}

pub fn max_abs(m: &Operator) -> f64 {
    m.iter().map(|z| z.norm()).fold(0.0, f64::max)
}

fn complex_matrix(dim: usize) -> impl Strategy<Value = Operator> {
    prop::collection::vec(-1.0..1.0f64, 2 * dim * dim).prop_map(move |v| {
        Operator::from_fn(dim, dim, |i, j| C64::new(v[2 * (i * dim + j)], v[2 * (i * dim + j) + 1]))
    })
}

/// Random positive matrix A·A† scaled to a trace in (0.05, 1].
pub fn density(dim: usize) -> impl Strategy<Value = Operator> {
    (complex_matrix(dim), 0.05..1.0f64).prop_map(|(a, tr)| {
        let m = &a * a.adjoint();
        let t = m.trace().re;
        m * C64::new(tr / t, 0.0)
    })
}

pub fn hermitian(dim: usize, scale: f64) -> impl Strategy<Value = Operator> {
    complex_matrix(dim).prop_map(move |a| hermitize(&a) * C64::new(scale, 0.0))
}

pub fn rate() -> impl Strategy<Value = f64> {
    0.0..5.0f64
}
