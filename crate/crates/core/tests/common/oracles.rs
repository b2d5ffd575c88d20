//! Independent reference implementations used by several test targets.

use molseq::model::Model;
use molseq::qsim::{run_kernel_circuit, CircuitGrad, KernelCircuitSpec};
use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;
use rand::Rng;
use rand_chacha::ChaCha8Rng;

type C = Complex64;

/// Probability that a random positive outscores a random negative, ties
/// counting one half, by enumerating every pair.
pub fn pairwise_auc(scores: &[f64], labels: &[bool]) -> f64 {
    let mut num = 0.0;
    let mut den = 0.0;
    for (i, &li) in labels.iter().enumerate() {
        for (j, &lj) in labels.iter().enumerate() {
            if li && !lj {
                den += 1.0;
                num += match scores[i].partial_cmp(&scores[j]).unwrap() {
                    std::cmp::Ordering::Greater => 1.0,
                    std::cmp::Ordering::Equal => 0.5,
                    std::cmp::Ordering::Less => 0.0,
                };
            }
        }
    }
    num / den
}

fn rx_matrix(t: f64) -> DMatrix<C> {
    let (s, c) = (t / 2.0).sin_cos();
    DMatrix::from_row_slice(
        2,
        2,
        &[
            C::new(c, 0.0),
            C::new(0.0, -s),
            C::new(0.0, -s),
            C::new(c, 0.0),
        ],
    )
}

/// Gate on one wire embedded as I ⊗ ... ⊗ g ⊗ ... ⊗ I with wire 0 leftmost.
fn embed(n: usize, wire: usize, g: &DMatrix<C>) -> DMatrix<C> {
    let mut m = DMatrix::<C>::identity(1, 1);
    for w in 0..n {
        let f = if w == wire {
            g.clone()
        } else {
            DMatrix::identity(2, 2)
        };
        m = m.kronecker(&f);
    }
    m
}

/// CNOT from its truth table on basis indices.
fn cnot_matrix(n: usize, control: usize, target: usize) -> DMatrix<C> {
    let dim = 1 << n;
    let bit = |w: usize| 1 << (n - 1 - w);
    let mut m = DMatrix::<C>::zeros(dim, dim);
    for i in 0..dim {
        let j = if i & bit(control) != 0 {
            i ^ bit(target)
        } else {
            i
        };
        m[(j, i)] = C::new(1.0, 0.0);
    }
    m
}

fn z_matrix(n: usize, wire: usize) -> DMatrix<C> {
    let z = DMatrix::from_row_slice(
        2,
        2,
        &[
            C::new(1.0, 0.0),
            C::new(0.0, 0.0),
            C::new(0.0, 0.0),
            C::new(-1.0, 0.0),
        ],
    );
    embed(n, wire, &z)
}

/// Whole circuit as one dense 2^n x 2^n matrix.
pub fn dense_unitary(features: &[f64], spec: &KernelCircuitSpec) -> DMatrix<C> {
    let n = spec.n_qubits;
    let mut u = DMatrix::<C>::identity(1 << n, 1 << n);
    for (w, &f) in features.iter().enumerate() {
        u = embed(n, w, &rx_matrix(f)) * u;
    }
    for layer in spec.thetas.chunks(n) {
        for (w, &t) in layer.iter().enumerate() {
            u = embed(n, w, &rx_matrix(t)) * u;
        }
        if n > 1 {
            for i in 0..n {
                u = cnot_matrix(n, i, (i + 1) % n) * u;
            }
        }
    }
    u
}

pub fn dense_expectations(features: &[f64], spec: &KernelCircuitSpec) -> Vec<f64> {
    let n = spec.n_qubits;
    let mut zero = DVector::<C>::zeros(1 << n);
    zero[0] = C::new(1.0, 0.0);
    let psi = dense_unitary(features, spec) * zero;
    (0..n)
        .map(|w| (psi.adjoint() * z_matrix(n, w) * &psi)[(0, 0)].re)
        .collect()
}

pub fn random_spec(rng: &mut ChaCha8Rng, n: usize, layers: usize) -> (Vec<f64>, KernelCircuitSpec) {
    let f = (0..n).map(|_| rng.gen_range(-3.2..3.2)).collect();
    let t = (0..n * layers)
        .map(|_| rng.gen_range(0.0..std::f64::consts::TAU))
        .collect();
    (f, KernelCircuitSpec::new(n, layers, t).unwrap())
}

/// Central differences of one circuit output.
pub fn circuit_finite_difference(
    features: &[f64],
    spec: &KernelCircuitSpec,
    out: usize,
) -> CircuitGrad {
    let h = 1e-5;
    let e = |f: &[f64], s: &KernelCircuitSpec| run_kernel_circuit(f, s).unwrap()[out];
    let mut s = spec.clone();
    let thetas = (0..spec.thetas.len())
        .map(|k| {
            s.thetas[k] += h;
            let p = e(features, &s);
            s.thetas[k] -= 2.0 * h;
            let m = e(features, &s);
            s.thetas[k] = spec.thetas[k];
            (p - m) / (2.0 * h)
        })
        .collect();
    let mut f = features.to_vec();
    let feats = (0..f.len())
        .map(|k| {
            f[k] += h;
            let p = e(&f, spec);
            f[k] -= 2.0 * h;
            let m = e(&f, spec);
            f[k] = features[k];
            (p - m) / (2.0 * h)
        })
        .collect();
    CircuitGrad {
        thetas,
        features: feats,
    }
}

pub fn max_diff(a: &[f64], b: &[f64]) -> f64 {
    a.iter()
        .zip(b)
        .map(|(x, y)| (x - y).abs())
        .fold(0.0, f64::max)
}

/// Largest relative error between analytic and finite-difference loss
/// gradients over every parameter, with the offending entry.
///
/// Uses the fourth-order central stencil
/// (8(f(x+h) - f(x-h)) - (f(x+2h) - f(x-2h))) / 12h at h = 1e-3: truncation
/// error is O(h^4) and rounding noise about eps*|L|/h ~ 1e-13, far below
/// the smallest gradients of these models. Entries where both values are
/// exactly zero count as agreement.
pub fn model_gradient_error(model: &Model, seq: &[usize], y: f64) -> (f64, String) {
    let h = 1e-3;
    let (_, _, grads) = model.loss_and_grad(seq, &[y]).unwrap();
    let mut worst = (0.0, String::new());
    let mut probe = model.clone();
    for (ti, t) in model.tensors().iter().enumerate() {
        for k in 0..t.len() {
            let orig = t.data[k];
            let mut at = |dx: f64| {
                probe.tensors_mut()[ti].data[k] = orig + dx;
                probe.loss(seq, &[y]).unwrap()
            };
            let (p1, m1, p2, m2) = (at(h), at(-h), at(2.0 * h), at(-2.0 * h));
            let fd = (8.0 * (p1 - m1) - (p2 - m2)) / (12.0 * h);
            probe.tensors_mut()[ti].data[k] = orig;
            let an = grads[ti][k];
            let scale = fd.abs().max(an.abs());
            let rel = if scale == 0.0 {
                0.0
            } else {
                (fd - an).abs() / scale
            };
            if rel > worst.0 {
                worst = (
                    rel,
                    format!("{}[{k}]: analytic {an:e} vs fd {fd:e}", t.name),
                );
            }
        }
    }
    worst
}
