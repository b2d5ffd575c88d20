//! Statevector simulation of the angle-encoded entangler kernel.
//!
//! Wire 0 is the most significant bit of a basis index. Expectations are
//! analytic; there is no shot sampling.

use std::f64::consts::FRAC_PI_2;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

pub const MAX_QUBITS: usize = 10;

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum QsimError {
    #[error("qubit count {0} outside 1..={MAX_QUBITS}")]
    QubitCount(usize),
    #[error("wire {wire} out of range for {n} qubits")]
    WireOutOfRange { wire: usize, n: usize },
    #[error("control and target are both wire {0}")]
    SameWire(usize),
    #[error("expected {expected} values, got {got}")]
    ShapeMismatch { expected: usize, got: usize },
}

type Gate = [[Complex64; 2]; 2];

fn rx(angle: f64) -> Gate {
    let (s, c) = (angle / 2.0).sin_cos();
    let c = Complex64::new(c, 0.0);
    let m = Complex64::new(0.0, -s);
    [[c, m], [m, c]]
}

fn ry(angle: f64) -> Gate {
    let (s, c) = (angle / 2.0).sin_cos();
    [
        [Complex64::new(c, 0.0), Complex64::new(-s, 0.0)],
        [Complex64::new(s, 0.0), Complex64::new(c, 0.0)],
    ]
}

fn rz(angle: f64) -> Gate {
    let z = Complex64::new(0.0, 0.0);
    [
        [Complex64::from_polar(1.0, -angle / 2.0), z],
        [z, Complex64::from_polar(1.0, angle / 2.0)],
    ]
}

#[derive(Debug, Clone, PartialEq)]
pub struct StateVector {
    n: usize,
    amps: Vec<Complex64>,
}

impl StateVector {
    /// |0...0> on `n` qubits.
    pub fn zero(n: usize) -> Result<StateVector, QsimError> {
        if n == 0 || n > MAX_QUBITS {
            return Err(QsimError::QubitCount(n));
        }
        let mut amps = vec![Complex64::new(0.0, 0.0); 1 << n];
        amps[0] = Complex64::new(1.0, 0.0);
        Ok(StateVector { n, amps })
    }

    /// Computational basis state; bit `n-1-w` of `index` is wire `w`.
    pub fn basis(n: usize, index: usize) -> Result<StateVector, QsimError> {
        let mut s = StateVector::zero(n)?;
        if index >= s.amps.len() {
            return Err(QsimError::ShapeMismatch {
                expected: s.amps.len(),
                got: index,
            });
        }
        s.amps[0] = Complex64::new(0.0, 0.0);
        s.amps[index] = Complex64::new(1.0, 0.0);
        Ok(s)
    }

    pub fn n_qubits(&self) -> usize {
        self.n
    }

    pub fn amplitudes(&self) -> &[Complex64] {
        &self.amps
    }

    pub fn norm_sqr(&self) -> f64 {
        self.amps.iter().map(|a| a.norm_sqr()).sum()
    }

    fn mask(&self, wire: usize) -> Result<usize, QsimError> {
        if wire >= self.n {
            return Err(QsimError::WireOutOfRange { wire, n: self.n });
        }
        Ok(1 << (self.n - 1 - wire))
    }

    fn apply(&mut self, wire: usize, g: &Gate) -> Result<(), QsimError> {
        let m = self.mask(wire)?;
        for i in 0..self.amps.len() {
            if i & m == 0 {
                let (a0, a1) = (self.amps[i], self.amps[i | m]);
                self.amps[i] = g[0][0] * a0 + g[0][1] * a1;
                self.amps[i | m] = g[1][0] * a0 + g[1][1] * a1;
            }
        }
        Ok(())
    }

    pub fn apply_rx(&mut self, wire: usize, angle: f64) -> Result<(), QsimError> {
        self.apply(wire, &rx(angle))
    }

    pub fn apply_ry(&mut self, wire: usize, angle: f64) -> Result<(), QsimError> {
        self.apply(wire, &ry(angle))
    }

    pub fn apply_rz(&mut self, wire: usize, angle: f64) -> Result<(), QsimError> {
        self.apply(wire, &rz(angle))
    }

    /// Pauli X, used by the reverse sweep for generator insertion.
    fn apply_x(&mut self, wire: usize) -> Result<(), QsimError> {
        let m = self.mask(wire)?;
        for i in 0..self.amps.len() {
            if i & m == 0 {
                self.amps.swap(i, i | m);
            }
        }
        Ok(())
    }

    pub fn apply_cnot(&mut self, control: usize, target: usize) -> Result<(), QsimError> {
        if control == target {
            return Err(QsimError::SameWire(control));
        }
        let (c, t) = (self.mask(control)?, self.mask(target)?);
        for i in 0..self.amps.len() {
            if i & c != 0 && i & t == 0 {
                self.amps.swap(i, i | t);
            }
        }
        Ok(())
    }

    /// <Z> on one wire.
    pub fn expect_z(&self, wire: usize) -> Result<f64, QsimError> {
        let m = self.mask(wire)?;
        Ok(self
            .amps
            .iter()
            .enumerate()
            .map(|(i, a)| {
                if i & m == 0 {
                    a.norm_sqr()
                } else {
                    -a.norm_sqr()
                }
            })
            .sum())
    }

    pub fn expect_z_all(&self) -> Vec<f64> {
        (0..self.n).map(|w| self.expect_z(w).unwrap()).collect()
    }

    fn inner(&self, other: &StateVector) -> Complex64 {
        self.amps
            .iter()
            .zip(&other.amps)
            .map(|(a, b)| a.conj() * b)
            .sum()
    }
}

/// Entangler circuit: `n_layers` rounds of RX on every wire followed by a
/// CNOT ring. `thetas` is row-major, layer by layer.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct KernelCircuitSpec {
    pub n_qubits: usize,
    pub n_layers: usize,
    pub thetas: Vec<f64>,
}

impl KernelCircuitSpec {
    pub fn new(n_qubits: usize, n_layers: usize, thetas: Vec<f64>) -> Result<Self, QsimError> {
        let spec = KernelCircuitSpec {
            n_qubits,
            n_layers,
            thetas,
        };
        spec.validate()?;
        Ok(spec)
    }

    pub fn validate(&self) -> Result<(), QsimError> {
        if self.n_qubits == 0 || self.n_qubits > MAX_QUBITS {
            return Err(QsimError::QubitCount(self.n_qubits));
        }
        if self.thetas.len() != self.n_layers * self.n_qubits {
            return Err(QsimError::ShapeMismatch {
                expected: self.n_layers * self.n_qubits,
                got: self.thetas.len(),
            });
        }
        Ok(())
    }

    fn check_features(&self, features: &[f64]) -> Result<(), QsimError> {
        self.validate()?;
        if features.len() != self.n_qubits {
            return Err(QsimError::ShapeMismatch {
                expected: self.n_qubits,
                got: features.len(),
            });
        }
        Ok(())
    }
}

/// |0...0> followed by RX(f_i) on wire i.
pub fn angle_encode(features: &[f64]) -> Result<StateVector, QsimError> {
    let mut s = StateVector::zero(features.len())?;
    for (w, &f) in features.iter().enumerate() {
        s.apply_rx(w, f)?;
    }
    Ok(s)
}

fn entangle(state: &mut StateVector) {
    let n = state.n;
    if n > 1 {
        for i in 0..n {
            state.apply_cnot(i, (i + 1) % n).unwrap();
        }
    }
}

/// State after encoding and every entangler layer.
pub fn kernel_state(features: &[f64], spec: &KernelCircuitSpec) -> Result<StateVector, QsimError> {
    spec.check_features(features)?;
    let mut s = angle_encode(features)?;
    for layer in spec.thetas.chunks(spec.n_qubits) {
        for (w, &t) in layer.iter().enumerate() {
            s.apply_rx(w, t)?;
        }
        entangle(&mut s);
    }
    Ok(s)
}

/// Encodes `features`, runs every entangler layer and returns <Z_i>.
pub fn run_kernel_circuit(
    features: &[f64],
    spec: &KernelCircuitSpec,
) -> Result<Vec<f64>, QsimError> {
    Ok(kernel_state(features, spec)?.expect_z_all())
}

/// Gradients of a circuit output with respect to the angles and features.
#[derive(Debug, Clone, PartialEq)]
pub struct CircuitGrad {
    /// Same layout as `KernelCircuitSpec::thetas`.
    pub thetas: Vec<f64>,
    pub features: Vec<f64>,
}

/// d<Z_out>/d(angle) by the two-term shift rule, exact for rotation
/// generators. Applies to encoding angles as well.
pub fn param_shift_grad(
    features: &[f64],
    spec: &KernelCircuitSpec,
    out_index: usize,
) -> Result<CircuitGrad, QsimError> {
    spec.check_features(features)?;
    if out_index >= spec.n_qubits {
        return Err(QsimError::WireOutOfRange {
            wire: out_index,
            n: spec.n_qubits,
        });
    }
    let eval = |f: &[f64], s: &KernelCircuitSpec| -> f64 {
        kernel_state(f, s).unwrap().expect_z(out_index).unwrap()
    };
    let mut shifted = spec.clone();
    let thetas = (0..spec.thetas.len())
        .map(|k| {
            shifted.thetas[k] = spec.thetas[k] + FRAC_PI_2;
            let plus = eval(features, &shifted);
            shifted.thetas[k] = spec.thetas[k] - FRAC_PI_2;
            let minus = eval(features, &shifted);
            shifted.thetas[k] = spec.thetas[k];
            (plus - minus) / 2.0
        })
        .collect();
    let mut f = features.to_vec();
    let feats = (0..features.len())
        .map(|k| {
            f[k] = features[k] + FRAC_PI_2;
            let plus = eval(&f, spec);
            f[k] = features[k] - FRAC_PI_2;
            let minus = eval(&f, spec);
            f[k] = features[k];
            (plus - minus) / 2.0
        })
        .collect();
    Ok(CircuitGrad {
        thetas,
        features: feats,
    })
}

/// Reverse-mode gradient of sum_k upstream[k] * <Z_k> in one backward
/// sweep over the circuit.
pub fn backprop_grad(
    features: &[f64],
    spec: &KernelCircuitSpec,
    upstream: &[f64],
) -> Result<CircuitGrad, QsimError> {
    let n = spec.n_qubits;
    if upstream.len() != n {
        return Err(QsimError::ShapeMismatch {
            expected: n,
            got: upstream.len(),
        });
    }
    let mut phi = kernel_state(features, spec)?;

    // lambda = O |phi> with O = sum_k u_k Z_k, diagonal in the basis.
    let mut lambda = phi.clone();
    for (i, a) in lambda.amps.iter_mut().enumerate() {
        let weight: f64 = (0..n)
            .map(|k| {
                if i & (1 << (n - 1 - k)) == 0 {
                    upstream[k]
                } else {
                    -upstream[k]
                }
            })
            .sum();
        *a *= weight;
    }

    // For RX(t) = exp(-i t X / 2) with phi the state right after the gate,
    // dE/dt = Im <lambda| X |phi>.
    let generator = |lambda: &StateVector, phi: &StateVector, w: usize| -> f64 {
        let mut x_phi = phi.clone();
        x_phi.apply_x(w).unwrap();
        lambda.inner(&x_phi).im
    };

    let mut thetas = vec![0.0; spec.thetas.len()];
    for (l, layer) in spec.thetas.chunks(n).enumerate().rev() {
        if n > 1 {
            for i in (0..n).rev() {
                phi.apply_cnot(i, (i + 1) % n)?;
                lambda.apply_cnot(i, (i + 1) % n)?;
            }
        }
        for w in (0..n).rev() {
            thetas[l * n + w] = generator(&lambda, &phi, w);
            phi.apply_rx(w, -layer[w])?;
            lambda.apply_rx(w, -layer[w])?;
        }
    }
    let mut feats = vec![0.0; n];
    for w in (0..n).rev() {
        feats[w] = generator(&lambda, &phi, w);
        phi.apply_rx(w, -features[w])?;
        lambda.apply_rx(w, -features[w])?;
    }
    Ok(CircuitGrad {
        thetas,
        features: feats,
    })
}
