use crate::qsim::{backprop_grad, run_kernel_circuit, KernelCircuitSpec};

use super::{sigmoid, Grads, Model, ModelError, ModelKind};

/// Recurrent state carried between time steps.
#[derive(Debug, Clone, PartialEq)]
pub struct CellState {
    pub h: Vec<f64>,
    pub c: Vec<f64>,
}

impl CellState {
    pub fn zeros(hidden: usize) -> CellState {
        CellState {
            h: vec![0.0; hidden],
            c: vec![0.0; hidden],
        }
    }
}

/// Circuit inputs and outputs of one quantum gate at one step.
pub(super) struct CircuitCache {
    angles: Vec<f64>,
    expect: Vec<f64>,
}

pub(super) struct StepCache {
    v: Vec<f64>,
    c_prev: Vec<f64>,
    /// Activated forget, input, candidate and output gates.
    gates: [Vec<f64>; 4],
    tanh_c: Vec<f64>,
    circuits: Vec<CircuitCache>,
}

pub(super) type Trace = Vec<StepCache>;

/// z = v^T W + b for row-major W with `cols` columns.
fn affine(v: &[f64], w: &[f64], b: &[f64]) -> Vec<f64> {
    let cols = b.len();
    let mut z = b.to_vec();
    for (i, &vi) in v.iter().enumerate() {
        if vi != 0.0 {
            let row = &w[i * cols..(i + 1) * cols];
            for (zj, &wij) in z.iter_mut().zip(row) {
                *zj += vi * wij;
            }
        }
    }
    z
}

/// Accumulates dW += v dz^T, db += dz and dv += W dz.
fn affine_back(v: &[f64], w: &[f64], dz: &[f64], dw: &mut [f64], db: &mut [f64], dv: &mut [f64]) {
    let cols = dz.len();
    for (b, &d) in db.iter_mut().zip(dz) {
        *b += d;
    }
    for (i, &vi) in v.iter().enumerate() {
        let row = &w[i * cols..(i + 1) * cols];
        let drow = &mut dw[i * cols..(i + 1) * cols];
        let mut acc = 0.0;
        for j in 0..cols {
            drow[j] += vi * dz[j];
            acc += row[j] * dz[j];
        }
        dv[i] += acc;
    }
}

impl Model {
    fn circuit_spec(&self, g: usize) -> KernelCircuitSpec {
        KernelCircuitSpec {
            n_qubits: self.config.n_qubits,
            n_layers: self.config.n_layers,
            thetas: self.tensors[1 + 5 * g + 2].data.clone(),
        }
    }

    /// Pre-activation of gate `g` for input `v`.
    fn gate_input(
        &self,
        g: usize,
        v: &[f64],
    ) -> Result<(Vec<f64>, Option<CircuitCache>), ModelError> {
        match self.config.kind {
            ModelKind::Lstm => Ok((
                affine(
                    v,
                    &self.tensors[1 + 2 * g].data,
                    &self.tensors[2 + 2 * g].data,
                ),
                None,
            )),
            ModelKind::QkLstm => {
                let base = 1 + 5 * g;
                let angles = affine(v, &self.tensors[base].data, &self.tensors[base + 1].data);
                let expect = run_kernel_circuit(&angles, &self.circuit_spec(g))?;
                let z = affine(
                    &expect,
                    &self.tensors[base + 3].data,
                    &self.tensors[base + 4].data,
                );
                Ok((z, Some(CircuitCache { angles, expect })))
            }
        }
    }

    fn step(&self, x: &[f64], state: &CellState) -> Result<(CellState, StepCache), ModelError> {
        let mut v = x.to_vec();
        v.extend_from_slice(&state.h);
        let mut gates: [Vec<f64>; 4] = Default::default();
        let mut circuits = Vec::new();
        for (g, slot) in gates.iter_mut().enumerate() {
            let (z, cache) = self.gate_input(g, &v)?;
            *slot = if g == 2 {
                z.iter().map(|x| x.tanh()).collect()
            } else {
                z.into_iter().map(sigmoid).collect()
            };
            circuits.extend(cache);
        }
        let [f, i, cand, o] = &gates;
        let c: Vec<f64> = (0..f.len())
            .map(|k| f[k] * state.c[k] + i[k] * cand[k])
            .collect();
        let tanh_c: Vec<f64> = c.iter().map(|x| x.tanh()).collect();
        let h = (0..c.len()).map(|k| o[k] * tanh_c[k]).collect();
        let cache = StepCache {
            v,
            c_prev: state.c.clone(),
            gates,
            tanh_c,
            circuits,
        };
        Ok((CellState { h, c }, cache))
    }

    /// One recurrent update: v = [x; h], gates from v, then
    /// c' = f*c + i*g and h' = o*tanh(c').
    pub fn cell_step(&self, x: &[f64], state: &CellState) -> Result<CellState, ModelError> {
        let (h, d) = (self.config.hidden_dim, self.config.embed_dim);
        if x.len() != d || state.h.len() != h || state.c.len() != h {
            return Err(ModelError::Config(format!(
                "cell expects input {d} and state {h}, got {} and {}/{}",
                x.len(),
                state.h.len(),
                state.c.len()
            )));
        }
        Ok(self.step(x, state)?.0)
    }

    /// Runs the recurrence over an already trimmed sequence.
    pub(super) fn run(&self, seq: &[usize], keep: bool) -> Result<(CellState, Trace), ModelError> {
        let d = self.config.embed_dim;
        let table = &self.tensors[0].data;
        let mut state = CellState::zeros(self.config.hidden_dim);
        let mut trace = Vec::new();
        for &t in seq {
            let (next, cache) = self.step(&table[t * d..(t + 1) * d], &state)?;
            state = next;
            if keep {
                trace.push(cache);
            }
        }
        Ok((state, trace))
    }

    /// Backpropagation through time from dL/dh_T.
    pub(super) fn backward(
        &self,
        seq: &[usize],
        trace: &Trace,
        mut dh: Vec<f64>,
        grads: &mut Grads,
    ) -> Result<(), ModelError> {
        let (d, h) = (self.config.embed_dim, self.config.hidden_dim);
        let mut dc = vec![0.0; h];
        for (t, step) in trace.iter().enumerate().rev() {
            let [f, i, cand, o] = &step.gates;
            let mut dz: [Vec<f64>; 4] = Default::default();
            for z in &mut dz {
                *z = vec![0.0; h];
            }
            for k in 0..h {
                let tc = step.tanh_c[k];
                let d_o = dh[k] * tc;
                dc[k] += dh[k] * o[k] * (1.0 - tc * tc);
                dz[0][k] = dc[k] * step.c_prev[k] * f[k] * (1.0 - f[k]);
                dz[1][k] = dc[k] * cand[k] * i[k] * (1.0 - i[k]);
                dz[2][k] = dc[k] * i[k] * (1.0 - cand[k] * cand[k]);
                dz[3][k] = d_o * o[k] * (1.0 - o[k]);
                dc[k] *= f[k];
            }

            let mut dv = vec![0.0; d + h];
            for (g, dzg) in dz.iter().enumerate() {
                match self.config.kind {
                    ModelKind::Lstm => {
                        let (wi, bi) = (1 + 2 * g, 2 + 2 * g);
                        let (lo, hi) = grads.split_at_mut(bi);
                        affine_back(
                            &step.v,
                            &self.tensors[wi].data,
                            dzg,
                            &mut lo[wi],
                            &mut hi[0],
                            &mut dv,
                        );
                    }
                    ModelKind::QkLstm => {
                        let base = 1 + 5 * g;
                        let cc = &step.circuits[g];
                        let n = self.config.n_qubits;
                        let mut de = vec![0.0; n];
                        {
                            let (lo, hi) = grads.split_at_mut(base + 4);
                            affine_back(
                                &cc.expect,
                                &self.tensors[base + 3].data,
                                dzg,
                                &mut lo[base + 3],
                                &mut hi[0],
                                &mut de,
                            );
                        }
                        let cg = backprop_grad(&cc.angles, &self.circuit_spec(g), &de)?;
                        for (a, x) in grads[base + 2].iter_mut().zip(&cg.thetas) {
                            *a += x;
                        }
                        let (lo, hi) = grads.split_at_mut(base + 1);
                        affine_back(
                            &step.v,
                            &self.tensors[base].data,
                            &cg.features,
                            &mut lo[base],
                            &mut hi[0],
                            &mut dv,
                        );
                    }
                }
            }
            let row = seq[t] * d;
            for (a, x) in grads[0][row..row + d].iter_mut().zip(&dv[..d]) {
                *a += x;
            }
            dh = dv[d..].to_vec();
        }
        Ok(())
    }
}
