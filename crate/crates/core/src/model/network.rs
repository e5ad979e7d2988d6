//! Recurrent cells, the linear head, and backpropagation through time.

use std::ops::Range;

use super::{Architecture, ModelError};
use crate::linalg::Matrix;
use crate::scalar::Scalar;

/// Offsets of the named segments inside the flat parameter vector.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Layout {
    pub architecture: Architecture,
    pub input_size: usize,
    pub hidden_size: usize,
    pub output_size: usize,
}

impl Layout {
    fn gate_rows(&self) -> usize {
        self.architecture.gates() * self.hidden_size
    }

    /// Input weights, `gates·H × p`, row-major.
    pub fn input(&self) -> Range<usize> {
        0..self.gate_rows() * self.input_size
    }

    /// Recurrent weights, `gates·H × H`.
    pub fn recurrent(&self) -> Range<usize> {
        let s = self.input().end;
        s..s + self.gate_rows() * self.hidden_size
    }

    pub fn bias(&self) -> Range<usize> {
        let s = self.recurrent().end;
        s..s + self.gate_rows()
    }

    /// Head weights, `Q × H`.
    pub fn head(&self) -> Range<usize> {
        let s = self.bias().end;
        s..s + self.output_size * self.hidden_size
    }

    pub fn head_bias(&self) -> Range<usize> {
        let s = self.head().end;
        s..s + self.output_size
    }

    pub fn len(&self) -> usize {
        self.head_bias().end
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn check(&self, weights_len: usize, window: &Matrix<impl Scalar>) -> Result<(), ModelError> {
        if weights_len != self.len() {
            return Err(ModelError::Shape(format!("expected {} weights, got {weights_len}", self.len())));
        }
        if window.cols() != self.input_size {
            return Err(ModelError::Shape(format!(
                "window has {} features, model expects {}",
                window.cols(),
                self.input_size
            )));
        }
        if window.rows() == 0 {
            return Err(ModelError::Shape("empty window".into()));
        }
        Ok(())
    }
}

fn sigmoid<T: Scalar>(x: T) -> T {
    T::one() / (T::one() + (-x).exp())
}

/// `out[r] += Σ_c m[r·cols + c] · v[c]` for rows `rows`.
fn matvec_acc<T: Scalar>(out: &mut [T], m: &[T], cols: usize, rows: Range<usize>, v: &[T]) {
    for (o, r) in out.iter_mut().zip(rows) {
        let row = &m[r * cols..(r + 1) * cols];
        *o += row.iter().zip(v).map(|(&a, &b)| a * b).sum::<T>();
    }
}

/// `grad[r·cols + c] += d[r − rows.start] · v[c]`.
fn outer_acc<T: Scalar>(grad: &mut [T], cols: usize, rows: Range<usize>, d: &[T], v: &[T]) {
    for (&dr, r) in d.iter().zip(rows) {
        for (g, &vc) in grad[r * cols..(r + 1) * cols].iter_mut().zip(v) {
            *g += dr * vc;
        }
    }
}

/// `out[c] += Σ_r m[r·cols + c] · d[r − rows.start]`.
fn matvec_t_acc<T: Scalar>(out: &mut [T], m: &[T], cols: usize, rows: Range<usize>, d: &[T]) {
    for (&dr, r) in d.iter().zip(rows) {
        for (o, &w) in out.iter_mut().zip(&m[r * cols..(r + 1) * cols]) {
            *o += w * dr;
        }
    }
}

/// Values kept from one time step for the backward pass.
#[derive(Debug, Clone)]
struct Step<T> {
    x: Vec<T>,
    h_prev: Vec<T>,
    /// Activated gates, `gates·H`.
    gates: Vec<T>,
    c_prev: Vec<T>,
    c: Vec<T>,
    h: Vec<T>,
}

/// Forward pass record over a whole window.
#[derive(Debug, Clone)]
pub struct Trace<T> {
    steps: Vec<Step<T>>,
    pub output: Vec<T>,
}

impl<T: Scalar> Trace<T> {
    /// Hidden state after each step.
    pub fn hidden_states(&self) -> impl Iterator<Item = &[T]> {
        self.steps.iter().map(|s| s.h.as_slice())
    }

    /// Cell state after each step; empty vectors for architectures without one.
    pub fn cell_states(&self) -> impl Iterator<Item = &[T]> {
        self.steps.iter().map(|s| s.c.as_slice())
    }
}

pub fn run<T: Scalar>(layout: &Layout, w: &[T], window: &Matrix<T>) -> Trace<T> {
    let h_n = layout.hidden_size;
    let p = layout.input_size;
    let wx = &w[layout.input()];
    let wh = &w[layout.recurrent()];
    let b = &w[layout.bias()];
    let lstm = layout.architecture == Architecture::Lstm;

    let mut h = vec![T::zero(); h_n];
    let mut c = if lstm { vec![T::zero(); h_n] } else { Vec::new() };
    let mut steps = Vec::with_capacity(window.rows());
    for t in 0..window.rows() {
        let x = window.row(t).to_vec();
        let rows = layout.gate_rows();
        let mut a = b.to_vec();
        matvec_acc(&mut a, wx, p, 0..rows, &x);
        let (h_new, c_new, gates) = match layout.architecture {
            Architecture::Rnn => {
                matvec_acc(&mut a, wh, h_n, 0..rows, &h);
                let g: Vec<T> = a.iter().map(|v| v.tanh()).collect();
                (g.clone(), Vec::new(), g)
            }
            Architecture::Lstm => {
                matvec_acc(&mut a, wh, h_n, 0..rows, &h);
                let mut g = a;
                for (k, v) in g.iter_mut().enumerate() {
                    *v = if (2 * h_n..3 * h_n).contains(&k) { v.tanh() } else { sigmoid(*v) };
                }
                let (gi, gf, gg, go) = (&g[..h_n], &g[h_n..2 * h_n], &g[2 * h_n..3 * h_n], &g[3 * h_n..]);
                let c_new: Vec<T> = (0..h_n).map(|j| gf[j] * c[j] + gi[j] * gg[j]).collect();
                let h_new = (0..h_n).map(|j| go[j] * c_new[j].tanh()).collect();
                (h_new, c_new, g)
            }
            Architecture::Gru => {
                matvec_acc(&mut a[..2 * h_n], wh, h_n, 0..2 * h_n, &h);
                let mut g = a;
                for v in &mut g[..2 * h_n] {
                    *v = sigmoid(*v);
                }
                let rh: Vec<T> = (0..h_n).map(|j| g[h_n + j] * h[j]).collect();
                matvec_acc(&mut g[2 * h_n..], wh, h_n, 2 * h_n..3 * h_n, &rh);
                for v in &mut g[2 * h_n..] {
                    *v = v.tanh();
                }
                let h_new = (0..h_n)
                    .map(|j| {
                        let (z, n) = (g[j], g[2 * h_n + j]);
                        (T::one() - z) * n + z * h[j]
                    })
                    .collect();
                (h_new, Vec::new(), g)
            }
        };
        steps.push(Step { x, h_prev: h, gates, c_prev: c, c: c_new.clone(), h: h_new.clone() });
        h = h_new;
        c = c_new;
    }

    let mut output = w[layout.head_bias()].to_vec();
    matvec_acc(&mut output, &w[layout.head()], h_n, 0..layout.output_size, &h);
    Trace { steps, output }
}

/// Accumulates into `grad` the gradient of a loss whose derivative with
/// respect to the outputs of `trace` is `d_out`.
pub fn backward<T: Scalar>(layout: &Layout, w: &[T], trace: &Trace<T>, d_out: &[T], grad: &mut [T]) {
    let h_n = layout.hidden_size;
    let p = layout.input_size;
    let rows = layout.gate_rows();
    let (ri, rr, rb, rhd, rhb) = (layout.input(), layout.recurrent(), layout.bias(), layout.head(), layout.head_bias());
    let wh = &w[rr.clone()];
    let last = trace.steps.last().expect("non-empty window");

    for (g, &d) in grad[rhb].iter_mut().zip(d_out) {
        *g += d;
    }
    outer_acc(&mut grad[rhd.clone()], h_n, 0..layout.output_size, d_out, &last.h);
    let mut dh = vec![T::zero(); h_n];
    matvec_t_acc(&mut dh, &w[rhd], h_n, 0..layout.output_size, d_out);
    let mut dc = vec![T::zero(); h_n];

    let one = T::one();
    for step in trace.steps.iter().rev() {
        let g = &step.gates;
        let mut da = vec![T::zero(); rows];
        let mut dh_prev = vec![T::zero(); h_n];
        match layout.architecture {
            Architecture::Rnn => {
                for j in 0..h_n {
                    da[j] = dh[j] * (one - step.h[j] * step.h[j]);
                }
                matvec_t_acc(&mut dh_prev, wh, h_n, 0..rows, &da);
                outer_acc(&mut grad[rr.clone()], h_n, 0..rows, &da, &step.h_prev);
            }
            Architecture::Lstm => {
                let mut dc_prev = vec![T::zero(); h_n];
                for j in 0..h_n {
                    let (i, f, gg, o) = (g[j], g[h_n + j], g[2 * h_n + j], g[3 * h_n + j]);
                    let tc = step.c[j].tanh();
                    let dcj = dc[j] + dh[j] * o * (one - tc * tc);
                    da[j] = dcj * gg * i * (one - i);
                    da[h_n + j] = dcj * step.c_prev[j] * f * (one - f);
                    da[2 * h_n + j] = dcj * i * (one - gg * gg);
                    da[3 * h_n + j] = dh[j] * tc * o * (one - o);
                    dc_prev[j] = dcj * f;
                }
                matvec_t_acc(&mut dh_prev, wh, h_n, 0..rows, &da);
                outer_acc(&mut grad[rr.clone()], h_n, 0..rows, &da, &step.h_prev);
                dc = dc_prev;
            }
            Architecture::Gru => {
                let mut rh = vec![T::zero(); h_n];
                for j in 0..h_n {
                    let (z, r, n) = (g[j], g[h_n + j], g[2 * h_n + j]);
                    let dn = dh[j] * (one - z);
                    da[j] = dh[j] * (step.h_prev[j] - n) * z * (one - z);
                    da[2 * h_n + j] = dn * (one - n * n);
                    dh_prev[j] = dh[j] * z;
                    rh[j] = r * step.h_prev[j];
                }
                let mut d_rh = vec![T::zero(); h_n];
                matvec_t_acc(&mut d_rh, wh, h_n, 2 * h_n..3 * h_n, &da[2 * h_n..]);
                outer_acc(&mut grad[rr.clone()], h_n, 2 * h_n..3 * h_n, &da[2 * h_n..], &rh);
                for j in 0..h_n {
                    let r = g[h_n + j];
                    da[h_n + j] = d_rh[j] * step.h_prev[j] * r * (one - r);
                    dh_prev[j] += d_rh[j] * r;
                }
                matvec_t_acc(&mut dh_prev, wh, h_n, 0..2 * h_n, &da[..2 * h_n]);
                outer_acc(&mut grad[rr.clone()], h_n, 0..2 * h_n, &da[..2 * h_n], &step.h_prev);
            }
        }
        outer_acc(&mut grad[ri.clone()], p, 0..rows, &da, &step.x);
        for (gb, &d) in grad[rb.clone()].iter_mut().zip(&da) {
            *gb += d;
        }
        dh = dh_prev;
    }
}
