use nalgebra::{DMatrix, DVector};

pub(crate) const MAX_ITERATIONS: usize = 50;
const MAX_HALVINGS: usize = 30;
const RELATIVE_TOLERANCE: f64 = 1e-10;

/// Normal-equation pieces of a linearized least-squares problem.
pub(crate) struct Linearization {
    pub jtj: DMatrix<f64>,
    pub jtr: DVector<f64>,
    pub sse: f64,
}

impl Linearization {
    pub fn new(dim: usize) -> Self {
        Linearization {
            jtj: DMatrix::zeros(dim, dim),
            jtr: DVector::zeros(dim),
            sse: 0.0,
        }
    }

    #[inline]
    pub fn add_row(&mut self, residual: f64, row: &[f64]) {
        let n = row.len();
        for i in 0..n {
            self.jtr[i] += row[i] * residual;
            for j in i..n {
                self.jtj[(i, j)] += row[i] * row[j];
            }
        }
        self.sse += residual * residual;
    }

    fn symmetrize(&mut self) {
        let n = self.jtj.nrows();
        for i in 0..n {
            for j in 0..i {
                self.jtj[(i, j)] = self.jtj[(j, i)];
            }
        }
    }
}

/// Gauss–Newton with step halving. A step is accepted only if it does not
/// increase the sum of squares; stops on a relative change below 1e-10.
pub(crate) fn gauss_newton<P: Clone>(
    init: P,
    mut linearize: impl FnMut(&P) -> Linearization,
    mut sse: impl FnMut(&P) -> f64,
    mut retract: impl FnMut(&P, &DVector<f64>) -> P,
) -> P {
    let mut current = init;
    for _ in 0..MAX_ITERATIONS {
        let mut lin = linearize(&current);
        lin.symmetrize();
        if !lin.sse.is_finite() || lin.sse == 0.0 {
            break;
        }
        let rhs = -&lin.jtr;
        let step = match lin.jtj.clone().cholesky() {
            Some(ch) => ch.solve(&rhs),
            None => {
                let n = lin.jtj.nrows();
                let damped = &lin.jtj + DMatrix::identity(n, n) * (1e-12 * lin.jtj.trace().max(1e-300));
                match damped.lu().solve(&rhs) {
                    Some(s) => s,
                    None => break,
                }
            }
        };
        let mut scale = 1.0;
        let mut accepted = None;
        for _ in 0..MAX_HALVINGS {
            let candidate = retract(&current, &(&step * scale));
            let e = sse(&candidate);
            if e.is_finite() && e <= lin.sse {
                accepted = Some((candidate, e));
                break;
            }
            scale *= 0.5;
        }
        let Some((next, e)) = accepted else { break };
        let change = (lin.sse - e) / lin.sse;
        current = next;
        if change < RELATIVE_TOLERANCE {
            break;
        }
    }
    current
}
