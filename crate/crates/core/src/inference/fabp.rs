//! Linearized fast belief propagation.
//!
//! Beliefs solve `(I + a D - c W) b = phi` with `a = 4h^2 / (1 - 4h^2)` and
//! `c = 2h / (1 - 4h^2)`. The operator is symmetric but not always positive
//! definite once weighted degrees grow, so the solver is MINRES.

use std::io::Write;

use serde::{Deserialize, Serialize};

use super::graph::KnnGraph;
use crate::aspects::Label;
use crate::error::{Error, Result};
use crate::linalg::{axpy, dot, norm2};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FabpOptions {
    /// Homophily `h`, strictly inside (0, 0.5).
    pub homophily: f64,
    pub max_iter: usize,
    /// Absolute bound on the final residual norm.
    pub tol: f64,
    /// Shrink `h` below `1 / (2 + 2 max weighted degree)` when it is above,
    /// so the propagation series converges. Off solves the system as given.
    pub guard_convergence: bool,
}

impl Default for FabpOptions {
    fn default() -> Self {
        Self {
            homophily: 0.05,
            max_iter: 2000,
            tol: 1e-12,
            guard_convergence: true,
        }
    }
}

impl FabpOptions {
    /// Prior magnitude used for labeled nodes, `0.5 * 2h`.
    pub fn prior_magnitude(&self) -> f64 {
        self.homophily
    }

    pub fn coefficients(&self) -> (f64, f64) {
        coefficients(self.homophily)
    }
}

fn coefficients(h: f64) -> (f64, f64) {
    let denom = 1.0 - 4.0 * h * h;
    (4.0 * h * h / denom, 2.0 * h / denom)
}

/// Safety margin kept below the convergence bound when `h` is shrunk.
const GUARD_MARGIN: f64 = 0.9;

/// Largest homophily for which `|| c W - a D ||_1 < 1` on a graph with the
/// given maximum weighted degree.
pub fn homophily_bound(max_degree: f64) -> f64 {
    1.0 / (2.0 + 2.0 * max_degree)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BeliefState {
    pub priors: Vec<f64>,
    pub beliefs: Vec<f64>,
    pub converged: bool,
    pub iterations: usize,
    /// Homophily actually used; below the requested one only when the
    /// convergence guard stepped in.
    pub homophily: f64,
    /// `||(I + aD - cW) b - phi||` of the returned beliefs.
    pub residual: f64,
}

/// `+s` for real, `-s` for fake, 0 for unknown.
pub fn priors_from_labels(labels: &[Option<Label>], magnitude: f64) -> Vec<f64> {
    labels
        .iter()
        .map(|l| match l {
            Some(Label::Real) => magnitude,
            Some(Label::Fake) => -magnitude,
            None => 0.0,
        })
        .collect()
}

/// `y = (I + a D - c W) x` in CSR form.
struct Operator {
    diag: Vec<f64>,
    offsets: Vec<usize>,
    cols: Vec<usize>,
    vals: Vec<f64>,
}

impl Operator {
    fn new(graph: &KnnGraph, a: f64, c: f64) -> Self {
        let adj = graph.adjacency();
        let mut offsets = vec![0];
        let mut cols = Vec::new();
        let mut vals = Vec::new();
        let mut diag = Vec::with_capacity(graph.n());
        for row in &adj {
            let deg: f64 = row.iter().map(|&(_, w)| w).sum();
            diag.push(1.0 + a * deg);
            for &(v, w) in row {
                cols.push(v);
                vals.push(-c * w);
            }
            offsets.push(cols.len());
        }
        Self {
            diag,
            offsets,
            cols,
            vals,
        }
    }

    fn apply(&self, x: &[f64], y: &mut [f64]) {
        for (i, yi) in y.iter_mut().enumerate() {
            let mut s = self.diag[i] * x[i];
            for p in self.offsets[i]..self.offsets[i + 1] {
                s += self.vals[p] * x[self.cols[p]];
            }
            *yi = s;
        }
    }

    fn residual(&self, x: &[f64], b: &[f64]) -> Vec<f64> {
        let mut r = vec![0.0; x.len()];
        self.apply(x, &mut r);
        for (ri, bi) in r.iter_mut().zip(b) {
            *ri = bi - *ri;
        }
        r
    }
}

/// One MINRES run from `x`; returns iterations used. Stops when the
/// recurrence residual estimate reaches `tol`, on breakdown, or at `budget`.
fn minres(op: &Operator, b: &[f64], x: &mut [f64], tol: f64, budget: usize) -> usize {
    let n = b.len();
    let r0 = op.residual(x, b);
    let beta1 = norm2(&r0);
    if beta1 <= tol || budget == 0 {
        return 0;
    }
    let mut v_prev = vec![0.0; n];
    let mut v: Vec<f64> = r0.iter().map(|r| r / beta1).collect();
    let mut beta = beta1;
    let (mut dbar, mut epsln, mut phibar) = (0.0, 0.0, beta1);
    let (mut cs, mut sn) = (-1.0f64, 0.0f64);
    let mut w = vec![0.0; n];
    let mut w1 = vec![0.0; n];
    let mut p = vec![0.0; n];

    for itn in 1..=budget {
        op.apply(&v, &mut p);
        axpy(-beta, &v_prev, &mut p);
        let alfa = dot(&v, &p);
        axpy(-alfa, &v, &mut p);
        let beta_next = norm2(&p);

        let oldeps = epsln;
        let delta = cs * dbar + sn * alfa;
        let gbar = sn * dbar - cs * alfa;
        epsln = sn * beta_next;
        dbar = -cs * beta_next;
        let gamma = gbar.hypot(beta_next).max(f64::EPSILON);
        cs = gbar / gamma;
        sn = beta_next / gamma;
        let phi = cs * phibar;
        phibar *= sn;

        // w_k = (v_k - oldeps w_{k-2} - delta w_{k-1}) / gamma
        for i in 0..n {
            let wk = (v[i] - oldeps * w1[i] - delta * w[i]) / gamma;
            w1[i] = w[i];
            w[i] = wk;
        }
        axpy(phi, &w, x);

        if phibar.abs() <= tol || beta_next == 0.0 {
            return itn;
        }
        std::mem::swap(&mut v_prev, &mut v);
        for (vi, pi) in v.iter_mut().zip(&p) {
            *vi = pi / beta_next;
        }
        beta = beta_next;
    }
    budget
}

/// Propagates `priors` over `graph`.
///
/// Nodes without edges decouple and keep their prior exactly. The solver
/// restarts from its current iterate when the recurrence estimate and the
/// true residual disagree; `converged` reflects the true residual.
pub fn fabp(graph: &KnnGraph, priors: &[f64], opts: &FabpOptions) -> Result<BeliefState> {
    let n = graph.n();
    if priors.len() != n {
        return Err(Error::dimension(format!(
            "{} priors for a {n}-node graph",
            priors.len()
        )));
    }
    if !(opts.homophily > 0.0 && opts.homophily < 0.5) {
        return Err(Error::parameter(format!(
            "homophily {} outside (0, 0.5)",
            opts.homophily
        )));
    }
    if priors.iter().any(|p| !p.is_finite()) {
        return Err(Error::parameter("priors must be finite"));
    }
    if priors.iter().all(|&p| p == 0.0) {
        return Err(Error::parameter(
            "all priors are zero; at least one labeled node is needed",
        ));
    }
    let mut h = opts.homophily;
    if opts.guard_convergence {
        let max_degree = graph.degrees().into_iter().fold(0.0, f64::max);
        h = h.min(GUARD_MARGIN * homophily_bound(max_degree));
    }
    let (a, c) = coefficients(h);
    let op = Operator::new(graph, a, c);

    let mut beliefs = vec![0.0; n];
    let mut iterations = 0;
    let mut residual = norm2(priors);
    let mut stalled = 0;
    while residual > opts.tol && iterations < opts.max_iter {
        let used = minres(
            &op,
            priors,
            &mut beliefs,
            opts.tol,
            opts.max_iter - iterations,
        );
        iterations += used;
        let next = norm2(&op.residual(&beliefs, priors));
        if next.is_nan() {
            break;
        }
        // a restart that gains nothing means rounding has the last word
        stalled = if next >= residual * 0.5 {
            stalled + 1
        } else {
            0
        };
        residual = next;
        if used == 0 || stalled >= 3 {
            break;
        }
    }
    let isolated: Vec<bool> = op.offsets.windows(2).map(|w| w[0] == w[1]).collect();
    for (i, &iso) in isolated.iter().enumerate() {
        if iso {
            beliefs[i] = priors[i];
        }
    }
    let residual = norm2(&op.residual(&beliefs, priors));
    Ok(BeliefState {
        priors: priors.to_vec(),
        beliefs,
        converged: residual <= opts.tol,
        iterations,
        homophily: h,
        residual,
    })
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Classification {
    pub labels: Vec<Label>,
    /// Beliefs that were exactly zero; these are reported as fake.
    pub ties: usize,
}

/// Positive belief means real, negative fake, exact zero fake and a tie.
pub fn classify(beliefs: &[f64]) -> Classification {
    let mut ties = 0;
    let labels = beliefs
        .iter()
        .map(|&b| {
            if b > 0.0 {
                Label::Real
            } else {
                if b == 0.0 {
                    ties += 1;
                }
                Label::Fake
            }
        })
        .collect();
    Classification { labels, ties }
}

/// CSV with header `article_id,belief,predicted_label,was_labeled`.
pub fn write_beliefs_csv(
    ids: &[String],
    state: &BeliefState,
    predicted: &[Label],
    w: impl Write,
) -> Result<()> {
    if ids.len() != state.beliefs.len() || predicted.len() != ids.len() {
        return Err(Error::dimension(
            "ids, beliefs and predictions differ in length",
        ));
    }
    let mut out = csv::Writer::from_writer(w);
    out.write_record(["article_id", "belief", "predicted_label", "was_labeled"])
        .map_err(csv_err)?;
    for i in 0..ids.len() {
        out.write_record([
            ids[i].as_str(),
            &state.beliefs[i].to_string(),
            predicted[i].as_str(),
            if state.priors[i] != 0.0 {
                "true"
            } else {
                "false"
            },
        ])
        .map_err(csv_err)?;
    }
    out.flush()?;
    Ok(())
}

pub(crate) fn csv_err(e: csv::Error) -> Error {
    match e.into_kind() {
        csv::ErrorKind::Io(io) => Error::Io(io),
        other => Error::Format(format!("{other:?}")),
    }
}
