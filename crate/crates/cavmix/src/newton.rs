//! Damped Newton iteration with an admissibility-preserving line search.

use std::fmt::Write as _;

use cavmix_core::element::GradientBounds;
use cavmix_core::State;

use crate::assembly::Problem;
use crate::error::{Error, Result};
use crate::linear::LinearSolver;

#[derive(Clone, Debug, PartialEq, serde::Serialize, serde::Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct NewtonConfig {
    pub tol_rel: f64,
    pub tol_abs: f64,
    pub max_iter: usize,
    pub alpha_min: f64,
    /// Singular values must stay in `[σ, 1/σ]`.
    pub h2_sigma: f64,
    /// Determinants must stay in `[c, C]`.
    pub h2_c: f64,
    #[serde(rename = "h2_C")]
    pub h2_cap: f64,
    pub backtrack: f64,
}

impl Default for NewtonConfig {
    fn default() -> Self {
        NewtonConfig {
            tol_rel: 1e-13,
            tol_abs: 1e-10,
            max_iter: 40,
            alpha_min: 1.0 / 1024.0,
            h2_sigma: 1e-3,
            h2_c: 1e-3,
            h2_cap: 1e3,
            backtrack: 0.5,
        }
    }
}

impl NewtonConfig {
    pub fn validate(&self) -> Result<()> {
        let ok = self.tol_rel > 0.0
            && self.tol_abs > 0.0
            && self.max_iter > 0
            && self.alpha_min > 0.0
            && self.alpha_min <= 1.0
            && self.h2_sigma > 0.0
            && self.h2_sigma < 1.0
            && self.h2_c > 0.0
            && self.h2_c < 1.0
            && self.h2_cap > 1.0
            && self.backtrack > 0.0
            && self.backtrack < 1.0;
        if ok {
            Ok(())
        } else {
            Err(Error::Config(format!(
                "invalid Newton configuration {self:?}"
            )))
        }
    }

    pub fn admissible(&self, b: &GradientBounds) -> bool {
        b.min_det > 0.0
            && b.min_det >= self.h2_c
            && b.max_det <= self.h2_cap
            && b.min_sv >= self.h2_sigma
            && b.max_sv <= 1.0 / self.h2_sigma
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct TraceRow {
    pub iteration: usize,
    pub residual: f64,
    /// Step accepted to reach this iterate (0 for the initial state).
    pub alpha: f64,
    pub min_det: f64,
    pub energy: f64,
}

#[derive(Clone, Debug, Default, PartialEq)]
pub struct SolveTrace {
    pub rows: Vec<TraceRow>,
}

impl SolveTrace {
    pub fn to_csv(&self) -> String {
        let mut s = String::from("iteration,residual,alpha,min_det,energy\n");
        for r in &self.rows {
            let _ = writeln!(
                s,
                "{},{:.16e},{:.16e},{:.16e},{:.16e}",
                r.iteration, r.residual, r.alpha, r.min_det, r.energy
            );
        }
        s
    }

    pub fn iterations(&self) -> usize {
        self.rows.last().map_or(0, |r| r.iteration)
    }

    pub fn final_residual(&self) -> f64 {
        self.rows.last().map_or(f64::NAN, |r| r.residual)
    }

    /// `r_{k+1} / r_k²` over consecutive accepted iterates.
    pub fn quadratic_ratios(&self) -> Vec<f64> {
        self.rows
            .windows(2)
            .map(|w| w[1].residual / (w[0].residual * w[0].residual))
            .collect()
    }

    pub fn extend(&mut self, other: &SolveTrace) {
        self.rows.extend_from_slice(&other.rows);
    }
}

/// `u + α w`, `p − α π`.
pub fn step(s: &State, w: &[f64], pi: &[f64], alpha: f64) -> State {
    State {
        u: s.u.iter().zip(w).map(|(a, b)| a + alpha * b).collect(),
        p: s.p.iter().zip(pi).map(|(a, b)| a - alpha * b).collect(),
        bc: s.bc,
    }
}

/// Accepted step and the resulting iterate with its residual norm.
#[derive(Clone, Debug)]
pub struct LineSearchResult {
    pub alpha: f64,
    pub state: State,
    pub residual: f64,
}

/// First `α ∈ {1, β, β², …} ≥ alpha_min` whose trial state is admissible and
/// strictly decreases the residual.
pub fn line_search(
    problem: &Problem,
    s: &State,
    w: &[f64],
    pi: &[f64],
    r0: f64,
    config: &NewtonConfig,
) -> Result<LineSearchResult> {
    if w.iter().chain(pi).all(|&v| v == 0.0) {
        return Ok(LineSearchResult {
            alpha: 1.0,
            state: s.clone(),
            residual: r0,
        });
    }
    let mut alpha = 1.0;
    let mut last = String::new();
    while alpha >= config.alpha_min {
        let trial = step(s, w, pi, alpha);
        let b = problem.bounds(&trial);
        if !config.admissible(&b) {
            last = format!(
                "inadmissible trial (det in [{:.3e}, {:.3e}], sv in [{:.3e}, {:.3e}])",
                b.min_det, b.max_det, b.min_sv, b.max_sv
            );
        } else {
            match problem.residual(&trial) {
                Ok(r) => {
                    let rn = r.norm();
                    if rn < r0 {
                        return Ok(LineSearchResult {
                            alpha,
                            state: trial,
                            residual: rn,
                        });
                    }
                    last = format!("residual {rn:.3e} not below {r0:.3e}");
                }
                Err(e) => last = e.to_string(),
            }
        }
        alpha *= config.backtrack;
    }
    Err(Error::NonConvergence {
        reason: format!("line search failed below alpha_min: {last}"),
        trace: Box::default(),
    })
}

/// Residuals up to this multiple of the target may stop at the roundoff floor.
const FLOOR_GATE: f64 = 1e3;

/// Converged: below the tolerance, or (when close) below the estimated
/// roundoff floor of the residual evaluation itself.
fn done(problem: &Problem, s: &State, r: f64, target: f64) -> Result<bool> {
    if r <= target {
        return Ok(true);
    }
    Ok(r <= FLOOR_GATE * target && r <= problem.residual_floor(s)?)
}

/// Damped Newton from `state0` (constrained entries already hold the boundary data).
pub fn newton_solve(
    problem: &Problem,
    state0: State,
    config: &NewtonConfig,
    solver: &mut LinearSolver,
) -> Result<(State, SolveTrace)> {
    config.validate()?;
    let mut trace = SolveTrace::default();
    let b = problem.bounds(&state0);
    if !(b.min_det > 0.0) {
        return Err(Error::NonConvergence {
            reason: format!(
                "initial state not orientation preserving (min det {:.3e})",
                b.min_det
            ),
            trace: Box::new(trace),
        });
    }
    let mut s = state0;
    let mut r = problem.residual(&s)?.norm();
    let target = config.tol_abs + config.tol_rel * r;
    trace.rows.push(TraceRow {
        iteration: 0,
        residual: r,
        alpha: 0.0,
        min_det: b.min_det,
        energy: problem.energy(&s)?,
    });
    for it in 1..=config.max_iter {
        if done(problem, &s, r, target)? {
            return Ok((s, trace));
        }
        let fail = |e: Error, trace: &SolveTrace| match e {
            Error::NonConvergence { reason, .. } => Error::NonConvergence {
                reason: format!("iteration {it}: {reason}"),
                trace: Box::new(trace.clone()),
            },
            Error::Linear(msg) => Error::NonConvergence {
                reason: format!("iteration {it}: {msg}"),
                trace: Box::new(trace.clone()),
            },
            other => other,
        };
        let sys = problem.tangent(&s, None).map_err(|e| fail(e, &trace))?;
        let (w, pi) = solver.solve(&sys).map_err(|e| fail(e, &trace))?;
        let ls = line_search(problem, &s, &w, &pi, r, config);
        let ls = ls.map_err(|e| fail(e, &trace))?;
        s = ls.state;
        r = ls.residual;
        trace.rows.push(TraceRow {
            iteration: it,
            residual: r,
            alpha: ls.alpha,
            min_det: problem.bounds(&s).min_det,
            energy: problem.energy(&s)?,
        });
    }
    if done(problem, &s, r, target)? {
        return Ok((s, trace));
    }
    Err(Error::NonConvergence {
        reason: format!("max_iter {} reached with residual {r:.3e}", config.max_iter),
        trace: Box::new(trace),
    })
}
