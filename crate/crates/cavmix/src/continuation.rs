//! Initial guesses, load-path continuation and λ sweeps.

use cavmix_core::dof::{BoundaryCondition, State};
use cavmix_core::{CoreError, DefectSpec, Point, Tensor2};

use crate::assembly::Problem;
use crate::error::{Error, Result};
use crate::linear::LinearSolver;
use crate::newton::{newton_solve, NewtonConfig, SolveTrace};

/// Initial pressure, `d'(1)` for the standard volumetric term.
pub const INITIAL_PRESSURE: f64 = -1.0;

#[derive(Clone, Copy, Debug, PartialEq, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum GuessMode {
    Symmetric,
    /// Enlarges the ansatz cavity of one defect by the relative `magnitude`.
    Perturb {
        defect: usize,
        magnitude: f64,
    },
}

/// Incompressible radial inflation `r(R) = √(R² + A_k)` about each defect,
/// superposed and corrected by `|x|² (u₀ − ansatz)(x/|x|)` to match the
/// boundary map. The added areas `A_k` share `det M − 1` equally.
pub fn ansatz_map(
    defects: &[DefectSpec],
    bc: &BoundaryCondition,
    mode: GuessMode,
) -> Result<impl Fn(Point) -> Point> {
    let total = (bc.matrix().det() - 1.0).max(0.0);
    let mut areas = vec![total / defects.len().max(1) as f64; defects.len()];
    if let GuessMode::Perturb { defect, magnitude } = mode {
        let a = areas
            .get_mut(defect)
            .ok_or_else(|| Error::Config(format!("perturbed defect {defect} does not exist")))?;
        *a *= 1.0 + magnitude;
    }
    let centers: Vec<Point> = defects.iter().map(|d| d.center).collect();
    let bc = *bc;
    let ansatz = move |x: Point| {
        let mut y = x;
        for (c, &a) in centers.iter().zip(&areas) {
            let dx = [x[0] - c[0], x[1] - c[1]];
            let r = dx[0].hypot(dx[1]);
            if r > 0.0 {
                let s = ((r * r + a).sqrt() - r) / r;
                y[0] += s * dx[0];
                y[1] += s * dx[1];
            }
        }
        y
    };
    Ok(move |x: Point| {
        let r2 = x[0] * x[0] + x[1] * x[1];
        let y = ansatz(x);
        if r2 == 0.0 {
            return y;
        }
        let r = r2.sqrt();
        let xb = [x[0] / r, x[1] / r];
        let target = bc.value(xb);
        let yb = ansatz(xb);
        [
            y[0] + r2 * (target[0] - yb[0]),
            y[1] + r2 * (target[1] - yb[1]),
        ]
    })
}

pub fn initial_guess(problem: &Problem, bc: &BoundaryCondition, mode: GuessMode) -> Result<State> {
    let map = ansatz_map(&problem.mesh.defects, bc, mode)?;
    let s = State::from_map(&problem.mesh, &problem.dofs, *bc, map, INITIAL_PRESSURE);
    let b = problem.bounds(&s);
    if !(b.min_det > 0.0) {
        return Err(Error::Core(CoreError::Domain(format!(
            "initial guess is not orientation preserving (min det {:.3e}); use a smaller load",
            b.min_det
        ))));
    }
    Ok(s)
}

#[derive(Clone, Debug, PartialEq, serde::Serialize, serde::Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ContinuationConfig {
    pub dt_init: f64,
    pub dt_min: f64,
    pub dt_max: f64,
    pub grow: f64,
}

impl Default for ContinuationConfig {
    fn default() -> Self {
        ContinuationConfig {
            dt_init: 0.1,
            dt_min: 1e-3,
            dt_max: 0.25,
            grow: 1.5,
        }
    }
}

/// Load path parameterized by `t ∈ [0, 1]`: boundary data and cavity bias.
pub trait LoadPath {
    fn at(&self, t: f64) -> (BoundaryCondition, Vec<f64>);
}

impl<F: Fn(f64) -> (BoundaryCondition, Vec<f64>)> LoadPath for F {
    fn at(&self, t: f64) -> (BoundaryCondition, Vec<f64>) {
        self(t)
    }
}

/// Predictor for load `t1` from the converged state `s` at `t0`: the change of
/// the radial ansatz between the two loads is added to `s`, and when a previous
/// point is known the deviation from the ansatz is extrapolated by a secant.
/// Linearized predictors are useless here, since the cavity response is
/// singular in the load.
fn predict(
    problem: &mut Problem,
    s: &State,
    prev: Option<&(f64, State)>,
    path: &dyn LoadPath,
    t0: f64,
    t1: f64,
    newton: &NewtonConfig,
) -> Result<State> {
    let (bc0, _) = path.at(t0);
    let (bc1, bias) = path.at(t1);
    problem.cavity_pressure.copy_from_slice(&bias);
    let defects = &problem.mesh.defects;
    let ansatz = |bc: &BoundaryCondition| -> Result<Vec<f64>> {
        Ok(problem.dofs.interpolate(
            &problem.mesh,
            ansatz_map(defects, bc, GuessMode::Symmetric)?,
        ))
    };
    let (a0, a1) = (ansatz(&bc0)?, ansatz(&bc1)?);
    let finish = |mut trial: State| {
        trial.bc = bc1;
        problem.dofs.apply_bc(&problem.mesh, &bc1, &mut trial.u);
        newton.admissible(&problem.bounds(&trial)).then_some(trial)
    };
    if let Some((tp, sp)) = prev {
        let ap = ansatz(&path.at(*tp).0)?;
        let ratio = (t1 - t0) / (t0 - tp);
        let u = (0..s.u.len())
            .map(|i| {
                let (d0, dp) = (s.u[i] - a0[i], sp.u[i] - ap[i]);
                a1[i] + d0 + ratio * (d0 - dp)
            })
            .collect();
        let p =
            s.p.iter()
                .zip(&sp.p)
                .map(|(a, b)| a + ratio * (a - b))
                .collect();
        if let Some(trial) = finish(State { u, p, bc: bc1 }) {
            return Ok(trial);
        }
    }
    let u = (0..s.u.len()).map(|i| s.u[i] + a1[i] - a0[i]).collect();
    finish(State {
        u,
        p: s.p.clone(),
        bc: bc1,
    })
    .ok_or_else(|| Error::NonConvergence {
        reason: format!("predictor to t = {t1} is inadmissible"),
        trace: Box::default(),
    })
}

/// Follows `path` from the converged state `s` at `t = 0` to `t = 1` with
/// adaptive steps; accumulates every Newton trace.
pub fn follow_path(
    problem: &mut Problem,
    s: State,
    path: &dyn LoadPath,
    cfg: &ContinuationConfig,
    newton: &NewtonConfig,
    solver: &mut LinearSolver,
) -> Result<(State, SolveTrace)> {
    follow_path_from(problem, s, None, path, cfg, newton, solver)
}

/// [`follow_path`] with a known converged point at `t < 0` for the first
/// secant predictor.
pub fn follow_path_from(
    problem: &mut Problem,
    mut s: State,
    mut prev: Option<(f64, State)>,
    path: &dyn LoadPath,
    cfg: &ContinuationConfig,
    newton: &NewtonConfig,
    solver: &mut LinearSolver,
) -> Result<(State, SolveTrace)> {
    let mut t = 0.0;
    let mut dt = cfg.dt_init.min(1.0);
    let mut trace = SolveTrace::default();
    while t < 1.0 {
        let tn = (t + dt).min(1.0);
        let attempt = predict(problem, &s, prev.as_ref(), path, t, tn, newton)
            .and_then(|pred| newton_solve(problem, pred, newton, solver));
        match attempt {
            Ok((ns, tr)) => {
                trace.extend(&tr);
                prev = Some((t, std::mem::replace(&mut s, ns)));
                t = tn;
                let fast = tr.iterations() <= 6;
                dt = if fast {
                    (dt * cfg.grow).min(cfg.dt_max)
                } else {
                    dt
                };
            }
            Err(Error::NonConvergence { reason, .. }) | Err(Error::Linear(reason)) => {
                dt *= 0.5;
                if dt < cfg.dt_min {
                    problem.cavity_pressure.copy_from_slice(&path.at(t).1);
                    return Err(Error::NonConvergence {
                        reason: format!("continuation stalled at t = {t:.6}: {reason}"),
                        trace: Box::new(trace),
                    });
                }
            }
            Err(Error::Core(CoreError::Orientation { element, det })) => {
                dt *= 0.5;
                if dt < cfg.dt_min {
                    problem.cavity_pressure.copy_from_slice(&path.at(t).1);
                    return Err(Error::NonConvergence {
                        reason: format!(
                            "continuation stalled at t = {t:.6}: orientation lost in element {element} (det {det:e})"
                        ),
                        trace: Box::new(trace),
                    });
                }
            }
            Err(e) => return Err(e),
        }
    }
    Ok((s, trace))
}

/// Solves at the converged identity state, then ramps affine boundary data from
/// the identity to `target`.
pub fn solve_affine(
    problem: &mut Problem,
    target: BoundaryCondition,
    cfg: &ContinuationConfig,
    newton: &NewtonConfig,
    solver: &mut LinearSolver,
) -> Result<(State, SolveTrace)> {
    let zero = vec![0.0; problem.mesh.defects.len()];
    problem.cavity_pressure.copy_from_slice(&zero);
    let s0 = State::identity(&problem.mesh, &problem.dofs, INITIAL_PRESSURE);
    let (s, mut trace) = newton_solve(problem, s0, newton, solver)?;
    let start = BoundaryCondition::identity();
    let path = move |t: f64| (start.lerp(&target, t), zero.clone());
    let (s, tr) = follow_path(problem, s, &path, cfg, newton, solver)?;
    trace.extend(&tr);
    Ok((s, trace))
}

/// Branch selector of a λ sweep.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Branch {
    Symmetric,
    /// Larger cavity at defect 0.
    Left,
    /// Larger cavity at defect 1.
    Right,
}

impl Branch {
    pub fn name(self) -> &'static str {
        match self {
            Branch::Symmetric => "symmetric",
            Branch::Left => "left",
            Branch::Right => "right",
        }
    }

    fn favored(self) -> Option<usize> {
        match self {
            Branch::Symmetric => None,
            Branch::Left => Some(0),
            Branch::Right => Some(1),
        }
    }
}

#[derive(Clone, Debug, PartialEq, serde::Serialize, serde::Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SweepConfig {
    pub continuation: ContinuationConfig,
    /// Smallest λ step accepted when bisecting.
    pub dlambda_min: f64,
    /// Cavity pressure used to push a dominant branch off the symmetric one.
    pub bias_pressure: f64,
}

impl Default for SweepConfig {
    fn default() -> Self {
        SweepConfig {
            continuation: ContinuationConfig::default(),
            dlambda_min: 1e-3,
            bias_pressure: 0.2,
        }
    }
}

#[derive(Clone, Debug)]
pub struct SweepPoint {
    pub lambda: f64,
    pub state: State,
    pub trace: SolveTrace,
}

#[derive(Clone, Debug, Default)]
pub struct SweepResult {
    pub points: Vec<SweepPoint>,
    /// `(λ, reason)` of the first point that could not be reached.
    pub failure: Option<(f64, String)>,
}

/// Cavity area ratio favored/other beyond which a dominant branch has left the
/// symmetric one and is followed without bias.
const SEPARATED_RATIO: f64 = 1.05;

fn separated(problem: &Problem, s: &State, favored: usize) -> bool {
    let m = &problem.mesh;
    if m.defects.len() != 2 {
        return false;
    }
    let v = |k| cavmix_core::element::cavity_volume(m, &s.u, k);
    v(favored) > SEPARATED_RATIO * v(1 - favored)
}

/// Moves the converged state `s` at `λ₀` to `λ₁` under a uniform stretch.
/// A grid step is small, so without bias it is first tried in one go (halved
/// on failure). On a dominant branch that has not yet separated, the favored
/// cavity is pushed by a bias pressure along a tent `0 → p → 0` peaking at
/// mid-step, with the configured step control.
/// `prev` is the converged point before `λ₀`, used for the secant predictor
/// of the unbiased path.
#[allow(clippy::too_many_arguments)]
fn advance(
    problem: &mut Problem,
    s: State,
    prev: Option<&(f64, State)>,
    l0: f64,
    l1: f64,
    branch: Branch,
    cfg: &SweepConfig,
    newton: &NewtonConfig,
    solver: &mut LinearSolver,
) -> Result<(State, SolveTrace)> {
    let nd = problem.mesh.defects.len();
    let (a, b) = (
        BoundaryCondition::stretch(l0),
        BoundaryCondition::stretch(l1),
    );
    let history = prev.map(|(lp, sp)| ((lp - l0) / (l1 - l0), sp.clone()));
    let zero = vec![0.0; nd];
    let favored = branch
        .favored()
        .filter(|&k| k < nd && cfg.bias_pressure != 0.0);
    let plain_cfg = ContinuationConfig {
        dt_init: 1.0,
        dt_max: 1.0,
        ..cfg.continuation.clone()
    };
    if favored.is_none_or(|k| separated(problem, &s, k)) {
        problem.cavity_pressure.copy_from_slice(&zero);
        let z = zero.clone();
        let path = move |t: f64| (a.lerp(&b, t), z.clone());
        let r = follow_path_from(
            problem,
            s.clone(),
            history,
            &path,
            &plain_cfg,
            newton,
            solver,
        );
        match (r, favored) {
            (Ok(r), _) => return Ok(r),
            // fall back to the biased path
            (Err(Error::NonConvergence { .. } | Error::Linear(_)), Some(_)) => {}
            (Err(e), _) => return Err(e),
        }
    }
    let k = favored.expect("biased path only on dominant branches");
    let mut bias = zero;
    bias[k] = cfg.bias_pressure;
    let load = move |t: f64| {
        let w = (1.0 - (2.0 * t - 1.0).abs()).max(0.0);
        (
            a.lerp(&b, t.min(1.0)),
            bias.iter().map(|p| p * w).collect::<Vec<_>>(),
        )
    };
    // no cross-step secant here: extrapolating through the bias tent from an
    // unbiased point stalls Newton near the critical load
    follow_path(problem, s, &load, &cfg.continuation, newton, solver)
}

/// Sequential λ sweep on one branch, warm-starting from the previous point and
/// bisecting failed steps down to `dlambda_min`.
pub fn continuation_sweep(
    problem: &mut Problem,
    lambdas: &[f64],
    branch: Branch,
    cfg: &SweepConfig,
    newton: &NewtonConfig,
    solver: &mut LinearSolver,
) -> Result<SweepResult> {
    if lambdas.windows(2).any(|w| w[1] <= w[0]) && lambdas.windows(2).any(|w| w[1] >= w[0]) {
        return Err(Error::Config("λ values must be monotone".into()));
    }
    let mut out = SweepResult::default();
    let Some(&first) = lambdas.first() else {
        return Ok(out);
    };
    problem.cavity_pressure.iter_mut().for_each(|p| *p = 0.0);
    let mode = match branch.favored() {
        Some(defect) => GuessMode::Perturb {
            defect,
            magnitude: 0.5,
        },
        None => GuessMode::Symmetric,
    };
    // direct solve from the ansatz, else ramp up from the unloaded state
    let direct = initial_guess(problem, &BoundaryCondition::stretch(first), mode)
        .and_then(|g| newton_solve(problem, g, newton, solver));
    let (mut s, mut trace, mut lam) = match direct {
        Ok((s, tr)) => (s, tr, first),
        Err(_) => {
            let s0 = State::identity(&problem.mesh, &problem.dofs, INITIAL_PRESSURE);
            let (s, tr) = newton_solve(problem, s0, newton, solver)?;
            (s, tr, 1.0)
        }
    };
    // last converged point before the current one, for secant predictors
    let mut history: Option<(f64, State)> = None;
    let mut pending: Vec<f64> = Vec::new();
    for &target in lambdas {
        pending.push(target);
        while let Some(&goal) = pending.last() {
            if goal == lam && !out.points.is_empty() {
                pending.pop();
                continue;
            }
            match advance(
                problem,
                s.clone(),
                history.as_ref(),
                lam,
                goal,
                branch,
                cfg,
                newton,
                solver,
            ) {
                Ok((ns, tr)) => {
                    trace.extend(&tr);
                    history = Some((lam, std::mem::replace(&mut s, ns)));
                    lam = goal;
                    pending.pop();
                    if pending.is_empty() {
                        out.points.push(SweepPoint {
                            lambda: goal,
                            state: s.clone(),
                            trace: std::mem::take(&mut trace),
                        });
                    }
                }
                Err(e @ (Error::NonConvergence { .. } | Error::Linear(_))) => {
                    let mid = 0.5 * (lam + goal);
                    if (goal - lam).abs() * 0.5 < cfg.dlambda_min {
                        out.failure = Some((target, e.to_string()));
                        return Ok(out);
                    }
                    pending.push(mid);
                }
                Err(e) => return Err(e),
            }
        }
    }
    Ok(out)
}

/// `u₀ = M(t) x` with `M(t) = I + t (M − I)`.
pub fn affine_path(target: Tensor2) -> impl Fn(f64) -> BoundaryCondition {
    move |t| BoundaryCondition::identity().lerp(&BoundaryCondition::affine(target), t)
}
