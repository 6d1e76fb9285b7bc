//! Continuous flow between firings: adaptive embedded Runge-Kutta 5(4)
//! (Dormand-Prince) with dense output, threshold-crossing detection to
//! root-finding accuracy, and the scalar hit-time helpers built on top.

use crate::error::{Error, Result};
use crate::model::{EnsembleModel, FlowKind, FreeFlow, State};

/// Tolerances and windows for the integrator and the event locator.
#[derive(Clone, Debug)]
pub struct IntegratorConfig {
    pub rel_tol: f64,
    pub abs_tol: f64,
    pub max_step: f64,
    /// Maximum admissible residual |x_j - 1 - zeta_j| at a reported crossing.
    pub event_tol: f64,
    /// Crossings within this window of the earliest one form one firing event.
    pub simultaneity_window: f64,
    /// Give up searching for a crossing beyond this horizon.
    pub horizon: f64,
}

impl Default for IntegratorConfig {
    fn default() -> Self {
        IntegratorConfig {
            rel_tol: 1e-10,
            abs_tol: 1e-12,
            max_step: 0.1,
            event_tol: 1e-10,
            simultaneity_window: 1e-8,
            horizon: 100.0,
        }
    }
}

impl IntegratorConfig {
    pub fn validate(&self) -> Result<()> {
        let fields = [
            ("rel_tol", self.rel_tol),
            ("abs_tol", self.abs_tol),
            ("max_step", self.max_step),
            ("event_tol", self.event_tol),
            ("simultaneity_window", self.simultaneity_window),
            ("horizon", self.horizon),
        ];
        for (name, v) in fields {
            if !(v > 0.0) || !v.is_finite() {
                return Err(Error::Config(format!("{name} must be positive and finite, got {v}")));
            }
        }
        Ok(())
    }
}

/// A right-hand side the integrator can drive.
pub trait OdeRhs {
    fn dim(&self) -> usize;
    fn eval(&self, x: &[f64], dx: &mut [f64]);
    /// Component values at which the rhs is non-smooth; steps are clipped
    /// there so every step sees a smooth field.
    fn step_boundaries(&self) -> &[f64] {
        &[]
    }
}

impl OdeRhs for EnsembleModel {
    fn dim(&self) -> usize {
        self.n
    }
    fn eval(&self, x: &[f64], dx: &mut [f64]) {
        self.flow_rhs_into(x, dx);
    }
    fn step_boundaries(&self) -> &[f64] {
        self.flow.step_boundaries()
    }
}

/// Scalar free equation u' = f(u).
pub struct ScalarFlow<'a>(pub &'a FreeFlow);

impl OdeRhs for ScalarFlow<'_> {
    fn dim(&self) -> usize {
        1
    }
    fn eval(&self, x: &[f64], dx: &mut [f64]) {
        dx[0] = self.0.eval(x[0]);
    }
    fn step_boundaries(&self) -> &[f64] {
        self.0.step_boundaries()
    }
}

// ---------------------------------------------------------------------------
// Dense output segments and trajectories
// ---------------------------------------------------------------------------

/// One accepted step with its quartic interpolant.
#[derive(Clone, Debug)]
pub struct DenseSegment {
    pub t0: f64,
    pub h: f64,
    // Interpolant coefficients in the Horner form
    // y(t0 + theta h) = r1 + theta (r2 + (1-theta)(r3 + theta (r4 + (1-theta) r5))).
    rcont: [Vec<f64>; 5],
}

impl DenseSegment {
    pub fn t1(&self) -> f64 {
        self.t0 + self.h
    }

    pub fn eval(&self, t: f64) -> Vec<f64> {
        let dim = self.rcont[0].len();
        let mut out = vec![0.0; dim];
        self.eval_into(t, &mut out);
        out
    }

    pub fn eval_into(&self, t: f64, out: &mut [f64]) {
        let theta = if self.h == 0.0 { 0.0 } else { (t - self.t0) / self.h };
        let omt = 1.0 - theta;
        let [r1, r2, r3, r4, r5] = &self.rcont;
        for i in 0..out.len() {
            out[i] = r1[i] + theta * (r2[i] + omt * (r3[i] + theta * (r4[i] + omt * r5[i])));
        }
    }
}

/// Piecewise-polynomial solution with dense evaluation between knots.
#[derive(Clone, Debug, Default)]
pub struct Trajectory {
    pub segments: Vec<DenseSegment>,
    start: Option<State>,
}

impl Trajectory {
    fn single_knot(state: State) -> Self {
        Trajectory { segments: Vec::new(), start: Some(state) }
    }

    pub fn t_start(&self) -> f64 {
        match (&self.start, self.segments.first()) {
            (Some(s), _) => s.t,
            (None, Some(seg)) => seg.t0,
            _ => f64::NAN,
        }
    }

    pub fn t_end(&self) -> f64 {
        match (self.segments.last(), &self.start) {
            (Some(seg), _) => seg.t1(),
            (None, Some(s)) => s.t,
            _ => f64::NAN,
        }
    }

    pub fn eval(&self, t: f64) -> Vec<f64> {
        if self.segments.is_empty() {
            return self.start.as_ref().map(|s| s.x.clone()).unwrap_or_default();
        }
        // Binary search for the owning segment; clamp to the span.
        let idx = self
            .segments
            .partition_point(|seg| seg.t1() < t)
            .min(self.segments.len() - 1);
        self.segments[idx].eval(t)
    }

    pub fn end_state(&self) -> State {
        State::new(self.t_end(), self.eval(self.t_end()))
    }
}

// ---------------------------------------------------------------------------
// Dormand-Prince 5(4)
// ---------------------------------------------------------------------------

const A: [[f64; 6]; 6] = [
    [1.0 / 5.0, 0.0, 0.0, 0.0, 0.0, 0.0],
    [3.0 / 40.0, 9.0 / 40.0, 0.0, 0.0, 0.0, 0.0],
    [44.0 / 45.0, -56.0 / 15.0, 32.0 / 9.0, 0.0, 0.0, 0.0],
    [19372.0 / 6561.0, -25360.0 / 2187.0, 64448.0 / 6561.0, -212.0 / 729.0, 0.0, 0.0],
    [9017.0 / 3168.0, -355.0 / 33.0, 46732.0 / 5247.0, 49.0 / 176.0, -5103.0 / 18656.0, 0.0],
    [35.0 / 384.0, 0.0, 500.0 / 1113.0, 125.0 / 192.0, -2187.0 / 6784.0, 11.0 / 84.0],
];

/// Fifth-order weights (row 7 of the tableau; the method is FSAL).
const B5: [f64; 7] =
    [35.0 / 384.0, 0.0, 500.0 / 1113.0, 125.0 / 192.0, -2187.0 / 6784.0, 11.0 / 84.0, 0.0];

/// Error weights b5 - b4.
const E: [f64; 7] = [
    71.0 / 57600.0,
    0.0,
    -71.0 / 16695.0,
    71.0 / 1920.0,
    -17253.0 / 339200.0,
    22.0 / 525.0,
    -1.0 / 40.0,
];

/// Dense-output weights.
const D: [f64; 7] = [
    -12715105075.0 / 11282082432.0,
    0.0,
    87487479700.0 / 32700410799.0,
    -10690763975.0 / 1880347072.0,
    701980252875.0 / 199316789632.0,
    -1453857185.0 / 822651844.0,
    69997945.0 / 29380423.0,
];

/// Nudge applied past a piecewise-flow kink so the next step starts on the
/// far branch.
const KINK_NUDGE: f64 = 1e-12;

struct StepOutcome {
    y1: Vec<f64>,
    k7: Vec<f64>,
    err: f64,
    segment: DenseSegment,
}

pub struct Dopri5<'a, R: OdeRhs + ?Sized> {
    rhs: &'a R,
    cfg: IntegratorConfig,
}

impl<'a, R: OdeRhs + ?Sized> Dopri5<'a, R> {
    pub fn new(rhs: &'a R, cfg: IntegratorConfig) -> Result<Self> {
        cfg.validate()?;
        Ok(Dopri5 { rhs, cfg })
    }

    pub fn config(&self) -> &IntegratorConfig {
        &self.cfg
    }

    fn attempt(&self, t: f64, y: &[f64], k1: &[f64], h: f64) -> StepOutcome {
        let dim = y.len();
        let mut k = vec![vec![0.0; dim]; 7];
        k[0].copy_from_slice(k1);
        let mut ytmp = vec![0.0; dim];
        for s in 1..6 {
            for i in 0..dim {
                let mut acc = 0.0;
                for (j, kj) in k.iter().enumerate().take(s) {
                    acc += A[s - 1][j] * kj[i];
                }
                ytmp[i] = y[i] + h * acc;
            }
            let (head, tail) = k.split_at_mut(s);
            let _ = head;
            self.rhs.eval(&ytmp, &mut tail[0]);
        }
        // Stage 7 is the fifth-order solution itself.
        let mut y1 = vec![0.0; dim];
        for i in 0..dim {
            let mut acc = 0.0;
            for (j, kj) in k.iter().enumerate().take(6) {
                acc += A[5][j] * kj[i];
            }
            y1[i] = y[i] + h * acc;
        }
        self.rhs.eval(&y1, &mut k[6]);

        let mut err_sq = 0.0;
        for i in 0..dim {
            let mut e = 0.0;
            for (j, kj) in k.iter().enumerate() {
                e += E[j] * kj[i];
            }
            e *= h;
            let sc = self.cfg.abs_tol + self.cfg.rel_tol * y[i].abs().max(y1[i].abs());
            err_sq += (e / sc) * (e / sc);
        }
        let err = (err_sq / dim as f64).sqrt();

        let mut r1 = vec![0.0; dim];
        let mut r2 = vec![0.0; dim];
        let mut r3 = vec![0.0; dim];
        let mut r4 = vec![0.0; dim];
        let mut r5 = vec![0.0; dim];
        for i in 0..dim {
            let ydiff = y1[i] - y[i];
            let bspl = h * k[0][i] - ydiff;
            r1[i] = y[i];
            r2[i] = ydiff;
            r3[i] = bspl;
            r4[i] = ydiff - h * k[6][i] - bspl;
            let mut acc = 0.0;
            for (j, kj) in k.iter().enumerate() {
                acc += D[j] * kj[i];
            }
            r5[i] = h * acc;
        }
        let _ = B5; // weights folded into A[5]; kept for reference
        let k7 = k.pop().unwrap();
        StepOutcome { y1, k7, err, segment: DenseSegment { t0: t, h, rcont: [r1, r2, r3, r4, r5] } }
    }

    fn initial_step(&self, y: &[f64], k1: &[f64]) -> f64 {
        let dn: f64 = k1.iter().map(|v| v * v).sum::<f64>().sqrt().max(1e-10);
        let yn: f64 = y.iter().map(|v| v * v).sum::<f64>().sqrt().max(1e-4);
        (0.01 * yn / dn).min(self.cfg.max_step)
    }

    /// Earliest kink crossing inside an accepted segment, if any.
    fn kink_crossing(&self, y0: &[f64], out: &StepOutcome) -> Option<(usize, f64, f64)> {
        let boundaries = self.rhs.step_boundaries();
        if boundaries.is_empty() {
            return None;
        }
        let mut best: Option<(usize, f64, f64)> = None;
        for i in 0..y0.len() {
            for &b in boundaries {
                if y0[i] < b - KINK_NUDGE / 2.0 && out.y1[i] > b {
                    // Positive flow: y_i increases through b exactly once.
                    let t_c = bisect_time(&out.segment, |x| x[i] - b);
                    if best.map_or(true, |(_, t, _)| t_c < t) {
                        best = Some((i, t_c, b));
                    }
                }
            }
        }
        best
    }

    /// Drive the solution forward, handing each accepted segment to `sink`.
    /// `sink` returns false to stop early (event located).
    fn drive<F>(&self, state: &State, t_end: f64, mut sink: F) -> Result<State>
    where
        F: FnMut(&[f64], &StepOutcome) -> bool,
    {
        let mut t = state.t;
        let mut y = state.x.clone();
        let mut k1 = vec![0.0; y.len()];
        self.rhs.eval(&y, &mut k1);
        let mut h = self.initial_step(&y, &k1).min(t_end - t);

        while t < t_end {
            h = h.min(t_end - t).min(self.cfg.max_step);
            if h < f64::EPSILON * t.abs().max(1.0) {
                return Err(Error::StepSizeUnderflow { t, h });
            }
            let mut out = self.attempt(t, &y, &k1, h);
            if out.err > 1.0 {
                let shrink = (0.9 * out.err.powf(-0.2)).max(0.2);
                h *= shrink;
                continue;
            }
            // Clip at piecewise-flow kinks so each step sees one smooth branch.
            if let Some((i, mut t_c, b)) = self.kink_crossing(&y, &out) {
                // Newton-polish the crossing time: the dense-output estimate
                // carries interpolation error, the re-stepped endpoint does not.
                let mut slope_buf = vec![0.0; y.len()];
                for _ in 0..6 {
                    if t_c - t > f64::EPSILON * t.abs().max(1.0) {
                        out = self.attempt(t, &y, &k1, t_c - t);
                    }
                    let r = out.y1[i] - b;
                    self.rhs.eval(&out.y1, &mut slope_buf);
                    if r.abs() < 1e-13 || slope_buf[i] <= 0.0 {
                        break;
                    }
                    t_c = (t_c - r / slope_buf[i]).max(t + f64::EPSILON);
                }
                out.y1[i] = b + KINK_NUDGE;
                let stop = !sink(&y, &out);
                t = out.segment.t1();
                y = out.y1;
                self.rhs.eval(&y, &mut k1); // state nudged: FSAL invalid
                if stop {
                    return Ok(State::new(t, y));
                }
                continue;
            }
            let grow = (0.9 * out.err.max(1e-30).powf(-0.2)).clamp(0.2, 5.0);
            let stop = !sink(&y, &out);
            t = out.segment.t1();
            y = out.y1;
            k1 = out.k7;
            h *= grow;
            if stop {
                return Ok(State::new(t, y));
            }
        }
        Ok(State::new(t, y))
    }

    /// Integrate to `t_end` with no events expected in between.
    pub fn integrate(&self, state: &State, t_end: f64) -> Result<Trajectory> {
        if t_end < state.t {
            return Err(Error::Config(format!(
                "t_end = {t_end} precedes state time {}",
                state.t
            )));
        }
        if t_end == state.t {
            return Ok(Trajectory::single_knot(state.clone()));
        }
        let mut traj = Trajectory { segments: Vec::new(), start: Some(state.clone()) };
        self.drive(state, t_end, |_, out| {
            traj.segments.push(out.segment.clone());
            true
        })?;
        Ok(traj)
    }

    /// Locate the first zero upcrossing of `event` along the flow from
    /// `state`, searching up to the configured horizon.
    pub fn first_upcrossing<G>(&self, state: &State, event: G) -> Result<(f64, State)>
    where
        G: Fn(&[f64]) -> f64,
    {
        let mut found: Option<(State, f64)> = None;
        let t_end = state.t + self.cfg.horizon;
        self.drive(state, t_end, |y0, out| {
            let g0 = event(y0);
            let g1 = event(&out.y1);
            if g0 < 0.0 && g1 >= 0.0 {
                let t_c = bisect_time(&out.segment, &event);
                found = Some((State::new(out.segment.t0, y0.to_vec()), t_c));
                return false;
            }
            true
        })?;
        match found {
            Some((step_start, t_guess)) => self.refine_crossing(&step_start, t_guess, &event),
            None => Err(Error::NoCrossing { horizon: t_end }),
        }
    }

    /// Newton-polish a crossing time found on the dense interpolant against
    /// freshly integrated (error-controlled) states, removing the dense
    /// output's interpolation error.
    fn refine_crossing<G>(&self, from: &State, t_guess: f64, event: &G) -> Result<(f64, State)>
    where
        G: Fn(&[f64]) -> f64,
    {
        let mut t = t_guess.max(from.t);
        let mut x = self.integrate(from, t)?.end_state().x;
        let mut dx = vec![0.0; x.len()];
        for _ in 0..8 {
            let r = event(&x);
            self.rhs.eval(&x, &mut dx);
            // dg/dt along the flow via a forward difference in the flow
            // direction; exact enough for Newton on a near-linear residual.
            let delta = 1e-7;
            let x2: Vec<f64> = x.iter().zip(&dx).map(|(a, b)| a + delta * b).collect();
            let slope = (event(&x2) - r) / delta;
            if !slope.is_finite() || slope.abs() < 1e-12 {
                break;
            }
            let dt = r / slope;
            t = (t - dt).max(from.t);
            x = self.integrate(from, t)?.end_state().x;
            if dt.abs() <= 1e-14 * t.abs().max(1.0) {
                break;
            }
        }
        Ok((t, State::new(t, x)))
    }
}

/// Bisect a dense segment for the zero of `g` along it. The segment is
/// assumed to bracket exactly one upcrossing.
fn bisect_time<G>(seg: &DenseSegment, g: G) -> f64
where
    G: Fn(&[f64]) -> f64,
{
    let mut lo = seg.t0;
    let mut hi = seg.t1();
    let mut x = vec![0.0; seg.rcont[0].len()];
    for _ in 0..200 {
        if hi - lo <= f64::EPSILON * hi.abs().max(1.0) * 4.0 {
            break;
        }
        let mid = 0.5 * (lo + hi);
        seg.eval_into(mid, &mut x);
        if g(&x) < 0.0 {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    hi
}

// ---------------------------------------------------------------------------
// Threshold hits
// ---------------------------------------------------------------------------

/// Result of locating the next firing surface crossing.
#[derive(Clone, Debug)]
pub struct ThresholdHit {
    pub t: f64,
    /// Oscillators whose crossings fall within the simultaneity window of
    /// the earliest one, ascending by index.
    pub hitters: Vec<usize>,
    /// Dense-output state at the hit time.
    pub state: State,
}

/// Earliest time at which some oscillator meets its firing surface
/// x_j = 1 + zeta_j(x).
pub fn next_threshold_hit(
    model: &EnsembleModel,
    state: &State,
    cfg: &IntegratorConfig,
) -> Result<ThresholdHit> {
    let stepper = Dopri5::new(model, cfg.clone())?;
    let event = |j: usize| move |x: &[f64]| x[j] - model.threshold_value(j, x);

    let mut step_start: Option<State> = None;
    let mut crossings: Vec<(usize, f64)> = Vec::new();
    let t_end = state.t + cfg.horizon;
    stepper.drive(state, t_end, |y0, out| {
        let mut any = false;
        for j in 0..model.n {
            let e = event(j);
            if e(y0) < 0.0 && e(&out.y1) >= 0.0 {
                let t_c = bisect_time(&out.segment, &e);
                crossings.push((j, t_c));
                any = true;
            }
        }
        if any {
            step_start = Some(State::new(out.segment.t0, y0.to_vec()));
            return false;
        }
        true
    })?;

    let from = step_start.ok_or(Error::NoCrossing { horizon: t_end })?;
    for (j, t_c) in crossings.iter_mut() {
        let e = event(*j);
        let (t, _) = stepper.refine_crossing(&from, *t_c, &e)?;
        *t_c = t;
    }
    let t_hit = crossings.iter().map(|&(_, t)| t).fold(f64::INFINITY, f64::min);
    let mut hitters: Vec<usize> = crossings
        .iter()
        .filter(|&&(_, t)| t - t_hit <= cfg.simultaneity_window)
        .map(|&(j, _)| j)
        .collect();
    hitters.sort_unstable();
    hitters.dedup();
    let x = stepper.integrate(&from, t_hit)?.end_state().x;
    Ok(ThresholdHit { t: t_hit, hitters, state: State::new(t_hit, x) })
}

// ---------------------------------------------------------------------------
// Scalar hit times
// ---------------------------------------------------------------------------

/// Time for the free scalar equation u' = f(u), u(0) = x0 to reach 1.
/// Closed form for the catalog flows, event machinery otherwise.
pub fn free_hit_time(flow: &FreeFlow, x0: f64) -> Result<f64> {
    if !(0.0..=1.0).contains(&x0) {
        return Err(Error::InvalidParameter(format!("x0 must lie in [0, 1], got {x0}")));
    }
    if x0 >= 1.0 {
        return Ok(0.0);
    }
    match flow.kind {
        FlowKind::Leaky { s, gamma } => {
            let kappa = s / gamma;
            Ok(((kappa - x0) / (kappa - 1.0)).ln() / gamma)
        }
        FlowKind::Quadratic { c } => {
            let rc = c.sqrt();
            Ok(((1.0 / rc).atan() - (x0 / rc).atan()) / rc)
        }
        FlowKind::PiecewiseLinear => {
            let mut t = 0.0;
            let mut x = x0;
            if x < 1.0 / 3.0 {
                // u' = 4 - 3u
                t += ((4.0 - 3.0 * x) / 3.0).ln() / 3.0;
                x = 1.0 / 3.0;
            }
            if x < 2.0 / 3.0 {
                // u' = 3
                t += (2.0 / 3.0 - x) / 3.0;
                x = 2.0 / 3.0;
            }
            // u' = 6 - 3u, from x to 1
            t += ((6.0 - 3.0 * x) / 3.0).ln() / 3.0;
            Ok(t)
        }
        FlowKind::Custom(_) => free_hit_time_numeric(flow, x0, &IntegratorConfig::default()),
    }
}

/// Hit time via the event machinery; the independent route for cross-checks.
pub fn free_hit_time_numeric(flow: &FreeFlow, x0: f64, cfg: &IntegratorConfig) -> Result<f64> {
    if x0 >= 1.0 {
        return Ok(0.0);
    }
    let rhs = ScalarFlow(flow);
    let stepper = Dopri5::new(&rhs, cfg.clone())?;
    let (t, _) = stepper.first_upcrossing(&State::new(0.0, vec![x0]), |x| x[0] - 1.0)?;
    Ok(t)
}

/// Natural period T: threshold time from a fresh reset.
pub fn natural_period(flow: &FreeFlow) -> Result<f64> {
    free_hit_time(flow, 0.0)
}

/// The shortened period from the fixed point v*.
pub fn tilde_period(flow: &FreeFlow, v_star: f64) -> Result<f64> {
    if !(0.0..=1.0).contains(&v_star) {
        return Err(Error::InvalidParameter(format!("v* must lie in [0, 1], got {v_star}")));
    }
    free_hit_time(flow, v_star)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{example4_pair, peskin_pair, quadratic_pair};

    fn cfg() -> IntegratorConfig {
        IntegratorConfig::default()
    }

    #[test]
    fn integrate_leaky_matches_closed_form() {
        let m = peskin_pair(2.0, 1.0, 0.2).unwrap();
        let stepper = Dopri5::new(&m, cfg()).unwrap();
        let traj = stepper.integrate(&State::new(0.0, vec![0.0, 0.0]), 0.5).unwrap();
        let end = traj.end_state();
        let exact = 2.0 * (1.0 - (-0.5f64).exp());
        assert!((end.x[0] - exact).abs() < 1e-11, "{} vs {exact}", end.x[0]);
        // Dense evaluation across the span.
        for k in 0..=100 {
            let t = 0.5 * k as f64 / 100.0;
            let x = traj.eval(t);
            let u = 2.0 * (1.0 - (-t).exp());
            assert!((x[0] - u).abs() < 1e-10, "t = {t}");
        }
    }

    #[test]
    fn integrate_quadratic_matches_closed_form() {
        let m = quadratic_pair(1.0, 0.1).unwrap();
        let stepper = Dopri5::new(&m, cfg()).unwrap();
        let traj = stepper.integrate(&State::new(0.0, vec![0.0, 0.0]), 0.5).unwrap();
        let end = traj.end_state();
        assert!((end.x[0] - 0.5f64.tan()).abs() < 1e-11);
    }

    #[test]
    fn empty_integration_is_single_knot() {
        let m = peskin_pair(2.0, 1.0, 0.2).unwrap();
        let stepper = Dopri5::new(&m, cfg()).unwrap();
        let s = State::new(0.3, vec![0.1, 0.2]);
        let traj = stepper.integrate(&s, 0.3).unwrap();
        assert_eq!(traj.end_state(), s);
        assert_eq!(traj.eval(0.3), vec![0.1, 0.2]);
    }

    #[test]
    fn next_hit_leaky_single() {
        let m = peskin_pair(2.0, 1.0, 0.2).unwrap();
        let hit = next_threshold_hit(&m, &State::new(0.0, vec![0.0, 0.0]), &cfg()).unwrap();
        assert!((hit.t - std::f64::consts::LN_2).abs() < 1e-9, "t = {}", hit.t);
        assert_eq!(hit.hitters, vec![0, 1]); // symmetry: simultaneous
        let residual = hit.state.x[0] - 1.0;
        assert!(residual.abs() <= 1e-9, "residual {residual}");
    }

    #[test]
    fn next_hit_quadratic() {
        let m = quadratic_pair(1.0, 0.1).unwrap();
        let hit = next_threshold_hit(&m, &State::new(0.0, vec![0.0, 0.5]), &cfg()).unwrap();
        // x2 starts ahead: it hits first at arctan(1) - arctan(0.5).
        let expect = std::f64::consts::FRAC_PI_4 - 0.5f64.atan();
        assert!((hit.t - expect).abs() < 1e-9);
        assert_eq!(hit.hitters, vec![1]);
    }

    #[test]
    fn free_hit_times() {
        let leaky = FreeFlow::leaky(2.0, 1.0).unwrap();
        assert!((free_hit_time(&leaky, 0.0).unwrap() - std::f64::consts::LN_2).abs() < 1e-14);
        let quad = FreeFlow::quadratic(1.0).unwrap();
        assert!((free_hit_time(&quad, 0.0).unwrap() - std::f64::consts::FRAC_PI_4).abs() < 1e-14);
        assert_eq!(free_hit_time(&quad, 1.0).unwrap(), 0.0);
        let pw = FreeFlow::piecewise_linear();
        let t = free_hit_time(&pw, 0.0).unwrap();
        assert!((t - 0.30289915941229834).abs() < 1e-14, "t = {t}");
    }

    #[test]
    fn numeric_hit_time_agrees_with_closed_form() {
        for flow in [
            FreeFlow::leaky(2.0, 1.0).unwrap(),
            FreeFlow::quadratic(1.0).unwrap(),
            FreeFlow::piecewise_linear(),
        ] {
            for &x0 in &[0.0, 0.2, 0.33, 0.5, 0.9] {
                let closed = free_hit_time(&flow, x0).unwrap();
                let numeric = free_hit_time_numeric(&flow, x0, &cfg()).unwrap();
                assert!((closed - numeric).abs() < 1e-9, "x0 = {x0}: {closed} vs {numeric}");
            }
        }
    }

    #[test]
    fn piecewise_flow_hits_despite_kinks() {
        let m = example4_pair(0.1).unwrap();
        let hit = next_threshold_hit(&m, &State::new(0.0, vec![0.0, 0.5]), &cfg()).unwrap();
        // x2 from 0.5 crosses 2/3 then runs to 1.
        let expect = free_hit_time(&m.flow, 0.5).unwrap();
        assert!((hit.t - expect).abs() < 1e-9, "{} vs {expect}", hit.t);
        assert_eq!(hit.hitters, vec![1]);
    }

    #[test]
    fn periods() {
        let leaky = FreeFlow::leaky(2.0, 1.0).unwrap();
        let t = natural_period(&leaky).unwrap();
        let v_star = 0.48225531212421746;
        let tt = tilde_period(&leaky, v_star).unwrap();
        assert!((t - std::f64::consts::LN_2).abs() < 1e-14);
        // Time from v* to threshold: ln((kappa - v*)/(kappa - 1)).
        assert!((tt - (2.0 - v_star).ln()).abs() < 1e-14);
        assert!(tt < t);
        // Continuity limits.
        assert!((tilde_period(&leaky, 1e-12).unwrap() - t).abs() < 1e-10);
        assert_eq!(tilde_period(&leaky, 1.0).unwrap(), 0.0);
    }

    #[test]
    fn refinement_convergence() {
        let m = peskin_pair(2.0, 1.0, 0.2).unwrap();
        let coarse = Dopri5::new(&m, cfg()).unwrap();
        let mut fine_cfg = cfg();
        fine_cfg.max_step /= 2.0;
        let fine = Dopri5::new(&m, fine_cfg).unwrap();
        let s = State::new(0.0, vec![0.1, 0.4]);
        let a = coarse.integrate(&s, 0.6).unwrap().end_state();
        let b = fine.integrate(&s, 0.6).unwrap().end_state();
        for i in 0..2 {
            assert!((a.x[i] - b.x[i]).abs() <= 4.0 * 1e-10);
        }
    }

    #[test]
    fn no_crossing_reported() {
        // A flow that stalls below threshold violates positivity at the top;
        // built by hand since the catalog rejects it.
        let flow = FreeFlow::custom(|s: f64| (0.5 - s).max(1e-3), 1e-3, 0.5, 1.0);
        let cfg = IntegratorConfig { horizon: 5.0, ..IntegratorConfig::default() };
        assert!(matches!(
            free_hit_time_numeric(&flow, 0.0, &cfg),
            Err(Error::NoCrossing { .. })
        ));
    }

    #[test]
    fn config_rejects_nonpositive() {
        let bad = IntegratorConfig { rel_tol: 0.0, ..IntegratorConfig::default() };
        assert!(bad.validate().is_err());
    }
}
