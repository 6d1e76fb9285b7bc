//! The one-dimensional firing map L for a symmetric oscillator pair.
//!
//! After a firing at which one oscillator resets to 0 and its companion
//! jumps to v + epsilon, the companion runs to threshold; L(v) is the value
//! the reset oscillator has reached at that moment. The map is extended
//! continuously to [0, 1]: L(0) = eta (the right-hand limit) and L = 0 on
//! the absorption band [1 - epsilon, 1].
//!
//! The module builds L in closed form for the catalog models and numerically
//! for anything the integrator can drive, and carries the downstream
//! analysis: conditions (A1)-(A3), the fixed point v*, the period-2 pair
//! (v**, v_hat), the a-sequence and synchronization regions S_k, the timing
//! windows, the perturbation bound Phi, and the monotone (Kamke) reduction.

use std::sync::Arc;

use crate::error::{Error, Result};
use crate::flow::{Dopri5, IntegratorConfig, OdeRhs};
use crate::model::{CouplingSpec, EnsembleModel, FreeFlow, JumpRule, State, ThresholdSpec};

/// Grid size for the (A1) strict-decrease scan.
const A1_GRID: usize = 10_000;
/// Offset from 1 - epsilon used for the (A3) terminal-value check.
const A3_OFFSET: f64 = 1e-9;

#[derive(Clone, Debug)]
pub enum Provenance {
    ClosedLeaky { kappa: f64 },
    ClosedQuadratic { c: f64 },
    ClosedPiecewise,
    ClosedCrossCoupled { s: f64, gamma: f64, beta: f64 },
    Numeric,
}

type CoreFn = Arc<dyn Fn(f64) -> f64 + Send + Sync>;

#[derive(Clone)]
pub struct FiringMap {
    pub epsilon: f64,
    /// The continuous extension at 0: lim L(v) as v -> 0+.
    pub eta: f64,
    core: CoreFn,
    pub provenance: Provenance,
}

impl std::fmt::Debug for FiringMap {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("FiringMap")
            .field("epsilon", &self.epsilon)
            .field("eta", &self.eta)
            .field("provenance", &self.provenance)
            .finish()
    }
}

impl FiringMap {
    /// The full map of the continuous extension: eta at 0, the core on
    /// (0, 1 - epsilon), zero on the absorption band [1 - epsilon, 1].
    pub fn eval(&self, v: f64) -> f64 {
        debug_assert!((-1e-12..=1.0 + 1e-12).contains(&v), "v = {v} outside [0, 1]");
        if v <= 0.0 {
            self.eta
        } else if v >= 1.0 - self.epsilon {
            0.0
        } else {
            (self.core)(v)
        }
    }

    /// k-fold composition; k = 0 is the identity.
    pub fn iterate(&self, v: f64, k: usize) -> f64 {
        let mut w = v;
        for _ in 0..k {
            w = self.eval(w);
        }
        w
    }

    // -- constructors -------------------------------------------------------

    pub fn closed_leaky(kappa: f64, epsilon: f64) -> Result<Self> {
        check_epsilon(epsilon)?;
        if kappa <= 1.0 {
            return Err(Error::InvalidParameter(format!("kappa must exceed 1, got {kappa}")));
        }
        let core: CoreFn =
            Arc::new(move |v| kappa * (1.0 - (v + epsilon)) / (kappa - (v + epsilon)));
        let eta = kappa * (1.0 - epsilon) / (kappa - epsilon);
        Ok(FiringMap { epsilon, eta, core, provenance: Provenance::ClosedLeaky { kappa } })
    }

    pub fn closed_quadratic(c: f64, epsilon: f64) -> Result<Self> {
        check_epsilon(epsilon)?;
        if c <= 0.0 {
            return Err(Error::InvalidParameter(format!("c must be positive, got {c}")));
        }
        let core: CoreFn = Arc::new(move |v| c * (1.0 - v - epsilon) / (c + v + epsilon));
        let eta = c * (1.0 - epsilon) / (c + epsilon);
        Ok(FiringMap { epsilon, eta, core, provenance: Provenance::ClosedQuadratic { c } })
    }

    /// Three-branch map of the piecewise-linear pair.
    pub fn closed_example4(epsilon: f64) -> Result<Self> {
        check_epsilon(epsilon)?;
        if epsilon >= 1.0 / 3.0 {
            return Err(Error::InvalidParameter(format!(
                "piecewise map needs epsilon < 1/3, got {epsilon}"
            )));
        }
        let core: CoreFn = Arc::new(move |v| {
            let w = v + epsilon;
            if v <= 1.0 / 3.0 - epsilon {
                2.0 * (2.0 - 3.0 * w) / (4.0 - 3.0 * w)
            } else if v <= 2.0 / 3.0 - epsilon {
                1.0 - w
            } else {
                (4.0 / 3.0) * (1.0 - w) / (2.0 - w)
            }
        });
        let eta = 2.0 * (2.0 - 3.0 * epsilon) / (4.0 - 3.0 * epsilon);
        Ok(FiringMap { epsilon, eta, core, provenance: Provenance::ClosedPiecewise })
    }

    /// Cross-coupled pair: L(v) = 1 - (v + epsilon) e^{lambda_2 s} with s the
    /// root of (1/2)[e^{lambda_1 s} + e^{lambda_2 s}](v + epsilon)
    /// + kappa_1 (1 - e^{lambda_1 s}) = 1.
    pub fn closed_cross_coupled(s: f64, gamma: f64, beta: f64, epsilon: f64) -> Result<Self> {
        check_epsilon(epsilon)?;
        if s <= 0.0 || gamma <= 0.0 || beta < 0.0 {
            return Err(Error::InvalidParameter(
                "cross-coupled map needs S, gamma > 0 and beta >= 0".into(),
            ));
        }
        let lambda1 = -gamma + beta;
        let lambda2 = -gamma - beta;
        if lambda1 >= 0.0 {
            return Err(Error::InvalidParameter(format!(
                "beta = {beta} too large: lambda_1 = {lambda1} must be negative"
            )));
        }
        let kappa1 = -s / lambda1;
        if kappa1 <= 1.0 {
            return Err(Error::InvalidParameter(format!(
                "kappa_1 = {kappa1} must exceed 1 (reduce beta or raise S)"
            )));
        }
        let core: CoreFn = Arc::new(move |v| {
            let w = v + epsilon;
            let residual = |t: f64| {
                0.5 * ((lambda1 * t).exp() + (lambda2 * t).exp()) * w
                    + kappa1 * (1.0 - (lambda1 * t).exp())
                    - 1.0
            };
            // residual(0) = w - 1 < 0 and residual -> kappa_1 - 1 > 0:
            // expand an upper bracket, then bisect.
            let mut hi = 1.0;
            while residual(hi) < 0.0 && hi < 1e6 {
                hi *= 2.0;
            }
            let mut lo = 0.0;
            for _ in 0..200 {
                let mid = 0.5 * (lo + hi);
                if residual(mid) < 0.0 {
                    lo = mid;
                } else {
                    hi = mid;
                }
                if hi - lo < 1e-15 {
                    break;
                }
            }
            let t = 0.5 * (lo + hi);
            1.0 - w * (lambda2 * t).exp()
        });
        let eta = core(0.0);
        Ok(FiringMap {
            epsilon,
            eta,
            core,
            provenance: Provenance::ClosedCrossCoupled { s, gamma, beta },
        })
    }

    /// Numeric map from an identical two-oscillator model: start the fired
    /// oscillator at 0 and the companion at v + epsilon, integrate until the
    /// companion reaches its threshold, return the fired oscillator's value.
    pub fn numeric_from_model(model: &EnsembleModel, cfg: &IntegratorConfig) -> Result<Self> {
        if model.n != 2 {
            return Err(Error::InvalidParameter(format!(
                "numeric map needs a two-oscillator model, got n = {}",
                model.n
            )));
        }
        cfg.validate()?;
        let epsilon = model.jump.epsilon();
        check_epsilon(epsilon)?;
        let model = Arc::new(model.clone());
        let cfg = cfg.clone();
        let core: CoreFn = Arc::new(move |v| {
            let stepper = Dopri5::new(model.as_ref(), cfg.clone())
                .expect("validated config");
            let state = State::new(0.0, vec![0.0, v + epsilon]);
            let (_, hit) = stepper
                .first_upcrossing(&state, |x| x[1] - model.threshold_value(1, x))
                .expect("positive flow reaches threshold");
            hit.x[0]
        });
        let eta = estimate_eta(&core)?;
        Ok(FiringMap { epsilon, eta, core, provenance: Provenance::Numeric })
    }

    /// Numeric map from a bare free flow (identical uncoupled pair).
    pub fn numeric_from_flow(flow: &FreeFlow, epsilon: f64, cfg: &IntegratorConfig) -> Result<Self> {
        let model = EnsembleModel::new(
            2,
            flow.clone(),
            CouplingSpec::none(2),
            ThresholdSpec::zero(2),
            JumpRule::standard(epsilon, 2),
        )?;
        Self::numeric_from_model(&model, cfg)
    }

    /// Numeric map for the symmetric reduced system y' = G(y, z),
    /// z' = G(z, y) with threshold 1.
    pub fn numeric_from_g<G>(g: G, epsilon: f64, cfg: &IntegratorConfig) -> Result<Self>
    where
        G: Fn(f64, f64) -> f64 + Send + Sync + 'static,
    {
        check_epsilon(epsilon)?;
        cfg.validate()?;
        let rhs = Arc::new(SymmetricPairRhs { g });
        let cfg = cfg.clone();
        let core: CoreFn = Arc::new(move |v| {
            let stepper = Dopri5::new(rhs.as_ref(), cfg.clone()).expect("validated config");
            let state = State::new(0.0, vec![0.0, v + epsilon]);
            let (_, hit) = stepper
                .first_upcrossing(&state, |x| x[1] - 1.0)
                .expect("positive reduced field reaches threshold");
            hit.x[0]
        });
        let eta = estimate_eta(&core)?;
        Ok(FiringMap { epsilon, eta, core, provenance: Provenance::Numeric })
    }
}

struct SymmetricPairRhs<G> {
    g: G,
}

impl<G: Fn(f64, f64) -> f64> OdeRhs for SymmetricPairRhs<G> {
    fn dim(&self) -> usize {
        2
    }
    fn eval(&self, x: &[f64], dx: &mut [f64]) {
        dx[0] = (self.g)(x[0], x[1]);
        dx[1] = (self.g)(x[1], x[0]);
    }
}

fn check_epsilon(epsilon: f64) -> Result<()> {
    if !(0.0..1.0).contains(&epsilon) || epsilon == 0.0 {
        return Err(Error::InvalidParameter(format!("epsilon must lie in (0, 1), got {epsilon}")));
    }
    Ok(())
}

/// eta = lim L(v) as v -> 0+, estimated at 1e-8 with a consistency check at
/// 1e-7; the two must agree to 1e-6.
fn estimate_eta(core: &CoreFn) -> Result<f64> {
    let fine = core(1e-8);
    let coarse = core(1e-7);
    if (fine - coarse).abs() > 1e-6 {
        return Err(Error::NoBracket(format!(
            "eta limit inconsistent: L(1e-8) = {fine}, L(1e-7) = {coarse}"
        )));
    }
    Ok(fine)
}

// ---------------------------------------------------------------------------
// Conditions (A1)-(A3) and fixed points
// ---------------------------------------------------------------------------

#[derive(Clone, Copy, Debug)]
pub struct Conditions {
    /// Strict decrease of the core on (0, 1 - epsilon).
    pub a1: bool,
    /// eta > 1 - epsilon.
    pub a2: bool,
    /// The core vanishes at the right end.
    pub a3: bool,
    pub eta: f64,
}

impl FiringMap {
    pub fn check_conditions(&self) -> Conditions {
        self.check_conditions_grid(A1_GRID)
    }

    /// As [`check_conditions`](Self::check_conditions) with an explicit grid
    /// size (numeric maps pay one integration per grid point).
    pub fn check_conditions_grid(&self, grid: usize) -> Conditions {
        let top = 1.0 - self.epsilon;
        let mut a1 = true;
        let mut prev = f64::INFINITY;
        for k in 1..grid {
            let v = top * k as f64 / grid as f64;
            let l = (self.core)(v);
            if l >= prev {
                a1 = false;
                break;
            }
            prev = l;
        }
        let a2 = self.eta > 1.0 - self.epsilon;
        let a3 = (self.core)(top - A3_OFFSET).abs() <= 1e-6;
        Conditions { a1, a2, a3, eta: self.eta }
    }

    /// The unique root of L(v) = v on (0, 1 - epsilon), by bisection.
    /// L - identity is strictly decreasing under (A1), so the root is unique.
    pub fn fixed_point(&self) -> Result<f64> {
        let top = 1.0 - self.epsilon;
        let g = |v: f64| self.eval(v) - v;
        let mut lo = 1e-13;
        let mut hi = top - 1e-13;
        if g(lo) <= 0.0 || g(hi) >= 0.0 {
            return Err(Error::NoBracket(format!(
                "L(v) - v does not change sign on (0, {top}): map degenerate"
            )));
        }
        for _ in 0..120 {
            let mid = 0.5 * (lo + hi);
            if g(mid) > 0.0 {
                lo = mid;
            } else {
                hi = mid;
            }
            if hi - lo < 1e-13 {
                break;
            }
        }
        Ok(0.5 * (lo + hi))
    }

    /// Solve L(v) = target on (0, 1 - epsilon) by bisection (A1 gives strict
    /// monotonicity but no smoothness, so no derivative-based method).
    pub fn inverse(&self, target: f64) -> Result<f64> {
        let top = 1.0 - self.epsilon;
        let lo0 = 1e-15;
        let hi0 = top - 1e-15;
        let at_lo = (self.core)(lo0);
        let at_hi = (self.core)(hi0);
        if target > at_lo || target < at_hi {
            return Err(Error::NoBracket(format!(
                "target {target} outside the core range [{at_hi}, {at_lo}]"
            )));
        }
        let mut lo = lo0;
        let mut hi = hi0;
        for _ in 0..120 {
            let mid = 0.5 * (lo + hi);
            if (self.core)(mid) > target {
                lo = mid;
            } else {
                hi = mid;
            }
            if hi - lo < 1e-14 {
                break;
            }
        }
        Ok(0.5 * (lo + hi))
    }

    /// a_0 = 0, a_1 = 1 - epsilon, a_{k+1} = L^{-1}(a_k). Stops early when
    /// the same-parity subsequences have converged to 1e-12, or errors when
    /// some a_k leaves the range of the core (the regions then terminate).
    pub fn a_sequence(&self, k_max: usize) -> Result<Vec<f64>> {
        let mut seq = vec![0.0, 1.0 - self.epsilon];
        while seq.len() <= k_max {
            let target = seq[seq.len() - 1];
            let next = self.inverse(target).map_err(|_| Error::ASequenceOutOfRange {
                index: seq.len(),
                value: target,
            })?;
            seq.push(next);
            let n = seq.len();
            if n >= 4 && (seq[n - 1] - seq[n - 3]).abs() < 1e-12 {
                break;
            }
        }
        Ok(seq)
    }
}

// ---------------------------------------------------------------------------
// Period-2 structure
// ---------------------------------------------------------------------------

#[derive(Clone, Copy, Debug)]
pub enum Period2 {
    /// Even and odd a-limits coincide with v*: no non-trivial 2-cycle.
    Degenerate { v_star: f64 },
    /// The enclosing 2-cycle: L(v_star2) = v_hat, L(v_hat) = v_star2.
    Cycle { v_star2: f64, v_hat: f64 },
}

impl FiringMap {
    /// Limits of the even/odd a-subsequences, cross-checked as a 2-cycle of
    /// L; degenerate when they collapse onto the fixed point.
    pub fn period2_points(&self) -> Result<Period2> {
        let seq = self.a_sequence(100_000)?;
        let n = seq.len();
        // Last even-index and odd-index terms approximate the limits.
        let (even_last, odd_last) = if n % 2 == 0 {
            (seq[n - 2], seq[n - 1])
        } else {
            (seq[n - 1], seq[n - 2])
        };
        let v_star = self.fixed_point()?;
        if (even_last - v_star).abs() < 1e-8 || (even_last - odd_last).abs() < 1e-8 {
            return Ok(Period2::Degenerate { v_star });
        }
        let (v_star2, v_hat) = (even_last, odd_last);
        // Cross-check: the pair is a 2-cycle of L.
        let r1 = (self.eval(v_star2) - v_hat).abs();
        let r2 = (self.eval(v_hat) - v_star2).abs();
        if r1 > 1e-8 || r2 > 1e-8 {
            return Err(Error::NoBracket(format!(
                "a-sequence limits ({v_star2}, {v_hat}) fail the 2-cycle residuals ({r1}, {r2})"
            )));
        }
        Ok(Period2::Cycle { v_star2, v_hat })
    }
}

// ---------------------------------------------------------------------------
// Synchronization regions
// ---------------------------------------------------------------------------

/// One region S_k with its half-open bracket convention.
#[derive(Clone, Copy, Debug)]
pub struct Region {
    pub k: usize,
    pub lo: f64,
    pub hi: f64,
    pub lo_closed: bool,
    pub hi_closed: bool,
}

impl Region {
    pub fn contains(&self, v: f64) -> bool {
        let above = if self.lo_closed { v >= self.lo } else { v > self.lo };
        let below = if self.hi_closed { v <= self.hi } else { v < self.hi };
        above && below
    }
}

/// The partition of [0, 1] into S_0, S_1, ... plus the non-synchronizing
/// core interval around the period-2 orbit.
#[derive(Clone, Debug)]
pub struct SyncPartition {
    pub epsilon: f64,
    pub regions: Vec<Region>,
    /// Open interval (even-limit, odd-limit); empty in the degenerate case.
    pub core: (f64, f64),
}

impl SyncPartition {
    /// Region index for v, or None inside the non-sync core (or in gaps left
    /// by a truncated a-sequence).
    pub fn classify(&self, v: f64) -> Option<usize> {
        self.regions.iter().find(|r| r.contains(v)).map(|r| r.k)
    }
}

impl FiringMap {
    /// Build the S_k partition from the a-sequence:
    /// S_0 = [1-eps, 1], S_1 = [a_0, a_2], then (a_{k-1}, a_{k+1}] for odd
    /// k >= 3 and [a_{k+1}, a_{k-1}) for even k >= 2.
    pub fn sync_partition(&self, k_max: usize) -> Result<SyncPartition> {
        let a = self.a_sequence(k_max + 2)?;
        let n = a.len();
        let mut regions = vec![
            Region { k: 0, lo: 1.0 - self.epsilon, hi: 1.0, lo_closed: true, hi_closed: true },
        ];
        if n >= 3 {
            regions.push(Region { k: 1, lo: a[0], hi: a[2], lo_closed: true, hi_closed: true });
        }
        for k in 2..n.saturating_sub(1) {
            if k > k_max {
                break;
            }
            let region = if k % 2 == 1 {
                Region { k, lo: a[k - 1], hi: a[k + 1], lo_closed: false, hi_closed: true }
            } else {
                Region { k, lo: a[k + 1], hi: a[k - 1], lo_closed: true, hi_closed: false }
            };
            regions.push(region);
        }
        let (even_last, odd_last) = if n % 2 == 0 {
            (a[n - 2], a[n - 1])
        } else {
            (a[n - 1], a[n - 2])
        };
        Ok(SyncPartition { epsilon: self.epsilon, regions, core: (even_last, odd_last) })
    }

    /// Smallest k <= k_max with L^k(v) in the absorption band [1-eps, 1],
    /// or None when the orbit is trapped around the 2-cycle.
    pub fn classify(&self, v: f64, k_max: usize) -> Option<usize> {
        let mut w = v;
        for k in 0..=k_max {
            if w >= 1.0 - self.epsilon {
                return Some(k);
            }
            // Trap test: the orbit has settled onto a 2-cycle below the band.
            if k > 0 && (self.iterate(w, 2) - w).abs() < 1e-9 {
                return None;
            }
            w = self.eval(w);
        }
        None
    }
}

// ---------------------------------------------------------------------------
// Timing windows
// ---------------------------------------------------------------------------

/// Two-oscillator window: sync happens within [(m/2) T~, m T] after the
/// firing moment.
pub fn sync_window_pair(m: usize, t_nat: f64, t_tilde: f64) -> (f64, f64) {
    (0.5 * m as f64 * t_tilde, m as f64 * t_nat)
}

/// Ensemble window with m = max_i k_i: [((m-1)/2) T~, (m+1) T].
pub fn sync_window_ensemble(max_k: usize, t_nat: f64, t_tilde: f64) -> (f64, f64) {
    let m = max_k as f64;
    (0.5 * (m - 1.0).max(0.0) * t_tilde, (m + 1.0) * t_nat)
}

// ---------------------------------------------------------------------------
// Perturbation bound (Phi)
// ---------------------------------------------------------------------------

/// Inputs of the deviation bound |u_{i+1} - L(u_i)| <= Phi for a tracked
/// pair between consecutive firings at t_i and t-bar_{i+1}, with interfering
/// firings of other oscillators at theta_1 < ... < theta_k in between.
#[derive(Clone, Debug)]
pub struct PhiInputs {
    pub epsilon: f64,
    /// Coupling bound of the trailing oscillator.
    pub mu_r: f64,
    /// Coupling bound of the leading oscillator.
    pub mu_l: f64,
    /// Threshold perturbation bound of the trailing oscillator.
    pub xi_r: f64,
    /// Lipschitz constant of the free flow.
    pub lipschitz: f64,
    /// Lower flow bound.
    pub mu: f64,
    /// Upper flow bound.
    pub big_m: f64,
    pub t_i: f64,
    pub thetas: Vec<f64>,
    pub t_bar: f64,
}

#[derive(Clone, Copy, Debug)]
pub struct PhiBound {
    pub phi1_r: f64,
    pub phi1_l: f64,
    pub phi2: f64,
    pub phi: f64,
}

/// Phi_1(eps, m): the Gronwall-type accumulation of coupling drift m and the
/// pulse injections at the interfering moments.
fn phi1(inp: &PhiInputs, m: f64) -> f64 {
    let l = inp.lipschitz;
    let t_bar = inp.t_bar;
    if inp.thetas.is_empty() {
        return m * (t_bar - inp.t_i) * (l * (t_bar - inp.t_i)).exp();
    }
    let th = &inp.thetas;
    let k = th.len();
    let mut drift = (th[0] - inp.t_i) * (l * (t_bar - inp.t_i)).exp();
    for j in 0..k - 1 {
        drift += (th[j + 1] - th[j]) * (l * (t_bar - th[j])).exp();
    }
    drift += (t_bar - th[k - 1]) * (l * (t_bar - th[k - 1])).exp();
    let pulses: f64 = th.iter().map(|&t| (l * (t_bar - t)).exp()).sum();
    m * drift + inp.epsilon * pulses
}

/// The certified bound Phi = Phi_1(eps, mu_l) + Phi_2 (M + mu_r) with
/// Phi_2 = (Phi_1(eps, mu_r) + xi_r) / (mu - mu_r).
pub fn perturbation_bound(inp: &PhiInputs) -> Result<PhiBound> {
    if inp.mu_r >= inp.mu {
        return Err(Error::VacuousBound { mu_r: inp.mu_r, mu: inp.mu });
    }
    if inp.t_bar < inp.t_i
        || inp.thetas.windows(2).any(|w| w[1] < w[0])
        || inp.thetas.iter().any(|&t| t < inp.t_i || t > inp.t_bar)
    {
        return Err(Error::InvalidParameter(
            "event times must satisfy t_i <= theta_1 <= ... <= theta_k <= t_bar".into(),
        ));
    }
    let phi1_r = phi1(inp, inp.mu_r);
    let phi1_l = phi1(inp, inp.mu_l);
    let phi2 = (phi1_r + inp.xi_r) / (inp.mu - inp.mu_r);
    let phi = phi1_l + phi2 * (inp.big_m + inp.mu_r);
    Ok(PhiBound { phi1_r, phi1_l, phi2, phi })
}

// ---------------------------------------------------------------------------
// Kamke reduction
// ---------------------------------------------------------------------------

/// G(y, z) = g(y, z, z, ..., z) — the symmetric two-variable reduction.
pub fn kamke_reduce<F>(g: F, n: usize) -> impl Fn(f64, f64) -> f64
where
    F: Fn(&[f64]) -> f64,
{
    move |y, z| {
        let mut args = vec![z; n];
        args[0] = y;
        g(&args)
    }
}

/// Sampled type-K check: central finite differences of dg/dy_i, i != 1, at
/// quasi-random (Halton) points of [0,1]^n. Type K iff every sampled partial
/// is >= -1e-8; eta_bound is the largest observed partial.
pub fn kamke_check<F>(g: F, n: usize, samples: usize) -> (bool, f64)
where
    F: Fn(&[f64]) -> f64,
{
    const STEP: f64 = 1e-6;
    let mut is_type_k = true;
    let mut eta_bound = f64::NEG_INFINITY;
    for s in 0..samples {
        let mut y = halton_point(s + 1, n);
        for i in 1..n {
            let yi = y[i];
            y[i] = yi + STEP;
            let up = g(&y);
            y[i] = yi - STEP;
            let down = g(&y);
            y[i] = yi;
            let partial = (up - down) / (2.0 * STEP);
            if partial < -1e-8 {
                is_type_k = false;
            }
            eta_bound = eta_bound.max(partial);
        }
    }
    (is_type_k, eta_bound)
}

/// The i-th point of the Halton sequence in [0,1]^dim (prime bases).
fn halton_point(index: usize, dim: usize) -> Vec<f64> {
    const PRIMES: [usize; 16] = [2, 3, 5, 7, 11, 13, 17, 19, 23, 29, 31, 37, 41, 43, 47, 53];
    (0..dim)
        .map(|d| {
            let base = PRIMES[d % PRIMES.len()];
            let mut f = 1.0;
            let mut r = 0.0;
            let mut i = index;
            while i > 0 {
                f /= base as f64;
                r += f * (i % base) as f64;
                i /= base;
            }
            r
        })
        .collect()
}

/// Convenience: the free hit time of a map-compatible flow, re-exported here
/// so analysis call sites need only this module.
pub fn natural_and_tilde(flow: &FreeFlow, v_star: f64) -> Result<(f64, f64)> {
    let t = crate::flow::natural_period(flow)?;
    let tt = crate::flow::tilde_period(flow, v_star)?;
    Ok((t, tt))
}

/// Monotonicity consequence for a type-K field: ordered starts stay ordered
/// under the symmetric pair flow. Returns the largest order violation over
/// sampled times (nonpositive means monotone).
pub fn monotonicity_violation<G>(g: G, lo: [f64; 2], hi: [f64; 2], t_end: f64) -> Result<f64>
where
    G: Fn(f64, f64) -> f64 + Copy,
{
    let cfg = IntegratorConfig::default();
    let rhs_lo = SymmetricPairRhs { g };
    let stepper = Dopri5::new(&rhs_lo, cfg)?;
    let a = stepper.integrate(&State::new(0.0, lo.to_vec()), t_end)?;
    let b = stepper.integrate(&State::new(0.0, hi.to_vec()), t_end)?;
    let mut worst = f64::NEG_INFINITY;
    for k in 0..=50 {
        let t = t_end * k as f64 / 50.0;
        let xa = a.eval(t);
        let xb = b.eval(t);
        for i in 0..2 {
            worst = worst.max(xa[i] - xb[i]);
        }
    }
    Ok(worst)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn closed_leaky_values() {
        let map = FiringMap::closed_leaky(2.0, 0.2).unwrap();
        // L(0.3) = 2(1 - 0.5)/(2 - 0.5).
        assert!((map.eval(0.3) - 2.0 * 0.5 / 1.5).abs() < 1e-15);
        assert!((map.eta - 2.0 * 0.8 / 1.8).abs() < 1e-15);
        assert_eq!(map.eval(0.85), 0.0);
        assert_eq!(map.eval(0.0), map.eta);
    }

    #[test]
    fn closed_quadratic_values() {
        let map = FiringMap::closed_quadratic(1.0, 0.1).unwrap();
        assert!((map.eta - 0.9 / 1.1).abs() < 1e-15);
        let c = map.check_conditions();
        assert!(c.a1 && c.a3);
        assert!(!c.a2); // eta ~ 0.818 < 0.9
    }

    #[test]
    fn closed_example4_branches() {
        let map = FiringMap::closed_example4(0.1).unwrap();
        // Middle branch at v = 1/3: 1 - v - eps = 2/3 - eps - ... = 0.566667.
        assert!((map.eval(1.0 / 3.0) - (1.0 - 1.0 / 3.0 - 0.1)).abs() < 1e-15);
        // First branch at v = 0.2.
        assert!((map.eval(0.2) - 2.0 * (2.0 - 0.6 - 0.3) / (4.0 - 0.6 - 0.3)).abs() < 1e-15);
        let c = map.check_conditions();
        assert!(c.a1 && c.a2 && c.a3);
    }

    #[test]
    fn conditions_leaky() {
        let map = FiringMap::closed_leaky(2.0, 0.2).unwrap();
        let c = map.check_conditions();
        assert!(c.a1 && c.a2 && c.a3);
        assert!(c.eta > 0.8);
    }

    #[test]
    fn fixed_points_match_formulas() {
        let map = FiringMap::closed_leaky(2.0, 0.2).unwrap();
        let v = map.fixed_point().unwrap();
        let exact = 1.9 - 2.01f64.sqrt();
        assert!((v - exact).abs() < 1e-10, "{v} vs {exact}");
        assert!((map.eval(v) - v).abs() < 1e-9);

        let map = FiringMap::closed_quadratic(1.0, 0.1).unwrap();
        let v = map.fixed_point().unwrap();
        let exact = (1.05f64 * 1.05 + 0.9).sqrt() - 1.05;
        assert!((v - exact).abs() < 1e-10);

        let map = FiringMap::closed_example4(0.1).unwrap();
        let v = map.fixed_point().unwrap();
        assert!((v - 0.45).abs() < 1e-10);
    }

    #[test]
    fn iterate_identity_and_cycle() {
        let map = FiringMap::closed_example4(0.1).unwrap();
        assert_eq!(map.iterate(0.77, 0), 0.77);
        // The 2-cycle {1/3, 2/3 - eps} is invariant.
        let mut v = 1.0 / 3.0;
        for _ in 0..100 {
            v = map.iterate(v, 2);
        }
        assert!((v - 1.0 / 3.0).abs() < 1e-12);
        let peskin = FiringMap::closed_leaky(2.0, 0.2).unwrap();
        let v_star = peskin.fixed_point().unwrap();
        assert!((peskin.iterate(v_star, 7) - v_star).abs() < 1e-8);
    }

    #[test]
    fn a_sequence_leaky() {
        let map = FiringMap::closed_leaky(2.0, 0.2).unwrap();
        let a = map.a_sequence(10).unwrap();
        assert_eq!(a[0], 0.0);
        assert!((a[1] - 0.8).abs() < 1e-15);
        // a_2 solves 2(0.8 - v)/(1.8 - v) = 0.8 -> wait: L(a_2) = a_1.
        assert!((a[2] - 0.16 / 1.2).abs() < 1e-10, "a2 = {}", a[2]);
        // Even terms increase, odd terms decrease.
        for k in (2..a.len()).step_by(2) {
            assert!(a[k] > a[k - 2]);
        }
        for k in (3..a.len()).step_by(2) {
            assert!(a[k] < a[k - 2]);
        }
    }

    #[test]
    fn period2_degenerate_leaky() {
        let map = FiringMap::closed_leaky(2.0, 0.2).unwrap();
        match map.period2_points().unwrap() {
            Period2::Degenerate { v_star } => {
                assert!((v_star - (1.9 - 2.01f64.sqrt())).abs() < 1e-8);
            }
            other => panic!("expected degenerate, got {other:?}"),
        }
    }

    #[test]
    fn period2_cycle_example4() {
        // The a-sequence limits enclose the inner exactly-periodic band; they
        // are the roots of the outer-branch 2-cycle equation, strictly
        // outside {1/3, 2/3 - eps}.
        let map = FiringMap::closed_example4(0.1).unwrap();
        match map.period2_points().unwrap() {
            Period2::Cycle { v_star2, v_hat } => {
                assert!((map.eval(v_star2) - v_hat).abs() < 1e-9);
                assert!((map.eval(v_hat) - v_star2).abs() < 1e-9);
                assert!(v_star2 < 1.0 / 3.0 && v_hat > 2.0 / 3.0 - 0.1);
                assert!((v_star2 - 0.1275507701609461).abs() < 1e-9, "v** = {v_star2}");
                assert!((v_hat - 0.7942174368276127).abs() < 1e-9, "v_hat = {v_hat}");
            }
            other => panic!("expected cycle, got {other:?}"),
        }
    }

    #[test]
    fn classify_and_partition_agree() {
        let map = FiringMap::closed_leaky(2.0, 0.2).unwrap();
        let partition = map.sync_partition(40).unwrap();
        assert_eq!(map.classify(0.95, 500), Some(0));
        assert_eq!(map.classify(0.1, 500), Some(1));
        let mut rng_v = 0.017_f64;
        for _ in 0..1000 {
            rng_v = (rng_v * 997.0 + 0.1234).fract();
            if let Some(k) = partition.classify(rng_v) {
                assert_eq!(map.classify(rng_v, 500), Some(k), "v = {rng_v}");
            }
        }
    }

    #[test]
    fn classify_example4_trap() {
        let map = FiringMap::closed_example4(0.1).unwrap();
        let v_star = map.fixed_point().unwrap();
        assert_eq!(map.classify(v_star, 500), None);
        assert_eq!(map.classify(1.0 / 3.0, 500), None);
        assert!(map.classify(0.05, 500).is_some());
        assert!(map.classify(0.85, 500).is_some());
    }

    #[test]
    fn sync_windows() {
        assert_eq!(sync_window_pair(0, 0.7, 0.4), (0.0, 0.0));
        let (lo, hi) = sync_window_pair(4, std::f64::consts::LN_2, 0.275965);
        assert!((lo - 0.55193).abs() < 1e-5);
        assert!((hi - 2.772588722239781).abs() < 1e-12);
        let (lo, hi) = sync_window_ensemble(1, 0.7, 0.4);
        assert_eq!(lo, 0.0);
        assert!((hi - 1.4).abs() < 1e-15);
    }

    #[test]
    fn phi_bound_basics() {
        // No interference, no perturbation: exact map, Phi = 0.
        let base = PhiInputs {
            epsilon: 0.08,
            mu_r: 0.0,
            mu_l: 0.0,
            xi_r: 0.0,
            lipschitz: 1.0,
            mu: 1.0,
            big_m: 3.0,
            t_i: 0.0,
            thetas: vec![],
            t_bar: 0.5,
        };
        let b = perturbation_bound(&base).unwrap();
        assert_eq!(b.phi, 0.0);

        // One interference at the midpoint.
        let one = PhiInputs { mu_r: 0.01, xi_r: 0.005, thetas: vec![0.25], ..base.clone() };
        let b = perturbation_bound(&one).unwrap();
        let e = |x: f64| x.exp();
        let expect_phi1r = 0.01 * (0.25 * e(0.5) + 0.25 * e(0.25)) + 0.08 * e(0.25);
        assert!((b.phi1_r - expect_phi1r).abs() < 1e-12);
        let expect_phi2 = (expect_phi1r + 0.005) / (1.0 - 0.01);
        assert!((b.phi2 - expect_phi2).abs() < 1e-12);
        assert!((b.phi - (b.phi1_l + expect_phi2 * 3.01)).abs() < 1e-12);

        // Monotone nondecreasing in each perturbation scale.
        for bump in [
            PhiInputs { epsilon: 0.09, ..one.clone() },
            PhiInputs { mu_r: 0.02, ..one.clone() },
            PhiInputs { mu_l: 0.01, ..one.clone() },
            PhiInputs { xi_r: 0.01, ..one.clone() },
        ] {
            assert!(perturbation_bound(&bump).unwrap().phi >= b.phi);
        }

        let vacuous = PhiInputs { mu_r: 2.0, ..base };
        assert!(matches!(perturbation_bound(&vacuous), Err(Error::VacuousBound { .. })));
    }

    #[test]
    fn kamke_reduce_and_check() {
        let g = |y: &[f64]| 2.0 - 1.0 * y[0] + 0.1 * (y[1] + y[2]);
        let gg = kamke_reduce(g, 3);
        assert!((gg(0.5, 0.3) - (2.0 - 0.5 + 0.06)).abs() < 1e-12);

        let (k, eta) = kamke_check(g, 3, 64);
        assert!(k);
        assert!((eta - 0.1).abs() < 1e-6);

        let bad = |y: &[f64]| 2.0 - y[0] - 0.1 * y[1];
        let (k, _) = kamke_check(bad, 2, 64);
        assert!(!k);
    }

    #[test]
    fn kamke_monotone_dynamics() {
        let g = |y: f64, z: f64| 2.0 - y + 0.05 * z;
        let worst = monotonicity_violation(g, [0.1, 0.2], [0.15, 0.3], 0.5).unwrap();
        assert!(worst <= 1e-10, "violation {worst}");
    }
}
