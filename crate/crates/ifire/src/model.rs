//! Oscillator-ensemble data model: free flows, couplings, moving thresholds
//! and the firing jump rules.
//!
//! An ensemble of `n` oscillators follows `x_i' = f(x_i) + phi_i(x)` between
//! firings. When oscillator `j` reaches the surface `x_j = 1 + zeta_j(x)` it
//! resets to zero and every other oscillator receives a single pulse
//! increment; an oscillator pushed to or past its own threshold by the pulse
//! fires along with the sender (absorption) without emitting a further pulse.

use std::fmt;
use std::sync::Arc;

use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};

/// Absolute slack for domain-membership checks. Event detection leaves states
/// within root-finding tolerance of the threshold surface.
pub const DOMAIN_TOL: f64 = 1e-9;

/// Coordinates at or below this magnitude in an initial state are treated as
/// "just fired" by the simulator.
pub const ZERO_TOL: f64 = 1e-12;

type ScalarFn = Arc<dyn Fn(f64) -> f64 + Send + Sync>;
type VectorFn = Arc<dyn Fn(&[f64]) -> f64 + Send + Sync>;

// ---------------------------------------------------------------------------
// Free flow
// ---------------------------------------------------------------------------

/// The uncoupled right-hand side `f` shared by all oscillators.
#[derive(Clone)]
pub enum FlowKind {
    /// `f(s) = s^2 + c`, `c > 0`.
    Quadratic { c: f64 },
    /// `f(s) = S - gamma s` with `kappa = S / gamma > 1`.
    Leaky { s: f64, gamma: f64 },
    /// The three-branch flow: `4 - 3s` on `(0, 1/3]`, `3` on `(1/3, 2/3]`,
    /// `4 - 3(s - 2/3)` on `(2/3, 1]`.
    PiecewiseLinear,
    Custom(ScalarFn),
}

impl fmt::Debug for FlowKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            FlowKind::Quadratic { c } => write!(f, "Quadratic {{ c: {c} }}"),
            FlowKind::Leaky { s, gamma } => write!(f, "Leaky {{ s: {s}, gamma: {gamma} }}"),
            FlowKind::PiecewiseLinear => write!(f, "PiecewiseLinear"),
            FlowKind::Custom(_) => write!(f, "Custom(..)"),
        }
    }
}

/// A free flow together with the bounds `mu <= f <= M` and a Lipschitz
/// constant, valid on `[0, domain_upper]`.
#[derive(Clone, Debug)]
pub struct FreeFlow {
    pub kind: FlowKind,
    /// Lower bound `mu` of `f` on the domain.
    pub lower: f64,
    /// Upper bound `M` of `f` on the domain.
    pub upper: f64,
    /// Lipschitz constant of `f` on the domain.
    pub lipschitz: f64,
    /// Upper end of the interval the bounds were derived for.
    pub domain_upper: f64,
}

impl FreeFlow {
    pub fn quadratic(c: f64) -> Result<Self> {
        if c <= 0.0 {
            return Err(Error::InvalidParameter(format!("quadratic flow needs c > 0, got {c}")));
        }
        Ok(Self::quadratic_on(c, 1.0))
    }

    pub fn quadratic_on(c: f64, domain_upper: f64) -> Self {
        FreeFlow {
            kind: FlowKind::Quadratic { c },
            lower: c,
            upper: domain_upper * domain_upper + c,
            lipschitz: 2.0 * domain_upper,
            domain_upper,
        }
    }

    pub fn leaky(s: f64, gamma: f64) -> Result<Self> {
        if s <= 0.0 || gamma <= 0.0 {
            return Err(Error::InvalidParameter(format!(
                "leaky flow needs S, gamma > 0, got S = {s}, gamma = {gamma}"
            )));
        }
        if s / gamma <= 1.0 {
            return Err(Error::InvalidParameter(format!(
                "leaky flow needs kappa = S/gamma > 1, got {}",
                s / gamma
            )));
        }
        Ok(Self::leaky_on(s, gamma, 1.0))
    }

    pub fn leaky_on(s: f64, gamma: f64, domain_upper: f64) -> Self {
        FreeFlow {
            kind: FlowKind::Leaky { s, gamma },
            lower: s - gamma * domain_upper,
            upper: s,
            lipschitz: gamma,
            domain_upper,
        }
    }

    pub fn piecewise_linear() -> Self {
        FreeFlow {
            kind: FlowKind::PiecewiseLinear,
            lower: 3.0,
            upper: 4.0,
            lipschitz: 3.0,
            domain_upper: 1.0,
        }
    }

    /// Custom flow with user-supplied bounds.
    pub fn custom<F>(f: F, lower: f64, upper: f64, lipschitz: f64) -> Self
    where
        F: Fn(f64) -> f64 + Send + Sync + 'static,
    {
        FreeFlow {
            kind: FlowKind::Custom(Arc::new(f)),
            lower,
            upper,
            lipschitz,
            domain_upper: 1.0,
        }
    }

    /// Recompute analytic bounds for a larger domain (moving thresholds).
    pub fn rebound(&mut self, domain_upper: f64) {
        match self.kind {
            FlowKind::Quadratic { c } => *self = Self::quadratic_on(c, domain_upper),
            FlowKind::Leaky { s, gamma } => *self = Self::leaky_on(s, gamma, domain_upper),
            // Piecewise/custom bounds are stated on [0, 1]; keep them.
            _ => self.domain_upper = domain_upper.max(self.domain_upper),
        }
    }

    pub fn eval(&self, s: f64) -> f64 {
        match &self.kind {
            FlowKind::Quadratic { c } => s * s + c,
            FlowKind::Leaky { s: big_s, gamma } => big_s - gamma * s,
            FlowKind::PiecewiseLinear => {
                if s <= 1.0 / 3.0 {
                    4.0 - 3.0 * s
                } else if s <= 2.0 / 3.0 {
                    3.0
                } else {
                    4.0 - 3.0 * (s - 2.0 / 3.0)
                }
            }
            FlowKind::Custom(f) => f(s),
        }
    }

    /// `kappa = S / gamma` for leaky flows.
    pub fn kappa(&self) -> Option<f64> {
        match self.kind {
            FlowKind::Leaky { s, gamma } => Some(s / gamma),
            _ => None,
        }
    }

    /// Interior kink locations for piecewise flows; adaptive steps are clipped
    /// there so every step sees a smooth right-hand side.
    pub fn step_boundaries(&self) -> &'static [f64] {
        match self.kind {
            FlowKind::PiecewiseLinear => &[1.0 / 3.0, 2.0 / 3.0],
            _ => &[],
        }
    }
}

// ---------------------------------------------------------------------------
// Couplings and thresholds
// ---------------------------------------------------------------------------

/// The inter-firing couplings `phi_i(x)`.
#[derive(Clone)]
pub enum CouplingKind {
    None,
    /// Two oscillators, `phi_1 = beta x_2`, `phi_2 = beta x_1`.
    CrossPair { beta: f64 },
    /// Per-oscillator affine term `phi_i(x) = offset_i + slope_i * x_i`
    /// (non-identical drift of the random ensemble).
    LinearSelf { offset: Vec<f64>, slope: Vec<f64> },
    Custom(Vec<VectorFn>),
}

impl fmt::Debug for CouplingKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            CouplingKind::None => write!(f, "None"),
            CouplingKind::CrossPair { beta } => write!(f, "CrossPair {{ beta: {beta} }}"),
            CouplingKind::LinearSelf { offset, slope } => {
                write!(f, "LinearSelf {{ offset: {offset:?}, slope: {slope:?} }}")
            }
            CouplingKind::Custom(v) => write!(f, "Custom({} fns)", v.len()),
        }
    }
}

#[derive(Clone, Debug)]
pub struct CouplingSpec {
    pub kind: CouplingKind,
    /// Bounds `mu_i` with `|phi_i(x)| < mu_i`.
    pub bounds: Vec<f64>,
}

impl CouplingSpec {
    pub fn none(n: usize) -> Self {
        CouplingSpec { kind: CouplingKind::None, bounds: vec![0.0; n] }
    }

    pub fn cross_pair(beta: f64, domain_upper: f64) -> Self {
        let bound = beta.abs() * domain_upper + 1e-12;
        CouplingSpec { kind: CouplingKind::CrossPair { beta }, bounds: vec![bound; 2] }
    }

    pub fn linear_self(offset: Vec<f64>, slope: Vec<f64>, domain_upper: f64) -> Self {
        let bounds = offset
            .iter()
            .zip(&slope)
            .map(|(a, b)| a.abs() + b.abs() * domain_upper + 1e-12)
            .collect();
        CouplingSpec { kind: CouplingKind::LinearSelf { offset, slope }, bounds }
    }

    pub fn eval(&self, i: usize, x: &[f64]) -> f64 {
        match &self.kind {
            CouplingKind::None => 0.0,
            CouplingKind::CrossPair { beta } => beta * x[1 - i],
            CouplingKind::LinearSelf { offset, slope } => offset[i] + slope[i] * x[i],
            CouplingKind::Custom(fns) => fns[i](x),
        }
    }

    pub fn max_bound(&self) -> f64 {
        self.bounds.iter().cloned().fold(0.0, f64::max)
    }
}

/// The moving-threshold perturbations `zeta_i(x)`; oscillator `i` fires at
/// `x_i = 1 + zeta_i(x)`.
#[derive(Clone)]
pub enum ThresholdKind {
    Zero,
    /// Constant per-oscillator offsets (thresholds `1 + c_i`).
    ConstantOffsets(Vec<f64>),
    Custom(Vec<VectorFn>),
}

impl fmt::Debug for ThresholdKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            ThresholdKind::Zero => write!(f, "Zero"),
            ThresholdKind::ConstantOffsets(c) => write!(f, "ConstantOffsets({c:?})"),
            ThresholdKind::Custom(v) => write!(f, "Custom({} fns)", v.len()),
        }
    }
}

#[derive(Clone, Debug)]
pub struct ThresholdSpec {
    pub kind: ThresholdKind,
    /// Bounds `xi_i` with `|zeta_i(x)| < xi_i`.
    pub bounds: Vec<f64>,
}

impl ThresholdSpec {
    pub fn zero(n: usize) -> Self {
        ThresholdSpec { kind: ThresholdKind::Zero, bounds: vec![0.0; n] }
    }

    pub fn constant_offsets(offsets: Vec<f64>) -> Self {
        let bounds = offsets.iter().map(|c| c.abs() + 1e-12).collect();
        ThresholdSpec { kind: ThresholdKind::ConstantOffsets(offsets), bounds }
    }

    pub fn zeta(&self, i: usize, x: &[f64]) -> f64 {
        match &self.kind {
            ThresholdKind::Zero => 0.0,
            ThresholdKind::ConstantOffsets(c) => c[i],
            ThresholdKind::Custom(fns) => fns[i](x),
        }
    }

    pub fn max_bound(&self) -> f64 {
        self.bounds.iter().cloned().fold(0.0, f64::max)
    }
}

// ---------------------------------------------------------------------------
// Jump rule
// ---------------------------------------------------------------------------

/// The pulse law applied to non-firing oscillators when a firing occurs.
#[derive(Clone, Debug)]
pub enum JumpRule {
    /// `x_i += epsilon + epsilon_i`, reset if the incremented value reaches
    /// the threshold.
    Standard { epsilon: f64, epsilon_i: Vec<f64> },
    /// Variant (2'): the reset test uses `epsilon + epsilon_i` while the
    /// increment uses `bar_epsilon + epsilon_i`.
    BarEpsilon { epsilon: f64, bar_epsilon: f64, epsilon_i: Vec<f64> },
    /// Generalized simultaneous-firing law: receiver `p` gets
    /// `epsilon + sum_{s in firers} matrix[p][s]` as one increment.
    Pairwise { epsilon: f64, matrix: Vec<Vec<f64>> },
}

impl JumpRule {
    pub fn standard(epsilon: f64, n: usize) -> Self {
        JumpRule::Standard { epsilon, epsilon_i: vec![0.0; n] }
    }

    pub fn epsilon(&self) -> f64 {
        match self {
            JumpRule::Standard { epsilon, .. }
            | JumpRule::BarEpsilon { epsilon, .. }
            | JumpRule::Pairwise { epsilon, .. } => *epsilon,
        }
    }

    /// The amount added to receiver `i`'s state.
    pub fn increment(&self, i: usize, firing_set: &[usize]) -> f64 {
        match self {
            JumpRule::Standard { epsilon, epsilon_i } => epsilon + epsilon_i[i],
            JumpRule::BarEpsilon { bar_epsilon, epsilon_i, .. } => bar_epsilon + epsilon_i[i],
            JumpRule::Pairwise { epsilon, matrix } => {
                epsilon + firing_set.iter().map(|&s| matrix[i][s]).sum::<f64>()
            }
        }
    }

    /// The amount used in the reset test `x_i + test >= 1 + zeta_i(x)`.
    pub fn reset_test_increment(&self, i: usize, firing_set: &[usize]) -> f64 {
        match self {
            JumpRule::Standard { epsilon, epsilon_i }
            | JumpRule::BarEpsilon { epsilon, epsilon_i, .. } => epsilon + epsilon_i[i],
            JumpRule::Pairwise { epsilon, matrix } => {
                epsilon + firing_set.iter().map(|&s| matrix[i][s]).sum::<f64>()
            }
        }
    }
}

// ---------------------------------------------------------------------------
// State and model
// ---------------------------------------------------------------------------

/// A time-stamped coordinate vector.
#[derive(Clone, Debug, PartialEq)]
pub struct State {
    pub t: f64,
    pub x: Vec<f64>,
}

impl State {
    pub fn new(t: f64, x: Vec<f64>) -> Self {
        State { t, x }
    }
}

/// Full specification of an `n`-oscillator ensemble. Immutable after
/// construction and safe to share across workers.
#[derive(Clone, Debug)]
pub struct EnsembleModel {
    pub n: usize,
    pub flow: FreeFlow,
    pub coupling: CouplingSpec,
    pub thresholds: ThresholdSpec,
    pub jump: JumpRule,
}

/// Outcome of applying a firing jump.
#[derive(Clone, Debug)]
pub struct JumpOutcome {
    pub state: State,
    /// Receivers pushed to threshold by the pulse; they reset but emit no
    /// further pulse.
    pub absorbed: Vec<usize>,
}

impl EnsembleModel {
    pub fn new(
        n: usize,
        mut flow: FreeFlow,
        coupling: CouplingSpec,
        thresholds: ThresholdSpec,
        jump: JumpRule,
    ) -> Result<Self> {
        if n == 0 {
            return Err(Error::InvalidParameter("n must be positive".into()));
        }
        if coupling.bounds.len() != n || thresholds.bounds.len() != n {
            return Err(Error::InvalidParameter(
                "coupling/threshold bounds must have length n".into(),
            ));
        }
        let domain_upper = 1.0 + thresholds.max_bound();
        flow.rebound(domain_upper);
        let model = EnsembleModel { n, flow, coupling, thresholds, jump };
        model.check_jump_positivity()?;
        Ok(model)
    }

    fn check_jump_positivity(&self) -> Result<()> {
        match &self.jump {
            JumpRule::Standard { epsilon, epsilon_i } => {
                if *epsilon <= 0.0 {
                    return Err(Error::InvalidParameter(format!("epsilon must be positive, got {epsilon}")));
                }
                for (i, ei) in epsilon_i.iter().enumerate() {
                    if epsilon + ei <= 0.0 {
                        return Err(Error::InvalidParameter(format!(
                            "epsilon + epsilon_{i} = {} must be positive",
                            epsilon + ei
                        )));
                    }
                }
            }
            JumpRule::BarEpsilon { epsilon, bar_epsilon, epsilon_i } => {
                if *epsilon <= 0.0 || *bar_epsilon <= 0.0 {
                    return Err(Error::InvalidParameter("epsilon and bar_epsilon must be positive".into()));
                }
                for (i, ei) in epsilon_i.iter().enumerate() {
                    if bar_epsilon + ei <= 0.0 {
                        return Err(Error::InvalidParameter(format!(
                            "bar_epsilon + epsilon_{i} = {} must be positive",
                            bar_epsilon + ei
                        )));
                    }
                }
            }
            JumpRule::Pairwise { epsilon, matrix } => {
                if *epsilon <= 0.0 {
                    return Err(Error::InvalidParameter(format!("epsilon must be positive, got {epsilon}")));
                }
                if matrix.len() != self.n || matrix.iter().any(|r| r.len() != self.n) {
                    return Err(Error::InvalidParameter("pairwise matrix must be n x n".into()));
                }
                // epsilon + sum over any firing subset must stay positive.
                // Exhaustive for small n, sampled by the sum of negative
                // entries otherwise.
                for p in 0..self.n {
                    let worst: f64 = matrix[p]
                        .iter()
                        .enumerate()
                        .filter(|&(s, &v)| s != p && v < 0.0)
                        .map(|(_, &v)| v)
                        .sum();
                    if epsilon + worst <= 0.0 {
                        return Err(Error::InvalidParameter(format!(
                            "epsilon + sum of pairwise perturbations for receiver {p} can reach {}",
                            epsilon + worst
                        )));
                    }
                }
            }
        }
        Ok(())
    }

    /// The right-hand side `x_i' = f(x_i) + phi_i(x)`.
    pub fn flow_rhs(&self, x: &[f64]) -> Vec<f64> {
        let mut dx = vec![0.0; self.n];
        self.flow_rhs_into(x, &mut dx);
        dx
    }

    pub fn flow_rhs_into(&self, x: &[f64], dx: &mut [f64]) {
        for i in 0..self.n {
            dx[i] = self.flow.eval(x[i]) + self.coupling.eval(i, x);
        }
    }

    /// The firing surface `1 + zeta_i(x)` for oscillator `i`.
    pub fn threshold_value(&self, i: usize, x: &[f64]) -> f64 {
        1.0 + self.thresholds.zeta(i, x)
    }

    pub fn in_domain(&self, x: &[f64], tol: f64) -> bool {
        x.iter()
            .enumerate()
            .all(|(i, &xi)| xi >= -tol && xi <= self.threshold_value(i, x) + tol)
    }

    pub fn check_in_domain(&self, state: &State, tol: f64) -> Result<()> {
        for (i, &xi) in state.x.iter().enumerate() {
            if xi < -tol || xi > self.threshold_value(i, &state.x) + tol {
                return Err(Error::OutsideDomain { t: state.t, index: i, value: xi });
            }
        }
        Ok(())
    }

    /// Apply the firing jump for `firing_set` (oscillators at threshold).
    ///
    /// Firers reset to zero; each receiver gets exactly one increment; a
    /// receiver whose reset test passes also resets and is reported as
    /// absorbed, without triggering further increments.
    pub fn apply_firing(&self, state: &State, firing_set: &[usize]) -> Result<JumpOutcome> {
        if firing_set.is_empty() {
            return Err(Error::EmptyFiringSet);
        }
        self.check_in_domain(state, DOMAIN_TOL)?;
        for &j in firing_set {
            let threshold = self.threshold_value(j, &state.x);
            if state.x[j] < threshold - DOMAIN_TOL {
                return Err(Error::NotAtThreshold { index: j, value: state.x[j], threshold });
            }
        }
        Ok(self.apply_firing_unchecked(state, firing_set))
    }

    /// Jump core without the at-threshold precondition. The simulator uses
    /// this to deliver the pending pulse of an initial just-fired state.
    pub(crate) fn apply_firing_unchecked(&self, state: &State, firing_set: &[usize]) -> JumpOutcome {
        let pre = &state.x;
        let mut post = pre.clone();
        let mut absorbed = Vec::new();
        for i in 0..self.n {
            if firing_set.contains(&i) {
                post[i] = 0.0;
                continue;
            }
            let test = pre[i] + self.jump.reset_test_increment(i, firing_set);
            if test >= self.threshold_value(i, pre) - DOMAIN_TOL {
                post[i] = 0.0;
                absorbed.push(i);
            } else {
                post[i] = pre[i] + self.jump.increment(i, firing_set);
            }
        }
        JumpOutcome { state: State::new(state.t, post), absorbed }
    }

    /// Maximum threshold perturbation bound, `max_i xi_i`.
    pub fn max_xi(&self) -> f64 {
        self.thresholds.max_bound()
    }
}

// ---------------------------------------------------------------------------
// Validation report
// ---------------------------------------------------------------------------

#[derive(Clone, Debug)]
pub struct CheckResult {
    pub name: String,
    pub passed: bool,
    /// Witnessing sample on failure.
    pub witness: Option<String>,
}

#[derive(Clone, Debug, Default)]
pub struct ValidationReport {
    pub checks: Vec<CheckResult>,
    pub notes: Vec<String>,
}

impl ValidationReport {
    pub fn all_passed(&self) -> bool {
        self.checks.iter().all(|c| c.passed)
    }

    fn push(&mut self, name: &str, passed: bool, witness: Option<String>) {
        self.checks.push(CheckResult { name: name.into(), passed, witness });
    }
}

impl EnsembleModel {
    /// Report-only check of the standing assumptions: pulse positivity,
    /// flow positivity and bounds (dense sampling), `max_i mu_i < mu`,
    /// coupling and threshold bounds (sampled).
    pub fn validate(&self) -> ValidationReport {
        let mut report = ValidationReport::default();
        let domain_upper = 1.0 + self.max_xi();

        report.push("epsilon + epsilon_i > 0", self.check_jump_positivity().is_ok(), None);

        if let FlowKind::Leaky { s, gamma } = self.flow.kind {
            let kappa = s / gamma;
            report.push(
                "kappa = S/gamma > 1",
                kappa > 1.0,
                (kappa <= 1.0).then(|| format!("kappa = {kappa}")),
            );
        }
        if let FlowKind::Quadratic { c } = self.flow.kind {
            report.push("c > 0", c > 0.0, (c <= 0.0).then(|| format!("c = {c}")));
        }

        // mu <= f <= M on [0, 1 + max xi], dense sampling.
        let samples = 2000;
        let mut bounds_ok = true;
        let mut positive_ok = true;
        let mut witness = None;
        for k in 0..=samples {
            let s = domain_upper * k as f64 / samples as f64;
            let fs = self.flow.eval(s);
            if fs <= 0.0 {
                positive_ok = false;
                witness = Some(format!("f({s}) = {fs}"));
            }
            if fs < self.flow.lower - 1e-12 || fs > self.flow.upper + 1e-12 {
                bounds_ok = false;
                witness = Some(format!("f({s}) = {fs} outside [{}, {}]", self.flow.lower, self.flow.upper));
            }
        }
        report.push("f positive on domain", positive_ok, witness.clone());
        report.push("mu <= f <= M on domain", bounds_ok, witness);

        report.push(
            "max mu_i < mu",
            self.coupling.max_bound() < self.flow.lower,
            (self.coupling.max_bound() >= self.flow.lower).then(|| {
                format!("max mu_i = {}, mu = {}", self.coupling.max_bound(), self.flow.lower)
            }),
        );

        // |phi_i| < mu_i and |zeta_i| < xi_i on sampled states.
        let mut rng = ChaCha8Rng::seed_from_u64(0x1f1e);
        let mut phi_ok = true;
        let mut zeta_ok = true;
        let mut phi_witness = None;
        let mut zeta_witness = None;
        for _ in 0..500 {
            let x: Vec<f64> = (0..self.n).map(|_| rng.gen::<f64>() * domain_upper).collect();
            for i in 0..self.n {
                let phi = self.coupling.eval(i, &x);
                if phi.abs() > self.coupling.bounds[i] {
                    phi_ok = false;
                    phi_witness = Some(format!("|phi_{i}| = {} > {}", phi.abs(), self.coupling.bounds[i]));
                }
                let zeta = self.thresholds.zeta(i, &x);
                if zeta.abs() > self.thresholds.bounds[i] {
                    zeta_ok = false;
                    zeta_witness = Some(format!("|zeta_{i}| = {} > {}", zeta.abs(), self.thresholds.bounds[i]));
                }
            }
        }
        report.push("|phi_i| < mu_i (sampled)", phi_ok, phi_witness);
        report.push("|zeta_i| < xi_i (sampled)", zeta_ok, zeta_witness);

        // Negative epsilon_i are admissible while epsilon + epsilon_i > 0,
        // but worth flagging.
        if let JumpRule::Standard { epsilon_i, .. } | JumpRule::BarEpsilon { epsilon_i, .. } =
            &self.jump
        {
            if epsilon_i.iter().any(|&e| e < 0.0) {
                report.notes.push("inhibitory-leaning perturbation: some epsilon_i < 0".into());
            }
        }

        report
    }
}

// ---------------------------------------------------------------------------
// Catalog
// ---------------------------------------------------------------------------

/// Two identical Peskin-type leaky oscillators, constant thresholds.
pub fn peskin_pair(s: f64, gamma: f64, epsilon: f64) -> Result<EnsembleModel> {
    check_epsilon(epsilon)?;
    EnsembleModel::new(
        2,
        FreeFlow::leaky(s, gamma)?,
        CouplingSpec::none(2),
        ThresholdSpec::zero(2),
        JumpRule::standard(epsilon, 2),
    )
}

/// Two identical quadratic (type I) oscillators.
pub fn quadratic_pair(c: f64, epsilon: f64) -> Result<EnsembleModel> {
    check_epsilon(epsilon)?;
    EnsembleModel::new(
        2,
        FreeFlow::quadratic(c)?,
        CouplingSpec::none(2),
        ThresholdSpec::zero(2),
        JumpRule::standard(epsilon, 2),
    )
}

/// Two identical oscillators with the three-branch piecewise-linear flow.
pub fn example4_pair(epsilon: f64) -> Result<EnsembleModel> {
    check_epsilon(epsilon)?;
    EnsembleModel::new(
        2,
        FreeFlow::piecewise_linear(),
        CouplingSpec::none(2),
        ThresholdSpec::zero(2),
        JumpRule::standard(epsilon, 2),
    )
}

/// The cross-coupled pair `x_1' = S - gamma x_1 + beta x_2` (and
/// symmetrically).
pub fn cross_coupled_pair(s: f64, gamma: f64, beta: f64, epsilon: f64) -> Result<EnsembleModel> {
    check_epsilon(epsilon)?;
    if beta < 0.0 {
        return Err(Error::InvalidParameter(format!("beta must be nonnegative, got {beta}")));
    }
    if gamma - beta <= 0.0 {
        return Err(Error::InvalidParameter(format!(
            "cross coupling needs beta < gamma for negative eigenvalues (beta = {beta}, gamma = {gamma})"
        )));
    }
    EnsembleModel::new(
        2,
        FreeFlow::leaky(s, gamma)?,
        CouplingSpec::cross_pair(beta, 1.0),
        ThresholdSpec::zero(2),
        JumpRule::standard(epsilon, 2),
    )
}

/// The 100-oscillator style random ensemble: flows
/// `(3 + 0.01 mu_i) - (2 + 0.01 zeta_i) x_i` and thresholds
/// `1 + 0.005 xi_i`, with `mu_i`, `zeta_i`, `xi_i` uniform on `[0, 1)`
/// drawn reproducibly from `seed`.
pub fn random_leaky_ensemble(n: usize, epsilon: f64, seed: u64) -> Result<EnsembleModel> {
    check_epsilon(epsilon)?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mu_bar: Vec<f64> = (0..n).map(|_| rng.gen::<f64>()).collect();
    let zeta_bar: Vec<f64> = (0..n).map(|_| rng.gen::<f64>()).collect();
    let xi_bar: Vec<f64> = (0..n).map(|_| rng.gen::<f64>()).collect();

    let offsets: Vec<f64> = mu_bar.iter().map(|m| 0.01 * m).collect();
    let slopes: Vec<f64> = zeta_bar.iter().map(|z| -0.01 * z).collect();
    let thresholds: Vec<f64> = xi_bar.iter().map(|x| 0.005 * x).collect();
    let domain_upper = 1.0 + 0.005;

    EnsembleModel::new(
        n,
        FreeFlow::leaky_on(3.0, 2.0, domain_upper),
        CouplingSpec::linear_self(offsets, slopes, domain_upper),
        ThresholdSpec::constant_offsets(thresholds),
        JumpRule::standard(epsilon, n),
    )
}

fn check_epsilon(epsilon: f64) -> Result<()> {
    if epsilon <= 0.0 || epsilon >= 1.0 {
        return Err(Error::InvalidParameter(format!("epsilon must lie in (0, 1), got {epsilon}")));
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn catalog_leaky_has_expected_kappa_and_thresholds() {
        let m = peskin_pair(2.0, 1.0, 0.2).unwrap();
        assert_eq!(m.flow.kappa(), Some(2.0));
        assert_eq!(m.threshold_value(0, &[0.5, 0.5]), 1.0);
        assert_eq!(m.threshold_value(1, &[0.5, 0.5]), 1.0);
    }

    #[test]
    fn catalog_rejects_bad_parameters() {
        assert!(peskin_pair(0.9, 1.0, 0.2).is_err()); // kappa <= 1
        assert!(quadratic_pair(-1.0, 0.1).is_err());
        assert!(peskin_pair(2.0, 1.0, 0.0).is_err());
        assert!(peskin_pair(2.0, -1.0, 0.2).is_err());
    }

    #[test]
    fn flow_rhs_matches_direct_substitution() {
        let leaky = peskin_pair(2.0, 1.0, 0.2).unwrap();
        assert_eq!(leaky.flow_rhs(&[0.0, 0.0]), vec![2.0, 2.0]);

        let quad = quadratic_pair(1.0, 0.1).unwrap();
        assert_eq!(quad.flow_rhs(&[1.0, 0.0]), vec![2.0, 1.0]);

        let cross = cross_coupled_pair(2.0, 1.0, 0.1, 0.2).unwrap();
        let rhs = cross.flow_rhs(&[0.5, 0.2]);
        assert!((rhs[0] - 1.52).abs() < 1e-15);
        assert!((rhs[1] - 1.85).abs() < 1e-15);
    }

    #[test]
    fn catalog_fidelity_sampled() {
        let quad = quadratic_pair(1.0, 0.1).unwrap();
        let ex4 = example4_pair(0.1).unwrap();
        let leaky = peskin_pair(1.5, 1.0, 0.08).unwrap();
        for k in 0..1000 {
            let s = k as f64 / 999.0;
            assert_eq!(quad.flow.eval(s), s * s + 1.0);
            assert_eq!(leaky.flow.eval(s), 1.5 - s);
            let expect = if s <= 1.0 / 3.0 {
                4.0 - 3.0 * s
            } else if s <= 2.0 / 3.0 {
                3.0
            } else {
                4.0 - 3.0 * (s - 2.0 / 3.0)
            };
            assert_eq!(ex4.flow.eval(s), expect);
        }
    }

    #[test]
    fn random_ensemble_reproducible_and_in_bounds() {
        let a = random_leaky_ensemble(100, 0.08, 42).unwrap();
        let b = random_leaky_ensemble(100, 0.08, 42).unwrap();
        let x = vec![0.5; 100];
        for i in 0..100 {
            assert_eq!(a.flow_rhs(&x)[i], b.flow_rhs(&x)[i]);
            let th = a.threshold_value(i, &x);
            assert!((1.0..1.005).contains(&th), "threshold {th}");
            // rhs = (3 + 0.01 mu) - (2 + 0.01 zeta) * 0.5 with mu, zeta in [0, 1)
            let rhs = a.flow_rhs(&x)[i];
            assert!(rhs > 2.0 - 0.005 && rhs < 2.01 + 1e-9, "rhs {rhs}");
        }
        let c = random_leaky_ensemble(100, 0.08, 43).unwrap();
        assert_ne!(a.flow_rhs(&x), c.flow_rhs(&x));
    }

    #[test]
    fn threshold_value_examples() {
        let m = peskin_pair(2.0, 1.0, 0.2).unwrap();
        assert_eq!(m.threshold_value(0, &[0.3, 0.4]), 1.0);
        let custom = EnsembleModel::new(
            2,
            FreeFlow::leaky(2.0, 1.0).unwrap(),
            CouplingSpec::none(2),
            ThresholdSpec {
                kind: ThresholdKind::Custom(vec![
                    Arc::new(|x: &[f64]| 0.01 * x[1]),
                    Arc::new(|x: &[f64]| 0.01 * x[0]),
                ]),
                bounds: vec![0.011, 0.011],
            },
            JumpRule::standard(0.2, 2),
        )
        .unwrap();
        assert!((custom.threshold_value(0, &[0.0, 0.5]) - 1.005).abs() < 1e-15);
    }

    #[test]
    fn apply_firing_standard() {
        let m = peskin_pair(2.0, 1.0, 0.3).unwrap();
        let out = m.apply_firing(&State::new(0.0, vec![1.0, 0.5]), &[0]).unwrap();
        assert_eq!(out.state.x, vec![0.0, 0.8]);
        assert!(out.absorbed.is_empty());
    }

    #[test]
    fn apply_firing_absorption() {
        let m = peskin_pair(2.0, 1.0, 0.08).unwrap();
        let out = m.apply_firing(&State::new(0.0, vec![1.0, 0.95]), &[0]).unwrap();
        assert_eq!(out.state.x, vec![0.0, 0.0]);
        assert_eq!(out.absorbed, vec![1]);
    }

    #[test]
    fn apply_firing_pairwise_single_increment() {
        let matrix = vec![
            vec![0.0, 0.0, 0.0],
            vec![0.0, 0.0, 0.0],
            vec![0.02, 0.02, 0.0],
        ];
        let m = EnsembleModel::new(
            3,
            FreeFlow::leaky(2.0, 1.0).unwrap(),
            CouplingSpec::none(3),
            ThresholdSpec::zero(3),
            JumpRule::Pairwise { epsilon: 0.1, matrix },
        )
        .unwrap();
        let out = m.apply_firing(&State::new(0.0, vec![1.0, 1.0, 0.5]), &[0, 1]).unwrap();
        // One increment despite two firers: 0.5 + 0.1 + 0.02 + 0.02.
        assert!((out.state.x[2] - 0.64).abs() < 1e-15);
        assert_eq!(&out.state.x[..2], &[0.0, 0.0]);
    }

    #[test]
    fn apply_firing_rejects_bad_input() {
        let m = peskin_pair(2.0, 1.0, 0.2).unwrap();
        assert!(matches!(
            m.apply_firing(&State::new(0.0, vec![1.0, 0.5]), &[]),
            Err(Error::EmptyFiringSet)
        ));
        assert!(m.apply_firing(&State::new(0.0, vec![0.5, 0.5]), &[0]).is_err());
        assert!(m.apply_firing(&State::new(0.0, vec![1.0, 1.7]), &[0]).is_err());
    }

    #[test]
    fn bar_epsilon_reset_test_uses_epsilon_not_bar() {
        let m = EnsembleModel::new(
            2,
            FreeFlow::leaky(2.0, 1.0).unwrap(),
            CouplingSpec::none(2),
            ThresholdSpec::zero(2),
            JumpRule::BarEpsilon { epsilon: 0.3, bar_epsilon: 0.1, epsilon_i: vec![0.0, 0.0] },
        )
        .unwrap();
        // Reset test with epsilon = 0.3: 0.75 + 0.3 >= 1 fires.
        let out = m.apply_firing(&State::new(0.0, vec![1.0, 0.75]), &[0]).unwrap();
        assert_eq!(out.state.x, vec![0.0, 0.0]);
        // Increment with bar_epsilon = 0.1 when below the test.
        let out = m.apply_firing(&State::new(0.0, vec![1.0, 0.5]), &[0]).unwrap();
        assert!((out.state.x[1] - 0.6).abs() < 1e-15);
    }

    #[test]
    fn validate_reports() {
        let good = peskin_pair(2.0, 1.0, 0.2).unwrap();
        assert!(good.validate().all_passed());

        // kappa = 0.9 cannot be built through the catalog; build by hand.
        let bad = EnsembleModel {
            n: 2,
            flow: FreeFlow::leaky_on(0.9, 1.0, 1.0),
            coupling: CouplingSpec::none(2),
            thresholds: ThresholdSpec::zero(2),
            jump: JumpRule::standard(0.2, 2),
        };
        let report = bad.validate();
        assert!(!report.all_passed());
        assert!(report.checks.iter().any(|c| c.name.contains("kappa") && !c.passed));

        // Coupling bound exceeding mu.
        let mut over = peskin_pair(2.0, 1.0, 0.2).unwrap();
        over.coupling.bounds = vec![2.0 * over.flow.lower, 0.0];
        let report = over.validate();
        assert!(report.checks.iter().any(|c| c.name.contains("max mu_i") && !c.passed));
    }

    #[test]
    fn non_additivity_of_increments() {
        let matrix = vec![vec![0.0; 4]; 4];
        let _ = matrix;
        let m = EnsembleModel::new(
            4,
            FreeFlow::leaky(2.0, 1.0).unwrap(),
            CouplingSpec::none(4),
            ThresholdSpec::zero(4),
            JumpRule::standard(0.1, 4),
        )
        .unwrap();
        // Increment of a receiver is epsilon regardless of firing-set size.
        let one = m.apply_firing(&State::new(0.0, vec![1.0, 0.3, 0.3, 1.0]), &[0]).unwrap();
        let two = m.apply_firing(&State::new(0.0, vec![1.0, 0.3, 0.3, 1.0]), &[0, 3]).unwrap();
        assert_eq!(one.state.x[1], two.state.x[1]);
        assert!((one.state.x[1] - 0.4).abs() < 1e-15);
    }
}
