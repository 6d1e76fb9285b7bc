//! The acceptance-verification suite: twelve numbered criteria covering map
//! equivalence, fixed-point formulas, synchronization structure, timing
//! windows, perturbation bounds, the ensemble experiment, and the monotone
//! reduction. Shared by the `verify` CLI command and the acceptance tests.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::Serialize;

use crate::flow::IntegratorConfig;
use crate::map::{
    kamke_check, perturbation_bound, sync_window_pair, FiringMap, Period2, PhiInputs,
};
use crate::model::{
    peskin_pair, quadratic_pair, CouplingSpec, EnsembleModel, FreeFlow, JumpRule, ThresholdSpec,
};
use crate::sim::{
    pair_deviations, replicate_ensemble_experiment, run, sync_event_index, sync_time, StopRule,
};
use crate::Result;

#[derive(Clone, Debug, Serialize)]
pub struct CriterionResult {
    pub id: usize,
    pub name: String,
    pub passed: bool,
    pub details: Vec<String>,
}

impl CriterionResult {
    fn new(id: usize, name: &str) -> Self {
        CriterionResult { id, name: name.into(), passed: true, details: Vec::new() }
    }

    fn check(&mut self, ok: bool, detail: String) {
        if !ok {
            self.passed = false;
        }
        self.details.push(format!("[{}] {detail}", if ok { "ok" } else { "FAIL" }));
    }

    pub fn summary_line(&self) -> String {
        format!(
            "criterion {:2} {:4} {}",
            self.id,
            if self.passed { "PASS" } else { "FAIL" },
            self.name
        )
    }
}

/// Run every criterion in order. Criteria 9 and 10 share one set of runs.
pub fn run_all(cfg: &IntegratorConfig) -> Result<Vec<CriterionResult>> {
    let mut out = Vec::new();
    out.push(criterion1(cfg)?);
    out.push(criterion2(cfg)?);
    out.push(criterion3()?);
    out.push(criterion4()?);
    out.push(criterion5(cfg)?);
    out.push(criterion6(cfg)?);
    out.push(criterion7(cfg)?);
    out.push(criterion8(cfg)?);
    let (c9, c10) = criterion9_and_10(cfg)?;
    out.push(c9);
    out.push(c10);
    out.push(criterion11(cfg)?);
    out.push(criterion12()?);
    Ok(out)
}

fn grid(points: usize, top: f64) -> impl Iterator<Item = f64> {
    (1..=points).map(move |k| top * k as f64 / (points + 1) as f64)
}

/// 1. Numeric vs closed-form leaky map on 1000 grid points, two parameter
///    sets, max difference 1e-6.
pub fn criterion1(cfg: &IntegratorConfig) -> Result<CriterionResult> {
    let mut r = CriterionResult::new(1, "closed-form map equivalence (leaky)");
    for (kappa, eps) in [(2.0, 0.2), (1.5, 0.08)] {
        let flow = FreeFlow::leaky(kappa, 1.0)?;
        let numeric = FiringMap::numeric_from_flow(&flow, eps, cfg)?;
        let vals: Vec<(f64, f64)> = grid(1000, 1.0 - eps)
            .collect::<Vec<_>>()
            .into_par_iter()
            .map(|v| (v, numeric.eval(v)))
            .collect();
        let mut worst = 0.0f64;
        for (v, num) in vals {
            let closed = kappa * (1.0 - (v + eps)) / (kappa - (v + eps));
            worst = worst.max((num - closed).abs());
        }
        r.check(worst <= 1e-6, format!("kappa={kappa} eps={eps}: max |numeric - closed| = {worst:.3e}"));
    }
    Ok(r)
}

/// 2. Same for the quadratic map at (c, eps) = (1, 0.1).
pub fn criterion2(cfg: &IntegratorConfig) -> Result<CriterionResult> {
    let mut r = CriterionResult::new(2, "closed-form map equivalence (quadratic)");
    let (c, eps) = (1.0, 0.1);
    let flow = FreeFlow::quadratic(c)?;
    let numeric = FiringMap::numeric_from_flow(&flow, eps, cfg)?;
    let vals: Vec<(f64, f64)> = grid(1000, 1.0 - eps)
        .collect::<Vec<_>>()
        .into_par_iter()
        .map(|v| (v, numeric.eval(v)))
        .collect();
    let mut worst = 0.0f64;
    for (v, num) in vals {
        let closed = c * (1.0 - v - eps) / (c + v + eps);
        worst = worst.max((num - closed).abs());
    }
    r.check(worst <= 1e-6, format!("c={c} eps={eps}: max |numeric - closed| = {worst:.3e}"));
    Ok(r)
}

/// 3. Computed fixed points match the closed formulas to 1e-8.
pub fn criterion3() -> Result<CriterionResult> {
    let mut r = CriterionResult::new(3, "fixed-point formulas");
    for (kappa, eps) in [(2.0, 0.2), (1.5, 0.08)] {
        let map = FiringMap::closed_leaky(kappa, eps)?;
        let v = map.fixed_point()?;
        let exact = (kappa - eps / 2.0) - (kappa * kappa - kappa + eps * eps / 4.0).sqrt();
        r.check(
            (v - exact).abs() <= 1e-8,
            format!("leaky kappa={kappa} eps={eps}: v* = {v:.12} vs formula {exact:.12}"),
        );
    }
    let (c, eps) = (1.0, 0.1);
    let map = FiringMap::closed_quadratic(c, eps)?;
    let v = map.fixed_point()?;
    let exact = ((c + eps / 2.0) * (c + eps / 2.0) + c * (1.0 - eps)).sqrt() - (c + eps / 2.0);
    r.check(
        (v - exact).abs() <= 1e-8,
        format!("quadratic c={c} eps={eps}: v* = {v:.12} vs formula {exact:.12}"),
    );
    Ok(r)
}

/// 4. Structure of the piecewise-linear pair map at eps = 0.1: fixed point,
///    period-2 limits, 2-cycle invariance, and the sync/non-sync halves.
pub fn criterion4() -> Result<CriterionResult> {
    let mut r = CriterionResult::new(4, "piecewise-linear map structure");
    let eps = 0.1;
    let map = FiringMap::closed_example4(eps)?;

    let v_star = map.fixed_point()?;
    r.check(
        (v_star - (1.0 - eps) / 2.0).abs() <= 1e-8,
        format!("v* = {v_star:.12} vs (1-eps)/2 = {:.12}", (1.0 - eps) / 2.0),
    );

    // Limits of the a-subsequences vs the stated inner cycle.
    let (v2, vh) = match map.period2_points()? {
        Period2::Cycle { v_star2, v_hat } => (v_star2, v_hat),
        Period2::Degenerate { v_star } => (v_star, v_star),
    };
    r.check(
        (v2 - 1.0 / 3.0).abs() <= 1e-8,
        format!("v** = {v2:.12} vs 1/3 = {:.12}", 1.0 / 3.0),
    );
    r.check(
        (vh - (2.0 / 3.0 - eps)).abs() <= 1e-8,
        format!("v_hat = {vh:.12} vs 2/3 - eps = {:.12}", 2.0 / 3.0 - eps),
    );

    // The inner 2-cycle {1/3, 2/3 - eps} is invariant over 100 iterations.
    let mut a = 1.0 / 3.0;
    let mut b = 2.0 / 3.0 - eps;
    for _ in 0..100 {
        a = map.iterate(a, 2);
        b = map.iterate(b, 2);
    }
    r.check(
        (a - 1.0 / 3.0).abs() <= 1e-8 && (b - (2.0 / 3.0 - eps)).abs() <= 1e-8,
        format!("2-cycle invariance after 100 double-iterations: ({a:.12}, {b:.12})"),
    );

    // Sampled classification relative to the computed period-2 limits.
    let (lo, hi) = (v2.min(vh), v2.max(vh));
    let mut outside_ok = 0;
    for j in 0..50 {
        let u = (j as f64 + 0.5) / 50.0;
        // Alternate below lo and above hi, away from the 1e-6 margins.
        let v = if j % 2 == 0 {
            (lo - 1e-6) * u
        } else {
            hi + 1e-6 + (1.0 - hi - 2e-6) * u
        };
        if map.classify(v, 500).is_some() {
            outside_ok += 1;
        }
    }
    r.check(outside_ok == 50, format!("{outside_ok}/50 outside [v**, v_hat] reach the band"));

    let mut inside_ok = 0;
    let mut j_used = 0;
    let mut j = 0;
    while j_used < 50 {
        let u = (j as f64 + 0.5) / 60.0;
        j += 1;
        let v = lo + 1e-6 + (hi - lo - 2e-6) * u;
        if (v - v_star).abs() < 1e-6 {
            continue;
        }
        j_used += 1;
        if map.classify(v, 500).is_none() {
            inside_ok += 1;
        }
    }
    r.check(inside_ok == 50, format!("{inside_ok}/50 strictly inside (v**, v_hat) stay trapped"));
    Ok(r)
}

/// 5. The quadratic pair does not synchronize: (A2) fails and 200 random
///    starts never co-fire over 500 system firings.
pub fn criterion5(cfg: &IntegratorConfig) -> Result<CriterionResult> {
    let mut r = CriterionResult::new(5, "quadratic pair non-synchronization");
    let eps = 0.1;
    let map = FiringMap::closed_quadratic(1.0, eps)?;
    let cond = map.check_conditions();
    r.check(
        !cond.a2 && (cond.eta - 0.9 / 1.1).abs() <= 1e-6,
        format!("A2 = {} with eta = {:.9} < {}", cond.a2, cond.eta, 1.0 - eps),
    );

    let model = quadratic_pair(1.0, eps)?;
    let mut rng = ChaCha8Rng::seed_from_u64(0x51ad);
    let starts: Vec<f64> = (0..200)
        .map(|_| {
            let mut v = 0.0;
            while v <= 0.0 {
                v = rng.gen::<f64>() * (1.0 - eps);
            }
            v
        })
        .collect();
    let co_fired: usize = starts
        .par_iter()
        .map(|&v| {
            let log = run(&model, &[0.0, v], StopRule::max_events(500), cfg)
                .expect("quadratic pair run");
            usize::from(log.events.iter().any(|e| e.is_full(2)))
        })
        .sum();
    r.check(co_fired == 0, format!("{co_fired}/200 random starts ever co-fired (500 firings each)"));
    Ok(r)
}

/// 6. Sync-time windows for the leaky pair (kappa = 2, eps = 0.2): sampled
///    starts in S_m synchronize within [(m/2) T~, m T].
pub fn criterion6(cfg: &IntegratorConfig) -> Result<CriterionResult> {
    let mut r = CriterionResult::new(6, "pair synchronization-time windows");
    let (kappa, eps) = (2.0, 0.2);
    let model = peskin_pair(kappa, 1.0, eps)?;
    let map = FiringMap::closed_leaky(kappa, eps)?;
    let v_star = map.fixed_point()?;
    let t_nat = std::f64::consts::LN_2;
    let t_tilde = (kappa / (kappa - v_star)).ln();
    let partition = map.sync_partition(12)?;
    let slack = cfg.event_tol;

    for m in 1..=8 {
        let region = partition
            .regions
            .iter()
            .find(|reg| reg.k == m)
            .copied()
            .ok_or_else(|| crate::Error::Config(format!("no region S_{m}")))?;
        let (lo, hi) = sync_window_pair(m, t_nat, t_tilde);
        let samples: Vec<f64> =
            (0..20).map(|j| region.lo + (region.hi - region.lo) * (j as f64 + 0.5) / 20.0).collect();
        let failures: Vec<String> = samples
            .par_iter()
            .map(|&v| {
                let log = run(&model, &[0.0, v], StopRule::max_events(m + 4), cfg)
                    .expect("leaky pair run");
                match sync_time(&log, 1) {
                    Some(t) if t >= lo - slack && t <= hi + slack => String::new(),
                    Some(t) => format!("v={v:.6}: sync at {t:.9} outside [{lo:.9}, {hi:.9}]"),
                    None => format!("v={v:.6}: no sync within {} events", m + 4),
                }
            })
            .filter(|s| !s.is_empty())
            .collect();
        r.check(
            failures.is_empty(),
            format!(
                "m={m}: 20 samples in S_{m} within [{lo:.6}, {hi:.6}]{}",
                if failures.is_empty() { String::new() } else { format!("; {}", failures.join("; ")) }
            ),
        );
    }
    Ok(r)
}

/// 7. Simulated identical pairs reproduce the map recursion to 1e-6.
pub fn criterion7(cfg: &IntegratorConfig) -> Result<CriterionResult> {
    let mut r = CriterionResult::new(7, "map consistency under simulation");
    let cases: Vec<(&str, EnsembleModel, FiringMap, Vec<f64>)> = vec![
        (
            "leaky kappa=2 eps=0.2",
            peskin_pair(2.0, 1.0, 0.2)?,
            FiringMap::closed_leaky(2.0, 0.2)?,
            vec![0.55, 0.62, 0.7],
        ),
        (
            "leaky kappa=1.5 eps=0.08",
            peskin_pair(1.5, 1.0, 0.08)?,
            FiringMap::closed_leaky(1.5, 0.08)?,
            vec![0.5, 0.75],
        ),
        (
            "quadratic c=1 eps=0.1",
            quadratic_pair(1.0, 0.1)?,
            FiringMap::closed_quadratic(1.0, 0.1)?,
            vec![0.3, 0.6],
        ),
    ];
    for (name, model, map, starts) in cases {
        let mut worst = 0.0f64;
        let mut steps = 0usize;
        for v in starts {
            let log = run(&model, &[0.0, v], StopRule::max_events(40), cfg)?;
            let devs = pair_deviations(&log, &map, 0, 1, |_, _, _| 0.0);
            steps += devs.len();
            worst = worst.max(devs.iter().map(|d| d.deviation).fold(0.0, f64::max));
        }
        r.check(
            steps > 0 && worst <= 1e-6,
            format!("{name}: max |v_next - L(v)| = {worst:.3e} over {steps} steps"),
        );
    }
    Ok(r)
}

/// 8. Deviation-bound audit: observed pair deviations stay below the certified
///    Phi for perturbed pairs, and vanish (to integration accuracy) for the
///    identical pair.
pub fn criterion8(cfg: &IntegratorConfig) -> Result<CriterionResult> {
    let mut r = CriterionResult::new(8, "perturbation bound audit");
    let (s, gamma, eps) = (2.0, 1.0, 0.2);
    let map = FiringMap::closed_leaky(s / gamma, eps)?;

    // Identical pair: deviations at integration accuracy.
    let identical = peskin_pair(s, gamma, eps)?;
    let mut worst = 0.0f64;
    for v in [0.3, 0.55, 0.72] {
        let log = run(&identical, &[0.0, v], StopRule::max_events(30), cfg)?;
        let devs = pair_deviations(&log, &map, 0, 1, |_, _, _| 0.0);
        worst = worst.max(devs.iter().map(|d| d.deviation).fold(0.0, f64::max));
    }
    r.check(
        worst <= 10.0 * cfg.rel_tol.max(cfg.abs_tol) * 10.0,
        format!("identical pair: max deviation {worst:.3e} at tolerance scale"),
    );

    // Perturbed pair: coupling, threshold and pulse perturbations at the
    // 1e-3 scale, audited against Phi computed from the logged schedule.
    let offsets = vec![4e-4, -3e-4];
    let slopes = vec![-2e-4, 1e-4];
    let th_offsets = vec![3e-4, -2e-4];
    let perturbed = EnsembleModel::new(
        2,
        FreeFlow::leaky(s, gamma)?,
        CouplingSpec::linear_self(offsets, slopes, 1.0 + 3e-4),
        ThresholdSpec::constant_offsets(th_offsets),
        JumpRule::Standard { epsilon: eps, epsilon_i: vec![1e-4, -1e-4] },
    )?;
    let mu_r = perturbed.coupling.max_bound();
    let xi_r = perturbed.thresholds.max_bound();
    let flow = perturbed.flow.clone();
    let mut audited = 0usize;
    let mut violations = Vec::new();
    for v in [0.3, 0.45, 0.55, 0.65, 0.72] {
        let log = run(&perturbed, &[0.0, v], StopRule::max_events(30), cfg)?;
        let devs = pair_deviations(&log, &map, 0, 1, |t_i, t_bar, thetas| {
            let inp = PhiInputs {
                epsilon: eps,
                mu_r,
                mu_l: mu_r,
                xi_r,
                lipschitz: flow.lipschitz,
                mu: flow.lower,
                big_m: flow.upper,
                t_i,
                thetas: thetas.to_vec(),
                t_bar,
            };
            perturbation_bound(&inp).map(|b| b.phi).unwrap_or(f64::INFINITY)
        });
        audited += devs.len();
        for d in devs {
            if d.deviation > d.phi {
                violations.push(format!(
                    "v={v}: event {} deviation {:.3e} > Phi {:.3e}",
                    d.event_index, d.deviation, d.phi
                ));
            }
        }
    }
    r.check(
        audited > 0 && violations.is_empty(),
        format!(
            "perturbed pair: {audited} steps audited, {} violations{}",
            violations.len(),
            if violations.is_empty() { String::new() } else { format!(": {}", violations.join("; ")) }
        ),
    );
    Ok(r)
}

/// 9 and 10. The 100-oscillator ensemble synchronizes within 100 firings in
///    at least 19 of 20 seeds with non-increasing snapshot cluster counts,
///    and the all-fire pattern persists once reached.
pub fn criterion9_and_10(cfg: &IntegratorConfig) -> Result<(CriterionResult, CriterionResult)> {
    let mut c9 = CriterionResult::new(9, "ensemble synchronization experiment");
    let mut c10 = CriterionResult::new(10, "synchrony persistence");
    let snapshots = [1usize, 21, 42, 63];
    let seeds: Vec<u64> = (0..20).collect();

    let runs: Vec<_> = seeds
        .par_iter()
        .map(|&seed| replicate_ensemble_experiment(seed, 100, 0.08, &snapshots, cfg))
        .collect::<Result<Vec<_>>>()?;

    let mut synced = 0usize;
    let mut monotone_failures = Vec::new();
    let mut persistence_failures = Vec::new();
    for (report, log, _model) in &runs {
        let idx = sync_event_index(log, 3);
        let within_100 = idx.map_or(false, |i| i <= 100);
        if within_100 {
            synced += 1;
            let counts: Vec<usize> = report.snapshots.iter().map(|s| s.cluster_count).collect();
            if !counts.windows(2).all(|w| w[1] <= w[0]) {
                monotone_failures.push(format!("seed {}: counts {:?}", report.seed, counts));
            }
        }
        if let Some(i) = idx {
            let tail = &log.events[i - 1..];
            let trailing = tail.len();
            if trailing < 50 || !tail.iter().all(|e| e.is_full(log.n)) {
                persistence_failures.push(format!(
                    "seed {}: {} trailing events, full = {}",
                    report.seed,
                    trailing,
                    tail.iter().all(|e| e.is_full(log.n))
                ));
            }
        }
    }
    c9.check(synced >= 19, format!("{synced}/20 seeds fully synchronized within 100 firings"));
    c9.check(
        monotone_failures.is_empty(),
        format!(
            "snapshot cluster counts non-increasing in every passing run{}",
            if monotone_failures.is_empty() {
                String::new()
            } else {
                format!("; {}", monotone_failures.join("; "))
            }
        ),
    );
    c10.check(
        persistence_failures.is_empty(),
        format!(
            "all-fire pattern persists (>= 50 events checked) in all synced runs{}",
            if persistence_failures.is_empty() {
                String::new()
            } else {
                format!("; {}", persistence_failures.join("; "))
            }
        ),
    );
    Ok((c9, c10))
}

/// 11. Monotone (Kamke) section: the averaged cross-coupling is type K, the
///     reduced symmetric pair map satisfies (A1)-(A3) at beta = 0.05, and
///     the maps converge to the leaky map as beta -> 0.
pub fn criterion11(cfg: &IntegratorConfig) -> Result<CriterionResult> {
    let mut r = CriterionResult::new(11, "monotone reduction");
    let (s, gamma) = (2.0, 1.0);
    let n = 4;
    let beta = 0.05;
    let g = move |y: &[f64]| {
        s - gamma * y[0] + beta / (n as f64 - 1.0) * y[1..].iter().sum::<f64>()
    };
    let (is_k, eta_bound) = kamke_check(g, n, 128);
    r.check(is_k, format!("type K with partial bound {eta_bound:.6}"));

    // Reduced symmetric pair: y' = G(y, z), z' = G(z, y) with
    // G(y, z) = S - gamma y + beta z.
    let eps = 0.2;
    let reduced = FiringMap::numeric_from_g(move |y, z| s - gamma * y + beta * z, eps, cfg)?;
    let cond = reduced.check_conditions_grid(2000);
    r.check(
        cond.a1 && cond.a2 && cond.a3,
        format!("(A1, A2, A3) = ({}, {}, {}) with eta = {:.9}", cond.a1, cond.a2, cond.a3, cond.eta),
    );

    // beta -> 0 convergence to the leaky map, sup over a grid.
    let leaky = FiringMap::closed_leaky(s / gamma, eps)?;
    let mut sups = Vec::new();
    for b in [1e-1, 1e-2, 1e-3] {
        let map_b = FiringMap::numeric_from_g(move |y, z| s - gamma * y + b * z, eps, cfg)?;
        let sup = grid(300, 1.0 - eps)
            .map(|v| (map_b.eval(v) - leaky.eval(v)).abs())
            .fold(0.0, f64::max);
        sups.push(sup);
    }
    let decreasing = sups.windows(2).all(|w| w[1] < w[0]);
    let shown: Vec<String> = sups.iter().map(|s| format!("{s:.3e}")).collect();
    r.check(
        decreasing && sups[2] <= 1e-2,
        format!("sup norms across beta = 1e-1, 1e-2, 1e-3: [{}]", shown.join(", ")),
    );
    Ok(r)
}

/// 12. Cross-coupled closed map: beta = 0 reduces to the leaky formula to
///     1e-9; (A2) persists for small beta.
pub fn criterion12() -> Result<CriterionResult> {
    let mut r = CriterionResult::new(12, "cross-coupled implicit map");
    let (s, gamma, eps) = (2.0, 1.0, 0.2);
    let kappa = s / gamma;

    let at_zero = FiringMap::closed_cross_coupled(s, gamma, 0.0, eps)?;
    let worst = grid(1000, 1.0 - eps)
        .map(|v| {
            let closed = kappa * (1.0 - (v + eps)) / (kappa - (v + eps));
            (at_zero.eval(v) - closed).abs()
        })
        .fold(0.0, f64::max);
    r.check(worst <= 1e-9, format!("beta=0: max |implicit - leaky| = {worst:.3e}"));

    let mut all_above = true;
    let mut etas = Vec::new();
    for beta in [0.005, 0.01, 0.02, 0.05] {
        let map = FiringMap::closed_cross_coupled(s, gamma, beta, eps)?;
        etas.push((beta, map.eta));
        if map.eta <= 1.0 - eps {
            all_above = false;
        }
    }
    r.check(
        all_above,
        format!(
            "L_beta(0) > {} for beta <= 0.05: {}",
            1.0 - eps,
            etas.iter().map(|(b, e)| format!("beta={b}: {e:.9}")).collect::<Vec<_>>().join(", ")
        ),
    );
    Ok(r)
}
