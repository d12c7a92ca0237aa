//! Intensity-based size predictors.
//!
//! # Self-exciting model with a reaction kernel
//!
//! `λ(t) = p · Σ_i n_i · φ(t - t_i)` where `n_i` is the follower count of the
//! i-th adopter and `φ` is a normalized reaction-time density: constant `c`
//! up to a cutoff `s0`, then a power-law decay `c · (s/s0)^-(1+θ)`.
//! The infectiousness `p` has a closed-form maximum-likelihood estimate and
//! the predicted size integrates the fitted intensity of the observed events.
//!
//! # Reinforced Poisson process
//!
//! `λ(t) = α · f(t; μ, σ) · N(t)` with `f` a log-normal relaxation density
//! and `N(t)` the number of adopters so far. `α` is profiled out in closed
//! form and `(μ, σ)` are found by a safeguarded Newton ascent with
//! finite-difference derivatives and random restarts. Expected growth then
//! follows `N(t') = N(t) · exp(α (F(t') - F(t)))`.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::cascade::{Cascade, EarlyStage};
use crate::error::{Error, Result};
use crate::graph::SocialGraph;
use crate::stats::{norm_cdf, norm_sf};

/// Minimum number of samples above the cutoff for a power-law fit.
pub const MIN_TAIL_SAMPLES: usize = 30;

/// Piecewise constant / power-law reaction-time density, normalized to 1.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ReactionKernel {
    pub s0: f64,
    pub theta: f64,
    pub c: f64,
}

impl ReactionKernel {
    pub fn density(&self, s: f64) -> f64 {
        if s < 0.0 {
            0.0
        } else if s <= self.s0 {
            self.c
        } else {
            self.c * (s / self.s0).powf(-(1.0 + self.theta))
        }
    }

    /// `∫_a^∞ φ(s) ds`.
    pub fn tail(&self, a: f64) -> f64 {
        let a = a.max(0.0);
        let power_mass = self.c * self.s0 / self.theta;
        if a <= self.s0 {
            self.c * (self.s0 - a) + power_mass
        } else {
            power_mass * (a / self.s0).powf(-self.theta)
        }
    }

    /// `∫_0^a φ(s) ds`, computed without subtracting from 1.
    pub fn integral_to(&self, a: f64) -> f64 {
        if a <= 0.0 {
            0.0
        } else if a <= self.s0 {
            self.c * a
        } else {
            let power_mass = self.c * self.s0 / self.theta;
            self.c * self.s0 + power_mass * (1.0 - (a / self.s0).powf(-self.theta))
        }
    }

    /// Inverse CDF: maps `u` in `[0, 1)` to a reaction time.
    pub fn quantile(&self, u: f64) -> f64 {
        let flat_mass = self.c * self.s0;
        if u <= flat_mass {
            u / self.c
        } else {
            let tail = (1.0 - u).max(f64::MIN_POSITIVE);
            self.s0 * (tail * self.theta / flat_mass).powf(-1.0 / self.theta)
        }
    }
}

/// Kernel with `c` chosen so the density integrates to 1:
/// `c = 1 / (s0 · (1 + 1/θ))`.
pub fn kernel_from_theta(theta: f64, s0: f64) -> Result<ReactionKernel> {
    if !(theta > 0.0 && theta.is_finite()) || !(s0 > 0.0 && s0.is_finite()) {
        return Err(Error::invalid(format!(
            "kernel needs theta > 0 and s0 > 0, got theta={theta}, s0={s0}"
        )));
    }
    Ok(ReactionKernel {
        s0,
        theta,
        c: 1.0 / (s0 * (1.0 + 1.0 / theta)),
    })
}

pub fn kernel_cdf_tail(k: &ReactionKernel, a: f64) -> f64 {
    k.tail(a)
}

/// Continuous power-law MLE of `θ` for a density decaying as `s^-(1+θ)`
/// above `s0`: `θ = n / Σ ln(s_i / s0)` over samples strictly above `s0`.
pub fn fit_theta_powerlaw(reaction_times: &[f64], s0: f64) -> Result<f64> {
    if !(s0 > 0.0) {
        return Err(Error::invalid(format!("cutoff must be positive, got {s0}")));
    }
    let mut n = 0usize;
    let mut log_sum = 0.0;
    for &s in reaction_times {
        if s > s0 {
            n += 1;
            log_sum += (s / s0).ln();
        }
    }
    if n < MIN_TAIL_SAMPLES {
        return Err(Error::TooFewTailSamples {
            needed: MIN_TAIL_SAMPLES,
            found: n,
        });
    }
    Ok(n as f64 / log_sum)
}

/// Delay of every non-root adoption behind the earliest adoption among the
/// adopter's followees (root time when none adopted before it). Zero delays
/// are dropped.
pub fn reaction_times(corpus: &[Cascade], g: &SocialGraph) -> Vec<f64> {
    let mut out = Vec::new();
    let mut adopted_at: std::collections::HashMap<u32, f64> = std::collections::HashMap::new();
    for c in corpus {
        adopted_at.clear();
        for e in c.events() {
            if let Some(v) = g.internal_id(&e.node) {
                adopted_at.insert(v, e.time);
            }
        }
        for e in c.events().iter().skip(1) {
            let earliest = g
                .internal_id(&e.node)
                .and_then(|v| {
                    g.followees(v)
                        .iter()
                        .filter_map(|u| adopted_at.get(u).copied())
                        .filter(|&t| t <= e.time)
                        .min_by(|a, b| a.total_cmp(b))
                })
                .unwrap_or(0.0);
            let delay = e.time - earliest;
            if delay > 0.0 {
                out.push(delay);
            }
        }
    }
    out
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SeismicFit {
    pub cascade_id: String,
    pub p_hat: f64,
    pub t_obs: f64,
    /// Follower count of each observed adopter (0 when absent from the graph).
    pub marks: Vec<f64>,
    pub event_times: Vec<f64>,
}

impl SeismicFit {
    pub fn observed_size(&self) -> usize {
        self.event_times.len()
    }
}

pub fn seismic_fit(es: &EarlyStage, g: &SocialGraph, k: &ReactionKernel) -> Result<SeismicFit> {
    let marks: Vec<f64> = es
        .resolve(g)
        .into_iter()
        .map(|v| v.map_or(0.0, |v| g.followers(v).len() as f64))
        .collect();
    seismic_fit_marked(&es.cascade_id, es.times().collect(), marks, es.t_obs, k)
}

/// Closed-form infectiousness estimate
/// `p = N⁺ / Σ_i n_i ∫_0^{t_obs - t_i} φ`, where `N⁺` counts post-root events.
pub fn seismic_fit_marked(
    cascade_id: &str,
    event_times: Vec<f64>,
    marks: Vec<f64>,
    t_obs: f64,
    k: &ReactionKernel,
) -> Result<SeismicFit> {
    if event_times.len() < 2 {
        return Err(Error::invalid(format!(
            "cascade {cascade_id}: infectiousness needs at least 2 events"
        )));
    }
    debug_assert_eq!(event_times.len(), marks.len());
    let exposure: f64 = event_times
        .iter()
        .zip(&marks)
        .map(|(&t, &n)| n * k.integral_to(t_obs - t))
        .sum();
    if exposure <= 0.0 {
        return Err(Error::Untrackable(cascade_id.to_owned()));
    }
    let p_hat = (event_times.len() - 1) as f64 / exposure;
    Ok(SeismicFit {
        cascade_id: cascade_id.to_owned(),
        p_hat,
        t_obs,
        marks,
        event_times,
    })
}

/// Observed size plus the fitted intensity of observed events integrated
/// over `[t_obs, t_prime]`.
pub fn seismic_predict(fit: &SeismicFit, k: &ReactionKernel, t_prime: f64) -> f64 {
    let t_prime = t_prime.max(fit.t_obs);
    let future: f64 = fit
        .event_times
        .iter()
        .zip(&fit.marks)
        .map(|(&t, &n)| n * (k.tail(fit.t_obs - t) - k.tail(t_prime - t)).max(0.0))
        .sum();
    fit.observed_size() as f64 + fit.p_hat * future
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct RppParams {
    pub restarts: usize,
    pub max_iter: usize,
}

impl Default for RppParams {
    fn default() -> Self {
        RppParams {
            restarts: 5,
            max_iter: 100,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RppFit {
    pub cascade_id: String,
    pub alpha: f64,
    pub mu: f64,
    pub sigma: f64,
    pub t_obs: f64,
    pub observed_size: usize,
    pub converged: bool,
    /// Newton iterations of the selected restart.
    pub iterations: usize,
    pub log_likelihood: f64,
}

/// Gradient norm below which a Newton run counts as converged.
pub const RPP_GRAD_TOL: f64 = 1e-6;
pub const RPP_SIGMA_MIN: f64 = 1e-3;
pub const RPP_SIGMA_MAX: f64 = 10.0;
const RPP_SIGMA_INIT: (f64, f64) = (0.1, 5.0);

/// Sufficient statistics of an early stage for the RPP likelihood.
#[derive(Debug, Clone)]
struct RppData {
    /// Event times including the root at index 0.
    times: Vec<f64>,
    /// Indices of events that contribute an intensity term (`t > 0`, not the root).
    terms: Vec<usize>,
    /// `Σ ln N(t_i⁻)` over contributing events.
    log_count_sum: f64,
    t_obs: f64,
}

impl RppData {
    fn new(es: &EarlyStage) -> Result<Self> {
        if es.prefix.len() < 3 {
            return Err(Error::invalid(format!(
                "cascade {}: RPP needs at least 3 events",
                es.cascade_id
            )));
        }
        let times: Vec<f64> = es.times().collect();
        let terms: Vec<usize> = (1..times.len()).filter(|&i| times[i] > 0.0).collect();
        if terms.is_empty() {
            return Err(Error::invalid(format!(
                "cascade {}: no adoption after time 0",
                es.cascade_id
            )));
        }
        let log_count_sum = terms.iter().map(|&i| (i as f64).ln()).sum();
        Ok(RppData {
            times,
            terms,
            log_count_sum,
            t_obs: es.t_obs,
        })
    }

    fn n_plus(&self) -> f64 {
        self.terms.len() as f64
    }

    /// `Σ_j N_j (F(t_{j+1}) - F(t_j))`, with `N_j = j + 1` on the segment after event j.
    fn compensator(&self, mu: f64, sigma: f64) -> f64 {
        let z = |t: f64| {
            if t <= 0.0 {
                f64::NEG_INFINITY
            } else {
                (t.ln() - mu) / sigma
            }
        };
        let mut total = 0.0;
        let mut z_prev = z(self.times[0]);
        for j in 0..self.times.len() - 1 {
            let z_next = z(self.times[j + 1]);
            total += (j + 1) as f64 * lognormal_mass(z_prev, z_next);
            z_prev = z_next;
        }
        total
    }

    fn log_density_sum(&self, mu: f64, sigma: f64) -> f64 {
        let half_ln_2pi = 0.5 * (2.0 * std::f64::consts::PI).ln();
        self.terms
            .iter()
            .map(|&i| {
                let lt = self.times[i].ln();
                let z = (lt - mu) / sigma;
                -lt - sigma.ln() - half_ln_2pi - 0.5 * z * z
            })
            .sum()
    }

    fn profile_alpha(&self, mu: f64, sigma: f64) -> f64 {
        self.n_plus() / self.compensator(mu, sigma)
    }

    fn log_likelihood(&self, alpha: f64, mu: f64, sigma: f64) -> f64 {
        if !(alpha > 0.0 && sigma > 0.0) {
            return f64::NEG_INFINITY;
        }
        self.n_plus() * alpha.ln() + self.log_density_sum(mu, sigma) + self.log_count_sum
            - alpha * self.compensator(mu, sigma)
    }

    fn profile_log_likelihood(&self, mu: f64, sigma: f64) -> f64 {
        if !(sigma > 0.0) {
            return f64::NEG_INFINITY;
        }
        let d = self.compensator(mu, sigma);
        if !(d > 0.0) {
            return f64::NEG_INFINITY;
        }
        let np = self.n_plus();
        np * (np / d).ln() - np + self.log_density_sum(mu, sigma) + self.log_count_sum
    }

    fn mu_bounds(&self) -> (f64, f64) {
        let first_positive = self.times[self.terms[0]];
        (first_positive.ln() - 5.0, self.t_obs.ln() + 5.0)
    }
}

/// Standard normal mass between two z-scores, using the upper tail when
/// both are positive to avoid cancellation.
fn lognormal_mass(z_lo: f64, z_hi: f64) -> f64 {
    if z_hi <= z_lo {
        return 0.0;
    }
    if z_lo > 0.0 {
        norm_sf(z_lo) - norm_sf(z_hi)
    } else {
        norm_cdf(z_hi) - norm_cdf(z_lo)
    }
}

fn lognormal_cdf(t: f64, mu: f64, sigma: f64) -> f64 {
    if t <= 0.0 {
        0.0
    } else {
        norm_cdf((t.ln() - mu) / sigma)
    }
}

/// Closed-form `α̂(μ, σ) = N⁺ / Σ_j N_j ΔF_j`.
pub fn rpp_profile_alpha(es: &EarlyStage, mu: f64, sigma: f64) -> Result<f64> {
    Ok(RppData::new(es)?.profile_alpha(mu, sigma))
}

/// Full RPP log-likelihood of the early stage; the root contributes no term.
pub fn rpp_log_likelihood(es: &EarlyStage, alpha: f64, mu: f64, sigma: f64) -> Result<f64> {
    Ok(RppData::new(es)?.log_likelihood(alpha, mu, sigma))
}

/// Log-likelihood with `α` replaced by its closed-form maximizer.
pub fn rpp_profile_log_likelihood(es: &EarlyStage, mu: f64, sigma: f64) -> Result<f64> {
    Ok(RppData::new(es)?.profile_log_likelihood(mu, sigma))
}

struct NewtonOutcome {
    x: [f64; 2],
    value: f64,
    converged: bool,
    iterations: usize,
}

fn fd_gradient(f: &dyn Fn(f64, f64) -> f64, x: [f64; 2]) -> [f64; 2] {
    let h0 = 1e-5 * x[0].abs().max(1.0);
    let h1 = 1e-5 * x[1].max(1e-2);
    [
        (f(x[0] + h0, x[1]) - f(x[0] - h0, x[1])) / (2.0 * h0),
        (f(x[0], x[1] + h1) - f(x[0], x[1] - h1)) / (2.0 * h1),
    ]
}

fn fd_hessian(f: &dyn Fn(f64, f64) -> f64, x: [f64; 2], fx: f64) -> [[f64; 2]; 2] {
    let h0 = 1e-4 * x[0].abs().max(1.0);
    let h1 = 1e-4 * x[1].max(1e-2).min(x[1] * 0.5);
    let (a, b) = (x[0], x[1]);
    let d00 = (f(a + h0, b) - 2.0 * fx + f(a - h0, b)) / (h0 * h0);
    let d11 = (f(a, b + h1) - 2.0 * fx + f(a, b - h1)) / (h1 * h1);
    let d01 = (f(a + h0, b + h1) - f(a + h0, b - h1) - f(a - h0, b + h1) + f(a - h0, b - h1))
        / (4.0 * h0 * h1);
    [[d00, d01], [d01, d11]]
}

/// Maximizes `f` over a box with Newton steps, a Levenberg shift when the
/// Hessian is not negative definite, and step halving.
fn newton_maximize(
    f: &dyn Fn(f64, f64) -> f64,
    start: [f64; 2],
    lo: [f64; 2],
    hi: [f64; 2],
    max_iter: usize,
) -> NewtonOutcome {
    let clamp = |x: [f64; 2]| [x[0].clamp(lo[0], hi[0]), x[1].clamp(lo[1], hi[1])];
    let mut x = clamp(start);
    let mut fx = f(x[0], x[1]);
    let mut iterations = 0;
    while iterations < max_iter {
        if !fx.is_finite() {
            break;
        }
        let g = fd_gradient(f, x);
        let gnorm = (g[0] * g[0] + g[1] * g[1]).sqrt();
        if gnorm < RPP_GRAD_TOL {
            return NewtonOutcome {
                x,
                value: fx,
                converged: true,
                iterations,
            };
        }
        iterations += 1;
        let h = fd_hessian(f, x, fx);
        // Largest eigenvalue of the symmetric 2x2 Hessian.
        let tr = h[0][0] + h[1][1];
        let det = h[0][0] * h[1][1] - h[0][1] * h[0][1];
        let disc = (0.25 * tr * tr - det).max(0.0).sqrt();
        let lambda_max = 0.5 * tr + disc;
        let scale = h[0][0].abs().max(h[1][1].abs()).max(1e-8);
        let shift = if lambda_max < -1e-10 * scale {
            0.0
        } else {
            lambda_max + scale.max(gnorm) * 1e-3 + 1e-8
        };
        let m = [[h[0][0] - shift, h[0][1]], [h[0][1], h[1][1] - shift]];
        let mdet = m[0][0] * m[1][1] - m[0][1] * m[1][0];
        // Ascent direction d = -M^{-1} g.
        let mut d = [
            -(m[1][1] * g[0] - m[0][1] * g[1]) / mdet,
            -(-m[1][0] * g[0] + m[0][0] * g[1]) / mdet,
        ];
        if !(d[0].is_finite() && d[1].is_finite()) {
            d = [g[0] / scale, g[1] / scale];
        }

        let mut step = 1.0;
        let mut accepted = false;
        for _ in 0..50 {
            let cand = clamp([x[0] + step * d[0], x[1] + step * d[1]]);
            let fc = f(cand[0], cand[1]);
            if fc.is_finite() && fc > fx {
                x = cand;
                fx = fc;
                accepted = true;
                break;
            }
            step *= 0.5;
        }
        if !accepted {
            let g = fd_gradient(f, x);
            let converged = (g[0] * g[0] + g[1] * g[1]).sqrt() < RPP_GRAD_TOL;
            return NewtonOutcome {
                x,
                value: fx,
                converged,
                iterations,
            };
        }
    }
    let g = fd_gradient(f, x);
    NewtonOutcome {
        x,
        value: fx,
        converged: fx.is_finite() && (g[0] * g[0] + g[1] * g[1]).sqrt() < RPP_GRAD_TOL,
        iterations,
    }
}

/// Maximum-likelihood RPP fit of an early stage with `restarts` uniform
/// random initializations of `(μ, σ)`.
pub fn rpp_fit(es: &EarlyStage, restarts: usize, max_iter: usize, seed: u64) -> Result<RppFit> {
    let data = RppData::new(es)?;
    let (mu_lo, mu_hi) = data.mu_bounds();
    let lo = [mu_lo, RPP_SIGMA_MIN];
    let hi = [mu_hi, RPP_SIGMA_MAX];
    let objective = |mu: f64, sigma: f64| data.profile_log_likelihood(mu, sigma);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);

    let mut best: Option<NewtonOutcome> = None;
    for _ in 0..restarts.max(1) {
        let start = [
            rng.gen_range(mu_lo..=mu_hi),
            rng.gen_range(RPP_SIGMA_INIT.0..=RPP_SIGMA_INIT.1),
        ];
        let run = newton_maximize(&objective, start, lo, hi, max_iter);
        let better = match &best {
            None => true,
            Some(b) => {
                let tol = 1e-9 * b.value.abs().max(1.0);
                run.value > b.value + tol
                    || (run.value > b.value - tol && run.converged && !b.converged)
            }
        };
        if better {
            best = Some(run);
        }
    }
    let best = best.expect("at least one restart");
    let (mu, sigma) = (best.x[0], best.x[1]);
    if !best.converged {
        log::debug!("cascade {}: RPP fit did not converge", es.cascade_id);
    }
    Ok(RppFit {
        cascade_id: es.cascade_id.clone(),
        alpha: data.profile_alpha(mu, sigma),
        mu,
        sigma,
        t_obs: es.t_obs,
        observed_size: es.prefix.len(),
        converged: best.converged,
        iterations: best.iterations,
        log_likelihood: best.value,
    })
}

/// Expected size at `t_prime`: `N(t_obs) · exp(α (F(t') - F(t_obs)))`.
pub fn rpp_predict(fit: &RppFit, t_prime: f64) -> f64 {
    let t_prime = t_prime.max(fit.t_obs);
    let z = |t: f64| {
        if t <= 0.0 {
            f64::NEG_INFINITY
        } else {
            (t.ln() - fit.mu) / fit.sigma
        }
    };
    let mass = lognormal_mass(z(fit.t_obs), z(t_prime));
    fit.observed_size as f64 * (fit.alpha * mass).exp()
}

/// Log-normal CDF, exposed for oracles and simulators.
pub fn relaxation_cdf(t: f64, mu: f64, sigma: f64) -> f64 {
    lognormal_cdf(t, mu, sigma)
}

/// Log-normal density.
pub fn relaxation_density(t: f64, mu: f64, sigma: f64) -> f64 {
    if t <= 0.0 {
        return 0.0;
    }
    let z = (t.ln() - mu) / sigma;
    (-0.5 * z * z).exp() / (t * sigma * (2.0 * std::f64::consts::PI).sqrt())
}
