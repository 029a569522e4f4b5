//! Closed-form constants and bounds of the convergence analysis, plus
//! rate fitting against recorded traces. Everything here is a pure function
//! of its inputs.

use std::fmt::Write as _;

use crate::error::{Error, Result};
use crate::trace::RunTrace;

/// Slack applied to every empirical bound comparison; `K` is estimated.
pub const BOUND_SLACK: f64 = 3.0;

fn positive(name: &str, v: f64) -> Result<()> {
    if v.is_finite() && v > 0.0 {
        Ok(())
    } else {
        Err(Error::Precondition(format!(
            "{name} must be positive and finite, got {v}"
        )))
    }
}

/// `C = max{ rMK(γ⁰T⁰)² / (4mrγ⁰T⁰ − 2), T⁰·(F(x⁰) − F*) }`, valid when
/// `2mrγ⁰T⁰ > 1`.
#[allow(clippy::too_many_arguments)]
pub fn sync_rate_constant(
    m: f64,
    big_m: f64,
    k: f64,
    r: f64,
    gamma0: f64,
    t0: f64,
    f0_gap: f64,
) -> Result<f64> {
    for (n, v) in [
        ("m", m),
        ("M", big_m),
        ("r", r),
        ("gamma0", gamma0),
        ("T0", t0),
    ] {
        positive(n, v)?;
    }
    let g = gamma0 * t0;
    let lhs = 2.0 * m * r * g;
    if lhs <= 1.0 {
        return Err(Error::Precondition(format!(
            "step-size condition 2·m·r·γ⁰·T⁰ > 1 fails: 2·{m}·{r}·{g} = {lhs}"
        )));
    }
    let noise = r * big_m * k * g * g / (4.0 * m * r * g - 2.0);
    Ok(noise.max(t0 * f0_gap))
}

/// Steady-state neighborhood `γMK/(4m)` of a constant step size.
pub fn neighborhood_bound(gamma: f64, m: f64, big_m: f64, k: f64) -> f64 {
    gamma * big_m * k / (4.0 * m)
}

/// `(1 − 2mγr)ᵗ·(F(x⁰) − F*) + γMK/(4m)`.
pub fn constant_step_bound(
    t: u64,
    gamma: f64,
    m: f64,
    big_m: f64,
    k: f64,
    r: f64,
    f0_gap: f64,
) -> f64 {
    linear_envelope(t, gamma, m, r, f0_gap) + neighborhood_bound(gamma, m, big_m, k)
}

/// `(1 − 2mγr)ᵗ·(F(x⁰) − F*)`.
pub fn linear_envelope(t: u64, gamma: f64, m: f64, r: f64, f0_gap: f64) -> f64 {
    (1.0 - 2.0 * m * gamma * r).powf(t as f64) * f0_gap
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct IterationEstimate {
    pub iterations: u64,
    /// `γ = 4mφε/(MK)`.
    pub step: f64,
}

/// Iterations a constant-step run needs to reach accuracy `ε`:
/// `⌈MK/(8m²rφε) · ln(F0_gap/((1−φ)ε))⌉` with `γ = 4mφε/(MK)`.
#[allow(clippy::too_many_arguments)]
pub fn min_iterations(
    m: f64,
    big_m: f64,
    k: f64,
    r: f64,
    phi: f64,
    eps: f64,
    f0_gap: f64,
) -> Result<IterationEstimate> {
    if !(phi > 0.0 && phi < 1.0) {
        return Err(Error::Precondition(format!(
            "phi must lie in (0, 1), got {phi}"
        )));
    }
    for (n, v) in [("m", m), ("M", big_m), ("K", k), ("r", r), ("eps", eps)] {
        positive(n, v)?;
    }
    let step = 4.0 * m * phi * eps / (big_m * k);
    let target = (1.0 - phi) * eps;
    if f0_gap <= target {
        return Ok(IterationEstimate {
            iterations: 0,
            step,
        });
    }
    let t = big_m * k / (8.0 * m * m * r * phi * eps) * (f0_gap / target).ln();
    Ok(IterationEstimate {
        iterations: t.ceil() as u64,
        step,
    })
}

/// Asynchronous constant:
/// `C = max{ [MK(γ⁰T⁰)²/(2B) + τ²MK(γ⁰T⁰)³/(2ρB²)] / [(2mγ⁰T⁰/B)(1 − ρM/2) − 1], T⁰·F0_gap }`,
/// valid when `(2mγ⁰T⁰/B)(1 − ρM/2) > 1`.
#[allow(clippy::too_many_arguments)]
pub fn async_rate_constant(
    m: f64,
    big_m: f64,
    k: f64,
    blocks: usize,
    gamma0: f64,
    t0: f64,
    delay: f64,
    rho: f64,
    f0_gap: f64,
) -> Result<f64> {
    for (n, v) in [
        ("m", m),
        ("M", big_m),
        ("gamma0", gamma0),
        ("T0", t0),
        ("rho", rho),
    ] {
        positive(n, v)?;
    }
    if blocks == 0 {
        return Err(Error::Precondition("B must be >= 1".into()));
    }
    if rho * big_m >= 2.0 {
        return Err(Error::Precondition(format!(
            "ρM < 2 fails: ρM = {}",
            rho * big_m
        )));
    }
    let b = blocks as f64;
    let g = gamma0 * t0;
    let denom = (2.0 * m * g / b) * (1.0 - rho * big_m / 2.0) - 1.0;
    if denom <= 0.0 {
        return Err(Error::Precondition(format!(
            "step-size condition (2·m·γ⁰·T⁰/B)(1 − ρM/2) > 1 fails: value {}",
            denom + 1.0
        )));
    }
    let num =
        big_m * k * g * g / (2.0 * b) + delay * delay * big_m * k * g.powi(3) / (2.0 * rho * b * b);
    Ok((num / denom).max(t0 * f0_gap))
}

/// Bound `C/(t + T⁰)`.
pub fn rate_bound(c: f64, t: u64, t0: f64) -> f64 {
    c / (t as f64 + t0)
}

/// Constants and bounds for one configuration.
#[derive(Debug, Clone, PartialEq)]
pub struct BoundReport {
    pub m: f64,
    pub big_m: f64,
    pub k: f64,
    pub r: f64,
    pub schedule: String,
    pub f0_gap: f64,
    pub c_sync: Option<f64>,
    pub c_async: Option<f64>,
    pub neighborhood: Option<f64>,
    pub min_iterations: Option<IterationEstimate>,
    /// `ρ` used in the asynchronous constant.
    pub rho: Option<f64>,
    pub delay_bound: Option<u64>,
    pub slack: f64,
    pub notes: Vec<String>,
}

impl BoundReport {
    pub fn new(
        m: f64,
        big_m: f64,
        k: f64,
        r: f64,
        schedule: impl Into<String>,
        f0_gap: f64,
    ) -> Self {
        Self {
            m,
            big_m,
            k,
            r,
            schedule: schedule.into(),
            f0_gap,
            c_sync: None,
            c_async: None,
            neighborhood: None,
            min_iterations: None,
            rho: None,
            delay_bound: None,
            slack: BOUND_SLACK,
            notes: Vec::new(),
        }
    }

    pub fn to_text(&self) -> String {
        let mut s = String::new();
        let opt = |v: Option<f64>| v.map_or_else(|| "n/a".to_string(), |x| format!("{x:.6e}"));
        let _ = writeln!(s, "bound report");
        let _ = writeln!(s, "  m (strong convexity)     {:.6e}", self.m);
        let _ = writeln!(s, "  M (gradient Lipschitz)   {:.6e}", self.big_m);
        let _ = writeln!(s, "  K (2nd moment, estimate) {:.6e}", self.k);
        let _ = writeln!(s, "  r = I/B                  {:.6}", self.r);
        let _ = writeln!(s, "  schedule                 {}", self.schedule);
        let _ = writeln!(s, "  F(x0) - F*               {:.6e}", self.f0_gap);
        let _ = writeln!(s, "  C (sync)                 {}", opt(self.c_sync));
        let _ = writeln!(s, "  C (async)                {}", opt(self.c_async));
        if let Some(rho) = self.rho {
            let _ = writeln!(s, "  rho                      {rho:.6e}");
        }
        if let Some(d) = self.delay_bound {
            let _ = writeln!(s, "  delay bound              {d}");
        }
        let _ = writeln!(s, "  neighborhood gamma*M*K/4m {}", opt(self.neighborhood));
        if let Some(it) = self.min_iterations {
            let _ = writeln!(
                s,
                "  min iterations           {} (step {:.6e})",
                it.iterations, it.step
            );
        }
        let _ = writeln!(s, "  slack factor             {}", self.slack);
        for n in &self.notes {
            let _ = writeln!(s, "  note: {n}");
        }
        s
    }

    pub const CSV_HEADER: &'static str =
        "m,M,K,r,schedule,f0_gap,c_sync,c_async,neighborhood,min_iterations,rho,delay_bound,slack";

    pub fn csv_row(&self) -> String {
        let opt = |v: Option<f64>| v.map_or_else(String::new, |x| format!("{x:.17e}"));
        format!(
            "{:.17e},{:.17e},{:.17e},{:.17e},\"{}\",{:.17e},{},{},{},{},{},{},{}",
            self.m,
            self.big_m,
            self.k,
            self.r,
            self.schedule.replace('"', "'"),
            self.f0_gap,
            opt(self.c_sync),
            opt(self.c_async),
            opt(self.neighborhood),
            self.min_iterations
                .map_or_else(String::new, |i| i.iterations.to_string()),
            opt(self.rho),
            self.delay_bound.map_or_else(String::new, |d| d.to_string()),
            self.slack
        )
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum RateRegime {
    /// Power law `gap ∝ (t + offset)^slope`.
    Sublinear,
    /// Geometric decay `gap ∝ rateᵗ`; the log-log slope keeps steepening.
    Linear { rate: f64 },
}

#[derive(Debug, Clone, PartialEq)]
pub struct RateFit {
    /// Least-squares slope of `ln gap` against `ln(t + offset)`.
    pub slope: f64,
    pub intercept: f64,
    pub r_squared: f64,
    pub regime: RateRegime,
    /// `(t, gap / (C/(t + T⁰)))` when a constant was supplied.
    pub bound_ratios: Vec<(u64, f64)>,
    pub points_used: usize,
    pub warnings: Vec<String>,
}

fn least_squares_line(xs: &[f64], ys: &[f64]) -> (f64, f64, f64) {
    let n = xs.len() as f64;
    let mx = xs.iter().sum::<f64>() / n;
    let my = ys.iter().sum::<f64>() / n;
    let sxy: f64 = xs.iter().zip(ys).map(|(x, y)| (x - mx) * (y - my)).sum();
    let sxx: f64 = xs.iter().map(|x| (x - mx).powi(2)).sum();
    let syy: f64 = ys.iter().map(|y| (y - my).powi(2)).sum();
    let slope = sxy / sxx;
    let intercept = my - slope * mx;
    let r2 = if syy == 0.0 {
        1.0
    } else {
        (sxy * sxy) / (sxx * syy)
    };
    (slope, intercept, r2)
}

/// Fits the decay rate of the seed-averaged objective gap over
/// `window = (t_lo, t_hi)`.
///
/// `offset` shifts the time axis (use `T⁰` for a diminishing schedule).
/// Points from the first non-positive gap onward are dropped with a
/// warning. A linear-in-`t` fit of `ln gap` that explains the data better
/// than the power law is reported as [`RateRegime::Linear`].
pub fn fit_rate(
    traces: &[RunTrace],
    window: (u64, u64),
    offset: f64,
    bound: Option<(f64, f64)>,
) -> Result<RateFit> {
    let mean = RunTrace::average(traces)?;
    let mut warnings = Vec::new();
    if traces.len() < 20 {
        warnings.push(format!("only {} traces averaged", traces.len()));
    }
    let mut pts: Vec<(u64, f64)> = Vec::new();
    for row in mean
        .rows()
        .iter()
        .filter(|r| r.t >= window.0 && r.t <= window.1 && r.t > 0)
    {
        if row.objective_gap.is_nan() || row.objective_gap <= 0.0 {
            warnings.push(format!(
                "non-positive gap at t={}; window shrunk to t < {}",
                row.t, row.t
            ));
            break;
        }
        pts.push((row.t, row.objective_gap));
    }
    if pts.len() < 2 {
        return Err(Error::Precondition(
            "fewer than two positive-gap points in the fit window".into(),
        ));
    }
    let lt: Vec<f64> = pts.iter().map(|&(t, _)| (t as f64 + offset).ln()).collect();
    let tt: Vec<f64> = pts.iter().map(|&(t, _)| t as f64).collect();
    let lg: Vec<f64> = pts.iter().map(|&(_, g)| g.ln()).collect();
    let (slope, intercept, r2_pow) = least_squares_line(&lt, &lg);
    let (lin_slope, _, r2_lin) = least_squares_line(&tt, &lg);
    let regime = if r2_lin > r2_pow && r2_lin > 0.999 && lin_slope < 0.0 {
        warnings.push("decay is super-polynomial; reporting geometric rate".into());
        RateRegime::Linear {
            rate: lin_slope.exp(),
        }
    } else {
        RateRegime::Sublinear
    };
    let bound_ratios = bound
        .map(|(c, t0)| {
            pts.iter()
                .map(|&(t, g)| (t, g / rate_bound(c, t, t0)))
                .collect()
        })
        .unwrap_or_default();
    Ok(RateFit {
        slope,
        intercept,
        r_squared: r2_pow,
        regime,
        bound_ratios,
        points_used: pts.len(),
        warnings,
    })
}
