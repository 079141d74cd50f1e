//! Numeric evaluation of the KL information number
//! `∫∫ log[p(x,y;θ)/p(x,y;θ')] p(x,y;θ) π(x;θ) dy dx`.
//!
//! Finite supports are summed exactly. Real-line laws use Gauss–Hermite rules
//! centred on the law's own moments; built-in families use 64 nodes (their
//! integrands are polynomial against the Gaussian weight, so the rule is
//! exact), custom laws double the node count until successive values agree.

use std::sync::OnceLock;

use crate::populations::{Law, Support};

const DEFAULT_NODES: usize = 64;
const PLUGIN_TOLERANCE: f64 = 1e-8;
const PLUGIN_MAX_NODES: usize = 256;

/// Nodes and weights of the `n`-point Gauss–Hermite rule for the weight `e^{-x²}`.
pub fn gauss_hermite(n: usize) -> (Vec<f64>, Vec<f64>) {
    assert!(n >= 1);
    const PIM4: f64 = 0.751_125_544_464_942_5;
    let mut x = vec![0.0; n];
    let mut w = vec![0.0; n];
    let m = n.div_ceil(2);
    let nf = n as f64;
    let mut z = 0.0f64;
    for i in 0..m {
        z = match i {
            0 => (2.0 * nf + 1.0).sqrt() - 1.855_75 * (2.0 * nf + 1.0).powf(-0.166_67),
            1 => z - 1.14 * nf.powf(0.426) / z,
            2 => 1.86 * z - 0.86 * x[0],
            3 => 1.91 * z - 0.91 * x[1],
            _ => 2.0 * z - x[i - 2],
        };
        let mut pp = 0.0;
        for _ in 0..200 {
            let mut p1 = PIM4;
            let mut p2 = 0.0;
            for j in 0..n {
                let p3 = p2;
                p2 = p1;
                let jf = j as f64;
                p1 = z * (2.0 / (jf + 1.0)).sqrt() * p2 - (jf / (jf + 1.0)).sqrt() * p3;
            }
            pp = (2.0 * nf).sqrt() * p2;
            let z1 = z;
            z = z1 - p1 / pp;
            if (z - z1).abs() <= 1e-14 * z.abs().max(1.0) {
                break;
            }
        }
        x[i] = z;
        x[n - 1 - i] = -z;
        w[i] = 2.0 / (pp * pp);
        w[n - 1 - i] = w[i];
    }
    (x, w)
}

fn default_rule() -> &'static (Vec<f64>, Vec<f64>) {
    static RULE: OnceLock<(Vec<f64>, Vec<f64>)> = OnceLock::new();
    RULE.get_or_init(|| gauss_hermite(DEFAULT_NODES))
}

/// A Gauss–Hermite rule rescaled to integrate against `N(mean, sd²)`:
/// returns `(points, probability weights)`.
fn normal_rule(rule: &(Vec<f64>, Vec<f64>), mean: f64, sd: f64) -> impl Iterator<Item = (f64, f64)> + '_ {
    let norm = std::f64::consts::PI.sqrt().recip();
    let scale = std::f64::consts::SQRT_2 * sd;
    rule.0
        .iter()
        .zip(&rule.1)
        .map(move |(&x, &w)| (mean + scale * x, w * norm))
}

#[inline]
fn log_normal_pdf(y: f64, mean: f64, sd: f64) -> f64 {
    let z = (y - mean) / sd;
    -0.5 * z * z - sd.ln() - 0.5 * (2.0 * std::f64::consts::PI).ln()
}

/// `E_{p(x,·)}[log p(x,Y) − log q(x,Y)]` by importance-weighted Gauss–Hermite.
fn inner(p: &Law, q: &Law, x: Option<f64>, rule: &(Vec<f64>, Vec<f64>)) -> f64 {
    let x0 = x.unwrap_or(0.0);
    let (m, s) = p.transition_moments(x0);
    normal_rule(rule, m, s)
        .map(|(y, w)| {
            let lp = p.log_step(x0, y);
            let lq = q.log_step(x0, y);
            w * (lp - log_normal_pdf(y, m, s)).exp() * (lp - lq)
        })
        .sum()
}

fn kl_with_rule(p: &Law, q: &Law, rule: &(Vec<f64>, Vec<f64>)) -> f64 {
    if p.is_iid() {
        return inner(p, q, None, rule);
    }
    let (m, s) = (p.stationary_mean(), p.stationary_sd());
    normal_rule(rule, m, s)
        .map(|(x, w)| {
            let ratio = (p.log_stationary(x) - log_normal_pdf(x, m, s)).exp();
            w * ratio * inner(p, q, Some(x), rule)
        })
        .sum()
}

fn kl_finite(p: &Law, q: &Law, values: &[f64]) -> f64 {
    let xs: Vec<(f64, f64)> = if p.is_iid() {
        vec![(values[0], 1.0)]
    } else {
        values.iter().map(|&x| (x, p.log_stationary(x).exp())).collect()
    };
    xs.iter()
        .map(|&(x, px)| {
            px * values
                .iter()
                .map(|&y| {
                    let lp = p.log_step(x, y);
                    if lp == f64::NEG_INFINITY {
                        0.0
                    } else {
                        lp.exp() * (lp - q.log_step(x, y))
                    }
                })
                .sum::<f64>()
        })
        .sum()
}

/// Numeric KL information number `I(p, q)` of two chain laws.
pub fn kl_quadrature(p: &Law, q: &Law) -> f64 {
    if let Support::Finite(values) = p.support() {
        return kl_finite(p, q, &values);
    }
    if !matches!(p, Law::Custom(_)) && !matches!(q, Law::Custom(_)) {
        return kl_with_rule(p, q, default_rule());
    }
    let mut n = 16;
    let mut prev = kl_with_rule(p, q, &gauss_hermite(n));
    while n < PLUGIN_MAX_NODES {
        n *= 2;
        let cur = kl_with_rule(p, q, &gauss_hermite(n));
        if (cur - prev).abs() < PLUGIN_TOLERANCE {
            return cur;
        }
        prev = cur;
    }
    prev
}

/// Numeric normalisation `∫ p(x, y) dy` (or `Σ_y`) of one transition row.
pub fn transition_mass(law: &Law, x: f64) -> f64 {
    match law.support() {
        Support::Finite(values) => values.iter().map(|&y| law.log_step(x, y).exp()).sum(),
        Support::RealLine => {
            let (m, s) = law.transition_moments(x);
            // Widen the proposal so the check does not simply reproduce the target.
            let rule = gauss_hermite(128);
            let s = 1.5 * s;
            normal_rule(&rule, m, s)
                .map(|(y, w)| w * (law.log_step(x, y) - log_normal_pdf(y, m, s)).exp())
                .sum()
        }
    }
}
