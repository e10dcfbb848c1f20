use serde::{Deserialize, Serialize};

use super::Objective;
use crate::error::{Error, Result};

const REFLECT: f64 = 1.0;
const EXPAND: f64 = 2.0;
const CONTRACT: f64 = 0.5;
const SHRINK: f64 = 0.5;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SimplexOutcome {
    pub theta: Vec<f64>,
    pub value: f64,
    pub evaluations: usize,
    pub iterations: usize,
}

struct Counter<F> {
    f: F,
    used: usize,
    budget: usize,
}

impl<F: FnMut(&[f64]) -> Option<f64>> Counter<F> {
    /// Cost to minimize; infeasible points cost +∞. `None` once the budget
    /// is exhausted.
    fn eval(&mut self, x: &[f64]) -> Option<f64> {
        if self.used >= self.budget {
            return None;
        }
        self.used += 1;
        Some(match (self.f)(x) {
            Some(v) if v.is_finite() => -v,
            _ => f64::INFINITY,
        })
    }
}

fn initial_offset(x: f64) -> f64 {
    if x != 0.0 {
        0.05 * x
    } else {
        0.00025
    }
}

/// Nelder–Mead maximization of `f` (reflection 1, expansion 2,
/// contraction ½, shrink ½) with a hard cap on function evaluations.
///
/// `f` returns `None` for infeasible points. The starting point is one of
/// the initial vertices, so the result is never worse than `x0`.
pub fn nelder_mead<F>(mut f: F, x0: &[f64], budget: usize) -> Result<SimplexOutcome>
where
    F: FnMut(&[f64]) -> Option<f64>,
{
    let k = x0.len();
    let mut c = Counter {
        f: &mut f,
        used: 0,
        budget: budget.max(1),
    };
    let mut verts: Vec<(Vec<f64>, f64)> = Vec::with_capacity(k + 1);
    let Some(f0) = c.eval(x0) else { unreachable!() };
    verts.push((x0.to_vec(), f0));
    for j in 0..k {
        let mut v = x0.to_vec();
        v[j] += initial_offset(x0[j]);
        match c.eval(&v) {
            Some(fv) => verts.push((v, fv)),
            None => break,
        }
    }
    let mut iterations = 0;
    if verts.len() == k + 1 {
        'outer: loop {
            verts.sort_by(|a, b| a.1.total_cmp(&b.1));
            let best = verts[0].1;
            let worst = verts[k].1;
            if best.is_finite() && (worst - best).abs() <= 1e-12 * (1.0 + best.abs()) {
                let spread = (0..k)
                    .map(|j| verts.iter().map(|v| (v.0[j] - verts[0].0[j]).abs()).fold(0.0, f64::max))
                    .fold(0.0, f64::max);
                if spread <= 1e-10 {
                    break;
                }
            }
            iterations += 1;
            let mut centroid = vec![0.0; k];
            for v in &verts[..k] {
                for (cj, xj) in centroid.iter_mut().zip(&v.0) {
                    *cj += xj / k as f64;
                }
            }
            let along = |t: f64| -> Vec<f64> {
                centroid
                    .iter()
                    .zip(&verts[k].0)
                    .map(|(cj, wj)| cj + t * (cj - wj))
                    .collect()
            };
            let xr = along(REFLECT);
            let Some(fr) = c.eval(&xr) else { break };
            if fr < verts[0].1 {
                let xe = along(EXPAND);
                let Some(fe) = c.eval(&xe) else {
                    verts[k] = (xr, fr);
                    break;
                };
                verts[k] = if fe < fr { (xe, fe) } else { (xr, fr) };
                continue;
            }
            if fr < verts[k - 1].1 {
                verts[k] = (xr, fr);
                continue;
            }
            let accepted = if fr < verts[k].1 {
                let xc = along(REFLECT * CONTRACT);
                let Some(fc) = c.eval(&xc) else { break };
                (fc <= fr).then_some((xc, fc))
            } else {
                let xc = along(-CONTRACT);
                let Some(fc) = c.eval(&xc) else { break };
                (fc < verts[k].1).then_some((xc, fc))
            };
            if let Some(v) = accepted {
                verts[k] = v;
                continue;
            }
            let anchor = verts[0].0.clone();
            for v in verts.iter_mut().skip(1) {
                let xs: Vec<f64> = anchor.iter().zip(&v.0).map(|(a, x)| a + SHRINK * (x - a)).collect();
                let Some(fs) = c.eval(&xs) else { break 'outer };
                *v = (xs, fs);
            }
        }
    }
    let used = c.used;
    let (theta, cost) = verts
        .into_iter()
        .min_by(|a, b| a.1.total_cmp(&b.1))
        .expect("at least one vertex");
    if !cost.is_finite() {
        return Err(Error::Estimation("simplex found no feasible point".into()));
    }
    Ok(SimplexOutcome {
        theta,
        value: -cost,
        evaluations: used,
        iterations,
    })
}

/// Runs the simplex on the penalized likelihood from `theta0`.
pub fn simplex_initialize<O: Objective + ?Sized>(obj: &O, theta0: &[f64], budget: usize) -> Result<SimplexOutcome> {
    if theta0.len() != obj.dim() {
        return Err(Error::Shape(format!(
            "theta0 has {} entries, expected {}",
            theta0.len(),
            obj.dim()
        )));
    }
    nelder_mead(|x| obj.value(x).ok(), theta0, budget)
}
