//! Universal accelerated method of similar triangles with adaptive smoothness
//! estimate, on the box `t >= lower` (some coordinates may be pinned).

use std::time::Instant;

use super::gap::{ball_gap, duality_gap};
use super::history::{ConvergenceHistory, IterationRecord, Status};
use super::oracle::{DualOracle, OracleSample};
use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq)]
pub struct Domain {
    pub lower: Vec<f64>,
    /// Coordinates held at their lower bound.
    pub pinned: Vec<bool>,
}

impl Domain {
    pub fn new(lower: Vec<f64>) -> Self {
        let pinned = vec![false; lower.len()];
        Domain { lower, pinned }
    }

    pub fn project(&self, t: &mut [f64]) {
        for ((x, &lo), &pin) in t.iter_mut().zip(&self.lower).zip(&self.pinned) {
            if pin || *x < lo {
                *x = lo;
            }
        }
    }

    fn free_part(&self, g: &[f64]) -> Vec<f64> {
        g.iter()
            .zip(&self.pinned)
            .map(|(&x, &pin)| if pin { 0.0 } else { x })
            .collect()
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct UstmOptions {
    pub eps: f64,
    pub max_iter: usize,
    /// `None` picks `|grad F(t0)| / |t0|`, so the first trial step has the
    /// size of the start point.
    pub initial_lipschitz: Option<f64>,
    pub gap_every: usize,
    pub stop_on_gap: bool,
    /// Restart from the current point with a halved accuracy target each
    /// time the gap meets the current target, until it reaches `eps`.
    pub restart: bool,
    pub record_timing: bool,
}

impl Default for UstmOptions {
    fn default() -> Self {
        UstmOptions {
            eps: 1e-6,
            max_iter: 3000,
            initial_lipschitz: None,
            gap_every: 10,
            stop_on_gap: true,
            restart: false,
            record_timing: true,
        }
    }
}

#[derive(Debug, Clone)]
pub struct UstmOutcome {
    pub point: Vec<f64>,
    pub sample: OracleSample,
    pub history: ConvergenceHistory,
    pub status: Status,
    pub lipschitz: f64,
    pub initial_lipschitz: f64,
    /// Last computed gap estimate.
    pub gap: f64,
    /// `sum_i alpha_i * grad psi(y_i) / A_k`; minus the primal flow estimate.
    pub aggregated_grad: Vec<f64>,
    pub iterations: usize,
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// Weighted aggregate of the linearisations of `psi` at the points `y_i`.
#[derive(Debug, Clone)]
struct LowerModel {
    weight: f64,
    intercept: f64,
    grad: Vec<f64>,
}

impl LowerModel {
    fn new(n: usize) -> Self {
        LowerModel {
            weight: 0.0,
            intercept: 0.0,
            grad: vec![0.0; n],
        }
    }

    fn add(&mut self, alpha: f64, at: &[f64], sample: &OracleSample) {
        let g = sample.nonseparable_grad();
        self.weight += alpha;
        self.intercept += alpha * (sample.nonseparable() - dot(&g, at));
        for (acc, gi) in self.grad.iter_mut().zip(&g) {
            *acc += alpha * gi;
        }
    }

    fn mean_grad(&self) -> Vec<f64> {
        self.grad.iter().map(|g| g / self.weight).collect()
    }

    /// Gap bound at `x`: the model's offset below `F(x)` plus the ball
    /// linearisation gap of the model gradient.
    fn gap(&self, x: &[f64], sample: &OracleSample, start: &[f64], domain: &Domain) -> f64 {
        let mean = self.mean_grad();
        let model_at_x = (self.intercept + dot(&self.grad, x)) / self.weight;
        let offset = (sample.nonseparable() - model_at_x).max(0.0);
        let slope: Vec<f64> = sample
            .separable_grad
            .iter()
            .zip(&mean)
            .map(|(a, b)| a + b)
            .collect();
        offset + duality_gap(x, start, &domain.free_part(&slope), &domain.lower)
    }
}

const MAX_DOUBLINGS: usize = 200;

fn norm(v: &[f64]) -> f64 {
    dot(v, v).sqrt()
}

pub fn umst_minimize<O: DualOracle + ?Sized>(
    oracle: &mut O,
    start: &[f64],
    domain: &Domain,
    opts: UstmOptions,
) -> Result<UstmOutcome> {
    let clock = Instant::now();
    let n = start.len();
    let mut t0 = start.to_vec();
    domain.project(&mut t0);
    // Restarts reset the momentum but keep the gap ball anchored at the start.
    let t0 = t0;

    let mut x = t0.clone();
    let mut u = t0.clone();
    let mut big_a = 0.0;
    let mut model = LowerModel::new(n);
    // Model of the last finished restart stage. Every model is a valid lower
    // bound, so at the end the one certifying the smaller gap is reported.
    let mut finished: Option<LowerModel> = None;
    let mut history = ConvergenceHistory::default();
    let mut gap = f64::INFINITY;
    let mut sample_x = oracle.evaluate(&x, 0)?;
    sample_x.check_finite()?;
    let initial_lipschitz = opts.initial_lipschitz.unwrap_or_else(|| {
        let l = norm(&domain.free_part(&sample_x.grad)) / norm(&x);
        if l.is_finite() && l > 0.0 {
            l
        } else {
            1.0
        }
    });
    let mut lipschitz = initial_lipschitz;
    let mut status = Status::IterationCap;
    let mut iterations = 0;

    // Accuracy target of the current stage. Without restarts it is `eps`
    // throughout; with restarts it starts at the linearisation gap over a
    // ball whose radius is the size of the start point.
    let mut target = if opts.restart {
        let g = domain.free_part(&sample_x.grad);
        ball_gap(&x, norm(&x).max(1.0), &g, &domain.lower).max(opts.eps)
    } else {
        opts.eps
    };

    for k in 1..=opts.max_iter {
        let mut sweeps = 0;
        let mut doublings = 0;
        let (alpha, next_a, y, sample_y, u_next, x_next, sample_next) = loop {
            let alpha = (1.0 + (1.0 + 4.0 * lipschitz * big_a).sqrt()) / (2.0 * lipschitz);
            let next_a = big_a + alpha;
            let y: Vec<f64> = u
                .iter()
                .zip(&x)
                .map(|(ui, xi)| (alpha * ui + big_a * xi) / next_a)
                .collect();
            let sample_y = oracle.evaluate(&y, k)?;
            sample_y.check_finite()?;
            let gy = domain.free_part(&sample_y.grad);
            let mut u_next: Vec<f64> = u.iter().zip(&gy).map(|(ui, g)| ui - alpha * g).collect();
            domain.project(&mut u_next);
            let x_next: Vec<f64> = u_next
                .iter()
                .zip(&x)
                .map(|(ui, xi)| (alpha * ui + big_a * xi) / next_a)
                .collect();
            let sample_next = oracle.evaluate(&x_next, k)?;
            sample_next.check_finite()?;
            sweeps += sample_y.inner_sweeps + sample_next.inner_sweeps;

            let step: Vec<f64> = x_next.iter().zip(&y).map(|(a, b)| a - b).collect();
            let bound = sample_y.value
                + dot(&gy, &step)
                + 0.5 * lipschitz * dot(&step, &step)
                + target * alpha / (2.0 * next_a);
            if sample_next.value <= bound {
                break (alpha, next_a, y, sample_y, u_next, x_next, sample_next);
            }
            lipschitz *= 2.0;
            doublings += 1;
            if doublings > MAX_DOUBLINGS || !lipschitz.is_finite() {
                return Err(Error::NonFinite(format!(
                    "smoothness estimate diverged at iteration {k}"
                )));
            }
        };

        model.add(alpha, &y, &sample_y);
        big_a = next_a;
        u = u_next;
        x = x_next;
        sample_x = sample_next;
        iterations = k;

        let want_gap = k % opts.gap_every.max(1) == 0 || k == opts.max_iter;
        let record_gap = if want_gap {
            gap = model.gap(&x, &sample_x, &t0, domain);
            Some(gap)
        } else {
            None
        };
        history.records.push(IterationRecord {
            iter: k,
            value: sample_x.value,
            gap: record_gap,
            lipschitz,
            inner_sweeps: sweeps,
            elapsed_ms: if opts.record_timing {
                clock.elapsed().as_secs_f64() * 1e3
            } else {
                0.0
            },
        });
        lipschitz /= 2.0;

        if want_gap && gap <= opts.eps && opts.stop_on_gap {
            status = Status::Converged;
            break;
        }
        if opts.restart && want_gap && gap <= target && target > opts.eps && k < opts.max_iter {
            target = (0.5 * target.min(gap)).max(opts.eps);
            u = x.clone();
            big_a = 0.0;
            finished = Some(std::mem::replace(&mut model, LowerModel::new(n)));
            log::debug!("restart at iteration {k}, next target {target:.3e}");
        }
    }

    if let Some(prev) = finished {
        if model.weight == 0.0 {
            model = prev;
        } else {
            let prev_gap = prev.gap(&x, &sample_x, &t0, domain);
            if prev_gap < gap {
                gap = prev_gap;
                model = prev;
            }
        }
    }
    if iterations == 0 {
        gap = f64::INFINITY;
    } else if status != Status::Converged && gap <= opts.eps {
        status = Status::Converged;
    }
    let aggregated_grad = if model.weight > 0.0 {
        model.mean_grad()
    } else {
        sample_x.nonseparable_grad()
    };
    Ok(UstmOutcome {
        point: x,
        sample: sample_x,
        history,
        status,
        lipschitz,
        initial_lipschitz,
        gap,
        aggregated_grad,
        iterations,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn quadratic_on_half_line() {
        let mut f = |t: &[f64]| (0.5 * (t[0] - 3.0).powi(2), vec![t[0] - 3.0]);
        let opts = UstmOptions {
            eps: 1e-14,
            max_iter: 100,
            gap_every: 1,
            ..Default::default()
        };
        let out = umst_minimize(&mut f, &[1.0], &Domain::new(vec![1.0]), opts).unwrap();
        assert!((out.point[0] - 3.0).abs() <= 1e-6, "{:?}", out.point);
        assert!(out.iterations <= 100);
    }

    #[test]
    fn constrained_minimum_on_the_bound() {
        let mut f = |t: &[f64]| (0.5 * (t[0] + 2.0).powi(2), vec![t[0] + 2.0]);
        let out = umst_minimize(
            &mut f,
            &[4.0],
            &Domain::new(vec![1.0]),
            UstmOptions {
                eps: 1e-10,
                ..Default::default()
            },
        )
        .unwrap();
        assert!((out.point[0] - 1.0).abs() < 1e-6);
        assert_eq!(out.status, Status::Converged);
    }

    #[test]
    fn lipschitz_estimate_stays_bounded() {
        // Diagonal quadratic with curvatures spread over [1, 4]: the gradient
        // Lipschitz constant is 4 and no direction is flatter than 1.
        let n = 40;
        let curv: Vec<f64> = (0..n)
            .map(|i| 1.0 + 3.0 * i as f64 / (n - 1) as f64)
            .collect();
        let c = curv.clone();
        let mut f = move |t: &[f64]| {
            let v = t
                .iter()
                .zip(&c)
                .map(|(x, k)| 0.5 * k * (x - 1e3).powi(2))
                .sum();
            let g = t.iter().zip(&c).map(|(x, k)| k * (x - 1e3)).collect();
            (v, g)
        };
        let opts = UstmOptions {
            eps: 1e-300,
            max_iter: 200,
            initial_lipschitz: Some(1.0),
            stop_on_gap: false,
            ..Default::default()
        };
        let start = vec![0.0; n];
        let out = umst_minimize(&mut f, &start, &Domain::new(vec![-1e12; n]), opts).unwrap();
        let first = out.history.records[0].value;
        // Once the objective reaches round-off every step passes the test.
        let live = out
            .history
            .records
            .iter()
            .take_while(|r| r.value > 1e-18 * first);
        let mut checked = 0;
        for r in live.skip(5) {
            assert!(
                r.lipschitz >= 1.0 && r.lipschitz <= 8.0,
                "L = {} at {}",
                r.lipschitz,
                r.iter
            );
            checked += 1;
        }
        assert!(checked >= 20, "only {checked} informative iterations");
    }

    #[test]
    fn pinned_coordinates_do_not_move() {
        let mut f = |t: &[f64]| {
            (
                0.5 * ((t[0] - 3.0).powi(2) + (t[1] - 5.0).powi(2)),
                vec![t[0] - 3.0, t[1] - 5.0],
            )
        };
        let mut dom = Domain::new(vec![1.0, 2.0]);
        dom.pinned[1] = true;
        let out = umst_minimize(
            &mut f,
            &[1.0, 2.0],
            &dom,
            UstmOptions {
                eps: 1e-12,
                ..Default::default()
            },
        )
        .unwrap();
        assert_eq!(out.point[1], 2.0);
        assert!((out.point[0] - 3.0).abs() < 1e-5);
    }

    #[test]
    fn nan_objective_aborts() {
        let mut f = |_: &[f64]| (f64::NAN, vec![0.0]);
        let err = umst_minimize(
            &mut f,
            &[1.0],
            &Domain::new(vec![0.0]),
            UstmOptions::default(),
        );
        assert!(matches!(err, Err(Error::NonFinite(_))));
    }
}
