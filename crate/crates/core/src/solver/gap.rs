//! Linearisation gap over a Euclidean ball intersected with the box `t >= lower`.

fn norm(v: impl Iterator<Item = f64>) -> f64 {
    v.map(|x| x * x).sum::<f64>().sqrt()
}

/// `max <g, t_k - t>` over `t` in the ball of radius `2 ||t_0 - t_k||` around
/// `t_k`, restricted to `t >= lower`.
///
/// The minimiser of the linear form has the shape `max(t_k - s g, lower)`; the
/// step `s` is found by bisection on the distance to `t_k`, which is monotone.
pub fn duality_gap(point: &[f64], start: &[f64], grad: &[f64], lower: &[f64]) -> f64 {
    let radius = 2.0 * norm(start.iter().zip(point).map(|(a, b)| a - b));
    ball_gap(point, radius, grad, lower)
}

/// `max <g, point - t>` over the ball of the given radius around `point`,
/// restricted to `t >= lower`.
pub fn ball_gap(point: &[f64], radius: f64, grad: &[f64], lower: &[f64]) -> f64 {
    if radius == 0.0 || grad.iter().all(|&g| g == 0.0) {
        return 0.0;
    }

    let moved = |s: f64| -> (f64, f64) {
        let mut dist2 = 0.0;
        let mut gain = 0.0;
        for ((&p, &g), &lo) in point.iter().zip(grad).zip(lower) {
            let t = (p - s * g).max(lo);
            dist2 += (t - p) * (t - p);
            gain += g * (p - t);
        }
        (dist2.sqrt(), gain)
    };

    // As s grows, coordinates with g > 0 stop at the bound; those with g < 0
    // keep going. Without any of the latter the distance is bounded.
    if grad.iter().all(|&g| g >= 0.0) {
        let mut dist2 = 0.0;
        let mut gain = 0.0;
        for ((&p, &g), &lo) in point.iter().zip(grad).zip(lower) {
            if g > 0.0 {
                let t = lo.min(p);
                dist2 += (t - p) * (t - p);
                gain += g * (p - t);
            }
        }
        if dist2.sqrt() <= radius {
            return gain;
        }
    }

    let gnorm = norm(grad.iter().copied());
    let mut lo = 0.0;
    let mut hi = radius / gnorm;
    while moved(hi).0 < radius {
        lo = hi;
        hi *= 2.0;
    }
    while hi - lo > 1e-12 * hi {
        let mid = 0.5 * (lo + hi);
        if moved(mid).0 < radius {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    moved(lo).1
}
