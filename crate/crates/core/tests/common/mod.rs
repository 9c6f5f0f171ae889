//! Brute-force reference implementations, written independently of the
//! library code they check.

#![allow(dead_code)]

use rand::Rng;

/// Cumulative sums recomputed from scratch for every prefix.
pub fn emd(p: &[f64], q: &[f64]) -> f64 {
    let c = p.len();
    let mut total = 0.0;
    for k in 0..c {
        let cp: f64 = p[..=k].iter().sum();
        let cq: f64 = q[..=k].iter().sum();
        total += (cp - cq).powi(2);
    }
    (total / c as f64).sqrt()
}

/// Rank = (number strictly below) + (ties including self + 1) / 2.
pub fn ranks(x: &[f64]) -> Vec<f64> {
    x.iter()
        .map(|v| {
            let below = x.iter().filter(|w| *w < v).count() as f64;
            let equal = x.iter().filter(|w| *w == v).count() as f64;
            below + (equal + 1.0) / 2.0
        })
        .collect()
}

/// Pearson via raw moments: `(nΣxy − ΣxΣy) / sqrt((nΣx² − (Σx)²)(nΣy² − (Σy)²))`.
pub fn pearson(x: &[f64], y: &[f64]) -> f64 {
    let n = x.len() as f64;
    let (mut sx, mut sy, mut sxx, mut syy, mut sxy) = (0.0, 0.0, 0.0, 0.0, 0.0);
    for (a, b) in x.iter().zip(y) {
        sx += a;
        sy += b;
        sxx += a * a;
        syy += b * b;
        sxy += a * b;
    }
    (n * sxy - sx * sy) / ((n * sxx - sx * sx) * (n * syy - sy * sy)).sqrt()
}

pub fn srcc(x: &[f64], y: &[f64]) -> f64 {
    pearson(&ranks(x), &ranks(y))
}

/// KL in nats, converted to bits at the end.
pub fn jsd(p: &[f64], q: &[f64]) -> f64 {
    let mut div = 0.0;
    for i in 0..p.len() {
        let m = (p[i] + q[i]) / 2.0;
        if p[i] > 0.0 {
            div += 0.5 * p[i] * (p[i].ln() - m.ln());
        }
        if q[i] > 0.0 {
            div += 0.5 * q[i] * (q[i].ln() - m.ln());
        }
    }
    (div / std::f64::consts::LN_2).max(0.0).sqrt()
}

pub fn intersection(p: &[f64], q: &[f64]) -> f64 {
    let mut s = 0.0;
    for i in 0..p.len() {
        s += if p[i] < q[i] { p[i] } else { q[i] };
    }
    s
}

pub fn cosine(p: &[f64], q: &[f64]) -> f64 {
    let dot: f64 = (0..p.len()).map(|i| p[i] * q[i]).sum();
    let pp: f64 = p.iter().map(|v| v * v).sum();
    let qq: f64 = q.iter().map(|v| v * v).sum();
    dot / (pp * qq).sqrt()
}

fn logistic(x: f64, b: [f64; 4]) -> f64 {
    (b[0] - b[1]) / (1.0 + (-(x - b[2]) / b[3]).exp()) + b[1]
}

/// For fixed centre and width the logistic is linear in its two levels, so
/// those come from ordinary least squares and the residual sum of squares is
/// `Syy − Ssy² / Sss`. Returns `(sse, [β1..β4])`.
fn profile(x: &[f64], y: &[f64], c: f64, w: f64) -> (f64, [f64; 4]) {
    let n = x.len() as f64;
    let (mut s1, mut s2, mut y1, mut y2, mut sy) = (0.0, 0.0, 0.0, 0.0, 0.0);
    for (v, t) in x.iter().zip(y) {
        let s = 1.0 / (1.0 + (-(v - c) / w).exp());
        s1 += s;
        s2 += s * s;
        y1 += t;
        y2 += t * t;
        sy += s * t;
    }
    let sss = s2 - s1 * s1 / n;
    let ssy = sy - s1 * y1 / n;
    let syy = y2 - y1 * y1 / n;
    // A nearly constant sigmoid fits no better than the mean; the guard also
    // keeps rounding noise in `sss` from inventing a perfect fit.
    if sss <= 1e-10 {
        return (syy, [y1 / n, y1 / n, c, w]);
    }
    let slope = ssy / sss;
    let icpt = (y1 - slope * s1) / n;
    // y ≈ icpt + slope·s, i.e. β2 = icpt, β1 = icpt + slope.
    ((syy - ssy * ssy / sss).max(0.0), [icpt + slope, icpt, c, w])
}

fn nelder_mead_2d(
    f: &dyn Fn(f64, f64) -> f64,
    start: (f64, f64),
    step: (f64, f64),
    tol: f64,
    max_iters: usize,
) -> (f64, f64) {
    let mut pts = [start, (start.0 + step.0, start.1), (start.0, start.1 + step.1)];
    let mut val = pts.map(|p| f(p.0, p.1));
    // Stops once the vertices coincide, or the values have agreed to
    // rounding for 100 iterations (a flat ridge).
    let mut flat = 0;
    for _ in 0..max_iters {
        let mut idx = [0, 1, 2];
        idx.sort_by(|&a, &b| val[a].total_cmp(&val[b]));
        pts = idx.map(|i| pts[i]);
        val = idx.map(|i| val[i]);
        if (val[2] - val[0]).abs() <= tol * val[0].abs().max(1e-300) {
            flat += 1;
            let size = (pts[2].0 - pts[0].0).abs() + (pts[2].1 - pts[0].1).abs();
            if size < 1e-13 || flat >= 100 {
                break;
            }
        } else {
            flat = 0;
        }
        let cen = ((pts[0].0 + pts[1].0) / 2.0, (pts[0].1 + pts[1].1) / 2.0);
        let at = |t: f64| (cen.0 + t * (pts[2].0 - cen.0), cen.1 + t * (pts[2].1 - cen.1));
        let r = at(-1.0);
        let fr = f(r.0, r.1);
        if fr < val[0] {
            let e = at(-2.0);
            let fe = f(e.0, e.1);
            (pts[2], val[2]) = if fe < fr { (e, fe) } else { (r, fr) };
        } else if fr < val[1] {
            (pts[2], val[2]) = (r, fr);
        } else {
            let k = if fr < val[2] { at(-0.5) } else { at(0.5) };
            let fk = f(k.0, k.1);
            if fk < val[2].min(fr) {
                (pts[2], val[2]) = (k, fk);
            } else {
                for i in 1..3 {
                    pts[i] = ((pts[i].0 + pts[0].0) / 2.0, (pts[i].1 + pts[0].1) / 2.0);
                    val[i] = f(pts[i].0, pts[i].1);
                }
            }
        }
    }
    pts[0]
}

/// Logistic least squares by variable projection: a grid search over
/// (centre, log width) followed by a simplex polish of the best cells.
pub fn logistic_fit(x: &[f64], y: &[f64]) -> [f64; 4] {
    let n = x.len() as f64;
    let mean = x.iter().sum::<f64>() / n;
    let sd = (x.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / n).sqrt();
    let lo = x.iter().cloned().fold(f64::INFINITY, f64::min);
    let hi = x.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let obj = |c: f64, lw: f64| profile(x, y, c, sd * lw.exp()).0;
    let mut cells = Vec::new();
    for i in 0..=40 {
        let c = lo - 0.5 * (hi - lo) + 2.0 * (hi - lo) * i as f64 / 40.0;
        for j in 0..=40 {
            let lw = -6.0 + 14.0 * j as f64 / 40.0;
            cells.push((obj(c, lw), c, lw));
        }
    }
    cells.sort_by(|a, b| a.0.total_cmp(&b.0));
    let mut best = (f64::INFINITY, [0.0; 4]);
    for &(_, c, lw) in cells.iter().take(4) {
        let (c, lw) = nelder_mead_2d(&obj, (c, lw), ((hi - lo) / 40.0, 0.35), 1e-10, 400);
        let (c, lw) = nelder_mead_2d(&obj, (c, lw), ((hi - lo) / 400.0, 0.035), 1e-15, 4000);
        let r = profile(x, y, c, sd * lw.exp());
        if r.0 < best.0 {
            best = r;
        }
    }
    best.1
}


/// PLCC after the reference logistic mapping.
pub fn plcc(x: &[f64], y: &[f64]) -> f64 {
    let b = logistic_fit(x, y);
    let mapped: Vec<f64> = x.iter().map(|v| logistic(*v, b)).collect();
    pearson(&mapped, y)
}

/// A random probability vector with `c` entries; some entries are exactly 0.
pub fn random_distribution(c: usize, rng: &mut impl Rng) -> Vec<f64> {
    let raw: Vec<f64> = (0..c)
        .map(|_| if rng.random_bool(0.15) { 0.0 } else { rng.random::<f64>() })
        .collect();
    let s: f64 = raw.iter().sum();
    if s == 0.0 {
        let mut v = vec![0.0; c];
        v[rng.random_range(0..c)] = 1.0;
        return v;
    }
    raw.iter().map(|v| v / s).collect()
}

/// Ground truth with a noisy sigmoidal dependence on the prediction. The
/// curve saturates on both sides inside the sampled range, so the
/// least-squares optimum is attained at finite parameters.
pub fn sigmoidal_pair(n: usize, rng: &mut impl Rng) -> (Vec<f64>, Vec<f64>) {
    let centre = rng.random_range(-1.0..1.0);
    let width = rng.random_range(0.2..0.6);
    let (top, bottom) = (rng.random_range(3.5..5.0), rng.random_range(1.0..2.5));
    let noise = rng.random_range(0.05..0.4);
    let x: Vec<f64> = (0..n).map(|_| rng.random_range(-3.0..3.0)).collect();
    let y = x
        .iter()
        .map(|v| logistic(*v, [top, bottom, centre, width]) + noise * (rng.random::<f64>() - 0.5))
        .collect();
    (x, y)
}
