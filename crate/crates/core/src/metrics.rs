//! Evaluation criteria: SRCC, PLCC and RMSE after a four-parameter logistic
//! mapping for MOS; JSD, EMD, RMSE, intersection and cosine for DOS.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::losses::emd;
use crate::rating_stats::OpinionDistribution;

/// Iteration budget of the logistic fit, per starting point.
pub const LOGISTIC_MAX_ITERS: usize = 2000;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MosEvalReport {
    pub srcc: f64,
    pub plcc: f64,
    pub rmse: f64,
    pub logistic_params: [f64; 4],
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DosEvalReport {
    pub jsd: f64,
    pub emd: f64,
    pub rmse: f64,
    pub intersection: f64,
    pub cosine: f64,
}

impl DosEvalReport {
    pub fn mean(reports: &[DosEvalReport]) -> Option<DosEvalReport> {
        if reports.is_empty() {
            return None;
        }
        let n = reports.len() as f64;
        let sum = |f: fn(&DosEvalReport) -> f64| reports.iter().map(f).sum::<f64>() / n;
        Some(DosEvalReport {
            jsd: sum(|r| r.jsd),
            emd: sum(|r| r.emd),
            rmse: sum(|r| r.rmse),
            intersection: sum(|r| r.intersection),
            cosine: sum(|r| r.cosine),
        })
    }
}

fn check_pair(pred: &[f64], gt: &[f64], min_len: usize) -> Result<()> {
    if pred.len() != gt.len() {
        return Err(Error::Shape(format!(
            "{} predictions against {} ground-truth values",
            pred.len(),
            gt.len()
        )));
    }
    if pred.len() < min_len {
        return Err(Error::Shape(format!(
            "need at least {min_len} samples, got {}",
            pred.len()
        )));
    }
    if pred.iter().chain(gt).any(|v| !v.is_finite()) {
        return Err(Error::Numeric("non-finite score".into()));
    }
    Ok(())
}

fn mean(x: &[f64]) -> f64 {
    x.iter().sum::<f64>() / x.len() as f64
}

fn std_dev(x: &[f64]) -> f64 {
    let m = mean(x);
    (x.iter().map(|v| (v - m) * (v - m)).sum::<f64>() / x.len() as f64).sqrt()
}

fn is_constant(x: &[f64]) -> bool {
    x.iter().all(|v| *v == x[0])
}

/// Pearson correlation coefficient.
pub fn pearson(x: &[f64], y: &[f64]) -> Result<f64> {
    check_pair(x, y, 2)?;
    if is_constant(x) || is_constant(y) {
        return Err(Error::UndefinedCorrelation("constant input".into()));
    }
    let (mx, my) = (mean(x), mean(y));
    let mut sxy = 0.0;
    let mut sxx = 0.0;
    let mut syy = 0.0;
    for (a, b) in x.iter().zip(y) {
        sxy += (a - mx) * (b - my);
        sxx += (a - mx) * (a - mx);
        syy += (b - my) * (b - my);
    }
    Ok((sxy / (sxx.sqrt() * syy.sqrt())).clamp(-1.0, 1.0))
}

/// 1-based ranks with ties sharing their average rank.
pub fn average_ranks(x: &[f64]) -> Vec<f64> {
    let mut order: Vec<usize> = (0..x.len()).collect();
    order.sort_by(|&a, &b| x[a].total_cmp(&x[b]));
    let mut ranks = vec![0.0; x.len()];
    let mut i = 0;
    while i < order.len() {
        let mut j = i;
        while j + 1 < order.len() && x[order[j + 1]] == x[order[i]] {
            j += 1;
        }
        let r = (i + j) as f64 / 2.0 + 1.0;
        for &k in &order[i..=j] {
            ranks[k] = r;
        }
        i = j + 1;
    }
    ranks
}

/// Spearman rank-order correlation.
pub fn srcc(pred: &[f64], gt: &[f64]) -> Result<f64> {
    check_pair(pred, gt, 3)?;
    if is_constant(pred) || is_constant(gt) {
        return Err(Error::UndefinedCorrelation("constant input".into()));
    }
    pearson(&average_ranks(pred), &average_ranks(gt))
}

/// `(β1 − β2) / (1 + exp(−(x − β3)/β4)) + β2`.
pub fn logistic4(x: f64, b: &[f64; 4]) -> f64 {
    (b[0] - b[1]) * crate::autograd::sigmoid((x - b[2]) / b[3]) + b[1]
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LogisticFit {
    pub params: [f64; 4],
    /// Sum of squared residuals of the mapped predictions.
    pub sse: f64,
    pub converged: bool,
}

impl LogisticFit {
    pub fn map(&self, x: f64) -> f64 {
        logistic4(x, &self.params)
    }
}

fn sse(pred: &[f64], gt: &[f64], b: &[f64; 4]) -> f64 {
    pred.iter()
        .zip(gt)
        .map(|(x, y)| {
            let r = logistic4(*x, b) - y;
            r * r
        })
        .sum()
}

/// Solves a 4×4 system by Gaussian elimination with partial pivoting.
fn solve4(mut a: [[f64; 4]; 4], mut b: [f64; 4]) -> Option<[f64; 4]> {
    for col in 0..4 {
        let piv = (col..4).max_by(|&i, &j| a[i][col].abs().total_cmp(&a[j][col].abs()))?;
        if a[piv][col].abs() < 1e-300 {
            return None;
        }
        a.swap(col, piv);
        b.swap(col, piv);
        for row in col + 1..4 {
            let f = a[row][col] / a[col][col];
            for k in col..4 {
                a[row][k] -= f * a[col][k];
            }
            b[row] -= f * b[col];
        }
    }
    let mut x = [0.0; 4];
    for row in (0..4).rev() {
        let s: f64 = (row + 1..4).map(|k| a[row][k] * x[k]).sum();
        x[row] = (b[row] - s) / a[row][row];
    }
    x.iter().all(|v| v.is_finite()).then_some(x)
}

/// Levenberg–Marquardt from one starting point. The width is optimised as
/// `ln β4`, kept in `[ln lo, ln hi]`.
fn levenberg_marquardt(pred: &[f64], gt: &[f64], start: [f64; 4], lo: f64, hi: f64) -> LogisticFit {
    let (llo, lhi) = (lo.ln(), hi.ln());
    let to_params = |t: &[f64; 4]| [t[0], t[1], t[2], t[3].exp()];
    let mut t = [start[0], start[1], start[2], start[3].clamp(lo, hi).ln()];
    let mut cost = sse(pred, gt, &to_params(&t));
    let mut damping = 1e-3;
    let mut converged = false;
    for _ in 0..LOGISTIC_MAX_ITERS {
        let b = to_params(&t);
        let mut jtj = [[0.0; 4]; 4];
        let mut jtr = [0.0; 4];
        for (x, y) in pred.iter().zip(gt) {
            let z = (x - b[2]) / b[3];
            let s = crate::autograd::sigmoid(z);
            let ds = (b[0] - b[1]) * s * (1.0 - s);
            let j = [s, 1.0 - s, -ds / b[3], -ds * z];
            let r = logistic4(*x, &b) - y;
            for p in 0..4 {
                jtr[p] += j[p] * r;
                for q in 0..4 {
                    jtj[p][q] += j[p] * j[q];
                }
            }
        }
        let mut improved = false;
        while damping < 1e16 {
            let mut a = jtj;
            for (p, row) in a.iter_mut().enumerate() {
                row[p] += damping * (jtj[p][p] + 1e-12);
            }
            let rhs = jtr.map(|v| -v);
            if let Some(step) = solve4(a, rhs) {
                let mut cand = [t[0] + step[0], t[1] + step[1], t[2] + step[2], t[3] + step[3]];
                cand[3] = cand[3].clamp(llo, lhi);
                let c = sse(pred, gt, &to_params(&cand));
                if c.is_finite() && c < cost {
                    let rel = (cost - c) / cost.max(1e-300);
                    t = cand;
                    cost = c;
                    damping = (damping / 3.0).max(1e-12);
                    improved = true;
                    if rel < 1e-14 {
                        converged = true;
                    }
                    break;
                }
            }
            damping *= 4.0;
        }
        if !improved {
            // No descent direction left at any damping: a stationary point.
            converged = true;
        }
        if converged || cost == 0.0 {
            converged = true;
            break;
        }
    }
    LogisticFit {
        params: to_params(&t),
        sse: cost,
        converged,
    }
}

/// Levels for a fixed centre and width by ordinary least squares; `None`
/// when the sigmoid is constant over the data.
fn levels_for(pred: &[f64], gt: &[f64], centre: f64, width: f64) -> Option<[f64; 4]> {
    let s: Vec<f64> = pred
        .iter()
        .map(|x| crate::autograd::sigmoid((x - centre) / width))
        .collect();
    let (ms, my) = (mean(&s), mean(gt));
    let sss: f64 = s.iter().map(|v| (v - ms) * (v - ms)).sum();
    if sss < 1e-12 {
        return None;
    }
    let slope = s.iter().zip(gt).map(|(a, b)| (a - ms) * (b - my)).sum::<f64>() / sss;
    let low = my - slope * ms;
    Some([low + slope, low, centre, width])
}

/// Least-squares fit of the four-parameter logistic mapping `pred → gt`.
///
/// Several deterministic starts are refined and the best result is kept: the
/// conventional one (`β1 = max gt, β2 = min gt, β3 = mean pred, β4 = std
/// pred`), one in the nearly linear regime that reproduces the ordinary
/// least-squares line, and a grid of centres at the prediction deciles 1 to
/// 9 and widths of 0.03, 0.1, 0.3 and 1 standard deviation, each with
/// least-squares levels. `converged` reports whether the chosen run
/// reached a stationary point within the budget.
pub fn fit_logistic(pred: &[f64], gt: &[f64]) -> Result<LogisticFit> {
    check_pair(pred, gt, 5)?;
    if is_constant(pred) {
        return Err(Error::UndefinedCorrelation("constant predictions".into()));
    }
    let sd = std_dev(pred);
    let (lo, hi) = (1e-6 * sd, 1e8 * sd);
    let max = gt.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let min = gt.iter().cloned().fold(f64::INFINITY, f64::min);
    let mut starts = vec![[max, min, mean(pred), sd]];

    let (mx, my) = (mean(pred), mean(gt));
    let sxy: f64 = pred.iter().zip(gt).map(|(x, y)| (x - mx) * (y - my)).sum();
    let sxx: f64 = pred.iter().map(|x| (x - mx) * (x - mx)).sum();
    let slope = sxy / sxx;
    let width = 1e4 * sd;
    starts.push([my + 2.0 * width * slope, my - 2.0 * width * slope, mx, width]);

    let mut sorted = pred.to_vec();
    sorted.sort_by(f64::total_cmp);
    for decile in 1..10 {
        let centre = sorted[(decile * (sorted.len() - 1)) / 10];
        for w in [0.03, 0.1, 0.3, 1.0] {
            starts.extend(levels_for(pred, gt, centre, w * sd));
        }
    }
    let best = starts
        .into_iter()
        .map(|s| levenberg_marquardt(pred, gt, s, lo, hi))
        .reduce(|a, b| if b.sse < a.sse { b } else { a })
        .expect("at least one start");
    Ok(best)
}

/// PLCC and RMSE on logistically mapped predictions.
pub fn plcc_rmse(pred: &[f64], gt: &[f64]) -> Result<(f64, f64, LogisticFit)> {
    let fit = fit_logistic(pred, gt)?;
    let mapped: Vec<f64> = pred.iter().map(|x| fit.map(*x)).collect();
    let plcc = pearson(&mapped, gt)?;
    let rmse = (fit.sse / pred.len() as f64).sqrt();
    Ok((plcc, rmse, fit))
}

pub fn evaluate_mos(pred: &[f64], gt: &[f64]) -> Result<MosEvalReport> {
    let srcc = srcc(pred, gt)?;
    let (plcc, rmse, fit) = plcc_rmse(pred, gt)?;
    Ok(MosEvalReport {
        srcc,
        plcc,
        rmse,
        logistic_params: fit.params,
    })
}

fn kl_base2(p: &[f64], m: &[f64]) -> f64 {
    p.iter()
        .zip(m)
        .filter(|(p, _)| **p > 0.0)
        .map(|(p, m)| p * (p / m).log2())
        .sum()
}

/// Jensen–Shannon distance with base-2 logarithms, in `[0, 1]`.
pub fn jsd(p: &[f64], q: &[f64]) -> f64 {
    let m: Vec<f64> = p.iter().zip(q).map(|(a, b)| 0.5 * (a + b)).collect();
    let div = 0.5 * kl_base2(p, &m) + 0.5 * kl_base2(q, &m);
    div.clamp(0.0, 1.0).sqrt()
}

pub fn intersection(p: &[f64], q: &[f64]) -> f64 {
    p.iter().zip(q).map(|(a, b)| a.min(*b)).sum()
}

pub fn cosine(p: &[f64], q: &[f64]) -> f64 {
    let dot: f64 = p.iter().zip(q).map(|(a, b)| a * b).sum();
    let np = p.iter().map(|a| a * a).sum::<f64>().sqrt();
    let nq = q.iter().map(|a| a * a).sum::<f64>().sqrt();
    dot / (np * nq)
}

pub fn dos_rmse(p: &[f64], q: &[f64]) -> f64 {
    let ss: f64 = p.iter().zip(q).map(|(a, b)| (a - b) * (a - b)).sum();
    (ss / p.len() as f64).sqrt()
}

pub fn dos_metrics(pred: &OpinionDistribution, gt: &OpinionDistribution) -> Result<DosEvalReport> {
    if pred.len() != gt.len() || pred.scale() != gt.scale() {
        return Err(Error::ScaleMismatch(format!(
            "{}-level prediction against {}-level ground truth",
            pred.len(),
            gt.len()
        )));
    }
    let (p, q) = (pred.probs(), gt.probs());
    Ok(DosEvalReport {
        jsd: jsd(p, q),
        emd: emd(p, q),
        rmse: dos_rmse(p, q),
        intersection: intersection(p, q),
        cosine: cosine(p, q),
    })
}

/// One line of the results schema.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SplitResult {
    pub split_id: String,
    pub mos: MosSummary,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub dos: Option<DosEvalReport>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MosSummary {
    pub srcc: f64,
    pub plcc: f64,
    pub rmse: f64,
}

impl From<&MosEvalReport> for MosSummary {
    fn from(r: &MosEvalReport) -> Self {
        MosSummary {
            srcc: r.srcc,
            plcc: r.plcc,
            rmse: r.rmse,
        }
    }
}

impl SplitResult {
    /// Arithmetic mean over splits. DOS is averaged only when every split has it.
    pub fn mean(results: &[SplitResult], split_id: &str) -> Option<SplitResult> {
        if results.is_empty() {
            return None;
        }
        let n = results.len() as f64;
        let m = |f: fn(&MosSummary) -> f64| results.iter().map(|r| f(&r.mos)).sum::<f64>() / n;
        let dos: Option<Vec<DosEvalReport>> = results.iter().map(|r| r.dos).collect();
        Some(SplitResult {
            split_id: split_id.to_string(),
            mos: MosSummary {
                srcc: m(|r| r.srcc),
                plcc: m(|r| r.plcc),
                rmse: m(|r| r.rmse),
            },
            dos: dos.and_then(|d| DosEvalReport::mean(&d)),
        })
    }
}
