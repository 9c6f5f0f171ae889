//! WebAssembly bindings for the demo page in `www/`.
//!
//! Each exported function has a plain Rust twin (`*_impl`) so the logic can be
//! tested on the host, where `JsError` cannot be constructed.

use iqa_core::losses::emd;
use iqa_core::metrics::{cosine, dos_rmse, intersection, jsd};
use iqa_core::rating_stats::{expected_sos, gaussian_dos, mos_of, sos_of, QualityScale};
use iqa_core::Error;
use wasm_bindgen::prelude::*;

fn to_js(e: Error) -> JsError {
    JsError::new(&e.to_string())
}

/// Discretised Gaussian followed by its recomputed mean and deviation:
/// `[p_1, ..., p_C, mos, sos]`.
pub fn gaussian_dos_impl(mos: f64, sos: f64, levels: usize, start: f64, end: f64) -> Result<Vec<f64>, Error> {
    let scale = QualityScale::uniform(levels, start, end)?;
    let dos = gaussian_dos(mos, sos, &scale)?;
    let (m, s) = (mos_of(&dos), sos_of(&dos));
    let mut out = dos.into_probs();
    out.extend([m, s]);
    Ok(out)
}

#[wasm_bindgen]
pub fn gaussian_distribution(mos: f64, sos: f64, levels: usize, start: f64, end: f64) -> Result<Vec<f64>, JsError> {
    gaussian_dos_impl(mos, sos, levels, start, end).map_err(to_js)
}

fn normalise(v: &[f64]) -> Result<Vec<f64>, Error> {
    if v.iter().any(|x| !x.is_finite() || *x < 0.0) {
        return Err(Error::InvalidDistribution("entries must be finite and non-negative".into()));
    }
    let sum: f64 = v.iter().sum();
    if sum <= 0.0 {
        return Err(Error::InvalidDistribution("distribution has no mass".into()));
    }
    Ok(v.iter().map(|x| x / sum).collect())
}

/// Distances between two histograms after normalising each to unit mass:
/// `[emd, jsd, intersection, cosine, rmse]`.
pub fn compare_impl(p: &[f64], q: &[f64]) -> Result<Vec<f64>, Error> {
    if p.len() != q.len() || p.is_empty() {
        return Err(Error::ScaleMismatch(format!("{} bins against {}", p.len(), q.len())));
    }
    let (p, q) = (normalise(p)?, normalise(q)?);
    Ok(vec![emd(&p, &q), jsd(&p, &q), intersection(&p, &q), cosine(&p, &q), dos_rmse(&p, &q)])
}

#[wasm_bindgen]
pub fn compare_distributions(p: Vec<f64>, q: Vec<f64>) -> Result<Vec<f64>, JsError> {
    compare_impl(&p, &q).map_err(to_js)
}

/// Expected SOS at `points` evenly spaced MOS values across the range,
/// interleaved as `[mos_0, sos_0, mos_1, sos_1, ...]`.
pub fn sos_curve_impl(a: f64, start: f64, end: f64, points: usize) -> Result<Vec<f64>, Error> {
    let scale = QualityScale::uniform(2, start, end)?;
    if points < 2 {
        return Err(Error::Config("need at least two curve points".into()));
    }
    let mut out = Vec::with_capacity(2 * points);
    for i in 0..points {
        let m = start + (end - start) * i as f64 / (points - 1) as f64;
        out.extend([m, expected_sos(m, &scale, a)?]);
    }
    Ok(out)
}

#[wasm_bindgen]
pub fn sos_curve(a: f64, start: f64, end: f64, points: usize) -> Result<Vec<f64>, JsError> {
    sos_curve_impl(a, start, end, points).map_err(to_js)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn gaussian_tail_carries_moments() {
        let v = gaussian_dos_impl(3.0, 0.8, 5, 1.0, 5.0).unwrap();
        assert_eq!(v.len(), 7);
        assert!((v[..5].iter().sum::<f64>() - 1.0).abs() < 1e-12);
        assert_eq!(v[5], 3.0);
        assert!(gaussian_dos_impl(3.0, 0.0, 5, 1.0, 5.0).is_err());
    }

    #[test]
    fn compare_normalises() {
        let a = compare_impl(&[1.0, 1.0, 2.0], &[2.0, 2.0, 4.0]).unwrap();
        assert!(a[0].abs() < 1e-15 && a[1].abs() < 1e-15);
        assert!((a[2] - 1.0).abs() < 1e-15 && (a[3] - 1.0).abs() < 1e-12);
        assert!(compare_impl(&[1.0], &[1.0, 2.0]).is_err());
        assert!(compare_impl(&[0.0, 0.0], &[1.0, 2.0]).is_err());
    }

    #[test]
    fn curve_vanishes_at_ends() {
        let c = sos_curve_impl(0.1477, 1.0, 5.0, 5).unwrap();
        assert_eq!((c[1], c[9]), (0.0, 0.0));
        assert!((c[5] - (0.1477f64 * 4.0).sqrt()).abs() < 1e-15);
    }
}
