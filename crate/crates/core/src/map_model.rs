//! Empirical detection-quality model: a cubic mAP(p) curve over the uplink
//! resolution, plus a least-squares fitter for regenerating coefficients
//! from measured (resolution, mAP) pairs.

use std::path::Path;

use crate::error::Error;
use crate::Result;

/// Coefficients of the default curve, highest degree first. Cubic fit of
/// detector mAP against the side resolution of the uplinked frame, valid on
/// [64, 416] ppi.
pub const DEFAULT_COEFFS: [f64; 4] = [4.5e-6, -4.7e-3, 1.6, -90.0];

/// Default validity domain of [`DEFAULT_COEFFS`], in ppi.
pub const DEFAULT_DOMAIN: (f64, f64) = (64.0, 416.0);

/// Cubic detection-quality curve `mAP = c3 p^3 + c2 p^2 + c1 p + c0`,
/// clamped to a physical score range.
#[derive(Debug, Clone, PartialEq)]
pub struct MapCurve {
    /// (c3, c2, c1, c0).
    coeffs: [f64; 4],
    domain: (f64, f64),
    clamp_range: (f64, f64),
}

impl Default for MapCurve {
    fn default() -> Self {
        MapCurve::new(DEFAULT_COEFFS, DEFAULT_DOMAIN)
    }
}

impl MapCurve {
    /// Curve with the given coefficients (highest degree first), clamped to
    /// [0, 100] like any percentage score.
    pub fn new(coeffs: [f64; 4], domain: (f64, f64)) -> Self {
        MapCurve {
            coeffs,
            domain,
            clamp_range: (0.0, 100.0),
        }
    }

    pub fn coeffs(&self) -> [f64; 4] {
        self.coeffs
    }

    pub fn domain(&self) -> (f64, f64) {
        self.domain
    }

    /// Raw polynomial value without clamping; used for fit diagnostics.
    pub fn raw(&self, p: f64) -> f64 {
        let [c3, c2, c1, c0] = self.coeffs;
        ((c3 * p + c2) * p + c1) * p + c0
    }

    /// Clamped mAP score at resolution `p`.
    ///
    /// Evaluation outside the fitted domain is rejected rather than
    /// extrapolated.
    pub fn score(&self, p: f64) -> Result<f64> {
        let (lo, hi) = self.domain;
        if !(p >= lo && p <= hi) {
            return Err(Error::OutOfDomain { p, lo, hi });
        }
        let (cl, ch) = self.clamp_range;
        Ok(self.raw(p).clamp(cl, ch))
    }

    /// Writes the four coefficients, highest degree first, one per line.
    pub fn save(&self, path: &Path) -> Result<()> {
        let text = self
            .coeffs
            .iter()
            .map(|c| format!("{c:e}\n"))
            .collect::<String>();
        std::fs::write(path, text)?;
        Ok(())
    }

    /// Reads a coefficient file written by [`MapCurve::save`]. The domain is
    /// not stored in the file and must be supplied by the caller.
    pub fn load(path: &Path, domain: (f64, f64)) -> Result<Self> {
        let text = std::fs::read_to_string(path)?;
        let values: Vec<f64> = text
            .split_whitespace()
            .map(|tok| {
                tok.parse::<f64>()
                    .map_err(|_| Error::parse("curve file", format!("bad coefficient \"{tok}\"")))
            })
            .collect::<Result<_>>()?;
        if values.len() != 4 {
            return Err(Error::parse(
                "curve file",
                format!("expected 4 coefficients, got {}", values.len()),
            ));
        }
        Ok(MapCurve::new([values[0], values[1], values[2], values[3]], domain))
    }
}

/// A fitted curve together with the root-mean-square residual of the fit.
#[derive(Debug, Clone)]
pub struct FittedCurve {
    pub curve: MapCurve,
    pub residual_rms: f64,
}

/// Ordinary least-squares cubic fit of (resolution, mAP) pairs.
///
/// The fit is solved through normal equations in a shifted/scaled basis
/// (resolutions mapped to roughly [-1, 1]) to keep the 4x4 system well
/// conditioned, then expanded back to monomial coefficients in p. The fitted
/// curve's domain is the input resolution range.
pub fn fit_curve(pairs: &[(f64, f64)]) -> Result<FittedCurve> {
    const DEGREE: usize = 3;
    let needed = DEGREE + 1;
    let mut distinct: Vec<f64> = pairs.iter().map(|&(p, _)| p).collect();
    distinct.sort_by(|a, b| a.total_cmp(b));
    distinct.dedup();
    if distinct.len() < needed {
        return Err(Error::FitUnderdetermined {
            needed,
            got: distinct.len(),
        });
    }

    let lo = distinct[0];
    let hi = distinct[distinct.len() - 1];
    let mid = 0.5 * (lo + hi);
    let half = 0.5 * (hi - lo);

    // Normal equations sum_j A[i][j] a_j = rhs[i] over the scaled basis
    // u = (p - mid) / half.
    let mut a = [[0.0f64; 4]; 4];
    let mut rhs = [0.0f64; 4];
    for &(p, y) in pairs {
        let u = (p - mid) / half;
        let mut pow = [0.0f64; 2 * DEGREE + 1];
        pow[0] = 1.0;
        for k in 1..pow.len() {
            pow[k] = pow[k - 1] * u;
        }
        for i in 0..=DEGREE {
            for j in 0..=DEGREE {
                a[i][j] += pow[i + j];
            }
            rhs[i] += y * pow[i];
        }
    }
    let scaled = solve4(a, rhs)?;

    // Expand sum_k a_k u^k with u = (p - mid)/half into monomials of p.
    let s = 1.0 / half;
    let t = -mid / half;
    let mut mono = [0.0f64; 4]; // mono[k] multiplies p^k
    let mut upow = [0.0f64; 4]; // coefficients of (s p + t)^k, grown iteratively
    upow[0] = 1.0;
    for (k, &ak) in scaled.iter().enumerate() {
        if k > 0 {
            // upow <- upow * (s p + t)
            let mut next = [0.0f64; 4];
            for (d, &c) in upow.iter().enumerate() {
                if c != 0.0 {
                    next[d] += c * t;
                    if d + 1 < 4 {
                        next[d + 1] += c * s;
                    }
                }
            }
            upow = next;
        }
        for d in 0..4 {
            mono[d] += ak * upow[d];
        }
    }

    let curve = MapCurve::new([mono[3], mono[2], mono[1], mono[0]], (lo, hi));
    let mut sq = 0.0;
    for &(p, y) in pairs {
        let r = curve.raw(p) - y;
        sq += r * r;
    }
    let residual_rms = (sq / pairs.len() as f64).sqrt();
    Ok(FittedCurve { curve, residual_rms })
}

/// Gaussian elimination with partial pivoting on a 4x4 system.
fn solve4(mut a: [[f64; 4]; 4], mut b: [f64; 4]) -> Result<[f64; 4]> {
    for col in 0..4 {
        let pivot = (col..4)
            .max_by(|&i, &j| a[i][col].abs().total_cmp(&a[j][col].abs()))
            .unwrap();
        if a[pivot][col].abs() < 1e-30 {
            return Err(Error::FitSingular("normal equations are rank deficient".into()));
        }
        a.swap(col, pivot);
        b.swap(col, pivot);
        for row in (col + 1)..4 {
            let factor = a[row][col] / a[col][col];
            for k in col..4 {
                a[row][k] -= factor * a[col][k];
            }
            b[row] -= factor * b[col];
        }
    }
    let mut x = [0.0f64; 4];
    for col in (0..4).rev() {
        let mut acc = b[col];
        for k in (col + 1)..4 {
            acc -= a[col][k] * x[k];
        }
        x[col] = acc / a[col][col];
    }
    Ok(x)
}

/// Reads `resolution_ppi,map` pairs from a CSV file with that header.
pub fn read_pairs_csv(path: &Path) -> Result<Vec<(f64, f64)>> {
    let text = std::fs::read_to_string(path)?;
    let mut lines = text.lines();
    match lines.next() {
        Some(header) if header.trim() == "resolution_ppi,map" => {}
        other => {
            return Err(Error::parse(
                "pairs csv",
                format!("expected header \"resolution_ppi,map\", got {other:?}"),
            ))
        }
    }
    let mut pairs = Vec::new();
    for (lineno, line) in lines.enumerate() {
        let line = line.trim();
        if line.is_empty() {
            continue;
        }
        let (p, y) = line.split_once(',').ok_or_else(|| {
            Error::parse("pairs csv", format!("line {}: expected two columns", lineno + 2))
        })?;
        let p: f64 = p.trim().parse().map_err(|_| {
            Error::parse("pairs csv", format!("line {}: bad resolution", lineno + 2))
        })?;
        let y: f64 = y.trim().parse().map_err(|_| {
            Error::parse("pairs csv", format!("line {}: bad map value", lineno + 2))
        })?;
        pairs.push((p, y));
    }
    Ok(pairs)
}
